"""Interface for loading, designing, and certifying separable lattice operators"""
import logging
from dataclasses import dataclass
from os import PathLike
from typing import Optional

import numpy as np

from octant_spectra import DEFAULT_TOLERANCES, NumericalError, Tolerances, ValidationError
from octant_spectra.assembler import (
    ClusterReport,
    ComponentSpectrum,
    assemble,
    component_from_half_line,
    eigenvalues_in_interval,
)
from octant_spectra.coefficients_reader import load_coefficient_list
from octant_spectra.inverse_design import (
    MIN_DESIGN_GAMMA,
    DesignReport,
    design_uniform,
    uniform_design_spec,
    verify_design,
)
from octant_spectra.jacobi_core import Interval, PeriodicCoefficients, band_edges
from octant_spectra.oracle import (
    PerturbationSpec,
    TruncationModel,
    TruncationSpec,
    aligned_length,
    count_in_interval,
    perturb_and_count,
    truncate_and_diagonalize,
)
from octant_spectra.report_writer import save_coefficients
from octant_spectra.states import classify_states

logger = logging.getLogger(__name__)

DEFAULT_PERIOD = 8
DEFAULT_GAMMA = 200.0
CERTIFY_DIMENSION = 2
ISOLATION_GAMMA_PER_DIMENSION = 48.0
ORACLE_PERIODS = 5
ORACLE_EPSILON = 0.01
EMPTY_INTERVAL_FRACTION = 0.5


@dataclass(frozen=True)
class CertifiedDesign:
    """Dataclass for an operator with a certified eigenvalue count on an interval"""

    coefficients: tuple[PeriodicCoefficients, ...]
    gamma: float
    d: int
    interval: Interval
    N: int
    n: Optional[int]
    achieved_eigenvalue: Optional[float]
    isolation_distance: float
    spectrum_below: bool
    spectrum_above: bool
    oracle_count: int
    perturbed_count: int


def components_for(
    coefficients: list[PeriodicCoefficients], tolerances: Tolerances = DEFAULT_TOLERANCES
) -> list[ComponentSpectrum]:
    """Half-line component spectrum of each axis"""
    components = []
    for coeffs in coefficients:
        bands = band_edges(coeffs, tolerances)
        states = classify_states(coeffs, tolerances=tolerances, bands=bands)
        components.append(component_from_half_line(bands, states))
    return components


class App:
    """Class for loading, saving, designing, and certifying coefficients"""

    def __init__(
        self,
        coefficients: Optional[list[PeriodicCoefficients]] = None,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
    ):
        self.coefficients = coefficients or []
        self.tolerances = tolerances

    def load_coefficients(self, path: str | bytes | PathLike[str] | PathLike[bytes] | int):
        """
        Load coefficients from `path`.

        :param path: coefficient JSON file path
        :return: None
        """
        self.coefficients = load_coefficient_list(path)

    def save_coefficients(self, path: str | bytes | PathLike[str] | PathLike[bytes] | int):
        """
        Save coefficients to `path`.

        :param path: coefficient JSON file path
        :return: None
        """
        if len(self.coefficients) == 1:
            save_coefficients(path, self.coefficients[0])
        else:
            save_coefficients(path, self.coefficients)

    def design(
        self,
        p: int = DEFAULT_PERIOD,
        gamma: float = DEFAULT_GAMMA,
        d: int = CERTIFY_DIMENSION,
        sheet_sign: int = 1,
    ) -> DesignReport:
        """
        Design uniform-gap coefficients and keep them as the current set.

        :param p: period
        :param gamma: gap length
        :param d: dimension fixing the state positions
        :param sheet_sign: +1 for eigenvalue states, -1 for resonances
        :return: verification of the design
        """
        spec = uniform_design_spec(p, gamma, d, sheet_sign)
        coeffs = design_uniform(spec, gamma, self.tolerances)
        self.coefficients = [coeffs]
        return verify_design(coeffs, spec, gamma, self.tolerances)

    def assemble(self, d: int, gamma: float) -> ClusterReport:
        """Cluster report of the current coefficients, repeated on every axis if single"""
        coefficients = self.coefficients * d if len(self.coefficients) == 1 else self.coefficients
        return assemble(d, components_for(coefficients, self.tolerances), gamma)

    def certify(
        self, interval: Interval, N: int, d: int = CERTIFY_DIMENSION, seed: int = 0
    ) -> CertifiedDesign:
        """
        Build an operator on the quarter plane with exactly N eigenvalues in
        `interval` and no other spectrum there.

        For N >= 1 the point K_n^e with n = N - 1 has multiplicity N; gamma is
        chosen so that its isolation interval is exactly `interval`. For
        N = 0 the interval is placed in the empty stretch between K_0^e and
        the next cluster.

        :param interval: target interval
        :param N: number of eigenvalues
        :param d: dimension, only 2 is supported
        :param seed: seed of the random perturbation check
        :return: certified design
        """
        if d != CERTIFY_DIMENSION:
            message = f"Certification is available for d={CERTIFY_DIMENSION}, got d={d}"
            logger.info(message)
            raise ValidationError(message)
        bounded = np.isfinite([interval.lower, interval.upper]).all()
        if N < 0 or not bounded or interval.length <= 0:
            message = f"Need N >= 0 and a bounded nonempty interval, got N={N}, {interval}"
            logger.info(message)
            raise ValidationError(message)

        e1 = 1.0 / (4.0 * d)
        if N >= 1:
            n: Optional[int] = N - 1
            p = max(DEFAULT_PERIOD, N + 1)
            gamma = 4.0 * d * interval.length
            fraction = 1.0 / (4.0 * d)
            target = n + d * e1
        else:
            n = None
            p = DEFAULT_PERIOD
            gamma = interval.length / EMPTY_INTERVAL_FRACTION
            fraction = EMPTY_INTERVAL_FRACTION
            target = 0.5 * ((d * e1 + e1) + (1.0 - e1))

        minimal_gamma = max(MIN_DESIGN_GAMMA, ISOLATION_GAMMA_PER_DIMENSION * d)
        if gamma < minimal_gamma:
            minimal_length = minimal_gamma * fraction
            message = (
                f"|I|={interval.length} is too short to isolate N={N} eigenvalues; "
                f"the minimal length is {minimal_length}"
            )
            logger.info(message)
            raise InfeasibleIntervalError(message, minimal_length=minimal_length)

        logger.debug(f"Certify N={N}: p={p}, gamma={gamma}")
        coeffs = design_uniform(uniform_design_spec(p, gamma, d), gamma, self.tolerances)
        report = assemble(d, components_for([coeffs] * d, self.tolerances), gamma)
        if n is not None:
            target = report.point(n).value
        offset = (interval.center - gamma * target) / d
        shifted = coeffs.with_shift(coeffs.shift + offset)
        self.coefficients = [shifted] * d

        report = assemble(d, components_for(self.coefficients, self.tolerances), gamma)
        count, certificate = eigenvalues_in_interval(report, interval, gamma)
        achieved = None if n is None else gamma * report.point(n).value

        length = aligned_length(ORACLE_PERIODS * p, p)
        truncation = TruncationSpec(
            model=TruncationModel.BOX, lengths=(length,) * d, half_line_axes=d
        )
        oracle_values = truncate_and_diagonalize(
            truncation, self.coefficients, window=interval, tolerances=self.tolerances
        )
        oracle_count = count_in_interval(oracle_values, interval, self.tolerances)
        perturbation = PerturbationSpec.random(
            np.random.default_rng(seed), ORACLE_EPSILON, (p,) * d
        )
        perturbed = perturb_and_count(
            truncation, self.coefficients, perturbation, interval, self.tolerances
        )

        design = CertifiedDesign(
            coefficients=tuple(self.coefficients),
            gamma=gamma,
            d=d,
            interval=interval,
            N=N,
            n=n,
            achieved_eigenvalue=achieved,
            isolation_distance=certificate.distance,
            spectrum_below=certificate.spectrum_below,
            spectrum_above=certificate.spectrum_above,
            oracle_count=oracle_count,
            perturbed_count=perturbed.after,
        )
        counts = {count, oracle_count, perturbed.before, perturbed.after}
        if counts != {N} or not certificate.certified:
            message = (
                f"Certification failed: counts {sorted(counts)} for N={N}, "
                f"distance {certificate.distance:.3f}"
            )
            logger.info(message)
            raise CertificationError(message)
        return design


class InfeasibleIntervalError(ValidationError):
    """Exception for an interval too short for the requested isolation"""

    def __init__(self, message: str, minimal_length: float):
        super().__init__(message)
        self.minimal_length = minimal_length


class CertificationError(NumericalError):
    """Exception for a design whose counts or isolation fail re-verification"""
