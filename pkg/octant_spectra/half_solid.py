"""Module for the half-solid operator: periodic on the right, constant vacuum on the left"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from octant_spectra import (
    DEFAULT_TOLERANCES,
    NumericalError,
    Tolerances,
    ValidationError,
)
from octant_spectra.jacobi_core import (
    BandDomainError,
    Interval,
    PeriodicCoefficients,
    Scalar,
    SpectralBands,
    band_edges,
    lyapunov,
)
from octant_spectra.states import (
    GapState,
    PoleError,
    StateKind,
    classify_states,
    phi_p_derivative,
    weyl_m,
)

logger = logging.getLogger(__name__)

VACUUM_CLEARANCE = 4.0
_EDGE_OFFSET = 1e-6
_SCAN_POINTS = 64
_MAX_POLE_HALVINGS = 60
_DEGENERATE_COEFFICIENT = 1e-12


@dataclass(frozen=True)
class HalfSolidSpectrum:
    """
    Dataclass for the spectrum of the half-solid operator.

    `eigenvalues[n - 1]` is the eigenvalue in the gap n = 1..p-1 or None;
    `top_gap_eigenvalues` lists eigenvalues found between the periodic
    spectrum and the vacuum band.
    """

    tau: float
    bands: tuple[Interval, ...]
    gaps: tuple[Interval, ...]
    eigenvalues: tuple[Optional[float], ...]
    top_gap_eigenvalues: tuple[float, ...]

    @property
    def vacuum_band(self) -> Interval:
        return self.bands[-1]


def vacuum_dispersion(lam: Scalar, tau: float) -> tuple[Scalar, Scalar]:
    """
    Root z of z + 1/z = lam - tau with |z| <= 1, and z_1 = 1/z.

    :param lam: spectral parameter, off the open vacuum band when real
    :param tau: vacuum potential
    :return: (z, z_1)
    """
    t = (lam - tau) / 2.0
    if isinstance(lam, complex) and lam.imag != 0.0:
        root = np.sqrt(complex(t) * t - 1.0)
        large = max(t + root, t - root, key=abs)
        return complex(1.0 / large), complex(large)

    t = float(np.real(t))
    if abs(t) < 1.0:
        message = f"lam={lam!r} lies inside the vacuum band [{tau - 2}, {tau + 2}]"
        logger.info(message)
        raise BranchError(message)
    large = t + math.copysign(math.sqrt(t * t - 1.0), t)
    return 1.0 / large, large


def wronskian_w(coeffs: PeriodicCoefficients, tau: float, lam: float) -> float:
    """
    w = m_+ - a_p z_1, whose zeros in a gap are the half-solid eigenvalues.

    :param coeffs: periodic coefficients of the right half
    :param tau: vacuum potential
    :param lam: spectral parameter off the spectra of both halves
    :return: w(lam)
    """
    _, z1 = vacuum_dispersion(lam, tau)
    m_plus = weyl_m(coeffs, lam, sign=1).m_plus
    return float(np.real(m_plus)) - coeffs.a[-1] * float(z1)


def _check_tau(bands: SpectralBands, tau: float) -> None:
    if tau < bands.top + VACUUM_CLEARANCE:
        message = (
            f"tau={tau} must be at least lambda_p^+ + {VACUUM_CLEARANCE} = "
            f"{bands.top + VACUUM_CLEARANCE}"
        )
        logger.info(message)
        raise ThresholdError(message)


def _pole_bracket_end(
    coeffs: PeriodicCoefficients, tau: float, gap: Interval, mu: float
) -> float:
    """Point left of the m_+ pole at mu where w is already negative"""
    h = (mu - gap.lower) / 2.0
    for _ in range(_MAX_POLE_HALVINGS):
        lam = mu - h
        if wronskian_w(coeffs, tau, lam) < 0.0:
            return lam
        h /= 2.0
    message = f"w stays positive left of the pole at {mu}; raise tau"
    logger.info(message)
    raise ThresholdError(message)


def _scan_sign_changes(
    coeffs: PeriodicCoefficients, tau: float, lower: float, upper: float
) -> list[tuple[float, float]]:
    """Brackets of sign changes of w on a uniform grid, skipping poles"""
    grid = np.linspace(lower, upper, _SCAN_POINTS)
    values = []
    for lam in grid:
        try:
            values.append(wronskian_w(coeffs, tau, float(lam)))
        except PoleError:
            values.append(math.nan)
    brackets = []
    for i in range(len(grid) - 1):
        left, right = values[i], values[i + 1]
        if math.isfinite(left) and math.isfinite(right) and left * right < 0.0:
            # a jump through a pole also flips sign; only + to - is a zero
            if left > 0.0 > right:
                brackets.append((float(grid[i]), float(grid[i + 1])))
    return brackets


def _upper_edge_brackets(
    coeffs: PeriodicCoefficients, tau: float, gap: Interval, start: float, floor: float
) -> list[tuple[float, float]]:
    """Sign changes of w between `start` and the upper gap edge on a geometric grid"""
    brackets = []
    left, left_value = start, wronskian_w(coeffs, tau, start)
    offset = gap.upper - start
    while offset > floor:
        offset /= 2.0
        right = gap.upper - offset
        right_value = wronskian_w(coeffs, tau, right)
        if left_value > 0.0 > right_value:
            brackets.append((left, right))
        left, left_value = right, right_value
    return brackets


def _root(coeffs: PeriodicCoefficients, tau: float, lower: float, upper: float) -> float:
    lam = optimize.brentq(
        lambda x: wronskian_w(coeffs, tau, x),
        lower,
        upper,
        xtol=1e-14 * (1.0 + abs(lower)),
        rtol=1e-15,
    )
    logger.debug(
        f"Half-solid eigenvalue {lam!r}, residual {wronskian_w(coeffs, tau, lam):.3e}"
    )
    return float(lam)


def find_gap_eigenvalues(
    coeffs: PeriodicCoefficients,
    tau: float,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[Optional[float], ...]:
    """
    Eigenvalues of the half-solid operator in the gaps 1..p-1.

    w decreases on every gap. In a gap whose state is an eigenvalue, m_+ has
    a pole at mu_n and w has exactly one zero in (lambda_n^-, mu_n) once tau
    is large. Other gaps carry no zero once tau is large; at moderate tau a
    state sitting just below the upper gap edge still leaves one zero there,
    which is searched on a grid that halves its distance to the edge and
    returned. More than one zero is reported as ThresholdError.

    :param coeffs: periodic coefficients of the right half
    :param tau: vacuum potential, at least lambda_p^+ + 4
    :param tolerances: tolerances for band edges and classification
    :return: per-gap eigenvalue or None
    """
    bands = band_edges(coeffs, tolerances)
    _check_tau(bands, tau)
    states = {
        state.n: state
        for state in classify_states(coeffs, tolerances=tolerances, bands=bands)
    }

    eigenvalues: list[Optional[float]] = []
    for n, gap in enumerate(bands.gaps, start=1):
        state = states.get(n)
        if state is None:
            eigenvalues.append(None)
            continue
        lower = gap.lower + _EDGE_OFFSET * gap.length
        upper = gap.upper - _EDGE_OFFSET * gap.length
        if wronskian_w(coeffs, tau, lower) <= 0.0:
            message = f"w is not positive at the lower edge of gap {n}; raise tau"
            logger.info(message)
            raise ThresholdError(message)

        if state.kind is StateKind.EIGENVALUE:
            end = _pole_bracket_end(coeffs, tau, gap, state.mu)
            eigenvalues.append(_root(coeffs, tau, lower, end))
            continue

        floor = tolerances.edge_residual * max(1.0, abs(gap.upper))
        brackets = _scan_sign_changes(coeffs, tau, lower, upper)
        brackets += _upper_edge_brackets(coeffs, tau, gap, upper, floor)
        if len(brackets) > 1:
            message = (
                f"Gap {n} holds a {state.kind.value} state but w changes sign at "
                f"{brackets}; raise tau"
            )
            logger.info(message)
            raise ThresholdError(message)
        if brackets:
            logger.warning(
                f"Gap {n} holds a {state.kind.value} state close to its upper edge; "
                f"w still has a zero at tau={tau}"
            )
            eigenvalues.append(_root(coeffs, tau, *brackets[0]))
            continue
        eigenvalues.append(None)
    return tuple(eigenvalues)


def find_top_gap_eigenvalues(
    coeffs: PeriodicCoefficients,
    tau: float,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[float, ...]:
    """Zeros of w between lambda_p^+ and the bottom of the vacuum band"""
    bands = band_edges(coeffs, tolerances)
    _check_tau(bands, tau)
    span = tau - 2.0 - bands.top
    lower = bands.top + _EDGE_OFFSET * span
    upper = tau - 2.0 - _EDGE_OFFSET * span
    return tuple(
        _root(coeffs, tau, left, right)
        for left, right in _scan_sign_changes(coeffs, tau, lower, upper)
    )


def half_solid_spectrum(
    coeffs: PeriodicCoefficients,
    tau: float,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> HalfSolidSpectrum:
    """
    Bands, gaps and eigenvalues of the half-solid operator.

    :param coeffs: periodic coefficients of the right half
    :param tau: vacuum potential
    :param tolerances: numerical tolerances
    :return: spectrum including the vacuum band and the top gap
    """
    bands = band_edges(coeffs, tolerances)
    _check_tau(bands, tau)
    vacuum = Interval(lower=tau - 2.0, upper=tau + 2.0)
    return HalfSolidSpectrum(
        tau=float(tau),
        bands=bands.bands + (vacuum,),
        gaps=bands.gaps + (Interval(lower=bands.top, upper=vacuum.lower),),
        eigenvalues=find_gap_eigenvalues(coeffs, tau, tolerances),
        top_gap_eigenvalues=find_top_gap_eigenvalues(coeffs, tau, tolerances),
    )


def _eigenvalue_state(
    coeffs: PeriodicCoefficients, n: int, tolerances: Tolerances
) -> GapState:
    states = {state.n: state for state in classify_states(coeffs, tolerances=tolerances)}
    state = states.get(n)
    if state is None or state.kind is not StateKind.EIGENVALUE:
        message = f"Gap {n} is closed or does not hold an eigenvalue state"
        logger.info(message)
        raise BandDomainError(message)
    return state


def asymptotic_coefficient(
    coeffs: PeriodicCoefficients,
    n: int,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """
    c(mu_n) = 2 F_o(mu_n) / (a_p phi_p'(mu_n)).

    The half-solid eigenvalue is mu_n(tau) = mu_n - c/tau + O(1/tau^2), with
    c > 0: the vacuum band above pushes the level down.

    :param coeffs: periodic coefficients
    :param n: gap index holding an eigenvalue state
    :param tolerances: finite-difference step and classification tolerances
    :return: c(mu_n)
    """
    state = _eigenvalue_state(coeffs, n, tolerances)
    values = lyapunov(coeffs, state.mu)
    derivative = phi_p_derivative(coeffs, state.mu, tolerances.finite_difference_step)
    c = 2.0 * float(np.real(values.Fo)) / (coeffs.a[-1] * derivative)
    if abs(c) < _DEGENERATE_COEFFICIENT:
        message = f"Asymptotic coefficient {c!r} vanishes in gap {n}"
        logger.info(message)
        raise DegeneracyError(message)
    return c


def fit_asymptotic_coefficient(
    coeffs: PeriodicCoefficients,
    n: int,
    taus: Sequence[float],
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """
    Estimate c(mu_n) from a tau sweep.

    (mu_n(tau) - mu_n) tau is fitted by c_0 + c_1/tau + ... with as many
    terms as the sweep allows, up to three; the estimate is -c_0.

    :param coeffs: periodic coefficients
    :param n: gap index holding an eigenvalue state
    :param taus: at least two distinct vacuum potentials
    :param tolerances: numerical tolerances
    :return: fitted c(mu_n)
    """
    taus = np.asarray(sorted(set(float(t) for t in taus)))
    if taus.size < 2:
        message = f"A fit needs at least two distinct tau values, got {taus.tolist()}"
        logger.info(message)
        raise ValueError(message)
    mu = _eigenvalue_state(coeffs, n, tolerances).mu
    shifted = []
    for tau in taus:
        mu_tau = find_gap_eigenvalues(coeffs, float(tau), tolerances)[n - 1]
        shifted.append((mu_tau - mu) * tau)
    terms = min(3, taus.size)
    design = np.vander(1.0 / taus, terms, increasing=True)
    coefficients, *_ = np.linalg.lstsq(design, np.array(shifted), rcond=None)
    logger.debug(f"Asymptotic fit for gap {n}: {coefficients}")
    return float(-coefficients[0])


class BranchError(ValidationError):
    """Exception for evaluating the vacuum branch inside the vacuum band"""


class ThresholdError(ValidationError):
    """Exception for a vacuum potential too small for the asymptotic regime"""


class DegeneracyError(NumericalError):
    """Exception for a vanishing asymptotic coefficient"""
