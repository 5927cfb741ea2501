"""Module for periodic Jacobi recurrences, the Lyapunov function and band structure"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Union

import numpy as np
import numpy.typing as npt
from scipy import linalg, optimize

from octant_spectra import (
    DEFAULT_TOLERANCES,
    NumericalError,
    Tolerances,
    ValidationError,
)

logger = logging.getLogger(__name__)

Scalar = Union[float, complex]

_PRODUCT_TOLERANCE = 1e-12
_SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Interval:
    """Closed real interval [lower, upper]"""

    lower: float
    upper: float

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack

    def overlaps(self, other: "Interval") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def distance_to(self, other: "Interval") -> float:
        """Gap between two intervals, zero when they overlap"""
        return max(0.0, other.lower - self.upper, self.lower - other.upper)

    def scaled(self, factor: float) -> "Interval":
        return Interval(lower=self.lower * factor, upper=self.upper * factor)

    def translated(self, offset: float) -> "Interval":
        return Interval(lower=self.lower + offset, upper=self.upper + offset)


@dataclass(frozen=True)
class PeriodicCoefficients:
    """
    Coefficients of a p-periodic Jacobi operator.

    Hoppings `a` and potential `b` are stored for sites 1..p (so `a[-1]` is
    a_p = a_0). The stored potential has zero mean and the hoppings have unit
    product; the mean energy lives in `shift`, which is added to every b_x at
    evaluation time.
    """

    p: int
    a: tuple[float, ...]
    b: tuple[float, ...]
    shift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        object.__setattr__(self, "shift", float(self.shift))
        self._validate()

    def _validate(self) -> None:
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            message = f"Period must be a positive integer, got p={self.p!r}"
            logger.info(message)
            raise CoefficientValidationError(message)
        if len(self.a) != self.p or len(self.b) != self.p:
            message = (
                f"Expected {self.p} hoppings and {self.p} potential values, got "
                f"{len(self.a)} and {len(self.b)}"
            )
            logger.info(message)
            raise CoefficientValidationError(message)
        values = np.array(self.a + self.b + (self.shift,))
        if not np.all(np.isfinite(values)):
            message = f"Coefficients must be finite: a={self.a}, b={self.b}"
            logger.info(message)
            raise CoefficientValidationError(message)
        if min(self.a) <= 0.0:
            message = f"Hoppings must be positive: a={self.a}"
            logger.info(message)
            raise CoefficientValidationError(message)

        log_a = [math.log(v) for v in self.a]
        log_product = math.fsum(log_a)
        if abs(log_product) > _PRODUCT_TOLERANCE * max(1.0, max(map(abs, log_a))):
            message = f"Hoppings must have unit product, got {math.exp(log_product)!r}"
            logger.info(message)
            raise CoefficientValidationError(message)

        potential_sum = math.fsum(self.b)
        if abs(potential_sum) > _SUM_TOLERANCE * max(1.0, sum(map(abs, self.b))):
            message = f"Potential must have zero mean, got sum {potential_sum!r}"
            logger.info(message)
            raise CoefficientValidationError(message)

    @classmethod
    def free(cls, p: int, shift: float = 0.0) -> "PeriodicCoefficients":
        """Free operator a_x = 1, b_x = 0 written with period `p`"""
        return cls(p=p, a=(1.0,) * p, b=(0.0,) * p, shift=shift)

    @classmethod
    def from_sequences(
        cls, a: Iterable[float], b: Iterable[float], shift: float = 0.0
    ) -> "PeriodicCoefficients":
        """
        Normalize raw positive hoppings and a potential into the stored form.

        The geometric mean of `a` is divided out and the mean of `b` is moved
        into the shift.

        :param a: positive hoppings a_1..a_p
        :param b: potential b_1..b_p
        :param shift: extra energy offset added to the mean of `b`
        :return: normalized coefficients
        """
        a_values = np.asarray(list(a), dtype=float)
        b_values = np.asarray(list(b), dtype=float)
        if a_values.size != b_values.size or a_values.size == 0:
            message = (
                f"Hoppings and potential must be non-empty and of equal length, got "
                f"{a_values.size} and {b_values.size}"
            )
            logger.info(message)
            raise CoefficientValidationError(message)
        if np.any(a_values <= 0.0):
            message = f"Hoppings must be positive: a={a_values.tolist()}"
            logger.info(message)
            raise CoefficientValidationError(message)

        log_a = np.log(a_values)
        log_a = log_a - log_a.mean()
        # last hopping absorbs the rounding so the product is one to the last bit
        log_a[-1] = -math.fsum(log_a[:-1])
        mean = float(b_values.mean())
        return cls(
            p=int(a_values.size),
            a=tuple(np.exp(log_a)),
            b=tuple(b_values - mean),
            shift=shift + mean,
        )

    def with_shift(self, shift: float) -> "PeriodicCoefficients":
        return replace(self, shift=shift)

    @property
    def hoppings(self) -> npt.NDArray[np.float64]:
        return np.array(self.a)

    @property
    def potential(self) -> npt.NDArray[np.float64]:
        """Potential values b_1..b_p with the shift applied"""
        return np.array(self.b) + self.shift

    def hopping(self, x: int) -> float:
        """a_x extended periodically, with a_0 = a_p"""
        return self.a[(x - 1) % self.p]

    def site_potential(self, x: int) -> float:
        """b_x + shift extended periodically"""
        return self.b[(x - 1) % self.p] + self.shift


@dataclass(frozen=True)
class SolutionTable:
    """Fundamental solutions theta and phi on sites 0..x_max"""

    lam: Scalar
    theta: npt.NDArray
    phi: npt.NDArray

    def wronskians(self, coeffs: PeriodicCoefficients) -> npt.NDArray:
        """a_x (theta_x phi_{x+1} - phi_x theta_{x+1}) for x = 0..x_max-1"""
        x = np.arange(self.theta.size - 1)
        a = np.array([coeffs.hopping(int(i)) for i in x])
        return a * (self.theta[:-1] * self.phi[1:] - self.phi[:-1] * self.theta[1:])


@dataclass(frozen=True)
class LyapunovValues:
    """Lyapunov function values and the solution values at the period ends"""

    F: Scalar
    Fo: Scalar
    phi_p: Scalar
    phi_p1: Scalar
    theta_p: Scalar
    theta_p1: Scalar


@dataclass(frozen=True)
class SpectralBands:
    """
    Ordered band edges of a periodic Jacobi operator.

    `edges` holds lambda_0^+, lambda_1^-, lambda_1^+, ..., lambda_{p-1}^+,
    lambda_p^-. Closed gaps have both edges collapsed onto the double root.
    """

    p: int
    edges: tuple[float, ...]
    open_gaps: tuple[bool, ...]

    @property
    def bands(self) -> tuple[Interval, ...]:
        return tuple(
            Interval(lower=self.edges[2 * n], upper=self.edges[2 * n + 1])
            for n in range(self.p)
        )

    @property
    def gaps(self) -> tuple[Interval, ...]:
        """Gaps gamma_1..gamma_{p-1}; a closed gap has zero length"""
        return tuple(
            Interval(lower=self.edges[2 * n - 1], upper=self.edges[2 * n])
            for n in range(1, self.p)
        )

    @property
    def bottom(self) -> float:
        return self.edges[0]

    @property
    def top(self) -> float:
        return self.edges[-1]

    @property
    def total_band_length(self) -> float:
        return sum(band.length for band in self.bands)

    def gap(self, n: int) -> Interval:
        return self.gaps[n - 1]

    def is_open(self, n: int) -> bool:
        return self.open_gaps[n - 1]

    def band_index(self, lam: float, slack: float = 0.0) -> Optional[int]:
        for index, band in enumerate(self.bands):
            if band.contains(lam, slack=slack):
                return index
        return None

    def gap_index(self, lam: float) -> Optional[int]:
        """Index n of the open gap strictly containing `lam`"""
        for n, gap in enumerate(self.gaps, start=1):
            if self.open_gaps[n - 1] and gap.lower < lam < gap.upper:
                return n
        return None

    def normalized(self, gamma: float) -> tuple[Interval, ...]:
        return tuple(band.scaled(1.0 / gamma) for band in self.bands)


def solve_recurrence(
    coeffs: PeriodicCoefficients, lam: Scalar, x_max: int
) -> SolutionTable:
    """
    Fundamental solutions of a_{x-1} f_{x-1} + a_x f_{x+1} + b_x f_x = lam f_x.

    :param coeffs: periodic coefficients (shift added to every b_x)
    :param lam: real or complex spectral parameter
    :param x_max: last site to evaluate
    :return: theta and phi on sites 0..x_max
    """
    if x_max < 1:
        message = f"x_max must be at least 1, got {x_max}"
        logger.info(message)
        raise CoefficientValidationError(message)

    dtype = complex if isinstance(lam, complex) or np.iscomplexobj(lam) else float
    theta = np.zeros(x_max + 1, dtype=dtype)
    phi = np.zeros(x_max + 1, dtype=dtype)
    theta[0], phi[1] = 1.0, 1.0
    for x in range(1, x_max):
        diagonal = lam - coeffs.site_potential(x)
        a_prev, a_next = coeffs.hopping(x - 1), coeffs.hopping(x)
        theta[x + 1] = (diagonal * theta[x] - a_prev * theta[x - 1]) / a_next
        phi[x + 1] = (diagonal * phi[x] - a_prev * phi[x - 1]) / a_next
    return SolutionTable(lam=lam, theta=theta, phi=phi)


def lyapunov(coeffs: PeriodicCoefficients, lam: Scalar) -> LyapunovValues:
    """
    Lyapunov function F = (phi_{p+1} + theta_p)/2 and its odd partner
    Fo = (phi_{p+1} - theta_p)/2.

    :param coeffs: periodic coefficients
    :param lam: real or complex spectral parameter
    :return: Lyapunov values
    """
    table = solve_recurrence(coeffs, lam, coeffs.p + 1)
    p = coeffs.p
    return LyapunovValues(
        F=0.5 * (table.phi[p + 1] + table.theta[p]),
        Fo=0.5 * (table.phi[p + 1] - table.theta[p]),
        phi_p=table.phi[p],
        phi_p1=table.phi[p + 1],
        theta_p=table.theta[p],
        theta_p1=table.theta[p + 1],
    )


def lyapunov_derivative(coeffs: PeriodicCoefficients, lam: Scalar) -> Scalar:
    """
    dF/dlam from the recurrence differentiated in lam.

    :param coeffs: periodic coefficients
    :param lam: spectral parameter
    :return: F'(lam)
    """
    p = coeffs.p
    table = solve_recurrence(coeffs, lam, p + 1)
    d_theta = np.zeros_like(table.theta)
    d_phi = np.zeros_like(table.phi)
    for x in range(1, p + 1):
        diagonal = lam - coeffs.site_potential(x)
        a_prev, a_next = coeffs.hopping(x - 1), coeffs.hopping(x)
        d_theta[x + 1] = (
            diagonal * d_theta[x] + table.theta[x] - a_prev * d_theta[x - 1]
        ) / a_next
        d_phi[x + 1] = (
            diagonal * d_phi[x] + table.phi[x] - a_prev * d_phi[x - 1]
        ) / a_next
    return 0.5 * (d_phi[p + 1] + d_theta[p])


def jacobi_block(
    coeffs: PeriodicCoefficients, length: int, first_site: int = 1
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Diagonal and off-diagonal of the Jacobi matrix on sites
    first_site..first_site+length-1 with Dirichlet conditions outside.

    :param coeffs: periodic coefficients
    :param length: number of sites
    :param first_site: index of the first site
    :return: (diagonal, off_diagonal)
    """
    sites = range(first_site, first_site + length)
    diagonal = np.array([coeffs.site_potential(x) for x in sites])
    off_diagonal = np.array([coeffs.hopping(x) for x in sites][:-1])
    return diagonal, off_diagonal


def floquet_matrix(coeffs: PeriodicCoefficients, k: float) -> npt.NDArray:
    """
    Bloch matrix of the periodic operator at quasimomentum `k`; its
    characteristic polynomial vanishes where F(lam) = cos k.

    :param coeffs: periodic coefficients
    :param k: quasimomentum
    :return: p x p Hermitian matrix
    """
    return _bloch_matrix(coeffs, np.exp(1j * k))


def band_function(coeffs: PeriodicCoefficients, k: float) -> npt.NDArray[np.float64]:
    """Sorted band energies at quasimomentum `k`"""
    return linalg.eigvalsh(floquet_matrix(coeffs, k))


def _bloch_matrix(coeffs: PeriodicCoefficients, multiplier: Scalar) -> npt.NDArray:
    p = coeffs.p
    dtype = float if np.isrealobj(multiplier) else complex
    matrix = np.zeros((p, p), dtype=dtype)
    diagonal, off_diagonal = jacobi_block(coeffs, p)
    matrix[np.diag_indices(p)] = diagonal
    if p > 1:
        index = np.arange(p - 1)
        matrix[index, index + 1] = off_diagonal
        matrix[index + 1, index] = off_diagonal
    matrix[p - 1, 0] += coeffs.a[-1] * multiplier
    matrix[0, p - 1] += coeffs.a[-1] * np.conj(multiplier)
    return matrix


def band_edges(
    coeffs: PeriodicCoefficients,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    polish: bool = True,
) -> SpectralBands:
    """
    All 2p roots of F = +1 and F = -1, sorted and labeled.

    The roots are the eigenvalues of the periodic (k = 0) and antiperiodic
    (k = pi) Bloch matrices. Each simple root is polished by bracketed root
    finding on F -/+ 1 and checked against a residual scaled by |F'|.

    :param coeffs: periodic coefficients
    :param tolerances: tolerances for residual and closed-gap detection
    :param polish: refine and residual-check every edge; the unpolished edges
        are the raw Bloch eigenvalues
    :return: ordered band edges
    """
    p = coeffs.p
    periodic = linalg.eigvalsh(_bloch_matrix(coeffs, 1.0))
    antiperiodic = linalg.eigvalsh(_bloch_matrix(coeffs, -1.0))
    values = np.concatenate([periodic, antiperiodic])
    targets = np.concatenate([np.ones(p), -np.ones(p)])
    order = np.argsort(values, kind="stable")
    values, targets = values[order], targets[order]

    scale = 1.0 + float(np.max(np.abs(values)))
    eigen_error = 1e3 * np.finfo(float).eps * scale
    polished = (
        [
            _polish_edge(coeffs, values, targets, index, eigen_error, tolerances)
            for index in range(2 * p)
        ]
        if polish
        else list(values)
    )
    edges = np.maximum.accumulate(np.array(polished))

    open_gaps = []
    for n in range(1, p):
        lower, upper = edges[2 * n - 1], edges[2 * n]
        is_open = upper - lower > tolerances.closed_gap * (1.0 + abs(lower))
        if not is_open:
            edges[2 * n - 1] = edges[2 * n] = 0.5 * (lower + upper)
        open_gaps.append(bool(is_open))

    bands = SpectralBands(p=p, edges=tuple(float(e) for e in edges), open_gaps=tuple(open_gaps))
    if bands.total_band_length > 4.0 + 1e-9:
        message = (
            f"Band lengths sum to {bands.total_band_length!r} > 4; edges={bands.edges}"
        )
        logger.info(message)
        raise RootFindingError(message)
    logger.debug(f"band_edges p={p}: {bands.edges}")
    return bands


def _polish_edge(
    coeffs: PeriodicCoefficients,
    values: npt.NDArray[np.float64],
    targets: npt.NDArray[np.float64],
    index: int,
    eigen_error: float,
    tolerances: Tolerances,
) -> float:
    edge, target = float(values[index]), float(targets[index])

    def residual(lam: float) -> float:
        return float(np.real(lyapunov(coeffs, lam).F)) - target

    # neighbouring roots of the same equation bound the bracket
    same = [
        abs(values[j] - edge)
        for j in range(values.size)
        if j != index and targets[j] == target
    ]
    half_width = 10.0 * eigen_error
    if not same or min(same) > 4.0 * half_width:
        lower, upper = edge - half_width, edge + half_width
        if residual(lower) * residual(upper) < 0.0:
            edge = optimize.brentq(residual, lower, upper, xtol=1e-15, rtol=1e-15)

    allowed = tolerances.edge_residual + abs(
        float(np.real(lyapunov_derivative(coeffs, edge)))
    ) * eigen_error
    if abs(residual(edge)) > allowed:
        message = (
            f"Band edge {edge!r} misses F = {target:+.0f} by {residual(edge)!r} "
            f"(allowed {allowed!r})"
        )
        logger.info(message)
        raise RootFindingError(message)
    return edge


def quasimomentum(coeffs: PeriodicCoefficients, lam: float, band_index: int) -> float:
    """
    Quasimomentum k with cos k = F(lam) on band sigma_{band_index}.

    On band j the value is m*pi + arccos((-1)^m F) with m = p-1-j, so k runs
    monotonically from (m+1)*pi down to m*pi across the band.

    :param coeffs: periodic coefficients
    :param lam: real energy inside the band
    :param band_index: band index 0..p-1
    :return: quasimomentum
    """
    if not 0 <= band_index < coeffs.p:
        message = f"Band index {band_index} outside 0..{coeffs.p - 1}"
        logger.info(message)
        raise BandDomainError(message)
    band = band_edges(coeffs).bands[band_index]
    if not band.contains(lam, slack=1e-12 * (1.0 + abs(lam))):
        message = f"Energy {lam!r} outside band {band_index} = {band}"
        logger.info(message)
        raise BandDomainError(message)

    m = coeffs.p - 1 - band_index
    value = (-1) ** m * float(np.real(lyapunov(coeffs, lam).F))
    return m * math.pi + math.acos(min(1.0, max(-1.0, value)))


def gap_heights(
    coeffs: PeriodicCoefficients, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> tuple[float, ...]:
    """
    Heights h_n = arccosh max |F| over each open gap, n = 1..p-1.

    :param coeffs: periodic coefficients
    :param tolerances: tolerances for band edge computation
    :return: gap heights, zero for closed gaps
    """
    bands = band_edges(coeffs, tolerances)
    heights = []
    for n in range(1, coeffs.p):
        if not bands.is_open(n):
            heights.append(0.0)
            continue
        alpha = gap_critical_point(coeffs, bands, n)
        peak = abs(float(np.real(lyapunov(coeffs, alpha).F)))
        heights.append(math.acosh(max(1.0, peak)))
    return tuple(heights)


def gap_critical_point(coeffs: PeriodicCoefficients, bands: SpectralBands, n: int) -> float:
    """
    The unique zero of F' inside the open gap n.

    :param coeffs: periodic coefficients
    :param bands: band edges of `coeffs`
    :param n: gap index
    :return: critical point alpha_n
    """
    gap = bands.gap(n)

    def derivative(lam: float) -> float:
        return float(np.real(lyapunov_derivative(coeffs, lam)))

    try:
        return optimize.brentq(derivative, gap.lower, gap.upper, xtol=1e-14)
    except ValueError as error:
        message = f"No critical point of F' found in gap {n} = {gap}: {error}"
        logger.info(message)
        raise RootFindingError(message) from error


def dirichlet_matrix(
    coeffs: PeriodicCoefficients,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Tridiagonal (p-1)-site matrix with f_0 = f_p = 0"""
    return jacobi_block(coeffs, coeffs.p - 1)


class CoefficientValidationError(ValidationError):
    """Exception for coefficients violating the periodic operator invariants"""


class BandDomainError(ValidationError):
    """Exception for an energy outside the requested band"""


class RootFindingError(NumericalError):
    """Exception for band edge or critical point searches that miss tolerance"""
