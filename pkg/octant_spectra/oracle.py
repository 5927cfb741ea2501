"""Module for brute-force finite truncations that cross-check the spectral constructions"""
import functools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from octant_spectra import DEFAULT_TOLERANCES, Tolerances, ValidationError
from octant_spectra.assembler import minkowski_sum
from octant_spectra.jacobi_core import (
    Interval,
    PeriodicCoefficients,
    band_edges,
    jacobi_block,
)

logger = logging.getLogger(__name__)

MIN_PERIODS = 4
MAX_EPSILON = 0.02
MIN_MARGIN = 1.0
EDGE_EXCLUSION = 3.0
_INITIAL_WINDOW_EIGENVALUES = 16


class TruncationModel(Enum):
    """Enum for the operator being truncated"""

    HALF_LINE: str = "half_line"
    HALF_SOLID: str = "half_solid"
    BOX: str = "box"


class Quadrant(Enum):
    """Enum for the quadrants of Z^2 by the signs of (x, y); Z_+ = {1, 2, ...}"""

    PP: str = "++"
    MP: str = "-+"
    MM: str = "--"
    PM: str = "+-"

    @classmethod
    def of(cls, x: int, y: int) -> "Quadrant":
        return cls(("+" if x >= 1 else "-") + ("+" if y >= 1 else "-"))


@dataclass(frozen=True)
class TruncationSpec:
    """
    Dataclass for a Dirichlet truncation.

    A box has `half_line_axes` leading axes on Z_+ (sites 1..L) and the rest
    on Z as half-solid axes (sites -L..L') with vacuum potential `tau`.
    """

    model: TruncationModel
    lengths: tuple[int, ...]
    half_line_axes: int = 0
    tau: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(length) for length in self.lengths))
        axes = len(self.lengths)
        if self.model is not TruncationModel.BOX and axes != 1:
            message = f"{self.model.value} truncation takes one length, got {self.lengths}"
            logger.info(message)
            raise TruncationSizeError(message)
        if self.model is TruncationModel.BOX and not 0 <= self.half_line_axes <= axes:
            message = f"half_line_axes={self.half_line_axes} outside 0..{axes}"
            logger.info(message)
            raise TruncationSizeError(message)
        needs_tau = self.model is TruncationModel.HALF_SOLID or (
            self.model is TruncationModel.BOX and self.half_line_axes < axes
        )
        if needs_tau and self.tau is None:
            message = "Half-solid axes need a vacuum potential tau"
            logger.info(message)
            raise TruncationSizeError(message)

    @property
    def d(self) -> int:
        return len(self.lengths)

    def is_half_line_axis(self, axis: int) -> bool:
        if self.model is TruncationModel.BOX:
            return axis < self.half_line_axes
        return self.model is TruncationModel.HALF_LINE


@dataclass(frozen=True)
class PerturbationSpec:
    """
    Dataclass for eps W with W = sum_i (a~^i U_i + U_-i a~^i) + V~.

    The arrays hold one period cell; `hoppings[i]` weights the bond from a
    site to its neighbour along axis i.
    """

    epsilon: float
    hoppings: tuple[npt.NDArray[np.float64], ...]
    potential: npt.NDArray[np.float64]

    @classmethod
    def random(
        cls, rng: np.random.Generator, epsilon: float, cell: Sequence[int]
    ) -> "PerturbationSpec":
        """a~ uniform on (0, 1], V~ uniform on [-1, 1]"""
        shape = tuple(cell)
        return cls(
            epsilon=epsilon,
            hoppings=tuple(1.0 - rng.uniform(0.0, 1.0, shape) for _ in shape),
            potential=rng.uniform(-1.0, 1.0, shape),
        )

    @property
    def norm_bound(self) -> float:
        """Bound on ||W|| from the sup-norms of its parts"""
        return 2.0 * sum(float(np.max(np.abs(h))) for h in self.hoppings) + float(
            np.max(np.abs(self.potential))
        )


@dataclass(frozen=True)
class PerturbationCount:
    """Dataclass for interval counts before and after a perturbation"""

    before: int
    after: int
    margin_before: float
    margin_after: float


@dataclass(frozen=True)
class CoverageReport:
    """Dataclass for the essential-spectrum coverage statistic"""

    L: int
    samples: int
    covered: int
    tolerance: float
    missed: tuple[float, ...] = field(default=(), repr=False)

    @property
    def coverage(self) -> float:
        return self.covered / self.samples if self.samples else 1.0


def aligned_length(length: int, p: int) -> int:
    """Largest L' <= length with L' = -1 (mod p)"""
    return length - (length + 1) % p


def half_line_tridiagonal(
    coeffs: PeriodicCoefficients, length: int
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Half-line operator on sites 1..length"""
    return jacobi_block(coeffs, length)


def half_solid_tridiagonal(
    coeffs: PeriodicCoefficients, tau: float, length: int
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Half-solid operator on sites -length..L' with L' = aligned_length(length, p).

    Sites x <= 0 carry potential tau and every bond (x, x+1) with x <= 0 has
    hopping 1.

    :param coeffs: periodic coefficients of the right half
    :param tau: vacuum potential
    :param length: truncation length of each half
    :return: (diagonal, off_diagonal)
    """
    right = aligned_length(length, coeffs.p)
    right_diagonal, right_off_diagonal = jacobi_block(coeffs, right)
    diagonal = np.concatenate([np.full(length + 1, float(tau)), right_diagonal])
    off_diagonal = np.concatenate([np.ones(length + 1), right_off_diagonal])
    return diagonal, off_diagonal


def _tridiagonal_matrix(diagonal, off_diagonal) -> sparse.csr_matrix:
    return sparse.diags(
        [off_diagonal, diagonal, off_diagonal], [-1, 0, 1], format="csr"
    )


def _axis_tridiagonal(
    spec: TruncationSpec, coeffs: PeriodicCoefficients, axis: int
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    length = spec.lengths[axis]
    if length < MIN_PERIODS * coeffs.p:
        message = (
            f"Axis {axis + 1}: L={length} is below {MIN_PERIODS}p = {MIN_PERIODS * coeffs.p}"
        )
        logger.info(message)
        raise TruncationSizeError(message)
    if spec.is_half_line_axis(axis):
        return half_line_tridiagonal(coeffs, length)
    return half_solid_tridiagonal(coeffs, spec.tau, length)


def _check_axes(spec: TruncationSpec, coeffs: Sequence[PeriodicCoefficients]) -> None:
    if len(coeffs) != spec.d:
        message = f"Truncation has {spec.d} axes but {len(coeffs)} coefficient sets"
        logger.info(message)
        raise TruncationSizeError(message)


def box_matrix(
    spec: TruncationSpec,
    coeffs: Sequence[PeriodicCoefficients],
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> sparse.csr_matrix:
    """
    Explicit sparse matrix of the separable operator J_1 + ... + J_d.

    Sites are ordered row-major, so in two dimensions (x_1, x_2) has index
    x_1 L_2 + x_2.
    """
    _check_axes(spec, coeffs)
    blocks = [
        _tridiagonal_matrix(*_axis_tridiagonal(spec, axis_coeffs, axis))
        for axis, axis_coeffs in enumerate(coeffs)
    ]
    sizes = [block.shape[0] for block in blocks]
    dimension = int(np.prod(sizes))
    if dimension > tolerances.sparse_limit:
        message = f"Box dimension {dimension} exceeds {tolerances.sparse_limit}"
        logger.info(message)
        raise TruncationSizeError(message)

    matrix = sparse.csr_matrix((dimension, dimension))
    for axis, block in enumerate(blocks):
        left = sparse.identity(int(np.prod(sizes[:axis])), format="csr")
        right = sparse.identity(int(np.prod(sizes[axis + 1 :])), format="csr")
        matrix = matrix + sparse.kron(sparse.kron(left, block), right, format="csr")
    return matrix


def eigenvalues_in_window(
    matrix: sparse.spmatrix,
    window: Interval,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> npt.NDArray[np.float64]:
    """
    Sorted eigenvalues of a symmetric matrix inside `window`.

    Small matrices are diagonalized densely; larger ones by shift-invert
    around the window center with the number of requested eigenvalues
    doubled until the window is bracketed.
    """
    dimension = matrix.shape[0]
    if dimension <= tolerances.dense_limit:
        values = linalg.eigh(
            matrix.toarray(),
            eigvals_only=True,
            subset_by_value=(window.lower, window.upper),
        )
        return np.sort(values[values >= window.lower])

    k = _INITIAL_WINDOW_EIGENVALUES
    while True:
        k = min(k, dimension - 2)
        values = np.sort(
            sparse_linalg.eigsh(
                matrix, k=k, sigma=window.center, return_eigenvectors=False
            )
        )
        bracketed = values[0] < window.lower and values[-1] > window.upper
        logger.debug(f"Shift-invert with k={k}: [{values[0]:.6f}, {values[-1]:.6f}]")
        if bracketed or k == dimension - 2:
            return values[(values >= window.lower) & (values <= window.upper)]
        k *= 2


def truncate_and_diagonalize(
    spec: TruncationSpec,
    coeffs: Sequence[PeriodicCoefficients],
    window: Optional[Interval] = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> npt.NDArray[np.float64]:
    """
    Sorted eigenvalues of a Dirichlet truncation.

    One-dimensional models are solved as tridiagonal problems; a box uses
    the Kronecker-sum identity, so its eigenvalues are all sums of one
    eigenvalue per axis.

    :param spec: truncation description
    :param coeffs: one coefficient set per axis
    :param window: optional interval restricting the output
    :param tolerances: size limits
    :return: eigenvalues
    """
    _check_axes(spec, coeffs)
    per_axis = []
    for axis, axis_coeffs in enumerate(coeffs):
        diagonal, off_diagonal = _axis_tridiagonal(spec, axis_coeffs, axis)
        per_axis.append(linalg.eigh_tridiagonal(diagonal, off_diagonal, eigvals_only=True))

    dimension = int(np.prod([values.size for values in per_axis]))
    if dimension > tolerances.sparse_limit:
        message = f"Truncation dimension {dimension} exceeds {tolerances.sparse_limit}"
        logger.info(message)
        raise TruncationSizeError(message)
    logger.debug(f"Truncation {spec.model.value} with dimension {dimension}")

    values = functools.reduce(lambda x, y: np.add.outer(x, y).ravel(), per_axis)
    values = np.sort(values)
    if window is not None:
        values = values[(values >= window.lower) & (values <= window.upper)]
    return values


def count_in_interval(
    eigenvalues: Sequence[float],
    interval: Interval,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> int:
    """
    Eigenvalues in `interval` counted with multiplicity.

    Values closer than the cluster tolerance form one numerical eigenvalue,
    counted in full when the mean of the cluster lies in the interval.
    """
    values = np.sort(np.asarray(eigenvalues, dtype=float))
    if values.size == 0:
        return 0
    breaks = np.flatnonzero(np.diff(values) > tolerances.count_cluster) + 1
    return sum(
        cluster.size
        for cluster in np.split(values, breaks)
        if interval.contains(float(cluster.mean()))
    )


def perturbation_matrix(
    spec: TruncationSpec, perturbation: PerturbationSpec
) -> sparse.csr_matrix:
    """W on the box of `spec`, with the period cell repeated from the corner site"""
    if not all(spec.is_half_line_axis(axis) for axis in range(spec.d)):
        message = "Perturbations are applied on boxes of half-line axes only"
        logger.info(message)
        raise PreconditionError(message)
    shape = spec.lengths
    if len(perturbation.hoppings) != len(shape) or perturbation.potential.ndim != len(shape):
        message = f"Perturbation dimension does not match the box {shape}"
        logger.info(message)
        raise PreconditionError(message)
    cell = np.array(perturbation.potential.shape)
    coords = np.indices(shape).reshape(len(shape), -1)
    phase = tuple(coords % cell[:, None])
    dimension = coords.shape[1]

    rows, cols = [np.arange(dimension)], [np.arange(dimension)]
    data = [perturbation.potential[phase]]
    strides = np.cumprod((1,) + shape[:0:-1])[::-1]
    for axis, hopping in enumerate(perturbation.hoppings):
        inside = coords[axis] < shape[axis] - 1
        sites = np.flatnonzero(inside)
        weights = hopping[tuple(p[inside] for p in phase)]
        rows += [sites, sites + strides[axis]]
        cols += [sites + strides[axis], sites]
        data += [weights, weights]
    return sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dimension, dimension),
    )


def _margin(values: npt.NDArray[np.float64], interval: Interval) -> float:
    if values.size == 0:
        return np.inf
    return float(
        min(np.min(np.abs(values - interval.lower)), np.min(np.abs(values - interval.upper)))
    )


def perturb_and_count(
    spec: TruncationSpec,
    coeffs: Sequence[PeriodicCoefficients],
    perturbation: PerturbationSpec,
    interval: Interval,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> PerturbationCount:
    """
    Count eigenvalues in `interval` for H and H + eps W on the same box.

    Each eigenvalue moves by at most eps ||W|| <= 5 eps, so with a margin of
    at least 1 between the spectrum and the interval ends the two counts
    agree for eps <= 0.02.

    :param spec: box truncation
    :param coeffs: one coefficient set per axis
    :param perturbation: eps and the parts of W
    :param interval: counting interval in raw units
    :param tolerances: solver and cluster settings
    :return: counts and margins before and after
    """
    if not 0.0 <= perturbation.epsilon <= MAX_EPSILON:
        message = f"epsilon={perturbation.epsilon} outside [0, {MAX_EPSILON}]"
        logger.info(message)
        raise PreconditionError(message)

    unperturbed = box_matrix(spec, coeffs, tolerances)
    window = Interval(
        lower=interval.lower - 2.0 * MIN_MARGIN, upper=interval.upper + 2.0 * MIN_MARGIN
    )
    before_values = eigenvalues_in_window(unperturbed, window, tolerances)
    margin_before = _margin(before_values, interval)
    if margin_before < MIN_MARGIN:
        message = f"Spectrum comes within {margin_before:.4f} < {MIN_MARGIN} of {interval}"
        logger.info(message)
        raise PreconditionError(message)

    perturbed = unperturbed + perturbation.epsilon * perturbation_matrix(spec, perturbation)
    after_values = eigenvalues_in_window(perturbed, window, tolerances)
    margin_after = _margin(after_values, interval)
    shift_bound = perturbation.epsilon * perturbation.norm_bound
    if margin_after < margin_before - shift_bound - 1e-9:
        logger.warning(
            f"Margin fell from {margin_before:.4f} to {margin_after:.4f}, more than "
            f"eps ||W|| <= {shift_bound:.4f}"
        )
    return PerturbationCount(
        before=count_in_interval(before_values, interval, tolerances),
        after=count_in_interval(after_values, interval, tolerances),
        margin_before=margin_before,
        margin_after=margin_after,
    )


def quadrant_box_matrix(
    quadrants: Mapping[Quadrant, tuple[PeriodicCoefficients, PeriodicCoefficients]],
    length: int,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> sparse.csr_matrix:
    """
    Operator on sites -L/2+1..L/2 of each axis whose coefficients are those
    of the quadrant holding the site (for bonds, the lower site).
    """
    sites = np.arange(-length // 2 + 1, length // 2 + 1)
    size = sites.size
    if size * size > tolerances.sparse_limit:
        message = f"Quadrant box dimension {size * size} exceeds {tolerances.sparse_limit}"
        logger.info(message)
        raise TruncationSizeError(message)

    diagonal = np.empty(size * size)
    rows, cols, data = [], [], []
    for i, x in enumerate(sites):
        for j, y in enumerate(sites):
            first, second = quadrants[Quadrant.of(int(x), int(y))]
            index = i * size + j
            diagonal[index] = first.site_potential(int(x)) + second.site_potential(int(y))
            if i + 1 < size:
                rows.append(index)
                cols.append(index + size)
                data.append(first.hopping(int(x)))
            if j + 1 < size:
                rows.append(index)
                cols.append(index + 1)
                data.append(second.hopping(int(y)))
    upper = sparse.csr_matrix((data, (rows, cols)), shape=(size * size, size * size))
    return upper + upper.T + sparse.diags(diagonal, format="csr")


def _coverage_samples(
    quadrants: Mapping[Quadrant, tuple[PeriodicCoefficients, PeriodicCoefficients]],
    length: int,
    samples_per_quadrant: int,
) -> npt.NDArray[np.float64]:
    exclusion = EDGE_EXCLUSION / length
    samples = []
    for first, second in quadrants.values():
        bands = minkowski_sum(band_edges(first).bands, band_edges(second).bands)
        usable = [band for band in bands if band.length > 2.0 * exclusion]
        total = sum(band.length for band in usable)
        for band in usable:
            count = max(1, round(samples_per_quadrant * band.length / total))
            samples.append(np.linspace(band.lower + exclusion, band.upper - exclusion, count))
    return np.unique(np.concatenate(samples)) if samples else np.zeros(0)


def ess_coverage(
    quadrants: Mapping[Quadrant, tuple[PeriodicCoefficients, PeriodicCoefficients]],
    length: int,
    samples_per_quadrant: int = 64,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> CoverageReport:
    """
    Fraction of points of the union of the quadrant spectra that have an
    eigenvalue of the truncated quadrant-assembled operator nearby.

    The spectrum of each quadrant operator is the Minkowski sum of the band
    spectra of its two axes. Points within 3/L of an edge are not sampled.

    :param quadrants: coefficients (x axis, y axis) for each quadrant
    :param length: box side L
    :param samples_per_quadrant: sample points spread over each quadrant spectrum
    :param tolerances: coverage tolerance and solver limits
    :return: coverage report
    """
    if set(quadrants) != set(Quadrant):
        message = f"Coverage needs all four quadrants, got {sorted(q.value for q in quadrants)}"
        logger.info(message)
        raise PreconditionError(message)
    longest = max(c.p for pair in quadrants.values() for c in pair)
    if length < MIN_PERIODS * longest:
        message = f"L={length} is below {MIN_PERIODS}p = {MIN_PERIODS * longest}"
        logger.info(message)
        raise TruncationSizeError(message)

    matrix = quadrant_box_matrix(quadrants, length, tolerances)
    samples = _coverage_samples(quadrants, length, samples_per_quadrant)
    if matrix.shape[0] <= tolerances.dense_limit:
        values = linalg.eigvalsh(matrix.toarray())
        positions = np.clip(np.searchsorted(values, samples), 1, values.size - 1)
        distances = np.minimum(
            np.abs(values[positions] - samples), np.abs(values[positions - 1] - samples)
        )
    else:
        start = np.ones(matrix.shape[0])
        distances = np.array(
            [
                np.min(
                    np.abs(
                        sparse_linalg.eigsh(
                            matrix, k=1, sigma=s, ncv=20, v0=start, return_eigenvectors=False
                        )
                        - s
                    )
                )
                for s in samples
            ]
        )
    hits = distances <= tolerances.coverage
    logger.debug(f"Coverage at L={length}: {int(hits.sum())}/{samples.size}")
    return CoverageReport(
        L=length,
        samples=int(samples.size),
        covered=int(hits.sum()),
        tolerance=tolerances.coverage,
        missed=tuple(float(s) for s in samples[~hits]),
    )


class TruncationSizeError(ValidationError):
    """Exception for truncations that are too short or too large"""


class PreconditionError(ValidationError):
    """Exception for perturbation checks outside their admissible regime"""
