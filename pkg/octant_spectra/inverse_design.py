"""Module for the gap-length map, its numerical inverse and uniform-gap designs"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy import linalg

from octant_spectra import (
    DEFAULT_TOLERANCES,
    NumericalError,
    Tolerances,
    ValidationError,
)
from octant_spectra.jacobi_core import PeriodicCoefficients, SpectralBands, band_edges
from octant_spectra.states import GapState, classify_states, dirichlet_eigenvalues

logger = logging.getLogger(__name__)

MIN_DESIGN_GAMMA = 16.0
CONTINUATION_STEPS = 10
MAX_DESIGN_ROUNDS = 5
_MAX_STEP_NORM = 2.0
_MIN_LINE_SEARCH = 1.0 / 1024.0
_MIN_CONTINUATION_STEP = 1e-3


@dataclass(frozen=True)
class GapMapVector:
    """Dataclass for the gap-length coordinates (psi_1n, psi_2n), n = 1..p-1"""

    psi: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "psi", tuple((float(x), float(y)) for x, y in self.psi)
        )

    @classmethod
    def from_array(cls, values: npt.ArrayLike) -> "GapMapVector":
        array = np.asarray(values, dtype=float).reshape(-1, 2)
        return cls(psi=tuple(map(tuple, array)))

    @property
    def p(self) -> int:
        return len(self.psi) + 1

    def as_array(self) -> npt.NDArray[np.float64]:
        return np.array(self.psi, dtype=float).reshape(-1, 2)

    @property
    def half_gap_lengths(self) -> npt.NDArray[np.float64]:
        return np.hypot(*self.as_array().T)


@dataclass(frozen=True)
class DesignSpec:
    """
    Dataclass for a prescribed gap structure.

    Gap n nominally spans (c_{n-1}, c_n) with c_0 = 0 and
    c_n = c_{n-1} + gap_lengths[n-1]; the state sits at the gap center minus
    state_offsets[n-1] on the sheet given by sheet_signs[n-1].
    """

    p: int
    gap_lengths: tuple[float, ...]
    state_offsets: tuple[float, ...]
    sheet_signs: tuple[int, ...]
    d: int = 2

    def __post_init__(self):
        if self.p < 2:
            message = f"A design needs at least one gap, got p={self.p}"
            logger.info(message)
            raise DesignParameterError(message)
        sizes = {len(self.gap_lengths), len(self.state_offsets), len(self.sheet_signs)}
        if sizes != {self.p - 1}:
            message = f"Design fields must have p-1 = {self.p - 1} entries each"
            logger.info(message)
            raise DesignParameterError(message)
        if any(sign not in (1, -1) for sign in self.sheet_signs):
            message = f"Sheet signs must be +1 or -1, got {self.sheet_signs}"
            logger.info(message)
            raise DesignParameterError(message)
        if self.d < 1:
            message = f"Dimension must be positive, got d={self.d}"
            logger.info(message)
            raise DesignParameterError(message)
        for n, (length, offset) in enumerate(
            zip(self.gap_lengths, self.state_offsets), start=1
        ):
            if length <= 0.0 or abs(offset) >= length / 2.0:
                message = (
                    f"Gap {n}: need length > 0 and |offset| < length/2, got "
                    f"length={length}, offset={offset}"
                )
                logger.info(message)
                raise DesignParameterError(message)

    @property
    def e1(self) -> float:
        return 1.0 / (4.0 * self.d)

    @property
    def nominal_band_centers(self) -> npt.NDArray[np.float64]:
        return np.concatenate([[0.0], np.cumsum(self.gap_lengths)])

    @property
    def nominal_states(self) -> npt.NDArray[np.float64]:
        centers = self.nominal_band_centers
        return 0.5 * (centers[:-1] + centers[1:]) - np.array(self.state_offsets)

    def target(self) -> GapMapVector:
        lengths = np.array(self.gap_lengths)
        offsets = np.array(self.state_offsets)
        conjugate = np.sqrt(lengths**2 / 4.0 - offsets**2)
        return GapMapVector.from_array(
            np.column_stack([offsets, np.array(self.sheet_signs) * conjugate])
        )


@dataclass
class GapMapSolution:
    """Dataclass for the result of inverting the gap-length map"""

    coefficients: PeriodicCoefficients
    residual: float
    history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class DesignReport:
    """Dataclass for the a-posteriori check of a designed operator"""

    achieved_gaps: tuple[float, ...]
    achieved_states: tuple[GapState, ...]
    state_errors: tuple[float, ...]
    residual: float


def uniform_design_spec(p: int, gamma: float, d: int = 2, sheet_sign: int = 1) -> DesignSpec:
    """
    Design with every gap of length gamma and states at gamma (n - 1 + e_1).

    :param p: period
    :param gamma: common gap length
    :param d: dimension, fixing e_1 = 1/(4d)
    :param sheet_sign: +1 for eigenvalues, -1 for resonances
    :return: design spec
    """
    e1 = 1.0 / (4.0 * d)
    return DesignSpec(
        p=p,
        gap_lengths=(gamma,) * (p - 1),
        state_offsets=(gamma * (0.5 - e1),) * (p - 1),
        sheet_signs=(sheet_sign,) * (p - 1),
        d=d,
    )


def forward_gap_map(
    coeffs: PeriodicCoefficients, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> GapMapVector:
    """
    psi_1n = gap center - mu_n, psi_2n = eps_n sqrt(|gap|^2/4 - psi_1n^2).

    :param coeffs: periodic coefficients, p >= 2
    :param tolerances: closed-gap and virtual-state tolerances
    :return: gap-length coordinates, (0, 0) on closed gaps
    """
    if coeffs.p < 2:
        message = f"The gap-length map needs p >= 2, got p={coeffs.p}"
        logger.info(message)
        raise DesignParameterError(message)
    bands = band_edges(coeffs, tolerances, polish=False)
    states = {
        state.n: state
        for state in classify_states(coeffs, tolerances=tolerances, bands=bands)
    }
    psi = []
    for n, gap in enumerate(bands.gaps, start=1):
        state = states.get(n)
        if state is None:
            psi.append((0.0, 0.0))
            continue
        offset = gap.center - state.mu
        conjugate = math.sqrt(abs(gap.length**2 / 4.0 - offset**2))
        psi.append((offset, state.epsilon * conjugate))
    return GapMapVector(psi=tuple(psi))


class _ZeroSumCoordinates:
    """Orthonormal coordinates (log a, b) on the zero-sum subspace"""

    def __init__(self, p: int):
        self.p = p
        self.basis = linalg.null_space(np.ones((1, p)))

    def encode(self, coeffs: PeriodicCoefficients) -> npt.NDArray[np.float64]:
        log_a = np.log(coeffs.hoppings)
        return np.concatenate([self.basis.T @ log_a, self.basis.T @ np.array(coeffs.b)])

    def decode(self, u: npt.NDArray[np.float64]) -> PeriodicCoefficients:
        log_a = self.basis @ u[: self.p - 1]
        log_a[-1] = -math.fsum(log_a[:-1])
        b = self.basis @ u[self.p - 1 :]
        b = b - b.mean()
        return PeriodicCoefficients(p=self.p, a=tuple(np.exp(log_a)), b=tuple(b))


class _GapMapNewton:
    """Damped Newton iteration on the gap-length map"""

    def __init__(self, p: int, tolerances: Tolerances, max_iterations: int):
        self.coordinates = _ZeroSumCoordinates(p)
        self.tolerances = tolerances
        self.max_iterations = max_iterations

    def residual(self, u: npt.NDArray[np.float64], target: npt.NDArray[np.float64]):
        image = forward_gap_map(self.coordinates.decode(u), self.tolerances)
        return image.as_array().ravel() - target

    def jacobian(self, u: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        zero = np.zeros(2 * (self.coordinates.p - 1))
        columns = []
        for i in range(u.size):
            h = self.tolerances.finite_difference_step * (1.0 + abs(u[i]))
            step = np.zeros_like(u)
            step[i] = h
            forward = self.residual(u + step, zero)
            backward = self.residual(u - step, zero)
            columns.append((forward - backward) / (2.0 * h))
        return np.column_stack(columns)

    def solve(
        self,
        u: npt.NDArray[np.float64],
        target: npt.NDArray[np.float64],
        tolerance: float,
    ) -> tuple[npt.NDArray[np.float64], float, bool]:
        residual = self.residual(u, target)
        for iteration in range(self.max_iterations):
            norm = float(np.max(np.abs(residual)))
            logger.debug(f"Newton iteration {iteration}: residual {norm:.3e}")
            if norm <= tolerance:
                return u, norm, True

            step = np.linalg.lstsq(self.jacobian(u), -residual, rcond=None)[0]
            step_norm = float(np.max(np.abs(step)))
            if step_norm > _MAX_STEP_NORM:
                step *= _MAX_STEP_NORM / step_norm

            merit = float(residual @ residual)
            alpha = 1.0
            while alpha >= _MIN_LINE_SEARCH:
                candidate = u + alpha * step
                try:
                    candidate_residual = self.residual(candidate, target)
                except NumericalError:
                    alpha /= 2.0
                    continue
                if float(candidate_residual @ candidate_residual) < merit:
                    u, residual = candidate, candidate_residual
                    break
                alpha /= 2.0
            else:
                return u, norm, False

        norm = float(np.max(np.abs(residual)))
        return u, norm, norm <= tolerance


def solve_gap_map(
    target: GapMapVector,
    initial_guess: Optional[PeriodicCoefficients] = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    max_iterations: int = 50,
) -> GapMapSolution:
    """
    Invert the gap-length map by Newton continuation.

    The path runs from the image of the starting operator to `target` in
    CONTINUATION_STEPS equal steps; a step that fails to converge is halved.
    Without `initial_guess` the path starts at the free operator, whose image
    is zero. The last step stops once the sup-norm residual against `target`
    is at most `tolerances.gap_map_residual`.

    :param target: gap-length coordinates to reach
    :param initial_guess: coefficients to start from (shift is ignored)
    :param tolerances: residual and finite-difference settings
    :param max_iterations: Newton iterations per continuation step
    :return: solution with the residual history against `target`
    """
    p = target.p
    goal = target.as_array().ravel()
    if p < 2 or not np.all(np.isfinite(goal)):
        message = f"Target must be finite with p >= 2, got {target.psi}"
        logger.info(message)
        raise DesignParameterError(message)
    if initial_guess is not None and initial_guess.p != p:
        message = f"Initial guess has period {initial_guess.p}, target needs {p}"
        logger.info(message)
        raise DesignParameterError(message)

    newton = _GapMapNewton(p, tolerances, max_iterations)
    start = (initial_guess or PeriodicCoefficients.free(p)).with_shift(0.0)
    u = newton.coordinates.encode(start)
    origin = forward_gap_map(newton.coordinates.decode(u), tolerances).as_array().ravel()
    tolerance = tolerances.gap_map_residual
    history = [float(np.max(np.abs(origin - goal)))]

    if initial_guess is not None:
        u_direct, norm, converged = newton.solve(u, goal, tolerance)
        if converged:
            logger.debug(f"Gap map solved from the initial guess, residual {norm:.3e}")
            history.append(norm)
            return GapMapSolution(newton.coordinates.decode(u_direct), norm, history)

    t, dt = 0.0, 1.0 / CONTINUATION_STEPS
    best = history[0]
    while t < 1.0:
        t_next = min(1.0, t + dt)
        waypoint = (1.0 - t_next) * origin + t_next * goal
        step_tolerance = (
            tolerance
            if t_next == 1.0
            else max(tolerance, 1e-6 * (1.0 + float(np.max(np.abs(waypoint)))))
        )
        u_next, norm, converged = newton.solve(u, waypoint, step_tolerance)
        if converged:
            u, t = u_next, t_next
            reached = float(np.max(np.abs(newton.residual(u, goal))))
            best = min(best, reached)
            history.append(reached)
            logger.debug(f"Continuation t={t:.4f}: residual to target {reached:.3e}")
            continue
        dt /= 2.0
        logger.warning(f"Continuation step at t={t:.4f} failed; halving to {dt:.2e}")
        if dt < _MIN_CONTINUATION_STEP:
            message = (
                f"Gap map inversion stalled at t={t:.4f}; best residual {best:.3e}"
            )
            logger.info(message)
            raise GapMapSolverError(message, best_residual=best)

    return GapMapSolution(newton.coordinates.decode(u), history[-1], history)


def invert_gap_map(
    target: GapMapVector,
    initial_guess: Optional[PeriodicCoefficients] = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> PeriodicCoefficients:
    """
    Coefficients with zero-mean potential, unit-product hoppings and zero
    shift whose gap-length coordinates equal `target`.

    :param target: gap-length coordinates
    :param initial_guess: optional starting coefficients
    :param tolerances: residual and finite-difference settings
    :return: coefficients
    """
    return solve_gap_map(target, initial_guess, tolerances).coefficients


def _lanczos(
    eigenvalues: npt.NDArray[np.float64], start: npt.NDArray[np.float64]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Tridiagonalize diag(eigenvalues) from `start` with full reorthogonalization"""
    size = eigenvalues.size
    basis = np.zeros((size, size))
    alpha, beta = np.zeros(size), np.zeros(size - 1)
    basis[:, 0] = start / np.linalg.norm(start)
    for j in range(size):
        w = eigenvalues * basis[:, j]
        alpha[j] = basis[:, j] @ w
        if j == size - 1:
            break
        for _ in range(2):
            w -= basis[:, : j + 1] @ (basis[:, : j + 1].T @ w)
        beta[j] = np.linalg.norm(w)
        basis[:, j + 1] = w / beta[j]
    return alpha, beta


def decoupled_design(
    band_centers: Sequence[float],
    states: Sequence[float],
    sheet_sign: int = 1,
) -> PeriodicCoefficients:
    """
    Coefficients whose Dirichlet eigenvalues are exactly `states` and whose
    bands concentrate at `band_centers` when the gaps are large.

    A p-site Jacobi matrix with spectrum `band_centers` is built whose
    (p-1)-site submatrix has spectrum `states`. The remaining hopping is fixed
    by the unit product and is small, so the periodic operator is a chain of
    weakly coupled copies of that matrix. For eigenvalues the weak bond is
    a_{p-1}, which leaves the Dirichlet block as a surface block; for
    resonances it is a_p.

    :param band_centers: p increasing values
    :param states: p-1 values strictly interlacing `band_centers`
    :param sheet_sign: +1 for eigenvalues, -1 for resonances
    :return: coefficients (the mean potential is carried by the shift)
    """
    centers = np.asarray(band_centers, dtype=float)
    mus = np.asarray(states, dtype=float)
    p = centers.size
    if mus.size != p - 1 or not np.all(centers[:-1] < mus) or not np.all(mus < centers[1:]):
        message = f"States {mus.tolist()} must interlace band centers {centers.tolist()}"
        logger.info(message)
        raise DesignParameterError(message)

    weights = np.array(
        [
            np.prod(mus - c) / np.prod(np.delete(centers, i) - c)
            for i, c in enumerate(centers)
        ]
    )
    alpha, beta = _lanczos(centers, np.sqrt(np.abs(weights)))

    if sheet_sign > 0:
        # site order (p, 1, ..., p-1): the Dirichlet block is the trailing block
        b = np.concatenate([alpha[1:], alpha[:1]])
        known = {p: beta[0], **{x: beta[x] for x in range(1, p - 1)}}
        weak = p - 1
    else:
        b = alpha[::-1]
        known = {x: beta[::-1][x - 1] for x in range(1, p)}
        weak = p
    log_a = np.zeros(p)
    for x, value in known.items():
        log_a[x - 1] = math.log(value)
    log_a[weak - 1] = -math.fsum(log_a)
    return PeriodicCoefficients.from_sequences(np.exp(log_a), b)


def design_uniform(
    spec: DesignSpec, gamma: float, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> PeriodicCoefficients:
    """
    Coefficients with all gaps of length gamma and states at
    gamma (n - 1 + e_1), shifted so that lambda_0^+ = 0.

    :param spec: design with every gap length equal to gamma
    :param gamma: gap length, at least MIN_DESIGN_GAMMA
    :param tolerances: solver settings
    :return: designed coefficients
    """
    if gamma < MIN_DESIGN_GAMMA:
        message = f"gamma must be at least {MIN_DESIGN_GAMMA}, got {gamma}"
        logger.info(message)
        raise DesignParameterError(message)
    if not np.allclose(spec.gap_lengths, gamma, rtol=1e-12, atol=0.0):
        message = f"Uniform design needs all gap lengths {gamma}, got {spec.gap_lengths}"
        logger.info(message)
        raise DesignParameterError(message)

    signs = set(spec.sheet_signs)
    guess_sign = signs.pop() if len(signs) == 1 else 1
    guess = decoupled_design(spec.nominal_band_centers, spec.nominal_states, guess_sign)
    targets = gamma * (np.arange(1, spec.p) - 1 + spec.e1)
    lengths = np.array(spec.gap_lengths)

    offsets = np.array(spec.state_offsets)
    coeffs, shift, error = guess, 0.0, math.inf
    for design_round in range(MAX_DESIGN_ROUNDS):
        round_spec = DesignSpec(
            p=spec.p,
            gap_lengths=spec.gap_lengths,
            state_offsets=tuple(offsets),
            sheet_signs=spec.sheet_signs,
            d=spec.d,
        )
        coeffs = invert_gap_map(round_spec.target(), guess, tolerances)
        bands = band_edges(coeffs, tolerances)
        shift = -bands.bottom
        mus = np.array(dirichlet_eigenvalues(coeffs)) + shift
        error = float(np.max(np.abs(mus - targets)))
        logger.debug(f"Design round {design_round}: state error {error:.3e}")
        if error <= 1e-9 * gamma:
            break
        lower_edges = np.array([gap.lower for gap in bands.gaps]) + shift
        offsets = np.clip(
            lower_edges + lengths / 2.0 - targets,
            -0.499 * lengths,
            0.499 * lengths,
        )
        guess = coeffs

    if error > 8.0 / gamma:
        logger.warning(
            f"Designed states miss gamma (n - 1 + e_1) by {error:.3e} > 8/gamma"
        )
    return coeffs.with_shift(shift)


def verify_design(
    coeffs: PeriodicCoefficients,
    spec: DesignSpec,
    gamma: float,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> DesignReport:
    """
    Re-evaluate gaps and states of designed coefficients.

    :param coeffs: designed coefficients
    :param spec: design that produced them
    :param gamma: uniform gap length
    :param tolerances: tolerances for band edges and classification
    :return: achieved gaps, states, state position errors and the gap-map
        residual against the spec target
    """
    bands: SpectralBands = band_edges(coeffs, tolerances)
    states = classify_states(coeffs, tolerances=tolerances, bands=bands)
    targets = gamma * (np.arange(1, spec.p) - 1 + spec.e1)
    errors = tuple(abs(state.mu - targets[state.n - 1]) for state in states)
    image = forward_gap_map(coeffs, tolerances).as_array()
    lengths = np.array(spec.gap_lengths)
    achieved = np.array([gap.length for gap in bands.gaps])
    residual = float(np.max(np.abs(achieved - lengths))) if achieved.size else 0.0
    signs_ok = all(
        np.sign(image[n, 1]) == spec.sheet_signs[n] for n in range(spec.p - 1)
    )
    if not signs_ok:
        logger.warning(f"Designed sheets {image[:, 1]} differ from {spec.sheet_signs}")
    return DesignReport(
        achieved_gaps=tuple(float(length) for length in achieved),
        achieved_states=states,
        state_errors=errors,
        residual=residual,
    )


class DesignParameterError(ValidationError):
    """Exception for design inputs outside their admissible range"""


class GapMapSolverError(NumericalError):
    """Exception for a gap-map inversion that stalls before its tolerance"""

    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual
