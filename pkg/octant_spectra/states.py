"""Module for Dirichlet eigenvalues, Weyl functions and gap state classification"""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
from scipy import linalg

from octant_spectra import DEFAULT_TOLERANCES, Tolerances, ValidationError
from octant_spectra.jacobi_core import (
    LyapunovValues,
    PeriodicCoefficients,
    Scalar,
    SpectralBands,
    band_edges,
    dirichlet_matrix,
    lyapunov,
    lyapunov_derivative,
    solve_recurrence,
)

logger = logging.getLogger(__name__)

_POLE_THRESHOLD = 1e-13


class StateKind(Enum):
    """Enum for the sheet on which a gap state sits"""

    EIGENVALUE: str = "eigenvalue"
    RESONANCE: str = "resonance"
    VIRTUAL: str = "virtual"


class Side(Enum):
    """Enum for the half-line carrying the Dirichlet boundary"""

    RIGHT: str = "right"
    LEFT: str = "left"


@dataclass(frozen=True)
class GapState:
    """Dataclass for the state attached to an open gap"""

    n: int
    mu: float
    kind: StateKind
    epsilon: int
    phi_p1_abs: float


@dataclass(frozen=True)
class WeylValue:
    """Dataclass for Weyl function values at one spectral parameter"""

    lam: complex
    m_plus: complex
    m_minus: complex
    multiplier: complex

    @property
    def product(self) -> complex:
        return self.m_plus * self.m_minus


def dirichlet_modes(
    coeffs: PeriodicCoefficients,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Dirichlet eigenvalues and |phi_{p+1}| at each of them.

    At a zero of phi_p the recurrence gives
    phi_{p+1} = -a_{p-1} phi_{p-1} / a_p, evaluated here from the normalized
    eigenvector so that no forward recurrence is needed.

    :param coeffs: periodic coefficients
    :return: (mu_1 < ... < mu_{p-1}, |phi_{p+1}(mu_n)|)
    """
    p = coeffs.p
    if p == 1:
        return np.zeros(0), np.zeros(0)
    diagonal, off_diagonal = dirichlet_matrix(coeffs)
    if p == 2:
        mus, vectors = diagonal.copy(), np.ones((1, 1))
    else:
        mus, vectors = linalg.eigh_tridiagonal(diagonal, off_diagonal)
    first, last = np.abs(vectors[0]), np.abs(vectors[-1])
    with np.errstate(divide="ignore"):
        ratios = coeffs.a[-2] * last / (coeffs.a[-1] * first)
    return mus, ratios


def dirichlet_eigenvalues(coeffs: PeriodicCoefficients) -> tuple[float, ...]:
    """
    Zeros of phi_p, i.e. the eigenvalues of the interior (p-1)-site matrix.

    :param coeffs: periodic coefficients
    :return: sorted Dirichlet eigenvalues, empty for p = 1
    """
    mus, _ = dirichlet_modes(coeffs)
    return tuple(float(mu) for mu in mus)


def phi_p_derivative(coeffs: PeriodicCoefficients, lam: float, step: float) -> float:
    """Central difference of phi_p with step scaled by 1 + |lam|"""
    h = step * (1.0 + abs(lam))
    p = coeffs.p
    upper = solve_recurrence(coeffs, lam + h, p).phi[p]
    lower = solve_recurrence(coeffs, lam - h, p).phi[p]
    return float(np.real(upper - lower)) / (2.0 * h)


def floquet_multiplier(
    coeffs: PeriodicCoefficients, lam: Scalar, values: LyapunovValues | None = None
) -> complex:
    """
    The Floquet multiplier e^{ik} of the solution decaying to the right.

    Off the spectrum it is the root of rho^2 - 2 F rho + 1 = 0 inside the
    unit disk. Inside a band it is the boundary value from the upper
    half-plane, so Im rho has the sign opposite to F'.

    :param coeffs: periodic coefficients
    :param lam: spectral parameter
    :param values: Lyapunov values at `lam` if already computed
    :return: e^{ik}
    """
    values = values or lyapunov(coeffs, lam)
    F = complex(values.F)
    root = np.sqrt(F * F - 1.0)
    # the small root as the reciprocal of the large one, free of cancellation
    rho = 1.0 / max(F - root, F + root, key=abs)
    real_axis = abs(complex(lam).imag) == 0.0
    if real_axis and abs(F.real) < 1.0 and abs(abs(rho) - 1.0) <= 1e-12:
        slope = float(np.real(lyapunov_derivative(coeffs, complex(lam).real)))
        rho = F.real - 1j * np.sign(slope) * np.sqrt(1.0 - F.real**2)
    return complex(rho)


def weyl_m(
    coeffs: PeriodicCoefficients,
    lam: Scalar,
    sign: int = 1,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> WeylValue:
    """
    Weyl functions m_{+/-} = (e^{+/-ik} - theta_p) / phi_p.

    When phi_p vanishes with a vanishing numerator the identity
    m_+ m_- = -theta_{p+1}/phi_p gives the finite limit
    m_{+/-} = -theta_{p+1} / (e^{-/+ik} - theta_p).

    :param coeffs: periodic coefficients
    :param lam: spectral parameter
    :param sign: +1 or -1, the branch that must be finite
    :param tolerances: tolerances for the finite-difference residue estimate
    :return: Weyl values
    """
    if sign not in (1, -1):
        message = f"Weyl branch sign must be +1 or -1, got {sign}"
        logger.info(message)
        raise ValueError(message)

    values = lyapunov(coeffs, lam)
    rho = floquet_multiplier(coeffs, lam, values)
    numerators = {1: rho - values.theta_p, -1: 1.0 / rho - values.theta_p}
    scale = 1.0 + abs(values.theta_p) + abs(values.phi_p1) + abs(values.theta_p1)

    branches = {}
    for branch in (1, -1):
        numerator, other = numerators[branch], numerators[-branch]
        if abs(values.phi_p) > _POLE_THRESHOLD * scale:
            branches[branch] = numerator / values.phi_p
        elif abs(numerator) <= 1e-8 * scale:
            branches[branch] = -values.theta_p1 / other
        elif branch == sign:
            residue = complex(numerator) / phi_p_derivative(
                coeffs, complex(lam).real, tolerances.finite_difference_step
            )
            message = f"m_{'+' if sign > 0 else '-'} has a pole at {lam!r}"
            logger.info(message)
            raise PoleError(message, residue=residue)
        else:
            branches[branch] = complex(np.inf)

    logger.debug(f"weyl_m lam={lam!r}: m+={branches[1]!r}, m-={branches[-1]!r}")
    return WeylValue(
        lam=complex(lam),
        m_plus=complex(branches[1]),
        m_minus=complex(branches[-1]),
        multiplier=rho,
    )


def bloch_values(
    coeffs: PeriodicCoefficients, lam: Scalar, x: int, sign: int = 1
) -> complex:
    """
    Bloch solution psi_x = theta_x + m phi_x, normalized by psi_0 = 1.

    :param coeffs: periodic coefficients
    :param lam: spectral parameter
    :param x: site index, x >= 0
    :param sign: +1 for the right-decaying solution, -1 for its partner
    :return: psi_x
    """
    if x < 0:
        message = f"Bloch values are tabulated for x >= 0, got {x}"
        logger.info(message)
        raise ValueError(message)
    weyl = weyl_m(coeffs, lam, sign=sign)
    m = weyl.m_plus if sign > 0 else weyl.m_minus
    table = solve_recurrence(coeffs, lam, max(x, coeffs.p + 1))
    return complex(table.theta[x] + m * table.phi[x])


def classify_states(
    coeffs: PeriodicCoefficients,
    side: Side = Side.RIGHT,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    bands: SpectralBands | None = None,
) -> tuple[GapState, ...]:
    """
    One state per open gap, classified by |phi_{p+1}(mu_n)|.

    For the left half-line the Floquet multiplier at mu_n is inverted, so a
    right eigenvalue is a left resonance and vice versa.

    :param coeffs: periodic coefficients
    :param side: half-line whose states are classified
    :param tolerances: virtual-state and closed-gap tolerances
    :param bands: band edges of `coeffs` if already computed
    :return: gap states ordered by gap index
    """
    if coeffs.p < 2:
        return ()
    bands = bands or band_edges(coeffs, tolerances)
    mus, ratios = dirichlet_modes(coeffs)
    if side is Side.LEFT:
        with np.errstate(divide="ignore"):
            ratios = 1.0 / ratios

    states = []
    for n in range(1, coeffs.p):
        if not bands.is_open(n):
            continue
        ratio = float(ratios[n - 1])
        if abs(ratio - 1.0) <= tolerances.virtual_state * (1.0 + ratio):
            kind, epsilon = StateKind.VIRTUAL, 0
        elif ratio < 1.0:
            kind, epsilon = StateKind.EIGENVALUE, 1
        else:
            kind, epsilon = StateKind.RESONANCE, -1
        states.append(
            GapState(n=n, mu=float(mus[n - 1]), kind=kind, epsilon=epsilon, phi_p1_abs=ratio)
        )
    logger.debug(f"classify_states {side.value}: {states}")
    return tuple(states)


class PoleError(ValidationError):
    """Exception for evaluating a Weyl function at its pole"""

    def __init__(self, message: str, residue: complex):
        super().__init__(message)
        self.residue = residue
