# pylint: disable=C,W,R
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pytest

from octant_spectra.jacobi_core import (
    PeriodicCoefficients,
    band_edges,
    lyapunov,
    solve_recurrence,
)
from octant_spectra.states import (
    GapState,
    PoleError,
    Side,
    StateKind,
    bloch_values,
    classify_states,
    dirichlet_eigenvalues,
    floquet_multiplier,
    weyl_m,
)

_two_site = PeriodicCoefficients(p=2, a=(1.0, 1.0), b=(1.0, -1.0))
_eigenvalue_cell = PeriodicCoefficients(p=2, a=(0.5, 2.0), b=(1.0, -1.0))
_resonance_cell = PeriodicCoefficients(p=2, a=(2.0, 0.5), b=(1.0, -1.0))


def random_coefficients(rng: np.random.Generator, p: int) -> PeriodicCoefficients:
    return PeriodicCoefficients.from_sequences(
        np.exp(rng.normal(0.0, 0.3, p)), rng.normal(0.0, 1.0, p)
    )


class TestClassifyStates:
    @dataclass
    class Parameters:
        description: str
        coefficients: PeriodicCoefficients
        side: Side
        expected_kinds: tuple[StateKind, ...]
        expected_mus: tuple[float, ...]

    @dataclass
    class Fixture:
        states: tuple[GapState, ...]
        expected_kinds: tuple[StateKind, ...]
        expected_mus: tuple[float, ...]

    @pytest.fixture(
        params=[
            Parameters(
                description="Symmetric hoppings give a virtual state",
                coefficients=_two_site,
                side=Side.RIGHT,
                expected_kinds=(StateKind.VIRTUAL,),
                expected_mus=(1.0,),
            ),
            Parameters(
                description="Weak first hopping gives an eigenvalue",
                coefficients=_eigenvalue_cell,
                side=Side.RIGHT,
                expected_kinds=(StateKind.EIGENVALUE,),
                expected_mus=(1.0,),
            ),
            Parameters(
                description="Left half-line swaps eigenvalue and resonance",
                coefficients=_eigenvalue_cell,
                side=Side.LEFT,
                expected_kinds=(StateKind.RESONANCE,),
                expected_mus=(1.0,),
            ),
            Parameters(
                description="Strong first hopping gives a resonance",
                coefficients=_resonance_cell,
                side=Side.RIGHT,
                expected_kinds=(StateKind.RESONANCE,),
                expected_mus=(1.0,),
            ),
            Parameters(
                description="Closed gaps carry no state",
                coefficients=PeriodicCoefficients.free(3),
                side=Side.RIGHT,
                expected_kinds=(),
                expected_mus=(),
            ),
            Parameters(
                description="Period one has no gaps",
                coefficients=PeriodicCoefficients.free(1),
                side=Side.RIGHT,
                expected_kinds=(),
                expected_mus=(),
            ),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, request) -> Fixture:
        param: TestClassifyStates.Parameters = request.param
        return self.Fixture(
            states=classify_states(param.coefficients, side=param.side),
            expected_kinds=param.expected_kinds,
            expected_mus=param.expected_mus,
        )

    def test_kinds(self, setup: Fixture):
        assert tuple(state.kind for state in setup.states) == setup.expected_kinds

    def test_positions(self, setup: Fixture):
        np.testing.assert_allclose(
            [state.mu for state in setup.states], setup.expected_mus, atol=1e-12
        )

    def test_sheet_sign_matches_kind(self, setup: Fixture):
        signs = {StateKind.EIGENVALUE: 1, StateKind.RESONANCE: -1, StateKind.VIRTUAL: 0}
        for state in setup.states:
            assert state.epsilon == signs[state.kind]


class TestDirichletEigenvalues:
    @dataclass
    class Parameters:
        description: str
        seed: int

    @dataclass
    class Fixture:
        coefficients: list[PeriodicCoefficients]

    @pytest.fixture(
        params=[
            Parameters(description="Random draw 0", seed=0),
            Parameters(description="Random draw 1", seed=1),
            Parameters(description="Random draw 2", seed=2),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, request) -> Fixture:
        param: TestDirichletEigenvalues.Parameters = request.param
        rng = np.random.default_rng(param.seed)
        return self.Fixture(
            coefficients=[random_coefficients(rng, int(rng.integers(2, 9))) for _ in range(20)]
        )

    def test_zeros_of_phi_p(self, setup: Fixture):
        for coeffs in setup.coefficients:
            for mu in dirichlet_eigenvalues(coeffs):
                table = solve_recurrence(coeffs, mu, coeffs.p)
                scale = 1.0 + np.max(np.abs(table.phi))
                assert abs(table.phi[coeffs.p]) <= 1e-9 * scale

    def test_interlace_with_gaps(self, setup: Fixture):
        for coeffs in setup.coefficients:
            bands = band_edges(coeffs)
            for n, mu in enumerate(dirichlet_eigenvalues(coeffs), start=1):
                assert bands.gap(n).contains(mu, slack=1e-8)

    def test_count(self, setup: Fixture):
        for coeffs in setup.coefficients:
            assert len(dirichlet_eigenvalues(coeffs)) == coeffs.p - 1


class TestWeylFunctions:
    @dataclass
    class Parameters:
        description: str
        coefficients: PeriodicCoefficients
        lam: complex

    @dataclass
    class Fixture:
        coefficients: PeriodicCoefficients
        lam: complex

    @pytest.fixture(
        params=[
            Parameters(description="Two-site cell", coefficients=_two_site, lam=0.3 + 0.5j),
            Parameters(
                description="Eigenvalue cell", coefficients=_eigenvalue_cell, lam=-2.0 + 0.1j
            ),
            Parameters(
                description="Random cell",
                coefficients=random_coefficients(np.random.default_rng(11), 5),
                lam=0.7 + 0.2j,
            ),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, request) -> Fixture:
        param: TestWeylFunctions.Parameters = request.param
        return self.Fixture(coefficients=param.coefficients, lam=param.lam)

    def test_product_identity(self, setup: Fixture):
        weyl = weyl_m(setup.coefficients, setup.lam)
        values = lyapunov(setup.coefficients, setup.lam)
        expected = -values.theta_p1 / values.phi_p
        assert weyl.product == pytest.approx(expected, rel=1e-9)

    def test_multiplier_inside_unit_disk(self, setup: Fixture):
        assert abs(floquet_multiplier(setup.coefficients, setup.lam)) < 1.0

    def test_bloch_solution_is_quasiperiodic(self, setup: Fixture):
        p = setup.coefficients.p
        rho = floquet_multiplier(setup.coefficients, setup.lam)
        assert bloch_values(setup.coefficients, setup.lam, 0) == pytest.approx(1.0)
        assert bloch_values(setup.coefficients, setup.lam, p) == pytest.approx(rho, rel=1e-9)
        first = bloch_values(setup.coefficients, setup.lam, 1)
        shifted = bloch_values(setup.coefficients, setup.lam, p + 1)
        assert shifted == pytest.approx(rho * first, rel=1e-8)

    def test_rejects_unknown_branch(self, setup: Fixture):
        with pytest.raises(ValueError):
            weyl_m(setup.coefficients, setup.lam, sign=0)


class TestFloquetMultiplier:
    def test_real_gap_value(self):
        # F = (lam^2 - 3) / 2 for the two-site cell
        rho = floquet_multiplier(_two_site, 0.0)
        assert rho == pytest.approx(-1.5 + np.sqrt(1.25))
        assert abs(rho) < 1.0

    def test_band_value_on_unit_circle(self):
        rho = floquet_multiplier(_two_site, 1.5)
        assert abs(rho) == pytest.approx(1.0)
        assert rho.real == pytest.approx((1.5**2 - 3.0) / 2.0)
        # F' > 0 on the upper band
        assert rho.imag < 0.0

    def test_band_value_on_lower_band(self):
        rho = floquet_multiplier(_two_site, -1.5)
        assert abs(rho) == pytest.approx(1.0)
        assert rho.imag > 0.0


class TestPole:
    @dataclass
    class Parameters:
        description: str
        sign: int
        expect_pole: bool
        expected_finite: Optional[complex] = None

    @dataclass
    class Fixture:
        weyl_plus: Optional[complex]
        weyl_minus: Optional[complex]
        residue: Optional[complex]
        captured_log: str
        expect_pole: bool
        expected_finite: Optional[complex]

    @pytest.fixture(
        params=[
            Parameters(description="m+ at its pole", sign=1, expect_pole=True),
            Parameters(
                description="m- is finite at the same point",
                sign=-1,
                expect_pole=False,
                expected_finite=16.0 / 15.0,
            ),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, caplog, request) -> Fixture:
        param: TestPole.Parameters = request.param
        weyl_plus, weyl_minus, residue = None, None, None
        try:
            weyl = weyl_m(_eigenvalue_cell, 1.0, sign=param.sign)
        except PoleError as error:
            residue = error.residue
        else:
            weyl_plus, weyl_minus = weyl.m_plus, weyl.m_minus
        return self.Fixture(
            weyl_plus=weyl_plus,
            weyl_minus=weyl_minus,
            residue=residue,
            captured_log=caplog.text,
            expect_pole=param.expect_pole,
            expected_finite=param.expected_finite,
        )

    def test_pole_raises_with_residue(self, setup: Fixture):
        if setup.expect_pole:
            # (rho - theta_p) / phi_p'(mu) = 3.75 / 2
            assert setup.residue == pytest.approx(1.875, rel=1e-6)
            assert "has a pole" in setup.captured_log
        else:
            assert setup.residue is None

    def test_removable_branch(self, setup: Fixture):
        if not setup.expect_pole:
            assert setup.weyl_minus == pytest.approx(setup.expected_finite, rel=1e-9)
            assert np.isinf(abs(setup.weyl_plus))


def _eigenvalue_state(seed: int) -> tuple[PeriodicCoefficients, GapState]:
    # the growing solution stays below roundoff for ten periods
    rng = np.random.default_rng(seed)
    while True:
        coeffs = random_coefficients(rng, int(rng.integers(3, 5)))
        for state in classify_states(coeffs):
            if state.kind is StateKind.EIGENVALUE and 0.5 < state.phi_p1_abs < 0.8:
                return coeffs, state


class TestEigenvalueStates:
    @dataclass
    class Parameters:
        description: str
        seed: Optional[int]

    @dataclass
    class Fixture:
        coefficients: PeriodicCoefficients
        state: GapState

    @pytest.fixture(
        params=[
            Parameters(description="Weak first hopping", seed=None),
            Parameters(description="Random cell 3", seed=3),
            Parameters(description="Random cell 8", seed=8),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, request) -> Fixture:
        param: TestEigenvalueStates.Parameters = request.param
        if param.seed is None:
            coeffs = _eigenvalue_cell
            state = classify_states(coeffs)[0]
        else:
            coeffs, state = _eigenvalue_state(param.seed)
        return self.Fixture(coefficients=coeffs, state=state)

    def test_decays_geometrically(self, setup: Fixture):
        p = setup.coefficients.p
        table = solve_recurrence(setup.coefficients, setup.state.mu, 10 * p + 1)
        ratio = setup.state.phi_p1_abs
        for N in range(1, 11):
            assert abs(table.phi[N * p + 1]) == pytest.approx(ratio**N, rel=1e-6)

    def test_ratio_below_one(self, setup: Fixture):
        p = setup.coefficients.p
        table = solve_recurrence(setup.coefficients, setup.state.mu, p + 1)
        assert abs(table.phi[p + 1]) == pytest.approx(setup.state.phi_p1_abs, rel=1e-9)
        assert setup.state.phi_p1_abs < 1.0

    def test_weyl_function_blows_up(self, setup: Fixture):
        for offset in (-1e-6, 1e-6):
            weyl = weyl_m(setup.coefficients, setup.state.mu + offset)
            assert abs(weyl.m_plus) > 1e4
