# pylint: disable=C,W,R
import math
from dataclasses import dataclass
from typing import Optional
from unittest.mock import patch

import numpy as np
import pytest
from scipy import linalg

from octant_spectra.half_solid import (
    BranchError,
    DegeneracyError,
    HalfSolidSpectrum,
    ThresholdError,
    asymptotic_coefficient,
    find_gap_eigenvalues,
    fit_asymptotic_coefficient,
    half_solid_spectrum,
    vacuum_dispersion,
    wronskian_w,
)
from octant_spectra.inverse_design import decoupled_design, design_uniform, uniform_design_spec
from octant_spectra.jacobi_core import BandDomainError, Interval, PeriodicCoefficients, band_edges
from octant_spectra.oracle import half_solid_tridiagonal
from octant_spectra.states import PoleError, StateKind, classify_states

_eigenvalue_cell = decoupled_design((0.0, 16.0), (2.0,), sheet_sign=1)
_resonance_cell = decoupled_design((0.0, 16.0), (2.0,), sheet_sign=-1)


class TestVacuumDispersion:
    @dataclass
    class Parameters:
        description: str
        lam: complex | float
        tau: float
        expected_z: Optional[complex] = None

    @dataclass
    class Fixture:
        z: complex
        z1: complex
        lam: complex | float
        tau: float
        expected_z: Optional[complex]

    @pytest.fixture(
        params=[
            Parameters(
                description="Below the vacuum band",
                lam=0.0,
                tau=100.0,
                expected_z=-50.0 + math.sqrt(2499.0),
            ),
            Parameters(
                description="Above the vacuum band",
                lam=103.0,
                tau=100.0,
                expected_z=(3.0 - math.sqrt(5.0)) / 2.0,
            ),
            Parameters(
                description="Complex spectral parameter",
                lam=100.0 + 1.0j,
                tau=100.0,
                expected_z=-1.0j * (math.sqrt(5.0) - 1.0) / 2.0,
            ),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, request) -> Fixture:
        param: TestVacuumDispersion.Parameters = request.param
        z, z1 = vacuum_dispersion(param.lam, param.tau)
        return self.Fixture(z=z, z1=z1, lam=param.lam, tau=param.tau, expected_z=param.expected_z)

    def test_value(self, setup: Fixture):
        assert setup.z == pytest.approx(setup.expected_z, rel=1e-12)

    def test_inside_unit_disk(self, setup: Fixture):
        assert abs(setup.z) < 1.0
        assert setup.z * setup.z1 == pytest.approx(1.0)

    def test_solves_dispersion(self, setup: Fixture):
        assert setup.z + 1.0 / setup.z == pytest.approx(setup.lam - setup.tau, rel=1e-12)

    def test_inside_band_raises(self, setup: Fixture):
        with pytest.raises(BranchError):
            vacuum_dispersion(setup.tau + 1.0, setup.tau)


class TestGapEigenvalues:
    @dataclass
    class Parameters:
        description: str
        coefficients: PeriodicCoefficients
        tau: float
        expect_eigenvalue: bool

    @dataclass
    class Fixture:
        coefficients: PeriodicCoefficients
        tau: float
        eigenvalues: tuple[Optional[float], ...]
        mu: float
        expect_eigenvalue: bool

    @pytest.fixture(
        params=[
            Parameters(
                description="Eigenvalue state, tau 400",
                coefficients=_eigenvalue_cell,
                tau=400.0,
                expect_eigenvalue=True,
            ),
            Parameters(
                description="Eigenvalue state, tau 50",
                coefficients=_eigenvalue_cell,
                tau=50.0,
                expect_eigenvalue=True,
            ),
            Parameters(
                description="Resonance state",
                coefficients=_resonance_cell,
                tau=400.0,
                expect_eigenvalue=False,
            ),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, request) -> Fixture:
        param: TestGapEigenvalues.Parameters = request.param
        (state,) = classify_states(param.coefficients)
        return self.Fixture(
            coefficients=param.coefficients,
            tau=param.tau,
            eigenvalues=find_gap_eigenvalues(param.coefficients, param.tau),
            mu=state.mu,
            expect_eigenvalue=param.expect_eigenvalue,
        )

    def test_presence(self, setup: Fixture):
        assert len(setup.eigenvalues) == 1
        assert (setup.eigenvalues[0] is not None) == setup.expect_eigenvalue

    def test_below_state_and_zero_of_w(self, setup: Fixture):
        if setup.expect_eigenvalue:
            eigenvalue = setup.eigenvalues[0]
            assert eigenvalue < setup.mu
            assert setup.mu - eigenvalue < 2.0 / setup.tau
            scale = abs(setup.coefficients.a[-1] * vacuum_dispersion(eigenvalue, setup.tau)[1])
            assert abs(wronskian_w(setup.coefficients, setup.tau, eigenvalue)) <= 1e-8 * scale

    def test_pole_at_state(self, setup: Fixture):
        if setup.expect_eigenvalue:
            with pytest.raises(PoleError):
                wronskian_w(setup.coefficients, setup.tau, setup.mu)


class TestAsymptoticCoefficient:
    @dataclass
    class Fixture:
        predicted: float
        fitted: float

    @pytest.fixture
    def setup(self) -> Fixture:
        return self.Fixture(
            predicted=asymptotic_coefficient(_eigenvalue_cell, 1),
            fitted=fit_asymptotic_coefficient(_eigenvalue_cell, 1, (100.0, 200.0, 400.0, 800.0)),
        )

    def test_closed_form(self, setup: Fixture):
        # 2 F_o / (a_p phi_p') = (28 - 1/28) / 28 for the decoupled two-site cell
        assert setup.predicted == pytest.approx(1.0 - 1.0 / 784.0, rel=1e-6)

    def test_fit_matches_prediction(self, setup: Fixture):
        assert setup.fitted == pytest.approx(setup.predicted, rel=0.05)
        assert setup.fitted > 0.0

    def test_fit_at_large_tau(self, setup: Fixture):
        taus = (16000.0, 32000.0, 64000.0, 128000.0)
        fitted = fit_asymptotic_coefficient(_eigenvalue_cell, 1, taus)
        assert fitted == pytest.approx(setup.predicted, rel=1e-3)

    def test_single_tau_is_rejected(self, setup: Fixture):
        with pytest.raises(ValueError):
            fit_asymptotic_coefficient(_eigenvalue_cell, 1, (100.0, 100.0))

    def test_resonance_gap_is_rejected(self, setup: Fixture):
        with pytest.raises(BandDomainError):
            asymptotic_coefficient(_resonance_cell, 1)

    def test_vanishing_coefficient(self, setup: Fixture):
        with patch(
            "octant_spectra.half_solid.phi_p_derivative", autospec=True, return_value=1e20
        ):
            with pytest.raises(DegeneracyError):
                asymptotic_coefficient(_eigenvalue_cell, 1)


class TestHalfSolidSpectrum:
    @dataclass
    class Parameters:
        description: str
        tau: float
        expect_error: bool = False

    @dataclass
    class Fixture:
        spectrum: Optional[HalfSolidSpectrum]
        tau: float
        captured_log: str
        expect_error: bool

    @pytest.fixture(
        params=[
            Parameters(description="Vacuum far above", tau=400.0),
            Parameters(description="Vacuum at the smallest clearance", tau=20.2),
            Parameters(description="Vacuum too low", tau=10.0, expect_error=True),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, caplog, request) -> Fixture:
        param: TestHalfSolidSpectrum.Parameters = request.param
        try:
            spectrum = half_solid_spectrum(_eigenvalue_cell, param.tau)
        except ThresholdError:
            spectrum = None
        return self.Fixture(
            spectrum=spectrum,
            tau=param.tau,
            captured_log=caplog.text,
            expect_error=param.expect_error,
        )

    def test_threshold(self, setup: Fixture):
        assert (setup.spectrum is None) == setup.expect_error
        if setup.expect_error:
            assert "must be at least" in setup.captured_log

    def test_structure(self, setup: Fixture):
        if setup.spectrum is None:
            return
        assert len(setup.spectrum.bands) == 3
        assert len(setup.spectrum.gaps) == 2
        assert setup.spectrum.vacuum_band.lower == pytest.approx(setup.tau - 2.0)
        assert setup.spectrum.vacuum_band.upper == pytest.approx(setup.tau + 2.0)
        assert setup.spectrum.gaps[-1].upper == pytest.approx(setup.tau - 2.0)

    def test_top_gap_eigenvalues_lie_in_top_gap(self, setup: Fixture):
        if setup.spectrum is None:
            return
        top_gap = setup.spectrum.gaps[-1]
        for eigenvalue in setup.spectrum.top_gap_eigenvalues:
            assert top_gap.lower < eigenvalue < top_gap.upper
        assert np.all(np.diff(setup.spectrum.top_gap_eigenvalues) > 0.0)


class TestDesignedResonanceGaps:
    _length = 2000
    _interface_sites = 100

    @dataclass
    class Fixture:
        coefficients: PeriodicCoefficients
        eigenvalues: tuple[Optional[float], ...]
        gaps: tuple[Interval, ...]
        localized: list[np.ndarray]

    @pytest.fixture(scope="class")
    def setup(self) -> Fixture:
        coefficients = design_uniform(uniform_design_spec(8, 200.0, sheet_sign=-1), 200.0)
        tau = 4000.0
        gaps = band_edges(coefficients).gaps
        diagonal, off_diagonal = half_solid_tridiagonal(coefficients, tau, self._length)
        near = slice(self._length - self._interface_sites, self._length + self._interface_sites)
        localized = []
        for gap in gaps:
            values, vectors = linalg.eigh_tridiagonal(
                diagonal, off_diagonal, select="v", select_range=(gap.lower, gap.upper)
            )
            # the far cut carries its own gap states; keep those at the vacuum interface
            weights = np.sum(vectors[near] ** 2, axis=0)
            inside = (values > gap.lower) & (values < gap.upper) & (weights > 0.99)
            localized.append(values[inside])
        return self.Fixture(
            coefficients=coefficients,
            eigenvalues=find_gap_eigenvalues(coefficients, tau),
            gaps=gaps,
            localized=localized,
        )

    def test_all_states_are_resonances(self, setup: Fixture):
        states = classify_states(setup.coefficients)
        assert len(states) == 7
        assert all(state.kind is StateKind.RESONANCE for state in states)

    def test_edge_eigenvalue_is_found(self, setup: Fixture):
        assert any(eigenvalue is not None for eigenvalue in setup.eigenvalues)

    def test_counts_match_truncation(self, setup: Fixture):
        for eigenvalue, values in zip(setup.eigenvalues, setup.localized):
            assert values.size == (0 if eigenvalue is None else 1)

    def test_values_match_truncation(self, setup: Fixture):
        for eigenvalue, values, gap in zip(setup.eigenvalues, setup.localized, setup.gaps):
            if eigenvalue is not None:
                assert gap.lower < eigenvalue < gap.upper
                assert values[0] == pytest.approx(eigenvalue, abs=1e-6)


class TestDesignedEigenvalueGaps:
    _length = 2000
    _interface_sites = 100

    @dataclass
    class Fixture:
        eigenvalues: tuple[Optional[float], ...]
        gaps: tuple[Interval, ...]
        localized: list[np.ndarray]

    @pytest.fixture(scope="class")
    def setup(self) -> Fixture:
        coefficients = design_uniform(uniform_design_spec(8, 200.0), 200.0)
        tau = 1600.0
        gaps = band_edges(coefficients).gaps
        diagonal, off_diagonal = half_solid_tridiagonal(coefficients, tau, self._length)
        near = slice(self._length - self._interface_sites, self._length + self._interface_sites)
        localized = []
        for gap in gaps:
            values, vectors = linalg.eigh_tridiagonal(
                diagonal, off_diagonal, select="v", select_range=(gap.lower, gap.upper)
            )
            weights = np.sum(vectors[near] ** 2, axis=0)
            inside = (values > gap.lower) & (values < gap.upper) & (weights > 0.99)
            localized.append(values[inside])
        return self.Fixture(
            eigenvalues=find_gap_eigenvalues(coefficients, tau),
            gaps=gaps,
            localized=localized,
        )

    def test_every_gap_has_one_eigenvalue(self, setup: Fixture):
        assert len(setup.eigenvalues) == 7
        assert all(eigenvalue is not None for eigenvalue in setup.eigenvalues)
        assert [values.size for values in setup.localized] == [1] * 7

    def test_values_match_truncation(self, setup: Fixture):
        for eigenvalue, values, gap in zip(setup.eigenvalues, setup.localized, setup.gaps):
            assert gap.lower < eigenvalue < gap.upper
            assert values[0] == pytest.approx(eigenvalue, abs=1e-6)
