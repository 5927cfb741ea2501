# pylint: disable=C,W,R
import json
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import pytest

from octant_spectra.coefficients_reader import load_coefficient_list, load_coefficients
from octant_spectra.jacobi_core import CoefficientValidationError, PeriodicCoefficients


class TestLoadCoefficients:
    @dataclass
    class Parameters:
        description: str
        document: Any
        expected: Optional[PeriodicCoefficients] = None
        expect_error: Optional[str] = None

    @dataclass
    class Fixture:
        coefficients: Optional[PeriodicCoefficients]
        captured_log: str
        expected: Optional[PeriodicCoefficients]
        expect_error: Optional[str]

    @pytest.fixture(
        params=[
            Parameters(
                description="Normalized object",
                document={"p": 2, "a": [0.5, 2.0], "b": [1.0, -1.0], "shift": 3.0},
                expected=PeriodicCoefficients(p=2, a=(0.5, 2.0), b=(1.0, -1.0), shift=3.0),
            ),
            Parameters(
                description="Raw values without shift",
                document={"p": 2, "a": [2, 2], "b": [3, 1]},
                expected=PeriodicCoefficients(p=2, a=(1.0, 1.0), b=(1.0, -1.0), shift=2.0),
            ),
            Parameters(
                description="Design report",
                document={
                    "coefficients": {"p": 1, "a": [1.0], "b": [0.0], "shift": 0.0},
                    "verification": {},
                },
                expected=PeriodicCoefficients.free(1),
            ),
            Parameters(
                description="Missing period",
                document={"a": [1.0], "b": [0.0]},
                expect_error='field "p"',
            ),
            Parameters(
                description="Boolean period",
                document={"p": True, "a": [1.0], "b": [0.0]},
                expect_error='field "p"',
            ),
            Parameters(
                description="Short hopping list",
                document={"p": 2, "a": [1.0], "b": [0.0, 0.0], "shift": 0.0},
                expect_error='field "a"',
            ),
            Parameters(
                description="Text potential",
                document={"p": 2, "a": [1.0, 1.0], "b": ["0", 0.0], "shift": 0.0},
                expect_error='field "b"',
            ),
            Parameters(
                description="Text shift",
                document={"p": 1, "a": [1.0], "b": [0.0], "shift": "1"},
                expect_error='field "shift"',
            ),
            Parameters(
                description="Unnormalized values with a shift",
                document={"p": 2, "a": [2.0, 2.0], "b": [0.0, 0.0], "shift": 0.0},
                expect_error="unit product",
            ),
            Parameters(
                description="Two sets where one is expected",
                document=[
                    {"p": 1, "a": [1.0], "b": [0.0], "shift": 0.0},
                    {"p": 1, "a": [1.0], "b": [0.0], "shift": 1.0},
                ],
                expect_error="Expected one coefficient set",
            ),
            Parameters(
                description="Not an object",
                document=[3],
                expect_error="expected an object",
            ),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, tmp_path, caplog, request) -> Fixture:
        param: TestLoadCoefficients.Parameters = request.param
        path = tmp_path / "coefficients.json"
        path.write_text(json.dumps(param.document), encoding="utf-8")
        try:
            coefficients = load_coefficients(path)
        except CoefficientValidationError:
            coefficients = None
        return self.Fixture(
            coefficients=coefficients,
            captured_log=caplog.text,
            expected=param.expected,
            expect_error=param.expect_error,
        )

    def test_raises_on_invalid_input(self, setup: Fixture):
        assert (setup.coefficients is None) == (setup.expect_error is not None)

    def test_logs_offending_field(self, setup: Fixture):
        if setup.expect_error is not None:
            assert setup.expect_error in setup.captured_log

    def test_values(self, setup: Fixture):
        if setup.expected is not None:
            assert setup.coefficients.p == setup.expected.p
            np.testing.assert_allclose(setup.coefficients.a, setup.expected.a)
            np.testing.assert_allclose(setup.coefficients.b, setup.expected.b, atol=1e-15)
            assert setup.coefficients.shift == pytest.approx(setup.expected.shift)


class TestLoadCoefficientList:
    def test_list_keeps_file_order(self, tmp_path):
        path = tmp_path / "axes.json"
        path.write_text(
            json.dumps(
                [
                    {"p": 1, "a": [1.0], "b": [0.0], "shift": 0.0},
                    {"p": 2, "a": [1.0, 1.0], "b": [1.0, -1.0], "shift": 5.0},
                ]
            ),
            encoding="utf-8",
        )
        coefficients = load_coefficient_list(path)
        assert [c.p for c in coefficients] == [1, 2]
        assert coefficients[1].shift == 5.0

    def test_invalid_json(self, tmp_path, caplog):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(CoefficientValidationError):
            load_coefficient_list(path)
        assert "is not valid JSON" in caplog.text

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_coefficient_list(tmp_path / "missing.json")
