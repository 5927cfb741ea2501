# pylint: disable=C,W,R
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional
from unittest.mock import patch

import pytest

from octant_spectra import ValidationError
from octant_spectra.app import CertificationError
from octant_spectra.cli import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VALIDATION,
    build_tolerances,
    main,
)
from octant_spectra.inverse_design import decoupled_design
from octant_spectra.jacobi_core import PeriodicCoefficients
from octant_spectra.report_writer import save_coefficients


@pytest.fixture
def coefficient_files(tmp_path) -> dict[str, str]:
    files = {
        "two_site": PeriodicCoefficients(p=2, a=(1.0, 1.0), b=(1.0, -1.0)),
        "eigenvalue": PeriodicCoefficients(p=2, a=(0.5, 2.0), b=(1.0, -1.0)),
        "designed": decoupled_design((0.0, 16.0), (2.0,)),
    }
    paths = {}
    for name, coeffs in files.items():
        path = tmp_path / f"{name}.json"
        save_coefficients(path, coeffs)
        paths[name] = str(path)
    return paths


class TestSubcommands:
    @dataclass
    class Parameters:
        description: str
        argv: Callable[[dict[str, str]], list[str]]
        expected_code: int
        check: Optional[Callable[[dict], bool]] = None

    @dataclass
    class Fixture:
        code: int
        output: str
        captured_log: str
        expected_code: int
        check: Optional[Callable[[dict], bool]]

    @pytest.fixture(
        params=[
            Parameters(
                description="Band edges",
                argv=lambda f: ["bands", "--coeffs", f["two_site"]],
                expected_code=EXIT_OK,
                check=lambda doc: all(
                    math.isclose(edge, expected, abs_tol=1e-9)
                    for edge, expected in zip(
                        doc["edges"], (-math.sqrt(5.0), -1.0, 1.0, math.sqrt(5.0))
                    )
                ),
            ),
            Parameters(
                description="Left states",
                argv=lambda f: ["states", "--coeffs", f["eigenvalue"], "--side", "left"],
                expected_code=EXIT_OK,
                check=lambda doc: [s["kind"] for s in doc["states"]] == ["resonance"],
            ),
            Parameters(
                description="Half solid with a fit",
                argv=lambda f: ["halfsolid", "--coeffs", f["designed"], "--tau", "100", "--fit"],
                expected_code=EXIT_OK,
                check=lambda doc: doc["eigenvalues"][0]["mu_tau"] < 2.0
                and math.isclose(
                    doc["eigenvalues"][0]["c_fit"], doc["eigenvalues"][0]["c"], rel_tol=0.05
                ),
            ),
            Parameters(
                description="Quarter plane assembly",
                argv=lambda f: ["assemble", "--coeffs", f["designed"], "--gamma", "16"],
                expected_code=EXIT_OK,
                check=lambda doc: doc["domain"] == "octant"
                and doc["point_spectrum"][0]["multiplicity"] == 1,
            ),
            Parameters(
                description="Half-line truncation count",
                argv=lambda f: [
                    "oracle",
                    "--model",
                    "half_line",
                    "--L",
                    "399",
                    "--coeffs",
                    f["eigenvalue"],
                    "--interval",
                    "0.5,1.5",
                ],
                expected_code=EXIT_OK,
                check=lambda doc: doc["count"] == 1,
            ),
            Parameters(
                description="Tolerance override",
                argv=lambda f: ["bands", "--coeffs", f["two_site"], "--tol", "closed_gap=1e-6"],
                expected_code=EXIT_OK,
            ),
            Parameters(
                description="Unknown tolerance",
                argv=lambda f: ["bands", "--coeffs", f["two_site"], "--tol", "speed=2"],
                expected_code=EXIT_VALIDATION,
            ),
            Parameters(
                description="Missing coefficient file",
                argv=lambda f: ["bands", "--coeffs", f["two_site"] + ".missing"],
                expected_code=EXIT_VALIDATION,
            ),
            Parameters(
                description="Vacuum too low",
                argv=lambda f: ["halfsolid", "--coeffs", f["designed"], "--tau", "10"],
                expected_code=EXIT_VALIDATION,
            ),
            Parameters(
                description="Infeasible certification",
                argv=lambda f: ["certify", "--interval", "0,5", "--N", "4"],
                expected_code=EXIT_VALIDATION,
            ),
        ],
        ids=lambda x: x.description,
    )
    def setup(self, coefficient_files, capsys, caplog, request) -> Fixture:
        param: TestSubcommands.Parameters = request.param
        code = main(param.argv(coefficient_files))
        return self.Fixture(
            code=code,
            output=capsys.readouterr().out,
            captured_log=caplog.text,
            expected_code=param.expected_code,
            check=param.check,
        )

    def test_exit_code(self, setup: Fixture):
        assert setup.code == setup.expected_code

    def test_document(self, setup: Fixture):
        if setup.expected_code == EXIT_OK:
            document = json.loads(setup.output)
            if setup.check is not None:
                assert setup.check(document)
        else:
            assert setup.output == ""
            assert setup.captured_log


class TestOutputFormats:
    def test_out_file_keeps_stdout_quiet(self, coefficient_files, tmp_path, capsys):
        path = tmp_path / "bands.json"
        assert main(["bands", "--coeffs", coefficient_files["two_site"], "--out", str(path)]) == 0
        assert capsys.readouterr().out == ""
        assert json.loads(path.read_text(encoding="utf-8"))["p"] == 2

    def test_table(self, coefficient_files, capsys):
        assert main(["bands", "--coeffs", coefficient_files["two_site"], "--table"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].split() == ["kind", "n", "lower", "upper", "height"]
        assert [line.split()[0] for line in lines[2:]] == ["band", "band", "gap"]

    def test_csv(self, coefficient_files, capsys):
        assert main(["bands", "--coeffs", coefficient_files["two_site"], "--csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "kind,n,lower,upper,height"
        assert len(lines) == 4

    def test_table_and_csv_exclude_each_other(self, coefficient_files):
        with pytest.raises(SystemExit):
            main(["bands", "--coeffs", coefficient_files["two_site"], "--table", "--csv"])


class TestSolverFailure:
    def test_numerical_error_exit_code(self, caplog):
        with patch(
            "octant_spectra.cli.App.certify",
            autospec=True,
            side_effect=CertificationError("Certification failed: counts [3, 4] for N=4"),
        ):
            code = main(["certify", "--interval", "100,140", "--N", "4"])
        assert code == EXIT_NUMERICAL
        assert "Certification failed" in caplog.text


class TestBuildTolerances:
    def test_overrides(self):
        tolerances = build_tolerances(["coverage=0.1", "dense_limit=100"])
        assert tolerances.coverage == 0.1
        assert tolerances.dense_limit == 100
        assert isinstance(tolerances.dense_limit, int)

    def test_non_numeric_value(self):
        with pytest.raises(ValidationError):
            build_tolerances(["coverage=wide"])

    def test_missing_value(self):
        with pytest.raises(ValidationError):
            build_tolerances(["coverage"])
