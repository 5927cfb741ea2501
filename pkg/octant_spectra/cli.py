"""Command-line interface for the spectral design pipeline"""
import argparse
import dataclasses
import logging
import sys
from typing import Callable, Optional, Sequence

import numpy as np

from octant_spectra import DEFAULT_TOLERANCES, NumericalError, Tolerances, ValidationError
from octant_spectra.app import App, CertifiedDesign
from octant_spectra.assembler import (
    ClusterReport,
    Domain,
    assemble_mixed,
    component_from_half_line,
    component_from_half_solid,
)
from octant_spectra.coefficients_reader import load_coefficient_list, load_coefficients
from octant_spectra.half_solid import (
    asymptotic_coefficient,
    fit_asymptotic_coefficient,
    half_solid_spectrum,
)
from octant_spectra.jacobi_core import Interval, band_edges, gap_heights
from octant_spectra.oracle import (
    PerturbationSpec,
    TruncationModel,
    TruncationSpec,
    count_in_interval,
    perturb_and_count,
    truncate_and_diagonalize,
)
from octant_spectra.report_writer import (
    coefficients_document,
    render_table,
    to_jsonable,
    write_csv,
    write_report,
)
from octant_spectra.states import Side, classify_states

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
FIT_TAU_FACTORS = (1.0, 2.0, 4.0, 8.0)

Result = tuple[dict, list[dict]]


def _interval(text: str) -> Interval:
    try:
        lower, upper = (float(part) for part in text.split(","))
    except ValueError as error:
        raise argparse.ArgumentTypeError(f'expected "a,b", got "{text}"') from error
    return Interval(lower=lower, upper=upper)


def _perturbation(text: str) -> tuple[float, Optional[int]]:
    parts = text.split(",")
    try:
        epsilon = float(parts[0])
        seed = int(parts[1]) if len(parts) > 1 else None
    except (ValueError, IndexError) as error:
        raise argparse.ArgumentTypeError(f'expected "eps[,seed]", got "{text}"') from error
    return epsilon, seed


def build_tolerances(overrides: Sequence[str]) -> Tolerances:
    """
    Tolerances with `name=value` overrides applied.

    :param overrides: strings such as "coverage=0.1"
    :return: tolerances
    """
    fields = {field.name: field for field in dataclasses.fields(Tolerances)}
    changes = {}
    for override in overrides:
        name, _, value = override.partition("=")
        if name not in fields or not value:
            message = f'Unknown tolerance override "{override}"; known: {sorted(fields)}'
            logger.info(message)
            raise ValidationError(message)
        kind = int if fields[name].type in (int, "int") else float
        try:
            changes[name] = kind(float(value)) if kind is int else kind(value)
        except ValueError as error:
            message = f'Tolerance "{name}" needs a number, got "{value}"'
            logger.info(message)
            raise ValidationError(message) from error
    return dataclasses.replace(DEFAULT_TOLERANCES, **changes)


def run_bands(args: argparse.Namespace, tolerances: Tolerances) -> Result:
    coeffs = load_coefficients(args.coeffs)
    bands = band_edges(coeffs, tolerances)
    heights = gap_heights(coeffs, tolerances)
    band_rows = [
        {"kind": "band", "n": n, "lower": band.lower, "upper": band.upper, "height": None}
        for n, band in enumerate(bands.bands)
    ]
    gap_rows = [
        {"kind": "gap", "n": n, "lower": gap.lower, "upper": gap.upper, "height": height}
        for n, (gap, height) in enumerate(zip(bands.gaps, heights), start=1)
    ]
    document = {
        "p": coeffs.p,
        "edges": bands.edges,
        "open_gaps": bands.open_gaps,
        "bands": bands.bands,
        "gaps": gap_rows,
    }
    return document, band_rows + gap_rows


def run_states(args: argparse.Namespace, tolerances: Tolerances) -> Result:
    coeffs = load_coefficients(args.coeffs)
    states = classify_states(coeffs, side=Side(args.side), tolerances=tolerances)
    rows = [to_jsonable(state) for state in states]
    return {"side": args.side, "states": rows}, rows


def run_design(args: argparse.Namespace, tolerances: Tolerances) -> Result:
    app = App(tolerances=tolerances)
    report = app.design(p=args.p, gamma=args.gamma, d=args.dim, sheet_sign=args.sheet)
    rows = [
        {
            "n": state.n,
            "gap": report.achieved_gaps[state.n - 1],
            "mu": state.mu,
            "kind": state.kind,
            "error": error,
        }
        for state, error in zip(report.achieved_states, report.state_errors)
    ]
    document = {
        "coefficients": coefficients_document(app.coefficients[0]),
        "verification": report,
    }
    return document, rows


def run_halfsolid(args: argparse.Namespace, tolerances: Tolerances) -> Result:
    coeffs = load_coefficients(args.coeffs)
    spectrum = half_solid_spectrum(coeffs, args.tau, tolerances)
    rows = []
    for n, mu_tau in enumerate(spectrum.eigenvalues, start=1):
        if mu_tau is None:
            continue
        row = {"n": n, "mu_tau": mu_tau, "c": asymptotic_coefficient(coeffs, n, tolerances)}
        if args.fit:
            taus = [args.tau * factor for factor in FIT_TAU_FACTORS]
            row["c_fit"] = fit_asymptotic_coefficient(coeffs, n, taus, tolerances)
        rows.append(row)
    document = {
        "tau": spectrum.tau,
        "bands": spectrum.bands,
        "gaps": spectrum.gaps,
        "eigenvalues": rows,
        "top_gap_eigenvalues": spectrum.top_gap_eigenvalues,
    }
    return document, rows


def _isolation_rows(report: ClusterReport) -> list[dict]:
    return [
        {
            "n": point.n,
            "value": point.value,
            "multiplicity": point.multiplicity,
            "lower": isolation.scaled.lower,
            "upper": isolation.scaled.upper,
            "distance": isolation.distance,
            "isolated": isolation.isolated,
        }
        for point, isolation in zip(report.point_spectrum, report.isolation)
    ]


def run_assemble(args: argparse.Namespace, tolerances: Tolerances) -> Result:
    coefficients = [c for path in args.coeffs for c in load_coefficient_list(path)]
    domain = Domain(args.domain)
    if domain is Domain.OCTANT:
        app = App(coefficients=coefficients, tolerances=tolerances)
        report = app.assemble(args.dim, args.gamma)
    else:
        if args.tau is None or len(coefficients) != 2:
            message = "Mixed domains need --tau and two coefficient sets"
            logger.info(message)
            raise ValidationError(message)
        components = []
        for axis, coeffs in enumerate(coefficients):
            if domain is Domain.HALF_PLANE and axis == 0:
                bands = band_edges(coeffs, tolerances)
                states = classify_states(coeffs, tolerances=tolerances, bands=bands)
                components.append(component_from_half_line(bands, states))
            else:
                spectrum = half_solid_spectrum(coeffs, args.tau, tolerances)
                components.append(component_from_half_solid(spectrum))
        report = assemble_mixed(domain, components, args.gamma)
    document = to_jsonable(report)
    document["essential_spectrum"] = to_jsonable(report.essential_spectrum)
    return document, _isolation_rows(report)


def run_oracle(args: argparse.Namespace, tolerances: Tolerances) -> Result:
    coefficients = [c for path in args.coeffs for c in load_coefficient_list(path)]
    model = TruncationModel(args.model)
    lengths = tuple(args.L)
    if model is TruncationModel.BOX and len(lengths) == 1:
        lengths = lengths * len(coefficients)
    half_line_axes = len(lengths) if args.half_line_axes is None else args.half_line_axes
    spec = TruncationSpec(
        model=model, lengths=lengths, half_line_axes=half_line_axes, tau=args.tau
    )
    values = truncate_and_diagonalize(
        spec, coefficients, window=args.interval, tolerances=tolerances
    )
    document: dict = {"model": model.value, "lengths": lengths}
    rows = [{"index": i, "eigenvalue": value} for i, value in enumerate(values)]
    if args.interval is None:
        document["eigenvalues"] = values
        return document, rows

    document["interval"] = args.interval
    document["count"] = count_in_interval(values, args.interval, tolerances)
    if args.perturb is not None:
        epsilon, seed = args.perturb
        rng = np.random.default_rng(args.seed if seed is None else seed)
        cell = tuple(c.p for c in coefficients)
        perturbation = PerturbationSpec.random(rng, epsilon, cell)
        document["perturbation"] = perturb_and_count(
            spec, coefficients, perturbation, args.interval, tolerances
        )
    return document, rows


def run_certify(args: argparse.Namespace, tolerances: Tolerances) -> Result:
    app = App(tolerances=tolerances)
    design: CertifiedDesign = app.certify(args.interval, args.N, d=args.dim, seed=args.seed)
    row = {
        "N": design.N,
        "n": design.n,
        "gamma": design.gamma,
        "achieved": design.achieved_eigenvalue,
        "distance": design.isolation_distance,
        "oracle": design.oracle_count,
        "perturbed": design.perturbed_count,
    }
    return to_jsonable(design), [row]


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="Write the JSON document to this path.")
    common.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="Override a numerical tolerance; may be repeated.",
    )
    common.add_argument("--seed", type=int, default=0, help="Seed for randomized checks.")
    output = common.add_mutually_exclusive_group()
    output.add_argument("--table", action="store_true", help="Print an aligned text table.")
    output.add_argument("--csv", action="store_true", help="Print CSV rows.")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="octant-spectra",
        description="Design periodic Jacobi operators and certify eigenvalues of their sums.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    bands = commands.add_parser("bands", parents=[common], help="Band edges and gap heights.")
    bands.add_argument("--coeffs", required=True, help="Coefficient JSON file.")
    bands.set_defaults(handler=run_bands)

    states = commands.add_parser("states", parents=[common], help="Gap state classification.")
    states.add_argument("--coeffs", required=True, help="Coefficient JSON file.")
    states.add_argument("--side", choices=[s.value for s in Side], default=Side.RIGHT.value)
    states.set_defaults(handler=run_states)

    design = commands.add_parser("design", parents=[common], help="Uniform-gap design.")
    design.add_argument("--p", type=int, default=8, help="Period (default: 8).")
    design.add_argument("--gamma", type=float, default=200.0, help="Gap length (default: 200).")
    design.add_argument("--dim", type=int, default=2, help="Dimension setting e_1 (default: 2).")
    design.add_argument("--sheet", type=int, choices=[1, -1], default=1, help="State sheet.")
    design.set_defaults(handler=run_design)

    halfsolid = commands.add_parser("halfsolid", parents=[common], help="Half-solid spectrum.")
    halfsolid.add_argument("--coeffs", required=True, help="Coefficient JSON file.")
    halfsolid.add_argument("--tau", type=float, required=True, help="Vacuum potential.")
    halfsolid.add_argument("--fit", action="store_true", help="Fit c from a tau sweep.")
    halfsolid.set_defaults(handler=run_halfsolid)

    assembler = commands.add_parser("assemble", parents=[common], help="Cluster report.")
    assembler.add_argument("--dim", type=int, default=2, help="Dimension (default: 2).")
    assembler.add_argument(
        "--domain", choices=[d.value for d in Domain], default=Domain.OCTANT.value
    )
    assembler.add_argument(
        "--coeffs", nargs="+", required=True, help="Coefficient files, one per axis."
    )
    assembler.add_argument("--gamma", type=float, required=True, help="Normalization scale.")
    assembler.add_argument(
        "--tau", type=float, default=None, help="Vacuum potential of half solids."
    )
    assembler.set_defaults(handler=run_assemble)

    oracle = commands.add_parser("oracle", parents=[common], help="Finite truncation check.")
    oracle.add_argument("--model", choices=[m.value for m in TruncationModel], required=True)
    oracle.add_argument("--L", type=int, nargs="+", required=True, help="Truncation lengths.")
    oracle.add_argument(
        "--coeffs", nargs="+", required=True, help="Coefficient files, one per axis."
    )
    oracle.add_argument("--half-line-axes", type=int, default=None, dest="half_line_axes")
    oracle.add_argument("--tau", type=float, default=None, help="Vacuum potential.")
    oracle.add_argument(
        "--interval", type=_interval, default=None, help='Counting interval "a,b".'
    )
    oracle.add_argument("--perturb", type=_perturbation, default=None, help='"eps[,seed]".')
    oracle.set_defaults(handler=run_oracle)

    certify = commands.add_parser(
        "certify", parents=[common], help="Certify N eigenvalues in an interval."
    )
    certify.add_argument(
        "--interval", type=_interval, required=True, help='Target interval "a,b".'
    )
    certify.add_argument("--N", type=int, required=True, help="Number of eigenvalues.")
    certify.add_argument("--dim", type=int, default=2, help="Dimension (default: 2).")
    certify.set_defaults(handler=run_certify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    :param argv: arguments without the program name
    :return: exit code, 0 on success, 2 on invalid input, 3 on solver failure
    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger("octant_spectra").setLevel(logging.DEBUG)

    handler: Callable[[argparse.Namespace, Tolerances], Result] = args.handler
    try:
        tolerances = build_tolerances(args.tol)
        document, rows = handler(args, tolerances)
    except (ValidationError, OSError) as error:
        logger.error(f"{args.command}: {error}")
        return EXIT_VALIDATION
    except NumericalError as error:
        logger.error(f"{args.command}: {error}")
        return EXIT_NUMERICAL

    if args.out is not None:
        write_report(document, args.out)
    if args.table:
        sys.stdout.write(render_table(rows))
    elif args.csv:
        write_csv(rows)
    elif args.out is None:
        write_report(document)
    return EXIT_OK
