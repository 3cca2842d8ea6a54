"""Command-line front end: evaluate states over time, solve Bayes maps, run
the certification table, and replay scenario documents.

Exit codes: 0 success, 2 validation failure, 3 parse failure, 4 numerical
failure (singularities, faithfulness, verification misses), 5 internal error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import algebra as alg, axioms, bayes, io, maps, scenarios, sot
from .algebra import AlgebraElement
from .config import PASS_THRESHOLD
from .errors import (ConstraintError, ExtensionError, FaithfulnessError,
                     InapplicableError, NotAStateError, NotHermitianError,
                     ParseError, QsotError, ShapeMismatchError,
                     SingularityError, UnsupportedFamilyError, ValidationError)
from .maps import LinearMap

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARSE = 3
EXIT_NUMERICAL = 4
EXIT_INTERNAL = 5

_VALIDATION_ERRORS = (ValidationError, ConstraintError, ShapeMismatchError,
                      NotAStateError, NotHermitianError, ExtensionError,
                      UnsupportedFamilyError, InapplicableError)
_NUMERICAL_ERRORS = (SingularityError, FaithfulnessError)


def _default_seed() -> int:
    return int(os.environ.get("QSOT_SEED", "0"))


def _family_from_args(args) -> sot.SotFamily:
    doc = {"tag": args.family}
    for key in ("t", "r", "s", "theta"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    return io.parse_family(doc)


def _load_map(path: str) -> LinearMap:
    obj = io.load(path)
    if not isinstance(obj, LinearMap):
        raise ValidationError(f"{path} does not contain a channel document")
    return obj


def _load_element(path: str) -> AlgebraElement:
    obj = io.load(path)
    if not isinstance(obj, AlgebraElement):
        raise ValidationError(f"{path} does not contain an element document")
    return obj


def _emit(doc: dict, out_file: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out_file:
        with open(out_file, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ------------------------------------------------------------------ commands
def cmd_sot(args) -> int:
    family = _family_from_args(args)
    channel = _load_map(args.channel_file)
    state = _load_element(args.state_file)
    result = sot.evaluate(family, channel, state)
    res_a, res_b = result.marginal_residuals()
    doc = {"kind": "sot_result", "schema_version": io.SCHEMA_VERSION,
           "family": io.serialize_family(family),
           "value": io.serialize_element(result.value),
           "marginal_residuals": [res_a, res_b]}
    _emit(doc, args.out_file)
    print(f"state over time computed: marginal residuals "
          f"{res_a:.3e} / {res_b:.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_bayes(args) -> int:
    family = _family_from_args(args)
    channel = _load_map(args.channel_file)
    state = _load_element(args.state_file)
    uniqueness = None
    try:
        solution_map = bayes.closed_form_bayes(family, channel, state,
                                               strict=args.strict)
    except UnsupportedFamilyError:
        generic = bayes.generic_bayes(family, channel, state)
        solution_map, uniqueness = generic.map, generic.uniqueness
    residual = bayes.bayes_residual(family, solution_map, channel, state)
    classification = bayes.classify_solution(solution_map)
    doc = {"kind": "bayes_solution", "schema_version": io.SCHEMA_VERSION,
           "family": io.serialize_family(family),
           "map": io.serialize_map(solution_map, kind="map"),
           "residual": residual, "classification": classification}
    if uniqueness is not None:
        doc["uniqueness"] = uniqueness
    _emit(doc, args.out_file)
    print(f"Bayes map: residual {residual:.3e}, {classification}",
          file=sys.stderr)
    if args.verify and residual >= PASS_THRESHOLD:
        print(f"verification failed: residual {residual:.3e} >= "
              f"{PASS_THRESHOLD:.0e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_certify(args) -> int:
    family_tags = (args.families.split(",") if args.families
                   else list(sot.TABLE_FAMILIES))
    unknown = [t for t in family_tags if t not in sot.TABLE_FAMILIES]
    if unknown:
        raise ValidationError(f"unknown families: {', '.join(unknown)}")
    properties = (tuple(args.properties.split(",")) if args.properties
                  else axioms.TABLE_PROPERTIES)
    unknown = [p for p in properties if p not in axioms.PROPERTIES]
    if unknown:
        raise ValidationError(f"unknown properties: {', '.join(unknown)}")
    families = {t: sot.TABLE_FAMILIES[t] for t in family_tags}
    config = axioms.CertifyConfig(trials=args.trials, seed=args.seed)
    report = axioms.table_report(config, families=families, properties=properties)
    mismatches = report.mismatches()
    if args.format == "json":
        doc = {"kind": "certify_report", "schema_version": io.SCHEMA_VERSION}
        doc.update(report.to_json())
        if args.expect_paper:
            doc["matches_expected"] = not mismatches
        _emit(doc, args.out_file)
    else:
        print(report.render_text())
        for fam, row in report.verdicts.items():
            for prop, verdict in row.items():
                if verdict.note:
                    print(f"  note [{fam} {prop}]: {verdict.note}")
    if args.expect_paper:
        if mismatches:
            for fam, prop, want, got in mismatches:
                print(f"mismatch: {fam} {prop} expected {want} got {got}",
                      file=sys.stderr)
            return EXIT_VALIDATION
        print("verdict matrix matches the expected pattern", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------- scenario runs
def _parse_sub(doc: dict, key: str):
    if key not in doc:
        raise ParseError(f"scenario document is missing {key!r}")
    return io.parse_document(doc[key])


def _scenario_pem(doc: dict) -> tuple[dict, bool]:
    prep = _parse_sub(doc, "prep")
    evo = _parse_sub(doc, "evo")
    meas = _parse_sub(doc, "meas")
    p = alg.diagonal_element(prep.source, [float(v) for v in doc["p"]])
    scenario = scenarios.PemScenario(p, prep, evo, meas)
    _, residuals = scenarios.pem_reverse(scenario, strict=doc.get("strict", True))
    ok = (residuals["classical_inverse"] < 1e-9
          and residuals["leifer_pairing"] < 1e-9)
    return {"scenario": "pem", "residuals": residuals}, ok


def _instrument_from_doc(doc: dict) -> scenarios.InstrumentScenario:
    sigma = _parse_sub(doc, "sigma")
    parts = tuple(io.parse_document(part) for part in doc.get("cp_parts", []))
    if not parts:
        raise ParseError("scenario document needs a non-empty cp_parts list")
    return scenarios.InstrumentScenario(sigma, parts)


def _scenario_state_update(doc: dict) -> tuple[dict, bool]:
    s = _instrument_from_doc(doc)
    family = io.parse_family(doc["family"]) if "family" in doc else None
    _, checks = scenarios.state_update(s, family)
    return ({"scenario": "state-update", "checks": checks},
            all(v < 1e-10 for v in checks.values()))


def _scenario_jeffrey(doc: dict) -> tuple[dict, bool]:
    s = _instrument_from_doc(doc)
    posterior = scenarios.jeffrey_update(s, [float(v) for v in doc["r"]])
    try:
        alg.assert_state(posterior)
        ok = True
    except QsotError:
        ok = False
    return ({"scenario": "jeffrey",
             "posterior": io.serialize_element(posterior, kind="state")}, ok)


def _scenario_two_state(doc: dict) -> tuple[dict, bool]:
    effects = [io.parse_matrix(m) for m in doc["effects"]]
    povm = maps.povm(effects)
    psi = np.array([io.parse_complex(v) for v in doc["psi"]])
    unitaries = None
    if "u10" in doc or "u21" in doc:
        dim = povm.source.dims[0]
        eye = np.eye(dim, dtype=complex)
        unitaries = (io.parse_matrix(doc["u10"]) if "u10" in doc else eye,
                     io.parse_matrix(doc["u21"]) if "u21" in doc else eye)
    entries = scenarios.two_state(psi, povm, unitaries)
    observable = io.parse_matrix(doc["observable"]) if "observable" in doc else None
    report = []
    ok = True
    for entry in entries:
        item: dict = {"outcome": str(entry.outcome),
                      "probability": entry.probability,
                      "defined": entry.defined}
        if entry.propagated_residual is not None:
            item["propagated_residual"] = entry.propagated_residual
            ok = ok and entry.propagated_residual < 1e-10
        if entry.defined and observable is not None:
            item["weak_value"] = io.serialize_complex(entry.weak_value(observable))
        report.append(item)
    return {"scenario": "two-state", "entries": report}, ok


def _scenario_correlator(doc: dict) -> tuple[dict, bool]:
    rho = _parse_sub(doc, "rho")
    h = _parse_sub(doc, "h")
    a = _parse_sub(doc, "a")
    b = _parse_sub(doc, "b")
    t = float(doc.get("t", 0.0))
    direct = scenarios.two_time_correlator(rho, h, t, a, b)
    via_sot = scenarios.two_time_correlator(rho, h, t, a, b, via="sot")
    gap = abs(direct - via_sot)
    return ({"scenario": "correlator", "t": t,
             "direct": io.serialize_complex(direct),
             "via_sot": io.serialize_complex(via_sot),
             "difference": gap}, gap < 1e-10)


def _scenario_linearization(doc: dict) -> tuple[dict, bool]:
    channel = _parse_sub(doc, "channel")
    direction = _parse_sub(doc, "direction")
    epsilons = [float(v) for v in doc.get("epsilons", [1e-2, 5e-3, 2.5e-3])]
    report = scenarios.ls_linearization_check(channel, direction, epsilons)
    ok = all(3.5 <= r <= 4.5 for r in report.ratios)
    return ({"scenario": "ls-linearization", "epsilons": list(report.epsilons),
             "errors": list(report.errors), "ratios": list(report.ratios)}, ok)


_SCENARIOS = {"pem": _scenario_pem, "state-update": _scenario_state_update,
              "jeffrey": _scenario_jeffrey, "two-state": _scenario_two_state,
              "correlator": _scenario_correlator,
              "ls-linearization": _scenario_linearization}


def cmd_scenario(args) -> int:
    if args.name not in _SCENARIOS:
        raise ValidationError(f"unknown scenario {args.name!r}")
    doc = io.load(args.input_file)
    if not isinstance(doc, dict) or doc.get("name") != args.name:
        raise ValidationError(
            f"{args.input_file} is not a {args.name!r} scenario document")
    try:
        report, ok = _SCENARIOS[args.name](doc)
    except KeyError as exc:
        raise ParseError(f"scenario document is missing field {exc}") from exc
    report["passed"] = ok
    _emit(report, args.out_file)
    print(f"scenario {args.name}: {'all checks passed' if ok else 'CHECKS FAILED'}",
          file=sys.stderr)
    return EXIT_OK if ok else EXIT_NUMERICAL


# ---------------------------------------------------------------- entry point
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsot",
        description="states over time, time reversal, and quantum Bayes maps")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_family_options(p):
        p.add_argument("--family", required=True,
                       help="family tag (e.g. leifer-spekkens, rs, theta)")
        p.add_argument("--t", type=float, default=None, help="rotation parameter")
        p.add_argument("--r", type=float, default=None, help="(r,s) exponent")
        p.add_argument("--s", type=float, default=None, help="(r,s) mixing weight")
        p.add_argument("--theta", default=None,
                       help="state-rendering recipe: ls|jordan|right|left")

    p_sot = sub.add_parser("sot", help="evaluate a state over time")
    add_family_options(p_sot)
    p_sot.add_argument("channel_file")
    p_sot.add_argument("state_file")
    p_sot.add_argument("out_file", nargs="?", default=None)
    p_sot.set_defaults(func=cmd_sot)

    p_bayes = sub.add_parser("bayes", help="solve for the Bayes map")
    add_family_options(p_bayes)
    p_bayes.add_argument("channel_file")
    p_bayes.add_argument("state_file")
    p_bayes.add_argument("out_file", nargs="?", default=None)
    p_bayes.add_argument("--verify", action="store_true",
                         help="exit nonzero unless the residual passes")
    p_bayes.add_argument("--strict", action="store_true",
                         help="refuse rank-deficient outputs instead of "
                              "using support pseudo-inverses")
    p_bayes.set_defaults(func=cmd_bayes)

    p_cert = sub.add_parser("certify", help="run the property certification table")
    p_cert.add_argument("--families", default=None,
                        help="comma-separated family tags (default: all)")
    p_cert.add_argument("--properties", default=None,
                        help="comma-separated properties (default: table set)")
    p_cert.add_argument("--trials", type=int, default=200)
    p_cert.add_argument("--seed", type=int, default=_default_seed())
    p_cert.add_argument("--format", choices=("json", "table"), default="table")
    p_cert.add_argument("--expect-paper", action="store_true",
                        help="exit nonzero unless the matrix matches the "
                             "reference pattern")
    p_cert.add_argument("-o", "--out-file", default=None)
    p_cert.set_defaults(func=cmd_certify)

    p_scen = sub.add_parser("scenario", help="run a scenario document")
    p_scen.add_argument("name", choices=sorted(_SCENARIOS))
    p_scen.add_argument("input_file")
    p_scen.add_argument("-o", "--out-file", default=None)
    p_scen.set_defaults(func=cmd_scenario)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except QsotError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - safety net
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
