"""Command line front end.

Exit codes: 0 success, 1 unreadable plant or design file, 2 failed plant
assumptions, 3 infeasible gamma or interpolant fit, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .controller_synth import (RealizationError, SynthesisResult, assemble_sensitivity,
                               impulse_response, realize_controller, verify)
from .factorization import AssumptionError, FactorizationError, check_assumptions, factorize
from .np_design import (BranchAssignment, InfeasibleError, Interpolant, InterpolantKind,
                        build_data, find_gamma_star, fit_rational_unit,
                        optimal_interpolant, OPT_EPS)
from .numerics import RootFindingError
from .plantfile import (PlantFileError, complex_list, from_complex_list, load_plant,
                        real_coeffs, write_json, write_response_csv)
from .quasipoly import InconclusiveError, QuasiPolyError, classify, is_F_system, is_I_system
from .rational import RationalFn
from .zerofinder import ContourBox, ContourError, default_box, locate_zeros

log = logging.getLogger("stablehinf")

EXIT_PARSE, EXIT_ASSUMPTION, EXIT_INFEASIBLE, EXIT_NUMERIC = 1, 2, 3, 4
DESIGN_VERSION = 1
FREQ_GRID = np.logspace(-3, 3, 601)


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _fmt(z: complex) -> str:
    return f"{z.real:.10g}{z.imag:+.10g}j"


def _verdict(fn, q):
    try:
        return fn(q)
    except InconclusiveError:
        return None


def cmd_classify(args) -> int:
    plant = load_plant(args.file)
    cR, cT = classify(plant.R), classify(plant.T)
    fR, iT = _verdict(is_F_system, plant.R), _verdict(is_I_system, plant.T)
    word = {True: "", False: "not ", None: "inconclusive "}
    print(f"R: {cR.tag.value}, {word[fR]}F-system; T: {cT.tag.value}, {word[iT]}I-system")
    rep = check_assumptions(plant.R, plant.T)
    print(rep.summary())
    for m in rep.messages:
        print(f"  {m}")
    return 0 if rep.passed else EXIT_ASSUMPTION


def cmd_zeros(args) -> int:
    plant = load_plant(args.file)
    box = ContourBox(*args.box) if args.box else default_box(plant.R)
    zs = locate_zeros(plant.R, box)
    print(f"box: Re [{box.re_min:g}, {box.re_max:g}] x Im [{box.im_min:g}, {box.im_max:g}]")
    print(f"R has {len(zs)} zero(s) in the box")
    for z in zs:
        print(f"  {_fmt(z)}")
    return 0


def _factorize(plant):
    try:
        return factorize(plant.R, plant.T)
    except AssumptionError as exc:
        raise CliError(EXIT_ASSUMPTION, str(exc)) from None


def cmd_factorize(args) -> int:
    plant = load_plant(args.file)
    f = _factorize(plant)
    out = {
        "m_n": {"zeros": complex_list(f.m_n.zeros), "num_coeffs": real_coeffs(f.m_n.numerator),
                "den_coeffs": real_coeffs(f.m_n.denominator)},
        "M_Tbar": {"zeros": complex_list(f.M_Tbar.zeros),
                   "num_coeffs": real_coeffs(f.M_Tbar.numerator),
                   "den_coeffs": real_coeffs(f.M_Tbar.denominator)},
    }
    print(json.dumps(out, indent=2))
    return 0


def _fir_json(block):
    return {"q": real_coeffs(block.denominator), "support_end": block.support_end,
            "terms": [{"delay": str(h), "coeffs": real_coeffs(A)} for A, h in block.numerator_terms]}


def design_document(sr: SynthesisResult, args) -> dict:
    F = sr.interpolant
    doc = {
        "version": DESIGN_VERSION,
        "mode": "optimal" if F.kind is InterpolantKind.OPTIMAL_IRRATIONAL else "suboptimal",
        "gamma": sr.gamma,
        "gamma_star": sr.gamma_star,
        "branch": sr.diagnostics["branch"],
        "branch_at_cap": sr.diagnostics["branch_at_cap"],
        "m_bound": args.m_bound,
        "seed": args.seed,
        "nodes": complex_list(sr.data.nodes),
        "omega": complex_list(sr.data.omega),
        "residuals": [float(r) for r in F.residuals(sr.data)],
    }
    if F.kind is InterpolantKind.OPTIMAL_IRRATIONAL:
        doc["interpolant"] = {"kind": F.kind.value, "form": "irrational", "eps": OPT_EPS,
                              "realizable": False}
    else:
        doc["order"] = args.order
        doc["interpolant"] = {"kind": F.kind.value, "num_coeffs": real_coeffs(F.rational_form.num),
                              "den_coeffs": real_coeffs(F.rational_form.den), "realizable": True}
        doc["fir_R"] = _fir_json(sr.C.F_R)
        doc["fir_T"] = _fir_json(sr.C.F_T)
    return doc


def _report_dict(rep) -> dict:
    return json.loads(json.dumps(rep.as_dict(), default=lambda o: o.item()))


def cmd_design(args) -> int:
    plant = load_plant(args.file)
    f = _factorize(plant)
    data = build_data(f, plant.W)
    g_star, branch, at_cap = find_gamma_star(data, args.m_bound)
    if args.optimal:
        F = optimal_interpolant(data, branch, g_star)
    else:
        if args.gamma < g_star * (1 - 1e-9):
            raise CliError(EXIT_INFEASIBLE,
                           f"gamma={args.gamma:g} is below the optimal cost {g_star:.6g}: "
                           "the Pick matrix is indefinite for every branch set")
        try:
            F = fit_rational_unit(data, args.gamma, args.order, seed=args.seed)
        except InfeasibleError as exc:
            raise CliError(EXIT_INFEASIBLE, str(exc)) from None
    g = F.gamma
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rc = realize_controller(f, plant.W, F, g)
    sr = SynthesisResult(g, g_star, data, f, plant.W, F, assemble_sensitivity(f, F, g), rc,
                         {"branch": list(branch.m), "branch_at_cap": at_cap})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = design_document(sr, args)
    doc["warnings"] = [str(w.message) for w in caught]
    write_json(out / "design.json", doc)
    write_response_csv(out / "freqresp.csv", FREQ_GRID, sr.S_W(1j * FREQ_GRID), "omega")
    write_response_csv(out / "freqresp_C.csv", FREQ_GRID, rc(1j * FREQ_GRID), "omega")
    if rc.realizable:
        for name, block in (("fir_R.csv", rc.F_R), ("fir_T.csv", rc.F_T)):
            t, y = impulse_response(block, dt=args.dt)
            write_response_csv(out / name, t, y, "t")
    rep = verify(sr)
    write_json(out / "verify.json", _report_dict(rep))
    print(f"gamma_star = {g_star:.6g}; design gamma = {g:.6g}; grid norm = {rep.hinf_grid:.6g}")
    if rep.controller_stable is not None:
        print(f"controller stable: {rep.controller_stable}; closed loop stable (indicator): "
              f"{rep.closed_loop_stable}")
    print(f"wrote {out}/")
    return 0


def rebuild(design: dict, plant) -> SynthesisResult:
    """Recreate a synthesis result from a design document and its plant file."""
    if design.get("version") != DESIGN_VERSION:
        raise CliError(EXIT_PARSE, "unsupported design.json version")
    f = _factorize(plant)
    data = build_data(f, plant.W)
    stored = from_complex_list(design["nodes"])
    if len(stored) != len(data) or max(abs(a - b) for a, b in zip(stored, data.nodes)) > 1e-9:
        raise CliError(EXIT_PARSE, "design.json nodes do not match the plant's unstable zeros")
    branch = BranchAssignment(tuple(design["branch"]))
    spec = design["interpolant"]
    if spec["kind"] == InterpolantKind.OPTIMAL_IRRATIONAL.value:
        F = optimal_interpolant(data, branch, design["gamma_star"], spec["eps"])
    else:
        Fr = RationalFn.from_coeffs(spec["num_coeffs"], spec["den_coeffs"])
        F = Interpolant(InterpolantKind.RATIONAL_UNIT, Fr, design["gamma"], Fr, branch)
    g = F.gamma
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rc = realize_controller(f, plant.W, F, g)
    return SynthesisResult(g, design["gamma_star"], data, f, plant.W, F,
                           assemble_sensitivity(f, F, g), rc,
                           {"branch": list(branch.m), "branch_at_cap": design["branch_at_cap"]})


def cmd_verify(args) -> int:
    try:
        design = json.loads(Path(args.design).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_PARSE, f"{args.design}: {exc}") from None
    plant = load_plant(args.file)
    try:
        sr = rebuild(design, plant)
    except (KeyError, TypeError) as exc:
        raise CliError(EXIT_PARSE, f"{args.design}: malformed design document ({exc})") from None
    rep = _report_dict(verify(sr))
    print(json.dumps(rep, indent=2))
    if args.out:
        write_json(args.out, rep)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stablehinf",
                                description="Stable H-infinity design for time-delay plants")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="delay type, F/I-system verdicts and assumption checks")
    c.add_argument("file")
    c.set_defaults(func=cmd_classify)

    c = sub.add_parser("zeros", help="right-half-plane zeros of R")
    c.add_argument("file")
    c.add_argument("--box", nargs=4, type=float, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    c.set_defaults(func=cmd_zeros)

    c = sub.add_parser("factorize", help="inner factors m_n and M_Tbar")
    c.add_argument("file")
    c.set_defaults(func=cmd_factorize)

    c = sub.add_parser("design", help="optimal or suboptimal design with result files")
    c.add_argument("file")
    mode = c.add_mutually_exclusive_group(required=True)
    mode.add_argument("--optimal", action="store_true")
    mode.add_argument("--gamma", type=float)
    c.add_argument("--order", type=int, default=1)
    c.add_argument("--m-bound", type=int, default=2)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--dt", type=float, default=1e-3, help="impulse response sample time")
    c.add_argument("--out", default=".")
    c.set_defaults(func=cmd_design)

    c = sub.add_parser("verify", help="recompute the verification report of a saved design")
    c.add_argument("design")
    c.add_argument("file")
    c.add_argument("--out", help="also write the report to this path")
    c.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PlantFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ContourError, RootFindingError, RealizationError, FactorizationError,
            QuasiPolyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
