"""Command-line pipeline: datagen -> set -> synth -> verify, plus example reproduction.

Exit codes: 0 success, 2 input/parse error, 3 empty consistent set,
4 not informative / condition not met, 5 solver inconclusive,
6 unsupported objective for the set, 7 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from polycov import analysis, feasible, polytope, reproduce, synthesis
from polycov.data import (
    SystemPair,
    cross_cov_summary,
    load_bounds,
    load_instrument_spec,
    load_trajectory,
    save_trajectory,
    simulate,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_NOT_INFORMATIVE = 4
EXIT_INCONCLUSIVE = 5
EXIT_UNSUPPORTED = 6
EXIT_VERIFY_FAIL = 7


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _dump(doc, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=1)


def _load_system(path) -> SystemPair:
    with open(path) as fh:
        doc = json.load(fh)
    return SystemPair(A=np.asarray(doc["A"], float), B=np.asarray(doc["B"], float))


def _load_perf(path, gamma, kind) -> synthesis.PerformanceSpec:
    with open(path) as fh:
        doc = json.load(fh)
    return synthesis.PerformanceSpec(C=doc["C"], D=doc["D"], gamma=gamma, kind=kind)


def cmd_datagen(args) -> int:
    if args.seed is None:
        args.seed = 0
    if args.system:
        sys_pair = _load_system(args.system)
        with open(args.system) as fh:
            doc = json.load(fh)
        x0 = np.asarray(doc.get("x0", np.zeros(sys_pair.n)), float)
    else:
        if args.A is None or args.B is None:
            raise ValueError("either --system or both --A and --B are required")
        sys_pair = SystemPair(A=[[args.A]], B=[[args.B]])
        x0 = np.zeros(1)
    rng = np.random.default_rng(args.seed)
    if args.input:
        U = np.atleast_2d(np.array([float(c) for c in args.input.split(",")], float))
        if U.shape[0] != sys_pair.m:
            raise ValueError("--input only supports single-input systems")
    else:
        U = rng.uniform(-args.input_scale, args.input_scale, size=(sys_pair.m, args.N))
    data = simulate(sys_pair, x0=x0, U=U, noise_kind=args.noise_kind, noise_bound=args.noise_sq_bound, seed=rng)
    out = Path(args.out or "trajectory.csv")
    noise_out = Path(args.noise_out) if args.noise_out else out.with_suffix(".noise.csv")
    save_trajectory(data, out, noise_path=noise_out)
    print(f"wrote {out} ({data.n} states, {data.m} inputs, N={data.N}) and {noise_out}; seed={args.seed}")
    return EXIT_OK


def cmd_set(args) -> int:
    data = load_trajectory(args.data, n=args.n, m=args.m)
    instr = load_instrument_spec(args.instruments, data)
    bounds = load_bounds(args.bounds)
    summary = cross_cov_summary(data, instr)
    fset = feasible.build_feasible_set(summary, bounds, tol=args.tol)
    out = Path(args.out or "set.json")
    feasible.save_set(fset, out)
    if feasible.is_empty(fset):
        print(f"wrote {out}; the consistent set is EMPTY (bounds and data are incompatible)")
        return EXIT_EMPTY
    msg = f"wrote {out}; boundedness: {fset.bounded}"
    if fset.bounded == feasible.BOUNDED:
        vs = polytope.enumerate_vertices(fset)
        vpath = out.with_suffix(".vertices.json")
        polytope.save_vertices(vs, vpath)
        msg += f"; {vs.L} product vertices -> {vpath}"
    print(msg)
    return EXIT_OK


def cmd_synth(args) -> int:
    fset = feasible.load_set(args.set)
    perf = None
    if args.objective in ("hinf", "h2"):
        if not args.perf:
            raise ValueError("hinf/h2 objectives need --perf with the C and D matrices")
        if args.gamma is None and not args.minimize_gamma:
            raise ValueError("hinf/h2 objectives need --gamma or --minimize-gamma")
        perf = _load_perf(args.perf, args.gamma, args.objective)
    vertices = polytope.load_vertices(args.vertices) if args.vertices else None
    try:
        res = synthesis.synthesize_from_set(
            fset,
            args.objective,
            perf=perf,
            minimize_gamma=args.minimize_gamma,
            vertices=vertices,
            epsilon=args.epsilon,
        )
    except synthesis.EmptySetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except synthesis.UnsupportedSynthesis as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    out = Path(args.out or "controller.json")
    synthesis.save_result(res, out)
    print(f"wrote {out}; status: {res.status}" + (f"; gamma={res.achieved_gamma}" if res.achieved_gamma else ""))
    if res.status == synthesis.FEASIBLE:
        return EXIT_OK
    if res.status in (synthesis.NOT_INFORMATIVE, synthesis.CONDITION_NOT_MET):
        return EXIT_NOT_INFORMATIVE
    return EXIT_INCONCLUSIVE


def cmd_verify(args) -> int:
    with open(args.controller) as fh:
        ctrl = json.load(fh)
    if ctrl.get("K") is None:
        raise ValueError(f"{args.controller}: controller has no gain (status {ctrl.get('status')!r})")
    K = np.asarray(ctrl["K"], float)
    fset = feasible.load_set(args.set)
    gamma = args.gamma if args.gamma is not None else ctrl.get("gamma")
    perf = _load_perf(args.perf, gamma, args.criterion) if args.perf else None
    if args.criterion in ("hinf", "h2") and (perf is None or gamma is None):
        raise ValueError("hinf/h2 verification needs --perf and a gamma")

    if args.seed is None:
        args.seed = 0
    report = {"criterion": args.criterion, "gamma": gamma, "seed": args.seed}
    passed = True

    if args.true_system:
        true_sys = _load_system(args.true_system)
        A_cl = true_sys.A + true_sys.B @ K
        rho = analysis.spectral_radius(A_cl)
        entry = {"spectral_radius": rho, "stable": bool(rho < 1.0)}
        if perf is not None and rho < 1.0:
            cl = analysis.ClosedLoop(A_cl=A_cl, C=perf.C, D=perf.D)
            norm = analysis.hinf_norm(cl) if args.criterion == "hinf" else analysis.h2_norm(cl)
            entry["norm"] = norm
            entry["within_gamma"] = bool(norm <= gamma * (1.0 + 1e-6)) if gamma else None
            passed = passed and entry["within_gamma"] is not False
        passed = passed and entry["stable"]
        report["true_system"] = entry

    if fset.bounded == feasible.BOUNDED:
        vs = polytope.enumerate_vertices(fset)
        P = None
        certs = ctrl.get("certificates") or {}
        if args.criterion == "stability" and certs.get("P") is not None:
            P = np.asarray(certs["P"], float)
        incl = analysis.check_inclusion(
            vs, K, args.criterion, perf=perf, gamma=gamma,
            samples=args.samples, seed=args.seed, P=P, fset=fset,
        )
        report["set"] = incl
        passed = passed and incl["passed"]
    elif fset.n == 1 and fset.m == 1 and fset.rows[0].M == 1:
        if args.criterion != "stability":
            print("error: norm criteria on an unbounded set are unsupported", file=sys.stderr)
            return EXIT_UNSUPPORTED
        strip = analysis.scalar_strip_stability(fset.rows[0], K)
        report["set"] = strip
        passed = passed and strip["stable"]
    else:
        print("error: cannot verify against this unbounded set", file=sys.stderr)
        return EXIT_UNSUPPORTED

    report["passed"] = bool(passed)
    out = Path(args.out or "verify_report.json")
    _dump(report, out)
    print(f"wrote {out}; verification {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_VERIFY_FAIL


def cmd_reproduce(args) -> int:
    if args.example == "example1":
        rep = reproduce.reproduce_example1()
        print("scalar strip example")
        print(f"{'quantity':<14}{'value':>12}{'reference':>12}  check")
        for key in ("edge_lo", "edge_hi", "K", "closed_loop"):
            print(
                f"{key:<14}{rep['values'][key]:>12.4f}{rep['expected'][key]:>12.4f}  "
                + ("PASS" if rep["checks"][key] else "FAIL")
            )
        print(f"noise within bounds: {rep['checks']['noise_within_bounds']}")
        print(f"LMI path agrees:     {rep['checks']['lmi_path_agrees']}")
    else:
        rep = reproduce.reproduce_example2(seed=args.seed if args.seed is not None else reproduce.EXAMPLE2_SEED)
        print(f"bounded-set study (seed {rep['seed']})")
        print(f"{'M':<4}{'bounds':<8}{'vertices':<10}{'status':<18}{'K':>10}{'worst rho':>11}")
        for M, e in rep["per_m"].items():
            print(
                f"{M:<4}{str(e['bounds_hold']):<8}{str(e.get('L', '-')):<10}{e.get('status', '-'):<18}"
                f"{e.get('K', float('nan')):>10.4f}{e.get('worst_vertex_closed_loop', float('nan')):>11.4f}"
            )
        print("nesting:", rep["nesting"])
        print("note:", rep["note"])
    print("overall:", "PASS" if rep["passed"] else "FAIL")
    if args.out:
        _dump(rep, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK if rep["passed"] else EXIT_VERIFY_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-10, help="rank/feasibility tolerance")
    common.add_argument("--epsilon", type=float, default=None, help="LMI strictness margin override")
    common.add_argument("--seed", type=int, default=None, help="seed for any randomness; echoed into outputs")
    common.add_argument("--out", type=str, default=None, help="output path")

    p = argparse.ArgumentParser(prog="polycov", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("datagen", parents=[common], help="simulate a system and write trajectory + noise CSVs")
    d.add_argument("--system", type=str, help='system JSON {"A": [[..]], "B": [[..]], "x0": [..]}')
    d.add_argument("--A", type=float, help="scalar A (shortcut for 1x1 systems)")
    d.add_argument("--B", type=float, help="scalar B")
    d.add_argument("--N", type=int, default=10, help="number of samples")
    d.add_argument("--noise-sq-bound", type=float, default=0.0, help="b in |e|^2 <= b")
    d.add_argument("--noise-kind", choices=("ball", "uniform"), default="ball")
    d.add_argument("--input-scale", type=float, default=1.0, help="inputs uniform on [-scale, scale]")
    d.add_argument("--input", type=str, help="explicit comma-separated scalar input sequence")
    d.add_argument("--noise-out", type=str, help="noise CSV path (default: <out>.noise.csv)")
    d.set_defaults(func=cmd_datagen)

    s = sub.add_parser("set", parents=[common], help="build the consistent-set JSON (+ vertices when bounded)")
    s.add_argument("--data", required=True, help="trajectory CSV")
    s.add_argument("-n", type=int, required=True, help="state dimension")
    s.add_argument("-m", type=int, required=True, help="input dimension")
    s.add_argument("--instruments", required=True, help="instrument spec JSON")
    s.add_argument("--bounds", required=True, help="bounds JSON")
    s.set_defaults(func=cmd_set)

    y = sub.add_parser("synth", parents=[common], help="synthesize a gain from a set JSON")
    y.add_argument("--set", required=True, help="set JSON")
    y.add_argument("--vertices", help="vertex JSON (recomputed if omitted)")
    y.add_argument("--objective", choices=("stab", "hinf", "h2"), required=True)
    y.add_argument("--gamma", type=float, help="performance level")
    y.add_argument("--minimize-gamma", action="store_true", help="bisect for the smallest feasible gamma")
    y.add_argument("--perf", help='performance JSON {"C": [[..]], "D": [[..]]}')
    y.set_defaults(func=cmd_synth)

    v = sub.add_parser("verify", parents=[common], help="verify a controller against a set and/or true system")
    v.add_argument("--controller", required=True, help="controller JSON from synth")
    v.add_argument("--set", required=True, help="set JSON")
    v.add_argument("--true-system", help="system JSON to check the real closed loop")
    v.add_argument("--criterion", choices=("stability", "hinf", "h2"), default="stability")
    v.add_argument("--gamma", type=float, help="level for hinf/h2 (default: controller's)")
    v.add_argument("--perf", help="performance JSON for hinf/h2")
    v.add_argument("--samples", type=int, default=100, help="random members to sample")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("reproduce", parents=[common], help="re-run an embedded desk example")
    r.add_argument("example", choices=("example1", "example2"))
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
