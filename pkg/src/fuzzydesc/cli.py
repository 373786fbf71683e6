"""Command-line entry point ``fuzzydesc``.

Exit codes: 0 success or feasible, 2 infeasible, 3 numerical failure,
1 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, lmi
from .model import ModelError, load_network, with_bounds

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 1, 2, 3


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Usage(message)


def _load_model(path: str, args=None):
    net = load_network(path)
    if args is not None and getattr(args, "bounds", None) is not None:
        net = with_bounds(net, args.bounds, args.bounds)
    return net


def _parse_x0(text: str, dims: list[int]) -> list[list[float]]:
    text = text.strip()
    if text.startswith("["):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise _Usage(f"--x0: {exc.msg}") from None
        if raw and all(isinstance(r, list) for r in raw):
            return [[float(v) for v in r] for r in raw]
        flat = [float(v) for v in raw]
    elif ";" in text:
        return [[float(v) for v in grp.split(",") if v.strip()] for grp in text.split(";")]
    else:
        flat = [float(v) for v in text.split(",") if v.strip()]
    if len(flat) != sum(dims):
        raise _Usage(f"--x0 has {len(flat)} numbers, the model has {sum(dims)} states")
    out, pos = [], 0
    for d in dims:
        out.append(flat[pos:pos + d])
        pos += d
    return out


def _fmt(v) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else f"{v:.6g}"


# -- commands ---------------------------------------------------------------------


def cmd_synth(args) -> int:
    from .sdp import SolverOptions, write_sdpa, vectorize
    from .synth import SynthOptions, save_results, synthesize

    net = _load_model(args.model, args)
    opts = SynthOptions(
        method=args.method, delta=args.delta, interconnect_eps=args.interconnect_eps,
        reduce=not args.no_reduce, radius=None if args.radius <= 0 else args.radius,
        norm_penalty=args.norm_penalty, polish=args.polish, backend=args.backend,
        grid_density=args.grid_density, solver=SolverOptions(max_iter=args.max_iter),
    )
    if args.dump_lmi or args.sdpa:
        for i, sub in enumerate(net.subsystems):
            cat = lmi.DecisionVarCatalog.for_subsystem(sub, args.method)
            delta = opts.delta * max(1.0, sub.data_scale())
            kw = {} if args.method == lmi.THEOREM1 else {"omega": None, "lam": None}
            insts = lmi.subsystem_instances(net, i, cat, delta=delta, interconnect_eps=opts.interconnect_eps,
                                            reduce=opts.reduce, **kw)
            if args.dump_lmi:
                outdir = Path(args.dump_lmi) / sub.name
                lmi.dump_instances(insts, cat, outdir, [s.name for s in net.subsystems])
            if args.sdpa:
                p = vectorize(insts, cat, "minimize-mu", delta=delta, radius=opts.radius,
                              norm_penalty=opts.norm_penalty)
                write_sdpa(p, f"{args.sdpa}.{sub.name}.dat-s")
    results = synthesize(net, args.method, opts)
    save_results(results, args.out)
    for r in results:
        v = r.verification
        extra = f" check={'PASS' if v.get('passed') else 'FAIL'}" if r.feasible else ""
        print(f"{r.name}: {r.status} rho={_fmt(r.rho)} solver={r.solver['status']}"
              f" iterations={r.solver['iterations']}{extra}")
    if all(r.feasible for r in results):
        return EXIT_OK
    if any(r.status == "infeasible" for r in results):
        return EXIT_INFEASIBLE
    return EXIT_NUMERIC


def cmd_check(args) -> int:
    from .synth import load_results, verify_blended

    net = _load_model(args.model)
    results = load_results(args.result)
    _match(net, results)
    feasible = [r for r in results if r.feasible]
    reports = verify_blended(net, feasible, args.grid_density, args.tol)
    ok = True
    for rep in reports:
        ok &= rep["passed"]
        print(f"{rep['subsystem']}: {'PASS' if rep['passed'] else 'FAIL'}"
              f" relaxed={rep['relaxed_count']} max_eig={rep['relaxed_max_eig']:.3e}"
              f" blended={rep['blend_samples']} max_eig={rep['blend_max_eig']:.3e}"
              f" min_X1_eig={rep['min_X1_eig']:.3e}")
    for r in results:
        if not r.feasible:
            print(f"{r.name}: {r.status} (nothing to check)")
    if len(feasible) != len(results):
        return EXIT_INFEASIBLE
    return EXIT_OK if ok else EXIT_NUMERIC


def _match(net, results):
    if [r.name for r in results] != [s.name for s in net.subsystems]:
        raise ValueError("result file does not match the model's subsystems")


def cmd_simulate(args) -> int:
    from .sim import SimulationError, derivative_bound_diagnostic, hinf_report, simulate, write_csv
    from .synth import SingularBlendError, load_results

    net = _load_model(args.model)
    results = load_results(args.result)
    _match(net, results)
    if not args.open_loop and not all(r.feasible for r in results):
        print("error: the result holds no feasible controller for every subsystem", file=sys.stderr)
        return EXIT_INFEASIBLE
    x0 = _parse_x0(args.x0, [s.state_dim for s in net.subsystems])
    try:
        traj = simulate(net, results, x0, args.dt, args.T, open_loop=args.open_loop)
    except (SimulationError, SingularBlendError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_csv(traj, args.out)
    x0n = math.sqrt(sum(float(v) ** 2 for x in x0 for v in x))
    xf = traj.final_state()
    print(f"|x(T)|/|x(0)| = {_fmt(float((xf @ xf) ** 0.5) / x0n if x0n else 0.0)}")
    if not args.open_loop:
        for rep in hinf_report(traj, results, args.tol):
            print(f"{rep['subsystem']}: D={rep['D']:.6g} {'PASS' if rep['passed'] else 'FAIL'}"
                  f" (int x'x={rep['E_state']:.6g}, int phi'phi={rep['E_phi']:.6g},"
                  f" V0={rep['V0']:.6g}, Vf={rep['Vf']:.6g})")
    for row in derivative_bound_diagnostic(traj, net):
        if row["status"] == "WARN":
            print(f"WARN {row['subsystem']} {row['family']}{row['rule']}: derivative {row['min']:.4g}"
                  f" at t={row['time']:.4g} below bound {row['bound']:.4g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .synth import SynthOptions
    from .sweep import BindingError, SweepGrid, emit_csv, emit_svg, parse_binding, parse_range, run_sweep

    net = _load_model(args.model, args)
    try:
        bindings = [parse_binding(b) for b in (args.bind or ["a=sub1.A[1][0][0]", "b=sub1.B[2][0][0]"])]
        ranges = [parse_range(r) for r in (args.range or ["a:-2:1:13", "b:-1.5:1:11"])]
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        grid = SweepGrid(bindings, ranges, methods)
    except BindingError as exc:
        raise _Usage(str(exc)) from None
    opts = SynthOptions(polish=0.0, delta=args.delta)
    total = grid.cell_count()

    def progress(cell):
        if args.verbose:
            flags = " ".join(f"{m}={'Y' if cell.feasible[m] else '-'}" for m in grid.methods)
            print(f"[{cell.index + 1}/{total}] {cell.values} {flags}", file=sys.stderr)

    try:
        run_sweep(net, grid, opts, workers=args.workers, progress=progress)
    except BindingError as exc:
        raise _Usage(str(exc)) from None
    emit_csv(grid, args.out, net.n)
    if args.svg:
        emit_svg(grid, args.svg)
    counts = grid.counts()
    print(f"cells={len(grid.cells)} " + " ".join(f"{m}_feasible={c}" for m, c in counts.items()))
    return EXIT_OK


def cmd_plot(args) -> int:
    from .sim import read_csv
    from .sweep import plot_trajectory_svg

    header, data = read_csv(args.traj)
    plot_trajectory_svg(header, data, args.svg)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fuzzydesc", description="Decentralized non-PDC H-infinity synthesis for "
                "interconnected T-S fuzzy descriptor networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="solve the LMIs and write a result file")
    s.add_argument("model")
    s.add_argument("--method", choices=[lmi.THEOREM1, lmi.COROLLARY1], default=lmi.THEOREM1)
    s.add_argument("--delta", type=float, default=1e-7, help="relative strictness margin")
    s.add_argument("--interconnect-eps", type=float, default=0.0)
    s.add_argument("--no-reduce", action="store_true", help="keep the full interconnection signal")
    s.add_argument("--bounds", type=float, help="override every derivative bound")
    s.add_argument("--radius", type=float, default=1e3, help="bound on |y|; <= 0 disables")
    s.add_argument("--norm-penalty", type=float, default=1e-6)
    s.add_argument("--polish", type=float, default=1e-2,
                   help="relative rho slack for the X1-conditioning solve; 0 disables")
    s.add_argument("--backend", choices=["embedded", "cvxpy"], default="embedded")
    s.add_argument("--grid-density", type=int, default=5)
    s.add_argument("--max-iter", type=int, default=200)
    s.add_argument("--dump-lmi", metavar="DIR", help="write every instance as MatrixMarket files")
    s.add_argument("--sdpa", metavar="PREFIX", help="write each subsystem problem in SDPA sparse format")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("check", help="re-verify a result file")
    c.add_argument("model")
    c.add_argument("result")
    c.add_argument("--grid-density", type=int, default=5)
    c.add_argument("--tol", type=float, default=1e-6)
    c.set_defaults(func=cmd_check)

    m = sub.add_parser("simulate", help="closed-loop RK4 simulation")
    m.add_argument("model")
    m.add_argument("result")
    m.add_argument("--x0", required=True, help="'1,-1,-1,0.5', '1,-1;-1,0.5' or JSON")
    m.add_argument("--dt", type=float, default=1e-3)
    m.add_argument("--T", type=float, default=10.0)
    m.add_argument("--tol", type=float, default=1e-3, help="dissipation residual tolerance")
    m.add_argument("--open-loop", action="store_true")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="feasibility domain over two model entries")
    w.add_argument("model")
    w.add_argument("--bind", action="append", metavar="NAME=SUB.M[k][r][c]")
    w.add_argument("--range", action="append", metavar="NAME:MIN:MAX:STEPS")
    w.add_argument("--methods", default="theorem1,corollary1")
    w.add_argument("--bounds", type=float, help="override every derivative bound")
    w.add_argument("--delta", type=float, default=1e-7)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--out", required=True)
    w.add_argument("--svg")
    w.set_defaults(func=cmd_sweep)

    t = sub.add_parser("plot", help="render a trajectory CSV")
    t.add_argument("traj")
    t.add_argument("--svg", required=True)
    t.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
