"""Command-line experiment driver.

Subcommands: trial, phase, snr, scaling, trace, probe.  Exit codes:
0 success, 1 invalid arguments, 2 I/O failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    DEFAULT_THRESHOLD,
    SweepGrid,
    run_convergence_trace,
    run_phase_transition,
    run_probe,
    run_snr_sweep,
    run_transmitter_sweep,
    run_trial,
)
from .instances import TrialSpec, snapshot_to_json, synthesize
from .operators import Dimensions
from .solver import DivergenceError, NumericalFailureError, SolverConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_dims(p, L=64, Q=64, M=4, K=4, N=2):
    p.add_argument("--L", type=int, default=L, help="sample count")
    p.add_argument("--Q", type=int, default=Q, help="modulation length")
    p.add_argument("--M", type=int, default=M, help="channel taps")
    p.add_argument("--K", type=int, default=K, help="subspace dimension")
    p.add_argument("--N", type=int, default=N, help="number of components")


def _add_solver(p):
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--eta", type=float, default=None,
                   help="fixed step size (default: backtracking)")
    p.add_argument("--rho", type=float, default=None, help="penalty weight override")
    p.add_argument("--oracle-coherence", action=argparse.BooleanOptionalAction,
                   default=True, help="take mu/nu from the ground truth")
    p.add_argument("--mu", type=float, default=None, help="blind-mode mu bound")
    p.add_argument("--nu", type=float, default=None, help="blind-mode nu bound")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", type=str, default=None, help="output CSV/JSON path")
    p.add_argument("--workers", type=int, default=1)


def _solver_config(args, max_iters=None) -> SolverConfig:
    return SolverConfig(
        eta="backtracking" if args.eta is None else args.eta,
        max_iters=max_iters if max_iters is not None else args.max_iters,
        rho=args.rho,
        mu=args.mu,
        nu=args.nu,
        oracle_coherence=args.oracle_coherence,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moddemix",
                     description="Blind deconvolution demixing experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("trial", help="run one seeded trial")
    _add_dims(p, L=320, Q=320, M=8, K=8)
    _add_solver(p)
    _add_common(p)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--dump-instance", type=str, default=None,
                   help="write the instance snapshot JSON here")

    p = sub.add_parser("phase",
                       help="K vs M phase-transition grid over Q")
    _add_solver(p)
    _add_common(p)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--Q-values", type=int, nargs="+", default=None)
    p.add_argument("--K-values", type=int, nargs="+", default=None)
    p.add_argument("--M-values", type=int, nargs="+", default=None)
    p.add_argument("--paper-scale", action="store_true",
                   help="full-size grid (L=3200); slow")

    p = sub.add_parser("snr", help="SNR sweep")
    _add_dims(p, L=320, Q=320, M=8, K=8)
    _add_solver(p)
    _add_common(p)
    p.add_argument("--snr-db", type=float, nargs="+",
                   default=[10.0, 20.0, 30.0, 40.0, 50.0])

    p = sub.add_parser("scaling",
                       help="minimum observations vs transmitter count")
    _add_solver(p)
    _add_common(p)
    p.add_argument("--N-max", type=int, default=4)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--M", type=int, default=4)
    p.add_argument("--L-step", type=int, default=16)
    p.add_argument("--L-max", type=int, default=1024)

    p = sub.add_parser("trace",
                       help="per-iteration convergence trace")
    _add_dims(p, L=320, Q=320, M=8, K=8)
    _add_solver(p)
    _add_common(p)
    p.add_argument("--snr-db", type=float, default=None)

    p = sub.add_parser("probe",
                       help="numerical identity probes")
    p.add_argument("kind", choices=["adjoint", "isometry", "rip", "gradcheck"])
    _add_dims(p, L=32, Q=16, M=6, K=4)
    _add_common(p)
    p.add_argument("--draws", type=int, default=500, help="rip probe draw count")
    return parser


def _cmd_trial(args) -> int:
    dims = Dimensions(L=args.L, Q=args.Q, M=args.M, K=args.K, N=args.N)
    spec = TrialSpec(dims, seed=args.seed, snr_db=args.snr_db)
    if args.dump_instance:
        ens, truth, obs = synthesize(spec)
        with open(args.dump_instance, "w", encoding="utf-8") as fh:
            fh.write(snapshot_to_json(spec, ens, truth, obs))
    rec = run_trial(spec, _solver_config(args), args.threshold)
    doc = {k: getattr(rec, k) for k in rec.fieldnames()}
    text = json.dumps(doc, default=str, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_phase(args) -> int:
    from dataclasses import replace

    grid = SweepGrid.paper_scale() if args.paper_scale else SweepGrid()
    grid = replace(grid, L=args.L or grid.L, N=args.N,
                   trials=args.trials, threshold=args.threshold)
    if args.L is not None and not args.paper_scale:
        grid = replace(grid, Q_values=None)  # rescale Q grid to the new L
    for name in ("Q_values", "K_values", "M_values"):
        vals = getattr(args, name)
        if vals is not None:
            grid = replace(grid, **{name: tuple(vals)})
    rows = run_phase_transition(grid, _solver_config(args, max_iters=min(args.max_iters, 400)),
                                out=args.out, base_seed=args.seed, workers=args.workers)
    print(f"phase grid: {len(rows)} cells"
          + (f" -> {args.out}" if args.out else ""))
    return EXIT_OK


def _cmd_snr(args) -> int:
    dims = Dimensions(L=args.L, Q=args.Q, M=args.M, K=args.K, N=args.N)
    rows = run_snr_sweep(dims, args.snr_db, _solver_config(args, max_iters=min(args.max_iters, 2000)),
                         out=args.out, trials=args.trials, base_seed=args.seed,
                         workers=args.workers)
    for r in rows:
        print(f"snr {r['snr_db']:>6} dB: mean rel err {r['mean_rel_err']:.3e}")
    return EXIT_OK


def _cmd_scaling(args) -> int:
    rows = run_transmitter_sweep(
        _solver_config(args, max_iters=min(args.max_iters, 400)), out=args.out,
        N_values=tuple(range(1, args.N_max + 1)), K=args.K, M=args.M,
        L_step=args.L_step, L_max=args.L_max, trials=args.trials,
        threshold=args.threshold, base_seed=args.seed, workers=args.workers)
    for r in rows:
        print(f"N={r['N']}: L_min={r['L_min']}")
    return EXIT_OK


def _cmd_trace(args) -> int:
    dims = Dimensions(L=args.L, Q=args.Q, M=args.M, K=args.K, N=args.N)
    spec = TrialSpec(dims, seed=args.seed, snr_db=args.snr_db)
    result = run_convergence_trace(spec, _solver_config(args), out=args.out)
    print(f"final relative error {result['rel_err']:.3e} "
          f"({result['trace'].iterations} iterations)")
    return EXIT_OK


def _cmd_probe(args) -> int:
    dims = Dimensions(L=args.L, Q=args.Q, M=args.M, K=args.K, N=args.N)
    params = {"dims": dims, "seed": args.seed, "trials": args.trials}
    if args.kind == "isometry":
        params.pop("trials")
    if args.kind == "rip":
        params.pop("trials")
        params["draws"] = args.draws
    report = run_probe(args.kind, params, out=args.out)
    print(json.dumps(report, indent=2))
    return EXIT_OK


_COMMANDS = {
    "trial": _cmd_trial,
    "phase": _cmd_phase,
    "snr": _cmd_snr,
    "scaling": _cmd_scaling,
    "trace": _cmd_trace,
    "probe": _cmd_probe,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"moddemix: invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"moddemix: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DivergenceError, NumericalFailureError, FloatingPointError) as exc:
        print(f"moddemix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
