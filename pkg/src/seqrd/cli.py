"""Command-line entry point.

Subcommands: rdf-gauss, realize, simulate, rdf-discrete, check.
Exit codes: 0 success, 2 input/validation problems, 3 numerical
nonconvergence or infeasibility.  Errors are emitted as one JSON object on
stderr; the effective configuration is echoed to stderr as JSON before work
starts.  CSV artifacts are always in nats; --bits converts printed summaries.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import discrete, harness as sim, jsonio, realization, sources, waterfill
from .errors import (
    DivergenceError,
    DomainError,
    InfeasibleRealizationError,
    NonconvergenceError,
    SeqrdError,
    StructuralError,
    UnsupportedModeCountError,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_NUMERIC_ERRORS = (
    NonconvergenceError,
    InfeasibleRealizationError,
    UnsupportedModeCountError,
    DivergenceError,
)


def _echo_config(args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None}
    print(json.dumps({"config": cfg}, default=str), file=sys.stderr)


def _fail(kind: str, exc: Exception, code: int) -> int:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
    return code


def _parse_grid(args) -> list:
    if args.D is not None and args.D_grid is not None:
        raise DomainError("give either --D or --D-grid, not both")
    if args.D is not None:
        return [float(args.D)]
    if args.D_grid is not None:
        try:
            grid = [float(v) for v in args.D_grid.split(",") if v.strip()]
        except ValueError as exc:
            raise DomainError(f"bad --D-grid: {exc}") from exc
        if not grid:
            raise DomainError("--D-grid is empty")
        return grid
    raise DomainError("one of --D or --D-grid is required")


def _rate_text(rate_nats: float, bits: bool) -> str:
    if bits:
        return f"{rate_nats / math.log(2):.6f} bits"
    return f"{rate_nats:.6f} nats"


def _write_text(path, text) -> None:
    if path is None:
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except KeyboardInterrupt:
        with open(path, "a") as fh:
            fh.write("# truncated\n")
        raise


def cmd_rdf_gauss(args) -> int:
    model = sources.load_model(args.model)
    diagnostics = sources.validate_model(model)
    if diagnostics:
        raise DomainError("model failed validation: " + "; ".join(diagnostics))
    grid = _parse_grid(args)
    cfg = realization.FixedPointConfig(tol=args.tol)
    rows = waterfill.rdf_curve(model, grid, cfg)
    _write_text(args.out, waterfill.rdf_curve_csv(rows))
    for row in rows:
        print(
            f"D={row['D']:g}  rate={_rate_text(row['rate_nats'], args.bits)}  "
            f"xi={row['xi']:.6g}  active={row['k_active']}"
        )
    return EXIT_OK


def cmd_realize(args) -> int:
    model = sources.load_model(args.model)
    if args.D is None:
        raise DomainError("--D is required")
    design = realization.design_steady_state(model, float(args.D), float(args.Q), tol=args.tol)
    if args.out:
        realization.save_design(design, args.out)
    capacity = design.channel.capacity_nats
    print(f"rate      {_rate_text(design.rate_nats, args.bits)}")
    print(f"capacity  {_rate_text(capacity, args.bits)}")
    print(f"power     {design.P:.12g}")
    print(f"noise     {design.Q:.12g}")
    print(f"distortion {realization.analytic_distortion(design):.12g} (target {float(args.D):.12g})")
    print(f"active modes {design.k_active} of {design.lam.size}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = sources.load_model(args.model)
    if args.design:
        design = realization.load_design(args.design, model)
        report = sim.run_chain(model, design, args.steps, args.seed, burn_in=args.burn_in)
        rows = [sim.SweepRow(D=sim_row_target(design), seed=args.seed, design=design, report=report)]
    else:
        grid = _parse_grid(args)
        rows = sim.sweep(
            model, grid, float(args.Q), args.steps, args.seed, burn_in=args.burn_in
        )
    csv_text = sim.sweep_csv(rows)
    _write_text(args.out, csv_text)
    failed = 0
    for row in rows:
        if row.error is not None:
            failed += 1
            print(f"D={row.D:g}  FAILED: {row.error}")
            continue
        rep = row.report
        print(
            f"D={row.D:g}  empirical={rep.empirical_distortion:.6g} (+/- {rep.stderr_distortion:.2g})  "
            f"analytic={rep.analytic_D:.6g}  power={rep.empirical_power:.6g}/{rep.analytic_P:.6g}"
        )
    if failed == len(rows) and rows:
        raise NonconvergenceError("every sweep row failed")
    return EXIT_OK


def sim_row_target(design) -> float:
    return float(np.sum(design.alloc.delta))


def cmd_rdf_discrete(args) -> int:
    source = discrete.load_instance(args.instance)
    grid = _parse_grid(args)
    lines = ["D,rate_nats,rate_per_step_nats,distortion,s"]
    solutions = []
    for D in grid:
        solution = discrete.solve_nrdf(source, float(D))
        solutions.append(discrete.solution_to_dict(solution, float(D)))
        lines.append(
            ",".join(
                jsonio.format_float(v)
                for v in (
                    D,
                    solution.rate_nats,
                    solution.rate_per_step_nats,
                    solution.distortion,
                    solution.s,
                )
            )
        )
        print(
            f"D={D:g}  rate={_rate_text(solution.rate_nats, args.bits)}  "
            f"distortion={solution.distortion:.8g}  s={solution.s:.6g}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.kernels_out:
        jsonio.dump(solutions, args.kernels_out)
    return EXIT_OK


def cmd_check(args) -> int:
    failures = []

    def report(name, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}" + (f"  {detail}" if detail else ""))
        if not ok:
            failures.append(name)

    # Reverse water-filling obeys its optimality conditions.
    rng_local = np.random.default_rng(7)
    ok = True
    for _ in range(50):
        lam = rng_local.uniform(0.05, 5.0, size=rng_local.integers(1, 7))
        D = rng_local.uniform(0.05, 1.0) * float(np.sum(lam))
        alloc = waterfill.reverse_waterfill(lam, D)
        ok &= abs(float(np.sum(alloc.delta)) - min(D, float(np.sum(lam)))) <= 1e-10
        ok &= bool(np.all(alloc.delta <= np.minimum(alloc.xi, lam) + 1e-12))
    report("waterfill allocation", ok)

    # Memoryless benchmark closed form.
    model = sources.scalar_model(a=0.0, b=0.0, c=1.0, g=1.0, x0_var=0.0)
    design = realization.design_steady_state(model, 0.25, 1.0)
    ok = abs(design.rate_nats - 0.5 * math.log(4.0)) <= 1e-12
    ok &= abs(design.P - 3.0) <= 1e-9
    ok &= abs(realization.analytic_distortion(design) - 0.25) <= 1e-10
    report("memoryless scalar design", ok)

    # Monte-Carlo closure on a short run.
    rep = sim.run_chain(model, design, 100_000, seed=1, burn_in=1_000)
    ok = abs(rep.empirical_distortion - 0.25) <= 5 * rep.stderr_distortion
    ok &= rep.replica_max_diff == 0.0
    report("chain closure", ok, f"empirical={rep.empirical_distortion:.5f}")

    # Discrete solver against the binary-Hamming closed form.
    src = discrete.iid_source([0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]], stages=1)
    sol = discrete.solve_nrdf(src, 0.1)
    closed = math.log(2) + 0.1 * math.log(0.1) + 0.9 * math.log(0.9)
    ok = abs(sol.rate_nats - closed) <= 1e-6
    report("binary-Hamming rate", ok, f"rate={sol.rate_nats:.8f}")

    # Determinism of artifacts.
    rows_a = sim.sweep(model, [0.25], 1.0, 20_000, base_seed=11, burn_in=500)
    rows_b = sim.sweep(model, [0.25], 1.0, 20_000, base_seed=11, burn_in=500)
    report("deterministic sweep", sim.sweep_csv(rows_a) == sim.sweep_csv(rows_b))

    if failures:
        raise NonconvergenceError(f"check failures: {', '.join(failures)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqrd", description="sequential rate-distortion toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=False, instance=False, needs_q=False):
        if model:
            p.add_argument("--model", required=True, help="model JSON file")
        if instance:
            p.add_argument("--instance", required=True, help="finite-source instance JSON file")
        p.add_argument("--D", type=float, default=None, help="distortion budget")
        p.add_argument("--D-grid", dest="D_grid", default=None, help="comma-separated budgets")
        if needs_q:
            p.add_argument("--Q", type=float, default=1.0, help="channel noise variance")
        p.add_argument("--out", default=None, help="output CSV/JSON path")
        p.add_argument("--tol", type=float, default=1e-9, help="fixed-point tolerance")
        p.add_argument("--bits", action="store_true", help="print rates in bits")

    p = sub.add_parser("rdf-gauss", help="rate-distortion curve for a Gauss-Markov model")
    common(p, model=True)
    p.set_defaults(func=cmd_rdf_gauss)

    p = sub.add_parser("realize", help="design the matched encoder/decoder/filter")
    common(p, model=True, needs_q=True)
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("simulate", help="Monte-Carlo of the full chain")
    common(p, model=True, needs_q=True)
    p.add_argument("--design", default=None, help="design JSON from `realize`")
    p.add_argument("--steps", type=int, default=1_000_000, help="simulated steps")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--burn-in", dest="burn_in", type=int, default=10_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rdf-discrete", help="finite-alphabet causal rate-distortion")
    common(p, instance=True)
    p.add_argument("--kernels-out", dest="kernels_out", default=None, help="kernel JSON path")
    p.set_defaults(func=cmd_rdf_discrete)

    p = sub.add_parser("check", help="run the quick invariant suite")
    p.add_argument("--bits", action="store_true", help="print rates in bits")
    p.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail("input", exc, EXIT_INPUT)
    except json.JSONDecodeError as exc:
        return _fail("input", exc, EXIT_INPUT)
    except (StructuralError, DomainError) as exc:
        return _fail("validation", exc, EXIT_INPUT)
    except _NUMERIC_ERRORS as exc:
        return _fail("numeric", exc, EXIT_NUMERIC)
    except SeqrdError as exc:
        return _fail("error", exc, EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
