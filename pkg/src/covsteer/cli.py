"""Command-line interface: ``covsteer solve | simulate | verify | demo``.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 I/O failure,
5 verification failure.
"""

import argparse
import os
import sys
import time
from dataclasses import asdict

from . import __version__
from .checks import certify, format_table
from .demos import DEMOS, compare_terminal, get_demo, write_covariance_shapes
from .estimator import CovarianceSteering
from .exceptions import (
    CovsteerError,
    InvalidProblem,
    MaxIterExceeded,
    RetriesExhausted,
)
from .io import (
    checkpoint_report,
    dump_json,
    ensure_dir,
    file_digest,
    load_solution,
    save_solution,
    write_paths_csv,
    write_solution_csv,
)
from .model import ProblemFileError, SolverConfig, dump_problem, load_problem
from .sim import simulate

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_IO = 4
EXIT_VERIFY = 5

SEED_ENV = "COVSTEER_SEED"
DEFAULT_RECORDED_PATHS = 10
DEMO_PATHS = 5
DEMO_DT = 5e-4
DEMO_SEED = 0


class CliError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


class Run:
    """Collects timings and written files for the manifest."""

    def __init__(self, command, out_dir):
        self.command = command
        self.out_dir = out_dir
        self.timings = {}
        self.outputs = []
        self.problem_hash = None
        self.config = None

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def wrote(self, path):
        self.outputs.append(path)
        return path

    def stage(self, name):
        run = self

        class _Timer:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = run.timings.get(name, 0.0) + time.perf_counter() - self.start

        return _Timer()

    def write_manifest(self):
        path = self.path("manifest.json")
        dump_json({
            "command": self.command,
            "problemHash": self.problem_hash,
            "configEcho": asdict(self.config) if self.config is not None else None,
            "timings": self.timings,
            "outputs": self.outputs + [path],
            "version": __version__,
        }, path)
        return path


def _env_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise CliError(EXIT_INVALID, f"{SEED_ENV} must be a non-negative integer, got {raw!r}") from None
    if seed < 0:
        raise CliError(EXIT_INVALID, f"{SEED_ENV} must be a non-negative integer, got {raw!r}")
    return seed


def _resolve_seed(flag):
    env = _env_seed()
    return env if env is not None else flag


def _read_problem(path):
    try:
        problem, cfg = load_problem(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read problem file: {exc}") from None
    except (ProblemFileError, ValueError) as exc:
        raise CliError(EXIT_INVALID, f"invalid problem file: {exc}") from None
    return problem, cfg or SolverConfig(), file_digest(path)


def _config_from_args(base, args):
    changes = {
        "tol": args.tol,
        "max_iter": args.max_iter,
        "grid_steps": args.grid_steps,
        "init_box_half_width": args.init_box,
        "criterion": args.criterion,
        "seed": _resolve_seed(args.seed),
    }
    try:
        return base.replace(**{k: v for k, v in changes.items() if v is not None})
    except ValueError as exc:
        raise CliError(EXIT_INVALID, f"invalid solver option: {exc}") from None


def _describe_violations(exc):
    return "\n".join(f"  {v.code}: {v.message}" for v in exc.violations)


def _solve(run, problem, cfg):
    """Fit, write solution/trace files; return the fitted estimator."""
    est = CovarianceSteering.from_config(cfg)
    try:
        with run.stage("solve"):
            est.fit(problem)
    except InvalidProblem as exc:
        raise CliError(EXIT_INVALID, "invalid problem:\n" + _describe_violations(exc)) from None
    except (MaxIterExceeded, RetriesExhausted) as exc:
        if exc.trace is not None:
            exc.trace.to_csv(run.wrote(run.path("trace.csv")))
        raise CliError(EXIT_SOLVER, f"recursion failed: {exc}") from None
    except CovsteerError as exc:
        raise CliError(EXIT_SOLVER, f"solve failed: {exc}") from None
    run.timings.update({f"solve.{k}": v for k, v in est.timings_.items()})
    with run.stage("write"):
        save_solution(run.wrote(run.path("solution.json")), est.solution_, p0=est.p0_,
                      trace=est.trace_, stm_residuals=est.blocks_.residuals,
                      problem_hash=run.problem_hash)
        write_solution_csv(run.wrote(run.path("solution.csv")), est.solution_)
        est.trace_.to_csv(run.wrote(run.path("trace.csv")))
    return est


def _simulate(run, problem, solution, num_paths, dt, seed, record):
    if num_paths < 1:
        raise CliError(EXIT_INVALID, "--paths must be at least 1")
    if not dt > 0:
        raise CliError(EXIT_INVALID, "--dt must be positive")
    try:
        with run.stage("simulate"):
            batch = simulate(problem.system, solution, problem.sigma0, num_paths, dt, seed,
                             mu0=problem.mu0, record_paths=record)
    except CovsteerError as exc:
        raise CliError(EXIT_SOLVER, f"simulation failed: {exc}") from None
    with run.stage("write"):
        write_paths_csv(run.wrote(run.path("paths.csv")), batch)
        report = checkpoint_report(batch, solution)
        dump_json(report, run.wrote(run.path("checkpoints.json")))
    return batch, report


def cmd_solve(args):
    problem, base, digest = _read_problem(args.problem)
    cfg = _config_from_args(base, args)
    run = Run("solve", ensure_dir(args.out))
    run.problem_hash, run.config = digest, cfg
    try:
        est = _solve(run, problem, cfg)
    finally:
        run.write_manifest()
    sol = est.solution_
    print(f"converged in {est.n_iter_} iterations (retries: {est.trace_.retries})")
    print(f"terminal cost {sol.terminal_cost:.10g}")
    print(f"running cost  {sol.running_cost:.10g}")
    print(f"transversality residual {sol.transversality_residual:.3e}")
    return EXIT_OK


def cmd_simulate(args):
    problem, cfg, digest = _read_problem(args.problem)
    try:
        solution, extras = load_solution(args.solution)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read solution file: {exc}") from None
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_INVALID, f"invalid solution file: {exc}") from None
    if extras.get("problemHash") != digest:
        raise CliError(EXIT_INVALID, "solution was computed for a different problem file "
                                     f"({extras.get('problemHash')} != {digest})")
    if solution.P.shape[1] != problem.n or solution.K.shape[1] != problem.system.m:
        raise CliError(EXIT_INVALID, "solution dimensions do not match the problem")
    seed = _resolve_seed(args.seed)
    record = args.record_paths if args.record_paths is not None else DEFAULT_RECORDED_PATHS
    run = Run("simulate", ensure_dir(args.out))
    run.problem_hash, run.config = digest, cfg.replace(seed=seed)
    try:
        batch, report = _simulate(run, problem, solution, args.paths, args.dt, seed, record)
    finally:
        run.write_manifest()
    last = report["checkpoints"][-1]
    print(f"simulated {batch.num_paths} paths with dt={batch.dt:g}")
    if "relativeGap" in last:
        print(f"sample vs integrated covariance at t={last['t']:g}: {last['relativeGap']:.3%}")
    return EXIT_OK


def _verify(problem, cfg, seed, probes):
    rows = certify(problem, cfg.grid_steps, cfg.stm_tol, cfg.rcond_floor, probes=probes, seed=seed)
    print(format_table(rows))
    return rows


def _verify_report(rows):
    return [{"check": r.name, "value": r.value, "tol": r.tol, "passed": r.passed} for r in rows]


def cmd_verify(args):
    problem, base, digest = _read_problem(args.problem)
    changes = {"grid_steps": args.grid_steps}
    try:
        cfg = base.replace(**{k: v for k, v in changes.items() if v is not None})
    except ValueError as exc:
        raise CliError(EXIT_INVALID, f"invalid option: {exc}") from None
    seed = _resolve_seed(args.seed)
    if seed is None:
        seed = cfg.seed
    try:
        rows = _verify(problem, cfg, seed, args.probes)
    except CovsteerError as exc:
        raise CliError(EXIT_VERIFY, f"verification could not run: {exc}") from None
    if args.out:
        run = Run("verify", ensure_dir(args.out))
        run.problem_hash, run.config = digest, cfg.replace(seed=seed)
        dump_json(_verify_report(rows), run.wrote(run.path("verify.json")))
        run.write_manifest()
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_demo(args):
    try:
        demo = get_demo(args.name)
    except KeyError as exc:
        raise CliError(EXIT_INVALID, str(exc.args[0])) from None
    run = Run(f"demo {demo.name}", ensure_dir(args.out))
    cfg = SolverConfig()
    seed = _resolve_seed(DEMO_SEED)
    cfg = cfg.replace(seed=seed)
    run.config = cfg
    try:
        problem = demo.build()
        problem_path = run.wrote(run.path("problem.json"))
        dump_problem(problem, problem_path)
        run.problem_hash = file_digest(problem_path)
        print(f"demo {demo.name}: {demo.description}")
        est = _solve(run, problem, cfg)
        sol = est.solution_
        print(f"converged in {est.n_iter_} iterations, terminal cost {sol.terminal_cost:.10g}")
        _simulate(run, problem, sol, DEMO_PATHS, DEMO_DT, seed, DEMO_PATHS)
        with run.stage("verify"):
            rows = _verify(problem, cfg, seed, 50)
        dump_json(_verify_report(rows), run.wrote(run.path("verify.json")))
        with run.stage("write"):
            write_covariance_shapes(run.wrote(run.path("covariance_shapes.csv")), sol)
        cmp = compare_terminal(demo, sol.Sigma[-1])
        summary = {
            "demo": demo.name,
            "iterations": est.n_iter_,
            "converged": est.trace_.converged,
            "terminalCost": sol.terminal_cost,
            "runningCost": sol.running_cost,
            "transversalityResidual": sol.transversality_residual,
            "verifyPassed": all(r.passed for r in rows),
            "terminalCovariance": cmp,
        }
        dump_json(summary, run.wrote(run.path("summary.json")))
    finally:
        run.write_manifest()
    print(f"max entrywise deviation from reference Sigma(t1): {cmp['maxAbsDeviation']:.3e} "
          f"(tolerance {cmp['tolerance']:g})")
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VERIFY


def build_parser():
    parser = argparse.ArgumentParser(prog="covsteer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a steering problem file")
    p.add_argument("--problem", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--grid-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--init-box", type=float)
    p.add_argument("--criterion", choices=("frobenius", "componentwise"))
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo sample paths of a solved problem")
    p.add_argument("--solution", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--dt", type=float, default=DEMO_DT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record-paths", type=int,
                   help=f"paths written to paths.csv (default {DEFAULT_RECORDED_PATHS})")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="print the numerical certificate of a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--grid-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--probes", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("demo", help="reproduce a built-in example")
    p.add_argument("name", help=" | ".join(DEMOS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
