"""Fixed-point recursion on the initial costate P0."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import LftSingular, MaxIterExceeded, RetriesExhausted
from .lft import composite_f
from .matcore import frobenius_norm, unvech, vech
from .model import SolverConfig


@dataclass
class RecursionTrace:
    iterates: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    converged: bool = False
    retries: int = 0
    seed_used: int = 0

    @property
    def iterations(self):
        return len(self.errors)

    def to_csv(self, path):
        """Write ``iter, err, vech(P0)...`` rows (the iterate after each step)."""
        width = len(self.iterates[0]) if self.iterates else 0
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "err"] + [f"p{i}" for i in range(width)])
            for k, (err, it) in enumerate(zip(self.errors, self.iterates[1:]), start=1):
                w.writerow([k, _fmt(err)] + [_fmt(x) for x in it])


def _fmt(x):
    return format(float(x), ".17g")


@dataclass
class FixedPointResult:
    p0: np.ndarray
    h0: np.ndarray
    h1: np.ndarray
    p1: np.ndarray
    trace: RecursionTrace


def random_init(n, half_width=1.0, seed=0):
    """Symmetric matrix whose ``n(n+1)/2`` free entries are iid uniform on the box."""
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    rng = np.random.default_rng(seed)
    return unvech(rng.uniform(-half_width, half_width, n * (n + 1) // 2), n)


def _step_size(diff, criterion):
    if criterion == "componentwise":
        return float(np.max(np.abs(diff)))
    return frobenius_norm(diff)


def _derive_seed(seed, attempt):
    if attempt == 0:
        return int(seed)
    return int(np.random.SeedSequence([int(seed), attempt]).generate_state(1, dtype=np.uint64)[0] >> 1)


def iterate(ctx, p0, cfg, trace):
    """Run the bare recursion from `p0`, appending to `trace`.

    Returns the final iterate; ``trace.converged`` tells whether the step
    norm fell to ``cfg.tol``. :class:`LftSingular` propagates.
    """
    trace.iterates.append(vech(p0))
    for _ in range(cfg.max_iter):
        nxt = composite_f(ctx, p0)
        err = _step_size(nxt - p0, cfg.criterion)
        trace.errors.append(err)
        trace.iterates.append(vech(nxt))
        p0 = nxt
        if err <= cfg.tol:
            trace.converged = True
            break
    return p0


def solve_fixed_point(ctx, cfg=None):
    """Iterate ``P0 <- F(P0)`` from a seeded random start until the step is below tol.

    A singular LFT discards the run and restarts from a fresh seed derived
    from ``cfg.seed`` and the attempt number.

    Raises
    ------
    MaxIterExceeded
        If ``cfg.max_iter`` steps do not reach the tolerance.
    RetriesExhausted
        If more than ``cfg.max_retries`` restarts are needed.
    """
    cfg = cfg or SolverConfig()
    for attempt in range(cfg.max_retries + 1):
        seed = _derive_seed(cfg.seed, attempt)
        trace = RecursionTrace(retries=attempt, seed_used=seed)
        try:
            p0 = iterate(ctx, random_init(ctx.n, cfg.init_box_half_width, seed), cfg, trace)
            if not trace.converged:
                raise MaxIterExceeded(trace)
            h0, h1, p1, _ = composite_f(ctx, p0, chain=True)
        except LftSingular:
            continue
        return FixedPointResult(p0, h0, h1, p1, trace)
    raise RetriesExhausted(cfg.max_retries, trace)


@dataclass
class BasinRun:
    seed: int
    init: np.ndarray
    converged: bool
    iterations: int
    fixed_point: np.ndarray
    error: str = None


def basin_scan(ctx, cfg=None, num_inits=100, first_seed=None):
    """Run the recursion without retries from `num_inits` consecutive seeds."""
    if num_inits < 1:
        raise ValueError("num_inits must be >= 1")
    cfg = cfg or SolverConfig()
    start = cfg.seed if first_seed is None else first_seed
    runs = []
    for seed in range(start, start + num_inits):
        init = random_init(ctx.n, cfg.init_box_half_width, seed)
        trace = RecursionTrace(seed_used=seed)
        try:
            p0 = iterate(ctx, init, cfg, trace)
            runs.append(BasinRun(seed, init, trace.converged, trace.iterations, p0))
        except LftSingular as exc:
            runs.append(BasinRun(seed, init, False, trace.iterations, None, str(exc)))
    return runs
