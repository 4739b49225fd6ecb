"""Numerical certificate for a problem: STM identities and properties of the maps."""

from dataclasses import dataclass

import numpy as np

from .exceptions import LftSingular
from .lft import MapContext, f2, f3, f4, residuals
from .matcore import asymmetry, frobenius_norm
from .stm import STM_TOL, StmBlocks, transition_matrix

IDENTITY_NAMES = (
    "phi11^T phi22 - phi21^T phi12 = I",
    "phi12^T phi22 sym",
    "phi11^T phi21 sym",
    "phi11 phi22^T - phi12 phi21^T = I",
    "phi11 phi12^T sym",
    "phi21 phi22^T sym",
)
SYMMETRY_TOL = 1e-9
PRODUCT_TOL = 1e-10
CARE_TOL = 1e-9
SYLVESTER_TOL = 1e-9
LIPSCHITZ_SLACK = 1e-12


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float
    passed: bool


def random_symmetric(rng, n, scale=1.0):
    g = rng.standard_normal((n, n)) * scale
    return 0.5 * (g + g.T)


def random_spd(rng, n, floor=0.1):
    g = rng.standard_normal((n, n))
    return g @ g.T / n + floor * np.eye(n)


def _check(name, value, tol):
    return Check(name, float(value), float(tol), bool(value <= tol))


def symmetry_probe(ctx, rng, count):
    """Largest raw asymmetry of ``f2``/``f4`` outputs over random symmetric inputs."""
    worst = {"f2": 0.0, "f4": 0.0}
    for _ in range(count):
        for name, fn in (("f2", f2), ("f4", f4)):
            try:
                out = fn(ctx, random_symmetric(rng, ctx.n), raw=True)
            except LftSingular:
                continue
            worst[name] = max(worst[name], asymmetry(out))
    return worst


def f3_probe(sigmad_factory, rng, n, count):
    """Worst product/CARE/Sylvester residuals and min eig of ``P1 + Sd`` over random inputs."""
    worst = [0.0, 0.0, 0.0, np.inf]
    for _ in range(count):
        sd = sigmad_factory(rng)
        ctx = MapContext(None, None, sd)
        h1 = random_symmetric(rng, n, 2.0)
        p1 = f3(ctx, h1)
        r = residuals(ctx, h1, p1)
        worst[0] = max(worst[0], r.product)
        worst[1] = max(worst[1], r.care)
        worst[2] = max(worst[2], r.sylvester)
        worst[3] = min(worst[3], float(np.linalg.eigvalsh(p1 + sd)[0]))
    return worst


def lipschitz_probe(ctx, rng, count):
    """Largest ``||f3(X) - f3(Y)|| / ||X - Y||`` over random symmetric pairs."""
    worst = 0.0
    for _ in range(count):
        x = random_symmetric(rng, ctx.n, 3.0)
        y = random_symmetric(rng, ctx.n, 3.0)
        gap = frobenius_norm(x - y)
        if gap > 0:
            worst = max(worst, frobenius_norm(f3(ctx, x) - f3(ctx, y)) / gap)
    return worst


def certify(problem, grid_steps=2000, stm_tol=STM_TOL, rcond_floor=1e-12, probes=50, seed=0):
    """Run every check and return a list of :class:`Check` rows.

    Unlike :func:`compute_stm`, a bad transition matrix is reported rather
    than raised.
    """
    rng = np.random.default_rng(seed)
    sys, n = problem.system, problem.n
    phi = transition_matrix(sys, problem.t0, problem.t1, grid_steps)
    blocks = StmBlocks.from_full(phi)
    rows = [_check(f"stm identity {i + 1}: {name}", r, stm_tol)
            for i, (name, r) in enumerate(zip(IDENTITY_NAMES, blocks.residuals))]

    ctx = MapContext.build(blocks, problem.sigma0, problem.sigmad, rcond_floor)
    sym = symmetry_probe(ctx, rng, probes)
    rows.append(_check("f2 raw asymmetry", sym["f2"], SYMMETRY_TOL))
    rows.append(_check("f4 raw asymmetry", sym["f4"], SYMMETRY_TOL))

    def sd_factory(r):
        return ctx.sigmad if r.random() < 0.5 else random_spd(r, n)

    prod, care, syl, mineig = f3_probe(sd_factory, rng, n, probes)
    rows.append(_check("f3 product residual", prod, PRODUCT_TOL))
    rows.append(_check("f3 CARE residual", care, CARE_TOL))
    rows.append(_check("f3 Sylvester residual", syl, SYLVESTER_TOL))
    rows.append(Check("f3 min eig(P1 + Sd) > 0", mineig, 0.0, bool(mineig > 0)))
    rows.append(_check("f3 Lipschitz ratio", lipschitz_probe(ctx, rng, probes), 1 + LIPSCHITZ_SLACK))
    return rows


def format_table(rows):
    width = max(len(r.name) for r in rows)
    lines = [f"{'check':<{width}}  {'value':>12}  {'tol':>9}  status"]
    for r in rows:
        tol = f"> {r.tol:.1e}" if r.name.endswith("> 0") else f"{r.tol:.1e}"
        lines.append(f"{r.name:<{width}}  {r.value:12.4e}  {tol:>9}  {'pass' if r.passed else 'FAIL'}")
    return "\n".join(lines)
