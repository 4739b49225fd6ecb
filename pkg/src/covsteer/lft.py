"""The four maps composing one step of the P0 recursion, plus residual checks.

``f1``  P0 -> H0   affine initial condition of the H-Riccati flow
``f2``  H0 -> H1   forward LFT of the H-Riccati flow
``f3``  H1 -> P1   stabilizing CARE solution (closed form)
``f4``  P1 -> P0   backward LFT of the costate Riccati flow
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import LftSingular
from .matcore import SYM_TOL, asymmetry, check_spd, frobenius_norm, principal_sqrt


@dataclass(frozen=True, eq=False)
class MapContext:
    """Fixed data of the recursion: STM blocks and the boundary covariances."""

    blocks: object
    sigma0inv: np.ndarray
    sigmad: np.ndarray
    rcond_floor: float = 1e-12

    @classmethod
    def build(cls, blocks, sigma0, sigmad, rcond_floor=1e-12):
        sigma0 = check_spd(sigma0, "sigma0")
        sigmad = check_spd(sigmad, "sigmad")
        inv = np.linalg.solve(sigma0, np.eye(sigma0.shape[0]))
        return cls(blocks, 0.5 * (inv + inv.T), sigmad, rcond_floor)

    @property
    def n(self):
        return self.sigmad.shape[0]


def _solve_lft(den, num, rcond_floor, stage, raw=False):
    """Return ``den^{-1} num`` symmetrized, or raise :class:`LftSingular`."""
    try:
        with warnings.catch_warnings():
            # exact singularity is reported through rcond below
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(den, check_finite=True)
    except ValueError:
        raise LftSingular(0.0, stage) from None
    anorm = np.linalg.norm(den, 1)
    rcond = _lu_rcond(lu, anorm) if anorm > 0 else 0.0
    if not rcond > rcond_floor:
        raise LftSingular(rcond, stage)
    out = sla.lu_solve((lu, piv), num)
    if raw:
        return out
    gap = asymmetry(out)
    if not gap <= SYM_TOL * max(1.0, frobenius_norm(out)):
        raise LftSingular(rcond, stage)
    return 0.5 * (out + out.T)


def _lu_rcond(lu, anorm):
    (gecon,) = sla.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    return float(rcond) if info == 0 else 0.0


def f1(ctx, X):
    """``Sigma0^{-1} - X``."""
    return ctx.sigma0inv - X


def f2(ctx, X, raw=False):
    """``-(Phi11^T - X Phi12^T)^{-1} (Phi21^T - X Phi22^T)``.

    With ``raw=True`` the unsymmetrized solve is returned (for probing
    symmetry preservation).
    """
    b = ctx.blocks
    den = b.phi11.T - X @ b.phi12.T
    num = -(b.phi21.T - X @ b.phi22.T)
    return _solve_lft(den, num, ctx.rcond_floor, "f2", raw)


def psi(lam):
    """``-lam + sqrt(lam^2 + 1)``, free of cancellation for large positive `lam`."""
    lam = np.asarray(lam, dtype=float)
    root = np.hypot(lam, 1.0)
    pos = lam > 0
    inv = np.divide(1.0, lam + root, out=np.zeros_like(root), where=pos)
    return np.where(pos, inv, root - lam)


def f3(ctx, X):
    """Stabilizing symmetric solution ``P1`` of the terminal CARE for ``H1 = X``.

    ``-(X + Sd)/2 + ((X - Sd)^2/4 + I)^{1/2}``; evaluated in the
    eigenbasis of ``(X - Sd)/2`` so that each eigenvalue contributes
    ``-lam + sqrt(lam^2 + 1)``.
    """
    sd = ctx.sigmad
    half_diff = 0.5 * (X - sd)
    half_diff = 0.5 * (half_diff + half_diff.T)
    lam, v = np.linalg.eigh(half_diff)
    p1 = (v * psi(lam)) @ v.T - sd
    return 0.5 * (p1 + p1.T)


def f4(ctx, X, raw=False):
    """``(X Phi12 - Phi22)^{-1} (Phi21 - X Phi11)``."""
    b = ctx.blocks
    den = X @ b.phi12 - b.phi22
    num = b.phi21 - X @ b.phi11
    return _solve_lft(den, num, ctx.rcond_floor, "f4", raw)


def composite_f(ctx, X, chain=False):
    """One recursion step ``f4(f3(f2(f1(X))))``.

    With ``chain=True`` returns ``(H0, H1, P1, P0_next)``.
    """
    h0 = f1(ctx, X)
    h1 = f2(ctx, h0)
    p1 = f3(ctx, h1)
    p0 = f4(ctx, p1)
    return (h0, h1, p1, p0) if chain else p0


def anti_stabilizing(ctx, X):
    """The other completion-of-squares branch, ``-(X+Sd)/2 - (...)^{1/2}``."""
    sd = ctx.sigmad
    half_diff = 0.5 * (X - sd)
    root = principal_sqrt(half_diff @ half_diff + np.eye(ctx.n))
    return -0.5 * (X + sd) - root


@dataclass(frozen=True)
class Residuals:
    product: float
    care: float
    sylvester: float
    transversality_ready: bool


def care_lhs(h1, p1, sigmad):
    abar = 0.5 * (h1 + sigmad)
    const = 0.5 * (sigmad @ h1 + h1 @ sigmad) - np.eye(h1.shape[0])
    return p1 @ p1 + p1 @ abar + abar @ p1 + const


def sylvester_gap(h1, p1, sigmad):
    d = h1 - sigmad
    return d @ p1 - p1 @ d - (sigmad @ h1 - h1 @ sigmad)


def residuals(ctx, h1, p1):
    """Algebraic residuals tying ``(H1, P1)`` to the terminal condition."""
    sd = ctx.sigmad
    eye = np.eye(ctx.n)
    prod = frobenius_norm((p1 + sd) @ (p1 + h1) - eye)
    w = np.linalg.eigvalsh(0.5 * (p1 + sd + (p1 + sd).T))
    return Residuals(
        product=prod,
        care=frobenius_norm(care_lhs(h1, p1, sd)),
        sylvester=frobenius_norm(sylvester_gap(h1, p1, sd)),
        transversality_ready=bool(w[0] > 0),
    )
