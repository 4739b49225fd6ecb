"""Hamiltonian matrix and its state transition matrix over the horizon."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .exceptions import SingularBlock, StmIdentityViolation
from .matcore import frobenius_norm
from .model import eval_system

STM_TOL = 1e-8
EXPM_AGREEMENT = 1e-7


@dataclass(frozen=True, eq=False)
class StmBlocks:
    """Blocks of the Hamiltonian transition matrix Phi(t0, t1)."""

    phi11: np.ndarray
    phi12: np.ndarray
    phi21: np.ndarray
    phi22: np.ndarray
    residuals: tuple = (0.0,) * 6

    @property
    def n(self):
        return self.phi11.shape[0]

    @property
    def full(self):
        return np.block([[self.phi11, self.phi12], [self.phi21, self.phi22]])

    @classmethod
    def from_full(cls, phi):
        n = phi.shape[0] // 2
        blocks = (phi[:n, :n], phi[:n, n:], phi[n:, :n], phi[n:, n:])
        return cls(*(b.copy() for b in blocks), residuals=check_identities(*blocks))


def hamiltonian_matrix(sys, t):
    """``[[A, -B B^T], [-Q, -A^T]]`` at time `t`."""
    A, B, Q = eval_system(sys, t)
    return np.block([[A, -B @ B.T], [-Q, -A.T]])


def _rk4_step_matrix(M, h):
    hm = h * M
    eye = np.eye(M.shape[0])
    # Taylor polynomial of degree 4 equals one classical RK4 step for x' = M x
    return eye + hm @ (eye + hm @ (eye / 2 + hm @ (eye / 6 + hm / 24)))


def transition_matrix(sys, t0, t1, grid_steps):
    """Integrate ``d/dt Phi(t0, t) = M(t) Phi(t0, t)`` with fixed-step RK4."""
    if grid_steps < 1:
        raise ValueError("grid_steps must be >= 1")
    h = (t1 - t0) / grid_steps
    n2 = 2 * sys.n
    phi = np.eye(n2)
    if sys.is_lti:
        step = _rk4_step_matrix(hamiltonian_matrix(sys, t0), h)
        for _ in range(grid_steps):
            phi = step @ phi
        return phi
    for k in range(grid_steps):
        t = t0 + k * h
        m0 = hamiltonian_matrix(sys, t)
        mh = hamiltonian_matrix(sys, t + h / 2)
        m1 = hamiltonian_matrix(sys, min(t + h, t1))
        k1 = m0 @ phi
        k2 = mh @ (phi + h / 2 * k1)
        k3 = mh @ (phi + h / 2 * k2)
        k4 = m1 @ (phi + h * k3)
        phi = phi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return phi


def check_identities(phi11, phi12, phi21, phi22):
    """Frobenius residuals of the six symplectic block identities."""
    eye = np.eye(phi11.shape[0])
    return (
        frobenius_norm(phi11.T @ phi22 - phi21.T @ phi12 - eye),
        frobenius_norm(phi12.T @ phi22 - phi22.T @ phi12),
        frobenius_norm(phi21.T @ phi11 - phi11.T @ phi21),
        frobenius_norm(phi11 @ phi22.T - phi12 @ phi21.T - eye),
        frobenius_norm(phi12 @ phi11.T - phi11 @ phi12.T),
        frobenius_norm(phi21 @ phi22.T - phi22 @ phi21.T),
    )


def block_residuals(blocks):
    return check_identities(blocks.phi11, blocks.phi12, blocks.phi21, blocks.phi22)


def is_invertible(mat, rcond_floor):
    sv = np.linalg.svd(mat, compute_uv=False)
    return bool(sv[-1] > rcond_floor * sv[0])


def compute_stm(sys, t0, t1, grid_steps=2000, stm_tol=STM_TOL, rcond_floor=1e-12):
    """Transition matrix blocks over ``[t0, t1]`` with accuracy certificates.

    Raises
    ------
    StmIdentityViolation
        If any block identity residual exceeds `stm_tol`, or if an LTI
        system disagrees with the matrix exponential by more than 1e-7.
    SingularBlock
        If Phi11 or Phi12 is numerically singular.
    """
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    phi = transition_matrix(sys, t0, t1, grid_steps)
    blocks = StmBlocks.from_full(phi)
    if max(blocks.residuals) > stm_tol:
        raise StmIdentityViolation(blocks.residuals, stm_tol)
    if sys.is_lti:
        ref = expm(hamiltonian_matrix(sys, t0) * (t1 - t0))
        gap = frobenius_norm(phi - ref)
        if gap > EXPM_AGREEMENT:
            raise StmIdentityViolation(blocks.residuals + (gap,), EXPM_AGREEMENT)
    for name in ("phi11", "phi12"):
        if not is_invertible(getattr(blocks, name), rcond_floor):
            raise SingularBlock(f"{name} is numerically singular")
    return blocks
