"""Trajectory synthesis after the recursion: costate, covariance, gains, means, costs."""

from dataclasses import dataclass

import numpy as np

from .exceptions import MeanBvpSingular, NonFiniteState, NotPositiveDefinite
from .matcore import SYM_TOL, asymmetry, frobenius_norm, spd_threshold
from .model import eval_system
from .stm import hamiltonian_matrix, is_invertible

MEAN_BVP_TOL = 1e-8


@dataclass(eq=False)
class SteeringSolution:
    """Time-gridded optimal steering solution.

    Arrays are indexed by grid point first: ``P[k]`` is the costate at
    ``grid[k]``, ``K[k]`` the ``m x n`` feedback gain, and so on.
    """

    grid: np.ndarray
    P: np.ndarray
    Sigma: np.ndarray
    K: np.ndarray
    terminal_cost: float = float("nan")
    running_cost: float = float("nan")
    transversality_residual: float = float("nan")
    mu: np.ndarray = None
    z: np.ndarray = None
    v: np.ndarray = None
    mean_residual: float = None

    @property
    def total_cost(self):
        return self.terminal_cost + self.running_cost

    @property
    def has_means(self):
        return self.mu is not None

    def gain_at(self, t):
        """Feedback gain at time `t` by linear interpolation on the grid."""
        return interp_grid(self.grid, self.K, t)

    def feedforward_at(self, t):
        if self.v is None:
            return np.zeros(self.K.shape[1])
        return interp_grid(self.grid, self.v, t)


def interp_grid(grid, values, t):
    k = int(np.clip(np.searchsorted(grid, t, side="right") - 1, 0, len(grid) - 2))
    w = (t - grid[k]) / (grid[k + 1] - grid[k])
    w = min(max(w, 0.0), 1.0)
    return (1.0 - w) * values[k] + w * values[k + 1]


def uniform_grid(t0, t1, steps):
    return np.linspace(t0, t1, int(steps) + 1)


def _sym_step(x, where, t):
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"{where} became non-finite at t={t:g}")
    gap = asymmetry(x)
    if gap > SYM_TOL * max(1.0, frobenius_norm(x)):
        raise NonFiniteState(f"{where} lost symmetry ({gap:.2e}) at t={t:g}")
    return 0.5 * (x + x.T)


def _costate_rhs(sys, t, p):
    A, B, Q = eval_system(sys, t)
    pb = p @ B
    return -(A.T @ p + p @ A - pb @ pb.T + Q)


def integrate_costate(sys, p0, grid):
    """Forward RK4 for ``-dP/dt = A^T P + P A - P B B^T P + Q`` from ``P(t0) = p0``.

    Returns an array of shape ``(len(grid), n, n)``.

    Raises
    ------
    NonFiniteState
        On finite escape of the Riccati flow inside the horizon.
    """
    p = np.array(p0, dtype=float)
    out = np.empty((len(grid),) + p.shape)
    out[0] = p
    # escape is detected explicitly by _sym_step
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(len(grid) - 1):
            t, h = grid[k], grid[k + 1] - grid[k]
            k1 = _costate_rhs(sys, t, p)
            k2 = _costate_rhs(sys, t + h / 2, p + h / 2 * k1)
            k3 = _costate_rhs(sys, t + h / 2, p + h / 2 * k2)
            k4 = _costate_rhs(sys, t + h, p + h * k3)
            p = _sym_step(p + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), "costate", grid[k + 1])
            out[k + 1] = p
    return out


def costate_with_midpoints(sys, p0, grid):
    """Costate on `grid` and at every step midpoint, from one RK4 pass on the bisected grid."""
    fine = np.empty(2 * len(grid) - 1)
    fine[0::2] = grid
    fine[1::2] = 0.5 * (grid[:-1] + grid[1:])
    P = integrate_costate(sys, p0, fine)
    return P[0::2], P[1::2]


def _lyap_rhs(sys, t, s, K):
    A, B, _ = eval_system(sys, t)
    acl = A + B @ K
    return acl @ s + s @ acl.T + B @ B.T


def integrate_closed_loop(sys, sigma0, K, grid, K_mid=None):
    """RK4 for ``dS/dt = (A + B K) S + S (A + B K)^T + B B^T``.

    `K` holds gains on `grid`; midpoint gains come from `K_mid` when
    given, otherwise from linear interpolation.
    """
    s = np.array(sigma0, dtype=float)
    out = np.empty((len(grid),) + s.shape)
    out[0] = s
    for k in range(len(grid) - 1):
        t, h = grid[k], grid[k + 1] - grid[k]
        km = K_mid[k] if K_mid is not None else 0.5 * (K[k] + K[k + 1])
        k1 = _lyap_rhs(sys, t, s, K[k])
        k2 = _lyap_rhs(sys, t + h / 2, s + h / 2 * k1, km)
        k3 = _lyap_rhs(sys, t + h / 2, s + h / 2 * k2, km)
        k4 = _lyap_rhs(sys, t + h, s + h * k3, K[k + 1])
        s = _sym_step(s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), "covariance", grid[k + 1])
        w = np.linalg.eigvalsh(s)
        if not w[0] > spd_threshold(w):
            raise NotPositiveDefinite(w[0], f"covariance at t={grid[k + 1]:g}")
        out[k + 1] = s
    return out


def extract_gains(sys, P, grid):
    """``K[k] = -B(t_k)^T P[k]``."""
    return np.stack([-eval_system(sys, t)[1].T @ p for t, p in zip(grid, P)])


def integrate_covariance(sys, sigma0, P, grid, P_mid=None):
    """Optimally controlled covariance for the costate trajectory `P`.

    Midpoint costates come from `P_mid` if supplied, else from linear
    interpolation between grid values.
    """
    K = extract_gains(sys, P, grid)
    K_mid = None
    if P_mid is None:
        P_mid = 0.5 * (P[:-1] + P[1:])
    mids = 0.5 * (grid[:-1] + grid[1:])
    K_mid = extract_gains(sys, P_mid, mids)
    return integrate_closed_loop(sys, sigma0, K, grid, K_mid)


def mean_initial_costate(blocks, mu0, mud, rcond_floor=1e-12):
    """``z(t0)`` solving the linear two-point problem through the STM blocks."""
    b = blocks
    den = b.phi22 - b.phi12
    if not is_invertible(den, rcond_floor):
        raise MeanBvpSingular("Phi22 - Phi12 is numerically singular")
    return np.linalg.solve(den, (b.phi11 - b.phi21) @ mu0 - mud)


def solve_mean_steering(sys, blocks, mu0, mud, P, grid, rcond_floor=1e-12):
    """Optimal mean, its costate and the feedforward input.

    Returns ``(mu, z, v, residual)`` where ``residual`` is
    ``||z(t1) - (mu(t1) - mud)||``.

    Raises
    ------
    MeanBvpSingular
        If the boundary system is singular or the forward sweep misses
        the terminal condition by more than 1e-8 (relative to the data).
    """
    mu0 = np.asarray(mu0, dtype=float)
    mud = np.asarray(mud, dtype=float)
    n = mu0.shape[0]
    y = np.concatenate([mu0, mean_initial_costate(blocks, mu0, mud, rcond_floor)])
    Y = np.empty((len(grid), 2 * n))
    Y[0] = y
    for k in range(len(grid) - 1):
        t, h = grid[k], grid[k + 1] - grid[k]
        m0 = hamiltonian_matrix(sys, t)
        mh = hamiltonian_matrix(sys, t + h / 2)
        m1 = hamiltonian_matrix(sys, t + h)
        k1 = m0 @ y
        k2 = mh @ (y + h / 2 * k1)
        k3 = mh @ (y + h / 2 * k2)
        k4 = m1 @ (y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        Y[k + 1] = y
    mu, z = Y[:, :n], Y[:, n:]
    v = np.stack([eval_system(sys, t)[1].T @ (p @ m - zz) for t, p, m, zz in zip(grid, P, mu, z)])
    residual = float(np.linalg.norm(z[-1] - (mu[-1] - mud)))
    scale = max(1.0, float(np.linalg.norm(mu0) + np.linalg.norm(mud)))
    if not residual <= MEAN_BVP_TOL * scale:
        raise MeanBvpSingular(f"terminal condition missed by {residual:.3e}")
    return mu, z, v, residual


def running_cost_density(sys, grid, Sigma, K, mu=None, v=None):
    """``trace(S (K^T K + Q))`` per grid point, plus mean terms when given."""
    out = np.empty(len(grid))
    for k, t in enumerate(grid):
        Q = eval_system(sys, t)[2]
        W = K[k].T @ K[k] + Q
        val = np.sum(Sigma[k] * W)
        if mu is not None:
            m = mu[k]
            vv = v[k] if v is not None else np.zeros(K.shape[1])
            val += m @ W @ m + 2 * vv @ K[k] @ m + vv @ vv
        out[k] = val
    return out


def evaluate_objective(sys, solution, sigmad, mud=None):
    """Return ``(terminal_cost, running_cost)``.

    The terminal cost is ``0.5 ||Sigma(t1) - Sigma_d||_F^2`` (plus
    ``0.5 ||mu(t1) - mu_d||^2`` when means are steered); the running cost
    integrates the expected quadratic stage cost with the trapezoid rule.
    """
    s = solution
    terminal = 0.5 * frobenius_norm(s.Sigma[-1] - sigmad) ** 2
    if s.mu is not None and mud is not None:
        terminal += 0.5 * float(np.sum((s.mu[-1] - mud) ** 2))
    dens = running_cost_density(sys, s.grid, s.Sigma, s.K, s.mu, s.v)
    return float(terminal), float(np.trapezoid(dens, s.grid))


def synthesize(problem, p0, grid_steps, blocks=None, fine_costate=True, rcond_floor=1e-12):
    """Build the full :class:`SteeringSolution` from a converged initial costate."""
    sys = problem.system
    grid = uniform_grid(problem.t0, problem.t1, grid_steps)
    if fine_costate:
        P, P_mid = costate_with_midpoints(sys, p0, grid)
    else:
        P, P_mid = integrate_costate(sys, p0, grid), None
    Sigma = integrate_covariance(sys, problem.sigma0, P, grid, P_mid)
    Sigma[0] = problem.sigma0
    K = extract_gains(sys, P, grid)
    sol = SteeringSolution(grid=grid, P=P, Sigma=Sigma, K=K)
    if problem.has_means:
        if blocks is None:
            raise ValueError("mean steering needs the STM blocks")
        sol.mu, sol.z, sol.v, sol.mean_residual = solve_mean_steering(
            sys, blocks, problem.mu0, problem.mud, P, grid, rcond_floor
        )
    sol.terminal_cost, sol.running_cost = evaluate_objective(sys, sol, problem.sigmad, problem.mud)
    sol.transversality_residual = frobenius_norm(P[-1] - (Sigma[-1] - problem.sigmad))
    return sol
