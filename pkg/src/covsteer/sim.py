"""Euler-Maruyama Monte Carlo of the closed-loop stochastic system."""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NonFinitePath, TooFewPaths
from .matcore import principal_sqrt
from .model import eval_system
from .traj import interp_grid

CHUNK = 1000


@dataclass(eq=False)
class SamplePathBatch:
    """Monte Carlo output.

    ``states``/``inputs`` hold the leading recorded paths at every time;
    ``checkpoint_states`` holds every path at the checkpoint times only.
    """

    num_paths: int
    dt: float
    seed: int
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    sample_mean: np.ndarray
    checkpoint_indices: np.ndarray
    checkpoint_states: np.ndarray

    @property
    def checkpoint_times(self):
        return self.times[self.checkpoint_indices]

    @property
    def sample_cov(self):
        return np.stack([sample_covariance(self, j) for j in range(len(self.checkpoint_indices))])


def path_rng(seed, path_index):
    """Independent generator for one path, derived from ``(seed, path_index)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(path_index),)))


def unbiased_covariance(samples):
    """Sample covariance of the rows of `samples`, normalized by ``N - 1``."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < 2:
        raise TooFewPaths("need at least two samples")
    c = np.cov(samples, rowvar=False, ddof=1)
    c = np.atleast_2d(c)
    return 0.5 * (c + c.T)


def sample_covariance(batch, checkpoint_index):
    if batch.num_paths < 2:
        raise TooFewPaths("need at least two paths")
    return unbiased_covariance(batch.checkpoint_states[:, checkpoint_index])


def simulate(sys, solution, sigma0, num_paths, dt=5e-4, seed=0, mu0=None, checkpoints=None,
             record_paths=None, noise=True):
    """Simulate ``dx = (A + B K) x dt + B v dt + B dw`` from ``x0 ~ N(mu0, Sigma0)``.

    Parameters
    ----------
    sys : LtvSystem
    solution : SteeringSolution
        Supplies the gains ``K`` (and feedforward ``v`` when means are
        steered), linearly interpolated to the simulation times.
    sigma0 : array_like
        Initial covariance; sampled through its principal square root.
    num_paths : int
    dt : float
        Nominal step; rounded so that an integer number of steps covers
        the horizon exactly.
    seed : int
        Path ``i`` draws all of its randomness from ``path_rng(seed, i)``.
    checkpoints : sequence of float, optional
        Times at which every path is kept (default: start, midpoint, end).
    record_paths : int, optional
        Number of leading paths stored in full (default: all).
    noise : bool
        ``False`` drops the Brownian increments (deterministic closed loop).
    """
    if num_paths < 1:
        raise ValueError("num_paths must be >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = solution.grid
    t0, t1 = float(grid[0]), float(grid[-1])
    steps = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    h = (t1 - t0) / steps
    times = t0 + h * np.arange(steps + 1)
    times[-1] = t1
    n, m = sys.n, sys.m
    if checkpoints is None:
        checkpoints = (t0, 0.5 * (t0 + t1), t1)
    ck = np.array([int(round((c - t0) / h)) for c in checkpoints])
    ck = np.clip(ck, 0, steps)
    keep = num_paths if record_paths is None else min(int(record_paths), num_paths)

    mean0 = np.zeros(n) if mu0 is None else np.asarray(mu0, dtype=float)
    root = principal_sqrt(sigma0)
    Ks = np.stack([interp_grid(grid, solution.K, t) for t in times])
    vs = np.stack([interp_grid(grid, solution.v, t) for t in times]) if solution.v is not None else None
    mats = [eval_system(sys, t) for t in times]
    sqh = math.sqrt(h)

    states = np.empty((keep, steps + 1, n))
    inputs = np.empty((keep, steps + 1, m))
    ck_states = np.empty((num_paths, len(ck), n))
    mean_acc = np.zeros((steps + 1, n))

    for lo in range(0, num_paths, CHUNK):
        hi = min(num_paths, lo + CHUNK)
        xi0 = np.empty((hi - lo, n))
        dw = np.empty((hi - lo, steps, m))
        for j, i in enumerate(range(lo, hi)):
            rng = path_rng(seed, i)
            xi0[j] = rng.standard_normal(n)
            dw[j] = rng.standard_normal((steps, m))
        if not noise:
            dw[:] = 0.0
        x = mean0 + xi0 @ root.T
        nk = max(0, min(hi, keep) - lo)
        for k in range(steps + 1):
            A, B, _ = mats[k]
            u = x @ Ks[k].T
            if vs is not None:
                u = u + vs[k]
            if nk:
                states[lo:lo + nk, k] = x[:nk]
                inputs[lo:lo + nk, k] = u[:nk]
            mean_acc[k] += x.sum(axis=0)
            hit = np.nonzero(ck == k)[0]
            for c in hit:
                ck_states[lo:hi, c] = x
            if k == steps:
                break
            with np.errstate(over="ignore", invalid="ignore"):
                x = x + (x @ A.T + u @ B.T) * h + sqh * dw[:, k] @ B.T
            if not np.all(np.isfinite(x)):
                bad = int(np.nonzero(~np.all(np.isfinite(x), axis=1))[0][0]) + lo
                raise NonFinitePath(bad, times[k + 1])

    return SamplePathBatch(
        num_paths=num_paths, dt=h, seed=int(seed), times=times, states=states, inputs=inputs,
        sample_mean=mean_acc / num_paths, checkpoint_indices=ck, checkpoint_states=ck_states,
    )
