"""Built-in reference problems and plot-ready covariance exports."""

import csv
from dataclasses import dataclass

import numpy as np

from .io import fmt
from .matcore import principal_sqrt, vech
from .model import make_clohessy_wiltshire, make_double_integrator
from .traj import interp_grid

NUM_SNAPSHOTS = 500
NUM_ANGLES = 64


@dataclass(frozen=True)
class Demo:
    name: str
    build: object
    reference_sigma1: np.ndarray
    tolerance: float
    description: str


DEMOS = {
    "double-integrator": Demo(
        "double-integrator",
        make_double_integrator,
        np.array([[4.2282, -0.0504], [-0.0504, 1.7726]]),
        5e-3,
        "noisy double integrator, n=2, m=1",
    ),
    "cw": Demo(
        "cw",
        make_clohessy_wiltshire,
        np.array([
            [4.4809, 3.1131, 2.3911, 0.4248, 0.5287, 0.0363],
            [3.1131, 5.0291, 3.0649, 0.2636, 0.4523, 0.0130],
            [2.3911, 3.0649, 5.1735, 1.3626, 1.0944, 1.2781],
            [0.4248, 0.2636, 1.3626, 2.3281, 1.2304, 1.0207],
            [0.5287, 0.4523, 1.0944, 1.2304, 1.8847, 0.8106],
            [0.0363, 0.0130, 1.2781, 1.0207, 0.8106, 1.7013],
        ]),
        1e-2,
        "noisy Clohessy-Wiltshire rendezvous, n=6, m=3",
    ),
}


def get_demo(name):
    try:
        return DEMOS[name]
    except KeyError:
        raise KeyError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}") from None


def compare_terminal(demo, sigma1):
    """Entrywise comparison of a computed terminal covariance with the reference."""
    dev = np.abs(np.asarray(sigma1) - demo.reference_sigma1)
    return {
        "reference": demo.reference_sigma1,
        "computed": np.asarray(sigma1),
        "maxAbsDeviation": float(dev.max()),
        "tolerance": demo.tolerance,
        "withinTolerance": bool(dev.max() <= demo.tolerance),
    }


def snapshot_times(solution, count=NUM_SNAPSHOTS):
    return np.linspace(solution.grid[0], solution.grid[-1], count)


def _center(solution, t, n):
    if solution.mu is None:
        return np.zeros(n)
    return interp_grid(solution.grid, solution.mu, t)


def ellipse_points(center, cov, num_angles=NUM_ANGLES):
    """1-sigma boundary ``c + sqrt(cov) [cos th; sin th]`` of a 2x2 covariance."""
    theta = np.linspace(0.0, 2 * np.pi, num_angles, endpoint=False)
    circle = np.stack([np.cos(theta), np.sin(theta)])
    return theta, (center[:, None] + principal_sqrt(cov) @ circle).T


def write_ellipse_csv(path, solution, count=NUM_SNAPSHOTS, num_angles=NUM_ANGLES):
    """Boundary points of the 1-sigma ellipse at `count` evenly spaced times (n = 2)."""
    if solution.Sigma.shape[1] != 2:
        raise ValueError("ellipse boundaries are only emitted for 2-state systems")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["snapshot", "t", "k", "theta", "x1", "x2"])
        for s, t in enumerate(snapshot_times(solution, count)):
            cov = interp_grid(solution.grid, solution.Sigma, t)
            theta, pts = ellipse_points(_center(solution, t, 2), cov, num_angles)
            for k, (th, p) in enumerate(zip(theta, pts)):
                w.writerow([s, fmt(t), k, fmt(th), fmt(p[0]), fmt(p[1])])


def write_marginal_csv(path, solution, count=NUM_SNAPSHOTS):
    """Position and velocity 3x3 marginal covariances (vech) per snapshot (n = 6)."""
    if solution.Sigma.shape[1] != 6:
        raise ValueError("marginal blocks are only emitted for 6-state systems")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["snapshot", "t", "block"] + [f"s{i}" for i in range(6)] + ["c1", "c2", "c3"])
        for s, t in enumerate(snapshot_times(solution, count)):
            cov = interp_grid(solution.grid, solution.Sigma, t)
            c = _center(solution, t, 6)
            for label, sl in (("position", slice(0, 3)), ("velocity", slice(3, 6))):
                row = [s, fmt(t), label] + [fmt(x) for x in vech(cov[sl, sl])]
                w.writerow(row + [fmt(x) for x in c[sl]])


def write_covariance_shapes(path, solution):
    """Dispatch to the ellipse (n = 2) or marginal-block (n = 6) export."""
    n = solution.Sigma.shape[1]
    if n == 2:
        write_ellipse_csv(path, solution)
    elif n == 6:
        write_marginal_csv(path, solution)
    else:
        raise ValueError(f"no covariance-shape export for n={n}")
