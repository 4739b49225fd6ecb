"""File formats: JSON with 17 significant digits, solution/trace/path CSVs."""

import csv
import hashlib
import json
import math
import os

import numpy as np

from .matcore import unvech, vech
from .traj import SteeringSolution

SOLUTION_FORMAT = "covsteer-solution/1"


def fmt(x):
    """Format a float with 17 significant digits (exact round trip)."""
    return format(float(x), ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj, indent=2):
    return _encode(obj, indent, 0) + "\n"


def dump_json(obj, path, indent=2):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(obj, indent))


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def file_digest(path):
    """``sha256:<hex>`` of the raw file bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


def solution_to_dict(sol, p0=None, trace=None, stm_residuals=None, problem_hash=None):
    """Serializable view of a :class:`SteeringSolution`.

    Symmetric per-time matrices are stored as vech rows, gains row-major.
    """
    n = sol.P.shape[1]
    d = {
        "format": SOLUTION_FORMAT,
        "problemHash": problem_hash,
        "n": int(n),
        "m": int(sol.K.shape[1]),
        "grid": sol.grid,
        "P": [vech(p) for p in sol.P],
        "Sigma": [vech(s) for s in sol.Sigma],
        "K": [k.ravel() for k in sol.K],
        "terminalCost": sol.terminal_cost,
        "runningCost": sol.running_cost,
        "totalCost": sol.total_cost,
        "transversalityResidual": sol.transversality_residual,
    }
    if p0 is not None:
        d["p0"] = vech(p0)
    if trace is not None:
        d["iterations"] = trace.iterations
        d["converged"] = trace.converged
        d["retries"] = trace.retries
        d["seedUsed"] = trace.seed_used
    if stm_residuals is not None:
        d["stmResiduals"] = list(stm_residuals)
    if sol.has_means:
        d["mu"] = sol.mu
        d["z"] = sol.z
        d["v"] = sol.v
        d["meanResidual"] = sol.mean_residual
    return d


def _nan(x):
    return float("nan") if x is None else float(x)


def solution_from_dict(d):
    """Inverse of :func:`solution_to_dict`; returns ``(solution, extras)``."""
    if d.get("format") != SOLUTION_FORMAT:
        raise ValueError(f"unrecognized solution format {d.get('format')!r}")
    n, m = int(d["n"]), int(d["m"])
    sol = SteeringSolution(
        grid=np.asarray(d["grid"], dtype=float),
        P=np.stack([unvech(r, n) for r in d["P"]]),
        Sigma=np.stack([unvech(r, n) for r in d["Sigma"]]),
        K=np.asarray(d["K"], dtype=float).reshape(-1, m, n),
        terminal_cost=_nan(d.get("terminalCost")),
        running_cost=_nan(d.get("runningCost")),
        transversality_residual=_nan(d.get("transversalityResidual")),
    )
    if "mu" in d:
        sol.mu = np.asarray(d["mu"], dtype=float)
        sol.z = np.asarray(d["z"], dtype=float)
        sol.v = np.asarray(d["v"], dtype=float)
        sol.mean_residual = _nan(d.get("meanResidual"))
    extras = {k: v for k, v in d.items() if k not in _SOLUTION_ARRAYS}
    return sol, extras


_SOLUTION_ARRAYS = {"grid", "P", "Sigma", "K", "mu", "z", "v"}


def save_solution(path, sol, **kw):
    dump_json(solution_to_dict(sol, **kw), path)


def load_solution(path):
    return solution_from_dict(load_json(path))


def write_solution_csv(path, sol):
    """One row per grid time: ``t, P[vech], Sigma[vech], K[row-major]`` (plus means)."""
    n, m = sol.P.shape[1], sol.K.shape[1]
    nv = n * (n + 1) // 2
    head = ["t"] + [f"P{i}" for i in range(nv)] + [f"Sigma{i}" for i in range(nv)]
    head += [f"K{i}_{j}" for i in range(1, m + 1) for j in range(1, n + 1)]
    if sol.has_means:
        head += [f"mu{i}" for i in range(1, n + 1)] + [f"v{i}" for i in range(1, m + 1)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for k, t in enumerate(sol.grid):
            row = [t, *vech(sol.P[k]), *vech(sol.Sigma[k]), *sol.K[k].ravel()]
            if sol.has_means:
                row += [*sol.mu[k], *sol.v[k]]
            w.writerow([fmt(x) for x in row])


def write_paths_csv(path, batch):
    """Recorded sample paths as ``path, t, x1..xn, u1..um`` rows."""
    keep, _, n = batch.states.shape
    m = batch.inputs.shape[2]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "t"] + [f"x{i}" for i in range(1, n + 1)] + [f"u{i}" for i in range(1, m + 1)])
        for p in range(keep):
            for k, t in enumerate(batch.times):
                w.writerow([p, fmt(t)] + [fmt(x) for x in batch.states[p, k]]
                           + [fmt(u) for u in batch.inputs[p, k]])


def checkpoint_report(batch, solution=None):
    """Sample covariance (and sample mean) at each checkpoint, with the integrated
    covariance and the relative Frobenius gap when `solution` is given."""
    from .sim import sample_covariance
    from .traj import interp_grid

    out = []
    for j, (idx, t) in enumerate(zip(batch.checkpoint_indices, batch.checkpoint_times)):
        entry = {"t": float(t), "step": int(idx)}
        if batch.num_paths >= 2:
            c = sample_covariance(batch, j)
            entry["sampleCov"] = c
            if solution is not None:
                ref = interp_grid(solution.grid, solution.Sigma, float(t))
                entry["integratedSigma"] = ref
                entry["relativeGap"] = float(np.linalg.norm(c - ref) / np.linalg.norm(ref))
        entry["sampleMean"] = batch.checkpoint_states[:, j].mean(axis=0)
        out.append(entry)
    return {"numPaths": batch.num_paths, "dt": batch.dt, "seed": batch.seed, "checkpoints": out}


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
