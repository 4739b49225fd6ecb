"""Problem data: systems, steering problems, solver configuration and validation."""

import json
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np

from .exceptions import OutOfHorizon
from .matcore import SYM_TOL, asymmetry, spd_threshold

PSD_RTOL = 1e-10
CTRB_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class LtvSystem:
    """Sampled linear time-varying system ``dx = A x dt + B (u dt + dw)``.

    A single sample means constant (LTI) matrices; several samples are
    interpolated piecewise-linearly in time.

    Attributes
    ----------
    times : ndarray, shape (k,)
    A : ndarray, shape (k, n, n)
    B : ndarray, shape (k, n, m)
    Q : ndarray, shape (k, n, n)
    """

    times: np.ndarray
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        for name in ("times", "A", "B", "Q"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def lti(cls, A, B, Q):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        return cls(np.array([0.0]), A[None], B[None], Q[None])

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.B.shape[2]

    @property
    def is_lti(self):
        return self.times.shape[0] == 1

    def __call__(self, t):
        return eval_system(self, t)


@dataclass(frozen=True, eq=False)
class SteeringProblem:
    """Full input of the covariance steering solver."""

    system: LtvSystem
    t0: float
    t1: float
    sigma0: np.ndarray
    sigmad: np.ndarray
    mu0: np.ndarray = None
    mud: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "t1", float(self.t1))
        for name in ("sigma0", "sigmad", "mu0", "mud"):
            val = getattr(self, name)
            if val is not None:
                arr = np.array(val, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.system.n

    @property
    def has_means(self):
        return self.mu0 is not None and self.mud is not None


@dataclass
class SolverConfig:
    """Numerical settings of the steering pipeline."""

    tol: float = 1e-8
    max_iter: int = 2000
    grid_steps: int = 2000
    init_box_half_width: float = 1.0
    seed: int = 0
    max_retries: int = 5
    rcond_floor: float = 1e-12
    criterion: str = "frobenius"
    stm_tol: float = 1e-8
    fine_costate: bool = True

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        for name in ("max_iter", "grid_steps"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
            setattr(self, name, int(getattr(self, name)))
        if self.init_box_half_width <= 0 or self.rcond_floor <= 0 or self.stm_tol <= 0:
            raise ValueError("init_box_half_width, rcond_floor and stm_tol must be positive")
        if int(self.max_retries) < 0:
            raise ValueError("max_retries must be non-negative")
        self.max_retries = int(self.max_retries)
        if int(self.seed) < 0:
            raise ValueError("seed must be unsigned")
        self.seed = int(self.seed)
        if self.criterion not in ("frobenius", "componentwise"):
            raise ValueError("criterion must be 'frobenius' or 'componentwise'")

    def replace(self, **changes):
        return SolverConfig(**{**asdict(self), **changes})


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


def eval_system(sys, t):
    """Return ``(A, B, Q)`` at time `t`.

    LTI systems return their single sample for any `t`; sampled systems
    interpolate linearly and raise :class:`OutOfHorizon` outside the grid.
    """
    if sys.is_lti:
        return sys.A[0], sys.B[0], sys.Q[0]
    times = sys.times
    span = max(1.0, abs(times[-1] - times[0]))
    if t < times[0] - 1e-12 * span or t > times[-1] + 1e-12 * span:
        raise OutOfHorizon(f"t={t} outside [{times[0]}, {times[-1]}]")
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    w = (t - times[k]) / (times[k + 1] - times[k])
    w = min(max(w, 0.0), 1.0)
    lerp = lambda arr: (1.0 - w) * arr[k] + w * arr[k + 1]
    return lerp(sys.A), lerp(sys.B), lerp(sys.Q)


def check_time(problem, t):
    span = max(1.0, problem.t1 - problem.t0)
    if t < problem.t0 - 1e-12 * span or t > problem.t1 + 1e-12 * span:
        raise OutOfHorizon(f"t={t} outside [{problem.t0}, {problem.t1}]")


def controllability_matrix(A, B):
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def validate(p):
    """Check a problem against the standing assumptions.

    Returns a list of :class:`Violation` (empty when the problem is valid).
    Controllability is certified only for LTI systems; sampled systems
    emit a warning instead.
    """
    out = []
    sys = p.system
    n, m = sys.n, sys.m

    def add(code, msg):
        out.append(Violation(code, msg))

    if not (np.isfinite(p.t0) and np.isfinite(p.t1)) or not p.t1 > p.t0:
        add("HorizonInvalid", f"need t1 > t0, got [{p.t0}, {p.t1}]")
    if sys.A.shape[1:] != (n, n) or sys.B.shape[1] != n or sys.Q.shape[1:] != (n, n):
        add("DimensionMismatch", "A, B, Q shapes are inconsistent")
        return out
    if not (len(sys.times) == len(sys.A) == len(sys.B) == len(sys.Q)):
        add("DimensionMismatch", "sample counts differ between times, A, B and Q")
        return out
    if not all(np.all(np.isfinite(a)) for a in (sys.times, sys.A, sys.B, sys.Q)):
        add("NonFiniteSystem", "system matrices contain non-finite entries")
        return out
    if not sys.is_lti:
        if np.any(np.diff(sys.times) <= 0):
            add("GridNotIncreasing", "sample times must be strictly increasing")
        if sys.times[0] > p.t0 or sys.times[-1] < p.t1:
            add("GridNotCovering", f"samples span [{sys.times[0]}, {sys.times[-1]}], horizon [{p.t0}, {p.t1}]")
    for k, q in enumerate(sys.Q):
        if asymmetry(q) > SYM_TOL:
            add("QAsymmetric", f"Q sample {k} is not symmetric")
            continue
        w = np.linalg.eigvalsh(0.5 * (q + q.T))
        if w[0] < -PSD_RTOL * max(1.0, np.max(np.abs(w))):
            add("QNotPsd", f"Q sample {k} has eigenvalue {w[0]:.3e} < 0")

    for name, code in (("sigma0", "Sigma0"), ("sigmad", "Sigmad")):
        s = getattr(p, name)
        if s is None or s.shape != (n, n):
            add(f"{code}Shape", f"{name} must be {n}x{n}")
            continue
        if not np.all(np.isfinite(s)):
            add(f"{code}NonFinite", f"{name} has non-finite entries")
            continue
        if asymmetry(s) > SYM_TOL:
            add(f"{code}Asymmetric", f"{name} is not symmetric")
            continue
        w = np.linalg.eigvalsh(0.5 * (s + s.T))
        if not w[0] > spd_threshold(w):
            add(f"{code}NotPd", f"{name} smallest eigenvalue {w[0]:.3e}")

    if (p.mu0 is None) != (p.mud is None):
        add("MeanMismatch", "mu0 and mud must be given together")
    elif p.mu0 is not None:
        for name in ("mu0", "mud"):
            v = getattr(p, name)
            if v.shape != (n,) or not np.all(np.isfinite(v)):
                add("MeanShape", f"{name} must be a finite {n}-vector")

    if sys.is_lti:
        C = controllability_matrix(sys.A[0], sys.B[0])
        sv = np.linalg.svd(C, compute_uv=False)
        if sv.size < n or sv[n - 1] <= CTRB_RTOL * max(sv[0], 1e-300):
            add("NotControllable", "(A, B) fails the Kalman rank test")
    else:
        warnings.warn(
            "uniform controllability of a time-varying system is not certified; "
            "it is the caller's responsibility",
            stacklevel=2,
        )
    return out


def make_double_integrator():
    """Noisy double integrator on [0, 1] with the published covariances."""
    sys = LtvSystem.lti([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], np.eye(2))
    sigma0 = [[4.7295, 1.9951], [1.9951, 3.6157]]
    sigmad = [[1.1189, 0.7780], [0.7780, 1.7407]]
    return SteeringProblem(sys, 0.0, 1.0, sigma0, sigmad)


CW_ORBITAL_RATE = 1.1276e-3

CW_SIGMA0 = [
    [5.9148, 3.8100, 2.5815, 2.1795, 4.1628, 1.9270],
    [3.8100, 5.5664, 2.8501, 2.1819, 3.8496, 3.3638],
    [2.5815, 2.8501, 3.3834, 1.5591, 2.5389, 2.3088],
    [2.1795, 2.1819, 1.5591, 3.5850, 2.6187, 2.0098],
    [4.1628, 3.8496, 2.5389, 2.6187, 5.1285, 2.5639],
    [1.9270, 3.3638, 2.3088, 2.0098, 2.5639, 5.4354],
]
CW_SIGMAD = [
    [1.6431, 1.1138, 1.5453, 1.1729, 1.2916, 0.4077],
    [1.1138, 1.9581, 1.4418, 1.0926, 1.2408, 0.4495],
    [1.5453, 1.4418, 3.9142, 1.9928, 2.0221, 1.5553],
    [1.1729, 1.0926, 1.9928, 2.1027, 1.3448, 0.9645],
    [1.2916, 1.2408, 2.0221, 1.3448, 1.7077, 0.7830],
    [0.4077, 0.4495, 1.5553, 0.9645, 0.7830, 1.5008],
]


def clohessy_wiltshire_matrices(nu=CW_ORBITAL_RATE):
    """Relative orbital dynamics, states ordered (x, y, z, vx, vy, vz)."""
    a1 = nu**2 * np.array([[3.0, 0, 0], [0, 0, 0], [0, 0, -1.0]])
    a2 = nu * np.array([[0, 2.0, 0], [-2.0, 0, 0], [0, 0, 0]])
    A = np.block([[np.zeros((3, 3)), np.eye(3)], [a1, a2]])
    B = np.vstack([np.zeros((3, 3)), np.eye(3)])
    return A, B


def make_clohessy_wiltshire():
    """Noisy Clohessy-Wiltshire rendezvous on [0, 1] with the published covariances."""
    A, B = clohessy_wiltshire_matrices()
    sys = LtvSystem.lti(A, B, np.eye(6))
    return SteeringProblem(sys, 0.0, 1.0, CW_SIGMA0, CW_SIGMAD)


# -- problem files ---------------------------------------------------------

_TOP_KEYS = {"n", "m", "t0", "t1", "system", "sigma0", "sigmad", "mu0", "mud", "solver"}
_CONFIG_KEYS = {f.name for f in fields(SolverConfig)}


class ProblemFileError(ValueError):
    """A problem file is structurally malformed."""


def _matrix(val, shape, name):
    arr = np.asarray(val, dtype=float)
    if arr.shape != shape:
        raise ProblemFileError(f"{name}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ProblemFileError(f"{name}: non-finite entries")
    return arr


def problem_from_dict(d):
    """Build ``(SteeringProblem, SolverConfig | None)`` from a decoded problem file."""
    if not isinstance(d, dict):
        raise ProblemFileError("problem file must hold a JSON object")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ProblemFileError(f"unknown fields: {sorted(unknown)}")
    missing = {"n", "m", "t0", "t1", "system", "sigma0", "sigmad"} - set(d)
    if missing:
        raise ProblemFileError(f"missing fields: {sorted(missing)}")
    n, m = int(d["n"]), int(d["m"])
    if n < 1 or m < 1:
        raise ProblemFileError("n and m must be positive")
    s = d["system"]
    kind = s.get("kind") if isinstance(s, dict) else None
    if kind == "lti":
        extra = set(s) - {"kind", "A", "B", "Q"}
        if extra:
            raise ProblemFileError(f"unknown system fields: {sorted(extra)}")
        sys = LtvSystem.lti(
            _matrix(s["A"], (n, n), "A"), _matrix(s["B"], (n, m), "B"), _matrix(s["Q"], (n, n), "Q")
        )
    elif kind == "grid":
        extra = set(s) - {"kind", "samples"}
        if extra:
            raise ProblemFileError(f"unknown system fields: {sorted(extra)}")
        samples = s.get("samples") or []
        if len(samples) < 2:
            raise ProblemFileError("grid systems need at least two samples")
        for i, smp in enumerate(samples):
            if set(smp) != {"t", "A", "B", "Q"}:
                raise ProblemFileError(f"sample {i} must have exactly t, A, B, Q")
        sys = LtvSystem(
            np.array([float(smp["t"]) for smp in samples]),
            np.stack([_matrix(smp["A"], (n, n), f"samples[{i}].A") for i, smp in enumerate(samples)]),
            np.stack([_matrix(smp["B"], (n, m), f"samples[{i}].B") for i, smp in enumerate(samples)]),
            np.stack([_matrix(smp["Q"], (n, n), f"samples[{i}].Q") for i, smp in enumerate(samples)]),
        )
    else:
        raise ProblemFileError("system.kind must be 'lti' or 'grid'")
    mu0 = _matrix(d["mu0"], (n,), "mu0") if "mu0" in d else None
    mud = _matrix(d["mud"], (n,), "mud") if "mud" in d else None
    problem = SteeringProblem(
        sys, float(d["t0"]), float(d["t1"]),
        _matrix(d["sigma0"], (n, n), "sigma0"), _matrix(d["sigmad"], (n, n), "sigmad"),
        mu0, mud,
    )
    config = None
    if "solver" in d:
        extra = set(d["solver"]) - _CONFIG_KEYS
        if extra:
            raise ProblemFileError(f"unknown solver fields: {sorted(extra)}")
        config = SolverConfig(**d["solver"])
    return problem, config


def problem_to_dict(p, config=None):
    sys = p.system
    if sys.is_lti:
        system = {"kind": "lti", "A": sys.A[0].tolist(), "B": sys.B[0].tolist(), "Q": sys.Q[0].tolist()}
    else:
        system = {
            "kind": "grid",
            "samples": [
                {"t": float(t), "A": a.tolist(), "B": b.tolist(), "Q": q.tolist()}
                for t, a, b, q in zip(sys.times, sys.A, sys.B, sys.Q)
            ],
        }
    d = {
        "n": sys.n, "m": sys.m, "t0": p.t0, "t1": p.t1, "system": system,
        "sigma0": p.sigma0.tolist(), "sigmad": p.sigmad.tolist(),
    }
    if p.has_means:
        d["mu0"] = p.mu0.tolist()
        d["mud"] = p.mud.tolist()
    if config is not None:
        d["solver"] = asdict(config)
    return d


def load_problem(path):
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFileError(f"not valid JSON: {exc}") from exc
    return problem_from_dict(d)


def dump_problem(p, path, config=None):
    from .io import dump_json

    dump_json(problem_to_dict(p, config), path)
