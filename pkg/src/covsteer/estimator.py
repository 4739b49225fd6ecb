"""Estimator-style front end: configure, ``fit`` on a problem, ``predict`` controls."""

import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidProblem
from .lft import MapContext
from .model import SolverConfig, SteeringProblem, problem_from_dict, validate
from .sim import simulate
from .solver import solve_fixed_point
from .stm import compute_stm
from .traj import interp_grid, synthesize


class CovarianceSteering(BaseEstimator):
    """Optimal covariance steering with a Frobenius terminal cost.

    Parameters
    ----------
    tol : float
        Stop once the fixed-point step falls to this size.
    max_iter : int
        Iteration budget per attempt.
    grid_steps : int
        Uniform steps for the transition matrix and the trajectories.
    init_box_half_width : float
        Random initial costates have entries uniform on ``[-w, w]``.
    seed : int
        Seed of the first attempt; retries derive fresh seeds from it.
    max_retries : int
        Restarts allowed after a numerically singular step.
    rcond_floor : float
        Reciprocal condition number below which a solve counts as singular.
    criterion : {"frobenius", "componentwise"}
        Norm used for the stopping test.
    stm_tol : float
        Bound on the symplectic identity residuals of the transition matrix.
    fine_costate : bool
        Integrate the costate on the bisected grid so that the covariance
        RK4 sees exact half-step gains.

    Attributes
    ----------
    problem_ : SteeringProblem
    blocks_ : StmBlocks
    fixed_point_ : FixedPointResult
    trace_ : RecursionTrace
    solution_ : SteeringSolution
    p0_ : ndarray of shape (n, n)
        Converged initial costate.
    n_iter_ : int
    n_features_in_ : int
        State dimension.
    timings_ : dict
        Wall time of each stage in seconds.
    """

    def __init__(self, tol=1e-8, max_iter=2000, grid_steps=2000, init_box_half_width=1.0, seed=0,
                 max_retries=5, rcond_floor=1e-12, criterion="frobenius", stm_tol=1e-8,
                 fine_costate=True):
        self.tol = tol
        self.max_iter = max_iter
        self.grid_steps = grid_steps
        self.init_box_half_width = init_box_half_width
        self.seed = seed
        self.max_retries = max_retries
        self.rcond_floor = rcond_floor
        self.criterion = criterion
        self.stm_tol = stm_tol
        self.fine_costate = fine_costate

    @property
    def config(self):
        """The parameters as a validated :class:`SolverConfig`."""
        return SolverConfig(**self.get_params())

    @classmethod
    def from_config(cls, cfg):
        return cls(**{k: getattr(cfg, k) for k in cls._get_param_names()})

    def fit(self, X, y=None):
        """Solve the steering problem `X`.

        Parameters
        ----------
        X : SteeringProblem or dict
            A problem, or its file representation.
        y : None
            Ignored.

        Raises
        ------
        InvalidProblem
            If the problem fails validation.
        """
        cfg = self.config
        problem = problem_from_dict(X)[0] if isinstance(X, dict) else X
        if not isinstance(problem, SteeringProblem):
            raise TypeError("fit expects a SteeringProblem or a problem dict")
        violations = validate(problem)
        if violations:
            raise InvalidProblem(violations)

        timings = {}
        clock = time.perf_counter()
        blocks = compute_stm(problem.system, problem.t0, problem.t1, cfg.grid_steps,
                             cfg.stm_tol, cfg.rcond_floor)
        timings["stm"] = time.perf_counter() - clock

        clock = time.perf_counter()
        ctx = MapContext.build(blocks, problem.sigma0, problem.sigmad, cfg.rcond_floor)
        result = solve_fixed_point(ctx, cfg)
        timings["recursion"] = time.perf_counter() - clock

        clock = time.perf_counter()
        solution = synthesize(problem, result.p0, cfg.grid_steps, blocks, cfg.fine_costate,
                              cfg.rcond_floor)
        timings["synthesis"] = time.perf_counter() - clock

        self.problem_ = problem
        self.blocks_ = blocks
        self.context_ = ctx
        self.fixed_point_ = result
        self.trace_ = result.trace
        self.p0_ = result.p0
        self.n_iter_ = result.trace.iterations
        self.solution_ = solution
        self.n_features_in_ = problem.n
        self.timings_ = timings
        return self

    def predict(self, X, t):
        """Optimal input ``u = K(t) x + v(t)`` for states `X`.

        Parameters
        ----------
        X : array_like of shape (n_samples, n)
        t : float or array_like of shape (n_samples,)
            Time of each state; must lie within the horizon.

        Returns
        -------
        ndarray of shape (n_samples, m)
        """
        check_is_fitted(self, "solution_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        times = np.broadcast_to(np.asarray(t, dtype=float), (X.shape[0],))
        sol = self.solution_
        lo, hi = sol.grid[0], sol.grid[-1]
        if np.any((times < lo) | (times > hi)):
            raise ValueError(f"t must lie in [{lo:g}, {hi:g}]")
        return np.stack([sol.gain_at(tt) @ x + sol.feedforward_at(tt) for x, tt in zip(X, times)])

    def covariance(self, t):
        """Optimally controlled covariance at time `t` (linear interpolation)."""
        check_is_fitted(self, "solution_")
        return interp_grid(self.solution_.grid, self.solution_.Sigma, float(t))

    def sample(self, num_paths, dt=5e-4, seed=0, **kw):
        """Euler-Maruyama closed-loop sample paths under the fitted controller."""
        check_is_fitted(self, "solution_")
        p = self.problem_
        return simulate(p.system, self.solution_, p.sigma0, num_paths, dt, seed, mu0=p.mu0, **kw)

    def score(self, X=None, y=None):
        """Negative total objective of the fitted solution (higher is better)."""
        check_is_fitted(self, "solution_")
        return -self.solution_.total_cost
