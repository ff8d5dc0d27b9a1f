"""Projected subgradient pursuit of normal directions on the unit sphere.

Each instance minimizes f(b) = sum_j |<p_j, b>| over unit b by stepping along
the negative subgradient and renormalizing. Run several independently seeded
instances and the columns jointly span the complement of the inlier subspace;
no orthogonality constraint ties the instances together, so they parallelize
and decouple completely.

Step rules: a constant step, a piecewise-geometric decay (flat for K0
iterations, then decaying by beta every K_star), or a monotone backtracking
line search (MBLS) that accepts a step only on sufficient decrease.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import DataMatrix, SubspaceModel, unit_sphere_columns
from .geometry import GeometryStats, ScheduleParams, mu_prime

_UNIT_TOL = 1e-8


@dataclass(frozen=True)
class Constant:
    """Fixed step size."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"invalid step: need mu > 0, got {self.mu}")


@dataclass(frozen=True)
class PiecewiseGeometric:
    """Piecewise-geometric decay driven by ScheduleParams."""

    params: ScheduleParams


@dataclass(frozen=True)
class MBLS:
    """Monotone backtracking line search.

    A candidate step mu is accepted iff
        f(project(b - mu g)) <= f(b) - alpha * mu * ||g||^2;
    on rejection mu shrinks, after an accept the next trial step grows.
    mu_init=None resolves to f(b0) / ||g(b0)||^2.
    """

    mu_init: float | None = None
    alpha: float = 1e-3
    shrink: float = 0.5
    grow: float = 1.5
    max_backtracks: int = 50

    def __post_init__(self):
        if self.mu_init is not None and not self.mu_init > 0:
            raise ValueError("invalid step: mu_init must be > 0")
        if not 0 < self.shrink < 1 or not self.grow >= 1 or not self.alpha > 0:
            raise ValueError("invalid MBLS parameters")
        if self.max_backtracks < 1:
            raise ValueError("invalid MBLS parameters: max_backtracks >= 1")


StepSchedule = Constant | PiecewiseGeometric | MBLS


def step_size(schedule: StepSchedule, k: int, instance: int = 0) -> float | None:
    """Step at iteration k for open-loop schedules; None for MBLS, whose step
    is resolved inside the solver loop by the accept test."""
    if isinstance(schedule, Constant):
        return schedule.mu
    if isinstance(schedule, PiecewiseGeometric):
        p = schedule.params
        mu0 = p.mu0_for(instance)
        if mu0 is None:
            raise ValueError("mu0 is unresolved; supply a numeric value or run the solver")
        if k < p.K0:
            return mu0
        return mu0 * p.beta ** ((k - p.K0) // p.K_star + 1)
    if isinstance(schedule, MBLS):
        return None
    raise TypeError(f"unknown schedule {type(schedule).__name__}")


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by every instance of a pursuit run."""

    c_prime: int = 1
    max_iters: int = 2000
    stop_tol: float = 1e-8
    schedule: StepSchedule = field(default_factory=MBLS)
    seed: int = 0
    sgn_zero_is_zero: bool = True
    record_iterates: bool = False

    def __post_init__(self):
        if self.c_prime < 1:
            raise ValueError(f"invalid dimensions: c_prime >= 1, got {self.c_prime}")
        if self.max_iters < 1 or self.stop_tol < 0:
            raise ValueError("invalid solver limits")


@dataclass
class Trace:
    """Per-iteration record of one instance.

    objective[k] = f at iterate k (length K+1); step[k] = step taken from
    iterate k (length K); angle[k] = principal angle of iterate k from the
    known complement, when a model was supplied; iterates rows are the b-hat
    sequence when recorded; backtracks counts MBLS rejections per iteration.
    """

    objective: np.ndarray
    step: np.ndarray
    angle: np.ndarray | None = None
    iterates: np.ndarray | None = None
    backtracks: np.ndarray | None = None
    notes: tuple[str, ...] = ()

    @property
    def n_iterations(self) -> int:
        return len(self.step)


def trace_to_csv(trace: Trace, path: str) -> None:
    """Write iteration, objective, step, angle columns (blank when unknown)."""
    with open(path, "w") as fh:
        fh.write("iteration,objective,step,angle\n")
        K = len(trace.objective)
        for k in range(K):
            step = format(trace.step[k], ".17g") if k < len(trace.step) else ""
            angle = format(trace.angle[k], ".17g") if trace.angle is not None else ""
            fh.write(f"{k},{format(trace.objective[k], '.17g')},{step},{angle}\n")


@dataclass(frozen=True)
class DualBasis:
    """Stacked results of c_prime independent instances (unit columns)."""

    columns: np.ndarray
    traces: tuple[Trace, ...] = ()

    def __post_init__(self):
        B = np.asarray(self.columns, dtype=float)
        if B.ndim != 2 or B.shape[1] < 1:
            raise ValueError("columns must be a (D, c') array with c' >= 1")
        norms = np.linalg.norm(B, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("every column must have unit norm within 1e-9")
        B = B.copy()
        B.flags.writeable = False
        object.__setattr__(self, "columns", B)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def n_instances(self) -> int:
        return self.columns.shape[1]


def _basis_array(basis) -> np.ndarray:
    B = getattr(basis, "columns", basis)
    B = np.asarray(B, dtype=float)
    return B[:, None] if B.ndim == 1 else B


def objective(matrix: DataMatrix, basis) -> float:
    """f(B) = sum of |<p_j, b_i>| over all points j and columns i."""
    B = _basis_array(basis)
    if B.shape[0] != matrix.ambient_dim:
        raise ValueError(
            f"dimension mismatch: basis has {B.shape[0]} rows, data has {matrix.ambient_dim}"
        )
    return float(np.abs(matrix.points.T @ B).sum())


def _sgn(s: np.ndarray, zero_is_zero: bool) -> np.ndarray:
    return np.sign(s) if zero_is_zero else np.where(s >= 0, 1.0, -1.0)


def subgradient(matrix: DataMatrix, b: np.ndarray, sgn_zero_is_zero: bool = True) -> np.ndarray:
    """g = A sgn(A^T b) for unit b; the zero-crossing rows contribute zero by default."""
    b = np.asarray(b, dtype=float)
    if b.shape != (matrix.ambient_dim,):
        raise ValueError("b must be a vector matching the ambient dimension")
    if abs(np.linalg.norm(b) - 1.0) > _UNIT_TOL:
        raise ValueError("b must have unit norm")
    return matrix.points @ _sgn(matrix.points.T @ b, sgn_zero_is_zero)


def average_terms(matrix: DataMatrix, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sign-weighted averages (x_avg, o_avg) of inliers and outliers at b;
    N x_avg + M o_avg equals the subgradient."""
    if matrix.labels is None:
        raise ValueError("average_terms needs a labeled dataset")
    b = np.asarray(b, dtype=float)
    X, O = matrix.split()
    x_avg = X @ np.sign(X.T @ b) / X.shape[1] if X.shape[1] else np.zeros(matrix.ambient_dim)
    o_avg = O @ np.sign(O.T @ b) / O.shape[1] if O.shape[1] else np.zeros(matrix.ambient_dim)
    return x_avg, o_avg


def default_mu0(matrix: DataMatrix, b0: np.ndarray, stats: GeometryStats | None = None) -> float:
    """Initial step f(b0)/||g(b0)||^2, clipped to mu_prime when stats are given."""
    g = subgradient(matrix, b0)
    n2 = float(g @ g)
    mu = objective(matrix, b0) / n2 if n2 > 0 else 1.0
    if stats is not None and matrix.labels is not None:
        m = matrix.inlier_mask()
        mu = min(mu, mu_prime(stats, int(m.sum()), int((~m).sum())))
    return mu


def _resolve_schedule(matrix, b0, schedule, stats, instance):
    """Fill in any auto (None) initial step for this instance."""
    if isinstance(schedule, PiecewiseGeometric):
        mu0 = schedule.params.mu0_for(instance)
        if mu0 is None:
            mu0 = default_mu0(matrix, b0, stats)
        return PiecewiseGeometric(dataclasses.replace(schedule.params, mu0=mu0)), None
    if isinstance(schedule, MBLS):
        mu = schedule.mu_init if schedule.mu_init is not None else default_mu0(matrix, b0, stats)
        return schedule, mu
    return schedule, None


def psgm_single(
    matrix: DataMatrix,
    b0: np.ndarray,
    config: SolverConfig,
    model: SubspaceModel | None = None,
    stats: GeometryStats | None = None,
) -> tuple[np.ndarray, Trace]:
    """Run one projected subgradient instance from b0.

    Iterates b <- normalize(b - mu g) until the rotation between successive
    iterates drops below config.stop_tol or max_iters is reached. Returns the
    final unit vector and the full trace.
    """
    A = matrix.points
    b = np.asarray(b0, dtype=float).copy()
    if b.shape != (matrix.ambient_dim,):
        raise ValueError("b0 must match the ambient dimension")
    nb = np.linalg.norm(b)
    if abs(nb - 1.0) > _UNIT_TOL:
        raise ValueError("b0 must have unit norm")
    b /= nb

    schedule, mu_ls = _resolve_schedule(matrix, b, config.schedule, stats, 0)
    is_mbls = isinstance(schedule, MBLS)
    zz = config.sgn_zero_is_zero

    objs: list[float] = []
    steps: list[float] = []
    backs: list[int] = []
    angles: list[float] | None = [] if model is not None else None
    iters: list[np.ndarray] | None = [b.copy()] if config.record_iterates else None

    def record_state(f):
        objs.append(f)
        if angles is not None:
            h = np.linalg.norm(model.basis_Sperp.T @ b)
            angles.append(float(np.arccos(min(max(h, -1.0), 1.0))))

    for k in range(config.max_iters):
        s = A.T @ b
        f = float(np.abs(s).sum())
        g = A @ _sgn(s, zz)
        record_state(f)

        if is_mbls:
            gn2 = float(g @ g)
            mu = mu_ls
            n_back = 0
            accepted = None
            while True:
                c = b - mu * g
                nc = np.linalg.norm(c)
                ok = False
                if nc > 0:
                    cand = c / nc
                    fc = float(np.abs(A.T @ cand).sum())
                    ok = fc <= f - schedule.alpha * mu * gn2
                if ok or n_back >= schedule.max_backtracks:
                    if nc == 0:
                        raise ValueError(
                            "degenerate step: update collapsed to the zero vector"
                        )
                    accepted = (cand, mu)
                    break
                mu *= schedule.shrink
                n_back += 1
            b_new, mu_used = accepted
            mu_ls = mu_used * schedule.grow
            backs.append(n_back)
        else:
            mu_used = step_size(schedule, k)
            c = b - mu_used * g
            nc = np.linalg.norm(c)
            tries = 0
            while nc == 0.0 and tries < 50:
                mu_used *= 0.5
                c = b - mu_used * g
                nc = np.linalg.norm(c)
                tries += 1
            if nc == 0.0:
                raise ValueError("degenerate step: update collapsed to the zero vector")
            b_new = c / nc

        steps.append(mu_used)
        movement = math.acos(min(max(float(b @ b_new), -1.0), 1.0))
        b = b_new
        if iters is not None:
            iters.append(b.copy())
        if movement < config.stop_tol:
            break

    record_state(objective(matrix, b))
    trace = Trace(
        objective=np.asarray(objs),
        step=np.asarray(steps),
        angle=np.asarray(angles) if angles is not None else None,
        iterates=np.asarray(iters) if iters is not None else None,
        backtracks=np.asarray(backs, dtype=int) if is_mbls else None,
    )
    return b, trace


def psgm_multi(
    matrix: DataMatrix,
    config: SolverConfig,
    model: SubspaceModel | None = None,
    stats: GeometryStats | None = None,
) -> DualBasis:
    """Run config.c_prime independent instances from uniform random unit starts.

    Instance i draws its start from the i-th child of SeedSequence(config.seed),
    so runs are reproducible and any sub-list of instances matches a smaller
    c_prime run with the same master seed.
    """
    children = np.random.SeedSequence(config.seed).spawn(config.c_prime)
    cols: list[np.ndarray] = []
    traces: list[Trace] = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        b0 = unit_sphere_columns(rng, matrix.ambient_dim, 1)[:, 0]
        schedule = config.schedule
        if isinstance(schedule, PiecewiseGeometric) and isinstance(schedule.params.mu0, tuple):
            schedule = PiecewiseGeometric(
                dataclasses.replace(schedule.params, mu0=schedule.params.mu0[i])
            )
        cfg_i = dataclasses.replace(config, schedule=schedule)
        try:
            b, tr = psgm_single(matrix, b0, cfg_i, model=model, stats=stats)
        except ValueError as e:
            raise ValueError(f"instance {i}: {e}") from e
        cols.append(b)
        traces.append(tr)
    return DualBasis(columns=np.column_stack(cols), traces=tuple(traces))
