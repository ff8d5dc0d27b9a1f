"""Infinite-sample limit of the pursuit: closed-form dynamics on the sphere.

With infinitely many unit inliers in S (fraction 1-p of the data) and uniform
outliers (fraction p), the objective collapses to

    F(b) = p c_D + (1 - p) c_d cos(phi),   cos(phi) = ||P_S b||,

with c_k the hemisphere height. The subgradient flow then admits a closed-form
fixed point: the normalized complement projection of the start. The simulator
here iterates the exact update so runs can be checked against that limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import projection_distance
from .dataset import SubspaceModel
from .geometry import hemisphere_height
from .solver import MBLS, StepSchedule, Trace, step_size

_ZERO_TOL = 1e-14


@dataclass(frozen=True)
class ContinuousProblem:
    """Subspace plus outlier fraction p, with the two hemisphere heights."""

    subspace: SubspaceModel
    p: float
    c_d: float = field(init=False)
    c_D: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"invalid ratio: need 0 <= p <= 1, got {self.p}")
        object.__setattr__(self, "c_d", hemisphere_height(self.subspace.inlier_dim))
        object.__setattr__(self, "c_D", hemisphere_height(self.subspace.ambient_dim))


def continuous_objective(problem: ContinuousProblem, b: np.ndarray) -> float:
    """F(b) = p c_D + (1 - p) c_d ||P_S b|| for unit b."""
    b = np.asarray(b, dtype=float)
    if abs(np.linalg.norm(b) - 1.0) > 1e-9:
        raise ValueError("b must have unit norm")
    return problem.p * problem.c_D + (1.0 - problem.p) * problem.c_d * float(
        np.linalg.norm(problem.subspace.basis_S.T @ b)
    )


def continuous_fixed_point(subspace: SubspaceModel, b0: np.ndarray) -> np.ndarray:
    """Limit of the flow from b0: the normalized complement projection of b0."""
    b0 = np.asarray(b0, dtype=float)
    n = subspace.basis_Sperp @ (subspace.basis_Sperp.T @ b0)
    nn = np.linalg.norm(n)
    if nn <= _ZERO_TOL * max(np.linalg.norm(b0), 1.0):
        raise ValueError(
            "measure-zero initialization: b0 lies in the inlier subspace"
        )
    return n / nn


def continuous_psgm_run(
    problem: ContinuousProblem,
    b0: np.ndarray,
    schedule: StepSchedule,
    max_iters: int = 1000,
    stop_tol: float = 1e-12,
    record_iterates: bool = False,
) -> tuple[np.ndarray, Trace]:
    """Iterate b <- normalize(b - mu (p c_D b + (1-p) c_d s)) with s the unit
    projection of b onto S.

    A start in S has no well-defined limit and is rejected; a start already in
    the complement is returned unchanged as the k=0 converged case. The step
    mu = 1/(p c_D) annihilates the complement component in one update and is
    rejected. The complement component of the iterate stays collinear with the
    start's throughout, so the run converges to continuous_fixed_point(b0)
    whenever every step keeps 1 - mu p c_D > 0.
    """
    if isinstance(schedule, MBLS):
        raise TypeError("the continuous simulator supports Constant and PiecewiseGeometric steps")
    sub = problem.subspace
    b = np.asarray(b0, dtype=float).copy()
    if abs(np.linalg.norm(b) - 1.0) > 1e-9:
        raise ValueError("b0 must have unit norm")

    def comp_norm(v):
        return float(np.linalg.norm(sub.basis_Sperp.T @ v))

    if comp_norm(b) <= _ZERO_TOL:
        raise ValueError("measure-zero initialization: b0 lies in the inlier subspace")

    forbidden = 1.0 / (problem.p * problem.c_D) if problem.p > 0 else math.inf
    objs = [continuous_objective(problem, b)]
    angles = [math.acos(min(comp_norm(b), 1.0))]
    steps: list[float] = []
    iterates = [b.copy()] if record_iterates else None

    for k in range(max_iters):
        sproj = sub.basis_S @ (sub.basis_S.T @ b)
        ns = np.linalg.norm(sproj)
        if ns <= _ZERO_TOL:
            break  # already in the complement: fixed point reached
        mu = step_size(schedule, k)
        if mu == forbidden:
            raise ValueError(
                f"forbidden step: mu = 1/(p c_D) = {forbidden:.17g} kills the complement component"
            )
        step = mu * (problem.p * problem.c_D * b + (1.0 - problem.p) * problem.c_d * sproj / ns)
        c = b - step
        nc = np.linalg.norm(c)
        if nc == 0.0:
            raise ValueError("degenerate step: update collapsed to the zero vector")
        b_new = c / nc
        steps.append(mu)
        movement = math.acos(min(max(float(b @ b_new), -1.0), 1.0))
        b = b_new
        objs.append(continuous_objective(problem, b))
        angles.append(math.acos(min(comp_norm(b), 1.0)))
        if iterates is not None:
            iterates.append(b.copy())
        if movement < stop_tol:
            break

    trace = Trace(
        objective=np.asarray(objs),
        step=np.asarray(steps),
        angle=np.asarray(angles),
        iterates=np.asarray(iterates) if iterates is not None else None,
    )
    return b, trace


def continuous_span_check(
    subspace: SubspaceModel, B0: np.ndarray, tol: float = 1e-8
) -> tuple[np.ndarray, int, bool]:
    """Map every start column to its closed-form limit and test whether the
    limits span the complement.

    Returns (B_star, numerical rank of B_star, rank == codim and the spans
    agree within tol in projection distance).
    """
    B0 = np.asarray(B0, dtype=float)
    if B0.ndim != 2 or B0.shape[0] != subspace.ambient_dim:
        raise ValueError("B0 must be a (D, c') array")
    c = subspace.codim
    if B0.shape[1] < c:
        raise ValueError(f"invalid dimensions: need c' >= codim, got {B0.shape[1]} < {c}")
    norms = np.linalg.norm(B0, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("every start column must have unit norm")
    cols = []
    for j in range(B0.shape[1]):
        try:
            cols.append(continuous_fixed_point(subspace, B0[:, j]))
        except ValueError as e:
            raise ValueError(f"column {j}: {e}") from e
    B_star = np.column_stack(cols)
    s = np.linalg.svd(B_star, compute_uv=False)
    rank = int(np.sum(s > 1e-8 * s[0]))
    spans = False
    if rank == c:
        spans = projection_distance(B_star, subspace.basis_Sperp) <= tol
    return B_star, rank, spans
