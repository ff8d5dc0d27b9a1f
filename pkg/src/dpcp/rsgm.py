"""Orthogonality-constrained baseline: Riemannian subgradient on the Stiefel manifold.

Minimizes the group-sparse objective ||A^T B||_{1,2} (sum of row norms) over
D x c' matrices with orthonormal columns. The search direction is the
Euclidean subgradient projected onto the tangent space, and iterates return to
the manifold through the polar retraction. The spectral initializer seeds B
with the bottom eigenvectors of the data covariance.

Because the columns are forced to stay jointly orthonormal, overestimating the
codimension drags part of the basis into the inlier subspace; that failure
mode is exactly what the unconstrained pursuit avoids.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .analysis import max_subspace_angle
from .dataset import DataMatrix, SubspaceModel
from .solver import MBLS, PiecewiseGeometric, StepSchedule, Trace, step_size

_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class OrthoBasis:
    """Orthonormal D x c' iterate with its optimization trace."""

    columns: np.ndarray
    trace: Trace | None = None

    def __post_init__(self):
        B = np.asarray(self.columns, dtype=float)
        if B.ndim != 2 or B.shape[1] < 1 or B.shape[0] < B.shape[1]:
            raise ValueError("columns must be a tall (D, c') array")
        if np.max(np.abs(B.T @ B - np.eye(B.shape[1]))) > _ORTHO_TOL:
            raise ValueError("columns must be orthonormal within 1e-8")
        B = B.copy()
        B.flags.writeable = False
        object.__setattr__(self, "columns", B)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def n_columns(self) -> int:
        return self.columns.shape[1]


def spectral_init(matrix: DataMatrix, c_prime: int) -> OrthoBasis:
    """Eigenvectors of A A^T with the c' smallest eigenvalues, in ascending
    eigenvalue order, each column's largest-magnitude entry made positive so
    the initializer is deterministic."""
    if not 1 <= c_prime <= matrix.ambient_dim:
        raise ValueError(
            f"invalid dimensions: need 1 <= c_prime <= D, got {c_prime}, D={matrix.ambient_dim}"
        )
    A = matrix.points
    _, vecs = np.linalg.eigh(A @ A.T)
    B = vecs[:, :c_prime].copy()
    lead = np.argmax(np.abs(B), axis=0)
    flip = B[lead, np.arange(B.shape[1])] < 0
    B[:, flip] *= -1.0
    return OrthoBasis(columns=B)


def _group_objective(A: np.ndarray, B: np.ndarray) -> tuple[float, np.ndarray]:
    S = A.T @ B
    rn = np.linalg.norm(S, axis=1)
    return float(rn.sum()), S


def _riemannian_subgradient(A: np.ndarray, B: np.ndarray, S: np.ndarray) -> np.ndarray:
    rn = np.linalg.norm(S, axis=1)
    W = np.zeros_like(S)
    nz = rn > 0
    W[nz] = S[nz] / rn[nz, None]
    G = A @ W
    sym = 0.5 * (B.T @ G + G.T @ B)
    return G - B @ sym


def _polar_retract(C: np.ndarray, notes: list[str], k: int) -> np.ndarray:
    u, s, vt = np.linalg.svd(C, full_matrices=False)
    if s[-1] < 1e-12 * max(s[0], 1.0):
        notes.append(f"iteration {k}: rank-deficient candidate, regularized polar factor")
    return u @ vt


def rsgm_run(
    matrix: DataMatrix,
    c_prime: int,
    schedule: StepSchedule,
    max_iters: int = 500,
    model: SubspaceModel | None = None,
    stop_tol: float = 1e-10,
) -> OrthoBasis:
    """Riemannian subgradient descent from the spectral initializer.

    Stops when the Frobenius movement between successive iterates drops below
    stop_tol or after max_iters. Deterministic: no randomness enters the run.
    """
    A = matrix.points
    B = np.asarray(spectral_init(matrix, c_prime).columns)
    notes: list[str] = []

    f, S = _group_objective(A, B)
    if isinstance(schedule, PiecewiseGeometric) and schedule.params.mu0 is None:
        G0 = _riemannian_subgradient(A, B, S)
        gn2 = float(np.sum(G0 * G0))
        mu0 = f / gn2 if gn2 > 0 else 1.0
        schedule = PiecewiseGeometric(dataclasses.replace(schedule.params, mu0=mu0))
    mu_ls = None
    if isinstance(schedule, MBLS):
        if schedule.mu_init is not None:
            mu_ls = schedule.mu_init
        else:
            G0 = _riemannian_subgradient(A, B, S)
            gn2 = float(np.sum(G0 * G0))
            mu_ls = f / gn2 if gn2 > 0 else 1.0

    objs: list[float] = []
    steps: list[float] = []
    angles: list[float] | None = [] if model is not None else None

    def record(fval, Bcur):
        objs.append(fval)
        if angles is not None:
            angles.append(max_subspace_angle(Bcur, model.basis_Sperp))

    for k in range(max_iters):
        f, S = _group_objective(A, B)
        G = _riemannian_subgradient(A, B, S)
        record(f, B)
        if isinstance(schedule, MBLS):
            gn2 = float(np.sum(G * G))
            mu = mu_ls
            n_back = 0
            while True:
                cand = _polar_retract(B - mu * G, notes, k)
                fc, _ = _group_objective(A, cand)
                if fc <= f - schedule.alpha * mu * gn2 or n_back >= schedule.max_backtracks:
                    break
                mu *= schedule.shrink
                n_back += 1
            B_new, mu_used = cand, mu
            mu_ls = mu * schedule.grow
        else:
            mu_used = step_size(schedule, k)
            B_new = _polar_retract(B - mu_used * G, notes, k)
        steps.append(mu_used)
        movement = float(np.linalg.norm(B_new - B))
        B = B_new
        if movement < stop_tol:
            break

    f, _ = _group_objective(A, B)
    record(f, B)
    trace = Trace(
        objective=np.asarray(objs),
        step=np.asarray(steps),
        angle=np.asarray(angles) if angles is not None else None,
        notes=tuple(notes),
    )
    return OrthoBasis(columns=B, trace=trace)
