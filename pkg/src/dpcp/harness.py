"""Experiment harness: seeded grids of recovery runs with persistable tables.

Four experiment kinds share one config and result schema:

  phase_transition : grid over (N, M) cells, several methods per cell
  codim_sweep      : grid over (codimension, outlier ratio) at fixed N
  outlier_pursuit  : corruption sweep on a low-dimensional proxy cube
  continuous_check : closed-form limit vs simulator agreement

Every cell derives its own seeds by hashing the cell parameters (not grid
position), so sub-grids reproduce the matching rows of larger grids and all
methods within a cell see identical data. Rows are sorted canonically before
persistence; two runs of the same config write byte-identical tables.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis, rsgm, solver
from .continuous import (
    ContinuousProblem,
    continuous_fixed_point,
    continuous_psgm_run,
    continuous_span_check,
)
from .dataset import (
    DataMatrix,
    INLIER,
    SubspaceModel,
    corrupt_with_outliers,
    generate_dataset,
    sample_haar_subspace,
    unit_sphere_columns,
)
from .geometry import ScheduleParams
from .serialize import as_plain

KINDS = ("phase_transition", "codim_sweep", "outlier_pursuit", "continuous_check")
_PHASE_METHODS = ("psgm", "rsgm", "rsgm_over")
_PURSUIT_METHODS = ("psgm", "rsgm", "rsgm_known")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment grid; validated eagerly so bad cells fail before any run."""

    kind: str
    D: int
    seed: int = 0
    trials: int = 1
    c_prime: int = 10
    d: int | None = None
    # phase_transition
    N_grid: tuple[int, ...] = ()
    M_grid: tuple[int, ...] = ()
    methods: tuple[str, ...] = ()
    # codim_sweep
    N: int | None = None
    codim_grid: tuple[int, ...] = ()
    r_grid: tuple[float, ...] = ()
    # outlier_pursuit proxy
    n_columns: int = 10000
    proxy_inlier_dim: int = 5
    proxy_noise: float = 1e-3
    rsgm_known_c: int = 5
    # continuous_check
    p: float | None = None
    # solver knobs
    schedule_kind: str = "mbls"
    mu0: float | None = None
    beta: float = 0.6
    K0: int = 30
    K_star: int = 10
    max_iters: int = 1000
    stop_tol: float = 1e-9
    rank_strategy: str = "gap"
    rank_tau: float = 0.05
    workers: int = 1
    output_path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.D < 2 or self.trials < 1 or self.c_prime < 1 or self.workers < 1:
            raise ValueError("invalid config: D >= 2, trials >= 1, c_prime >= 1, workers >= 1")
        if self.schedule_kind not in ("const", "pgd", "mbls"):
            raise ValueError(f"unknown schedule kind {self.schedule_kind!r}")
        if self.kind == "phase_transition":
            if not self.N_grid or not self.M_grid:
                raise ValueError("phase grid needs N_grid and M_grid")
            if any(n < 1 for n in self.N_grid) or any(m < 0 for m in self.M_grid):
                raise ValueError("invalid grid: every N >= 1 and M >= 0")
            if self.d is None or not 1 <= self.d < self.D:
                raise ValueError("phase grid needs 1 <= d < D")
            methods = self.methods or _PHASE_METHODS
            bad = set(methods) - set(_PHASE_METHODS)
            if bad:
                raise ValueError(f"unknown methods {sorted(bad)}")
            object.__setattr__(self, "methods", tuple(methods))
        elif self.kind == "codim_sweep":
            if self.N is None or self.N < 1:
                raise ValueError("codim sweep needs N >= 1")
            if not self.codim_grid or not self.r_grid:
                raise ValueError("codim sweep needs codim_grid and r_grid")
            if any(not 1 <= c < self.D for c in self.codim_grid):
                raise ValueError("invalid grid: every codimension in [1, D)")
            if max(self.codim_grid) > self.c_prime:
                raise ValueError("c_prime must cover the largest codimension in the grid")
            if any(not 0.0 < r < 1.0 for r in self.r_grid):
                raise ValueError("invalid ratio: every r in (0, 1)")
        elif self.kind == "outlier_pursuit":
            if not self.r_grid or any(not 0.0 < r < 1.0 for r in self.r_grid):
                raise ValueError("outlier pursuit needs ratios in (0, 1)")
            if not 1 <= self.proxy_inlier_dim < self.D:
                raise ValueError("invalid proxy dimensions")
            if not 1 <= self.rsgm_known_c <= self.D:
                raise ValueError("invalid rsgm_known_c")
            methods = self.methods or _PURSUIT_METHODS
            bad = set(methods) - set(_PURSUIT_METHODS)
            if bad:
                raise ValueError(f"unknown methods {sorted(bad)}")
            object.__setattr__(self, "methods", tuple(methods))
        elif self.kind == "continuous_check":
            if self.p is None or not 0.0 < self.p <= 1.0:
                raise ValueError("invalid ratio: continuous check needs 0 < p <= 1")
            if self.d is None or not 1 <= self.d < self.D:
                raise ValueError("continuous check needs 1 <= d < D")
            if self.c_prime < self.D - self.d:
                raise ValueError("c_prime must be at least the codimension")


def config_to_json(config: ExperimentConfig, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(as_plain(config), fh, indent=2)


def config_from_json(path: str) -> ExperimentConfig:
    with open(path) as fh:
        raw = json.load(fh)
    for key in ("N_grid", "M_grid", "methods", "codim_grid", "r_grid"):
        if key in raw and raw[key] is not None:
            raw[key] = tuple(raw[key])
    return ExperimentConfig(**raw)


def derive_seed(master: int, *parts) -> int:
    """Stable 64-bit seed from the master seed and a canonical part tuple."""
    toks = [str(int(master))]
    for p in parts:
        toks.append(format(p, ".17g") if isinstance(p, float) else str(p))
    digest = hashlib.sha256("|".join(toks).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class ResultRow:
    """One (cell, method, trial) outcome; report holds flattened metrics."""

    cell: dict
    method: str
    trial: int
    seed: int
    report: dict
    wall_time: float
    error: str | None = None


@dataclass
class ResultTable:
    kind: str
    rows: list[ResultRow] = field(default_factory=list)

    def sorted_rows(self) -> list[ResultRow]:
        return sorted(
            self.rows, key=lambda r: (json.dumps(r.cell, sort_keys=True), r.method, r.trial)
        )


def _flatten_report(rep: analysis.RecoveryReport) -> dict:
    return {
        "estimated_codim": int(rep.estimated_codim),
        "singular_values": [float(v) for v in rep.singular_values],
        "procrustes_distance": rep.procrustes_distance,
        "projection_distance": rep.projection_distance,
        "max_principal_angle": rep.max_principal_angle,
        "outlier_f1": rep.outlier_f1,
        "outlier_precision": rep.outlier_precision,
        "outlier_recall": rep.outlier_recall,
    }


def _schedule_from_config(config: ExperimentConfig) -> solver.StepSchedule:
    if config.schedule_kind == "const":
        if config.mu0 is None:
            raise ValueError("constant schedule needs a numeric mu0")
        return solver.Constant(config.mu0)
    if config.schedule_kind == "pgd":
        return solver.PiecewiseGeometric(
            ScheduleParams(mu0=config.mu0, beta=config.beta, K0=config.K0, K_star=config.K_star)
        )
    return solver.MBLS(mu_init=config.mu0)


def _solver_config(config: ExperimentConfig, c_prime: int, seed: int) -> solver.SolverConfig:
    return solver.SolverConfig(
        c_prime=c_prime,
        max_iters=config.max_iters,
        stop_tol=config.stop_tol,
        schedule=_schedule_from_config(config),
        seed=seed,
    )


def _recovery_row(config, cell, method, trial, seed, model, matrix, basis) -> ResultRow:
    rep = analysis.recovery_report(
        basis, model=model, matrix=matrix,
        rank_strategy=config.rank_strategy, tau=config.rank_tau,
    )
    report = _flatten_report(rep)
    if model is not None:
        report["true_codim"] = model.codim
    return ResultRow(
        cell=cell, method=method, trial=trial, seed=seed,
        report=report, wall_time=0.0,
    )


def cell_data_seeds(config: ExperimentConfig, *cell_parts) -> tuple[int, int]:
    """(model seed, data seed) for one cell+trial; method-independent so every
    method in a cell runs on identical data."""
    return (
        derive_seed(config.seed, config.kind, *cell_parts, "model"),
        derive_seed(config.seed, config.kind, *cell_parts, "data"),
    )


def _run_cell_phase(config: ExperimentConfig, N: int, M: int, method: str, trial: int) -> ResultRow:
    cell = {"N": N, "M": M}
    model_seed, data_seed = cell_data_seeds(config, N, M, trial)
    solver_seed = derive_seed(config.seed, config.kind, N, M, trial, method, "solver")
    t0 = time.perf_counter()
    try:
        model = sample_haar_subspace(config.D, config.d, model_seed)
        matrix = generate_dataset(model, N, M, data_seed)
        if method == "psgm":
            basis = solver.psgm_multi(matrix, _solver_config(config, config.c_prime, solver_seed))
        else:
            c = model.codim if method == "rsgm" else config.c_prime
            basis = rsgm.rsgm_run(
                matrix, c, _schedule_from_config(config),
                max_iters=config.max_iters, stop_tol=config.stop_tol,
            )
        row = _recovery_row(config, cell, method, trial, solver_seed, model, matrix, basis)
    except Exception as e:  # noqa: BLE001 - a failed cell must not sink the grid
        row = ResultRow(cell=cell, method=method, trial=trial, seed=solver_seed,
                        report={}, wall_time=0.0, error=str(e))
    return dataclasses.replace(row, wall_time=time.perf_counter() - t0)


def ratio_to_counts(N: int, r: float) -> int:
    """Outlier count M giving outlier fraction r against N inliers."""
    return round(r * N / (1.0 - r))


def _run_cell_codim(config: ExperimentConfig, c: int, r: float, trial: int) -> ResultRow:
    cell = {"c": c, "r": r}
    model_seed, data_seed = cell_data_seeds(config, c, r, trial)
    solver_seed = derive_seed(config.seed, config.kind, c, r, trial, "psgm", "solver")
    t0 = time.perf_counter()
    try:
        M = ratio_to_counts(config.N, r)
        model = sample_haar_subspace(config.D, config.D - c, model_seed)
        matrix = generate_dataset(model, config.N, M, data_seed)
        basis = solver.psgm_multi(matrix, _solver_config(config, config.c_prime, solver_seed))
        row = _recovery_row(config, cell, "psgm", trial, solver_seed, model, matrix, basis)
    except Exception as e:  # noqa: BLE001
        row = ResultRow(cell=cell, method="psgm", trial=trial, seed=solver_seed,
                        report={}, wall_time=0.0, error=str(e))
    return dataclasses.replace(row, wall_time=time.perf_counter() - t0)


def hsi_proxy(
    D: int = 10,
    inlier_dim: int = 5,
    n_columns: int = 10000,
    noise: float = 1e-3,
    seed: int = 0,
    spectrum_decay: float = 0.6,
) -> tuple[SubspaceModel, DataMatrix]:
    """Low-dimensional proxy cube: unit columns near a d-dimensional subspace
    with a geometrically decaying coefficient spectrum and small relative
    noise, mimicking a flattened hyperspectral block."""
    ss = np.random.SeedSequence(seed).spawn(2)
    model = sample_haar_subspace(D, inlier_dim, int(ss[0].generate_state(1)[0]))
    rng = np.random.default_rng(ss[1])
    weights = spectrum_decay ** np.arange(inlier_dim)
    z = rng.standard_normal((inlier_dim, n_columns)) * weights[:, None]
    x = model.basis_S @ z
    x /= np.linalg.norm(x, axis=0)
    x = x + noise * rng.standard_normal(x.shape)
    x /= np.linalg.norm(x, axis=0)
    labels = np.full(n_columns, INLIER, dtype="U7")
    return model, DataMatrix(points=x, labels=labels, unit_normalized=True)


def _run_cell_pursuit(config: ExperimentConfig, r: float, method: str, trial: int) -> ResultRow:
    cell = {"r": r}
    proxy_seed = derive_seed(config.seed, config.kind, "proxy")
    corrupt_seed = derive_seed(config.seed, config.kind, r, trial, "corrupt")
    solver_seed = derive_seed(config.seed, config.kind, r, trial, method, "solver")
    t0 = time.perf_counter()
    try:
        _, base = hsi_proxy(
            D=config.D, inlier_dim=config.proxy_inlier_dim, n_columns=config.n_columns,
            noise=config.proxy_noise, seed=proxy_seed,
        )
        matrix = corrupt_with_outliers(base, r, corrupt_seed)
        if method == "psgm":
            basis = solver.psgm_multi(matrix, _solver_config(config, config.c_prime, solver_seed))
        else:
            c = config.rsgm_known_c if method == "rsgm_known" else config.c_prime
            basis = rsgm.rsgm_run(
                matrix, c, _schedule_from_config(config),
                max_iters=config.max_iters, stop_tol=config.stop_tol,
            )
        row = _recovery_row(config, cell, method, trial, solver_seed, None, matrix, basis)
    except Exception as e:  # noqa: BLE001
        row = ResultRow(cell=cell, method=method, trial=trial, seed=solver_seed,
                        report={}, wall_time=0.0, error=str(e))
    return dataclasses.replace(row, wall_time=time.perf_counter() - t0)


def _run_cell_continuous(config: ExperimentConfig, trial: int) -> ResultRow:
    cell = {"trial_cell": trial}
    model_seed, start_seed = cell_data_seeds(config, trial)
    t0 = time.perf_counter()
    try:
        model = sample_haar_subspace(config.D, config.d, model_seed)
        problem = ContinuousProblem(subspace=model, p=config.p)
        rng = np.random.default_rng(start_seed)
        B0 = unit_sphere_columns(rng, config.D, config.c_prime)
        if config.p == 1.0:
            report = {"tag": "every direction is fixed at p=1; span check skipped"}
        else:
            mu0 = config.mu0 if config.mu0 is not None else 0.3
            schedule = solver.PiecewiseGeometric(
                ScheduleParams(mu0=mu0, beta=config.beta, K0=config.K0, K_star=config.K_star)
            )
            errs = []
            for j in range(config.c_prime):
                b_star, _ = continuous_psgm_run(
                    problem, B0[:, j], schedule,
                    max_iters=config.max_iters, stop_tol=config.stop_tol,
                )
                ref = continuous_fixed_point(model, B0[:, j])
                errs.append(float(np.arccos(np.clip(b_star @ ref, -1.0, 1.0))))
            _, rank, spans = continuous_span_check(model, B0)
            report = {
                "max_fixed_point_angle_error": max(errs),
                "estimated_codim": int(rank),
                "spans_complement": bool(spans),
            }
        row = ResultRow(cell=cell, method="continuous", trial=trial,
                        seed=start_seed, report=report, wall_time=0.0)
    except Exception as e:  # noqa: BLE001
        row = ResultRow(cell=cell, method="continuous", trial=trial, seed=start_seed,
                        report={}, wall_time=0.0, error=str(e))
    return dataclasses.replace(row, wall_time=time.perf_counter() - t0)


def _execute(jobs, fn, workers: int) -> list[ResultRow]:
    if workers <= 1:
        return [fn(*j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


def run_phase_transition(config: ExperimentConfig) -> ResultTable:
    if config.kind != "phase_transition":
        raise ValueError("config.kind must be 'phase_transition'")
    jobs = [
        (config, N, M, method, trial)
        for N in config.N_grid for M in config.M_grid
        for method in config.methods for trial in range(config.trials)
    ]
    rows = _execute(jobs, _run_cell_phase, config.workers)
    return ResultTable(kind=config.kind, rows=ResultTable(config.kind, rows).sorted_rows())


def run_codim_sweep(config: ExperimentConfig) -> ResultTable:
    if config.kind != "codim_sweep":
        raise ValueError("config.kind must be 'codim_sweep'")
    jobs = [
        (config, c, r, trial)
        for c in config.codim_grid for r in config.r_grid for trial in range(config.trials)
    ]
    rows = _execute(jobs, _run_cell_codim, config.workers)
    return ResultTable(kind=config.kind, rows=ResultTable(config.kind, rows).sorted_rows())


def run_outlier_pursuit(config: ExperimentConfig) -> ResultTable:
    if config.kind != "outlier_pursuit":
        raise ValueError("config.kind must be 'outlier_pursuit'")
    jobs = [
        (config, r, method, trial)
        for r in config.r_grid for method in config.methods for trial in range(config.trials)
    ]
    rows = _execute(jobs, _run_cell_pursuit, config.workers)
    return ResultTable(kind=config.kind, rows=ResultTable(config.kind, rows).sorted_rows())


def run_continuous_check(config: ExperimentConfig) -> ResultTable:
    if config.kind != "continuous_check":
        raise ValueError("config.kind must be 'continuous_check'")
    jobs = [(config, trial) for trial in range(config.trials)]
    rows = _execute(jobs, _run_cell_continuous, config.workers)
    return ResultTable(kind=config.kind, rows=ResultTable(config.kind, rows).sorted_rows())


_RUNNERS = {
    "phase_transition": run_phase_transition,
    "codim_sweep": run_codim_sweep,
    "outlier_pursuit": run_outlier_pursuit,
    "continuous_check": run_continuous_check,
}


def run_experiment(config: ExperimentConfig) -> ResultTable:
    return _RUNNERS[config.kind](config)


def exact_recovery_rates(table: ResultTable) -> dict[tuple, float]:
    """Per-cell fraction of trials that recovered the codimension exactly.

    The target codimension is the cell's own c for a sweep and the config-level
    truth otherwise, which phase rows carry in report["true_codim"].
    """
    hits: dict[tuple, list[int]] = {}
    for row in table.rows:
        key = tuple(row.cell[k] for k in sorted(row.cell)) + (row.method,)
        true_c = row.cell.get("c", row.report.get("true_codim"))
        ok = int(not row.error and true_c is not None
                 and row.report.get("estimated_codim") == true_c)
        hits.setdefault(key, []).append(ok)
    return {k: sum(v) / len(v) for k, v in sorted(hits.items())}


# ---------------------------------------------------------------------------
# persistence


def _encode_cell_value(v):
    return format(v, ".17g") if isinstance(v, float) else str(v)


def _decode_cell_value(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def persist(table: ResultTable, path: str, fmt: str | None = None, include_timing: bool = False) -> None:
    """Write a table as CSV (flat, report as a JSON column) or JSON (nested).

    Timing is volatile, so wall_time is written as 0 unless include_timing is
    set; this keeps repeated runs of the same seed byte-identical.
    """
    path = os.fspath(path)
    fmt = fmt or (path.rsplit(".", 1)[-1].lower() if "." in path else "")
    rows = table.sorted_rows()
    if fmt == "csv":
        cell_keys = sorted({k for r in rows for k in r.cell})
        with open(path, "w", newline="") as fh:
            fh.write(",".join([f"cell_{k}" for k in cell_keys]
                              + ["method", "trial", "seed", "wall_time", "error", "report"]) + "\n")
            for r in rows:
                wall = format(r.wall_time, ".17g") if include_timing else "0"
                fields = [_encode_cell_value(r.cell.get(k, "")) for k in cell_keys]
                fields += [r.method, str(r.trial), str(r.seed), wall,
                           r.error or "", json.dumps(r.report, sort_keys=True)]
                fh.write(",".join('"' + f.replace('"', '""') + '"' if ("," in f or '"' in f) else f
                                  for f in fields) + "\n")
    elif fmt == "json":
        doc = {
            "kind": table.kind,
            "rows": [
                {
                    "cell": r.cell, "method": r.method, "trial": r.trial, "seed": r.seed,
                    "report": r.report,
                    "wall_time": r.wall_time if include_timing else 0.0,
                    "error": r.error,
                }
                for r in rows
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    else:
        raise ValueError(f"unknown format {fmt!r}: use 'csv' or 'json'")


def load_results(path: str, fmt: str | None = None) -> ResultTable:
    """Read back a persisted table; the lossless inverse of persist."""
    path = os.fspath(path)
    fmt = fmt or (path.rsplit(".", 1)[-1].lower() if "." in path else "")
    if fmt == "csv":
        import csv as _csv

        with open(path, newline="") as fh:
            reader = _csv.reader(fh)
            header = next(reader)
            cell_keys = [h[5:] for h in header if h.startswith("cell_")]
            rows = []
            for rec in reader:
                m = dict(zip(header, rec))
                cell = {k: _decode_cell_value(m[f"cell_{k}"]) for k in cell_keys if m[f"cell_{k}"]}
                rows.append(ResultRow(
                    cell=cell, method=m["method"], trial=int(m["trial"]), seed=int(m["seed"]),
                    report=json.loads(m["report"]), wall_time=float(m["wall_time"]),
                    error=m["error"] or None,
                ))
        # kind is not stored in the CSV; infer from the cell schema
        kind = "phase_transition"
        if rows:
            keys = set(rows[0].cell)
            if keys == {"c", "r"}:
                kind = "codim_sweep"
            elif keys == {"r"}:
                kind = "outlier_pursuit"
            elif keys == {"trial_cell"}:
                kind = "continuous_check"
        return ResultTable(kind=kind, rows=rows)
    if fmt == "json":
        with open(path) as fh:
            doc = json.load(fh)
        rows = [
            ResultRow(
                cell=r["cell"], method=r["method"], trial=r["trial"], seed=r["seed"],
                report=r["report"], wall_time=r["wall_time"], error=r["error"],
            )
            for r in doc["rows"]
        ]
        return ResultTable(kind=doc["kind"], rows=rows)
    raise ValueError(f"unknown format {fmt!r}: use 'csv' or 'json'")


def write_plotdata(table: ResultTable, path: str) -> None:
    """Aggregate a table into the TSV series its figure is drawn from."""
    rows = table.sorted_rows()
    lines: list[str] = []
    if table.kind == "phase_transition":
        lines.append("N\tM\tmethod\tmean_projection_distance\tn")
        agg: dict[tuple, list[float]] = {}
        for r in rows:
            v = r.report.get("projection_distance")
            if not r.error and v is not None:
                agg.setdefault((r.cell["N"], r.cell["M"], r.method), []).append(v)
        for (N, M, method), vals in sorted(agg.items()):
            lines.append(f"{N}\t{M}\t{method}\t{np.mean(vals):.17g}\t{len(vals)}")
    elif table.kind == "codim_sweep":
        lines.append("c\tr\texact_fraction\tn")
        agg = {}
        for r in rows:
            ok = int(not r.error and r.report.get("estimated_codim") == r.cell["c"])
            agg.setdefault((r.cell["c"], r.cell["r"]), []).append(ok)
        for (c, rr), vals in sorted(agg.items()):
            lines.append(f"{c}\t{rr:.17g}\t{np.mean(vals):.17g}\t{len(vals)}")
    elif table.kind == "outlier_pursuit":
        lines.append("r\tmethod\tmean_f1\tn")
        agg = {}
        for r in rows:
            v = r.report.get("outlier_f1")
            if not r.error and v is not None:
                agg.setdefault((r.cell["r"], r.method), []).append(v)
        for (rr, method), vals in sorted(agg.items()):
            lines.append(f"{rr:.17g}\t{method}\t{np.mean(vals):.17g}\t{len(vals)}")
    else:
        lines.append("trial\tmax_fixed_point_angle_error\testimated_codim\tspans_complement")
        for r in rows:
            if r.error or "tag" in r.report:
                continue
            lines.append(
                f"{r.trial}\t{r.report['max_fixed_point_angle_error']:.17g}"
                f"\t{r.report['estimated_codim']}\t{int(r.report['spans_complement'])}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
