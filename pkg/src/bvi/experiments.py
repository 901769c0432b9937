"""Config-driven experiment harness: replicate management, trace and
aggregate CSV emission, and the run manifest.

Each replicate owns one RngStream keyed by the experiment seed and a
replicate stream id, so runs are reproducible and independent; a shared
Gaussian target (when used) draws from a dedicated stream. Workers only
compute; a single collector writes every file after all replicates finish,
and the aggregate CSV is byte-identical for identical config and seed.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .algorithms import (InFamilyGeoAverage, QuadratureGeoAverage, RunTrace,
                         Schedule, Status, mc_prmm, prmm_exact, vrb)
from .divergences import QuadratureGrid
from .errors import BviError, InvalidInput
from .expfam import (CenteredGaussian1D, DiagGaussian, ExponentialFamily,
                     FullGaussian)
from .metrics import f1_zero_pattern, param_mse, test_mse_distribution
from .numerics import RngStream
from .regularizers import NullRegularizer, Regularizer, regularizer_from_json
from .targets import (GaussianTargetSpec, RegressionDataset, Target,
                      make_gaussian_target, make_regression_dataset,
                      make_regression_target)

SCHEMA_VERSION = 1

EXPERIMENTS = ("gaussian_sweep", "sensitivity", "regression", "single_run")
ALGORITHMS = ("prmm_exact", "mc_prmm", "vrb")

# Stream-id layout under one experiment seed.
_TARGET_STREAM = 1_000_000
_TEST_BETA_STREAM = 2_000_000

AGG_METRICS = ("objective", "renyi_bound", "mse_mean", "mse_cov", "f1_zeros", "ess")

TRACE_COLUMNS = ("k", "objective", "renyi_bound", "da_gap", "ess", "prox_active",
                 "dual_domain_repairs", "param_norm", "mse_mean", "mse_cov",
                 "f1_zeros")


@dataclass
class ExperimentConfig:
    experiment: str
    algorithm: str = "mc_prmm"
    family: dict = field(default_factory=lambda: {"kind": "full_gaussian"})
    target: dict = field(default_factory=lambda: {"kind": "gaussian", "d": 2,
                                                  "kappa": 10.0})
    alpha: float | Sequence[float] = 0.5
    tau: float | Sequence[float] = 0.5
    n_samples: int = 500
    max_iters: int = 100
    n_replicates: int = 20
    seed: int = 0
    replicate_seeds: Optional[Sequence[int]] = None
    regularizer: dict = field(default_factory=lambda: {"kind": "null"})
    output_dir: str = "bvi_out"
    mu0: float | Sequence[float] = 5.0
    sigma0: float = 10.0
    stop_tol: Optional[float] = 0.0
    jobs: int = 1
    save_params: bool = False
    zero_tol: float = 0.0
    n_test_beta: int = 100
    repair: str = "eigen_floor"

    def alphas(self) -> list[float]:
        return _as_float_list(self.alpha)

    def taus(self) -> list[float]:
        return _as_float_list(self.tau)

    def replicate_ids(self) -> list[int]:
        if self.replicate_seeds is not None:
            return [int(s) for s in self.replicate_seeds]
        return list(range(self.n_replicates))

    def to_json(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["alpha"] = self.alphas() if not np.isscalar(self.alpha) else float(self.alpha)
        doc["tau"] = self.taus() if not np.isscalar(self.tau) else float(self.tau)
        return doc


def _as_float_list(value) -> list[float]:
    if isinstance(value, (int, float, np.integer, np.floating)):
        return [float(value)]
    out = [float(v) for v in value]
    if not out:
        raise InvalidInput("grid must be non-empty")
    return out


def validate_config(source) -> ExperimentConfig:
    """Normalize a config given as a path, dict, or ExperimentConfig.

    Fills defaults, checks ranges, and raises InvalidInput with the field
    name on violations.
    """
    if isinstance(source, ExperimentConfig):
        doc = source.to_json()
    elif isinstance(source, dict):
        doc = dict(source)
    else:
        path = Path(source)
        if not path.exists():
            raise InvalidInput(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"config is not valid JSON: {exc}") from exc

    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise InvalidInput(f"unknown config fields: {sorted(unknown)}")
    if "experiment" not in doc:
        raise InvalidInput("config.experiment is required")
    cfg = ExperimentConfig(**doc)

    if cfg.experiment not in EXPERIMENTS:
        raise InvalidInput(f"config.experiment must be one of {EXPERIMENTS}, "
                           f"got {cfg.experiment!r}")
    if cfg.algorithm not in ALGORITHMS:
        raise InvalidInput(f"config.algorithm must be one of {ALGORITHMS}, "
                           f"got {cfg.algorithm!r}")
    if cfg.n_replicates < 1:
        raise InvalidInput("config.n_replicates must be >= 1")
    if cfg.max_iters < 1:
        raise InvalidInput("config.max_iters must be >= 1")
    if cfg.n_samples < 2:
        raise InvalidInput("config.n_samples must be >= 2")
    if cfg.jobs < 1:
        raise InvalidInput("config.jobs must be >= 1")
    if cfg.repair not in ("eigen_floor", "strict"):
        raise InvalidInput("config.repair must be 'eigen_floor' or 'strict'")

    alphas, taus = cfg.alphas(), cfg.taus()
    for a in alphas:
        if a <= 0.0:
            raise InvalidInput("config.alpha entries must be positive")
    prox_algorithms = cfg.experiment == "sensitivity" or cfg.algorithm != "vrb"
    for t in taus:
        if t <= 0.0:
            raise InvalidInput("config.tau entries must be positive")
        if prox_algorithms and t > 1.0:
            raise InvalidInput(
                f"config.tau={t} violates the (0, 1] constraint of the "
                "moment-matching algorithms")
    if cfg.algorithm == "vrb":
        for a in alphas:
            if a >= 1.0:
                raise InvalidInput("config.alpha must lie in (0, 1) for vrb")

    tkind = cfg.target.get("kind")
    if tkind not in ("gaussian", "regression"):
        raise InvalidInput("config.target.kind must be 'gaussian' or 'regression'")
    if cfg.experiment == "regression" and tkind != "regression":
        raise InvalidInput("the regression experiment needs a regression target")
    if cfg.experiment in ("gaussian_sweep", "sensitivity") and tkind != "gaussian":
        raise InvalidInput(f"the {cfg.experiment} experiment needs a gaussian target")

    regularizer_from_json(cfg.regularizer)  # raises on malformed specs
    return cfg


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_target(cfg: ExperimentConfig, replicate: int) -> Target:
    tkind = cfg.target.get("kind")
    if tkind == "gaussian":
        spec = GaussianTargetSpec(
            d=int(cfg.target.get("d", 2)),
            kappa=float(cfg.target.get("kappa", 1.0)),
            mean_box=float(cfg.target.get("mean_box", 0.5)),
            seed=cfg.seed,
        )
        # One shared target per experiment: replicates differ by sampling only.
        return make_gaussian_target(spec, RngStream(cfg.seed, _TARGET_STREAM))
    if tkind == "regression":
        data = build_dataset(cfg, replicate)
        return make_regression_target(data)
    raise InvalidInput(f"unknown target kind {tkind!r}")


def build_dataset(cfg: ExperimentConfig, replicate: int) -> RegressionDataset:
    t = cfg.target
    return make_regression_dataset(
        d=int(t.get("d", 5)),
        n_train=int(t.get("n_train", 100)),
        n_test=int(t.get("n_test", 50)),
        sigma2=float(t.get("sigma2", 0.5)),
        s=float(t.get("s", 5.0)),
        rho=float(t.get("rho", 0.5)),
        rng=RngStream(cfg.seed, _TARGET_STREAM + 1 + replicate),
    )


def build_family(cfg: ExperimentConfig, target: Target) -> ExponentialFamily:
    kind = cfg.family.get("kind", "full_gaussian")
    d = int(cfg.family.get("d", target.dim))
    if d != target.dim:
        raise InvalidInput(f"family dimension {d} does not match the target "
                           f"dimension {target.dim}")
    if kind == "full_gaussian":
        return FullGaussian(d)
    if kind == "diag_gaussian":
        frame = cfg.family.get("Q")
        return DiagGaussian(d, np.asarray(frame, dtype=float) if frame else None)
    if kind == "centered_gaussian_1d":
        if d != 1:
            raise InvalidInput("the centered family is one-dimensional")
        return CenteredGaussian1D()
    raise InvalidInput(f"unknown family kind {kind!r}")


def initial_params(cfg: ExperimentConfig, fam: ExponentialFamily):
    if isinstance(fam, CenteredGaussian1D):
        return fam.from_mean_cov(np.zeros(1), cfg.sigma0)
    mu0 = np.asarray(cfg.mu0, dtype=float)
    if mu0.ndim == 0:
        mu0 = np.full(fam.dim, float(mu0))
    return fam.from_mean_cov(mu0, cfg.sigma0 * np.eye(fam.dim))


def _exact_provider(fam: ExponentialFamily, target: Target, alpha: float):
    truth = target.ground_truth
    if truth is not None and truth.theta_pi is not None and truth.family_kind == fam.kind:
        return InFamilyGeoAverage(fam, alpha, truth.theta_pi)
    if fam.dim == 1:
        grid = QuadratureGrid(-60.0, 60.0)
        return QuadratureGeoAverage(fam, alpha, target, grid)
    raise InvalidInput("the exact algorithm needs an in-family target or a "
                       "one-dimensional quadrature provider")


def run_single(cfg: ExperimentConfig, algorithm: str, alpha: float, tau: float,
               replicate: int) -> tuple[RunTrace, Target]:
    """One replicate of one setting; pure given (config, setting, replicate)."""
    target = build_target(cfg, replicate)
    fam = build_family(cfg, target)
    theta0 = initial_params(cfg, fam)
    schedule = Schedule(tau=tau, n_samples=cfg.n_samples,
                        max_iters=cfg.max_iters, stop_tol=cfg.stop_tol)
    reg = regularizer_from_json(cfg.regularizer)
    rng = RngStream(cfg.seed, replicate)
    truth = target.ground_truth
    theta_pi = None
    if truth is not None and truth.theta_pi is not None and truth.family_kind == fam.kind:
        theta_pi = truth.theta_pi

    if algorithm == "prmm_exact":
        trace = prmm_exact(fam, _exact_provider(fam, target, alpha), reg,
                           alpha, schedule, theta0)
    elif algorithm == "mc_prmm":
        trace = mc_prmm(fam, target, reg, alpha, schedule, theta0, rng,
                        repair=cfg.repair, theta_pi=theta_pi)
    elif algorithm == "vrb":
        if not isinstance(reg, NullRegularizer):
            reg = NullRegularizer()  # the bound ascent has no proximal step
        trace = vrb(fam, target, alpha, schedule, theta0, rng)
    else:
        raise InvalidInput(f"unknown algorithm {algorithm!r}")
    return trace, target


def trace_metric_rows(trace: RunTrace, target: Target,
                      zero_tol: float = 0.0) -> list[dict]:
    """Trace rows augmented with ground-truth metrics where available."""
    truth = target.ground_truth
    rows = trace.to_rows()
    for row, record in zip(rows, trace.records):
        row["mse_mean"] = np.nan
        row["mse_cov"] = np.nan
        row["f1_zeros"] = np.nan
        if truth is None:
            continue
        if truth.mu_bar is not None and truth.sigma_bar is not None:
            mse_mean, mse_cov = param_mse(trace.family, record.theta,
                                          truth.mu_bar, truth.sigma_bar)
            row["mse_mean"] = mse_mean
            row["mse_cov"] = mse_cov
        if truth.beta_bar is not None:
            mu, _ = trace.family.mean_cov(record.theta)
            row["f1_zeros"] = f1_zero_pattern(mu, truth.beta_bar, zero_tol)
    return rows


# ---------------------------------------------------------------------------
# Replicate execution and aggregation
# ---------------------------------------------------------------------------


@dataclass
class SettingResult:
    algorithm: str
    alpha: float
    tau: float
    replicate: int
    rows: list[dict]
    status: str
    test_mse: Optional[np.ndarray] = None
    trace: Optional[RunTrace] = None
    target: Optional[Target] = None


def _run_setting_replicate(cfg_doc: dict, algorithm: str, alpha: float,
                           tau: float, replicate: int,
                           keep_trace: bool = False) -> SettingResult:
    cfg = ExperimentConfig(**cfg_doc)
    trace, target = run_single(cfg, algorithm, alpha, tau, replicate)
    rows = trace_metric_rows(trace, target, cfg.zero_tol)
    test_mse = None
    truth = target.ground_truth
    if (cfg.experiment == "regression" and truth is not None
            and truth.beta_bar is not None and trace.status != Status.DIVERGED):
        data = build_dataset(cfg, replicate)
        test_mse = test_mse_distribution(
            trace.family, trace.final_theta, data, cfg.n_test_beta,
            RngStream(cfg.seed, _TEST_BETA_STREAM + replicate))
    return SettingResult(
        algorithm=algorithm, alpha=alpha, tau=tau, replicate=replicate,
        rows=rows, status=trace.status.value, test_mse=test_mse,
        trace=trace if keep_trace else None,
        target=target if keep_trace else None)


def _settings_for(cfg: ExperimentConfig) -> list[tuple[str, float, float]]:
    if cfg.experiment == "sensitivity":
        algos = ("mc_prmm", "vrb")
        return [(algo, a, t) for algo in algos for a in cfg.alphas()
                for t in cfg.taus()]
    return [(cfg.algorithm, a, t) for a in cfg.alphas() for t in cfg.taus()]


def _pad_rows(rows: list[dict], length: int) -> list[dict]:
    """Extend a trace to a fixed length by repeating its last row (metrics
    frozen at the last valid iterate); padded rows are marked inactive."""
    out = [dict(r, active=1) for r in rows]
    while len(out) < length:
        filler = dict(out[-1])
        filler["k"] = out[-1]["k"] + 1
        filler["active"] = 0
        out.append(filler)
    return out[:length]


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, int, np.integer)):
        return str(int(value))
    v = float(value)
    if np.isnan(v):
        return ""
    return repr(v)


def write_csv(path: Path, header: Sequence[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(row.get(col)) for col in header])


def aggregate_rows(cfg: ExperimentConfig,
                   results: list[SettingResult]) -> list[dict]:
    """Median, quartiles, and mean per iteration per setting. Replicates are
    an unordered multiset: permuting seeds leaves the statistics unchanged."""
    import warnings

    length = cfg.max_iters + 1
    by_setting: dict[tuple, list[SettingResult]] = {}
    for res in results:
        by_setting.setdefault((res.algorithm, res.alpha, res.tau), []).append(res)

    out: list[dict] = []
    for (algorithm, alpha, tau), group in by_setting.items():
        group = sorted(group, key=lambda r: r.replicate)
        padded = [_pad_rows(r.rows, length) for r in group]
        n_div = sum(1 for r in group if r.status == Status.DIVERGED.value)
        for k in range(length):
            row = {
                "experiment": cfg.experiment,
                "algorithm": algorithm,
                "family": cfg.family.get("kind", "full_gaussian"),
                "alpha": alpha,
                "tau": tau,
                "n_samples": cfg.n_samples,
                "k": k,
                "n_replicates": len(group),
                "n_active": sum(p[k]["active"] for p in padded),
                "diverged_frac": n_div / len(group),
            }
            for metric in AGG_METRICS:
                vals = np.array([p[k][metric] for p in padded], dtype=float)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", category=RuntimeWarning)
                    row[f"{metric}_median"] = np.nanmedian(vals)
                    row[f"{metric}_q25"] = np.nanpercentile(vals, 25)
                    row[f"{metric}_q75"] = np.nanpercentile(vals, 75)
                    row[f"{metric}_mean"] = np.nanmean(vals)
            out.append(row)
    return out


AGG_COLUMNS = (
    ["experiment", "algorithm", "family", "alpha", "tau", "n_samples", "k",
     "n_replicates", "n_active", "diverged_frac"]
    + [f"{m}_{s}" for m in AGG_METRICS for s in ("median", "q25", "q75", "mean")]
)


def _write_target_grid(path: Path, target: Target, trace: RunTrace,
                       n_points: int = 101) -> None:
    """Log-density of a two-dimensional target on a box covering the target
    mass and the whole iterate trajectory."""
    truth = target.ground_truth
    centers = [trace.family.mean_cov(r.theta)[0] for r in trace.records]
    spreads = [np.sqrt(np.diag(trace.family.mean_cov(r.theta)[1]))
               for r in trace.records]
    los = [mu - 2.0 * sd for mu, sd in zip(centers, spreads)]
    his = [mu + 2.0 * sd for mu, sd in zip(centers, spreads)]
    if truth is not None and truth.mu_bar is not None:
        sd = np.sqrt(np.diag(truth.sigma_bar))
        los.append(truth.mu_bar - 4.0 * sd)
        his.append(truth.mu_bar + 4.0 * sd)
    lo = np.min(np.array(los), axis=0)
    hi = np.max(np.array(his), axis=0)
    xs = np.linspace(lo[0], hi[0], n_points)
    ys = np.linspace(lo[1], hi[1], n_points)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    z = target.log_values(pts).reshape(n_points, n_points)
    doc = {"x": xs.tolist(), "y": ys.tolist(), "log_density": z.tolist()}
    path.write_text(json.dumps(doc), encoding="utf-8")


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every setting and replicate, then write all output files.

    Returns the manifest. Raises BviError subclasses on config errors and
    OSError on unwritable output locations. Diverged replicates are
    recorded, never fatal.
    """
    cfg = validate_config(cfg)
    start = time.monotonic()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces_dir = out_dir / "traces"
    traces_dir.mkdir(exist_ok=True)

    settings = _settings_for(cfg)
    replicate_ids = cfg.replicate_ids()
    keep_trace = cfg.save_params
    cfg_doc = cfg.to_json()

    jobs = [(cfg_doc, algo, alpha, tau, rep, keep_trace)
            for (algo, alpha, tau) in settings for rep in replicate_ids]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]

    # Single collector: all writes happen below, in deterministic order.
    files: list[str] = []
    for res in results:
        slug = _setting_slug(res, many=len(settings) > 1)
        trace_path = traces_dir / f"trace_{slug}rep{res.replicate:03d}.csv"
        write_csv(trace_path, TRACE_COLUMNS, res.rows)
        files.append(str(trace_path.relative_to(out_dir)))
        if keep_trace and res.trace is not None:
            params_path = out_dir / f"params_{slug}rep{res.replicate:03d}.json"
            res.trace.save_json(params_path, include_params=True)
            files.append(str(params_path.relative_to(out_dir)))

    if keep_trace:
        first = results[0]
        if first.target is not None and first.target.dim == 2 and first.trace is not None:
            grid_path = out_dir / "target_grid.json"
            _write_target_grid(grid_path, first.target, first.trace)
            files.append(str(grid_path.relative_to(out_dir)))
        if cfg.experiment == "regression":
            for res in results:
                data = build_dataset(cfg, res.replicate)
                ds_path = out_dir / f"dataset_rep{res.replicate:03d}.csv"
                data.save_csv(ds_path)
                files.append(str(ds_path.relative_to(out_dir)))

    agg_path = out_dir / "aggregate.csv"
    write_csv(agg_path, AGG_COLUMNS, aggregate_rows(cfg, results))
    files.append("aggregate.csv")

    if cfg.experiment == "regression":
        mse_rows = []
        for res in sorted(results, key=lambda r: (r.algorithm, r.alpha, r.tau,
                                                  r.replicate)):
            if res.test_mse is None:
                continue
            for i, v in enumerate(res.test_mse):
                mse_rows.append({"algorithm": res.algorithm, "alpha": res.alpha,
                                 "tau": res.tau, "replicate": res.replicate,
                                 "sample": i, "test_mse": float(v)})
        mse_path = out_dir / "test_mse.csv"
        write_csv(mse_path, ["algorithm", "alpha", "tau", "replicate", "sample",
                             "test_mse"], mse_rows)
        files.append("test_mse.csv")

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "config": cfg_doc,
        "replicate_seeds": replicate_ids,
        "statuses": {f"{r.algorithm}:a{r.alpha}:t{r.tau}:r{r.replicate}": r.status
                     for r in results},
        "wall_time_s": time.monotonic() - start,
        "files": files,
        "trace_columns": list(TRACE_COLUMNS),
        "aggregate_columns": list(AGG_COLUMNS),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2),
                                           encoding="utf-8")
    return manifest


def _run_job(job) -> SettingResult:
    cfg_doc, algo, alpha, tau, rep, keep_trace = job
    return _run_setting_replicate(cfg_doc, algo, alpha, tau, rep, keep_trace)


def _setting_slug(res: SettingResult, many: bool) -> str:
    if not many:
        return ""
    return f"{res.algorithm}_a{res.alpha:g}_t{res.tau:g}_".replace(".", "p")
