"""Deterministic, replicate-parallel Monte Carlo experiments.

Every replicate ``r`` of cell ``c`` draws from its own counter-based stream
seeded by ``(master_seed, c, r)``, so results are a pure function of the
configuration and master seed, whatever the worker count. Workers return
per-replicate values; aggregation happens in the parent in replicate order.

Configuration (JSON object)::

    kind          size | power | histogram | expansion | uniformity_size | uniformity_power
    replicates    N >= 1
    master_seed   int (default 0)
    workers       int (default 1)
    dist          "normal" | "t:<df>" | "siginv:<shape>"   (default "normal")
    centered      bool (default true; expansion is always non-centered)
    alpha         test level (default 0.05)
    sided         lower | upper | two (default lower; two for uniformity kinds)
    cells         [[p, n], ...]                      -- or --
    n, gamma      lists; p = round-half-up(gamma * n) for every pair   -- or --
    p, n          integers (single cell)
    population    population string for histogram / expansion (default identity)
    family, grid  power only: "equi" or "ar1" and its coefficient grid
    p             uniformity kinds: int or list of dimensions
    eta           uniformity_power: list of eta values
    roc_alphas    uniformity_power, optional: levels for ROC (fpr, tpr) pairs
"""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy import stats
from threadpoolctl import threadpool_limits

from .errors import ConfigError, CorrdetError, NotPositiveDefinite
from .hypothesis_tests import SIDES, p_values, test_uncorrelated, uniformity_moments
from .matrix_core import cholesky_logdet, fsum_array, sym_sqrt
from .moments import MomentInputs, clt_moments, standardize
from .population import PopulationSpec, build_correlation, parse_population
from .sampler import (
    NoiseDistribution,
    apply_population,
    draw_noise,
    kurtosis_of,
    parse_distribution,
    sample_correlation,
    stream_seed,
)
from .vine import draw_vine_logdet

KINDS = ("size", "power", "histogram", "expansion", "uniformity_size", "uniformity_power")
CSV_HEADER = ["cell_id", "param_name", "param_value", "p", "n", "N", "metric", "value", "se", "seed"]


@dataclass
class ExperimentConfig:
    kind: str
    replicates: int
    cells: list[tuple[int, int]] = field(default_factory=list)
    gammas: list[float | None] = field(default_factory=list)
    dist: NoiseDistribution = field(default_factory=NoiseDistribution)
    population: str = "identity"
    family: str | None = None
    grid: list[float] = field(default_factory=list)
    centered: bool = True
    alpha: float = 0.05
    sided: str = "lower"
    dims: list[int] = field(default_factory=list)
    etas: list[float] = field(default_factory=list)
    roc_alphas: list[float] = field(default_factory=list)
    master_seed: int = 0
    workers: int = 1

    @classmethod
    def from_dict(cls, raw: dict[str, Any], kind: str | None = None) -> ExperimentConfig:
        try:
            return _parse_config(dict(raw), kind)
        except ConfigError:
            raise
        except (CorrdetError, TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path, kind: str | None = None) -> ExperimentConfig:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw, kind)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


_KNOWN_KEYS = {
    "kind", "replicates", "master_seed", "workers", "dist", "centered", "alpha", "sided",
    "cells", "n", "gamma", "p", "population", "family", "grid", "eta", "roc_alphas",
}


def _parse_config(raw: dict, kind: str | None) -> ExperimentConfig:
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg_kind = raw.get("kind", kind)
    if cfg_kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {cfg_kind!r}")
    if kind is not None and cfg_kind != kind and not (
        kind == "uniformity_size" and cfg_kind.startswith("uniformity")
    ):
        raise ConfigError(f"config kind {cfg_kind!r} does not match subcommand ({kind})")
    n_rep = raw.get("replicates")
    if not isinstance(n_rep, int) or isinstance(n_rep, bool) or n_rep < 1:
        raise ConfigError(f"replicates must be a positive integer, got {n_rep!r}")
    uniform = cfg_kind.startswith("uniformity")
    cfg = ExperimentConfig(
        kind=cfg_kind,
        replicates=n_rep,
        dist=parse_distribution(raw.get("dist", "normal")),
        population=raw.get("population", "identity"),
        centered=bool(raw.get("centered", cfg_kind != "expansion")),
        alpha=float(raw.get("alpha", 0.05)),
        sided=raw.get("sided", "two" if uniform else "lower"),
        master_seed=int(raw.get("master_seed", 0)),
        workers=int(raw.get("workers", 1)),
    )
    if not 0.0 < cfg.alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {cfg.alpha}")
    if cfg.sided not in SIDES:
        raise ConfigError(f"sided must be one of {SIDES}, got {cfg.sided!r}")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")

    if uniform:
        cfg.dims = [int(p) for p in _as_list(raw.get("p", []))]
        if not cfg.dims or min(cfg.dims) < 2:
            raise ConfigError("uniformity experiments need p >= 2 (int or list)")
        if cfg_kind == "uniformity_size":
            cfg.etas = [1.0]
        else:
            cfg.etas = [float(e) for e in _as_list(raw.get("eta", []))]
            if not cfg.etas or min(cfg.etas) <= 0:
                raise ConfigError("uniformity_power needs a non-empty list of positive eta")
            cfg.roc_alphas = [float(a) for a in raw.get("roc_alphas", [])]
            if any(not 0.0 < a < 1.0 for a in cfg.roc_alphas):
                raise ConfigError("roc_alphas must lie in (0, 1)")
        return cfg

    _parse_cells(cfg, raw)
    if cfg_kind == "size":
        if parse_population(cfg.population, 2).family != "identity":
            raise ConfigError("size experiments require the identity population")
    elif cfg_kind == "power":
        cfg.family = raw.get("family")
        if cfg.family not in ("equi", "ar1"):
            raise ConfigError("power experiments need family 'equi' or 'ar1'")
        grid = [float(v) for v in _as_list(raw.get("grid", []))]
        if not grid:
            raise ConfigError("power experiments need a non-empty grid")
        if 0.0 not in grid:
            grid = [0.0] + grid
        cfg.grid = grid
        for v in grid:
            PopulationSpec(cfg.family, 2, v)
    else:
        for p, _ in cfg.cells:
            parse_population(cfg.population, p)
    if cfg_kind == "expansion" and cfg.centered:
        raise ConfigError("expansion checks are non-centered")
    for p, n in cfg.cells:
        limit = n - 1 if cfg.centered else n
        if not 2 <= p <= limit:
            raise ConfigError(f"cell (p={p}, n={n}) violates 2 <= p <= {'n-1' if cfg.centered else 'n'}")
    return cfg


def _parse_cells(cfg: ExperimentConfig, raw: dict) -> None:
    if "cells" in raw:
        cells = [(int(p), int(n)) for p, n in raw["cells"]]
        gammas = [None] * len(cells)
    elif "gamma" in raw:
        cells, gammas = [], []
        for n in _as_list(raw.get("n", [])):
            for g in _as_list(raw["gamma"]):
                cells.append((round_half_up(float(g) * int(n)), int(n)))
                gammas.append(float(g))
    elif "p" in raw and "n" in raw:
        cells, gammas = [(int(raw["p"]), int(raw["n"]))], [None]
    else:
        raise ConfigError("need 'cells', ('n', 'gamma') or ('p', 'n')")
    if not cells:
        raise ConfigError("no (p, n) cells in config")
    cfg.cells, cfg.gammas = cells, gammas


@dataclass
class ExperimentResult:
    kind: str
    rows: list[dict[str, Any]]
    samples: dict[int, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(row.get(k)) for k in CSV_HEADER])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def metric(self, name: str, cell_id: int | None = None) -> list[float]:
        return [r["value"] for r in self.rows
                if r["metric"] == name and (cell_id is None or r["cell_id"] == cell_id)]

    def write_samples(self, path: str | Path, cell_id: int = 0) -> None:
        Path(path).write_text("".join(f"{v:.17g}\n" for v in self.samples[cell_id]))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def rate_se(rate: float, n: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / n)


# -- replicate kernels (module level so worker processes can unpickle them) --

def _uncorr_kernel(payload: dict, seed) -> tuple[float, float]:
    x = draw_noise(payload["dist"], payload["p"], payload["n"], seed)
    y = apply_population(x, payload["r_half"])
    out = test_uncorrelated(y, payload["centered"], payload["alpha"], payload["sided"])
    return out.statistic, float(out.reject)


def _hist_kernel(payload: dict, seed) -> float:
    x = draw_noise(payload["dist"], payload["p"], payload["n"], seed)
    y = apply_population(x, payload["r_half"])
    try:
        logdet = cholesky_logdet(sample_correlation(y, payload["centered"]))
    except NotPositiveDefinite:
        return -math.inf
    return standardize(logdet, payload["moments"])


def expansion_residual(y: np.ndarray) -> tuple[float, float]:
    """Return ``(log det R_hat, residual)`` for the three-term expansion.

    With ``M = Y Y^T / n`` (= R^{1/2} S~ R^{1/2}), the expansion is
    ``log det M - tr(M - I) + tr(diag(M) - I)^2 / 2``.
    """
    n = y.shape[1]
    m = y @ y.T / n
    m = (m + m.T) / 2.0
    d = np.diagonal(m) - 1.0
    logdet_hat = cholesky_logdet(sample_correlation(y, centered=False))
    approx = cholesky_logdet(m) - fsum_array(d) + 0.5 * fsum_array(d * d)
    return logdet_hat, logdet_hat - approx


def _expansion_kernel(payload: dict, seed) -> float:
    x = draw_noise(payload["dist"], payload["p"], payload["n"], seed)
    return expansion_residual(apply_population(x, payload["r_half"]))[1]


def _vine_kernel(payload: dict, seed) -> float:
    return draw_vine_logdet(payload["p"], payload["eta"], seed)


def _run_chunk(fn: Callable, payload: dict, master_seed: int, cell: int, start: int, stop: int):
    with threadpool_limits(1):
        vals = [fn(payload, stream_seed(master_seed, cell, r)) for r in range(start, stop)]
    return np.asarray(vals, dtype=np.float64)


def execute(jobs: list[tuple[Callable, dict, int]], master_seed: int, workers: int) -> list[np.ndarray]:
    """Run ``replicates`` calls of ``fn(payload, seed)`` per job; job index is the cell id."""
    chunks = []
    total = sum(n for _, _, n in jobs)
    size = max(1, math.ceil(total / (8 * workers * max(1, len(jobs)))))
    for cell, (fn, payload, n) in enumerate(jobs):
        for start in range(0, n, size):
            chunks.append((fn, payload, master_seed, cell, start, min(n, start + size)))
    if workers == 1:
        parts = [_run_chunk(*c) for c in chunks]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futures = [pool.submit(_run_chunk, *c) for c in chunks]
            parts = [f.result() for f in futures]
    per_cell: list[list[np.ndarray]] = [[] for _ in jobs]
    for c, part in zip(chunks, parts):
        per_cell[c[3]].append(part)
    return [np.concatenate(p) for p in per_cell]


def _row(cell, name, value, p, n, N, metric, v, se, seed) -> dict:
    return dict(cell_id=cell, param_name=name, param_value=value, p=p, n=n, N=N,
                metric=metric, value=v, se=se, seed=seed)


def _population_half(label: str, p: int) -> np.ndarray | None:
    spec = parse_population(label, p)
    return None if spec.family == "identity" else sym_sqrt(build_correlation(spec))


def _rejection_rows(cfg, cells, values, name, params) -> list[dict]:
    rows = []
    for i, ((p, n), v, param) in enumerate(zip(cells, values, params)):
        rate = float(np.mean(v[:, 1]))
        rows.append(_row(i, name, param, p, n, cfg.replicates, "rejection_rate",
                         rate, rate_se(rate, cfg.replicates), cfg.master_seed))
    return rows


def _uncorr_payload(cfg, p, n, r_half) -> dict:
    return dict(dist=cfg.dist, p=p, n=n, r_half=r_half, centered=cfg.centered,
                alpha=cfg.alpha, sided=cfg.sided)


def run_size(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.kind != "size":
        raise ConfigError(f"run_size got a {cfg.kind!r} config")
    jobs = [(_uncorr_kernel, _uncorr_payload(cfg, p, n, None), cfg.replicates)
            for p, n in cfg.cells]
    values = execute(jobs, cfg.master_seed, cfg.workers)
    params = [g if g is not None else p / n for g, (p, n) in zip(cfg.gammas, cfg.cells)]
    return ExperimentResult("size", _rejection_rows(cfg, cfg.cells, values, "gamma", params),
                            metadata={"p_rounding": "round-half-up(gamma*n)"})


def run_power(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.kind != "power":
        raise ConfigError(f"run_power got a {cfg.kind!r} config")
    jobs, cells, params = [], [], []
    for p, n in cfg.cells:
        for v in cfg.grid:
            spec = PopulationSpec(cfg.family, p, v)
            r_half = None if spec.family == "identity" else sym_sqrt(build_correlation(spec))
            jobs.append((_uncorr_kernel, _uncorr_payload(cfg, p, n, r_half), cfg.replicates))
            cells.append((p, n))
            params.append(v)
    values = execute(jobs, cfg.master_seed, cfg.workers)
    name = "rho" if cfg.family == "equi" else "a"
    return ExperimentResult("power", _rejection_rows(cfg, cells, values, name, params))


def run_histogram(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.kind != "histogram":
        raise ConfigError(f"run_histogram got a {cfg.kind!r} config")
    jobs = []
    kurt = kurtosis_of(cfg.dist)
    centering = "centered" if cfg.centered else "noncentered"
    for p, n in cfg.cells:
        spec = parse_population(cfg.population, p)
        r = build_correlation(spec)
        if spec.family == "identity":
            inputs = MomentInputs(p=p, n=n, kurtosis=kurt, centering=centering)
        else:
            inputs = MomentInputs.from_correlation(r, (p, n), kurt, centering)
        payload = dict(dist=cfg.dist, p=p, n=n, centered=cfg.centered,
                       r_half=_population_half(cfg.population, p),
                       moments=clt_moments(inputs))
        jobs.append((_hist_kernel, payload, cfg.replicates))
    values = execute(jobs, cfg.master_seed, cfg.workers)
    rows, samples = [], {}
    for i, ((p, n), t) in enumerate(zip(cfg.cells, values)):
        samples[i] = t
        finite = t[np.isfinite(t)]
        N = cfg.replicates
        ks = stats.kstest(finite, "norm").statistic if finite.size else 1.0
        common = (i, "population", cfg.population, p, n, N)
        rows.append(_row(*common, "ks_distance", float(ks), None, cfg.master_seed))
        rows.append(_row(*common, "mean", float(np.mean(finite)),
                         float(np.std(finite, ddof=1) / math.sqrt(finite.size)) if finite.size > 1 else None,
                         cfg.master_seed))
        rows.append(_row(*common, "sd", float(np.std(finite, ddof=1)) if finite.size > 1 else math.nan,
                         None, cfg.master_seed))
        rows.append(_row(*common, "singular_count", float(N - finite.size), None, cfg.master_seed))
    return ExperimentResult("histogram", rows, samples=samples)


def run_expansion_check(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.kind != "expansion":
        raise ConfigError(f"run_expansion_check got a {cfg.kind!r} config")
    jobs = [(_expansion_kernel,
             dict(dist=cfg.dist, p=p, n=n, r_half=_population_half(cfg.population, p)),
             cfg.replicates) for p, n in cfg.cells]
    values = execute(jobs, cfg.master_seed, cfg.workers)
    rows, samples = [], {}
    for i, ((p, n), res) in enumerate(zip(cfg.cells, values)):
        samples[i] = res
        absr = np.abs(res)
        common = (i, "gamma", p / n, p, n, cfg.replicates)
        rows.append(_row(*common, "median_abs_residual", float(np.median(absr)), None, cfg.master_seed))
        rows.append(_row(*common, "q90_abs_residual", float(np.quantile(absr, 0.9)), None, cfg.master_seed))
    return ExperimentResult("expansion", rows, samples=samples)


def run_uniformity_experiments(cfg: ExperimentConfig) -> ExperimentResult:
    if not cfg.kind.startswith("uniformity"):
        raise ConfigError(f"run_uniformity_experiments got a {cfg.kind!r} config")
    cells = [(p, eta) for p in cfg.dims for eta in cfg.etas]
    if cfg.roc_alphas:
        cells += [(p, 1.0) for p in cfg.dims if 1.0 not in cfg.etas]
    jobs = [(_vine_kernel, dict(p=p, eta=eta), cfg.replicates) for p, eta in cells]
    logdets = execute(jobs, cfg.master_seed, cfg.workers)
    N = cfg.replicates
    stats_by_cell = []
    for (p, _), ld in zip(cells, logdets):
        m = uniformity_moments(p)
        stats_by_cell.append((ld - m.mu) / m.sigma)
    rows = []
    for i, ((p, eta), t) in enumerate(zip(cells, stats_by_cell)):
        if i >= len(cfg.dims) * len(cfg.etas):
            break
        rate = _rate(t, cfg.alpha, cfg.sided)
        rows.append(_row(i, "eta", eta, p, p + 1, N, "rejection_rate", rate,
                         rate_se(rate, N), cfg.master_seed))
    null_index = {p: i for i, (p, eta) in enumerate(cells) if eta == 1.0}
    for i, (p, eta) in enumerate(cells[:len(cfg.dims) * len(cfg.etas)]):
        if not cfg.roc_alphas or eta == 1.0:
            continue
        t0, t1 = stats_by_cell[null_index[p]], stats_by_cell[i]
        for a in cfg.roc_alphas:
            fpr, tpr = _rate(t0, a, cfg.sided), _rate(t1, a, cfg.sided)
            rows.append(_row(i, "eta", eta, p, p + 1, N, f"roc_fpr@{a:g}", fpr, rate_se(fpr, N), cfg.master_seed))
            rows.append(_row(i, "eta", eta, p, p + 1, N, f"roc_tpr@{a:g}", tpr, rate_se(tpr, N), cfg.master_seed))
    return ExperimentResult(cfg.kind, rows, samples=dict(enumerate(stats_by_cell)))


def _rate(t: np.ndarray, alpha: float, sided: str) -> float:
    return float(np.mean(p_values(t, sided) < alpha))


RUNNERS = {
    "size": run_size,
    "power": run_power,
    "histogram": run_histogram,
    "expansion": run_expansion_check,
    "uniformity_size": run_uniformity_experiments,
    "uniformity_power": run_uniformity_experiments,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.kind](cfg)
