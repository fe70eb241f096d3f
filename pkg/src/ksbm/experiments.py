"""Config-driven experiment pipeline: simulate, split, score, report.

A single experiment draws a coupling graph, integrates the oscillator
system, locates the regime boundaries, computes regime-split lead and
covariance matrices of the transformed phases, runs community detection
on each matrix, and writes all artifacts (manifest, trajectory, matrices,
labels, report) to an output directory.  Named presets expand to the
reference parameter sets used throughout the test suite.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import clustering, dynamics, graphs, signatures

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "PRESETS",
    "load_config",
    "run_experiment",
    "emit_figures",
]


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _spaced(lo: float, hi: float, n: int) -> list[float]:
    return [float(v) for v in np.linspace(lo, hi, n)]


#: named parameter sets; every field can be overridden individually
PRESETS: dict[str, dict] = {
    "standard": dict(n=3, m=33, kappa=100.0, sigma=0.1, mu=_spaced(2 / 3, 2, 3),
                     T=10.0, steps=500),
    "collapsed": dict(n=3, m=33, kappa=100.0, sigma=0.1, mu=[2 / 3] * 3,
                      T=10.0, steps=500),
    "noisy": dict(n=3, m=33, kappa=10.0, sigma=1.0, mu=_spaced(1 / 3, 1, 3),
                  T=50.0, steps=500),
    "large": dict(n=6, m=33, kappa=100.0, sigma=0.1, mu=_spaced(1 / 6, 1, 6),
                  T=19.0, steps=500),
    "hierarchical": dict(n=9, m=33, kappa=300.0, sigma=0.1, mu=_spaced(2 / 9, 2, 9),
                         T=10.0, steps=500, n1=9, n2=3, ratio=0.05),
    "stochastic": dict(n=3, m=33, kappa=100.0, sigma=0.1, mu=_spaced(2 / 3, 2, 3),
                       T=10.0, steps=500, brownian_b=0.1),
}


@dataclass
class ExperimentConfig:
    """Full description of one pipeline run."""

    model: str = "standard"
    n: int = 3
    m: int = 33
    kappa: float = 100.0
    sigma: float = 0.1
    mu: list[float] = field(default_factory=lambda: _spaced(2 / 3, 2, 3))
    T: float = 10.0
    steps: int = 500
    substeps: int = 10
    brownian_b: float = 0.0
    # two-level layout, used when both n1 and n2 are set
    n1: int | None = None
    n2: int | None = None
    ratio: float | None = None
    # statistics
    transforms: list[str] = field(default_factory=lambda: ["sin"])
    stats: list[str] = field(default_factory=lambda: ["lead", "cov"])
    # regime policy: analytic boundaries, manual values, or full window
    regime: str = "analytic"
    t_trans: float | None = None
    t_ss: float | None = None
    ss_tol: float = 1e-2
    ss_window: float = 1.0
    ss_horizon: float | None = None
    # clustering
    method: str = "sce"
    cluster_k: int | None = None
    linkage: str = "average"
    stabilizer: float = 0.0
    representative: str = "rowcol"
    prune_to: int | None = None
    # bookkeeping
    outdir: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.model not in set(PRESETS) | {"custom"}:
            raise ConfigError(f"unknown model {self.model!r}")
        if len(self.mu) != self.n:
            raise ConfigError("mu must have one entry per community")
        if self.T <= 0 or self.steps < 2 or self.substeps < 1:
            raise ConfigError("grid parameters out of range")
        if self.sigma < 0 or self.brownian_b < 0:
            raise ConfigError("sigma and brownian_b must be >= 0")
        if self.regime not in {"analytic", "manual", "full"}:
            raise ConfigError(f"unknown regime policy {self.regime!r}")
        if self.regime == "manual" and self.t_trans is None:
            raise ConfigError("manual regime policy needs t_trans")
        for f in self.transforms:
            if f not in {"identity", "sin", "exp_i"}:
                raise ConfigError(f"unknown transform {f!r}")
        for s in self.stats:
            if s not in {"lead", "cov"}:
                raise ConfigError(f"unknown statistic {s!r}")
        if self.method not in {"sce", "kmeans", "hierarchical"}:
            raise ConfigError(f"unknown clustering method {self.method!r}")
        if self.method != "sce" and self.cluster_k is None:
            raise ConfigError(f"method {self.method!r} needs cluster_k")
        if (self.n1 is None) != (self.n2 is None):
            raise ConfigError("two-level layout needs both n1 and n2")
        if self.n1 is not None and self.ratio is None:
            raise ConfigError("two-level layout needs ratio")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "ExperimentConfig":
        if name == "custom":
            return cls(model="custom", **overrides)
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}")
        params = dict(PRESETS[name])
        params.update(overrides)
        return cls(model=name, **params)

    @property
    def hierarchical(self) -> bool:
        return self.n1 is not None


def load_config(path) -> ExperimentConfig:
    """Parse a TOML config file; unknown keys are rejected."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    preset = data.pop("model", "custom")
    try:
        return ExperimentConfig.from_preset(preset, **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class ExperimentResult:
    """In-memory artifact bundle of one pipeline run."""

    config: ExperimentConfig
    graph: graphs.CouplingGraph
    trajectory: dynamics.Trajectory
    boundaries: dynamics.RegimeBoundaries | None
    matrices: dict[str, np.ndarray]
    windows: dict
    estimates: dict[str, clustering.CommunityEstimate | np.ndarray]
    report: dict


def _build_graph(config: ExperimentConfig) -> graphs.CouplingGraph:
    if config.hierarchical:
        spec = graphs.HierarchicalSpec(config.n1, config.n2, config.ratio, config.m)
        return graphs.generate_hierarchical(spec, config.kappa, config.seed)
    return graphs.generate_assortative(config.n, config.m, config.kappa, config.seed)


def _boundaries(config: ExperimentConfig,
                traj: dynamics.Trajectory) -> dynamics.RegimeBoundaries | None:
    if config.regime == "full":
        return None
    if config.regime == "manual":
        return dynamics.RegimeBoundaries(config.t_trans, config.t_ss)
    times, variance = dynamics.integrate_variance_dominated_identical(
        config.kappa, config.n, np.pi ** 2 / 3, config.T / 5000, config.T)
    t_trans = dynamics.transition_time(times, variance, config.m)
    if t_trans is None or t_trans <= 0:
        warnings.warn("no transition time found; falling back to full-window matrices",
                      stacklevel=2)
        return None
    t_ss = dynamics.detect_steady_state(traj, config.ss_tol, config.ss_window)
    if t_ss is not None and t_ss <= t_trans:
        t_ss = None
    return dynamics.RegimeBoundaries(t_trans, t_ss)


def _cluster(config: ExperimentConfig, matrix: np.ndarray):
    if config.method == "sce":
        est = clustering.sce(matrix, stabilizer=config.stabilizer,
                             mode=config.representative)
        if config.prune_to is not None and config.prune_to < est.n_communities:
            D = clustering.distance_matrix(matrix, config.representative)
            est = clustering.prune(est, D, config.prune_to, matrix, config.stabilizer)
        return est
    if config.method == "kmeans":
        vecs = clustering.representative_vectors(matrix, config.representative)
        return clustering.kmeans_cluster(vecs, config.cluster_k, config.seed)
    D = clustering.distance_matrix(matrix, config.representative)
    return clustering.hierarchical_cluster(D, config.linkage, config.cluster_k)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the full pipeline and (optionally) write artifacts."""
    graph = _build_graph(config)
    params = dynamics.KsbmParams(graph=graph, mu=np.asarray(config.mu, dtype=float),
                                 sigma=config.sigma, theta0=None, seed=config.seed,
                                 brownian_b=config.brownian_b)
    dt = config.T / config.steps
    if config.brownian_b > 0:
        traj = dynamics.integrate_stochastic(params, dt, config.T,
                                             substeps=config.substeps)
    else:
        traj = dynamics.integrate_full(params, dt, config.T, substeps=config.substeps)
    bounds = _boundaries(config, traj)
    path = signatures.unwrap(traj)
    truth = graph.communities.labels

    matrices: dict[str, np.ndarray] = {}
    windows: dict = {}
    estimates: dict = {}
    per_matrix: dict[str, dict] = {}
    for f in config.transforms:
        for stat in config.stats:
            if bounds is None:
                mat = _full_window_matrix(path, stat, f)
                named = {f"{stat}_{f}_full": mat}
                windows[f"{stat}_{f}_full"] = (float(path.times[0]), float(path.times[-1]))
            else:
                regime = signatures.regime_split(path, bounds, config.ss_horizon,
                                                 stat=stat, f=f)
                named = {}
                for win, mat in (("clusterization", regime.clusterization),
                                 ("transient", regime.transient),
                                 ("steady_state", regime.steady_state)):
                    if mat is not None:
                        key = f"{stat}_{f}_{win}"
                        named[key] = mat
                        windows[key] = tuple(float(v) for v in regime.windows[win])
            for key, mat in named.items():
                matrices[key] = mat
                # clustering and scoring operate on the real part (complex
                # matrices arise only from the complex-exponential transform)
                mat = np.real(mat)
                est = _cluster(config, mat)
                estimates[key] = est
                labels = est.labels if hasattr(est, "labels") else est
                entry = {
                    "g": _finite_or_none(clustering.block_clustering(
                        mat, truth, config.stabilizer).g),
                    "agreement": clustering.agreement(truth, labels),
                    "k_estimated": int(np.unique(labels).size),
                }
                if config.hierarchical:
                    spec = graphs.HierarchicalSpec(config.n1, config.n2,
                                                   config.ratio, config.m)
                    entry["coarse_agreement"] = clustering.agreement(
                        spec.coarse_labels(), labels)
                per_matrix[key] = entry

    report = {
        "model": config.model,
        "seed": config.seed,
        "t_trans": None if bounds is None else bounds.t_trans,
        "t_ss": None if bounds is None else bounds.t_ss,
        "matrices": per_matrix,
    }
    result = ExperimentResult(config, graph, traj, bounds, matrices, windows,
                              estimates, report)
    if config.outdir is not None:
        _write_artifacts(result)
    return result


def _finite_or_none(value: float):
    return float(value) if np.isfinite(value) else None


def _full_window_matrix(path: signatures.Path, stat: str, f: str) -> np.ndarray:
    g = signatures.transform(path, f)
    if stat == "lead":
        return signatures.lead_matrix(g)
    return signatures.covariance_matrix(g)


def _write_artifacts(result: ExperimentResult) -> None:
    outdir = FsPath(result.config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = dataclasses.asdict(result.config)
    manifest["package_version"] = _package_version()
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2),
                                          encoding="utf-8")
    result.trajectory.to_csv(outdir / "trajectory.csv")
    graphs.save_graph(result.graph, outdir / "graph")
    _write_variance_curves(result, outdir / "variance.csv")
    for key, mat in result.matrices.items():
        stat, f, win = _parse_matrix_key(key)
        signatures.save_matrix(np.real(mat), outdir / key, transform_name=f,
                               window=win)
        est = result.estimates[key]
        labels = est.labels if hasattr(est, "labels") else est
        clustering.save_labels(labels, outdir / f"labels_{key}.csv")
    (outdir / "report.json").write_text(json.dumps(result.report, indent=2),
                                        encoding="utf-8")


def _parse_matrix_key(key: str) -> tuple[str, str, str]:
    """Split '<stat>_<transform>_<window>' (transform may contain '_')."""
    stat, rest = key.split("_", 1)
    for win in ("steady_state", "clusterization", "transient", "full"):
        if rest.endswith("_" + win):
            return stat, rest[: -len(win) - 1], win
    raise ValueError(f"unrecognized matrix key {key!r}")


def _package_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("ksbm")
    except PackageNotFoundError:
        return "unknown"


def _write_variance_curves(result: ExperimentResult, path) -> None:
    means, variances = dynamics.community_stats_folded(result.trajectory,
                                                       result.graph.communities)
    times = result.trajectory.times
    n = variances.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time," + ",".join(f"var_{r}" for r in range(n)) + "\n")
        for k in range(times.size):
            row = ",".join(f"{float(variances[k, r])!r}" for r in range(n))
            fh.write(f"{float(times[k])!r},{row}\n")


def emit_figures(result: ExperimentResult, outdir=None) -> list[str]:
    """Write PNG heatmaps of every matrix plus score-bar curve data.

    Returns the list of files written; an empty bundle is a warned no-op.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = FsPath(outdir if outdir is not None else (result.config.outdir or "."))
    outdir.mkdir(parents=True, exist_ok=True)
    if not result.matrices:
        warnings.warn("no matrices in bundle; nothing to draw", stacklevel=2)
        return []
    written = []
    for key, mat in result.matrices.items():
        fig, ax = plt.subplots(figsize=(4, 4))
        data = np.real(mat)
        vmax = float(np.abs(data).max()) or 1.0
        ax.imshow(data, cmap="gray", vmin=-vmax, vmax=vmax)
        ax.set_title(key)
        target = outdir / f"{key}.png"
        fig.savefig(target, dpi=120)
        plt.close(fig)
        written.append(str(target))
    scores = outdir / "scores.csv"
    with open(scores, "w", encoding="utf-8") as fh:
        fh.write("matrix,g,agreement,k_estimated\n")
        for key, entry in result.report["matrices"].items():
            g = "" if entry["g"] is None else repr(entry["g"])
            fh.write(f"{key},{g},{entry['agreement']!r},{entry['k_estimated']}\n")
    written.append(str(scores))
    return written
