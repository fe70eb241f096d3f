"""Path signatures, lead matrices, and regime-split statistics.

Paths are piecewise-linear interpolants of sampled multivariate series.
Signatures are computed exactly per segment and concatenated with Chen's
identity.  The lead matrix is the antisymmetric part of the based level-2
signature and equals the signed area of each projected coordinate pair.
Closed-form steady-state signatures of synchronized oscillators are
provided as independent oracles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from .dynamics import RegimeBoundaries, Trajectory

__all__ = [
    "Path",
    "SignatureTensor",
    "RegimeMatrices",
    "CapacityError",
    "unwrap",
    "transform",
    "signature",
    "lead_matrix",
    "covariance_matrix",
    "regime_split",
    "analytic_ss_signature_theta",
    "analytic_ss_signature_exp",
    "analytic_ss_signature_sin_pair",
    "analytic_ss_lead_sin",
    "save_matrix",
]

#: hard guard on dense level-M tensor storage (entries)
TENSOR_ENTRY_CAP = 20_000_000
MAX_LEVEL = 4


class CapacityError(ValueError):
    """Requested signature level would exceed the storage cap."""


@dataclass
class Path:
    """Sampled multivariate path, shape (K, N), piecewise linear in time."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values)
        if self.values.ndim != 2 or self.values.shape[0] != self.times.size:
            raise ValueError("values must be (K, N) matching the time grid")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def based(self) -> "Path":
        """Same path with the first sample subtracted (gamma(0) = 0)."""
        return Path(self.times, self.values - self.values[0])

    def restrict(self, t0: float, t1: float) -> "Path":
        """Sub-path on [t0, t1] with interpolated boundary samples."""
        if not (self.times[0] - 1e-12 <= t0 < t1 <= self.times[-1] + 1e-12):
            raise ValueError("window must lie within the path domain")
        t0 = max(t0, self.times[0])
        t1 = min(t1, self.times[-1])
        inside = (self.times > t0) & (self.times < t1)
        ts = np.concatenate([[t0], self.times[inside], [t1]])
        vs = np.empty((ts.size, self.dim), dtype=self.values.dtype)
        for j in range(self.dim):
            if np.iscomplexobj(self.values):
                vs[:, j] = (np.interp(ts, self.times, self.values[:, j].real)
                            + 1j * np.interp(ts, self.times, self.values[:, j].imag))
            else:
                vs[:, j] = np.interp(ts, self.times, self.values[:, j])
        return Path(ts, vs)


@dataclass
class SignatureTensor:
    """Iterated-integral tensors up to a level; ``levels[l]`` has shape (N,)*l."""

    dim: int
    level: int
    levels: dict[int, np.ndarray]

    def entry(self, index: tuple[int, ...]):
        """Signature value for one multi-index (0-based coordinates)."""
        return self.levels[len(index)][index]


@dataclass
class RegimeMatrices:
    """One matrix per temporal window of the regime split."""

    clusterization: np.ndarray | None
    transient: np.ndarray | None
    steady_state: np.ndarray | None
    windows: dict


def unwrap(traj_or_values) -> Path:
    """Lift circle-valued samples to the real line.

    Jumps larger than pi between consecutive samples are corrected by
    multiples of 2 pi; already-continuous input passes through unchanged.
    """
    if isinstance(traj_or_values, Trajectory):
        times, values = traj_or_values.times, traj_or_values.phases
    elif isinstance(traj_or_values, Path):
        times, values = traj_or_values.times, traj_or_values.values
    else:
        raise TypeError("expected a Trajectory or Path")
    return Path(times, np.unwrap(np.asarray(values, dtype=float), axis=0))


def transform(path: Path, f: str) -> Path:
    """Element-wise map of the samples: identity, sin, or exp_i."""
    if f == "identity":
        return Path(path.times, path.values.copy())
    if f == "sin":
        return Path(path.times, np.sin(path.values))
    if f == "exp_i":
        return Path(path.times, np.exp(1j * path.values))
    raise ValueError(f"unknown transform {f!r}")


def _segment_signature(v: np.ndarray, M: int) -> dict[int, np.ndarray]:
    """Signature of one linear segment with increment v: level l is v^{(x) l} / l!."""
    out = {}
    acc = np.array(1.0, dtype=v.dtype)
    for l in range(1, M + 1):
        acc = np.multiply.outer(acc, v) / l
        out[l] = acc
    return out


def _chen_product(a: dict[int, np.ndarray], b: dict[int, np.ndarray],
                  M: int, dim: int, dtype) -> dict[int, np.ndarray]:
    """Truncated tensor-algebra product of two signatures (level-0 terms are 1)."""
    out = {}
    for l in range(1, M + 1):
        acc = np.zeros((dim,) * l, dtype=dtype)
        if l in a:
            acc += a[l]
        if l in b:
            acc += b[l]
        for p in range(1, l):
            q = l - p
            if p in a and q in b:
                acc += np.multiply.outer(a[p], b[q])
        out[l] = acc
    return out


def signature(path: Path, M: int, base_at_zero: bool = True) -> SignatureTensor:
    """Exact signature of the piecewise-linear interpolant up to level M."""
    if M < 1:
        raise ValueError("level must be >= 1")
    N = path.dim
    if M > MAX_LEVEL or N ** M > TENSOR_ENTRY_CAP:
        raise CapacityError(f"level {M} tensor over {N} coordinates exceeds the cap")
    values = path.values - path.values[0] if base_at_zero else path.values
    dtype = complex if np.iscomplexobj(values) else float
    increments = np.diff(values, axis=0).astype(dtype)
    sig: dict[int, np.ndarray] = {}
    for v in increments:
        seg = _segment_signature(v, M)
        sig = seg if not sig else _chen_product(sig, seg, M, N, dtype)
    if not sig:
        sig = {l: np.zeros((N,) * l, dtype=dtype) for l in range(1, M + 1)}
    return SignatureTensor(N, M, sig)


def lead_matrix(path: Path, rebase: bool = True) -> np.ndarray:
    """Antisymmetric signed-area matrix of the path.

    Per-segment closed form: L = (A - A^T) / 2 with
    A[i, j] = sum_k gamma_i(t_k) * (gamma_j(t_{k+1}) - gamma_j(t_k)).
    With ``rebase`` the first sample is subtracted first, yielding the
    antisymmetric part of the level-2 signature (translation invariant).
    With ``rebase=False`` the signed area is taken relative to the
    coordinate origin, which is the quantity the synchronized-sinusoid
    closed form :func:`analytic_ss_lead_sin` describes.  Exactly
    antisymmetric either way, and invariant under monotone
    reparametrization.
    """
    if np.iscomplexobj(path.values):
        raise ValueError("lead matrix requires a real-valued path")
    g = path.values - path.values[0] if rebase else path.values
    A = g[:-1].T @ np.diff(g, axis=0)
    return (A - A.T) / 2.0


def covariance_matrix(path: Path) -> np.ndarray:
    """Sample covariance across time (population 1/K normalization)."""
    if path.values.shape[0] < 2:
        raise ValueError("covariance needs at least two samples")
    centered = path.values - path.values.mean(axis=0)
    return (centered.T @ centered.conj()) / path.values.shape[0]


def regime_split(path: Path, bounds: RegimeBoundaries, ss_horizon: float | None = None,
                 stat: str = "lead", f: str = "identity") -> RegimeMatrices:
    """Per-regime lead or covariance matrices of the transformed path.

    Windows: clusterization [0, t_trans], transient [t_trans, t_ss],
    steady state [t_ss, t_ss + ss_horizon] (clipped to the data end).
    Each sub-path is re-based at its window start.  A missing t_ss drops
    the steady-state matrix and extends the transient to the data end.
    """
    if stat == "lead":
        compute = lead_matrix
    elif stat == "cov":
        compute = covariance_matrix
    else:
        raise ValueError(f"unknown statistic {stat!r}")
    g = transform(path, f)
    t_end = float(g.times[-1])
    t_trans = min(bounds.t_trans, t_end)
    windows: dict = {"clusterization": (g.times[0], t_trans)}
    mats: dict = {"clusterization": None, "transient": None, "steady_state": None}
    if t_trans > g.times[0]:
        mats["clusterization"] = compute(g.restrict(g.times[0], t_trans))
    if bounds.t_ss is not None:
        t_ss = min(bounds.t_ss, t_end)
        if t_ss > t_trans:
            mats["transient"] = compute(g.restrict(t_trans, t_ss))
            windows["transient"] = (t_trans, t_ss)
        if t_ss < t_end:
            horizon = t_end if ss_horizon is None else min(t_ss + ss_horizon, t_end)
            mats["steady_state"] = compute(g.restrict(t_ss, horizon))
            windows["steady_state"] = (t_ss, horizon)
    elif t_trans < t_end:
        mats["transient"] = compute(g.restrict(t_trans, t_end))
        windows["transient"] = (t_trans, t_end)
    return RegimeMatrices(mats["clusterization"], mats["transient"],
                          mats["steady_state"], windows)


def analytic_ss_signature_theta(omega: float, T: float, M: int) -> float:
    """Signature of a synchronized phase path: omega^M T^M / M! for any index."""
    return omega ** M * T ** M / math.factorial(M)


def analytic_ss_signature_exp(delta_thetas, omega: float, T: float,
                              index: tuple[int, ...]) -> complex:
    """Signature of e^{i theta} at steady state for one multi-index.

    Equals lambda_I (e^{i omega T} - 1)^M / M! with
    lambda_I = e^{i sum of offsets}; invariant under index permutations,
    hence the associated lead vanishes.
    """
    delta_thetas = np.asarray(delta_thetas, dtype=float)
    M = len(index)
    lam = np.exp(1j * delta_thetas[list(index)].sum())
    return lam * (np.exp(1j * omega * T) - 1.0) ** M / math.factorial(M)


def analytic_ss_signature_sin_pair(delta_i: float, delta_j: float,
                                   omega: float, T: float) -> float:
    """Four-term closed form for a level-2 sinusoid signature entry.

    Oscillator phases are omega * t + offset.  Note: the true based
    level-2 entry has the opposite sign on the final term; the numeric
    based signature therefore matches this expression only where
    sin(omega T + delta_j) = sin(delta_j).  Kept as stated for
    comparison; see ``analytic_ss_lead_sin`` for the same discrepancy in
    antisymmetrized form.
    """
    wT = omega * T
    return (0.5 * math.sin(wT) ** 2 * math.cos(delta_i + delta_j)
            + 0.25 * math.sin(2 * wT) * math.sin(delta_i + delta_j)
            + 0.5 * wT * math.sin(delta_i - delta_j)
            + (math.sin(wT + delta_j) - math.sin(delta_j)) * math.sin(delta_i))


def analytic_ss_lead_sin(delta_theta_ij: float, omega: float, T: float) -> float:
    """Stated lead of two synchronized sinusoids offset by delta_theta_ij:

        (sin(delta) / 2) * (omega T + sin(omega T))

    The numerically computed lead of the based path is
    (sin(delta) / 2) * (omega T - sin(omega T)) and of the origin-based
    path (omega T / 2) * sin(delta); this closed form agrees with both
    only where sin(omega T) = 0.
    """
    return 0.5 * math.sin(delta_theta_ij) * (omega * T + math.sin(omega * T))


def save_matrix(matrix: np.ndarray, prefix, *, transform_name: str = "identity",
                window: str = "full", based: bool = True) -> None:
    """Write an N x N matrix CSV plus a JSON sidecar of its provenance."""
    prefix = FsPath(prefix)
    np.savetxt(prefix.with_suffix(".csv"), matrix, delimiter=",")
    sidecar = {"transform": transform_name, "window": window,
               "based_at_window_start": based, "shape": list(matrix.shape)}
    prefix.with_suffix(".json").write_text(json.dumps(sidecar, indent=2),
                                           encoding="utf-8")
