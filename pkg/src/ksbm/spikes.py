"""Spike-train ingestion: binning, exponential filtering, trial concatenation.

Spike tables (unit_id, trial_id, spike_time_s) are binned per unit and
trial, smoothed with a causal normalized exponential kernel, and the
filtered trials are concatenated in trial order into one multivariate
path suitable for signature and lead-matrix analysis.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from .signatures import Path

__all__ = ["SpikeIngestConfig", "exponential_kernel", "ingest_spikes"]


@dataclass
class SpikeIngestConfig:
    """Binning and filter parameters.

    ``trial_durations`` optionally fixes each trial's length in seconds;
    without it a trial spans up to its latest spike (rounded up to a
    full bin).
    """

    bin_width: float = 0.002
    tau: float = 0.040
    trial_durations: dict | None = None

    def __post_init__(self):
        if self.bin_width <= 0 or self.tau <= 0:
            raise ValueError("bin width and tau must be positive")


def exponential_kernel(bin_width: float, tau: float, cutoff: float = 1e-8) -> np.ndarray:
    """Causal exponential decay weights e^{-k dt / tau}, normalized to unit sum.

    Support is truncated where a weight would fall below ``cutoff``
    relative to the peak.
    """
    if bin_width <= 0 or tau <= 0:
        raise ValueError("bin width and tau must be positive")
    n_taps = int(math.ceil(-math.log(cutoff) * tau / bin_width)) + 1
    weights = np.exp(-np.arange(n_taps) * bin_width / tau)
    return weights / weights.sum()


def _load_rows(source):
    """Accept a CSV path or an iterable of (unit_id, trial_id, spike_time_s)."""
    if isinstance(source, (str, FsPath)):
        with open(source, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            required = {"unit_id", "trial_id", "spike_time_s"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise ValueError("spike CSV needs unit_id, trial_id, spike_time_s columns")
            return [(row["unit_id"], row["trial_id"], float(row["spike_time_s"]))
                    for row in reader]
    return [(str(u), str(t), float(s)) for u, t, s in source]


def ingest_spikes(source, config: SpikeIngestConfig | None = None) -> tuple[Path, list[str]]:
    """Bin, filter, and concatenate spike trains into one path.

    Returns the path (rows are time samples, columns are units sorted by
    unit id; trials concatenated in sorted trial order) together with
    the unit id order.
    """
    config = config or SpikeIngestConfig()
    rows = _load_rows(source)
    if not rows:
        raise ValueError("no spikes provided")
    dt = config.bin_width
    units = sorted({u for u, _, _ in rows})
    if config.trial_durations is not None:
        durations = {str(t): float(d) for t, d in config.trial_durations.items()}
        for _, t, s in rows:
            if t not in durations:
                raise ValueError(f"spike references unknown trial {t!r}")
            if not 0 <= s <= durations[t]:
                raise ValueError(f"spike time {s} outside trial {t!r} bounds")
        trials = sorted(durations)
    else:
        trials = sorted({t for _, t, _ in rows})
        durations = {t: 0.0 for t in trials}
        for _, t, s in rows:
            if s < 0:
                raise ValueError("negative spike time")
            durations[t] = max(durations[t], s)
    unit_index = {u: k for k, u in enumerate(units)}
    kernel = exponential_kernel(dt, config.tau)
    pieces = []
    for trial in trials:
        n_bins = max(1, int(math.ceil(durations[trial] / dt - 1e-9)))
        counts = np.zeros((n_bins, len(units)))
        for u, t, s in rows:
            if t != trial:
                continue
            b = min(int(s / dt), n_bins - 1)
            counts[b, unit_index[u]] += 1.0
        filtered = np.empty_like(counts)
        for k in range(len(units)):
            filtered[:, k] = np.convolve(counts[:, k], kernel)[:n_bins]
        pieces.append(filtered)
    values = np.concatenate(pieces, axis=0)
    times = dt * np.arange(values.shape[0])
    return Path(times, values), units
