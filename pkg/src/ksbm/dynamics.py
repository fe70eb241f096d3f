"""Integration of the coupled-oscillator model and its reduced forms.

The full model is

    dtheta_i/dt = omega_i + sum_j C[i, j] * sin(theta_j - theta_i)

integrated with fixed-step RK4 (deterministic) or forward Euler-Maruyama
(Brownian phase noise).  Phases live on the real line and are never
wrapped.  Reduced models track per-community mean phases (mean-field) or
mean phases plus variances (Gaussian approximation); the scalar variance
ODEs locate the clusterization-to-mean-field transition time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import CommunityAssignment, CouplingGraph

__all__ = [
    "KsbmParams",
    "Trajectory",
    "GaussianState",
    "RegimeBoundaries",
    "IntegrationDivergedError",
    "NoPhaseLockError",
    "sample_frequencies",
    "uniform_initial_phases",
    "integrate_full",
    "integrate_stochastic",
    "integrate_mean_field",
    "integrate_variance_dominated_identical",
    "community_stats_folded",
    "integrate_variance_dominated",
    "variance_steady_state_bound",
    "integrate_gaussian_full",
    "transition_time",
    "detect_steady_state",
    "community_stats",
    "steady_state_deviation",
]


class IntegrationDivergedError(RuntimeError):
    """State became non-finite; carries the last valid time."""

    def __init__(self, t_last: float):
        super().__init__(f"integration diverged, last valid time {t_last:g} s")
        self.t_last = t_last


class NoPhaseLockError(ValueError):
    """Requested steady-state deviation outside the locking regime."""


@dataclass
class KsbmParams:
    """Full-model parameters: coupling graph, frequency statistics, noise.

    ``mu`` holds one mean intrinsic frequency per community (rad/s);
    ``theta0`` may be None, in which case initial phases are drawn
    uniformly on [-pi, pi) from the seed.
    """

    graph: CouplingGraph
    mu: np.ndarray
    sigma: float
    theta0: np.ndarray | None = None
    seed: int = 0
    brownian_b: float = 0.0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if self.mu.shape != (self.graph.communities.n,):
            raise ValueError("mu must hold one entry per community")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.brownian_b < 0:
            raise ValueError("brownian_b must be nonnegative")
        if self.theta0 is not None:
            self.theta0 = np.asarray(self.theta0, dtype=float)
            if not np.all(np.isfinite(self.theta0)):
                raise ValueError("initial phases must be finite")


@dataclass
class Trajectory:
    """Uniform time grid with per-oscillator unwrapped phases.

    ``phases`` has shape (K, N); ``omegas`` are the realized intrinsic
    frequencies (empty for reduced models without a realization).
    """

    times: np.ndarray
    phases: np.ndarray
    omegas: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_oscillators(self) -> int:
        return self.phases.shape[1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def frequencies(self) -> np.ndarray:
        """Central finite-difference estimate of dtheta/dt on the grid."""
        return np.gradient(self.phases, self.times, axis=0)

    def to_csv(self, path) -> None:
        header = "time," + ",".join(f"theta_{i}" for i in range(self.n_oscillators))
        np.savetxt(path, np.column_stack([self.times, self.phases]),
                   delimiter=",", header=header, comments="")


@dataclass
class GaussianState:
    """Reduced-model state: community mean phases and variances over time."""

    times: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    clamped: bool = False


@dataclass
class RegimeBoundaries:
    """Regime split points: end of clusterization, start of steady state."""

    t_trans: float
    t_ss: float | None = None

    def __post_init__(self):
        if self.t_trans < 0:
            raise ValueError("t_trans must be nonnegative")
        if self.t_ss is not None and self.t_ss <= self.t_trans:
            raise ValueError("t_ss must exceed t_trans")


def sample_frequencies(mu, sigma: float, n: int, m: int, seed: int) -> np.ndarray:
    """Draw intrinsic frequencies, normal around each community mean."""
    mu = np.asarray(mu, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    return np.repeat(mu, m) + sigma * rng.standard_normal(n * m)


def uniform_initial_phases(n_oscillators: int, seed: int) -> np.ndarray:
    """Initial phases uniform on [-pi, pi)."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-np.pi, np.pi, size=n_oscillators)


def _drift(theta: np.ndarray, omega: np.ndarray, coupling: np.ndarray) -> np.ndarray:
    # sin(theta_j - theta_i) weighted row-wise by the coupling matrix
    return omega + np.einsum("ij,ij->i", coupling, np.sin(theta[None, :] - theta[:, None]))

def _realize(params: KsbmParams) -> tuple[np.ndarray, np.ndarray]:
    comm = params.graph.communities
    omega = sample_frequencies(params.mu, params.sigma, comm.n, comm.m, params.seed)
    if params.theta0 is not None:
        theta0 = params.theta0.copy()
    else:
        theta0 = uniform_initial_phases(comm.size, params.seed + 1)
    return omega, theta0


def _check_finite(theta: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(theta)):
        raise IntegrationDivergedError(t)


def integrate_full(params: KsbmParams, dt: float, T: float,
                   substeps: int = 1) -> Trajectory:
    """Deterministic RK4 integration on the real line.

    Output is sampled every ``dt``; each output step is subdivided into
    ``substeps`` internal RK4 steps so that output resolution and
    integration error can be controlled separately.
    """
    if dt <= 0 or T <= dt:
        raise ValueError("need 0 < dt < T")
    if params.brownian_b != 0:
        raise ValueError("deterministic integrator requires brownian_b = 0")
    omega, theta = _realize(params)
    C = params.graph.coupling
    n_out = int(round(T / dt))
    h = dt / substeps
    out = np.empty((n_out + 1, theta.size))
    out[0] = theta
    for k in range(n_out):
        for _ in range(substeps):
            k1 = _drift(theta, omega, C)
            k2 = _drift(theta + 0.5 * h * k1, omega, C)
            k3 = _drift(theta + 0.5 * h * k2, omega, C)
            k4 = _drift(theta + h * k3, omega, C)
            theta = theta + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_finite(theta, (k + 1) * dt)
        out[k + 1] = theta
    times = np.arange(n_out + 1) * dt
    return Trajectory(times, out, omega)


def integrate_stochastic(params: KsbmParams, dt: float, T: float,
                         substeps: int = 1) -> Trajectory:
    """Forward Euler-Maruyama with Brownian phase noise of scale ``b``.

    With ``b = 0`` this reduces to plain forward Euler on the drift.
    """
    if dt <= 0 or T <= dt:
        raise ValueError("need 0 < dt < T")
    omega, theta = _realize(params)
    C = params.graph.coupling
    b = params.brownian_b
    rng = np.random.default_rng(params.seed + 2)
    n_out = int(round(T / dt))
    h = dt / substeps
    sqrt_h = math.sqrt(h)
    out = np.empty((n_out + 1, theta.size))
    out[0] = theta
    for k in range(n_out):
        for _ in range(substeps):
            theta = theta + h * _drift(theta, omega, C)
            if b != 0:
                theta = theta + b * sqrt_h * rng.standard_normal(theta.size)
        _check_finite(theta, (k + 1) * dt)
        out[k + 1] = theta
    times = np.arange(n_out + 1) * dt
    return Trajectory(times, out, omega)


def integrate_mean_field(n: int, m: int, P: np.ndarray, C: np.ndarray,
                         mu: np.ndarray, theta_bar0: np.ndarray,
                         dt: float, T: float, t0: float = 0.0,
                         substeps: int = 1) -> Trajectory:
    """Reduced model of one average oscillator per community.

        dtheta_r/dt = mu_r + m * sum_s P[r, s] C[r, s] sin(theta_s - theta_r)

    ``theta_bar0`` are the community mean phases at ``t0`` (typically read
    off a full trajectory at the transition time).
    """
    P = np.asarray(P, dtype=float)
    C = np.asarray(C, dtype=float)
    mu = np.asarray(mu, dtype=float)
    theta = np.asarray(theta_bar0, dtype=float).copy()
    W = m * P * C
    n_out = int(round(T / dt))
    h = dt / substeps

    def drift(th):
        return mu + np.einsum("rs,rs->r", W, np.sin(th[None, :] - th[:, None]))

    out = np.empty((n_out + 1, n))
    out[0] = theta
    for k in range(n_out):
        for _ in range(substeps):
            k1 = drift(theta)
            k2 = drift(theta + 0.5 * h * k1)
            k3 = drift(theta + 0.5 * h * k2)
            k4 = drift(theta + h * k3)
            theta = theta + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_finite(theta, t0 + (k + 1) * dt)
        out[k + 1] = theta
    times = t0 + np.arange(n_out + 1) * dt
    return Trajectory(times, out, mu.copy())


def _rk4_scalar(f, y0: float, dt: float, T: float) -> tuple[np.ndarray, np.ndarray]:
    n_out = int(round(T / dt))
    ys = np.empty(n_out + 1)
    ys[0] = y = y0
    for k in range(n_out):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[k + 1] = y
    return np.arange(n_out + 1) * dt, ys


def integrate_variance_dominated_identical(kappa: float, n: int, V0: float,
                                           dt: float, T: float):
    """Intra-community variance ODE without frequency heterogeneity:

        dV/dt = -(2 kappa / n) V exp(-V)

    Returns (times, V); V is monotone nonincreasing for kappa > 0.
    """
    if V0 < 0:
        raise ValueError("V0 must be nonnegative")
    rate = 2.0 * kappa / n
    return _rk4_scalar(lambda v: -rate * v * math.exp(-max(v, 0.0)), V0, dt, T)


def integrate_variance_dominated(kappa: float, n: int, sigma: float, V0: float,
                                 dt: float, T: float):
    """Variance ODE with the heterogeneity drive at its analytic bound:

        dV/dt = eps - (2 kappa / n) V exp(-V),   eps = sigma^2 pi n / kappa

    Returns (times, V).  With sigma = 0 this matches the identical-frequency
    curve on the same grid.
    """
    if V0 < 0:
        raise ValueError("V0 must be nonnegative")
    eps = sigma * sigma * math.pi * n / kappa
    rate = 2.0 * kappa / n
    return _rk4_scalar(lambda v: eps - rate * v * math.exp(-max(v, 0.0)), V0, dt, T)


def variance_steady_state_bound(kappa: float, n: int, sigma: float) -> float | None:
    """Upper bound on the clustered steady-state variance, or None.

    A stable clustered steady state exists when
    ``e * sigma^2 * pi * n^2 < 2 * kappa^2``; its variance is bounded by the
    smallest fixed point of ``v = (pi / 2) (sigma n / kappa)^2 exp(v)``.
    """
    if math.e * sigma * sigma * math.pi * n * n >= 2.0 * kappa * kappa:
        return None
    c = 0.5 * math.pi * (sigma * n / kappa) ** 2
    if c == 0.0:
        return 0.0
    # fixed-point iteration; converges since the smallest root has c e^v < 1
    v = c
    for _ in range(200):
        v_new = c * math.exp(v)
        if abs(v_new - v) < 1e-15:
            break
        v = v_new
    return v


def integrate_gaussian_full(kappa: float, N: int, n: int, mu: np.ndarray,
                            sigma: float, means0: np.ndarray, V0: np.ndarray,
                            dt: float, T: float) -> GaussianState:
    """Coupled means-and-variances reduction of the assortative model.

        dtheta_r/dt = mu_r + (2 kappa / (N (n-1))) e^{-V_r/2}
                          * sum_s sin(theta_s - theta_r) e^{-V_s/2}
        dV_r/dt = eps - (2 kappa / n) V_r e^{-V_r}
                  - (4 kappa / (N (n-1))) V_r e^{-V_r/2}
                    * sum_{s != r} cos(theta_s - theta_r) e^{-V_s/2}

    with eps at its analytic bound sigma^2 pi n / kappa.  Variances that
    dip below zero are clamped to zero and flagged.
    """
    mu = np.asarray(mu, dtype=float)
    means = np.asarray(means0, dtype=float).copy()
    V = np.asarray(V0, dtype=float).copy()
    if means.shape != (n,) or V.shape != (n,) or mu.shape != (n,):
        raise ValueError("means0, V0 and mu must have one entry per community")
    eps = sigma * sigma * math.pi * n / kappa
    c_pair = 2.0 * kappa / (N * (n - 1)) if n > 1 else 0.0
    c_self = 2.0 * kappa / n

    def drift(state):
        th, v = state[:n], np.maximum(state[n:], 0.0)
        e_half = np.exp(-0.5 * v)
        sin_d = np.sin(th[None, :] - th[:, None])
        cos_d = np.cos(th[None, :] - th[:, None])
        np.fill_diagonal(cos_d, 0.0)
        dth = mu + c_pair * e_half * (sin_d * e_half[None, :]).sum(axis=1)
        dv = (eps - c_self * v * np.exp(-v)
              - 2.0 * c_pair * v * e_half * (cos_d * e_half[None, :]).sum(axis=1))
        return np.concatenate([dth, dv])

    n_out = int(round(T / dt))
    state = np.concatenate([means, V])
    out_means = np.empty((n_out + 1, n))
    out_vars = np.empty((n_out + 1, n))
    out_means[0], out_vars[0] = means, V
    clamped = False
    for k in range(n_out):
        k1 = drift(state)
        k2 = drift(state + 0.5 * dt * k1)
        k3 = drift(state + 0.5 * dt * k2)
        k4 = drift(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(state[n:] < 0):
            clamped = clamped or bool(np.any(state[n:] < -1e-9))
            state[n:] = np.maximum(state[n:], 0.0)
        out_means[k + 1] = state[:n]
        out_vars[k + 1] = state[n:]
    times = np.arange(n_out + 1) * dt
    return GaussianState(times, out_means, out_vars, clamped)


def transition_time(times: np.ndarray, variance: np.ndarray, m: int,
                    nu: float = 0.0) -> float | None:
    """First time the variance curve drops to ``m**-(2 + nu)``.

    Linearly interpolates between the bracketing grid points; returns None
    if the curve never crosses (non-clustering regime).
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    thresh = float(m) ** (-(2.0 + nu))
    below = variance <= thresh
    if not below.any():
        return None
    k = int(np.argmax(below))
    if k == 0:
        return 0.0
    v0, v1 = variance[k - 1], variance[k]
    t0, t1 = times[k - 1], times[k]
    if v0 == v1:
        return float(t1)
    return float(t0 + (v0 - thresh) / (v0 - v1) * (t1 - t0))


def detect_steady_state(traj: Trajectory, tol: float, window: float) -> float | None:
    """Earliest time from which all frequencies agree within ``tol``.

    Frequencies are central finite differences on the output grid; the
    max-min spread must stay below ``tol`` throughout ``[t, t + window]``.
    """
    if traj.n_oscillators == 1:
        return 0.0
    freqs = traj.frequencies()
    spread = freqs.max(axis=1) - freqs.min(axis=1)
    dt = traj.dt
    w = max(int(round(window / dt)), 1)
    if w >= spread.size:
        raise ValueError("trajectory shorter than one detection window")
    ok = spread < tol
    # earliest index k with ok[k : k + w + 1] all true
    count = 0
    for k in range(ok.size):
        count = count + 1 if ok[k] else 0
        if count >= w + 1:
            return float(traj.times[k - w])
    return None


def community_stats(traj: Trajectory, communities: CommunityAssignment):
    """Per-community mean phase and population variance at every sample."""
    if traj.n_oscillators != communities.size:
        raise ValueError("trajectory and community assignment disagree on N")
    K = traj.phases.shape[0]
    means = np.empty((K, communities.n))
    variances = np.empty((K, communities.n))
    for r in range(communities.n):
        block = traj.phases[:, communities.members(r)]
        means[:, r] = block.mean(axis=1)
        variances[:, r] = block.var(axis=1)
    return means, variances


def community_stats_folded(traj: Trajectory, communities: CommunityAssignment):
    """Circular per-community mean phase and dispersion at every sample.

    Unwrapped phases in one community can settle onto the same angle
    modulo 2*pi while remaining far apart on the real line; plain
    statistics then never show the collapse.  Here the mean is the
    argument of the mean resultant e^{i theta}, unwrapped over time so it
    stays continuous, and the dispersion is the population variance of
    the deviations wrapped to (-pi, pi].
    """
    if traj.n_oscillators != communities.size:
        raise ValueError("trajectory and community assignment disagree on N")
    K = traj.phases.shape[0]
    means = np.empty((K, communities.n))
    variances = np.empty((K, communities.n))
    for r in range(communities.n):
        block = traj.phases[:, communities.members(r)]
        mean = np.unwrap(np.angle(np.exp(1j * block).mean(axis=1)))
        dev = np.angle(np.exp(1j * (block - mean[:, None])))
        means[:, r] = mean
        variances[:, r] = (dev ** 2).mean(axis=1)
    return means, variances


def steady_state_deviation(omega_i: float, omega_ref: float,
                           kappa: float, n: int) -> float:
    """Phase offset of a locked oscillator: arcsin(n (omega_i - omega_ref) / kappa)."""
    x = n * (omega_i - omega_ref) / kappa
    if abs(x) > 1:
        raise NoPhaseLockError(
            f"|n (omega_i - omega_ref) / kappa| = {abs(x):g} > 1: no phase locking")
    return math.asin(x)
