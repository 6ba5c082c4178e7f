"""Deterministic fixed-step simulation of the benchmark closed loop.

Runs use classical RK4 with a constant pitch so that identical seeds and
configs reproduce outputs bit for bit and so the comparison-ODE certificate
can be sampled on the same grid.  Noise enters only the measurements
(y = f(x) + eps), never the plant dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DivergenceError, IllConditionedDataError
from .gp import GPModel, TrainingSet
from .kernels import KernelSpec, gram
from .tracking import ClosedLoop, LinearPlant


def integrate(dynamics, x0, horizon: float, dt: float):
    """Classical 4th-order Runge-Kutta at fixed pitch dt.

    Returns (times, states) with states[k] = x(k dt).  A non-finite state
    aborts with the offending time stamp.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x0, dtype=float).copy()
    n = int(round(horizon / dt))
    times = np.arange(n + 1) * dt
    states = np.empty((n + 1, x.shape[0]))
    states[0] = x
    for k in range(n):
        t = times[k]
        k1 = dynamics(t, x)
        k2 = dynamics(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = dynamics(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = dynamics(t + dt, x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"state diverged at t = {times[k + 1]:.6g}", time=float(times[k + 1]))
        states[k + 1] = x
    return times, states


def benchmark_system():
    """Nonlinearity, input gain and plant of the simulation benchmark.

    f(x) = 1 - sin(2 x1) + 1 / (1 + exp(-x2)),  g(x) = 1 + sin(x2 / 2) / 2,
    with the feedback-linearized double integrator A = [[0,1],[0,0]],
    b = [0,1].  g is bounded away from zero (minimum 1/2), so dividing the
    nominal control by it is always well defined.
    """

    def f(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        return 1.0 - np.sin(2.0 * x1) + 1.0 / (1.0 + np.exp(-x2))

    def g(x):
        x = np.asarray(x, dtype=float)
        return 1.0 + 0.5 * np.sin(x[..., 1] / 2.0)

    plant = LinearPlant(A=np.array([[0.0, 1.0], [0.0, 0.0]]), b=np.array([0.0, 1.0]))
    return f, g, plant


@dataclass(frozen=True)
class ReferenceSpec:
    """Sinusoidal reference for the double integrator.

    x_ref(t) = [a sin(w t), a w cos(w t)] solves x_ref' = A x_ref + b r_ref
    with r_ref(t) = -a w^2 sin(w t).
    """

    amplitude: float = 2.0
    frequency: float = 1.0

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.frequency

    def state(self, t):
        t = np.asarray(t, dtype=float)
        a, w = self.amplitude, self.frequency
        return np.stack([a * np.sin(w * t), a * w * np.cos(w * t)], axis=-1)

    def signal(self, t):
        t = np.asarray(t, dtype=float)
        a, w = self.amplitude, self.frequency
        return -a * w * w * np.sin(w * t)


@dataclass(frozen=True)
class SimRun:
    """One closed-loop roll-out: trajectories plus the raw measurement set."""

    times: np.ndarray
    states: np.ndarray
    reference_states: np.ndarray
    controls: np.ndarray
    measurements: TrainingSet
    seed: int

    @property
    def error_norms(self) -> np.ndarray:
        return np.linalg.norm(self.states - self.reference_states, axis=1)

    @property
    def max_speed(self) -> float:
        dt = float(self.times[1] - self.times[0])
        dx = np.diff(self.states, axis=0) / dt
        return float(np.linalg.norm(dx, axis=1).max())


def run_closed_loop(
    loop: ClosedLoop,
    model: GPModel,
    ref: ReferenceSpec,
    horizon: float,
    fine_dt: float,
    seed: int,
    nonlinearity,
    input_gain=None,
    noise_variance: float | None = None,
) -> SimRun:
    """Simulate u = -theta^T (x - x_ref) + r_ref - mu(x) against the true plant.

    The sign convention matches the error dynamics e' = (A - b theta^T) e +
    b (f - mu).  When ``input_gain`` is given the physically applied input is
    the nominal one divided by g(x) (exact knowledge of g); the recorded
    control is the applied one.  Measurements y = f(x) + eps are taken at
    every grid point with eps drawn from the seeded generator.
    """
    A, b = loop.plant.A, loop.plant.b
    theta = loop.theta
    predict = model.mean_function()

    def dynamics(t, x):
        e = x - ref.state(t)
        u_nom = -float(theta @ e) + float(ref.signal(t)) - predict(x)
        return A @ x + b * (u_nom + float(nonlinearity(x)))

    x0 = ref.state(0.0)
    times, states = integrate(dynamics, x0, horizon, fine_dt)
    ref_states = ref.state(times)

    errors = states - ref_states
    mu = model.predict_mean(states) if len(model) else np.zeros(states.shape[0])
    u_nom = -(errors @ theta) + ref.signal(times) - mu
    controls = u_nom / input_gain(states) if input_gain is not None else u_nom

    if noise_variance is None:
        noise_variance = model.data.noise_variance
    rng = np.random.default_rng(seed)
    f_vals = np.asarray(nonlinearity(states), dtype=float)
    eps = rng.normal(0.0, math.sqrt(noise_variance), size=f_vals.shape) if noise_variance > 0 else 0.0
    measurements = TrainingSet(states, f_vals + eps, max(noise_variance, 1e-300))
    return SimRun(times, states, ref_states, controls, measurements, seed)


def sample_prior_function(spec: KernelSpec, grid, seed: int) -> np.ndarray:
    """One joint Gaussian draw of the prior on a finite grid (1e-10 jitter)."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    K = gram(spec, grid) + 1e-10 * np.eye(grid.shape[0])
    try:
        L = scipy.linalg.cholesky(K, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise IllConditionedDataError(f"prior covariance factorization failed: {exc}") from None
    z = np.random.default_rng(seed).standard_normal(grid.shape[0])
    return L @ z
