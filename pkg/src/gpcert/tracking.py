"""Closed-loop tracking-error certificates for linear plants with GP compensation.

The error dynamics e' = A_theta e + b (f - mu) with A_theta = A - b theta^T
admit a scalar comparison system

    v' = (lambda_max + L_sigma zeta sqrt(beta)) v + zeta eta(x_ref(t))

whose solution dominates ||e(t)|| with the confidence of the underlying
uniform error bound.  zeta = ||U|| ||U^{-1} b|| comes from the complex
eigendecomposition of A_theta (matrix norms are spectral norms).  The module
also provides the stationary maximum bound, the decay ratio kappa, the grid
constant satisfying the density condition beta >= gamma^2 rho k(0) / 2, and
the no-compensation baseline gain requirement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bnd
from . import kernels
from .errors import InfeasibilityError, UnsupportedOperationError
from .gp import GPModel


@dataclass(frozen=True)
class LinearPlant:
    """Known linear part (A, b) of the plant; (A, b) must be controllable."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if b.shape[0] != A.shape[0]:
            raise ValueError("b does not match the dimension of A")
        ctrb = np.hstack([np.linalg.matrix_power(A, k) @ b[:, None] for k in range(A.shape[0])])
        if np.linalg.matrix_rank(ctrb, tol=1e-8 * max(1.0, np.abs(ctrb).max())) < A.shape[0]:
            raise ValueError("(A, b) is not controllable")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dimension(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class ClosedLoop:
    """Eigendecomposition artifacts of A_theta = A - b theta^T."""

    plant: LinearPlant
    theta: np.ndarray
    A_theta: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    lambda_max: float
    zeta: float
    stable: bool


def zeta_constant(U: np.ndarray, b: np.ndarray) -> float:
    """Conditioning constant ||U|| ||U^{-1} b|| (spectral / Euclidean norms)."""
    return float(np.linalg.norm(U, 2) * np.linalg.norm(np.linalg.inv(U) @ np.asarray(b, dtype=complex)))


def closed_loop(plant: LinearPlant, theta) -> ClosedLoop:
    """Build the closed loop for gains theta; eigenvalues must be distinct.

    A positive-real-part spectrum is flagged (``stable=False``) rather than
    rejected; bounds computed from an unstable loop are meaningless but the
    decomposition itself is well defined.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != plant.dimension:
        raise ValueError("gain vector does not match the plant dimension")
    A_theta = plant.A - np.outer(plant.b, theta)
    eigvals, U = np.linalg.eig(A_theta)
    radius = float(np.abs(eigvals).max())
    sep = np.abs(eigvals[:, None] - eigvals[None, :]) + np.eye(len(eigvals)) * (radius + 1.0)
    if sep.min() <= 1e-8 * max(radius, 1.0):
        raise UnsupportedOperationError(
            "repeated eigenvalues: the diagonalization-based bounds do not apply"
        )
    lam = float(eigvals.real.max())
    zeta = zeta_constant(U, plant.b)
    return ClosedLoop(
        plant=plant,
        theta=theta,
        A_theta=A_theta,
        eigenvalues=eigvals,
        U=U,
        lambda_max=lam,
        zeta=zeta,
        stable=lam < 0.0,
    )


def contraction_rate(loop: ClosedLoop, L_sigma: float, beta: float) -> float:
    """Drift coefficient lambda_max + L_sigma zeta sqrt(beta) of the comparison ODE."""
    return loop.lambda_max + L_sigma * loop.zeta * math.sqrt(beta)


def gain_condition(loop: ClosedLoop, L_sigma: float, beta: float) -> bool:
    """True iff the comparison dynamics are contracting (strict inequality)."""
    return contraction_rate(loop, L_sigma, beta) < 0.0


def initial_bound(loop: ClosedLoop, e0) -> float:
    """Comparison initial condition ||U|| ||U^{-1} e(0)||."""
    e0 = np.asarray(e0, dtype=float)
    return float(np.linalg.norm(loop.U, 2) * np.linalg.norm(np.linalg.inv(loop.U) @ e0.astype(complex)))


def tracking_bound_ode(
    loop: ClosedLoop,
    eta_ref,
    L_sigma: float,
    beta: float,
    v0: float,
    horizon: float,
    dt: float,
) -> np.ndarray:
    """Integrate the comparison ODE with fixed-step RK4 at pitch dt.

    ``eta_ref`` maps time to the error bound along the reference.  Returns
    v at times 0, dt, ..., matching the simulator's sample grid so the
    certificate can be compared sample-by-sample.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    a = contraction_rate(loop, L_sigma, beta)
    zeta = loop.zeta

    def rhs(t, v):
        return a * v + zeta * eta_ref(t)

    n = int(round(horizon / dt))
    out = np.empty(n + 1)
    out[0] = v = float(v0)
    t = 0.0
    for k in range(n):
        k1 = rhs(t, v)
        k2 = rhs(t + 0.5 * dt, v + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, v + 0.5 * dt * k2)
        k4 = rhs(t + dt, v + dt * k3)
        v = v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        out[k + 1] = v
    return out


def max_tracking_bound(loop: ClosedLoop, sup_eta_ref: float, L_sigma: float, beta: float) -> float:
    """Stationary bound -zeta sup eta(x_ref) / (lambda_max + L_sigma zeta sqrt(beta)).

    Requires the gain condition (assumes e(0) = 0).
    """
    a = contraction_rate(loop, L_sigma, beta)
    if a >= 0.0:
        raise InfeasibilityError(
            f"gain condition violated: lambda_max + L_sigma zeta sqrt(beta) = {a:.4g} >= 0"
        )
    return -loop.zeta * sup_eta_ref / a


def kappa(loop: ClosedLoop, L_sigma: float, beta: float) -> float:
    """Decay ratio kappa = -2 zeta sqrt(beta) / (lambda_max + L_sigma zeta sqrt(beta))."""
    a = contraction_rate(loop, L_sigma, beta)
    if a >= 0.0:
        raise InfeasibilityError("kappa undefined: gain condition violated")
    return -2.0 * loop.zeta * math.sqrt(beta) / a


def lambda_for_kappa(kappa_target: float, zeta: float, L_sigma: float, beta: float) -> float:
    """Invert kappa for the eigenvalue: lambda_max = -2 zeta sqrt(beta)/kappa - L_sigma zeta sqrt(beta)."""
    if not kappa_target > 0:
        raise ValueError("kappa must be positive")
    sb = math.sqrt(beta)
    return -2.0 * zeta * sb / kappa_target - L_sigma * zeta * sb


def scalar_gain_vector(theta: float) -> np.ndarray:
    """Benchmark gain family theta_1 = theta_2 = theta, i.e. the vector [theta^2, theta].

    For the double-integrator plant this places the eigenvalue pair
    theta (-1 +- i sqrt(3)) / 2, so -lambda_max = theta / 2.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    return np.array([theta * theta, theta])


def solve_scalar_gain(plant: LinearPlant, lambda_requirement) -> ClosedLoop:
    """Fixed-point solve for the scalarized gain against a zeta-dependent target.

    ``lambda_requirement`` maps zeta to the required -lambda_max.  zeta varies
    slowly with the eigenvalue magnitude, so the iteration converges in a few
    rounds; failure to converge within 50 raises.
    """
    zeta = float(np.linalg.norm(plant.b))
    loop = None
    for _ in range(50):
        q = lambda_requirement(zeta)
        if not q > 0:
            raise ValueError("required eigenvalue magnitude must be positive")
        loop = closed_loop(plant, scalar_gain_vector(2.0 * q))
        if abs(loop.zeta - zeta) <= 1e-12 * max(1.0, zeta):
            return loop
        zeta = loop.zeta
    raise InfeasibilityError("gain/zeta fixed point did not converge in 50 rounds")


def gains_for_kappa(plant: LinearPlant, kappa_target: float, L_sigma: float, beta: float) -> ClosedLoop:
    """Scalarized gains achieving a prescribed kappa (fixed point over zeta)."""
    return solve_scalar_gain(
        plant, lambda zeta: -lambda_for_kappa(kappa_target, zeta, L_sigma, beta)
    )


def tau_for_density(
    model: GPModel,
    rho_lower: float,
    box: bnd.DomainBox,
    delta: float,
    L_f: float,
    L_k: float,
) -> float:
    """Largest tau with beta_X(tau) >= gamma^2(tau) rho k(0) / 2.

    beta grows and gamma shrinks as tau decreases, so the feasible set is an
    interval (0, tau*]; geometric bisection over [1e-12, r] returns the
    least-conservative feasible value found.
    """
    if rho_lower < 0:
        raise ValueError("rho lower bound must be nonnegative")
    spec = model.kernel
    if not spec.stationary:
        raise UnsupportedOperationError("density-matched tau needs a stationary kernel")
    k0 = spec.signal_variance
    L_sigma = kernels.stddev_lipschitz(spec, box)
    L_mu = bnd.mean_lipschitz(model, L_k)

    def feasible(tau: float) -> bool:
        b = bnd.beta(tau, delta, box)
        om = bnd.stddev_modulus(spec, tau, L_k, L_sigma)
        g = bnd.gamma(tau, L_mu, L_f, b, om)
        return b >= g * g * rho_lower * k0 / 2.0

    hi = box.edge
    if feasible(hi):
        return hi
    lo = 1e-12
    if not feasible(lo):
        raise InfeasibilityError("no feasible tau in [1e-12, r] for the density condition")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def baseline_gain(zeta: float, f_bar: float, e_bar: float) -> float:
    """Required -lambda_max = zeta f_bar / e_bar without model compensation."""
    if not e_bar > 0:
        raise ValueError("target error must be positive")
    return zeta * f_bar / e_bar
