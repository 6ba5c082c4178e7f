"""Probabilistic uniform prediction-error bounds and their constants.

The headline quantity is

    eta(x) = sqrt(beta_X(tau)) * sigma(x) + gamma(tau)

which bounds |f(x) - mu(x)| jointly over a compact box with probability at
least 1 - delta when the unknown function is a sample of the prior.  The
supporting constants are all computable from the prior and the data:

* ``covering_number_bound`` / ``beta``  -- confidence scaling from a
  hypercube covering of the domain,
* ``mean_lipschitz``                    -- L_mu from the kernel Lipschitz
  constant and the cached weight vector,
* ``stddev_modulus``                    -- modulus of continuity of sigma,
  the pointwise minimum of the sqrt(2 L_k tau) rate and the stationary
  linear rate L_sigma * tau (both are valid moduli),
* ``noise_norm_bound``                  -- chi-squared bound on ||eps||^2,
* ``expected_sup_bound`` / ``sample_sup_bound`` / ``probabilistic_lipschitz``
  -- high-probability Lipschitz constants derived from the prior via the
  expected-supremum (metric entropy) and Borell-TIS routes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, UnsupportedOperationError
from .gp import GPModel
from .kernels import KernelSpec

_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned hypercube: dimension d, edge length r, center point."""

    dimension: int
    edge: float
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        if not self.edge > 0:
            raise ValueError("edge length must be positive")
        c = np.zeros(self.dimension) if self.center is None else np.asarray(self.center, dtype=float)
        if c.shape != (self.dimension,):
            raise ValueError("center does not match the box dimension")
        object.__setattr__(self, "center", c)

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.abs(x - self.center) <= 0.5 * self.edge + tol))


@dataclass(frozen=True)
class BoundParams:
    """Inputs of the uniform bound: grid constant, confidence, Lipschitz data."""

    tau: float
    delta: float
    L_f: float
    delta_L: float | None = None
    L_f_source: str = "given"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.L_f < 0:
            raise ValueError("L_f must be nonnegative")
        if self.delta_L is not None and not 0 < self.delta_L < 1:
            raise ValueError("delta_L must lie in (0, 1)")
        if self.L_f_source not in ("given", "probabilistic"):
            raise ValueError("L_f_source must be 'given' or 'probabilistic'")


def covering_number_bound(tau: float, box: DomainBox) -> float:
    """Upper bound (r sqrt(d) / (2 tau))^d on the tau-covering number, at least 1."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return max(1.0, (box.edge * math.sqrt(box.dimension) / (2.0 * tau)) ** box.dimension)


def beta(tau: float, delta: float, box: DomainBox) -> float:
    """Confidence factor beta_X(tau) = 2 log(M(tau, X) / delta)."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return 2.0 * math.log(covering_number_bound(tau, box) / delta)


def mean_lipschitz(model: GPModel, L_k: float) -> float:
    """L_mu = L_k sqrt(N) ||(K + s_on^2 I)^{-1} y|| from the cached weights."""
    n = len(model)
    if n == 0:
        return 0.0
    return L_k * math.sqrt(n) * float(np.linalg.norm(model.alpha))


def stddev_modulus(spec: KernelSpec, tau: float, L_k: float, stationary_L_sigma: float | None = None) -> float:
    """Modulus of continuity of sigma at lag tau.

    Returns min(sqrt(2 L_k tau), L_sigma tau) when the stationary constant is
    supplied, otherwise the square-root rate alone.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0.0:
        return 0.0
    w = math.sqrt(2.0 * L_k * tau)
    if stationary_L_sigma is not None:
        w = min(w, stationary_L_sigma * tau)
    return w


def gamma(tau: float, L_mu: float, L_f: float, beta_val: float, omega_sigma: float) -> float:
    """Continuity correction gamma(tau) = (L_mu + L_f) tau + sqrt(beta) omega_sigma."""
    if min(tau, L_mu, L_f, beta_val, omega_sigma) < 0:
        raise ValueError("gamma inputs must be nonnegative")
    return (L_mu + L_f) * tau + math.sqrt(beta_val) * omega_sigma


@dataclass(frozen=True)
class BoundReport:
    """All constants of one uniform-bound evaluation, for auditability."""

    tau: float
    delta: float
    beta: float
    gamma: float
    L_mu: float
    L_f: float
    L_f_source: str
    covering_number_bound: float
    L_k: float
    L_sigma: float | None
    omega_sigma: float

    def to_json_dict(self) -> dict:
        return {
            "tau": self.tau,
            "delta": self.delta,
            "beta": self.beta,
            "gamma": self.gamma,
            "L_mu": self.L_mu,
            "L_f": self.L_f,
            "L_f_source": self.L_f_source,
            "coverage_number_bound": self.covering_number_bound,
        }


def bound_constants(
    model: GPModel,
    params: BoundParams,
    box: DomainBox,
    L_k: float | None = None,
    use_stationary_modulus: bool = True,
) -> BoundReport:
    """Assemble beta, gamma and friends for a model over a box.

    ``L_k`` may be overridden (e.g. with a coarser external estimate); by
    default it is computed from the kernel.
    """
    spec = model.kernel
    if L_k is None:
        L_k = kernels.kernel_lipschitz(spec, box)
    L_sigma = None
    if use_stationary_modulus and spec.stationary:
        L_sigma = kernels.stddev_lipschitz(spec, box)
    m = covering_number_bound(params.tau, box)
    b = beta(params.tau, params.delta, box)
    lmu = mean_lipschitz(model, L_k)
    om = stddev_modulus(spec, params.tau, L_k, L_sigma)
    g = gamma(params.tau, lmu, params.L_f, b, om)
    return BoundReport(
        tau=params.tau,
        delta=params.delta,
        beta=b,
        gamma=g,
        L_mu=lmu,
        L_f=params.L_f,
        L_f_source=params.L_f_source,
        covering_number_bound=m,
        L_k=L_k,
        L_sigma=L_sigma,
        omega_sigma=om,
    )


def uniform_error_bound(
    model: GPModel,
    x,
    params: BoundParams,
    box: DomainBox,
    L_k: float | None = None,
    use_stationary_modulus: bool = True,
):
    """eta(x) = sqrt(beta) sigma(x) + gamma(tau); x must lie inside the box.

    Accepts a single point (d,) or a batch (m, d).  The returned value bounds
    the prediction error jointly over the box with probability at least
    1 - delta when the unknown function is a prior sample.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    for row in X:
        if not box.contains(row):
            raise DomainError(f"query point {row} outside the certified box")
    rep = bound_constants(model, params, box, L_k=L_k, use_stationary_modulus=use_stationary_modulus)
    eta = math.sqrt(rep.beta) * model.predict_stddev(X) + rep.gamma
    return float(eta[0]) if np.asarray(x).ndim == 1 else eta


def noise_norm_bound(N: int, delta: float, noise_variance: float) -> float:
    """High-probability bound on ||eps||^2 for N i.i.d. Gaussian noise terms."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    t = math.log(2.0 / delta)
    return (2.0 * math.sqrt(N * t) + 2.0 * t + N) * noise_variance


def _max_sqrt_k(spec: KernelSpec, box: DomainBox) -> float:
    if spec.stationary:
        return spec.sigma_f
    return spec.sigma_f * kernels._box_corner_norm(box, 1.0 / spec.ell)


def _expected_sup(max_sqrt_k: float, L_k: float, r: float, d: int) -> float:
    return 12.0 * math.sqrt(6.0 * d) * max(max_sqrt_k, math.sqrt(r * L_k))


def _sample_sup(delta: float, max_sqrt_k: float, L_k: float, r: float, d: int) -> float:
    return math.sqrt(2.0 * math.log(1.0 / delta)) * max_sqrt_k + _expected_sup(max_sqrt_k, L_k, r, d)


def expected_sup_bound(spec: KernelSpec, box: DomainBox, L_k: float) -> float:
    """Metric-entropy bound 12 sqrt(6 d) max{max sqrt(k), sqrt(r L_k)} on E[sup f]."""
    return _expected_sup(_max_sqrt_k(spec, box), L_k, box.edge, box.dimension)


def sample_sup_bound(spec: KernelSpec, box: DomainBox, delta_L: float, L_k: float) -> float:
    """Borell-TIS bound on sup f holding with probability at least 1 - delta_L."""
    if not 0 < delta_L < 1:
        raise ValueError("delta_L must lie in (0, 1)")
    return _sample_sup(delta_L, _max_sqrt_k(spec, box), L_k, box.edge, box.dimension)


def _derivative_kernel_constants(spec: KernelSpec, i: int, dim: int) -> tuple[float, float]:
    """(max sqrt(k^di(x,x)), Lipschitz constant of k^di) for axis i.

    The Lipschitz constant is the supremum of ||grad k^di|| over lags.  By
    symmetry the lag can be reduced to (a, s): the scaled offset along axis i
    and the scaled magnitude of the perpendicular offset, with the
    perpendicular direction conservatively mapped onto the minimum
    lengthscale.  The supremum over that quarter-plane is taken on a dense
    grid; values decay exponentially so the [0, 12]^2 window suffices.
    """
    sf2 = spec.signal_variance
    li = spec.lengthscales[i]
    lm = spec.ell_min
    if spec.family == kernels.LINEAR:
        # constant derivative kernel: the derivative process is a single
        # Gaussian slope, so its Lipschitz constant is zero
        return math.sqrt(sf2) / li, 0.0
    if spec.family == kernels.MATERN32:
        raise UnsupportedOperationError("Matern 3/2 lacks the smoothness for derivative kernels")

    n = 1601
    a = np.linspace(0.0, 12.0, n)[:, None]
    s = np.linspace(0.0, 12.0, n)[None, :] if dim > 1 else np.zeros((1, 1))
    if spec.family == kernels.SQUARED_EXPONENTIAL:
        E = np.exp(-0.5 * (a * a + s * s))
        dFa = -(sf2 / li ** 3) * a * (3.0 - a * a) * E
        dFs = -(sf2 / li ** 2) * s * (1.0 - a * a) * E
        grad2 = dFa ** 2 + ((dFs / lm) ** 2 if dim > 1 else 0.0)
        return math.sqrt(sf2) / li, float(np.sqrt(grad2.max()))
    # matern52
    r = np.sqrt(a * a + s * s)
    rsafe = np.maximum(r, 1e-300)
    E = np.exp(-_SQRT5 * r)
    c = (5.0 / 3.0) * sf2 / li ** 2
    dGa = 5.0 * a * E * (_SQRT5 * a * a / rsafe - 3.0)
    dGs = _SQRT5 * (s / rsafe) * E * (5.0 * a * a - _SQRT5 * r)
    grad2 = (c * dGa / li) ** 2 + ((c * dGs / lm) ** 2 if dim > 1 else 0.0)
    return math.sqrt(5.0 / 3.0) * math.sqrt(sf2) / li, float(np.sqrt(np.max(grad2)))


def probabilistic_lipschitz(spec: KernelSpec, box: DomainBox, delta_L: float) -> float:
    """High-probability Lipschitz constant of a prior sample function.

    Applies the supremum bound to each partial-derivative process at
    confidence delta_L / (2 d) and returns the Euclidean norm of the per-axis
    bounds.  Requires continuous partials up to fourth order.
    """
    if not 0 < delta_L < 1:
        raise ValueError("delta_L must lie in (0, 1)")
    if spec.family == kernels.MATERN32:
        raise UnsupportedOperationError(
            "probabilistic Lipschitz constants need fourth-order smoothness (SE, Matern 5/2, linear)"
        )
    d = box.dimension
    if spec.dim != d:
        raise ValueError("kernel dimension does not match the box dimension")
    per_axis = []
    for i in range(d):
        max_sq, L_di = _derivative_kernel_constants(spec, i, d)
        per_axis.append(_sample_sup(delta_L / (2.0 * d), max_sq, L_di, box.edge, d))
    return float(np.linalg.norm(per_axis))


@dataclass(frozen=True)
class TauSearchResult:
    tau: float
    report: BoundReport = field(repr=False)


def auto_tau(
    model: GPModel,
    delta: float,
    L_f: float,
    box: DomainBox,
    negligible_fraction: float = 0.01,
    tau_floor: float = 1e-12,
) -> TauSearchResult:
    """Largest tau for which gamma(tau) <= fraction * sqrt(beta(tau)) * sigma_f.

    Implements the default grid-constant rule: make the continuity correction
    negligible relative to the confidence term at prior scale.  Found by
    bisection; the feasible set is an interval (0, tau*].
    """
    spec = model.kernel
    sigma_f = spec.sigma_f

    def feasible(tau: float) -> bool:
        params = BoundParams(tau=tau, delta=delta, L_f=L_f)
        rep = bound_constants(model, params, box)
        return rep.gamma <= negligible_fraction * math.sqrt(rep.beta) * sigma_f

    hi = box.edge
    if feasible(hi):
        tau = hi
    else:
        lo = tau_floor
        if not feasible(lo):
            raise ValueError("no feasible tau in the search range; check L_f and the box")
        for _ in range(200):
            mid = math.sqrt(lo * hi)  # geometric bisection: tau spans many decades
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        tau = lo
    params = BoundParams(tau=tau, delta=delta, L_f=L_f)
    return TauSearchResult(tau=tau, report=bound_constants(model, params, box))
