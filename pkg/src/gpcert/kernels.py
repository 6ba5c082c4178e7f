"""Covariance kernels and their continuity constants.

Supported families: squared exponential (with per-dimension lengthscales),
Matern 3/2 and 5/2 (scaled-distance form), and the linear kernel
``k(x, x') = sigma_f^2 * sum_i x_i x'_i / l_i^2``.

Besides plain evaluation this module supplies everything the bound machinery
consumes: gradients, the kernel metric d_k, the kernel Lipschitz constant L_k,
the standard-deviation Lipschitz constant L_sigma, the mixed partial
derivative kernels, and the Lipschitz constant of the kernel derivative
L_dk.  Continuity constants for anisotropic lengthscales use the minimum
lengthscale, which is conservative and valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalDegeneracyError, UnsupportedOperationError

SQUARED_EXPONENTIAL = "squared_exponential"
MATERN32 = "matern32"
MATERN52 = "matern52"
LINEAR = "linear"

_STATIONARY = (SQUARED_EXPONENTIAL, MATERN32, MATERN52)
_FAMILIES = _STATIONARY + (LINEAR,)

# radicand clamp for the kernel metric: [-1e-12, 0] is round-off, below is a bug
_METRIC_TOL = 1e-12

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a kernel: family, signal variance, lengthscales.

    All operations on a spec are pure, so instances can be shared freely
    across threads.
    """

    family: str
    signal_variance: float
    lengthscales: tuple[float, ...]

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be positive")
        ls = tuple(float(l) for l in np.atleast_1d(np.asarray(self.lengthscales, dtype=float)))
        if len(ls) == 0 or any(not l > 0 for l in ls):
            raise ValueError("every lengthscale must be positive")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    @property
    def ell(self) -> np.ndarray:
        return np.asarray(self.lengthscales)

    @property
    def ell_min(self) -> float:
        return min(self.lengthscales)

    @property
    def sigma_f(self) -> float:
        return math.sqrt(self.signal_variance)

    @property
    def stationary(self) -> bool:
        return self.family in _STATIONARY


def _check_point(spec: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape != (spec.dim,):
        raise ValueError(f"point of dimension {x.shape} does not match kernel dimension {spec.dim}")
    return x


def _scaled_sqdist(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    d = (X[:, None, :] - Y[None, :, :]) / spec.ell
    return np.einsum("ijk,ijk->ij", d, d)


def gram(spec: KernelSpec, X, Y=None) -> np.ndarray:
    """Kernel matrix k(X, Y), shape (n, m).  Y=None means Y=X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != spec.dim or Y.shape[1] != spec.dim:
        raise ValueError("input dimension does not match kernel dimension")
    sf2 = spec.signal_variance
    if spec.family == SQUARED_EXPONENTIAL:
        return sf2 * np.exp(-0.5 * _scaled_sqdist(spec, X, Y))
    if spec.family == MATERN32:
        r = np.sqrt(_scaled_sqdist(spec, X, Y))
        return sf2 * (1.0 + _SQRT3 * r) * np.exp(-_SQRT3 * r)
    if spec.family == MATERN52:
        r = np.sqrt(_scaled_sqdist(spec, X, Y))
        return sf2 * (1.0 + _SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-_SQRT5 * r)
    # linear
    return sf2 * ((X / spec.ell) @ (Y / spec.ell).T)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for a single pair of points."""
    x = _check_point(spec, x)
    y = _check_point(spec, y)
    return float(gram(spec, x[None, :], y[None, :])[0, 0])


def kernel_diag(spec: KernelSpec, X) -> np.ndarray:
    """k(x, x) for each row of X (constant for stationary families)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.stationary:
        return np.full(X.shape[0], spec.signal_variance)
    z = X / spec.ell
    return spec.signal_variance * np.einsum("ij,ij->i", z, z)


def kernel_gradient(spec: KernelSpec, x, y) -> np.ndarray:
    """Gradient of k with respect to its first argument, evaluated at (x, y)."""
    x = _check_point(spec, x)
    y = _check_point(spec, y)
    sf2 = spec.signal_variance
    ell2 = spec.ell ** 2
    if spec.family == LINEAR:
        return sf2 * y / ell2
    u = x - y
    r = math.sqrt(float(np.sum((u / spec.ell) ** 2)))
    if spec.family == SQUARED_EXPONENTIAL:
        return -sf2 * math.exp(-0.5 * r * r) * u / ell2
    if spec.family == MATERN32:
        return -3.0 * sf2 * math.exp(-_SQRT3 * r) * u / ell2
    # matern52; the 1/r singularity cancels analytically
    return -(5.0 / 3.0) * sf2 * (1.0 + _SQRT5 * r) * math.exp(-_SQRT5 * r) * u / ell2


def kernel_metric(spec: KernelSpec, x, y) -> float:
    """Kernel metric d_k(x, y) = sqrt(k(x,x) + k(y,y) - 2 k(x,y))."""
    rad = kernel_eval(spec, x, x) + kernel_eval(spec, y, y) - 2.0 * kernel_eval(spec, x, y)
    if rad < -_METRIC_TOL:
        raise NumericalDegeneracyError(
            f"kernel metric radicand {rad:.3e} below tolerance; kernel is not PSD"
        )
    return math.sqrt(max(rad, 0.0))


def _box_corner_norm(box, weights: np.ndarray) -> float:
    """max over the box of ||diag(weights) x||, attained at a corner."""
    c = np.asarray(box.center, dtype=float)
    extreme = np.abs(c) + 0.5 * box.edge
    return float(np.linalg.norm(weights * extreme))


def _golden_max(f, lo: float, hi: float, iters: int = 200) -> float:
    """Golden-section maximization of a unimodal-ish scalar function.

    Used only for kernel-shape maxima which are smooth with a single interior
    peak; a coarse pre-scan guards against picking the wrong basin.
    """
    grid = np.linspace(lo, hi, 512)
    vals = np.array([f(g) for g in grid])
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    for _ in range(iters):
        if f(c) > f(d):
            b = d
        else:
            a = c
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        if b - a < 1e-14 * max(1.0, abs(b)):
            break
    m = 0.5 * (a + b)
    return max(f(m), vals[i])


def kernel_lipschitz(spec: KernelSpec, box) -> float:
    """Upper bound L_k on the supremum of ||grad k|| over the domain.

    Stationary families use the global maximum over lags (a valid upper
    bound for any domain); the linear kernel maximizes ||x'|| over the box.
    """
    sf2 = spec.signal_variance
    lm = spec.ell_min
    if spec.family == SQUARED_EXPONENTIAL:
        # max of v * exp(-v^2/2) is e^{-1/2} at v = 1
        return sf2 * math.exp(-0.5) / lm
    if spec.family == MATERN32:
        # max of 3 v exp(-sqrt(3) v) at v = 1/sqrt(3)
        return _SQRT3 * sf2 * math.exp(-1.0) / lm
    if spec.family == MATERN52:
        g = _golden_max(lambda v: (5.0 / 3.0) * v * (1.0 + _SQRT5 * v) * math.exp(-_SQRT5 * v), 0.0, 10.0)
        return sf2 * g / lm
    return sf2 * _box_corner_norm(box, 1.0 / spec.ell ** 2)


def derivative_kernel_eval(spec: KernelSpec, i: int, x, y) -> float:
    """Mixed second partial k^di(x, y) = d^2 k / (dx_i dy_i).

    Requires continuous partials up to fourth order, so Matern 3/2 is
    rejected.
    """
    if spec.family == MATERN32:
        raise UnsupportedOperationError("Matern 3/2 lacks the smoothness for derivative kernels")
    x = _check_point(spec, x)
    y = _check_point(spec, y)
    if not 0 <= i < spec.dim:
        raise ValueError(f"axis {i} out of range for dimension {spec.dim}")
    sf2 = spec.signal_variance
    li2 = spec.lengthscales[i] ** 2
    if spec.family == LINEAR:
        return sf2 / li2
    u = x - y
    if spec.family == SQUARED_EXPONENTIAL:
        k = kernel_eval(spec, x, y)
        return (1.0 - u[i] ** 2 / li2) * k / li2
    # matern52
    r = math.sqrt(float(np.sum((u / spec.ell) ** 2)))
    vi2 = u[i] ** 2 / li2
    return (5.0 / 3.0) * sf2 * math.exp(-_SQRT5 * r) * ((1.0 + _SQRT5 * r) - 5.0 * vi2) / li2


def stddev_lipschitz(spec: KernelSpec, box) -> float:
    """Lipschitz constant L_sigma of the posterior standard deviation.

    For stationary kernels this is the supremum over lags in the domain of
    ||grad k|| / sqrt(2 k(0) - 2 k(lag)).  The supremum equals the zero-lag
    limit sqrt(-k''(0)) for the supported families; a numeric maximization
    over the worst-axis lag is taken as well and the larger value returned.
    """
    if not spec.stationary:
        raise UnsupportedOperationError(
            "L_sigma needs a stationary kernel; use the sqrt(2 L_k tau) modulus instead"
        )
    sf = spec.sigma_f
    lm = spec.ell_min
    if spec.family == SQUARED_EXPONENTIAL:
        limit = sf / lm
    elif spec.family == MATERN32:
        limit = _SQRT3 * sf / lm
    else:
        limit = math.sqrt(5.0 / 3.0) * sf / lm
    # lag along the minimum-lengthscale axis maximizes the ratio
    e = np.zeros(spec.dim)
    e[int(np.argmin(spec.ell))] = 1.0
    zero = np.zeros(spec.dim)
    diam = box.edge * math.sqrt(box.dimension)

    def ratio(u):
        if u <= 0.0:
            return 0.0
        den = kernel_metric(spec, zero, u * e)
        if den == 0.0:
            return 0.0
        return float(np.linalg.norm(kernel_gradient(spec, zero, u * e))) / den

    # the analytic limit covers lags below ~1e-3 ell, where the metric loses
    # precision to cancellation
    return max(limit, _golden_max(ratio, 1e-3 * lm, max(diam, 1e-2 * lm)))


def gradient_lipschitz(spec: KernelSpec) -> float:
    """Lipschitz constant L_dk of the kernel derivative (max |k''| over lags).

    Not defined for the linear kernel, whose density subsets are handled
    geometrically instead.
    """
    sf2 = spec.signal_variance
    lm2 = spec.ell_min ** 2
    if spec.family == SQUARED_EXPONENTIAL:
        return sf2 / lm2
    if spec.family == MATERN32:
        return 3.0 * sf2 / lm2
    if spec.family == MATERN52:
        return (5.0 / 3.0) * sf2 / lm2
    raise UnsupportedOperationError("gradient Lipschitz constant undefined for the linear kernel")
