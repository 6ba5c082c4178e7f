"""Exact Gaussian-process posterior inference over a mutable training set.

Predictions follow the standard closed forms

    mu(x)      = k(x)^T (K + s_on^2 I)^{-1} y
    sigma^2(x) = k(x,x) - k(x)^T (K + s_on^2 I)^{-1} k(x)

backed by a cached lower-triangular Cholesky factor.  Models are immutable;
``add_samples`` returns a new model refit from scratch (episodic appends are
batched once per episode, so the cubic refit cost is acceptable).  There is
no automatic jitter beyond the noise variance: a failed factorization
surfaces as :class:`IllConditionedDataError` so experiments stay faithful to
the exact equations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import IllConditionedDataError
from .kernels import KernelSpec, gram, kernel_diag


@dataclass(frozen=True)
class TrainingSet:
    """Inputs, targets, and the observation-noise variance."""

    inputs: np.ndarray
    targets: np.ndarray
    noise_variance: float

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.targets, dtype=float).reshape(-1)
        if X.size == 0:
            X = X.reshape(0, X.shape[1] if X.ndim == 2 and X.shape[1] else 1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs vs {y.shape[0]} targets")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def dimension(self) -> int:
        return self.inputs.shape[1]

    @staticmethod
    def empty(dimension: int, noise_variance: float) -> "TrainingSet":
        return TrainingSet(np.zeros((0, dimension)), np.zeros(0), noise_variance)

    def concat(self, other: "TrainingSet") -> "TrainingSet":
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch between training sets")
        if other.noise_variance != self.noise_variance:
            raise ValueError("noise variance mismatch between training sets")
        return TrainingSet(
            np.vstack([self.inputs, other.inputs]),
            np.concatenate([self.targets, other.targets]),
            self.noise_variance,
        )

    def to_csv(self, path) -> None:
        """CSV with header x_1..x_d, y."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x_{i + 1}" for i in range(self.dimension)] + ["y"])
            for x, y in zip(self.inputs, self.targets):
                w.writerow([repr(float(v)) for v in x] + [repr(float(y))])

    @staticmethod
    def from_csv(path, noise_variance: float) -> "TrainingSet":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if not header or header[-1] != "y":
                raise ValueError("training-set CSV must have header x_1..x_d, y")
            rows = [[float(v) for v in row] for row in r if row]
        if not rows:
            return TrainingSet.empty(len(header) - 1, noise_variance)
        arr = np.asarray(rows)
        return TrainingSet(arr[:, :-1], arr[:, -1], noise_variance)


@dataclass(frozen=True)
class GPModel:
    """Fitted GP posterior: kernel, data, cached factorization and weights."""

    kernel: KernelSpec
    data: TrainingSet
    chol: np.ndarray | None = field(repr=False)
    alpha: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.data)

    def _query(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.kernel.dim:
            raise ValueError(
                f"query dimension {X.shape[1]} does not match kernel dimension {self.kernel.dim}"
            )
        return X, single

    def predict_mean(self, x):
        """Posterior mean at x; accepts a point (d,) or a batch (m, d)."""
        X, single = self._query(x)
        if len(self) == 0:
            mu = np.zeros(X.shape[0])
        else:
            mu = gram(self.kernel, X, self.data.inputs) @ self.alpha
        return float(mu[0]) if single else mu

    def predict_var(self, x):
        """Posterior variance at x, clamped into [0, k(x,x)]."""
        X, single = self._query(x)
        prior = kernel_diag(self.kernel, X)
        if len(self) == 0:
            var = prior
        else:
            kx = gram(self.kernel, self.data.inputs, X)
            v = scipy.linalg.solve_triangular(self.chol, kx, lower=True)
            var = prior - np.einsum("ij,ij->j", v, v)
            var = np.clip(var, 0.0, prior)
        return float(var[0]) if single else var

    def predict_stddev(self, x):
        return np.sqrt(self.predict_var(x))

    def mean_function(self):
        """Low-overhead scalar-point closure for tight simulation loops.

        Returns a callable x -> mu(x) that agrees with :meth:`predict_mean`
        exactly (same operation order) but skips batch plumbing.
        """
        from .kernels import SQUARED_EXPONENTIAL  # local: avoid cycle at import time

        if len(self) == 0:
            return lambda x: 0.0
        if self.kernel.family != SQUARED_EXPONENTIAL:
            return self.predict_mean
        X = self.data.inputs
        ell = self.kernel.ell
        sf2 = self.kernel.signal_variance
        alpha = self.alpha

        def mean(x):
            d = (X - x) / ell
            k = sf2 * np.exp(-0.5 * np.einsum("ij,ij->i", d, d))
            return float(k @ alpha)

        return mean


def fit(kernel: KernelSpec, data: TrainingSet) -> GPModel:
    """Factorize K + s_on^2 I and cache the weight vector alpha."""
    if data.dimension != kernel.dim and len(data) > 0:
        raise ValueError("training-set dimension does not match kernel dimension")
    n = len(data)
    if n == 0:
        return GPModel(kernel, data, None, np.zeros(0))
    K = gram(kernel, data.inputs) + data.noise_variance * np.eye(n)
    try:
        L = scipy.linalg.cholesky(K, lower=True)
    except scipy.linalg.LinAlgError:
        pivot = float(np.linalg.eigvalsh(K)[0])
        raise IllConditionedDataError(
            f"Gram matrix plus noise is not positive definite (smallest pivot {pivot:.3e})",
            smallest_pivot=pivot,
        ) from None
    alpha = scipy.linalg.cho_solve((L, True), data.targets)
    return GPModel(kernel, data, L, alpha)


def add_samples(model: GPModel, new: TrainingSet) -> GPModel:
    """Model equivalent to fitting on the concatenated data (full refit)."""
    if len(new) == 0:
        return model
    if len(model.data) == 0:
        combined = new
    else:
        combined = model.data.concat(new)
    return fit(model.kernel, combined)


def downsample(raw: TrainingSet, fine_dt: float, target_Ts: float) -> TrainingSet:
    """Keep every floor(target_Ts / fine_dt)-th sample, starting at index 0."""
    if not fine_dt > 0:
        raise ValueError("fine_dt must be positive")
    if target_Ts < fine_dt:
        raise ValueError(f"target sampling time {target_Ts} below recording pitch {fine_dt}")
    # the nudge keeps float representations of exact multiples honest
    # (0.003 / 0.0003 must give stride 10)
    stride = int(np.floor(target_Ts / fine_dt + 1e-9))
    return TrainingSet(raw.inputs[::stride], raw.targets[::stride], raw.noise_variance)
