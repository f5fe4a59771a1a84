"""Analytic noise predictors standing in for a trained eps-network.

An oracle maps a state ``z`` (shape ``(..., d)``) and a time ``t`` to the
predicted noise ``eps_hat(z, t)`` of the same shape.  For data distributions
with a closed-form posterior mean E[x | z_t] the optimal predictor is

    eps_hat(z, t) = (z - alpha_t E[x | z_t = z]) / sigma_t

which is what the Gaussian and mixture oracles return.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigError, DegenerateTimeError
from .rng import stream
from .schedule import Schedule

# keeps oracle streams disjoint from the per-chain streams stream(seed, chain)
_ORACLE_DOMAIN = 2**32


def _scales(schedule: Schedule, t):
    a, s = schedule.alpha_sigma(t)
    if np.any(s == 0.0):
        raise DegenerateTimeError(f"oracle evaluated at t={t} where sigma_t = 0")
    return float(a), float(s)


class EpsilonOracle:
    """Base class.  Subclasses implement ``__call__(z, t)``."""

    deterministic = True

    def __init__(self, schedule: Schedule):
        self.schedule = schedule

    def __call__(self, z: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def eval(self, z, t):
        return self(z, t)

    def spawn(self, key: int) -> "EpsilonOracle":
        """Independent copy for one block of chains (stateless oracles return self)."""
        return self


class PointMassOracle(EpsilonOracle):
    """Exact predictor when all data sits at ``x0``."""

    def __init__(self, x0, schedule: Schedule):
        super().__init__(schedule)
        self.x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))

    def __call__(self, z, t):
        a, s = _scales(self.schedule, t)
        return (np.asarray(z) - a * self.x0) / s


class GaussianOracle(EpsilonOracle):
    """Exact predictor for isotropic Gaussian data N(mean, std^2 I)."""

    def __init__(self, mean, std: float, schedule: Schedule):
        super().__init__(schedule)
        if std <= 0:
            raise ConfigError("gaussian oracle needs std > 0")
        self.mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        self.std = float(std)

    def posterior_mean(self, z, t):
        a, s = _scales(self.schedule, t)
        v = self.std**2
        return (a * v * np.asarray(z) + s**2 * self.mean) / (a**2 * v + s**2)

    def __call__(self, z, t):
        a, s = _scales(self.schedule, t)
        return (np.asarray(z) - a * self.posterior_mean(z, t)) / s


@dataclass(frozen=True, eq=False)
class GmmTarget:
    """Mixture of isotropic Gaussians: weights (K,), means (K, d), variances (K,).

    Zero variances are allowed and describe point masses.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        m = np.asarray(self.means, dtype=np.float64)
        if m.ndim == 1:
            m = m[:, None]
        v = np.asarray(self.variances, dtype=np.float64).reshape(-1)
        if m.ndim != 2 or not (w.size == m.shape[0] == v.size) or w.size == 0:
            raise ConfigError("gmm weights, means and variances disagree on the number of components")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError("gmm weights must be non-negative and sum to 1")
        if np.any(v < 0):
            raise ConfigError("gmm variances must be non-negative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def variance(self) -> np.ndarray:
        """Per-dimension variance of the mixture."""
        second = self.weights @ (self.means**2 + self.variances[:, None])
        return second - self.mean() ** 2

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(self.weights.size, size=n, p=self.weights)
        noise = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.sqrt(self.variances[comp])[:, None] * noise

    def to_dict(self) -> dict[str, Any]:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GmmTarget":
        return cls(d["weights"], d["means"], d["variances"])


class GmmOracle(EpsilonOracle):
    """Exact predictor for a :class:`GmmTarget`.

    At time t component k has marginal N(alpha_t mu_k, (alpha_t^2 v_k + sigma_t^2) I);
    responsibilities are computed in the log domain with max subtraction.
    """

    def __init__(self, target: GmmTarget, schedule: Schedule):
        super().__init__(schedule)
        self.target = target
        with np.errstate(divide="ignore"):
            self._log_w = np.log(target.weights)

    def posterior_mean(self, z, t):
        a, s = _scales(self.schedule, t)
        tg = self.target
        z = np.asarray(z, dtype=np.float64)
        var = a**2 * tg.variances + s**2  # (K,)
        diff = z[..., None, :] - a * tg.means  # (..., K, d)
        logp = self._log_w - 0.5 * tg.dim * np.log(var) - 0.5 * np.sum(diff**2, axis=-1) / var
        logp = logp - np.max(logp, axis=-1, keepdims=True)
        resp = np.exp(logp)
        resp /= np.sum(resp, axis=-1, keepdims=True)
        post = tg.means + (a * tg.variances / var)[:, None] * diff
        return np.sum(resp[..., None] * post, axis=-2)

    def __call__(self, z, t):
        a, s = _scales(self.schedule, t)
        return (np.asarray(z) - a * self.posterior_mean(z, t)) / s


class NoisyOracle(EpsilonOracle):
    """Adds ``noise_scale * g`` with g ~ N(0, I) drawn from an owned stream.

    The stream is keyed by ``(seed, *key)``; :meth:`spawn` extends the key, so
    each block of chains sees its own reproducible noise.  Never share one
    instance between concurrently running chains.
    """

    deterministic = False

    def __init__(self, inner: EpsilonOracle, noise_scale: float, seed: int, key: tuple[int, ...] = ()):
        if noise_scale < 0:
            raise ConfigError("noise_scale must be non-negative")
        super().__init__(inner.schedule)
        self.inner = inner
        self.noise_scale = float(noise_scale)
        self.seed = int(seed)
        self.key = tuple(key)
        self._rng = stream(self.seed, _ORACLE_DOMAIN, *self.key)

    def __call__(self, z, t):
        eps = self.inner(z, t)
        if self.noise_scale == 0.0:
            return eps
        return eps + self.noise_scale * self._rng.standard_normal(np.shape(eps))

    def spawn(self, key):
        return NoisyOracle(self.inner.spawn(key), self.noise_scale, self.seed, self.key + (int(key),))


def point_mass_oracle(x0, schedule: Schedule) -> PointMassOracle:
    return PointMassOracle(x0, schedule)


def gaussian_oracle(mean, std: float, schedule: Schedule) -> GaussianOracle:
    return GaussianOracle(mean, std, schedule)


def gmm_oracle(target: GmmTarget, schedule: Schedule) -> GmmOracle:
    return GmmOracle(target, schedule)


def noisy_wrapper(inner: EpsilonOracle, noise_scale: float, seed: int) -> NoisyOracle:
    return NoisyOracle(inner, noise_scale, seed)
