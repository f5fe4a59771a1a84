"""Markov-Gaussian model of estimate quality and the optimal lookahead strength.

Successive data estimates are modelled as

    x_hat_j     = gamma_j x + phi_j e_j                       (e_j ~ N(0, I))
    x_hat_{i+1} = g x_hat_i + c e'                            (e' ~ N(0, I), independent)

with g = gamma_{i+1}/gamma_i and c^2 = phi_{i+1}^2 - g^2 phi_i^2.  For the
extrapolation x_tilde(la) = (1 + la) x_hat_i - la x_hat_{i+1} the expected
squared error is a convex quadratic in ``la`` whose minimiser has a closed form.

Noise terms are per dimension; ``dim`` scales them for vector-valued data
(``dim = 1`` gives the scalar formulas).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError


@dataclass(frozen=True)
class StepParams:
    """Model parameters at one step i.  Fields may be numpy arrays (a grid)."""

    gamma: np.ndarray | float  # gamma_i
    gamma_next: np.ndarray | float  # gamma_{i+1}
    phi: np.ndarray | float  # phi_i
    phi_next: np.ndarray | float  # phi_{i+1}
    x_norm_sq: np.ndarray | float = 1.0

    @property
    def ratio(self):
        """gamma_{i+1|i}."""
        return np.asarray(self.gamma_next) / np.asarray(self.gamma)

    @property
    def cond_var(self):
        """phi_{i+1|i}^2."""
        return np.asarray(self.phi_next) ** 2 - self.ratio**2 * np.asarray(self.phi) ** 2

    def validate(self) -> "StepParams":
        g, gn = np.asarray(self.gamma), np.asarray(self.gamma_next)
        p, pn = np.asarray(self.phi), np.asarray(self.phi_next)
        if not np.all((g < 1) & (g > gn) & (gn > 0)):
            raise ConfigError("need 1 > gamma_i > gamma_{i+1} > 0")
        if not np.all((p >= 0) & (p < pn)):
            raise ConfigError("need 0 <= phi_i < phi_{i+1}")
        if not np.all(self.cond_var > 0) or not np.all(np.asarray(self.x_norm_sq) > 0):
            raise ConfigError("need phi_{i+1|i}^2 > 0 and ||x||^2 > 0")
        return self


@dataclass(frozen=True)
class Assumption1Params:
    """Whole sequences gamma_j, phi_j for j = 0..N plus ||x||^2."""

    gamma: np.ndarray
    phi: np.ndarray
    x_norm_sq: float = 1.0

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64)
        p = np.asarray(self.phi, dtype=np.float64)
        if g.shape != p.shape or g.ndim != 1 or g.size < 2:
            raise ConfigError("gamma and phi must be 1-D sequences of equal length >= 2")
        if not (g[0] < 1 and g[-1] >= 0 and np.all(np.diff(g) < 0)):
            raise ConfigError("gamma must satisfy 1 > gamma_0 > gamma_1 > ... >= 0")
        if not (p[0] >= 0 and np.all(np.diff(p) > 0)):
            raise ConfigError("phi must satisfy 0 <= phi_0 < phi_1 < ...")
        if self.x_norm_sq <= 0:
            raise ConfigError("||x||^2 must be positive")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "phi", p)

    def at(self, i: int) -> StepParams:
        if not 0 <= i < self.gamma.size - 1:
            raise IndexError(f"step {i} has no successor in a sequence of length {self.gamma.size}")
        return StepParams(self.gamma[i], self.gamma[i + 1], self.phi[i], self.phi[i + 1], self.x_norm_sq).validate()


def expected_sq_error(la, p: StepParams, dim: int = 1):
    """E ||x_tilde(la) - x||^2 given x."""
    la = np.asarray(la, dtype=np.float64)
    k = 1.0 + la - la * p.ratio
    return (k * p.gamma - 1.0) ** 2 * p.x_norm_sq + dim * (k**2 * np.asarray(p.phi) ** 2 + la**2 * p.cond_var)


def optimal_lambda(p: StepParams, dim: int = 1):
    """Minimiser of :func:`expected_sq_error` over the lookahead strength."""
    one_minus = 1.0 - p.ratio
    g, phi_sq, xs = np.asarray(p.gamma), np.asarray(p.phi) ** 2, p.x_norm_sq
    num = one_minus * (g * (1.0 - g) * xs - dim * phi_sq)
    den = one_minus**2 * g**2 * xs + dim * (one_minus**2 * phi_sq + p.cond_var)
    if np.any(den == 0):
        raise ZeroDivisionError("optimal lookahead strength undefined: zero curvature")
    return num / den


def positivity_condition(p: StepParams, dim: int = 1):
    """True where the optimal strength is strictly positive."""
    g = np.asarray(p.gamma)
    return dim * np.asarray(p.phi) ** 2 < g * (1.0 - g) * p.x_norm_sq


@dataclass
class MonteCarloResult:
    la_grid: np.ndarray
    mse: np.ndarray
    stderr: np.ndarray
    trials: int

    @property
    def argmin(self) -> float:
        return float(self.la_grid[np.argmin(self.mse)])


DEFAULT_LA_GRID = np.round(np.arange(0.0, 0.5 + 1e-9, 0.01), 10)


def simulate_assumption1(
    p: StepParams,
    x,
    la_grid=DEFAULT_LA_GRID,
    trials: int = 100_000,
    rng: np.random.Generator | int = 0,
    chunk: int = 250_000,
) -> MonteCarloResult:
    """Empirical E||x_tilde(la) - x||^2 by simulating the two-step Markov model.

    Per trial the squared error is A + 2 la B + la^2 C with
    A = ||x_hat_i - x||^2, B = <x_hat_i - x, x_hat_i - x_hat_{i+1}>,
    C = ||x_hat_i - x_hat_{i+1}||^2, so the whole grid is evaluated from the
    first and second moments of (A, B, C).  Standard errors use the sample
    covariance of those per-trial values.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    la_grid = np.asarray(la_grid, dtype=np.float64)
    g, gn, ph = float(p.gamma), float(p.ratio), float(p.phi)
    c = float(np.sqrt(p.cond_var))

    s1 = np.zeros(3)
    s2 = np.zeros((3, 3))
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        xi = g * x + ph * rng.standard_normal((m, x.size))
        xn = gn * xi + c * rng.standard_normal((m, x.size))
        err, diff = xi - x, xi - xn
        abc = np.stack([np.sum(err * err, 1), np.sum(err * diff, 1), np.sum(diff * diff, 1)])
        s1 += abc.sum(axis=1)
        s2 += abc @ abc.T
        done += m

    mean = s1 / trials
    v = np.stack([np.ones_like(la_grid), 2 * la_grid, la_grid**2])
    mse = mean @ v
    if trials > 1:
        cov = (s2 - trials * np.outer(mean, mean)) / (trials - 1)
        stderr = np.sqrt(np.maximum(np.einsum("ik,ij,jk->k", v, cov, v), 0.0) / trials)
    else:
        stderr = np.full_like(mse, np.inf)
    return MonteCarloResult(la_grid, mse, stderr, trials)


def xhat_mse_trace(traj, x_true) -> tuple[np.ndarray, np.ndarray]:
    """Squared errors of x_hat_i and x_tilde_i for steps i = N..1.

    Works on a single-chain trajectory (arrays (N+1, d)) or a batch
    ((N+1, n, d)), in which case the per-step mean over chains is returned.
    ``x_true`` broadcasts against one row.
    """
    if traj is None or getattr(traj, "xhat", None) is None or getattr(traj, "xtilde", None) is None:
        raise ConfigError("trajectory lacks recorded x_hat / x_tilde")
    x_true = np.asarray(x_true, dtype=np.float64)
    xh = traj.xhat[:0:-1]
    xt = traj.xtilde[:0:-1]
    e_hat = np.sum((xh - x_true) ** 2, axis=-1)
    e_til = np.sum((xt - x_true) ** 2, axis=-1)
    if e_hat.ndim > 1:
        e_hat, e_til = e_hat.mean(axis=1), e_til.mean(axis=1)
    return e_hat, e_til


def parameter_grid(
    gamma=(0.05, 0.95, 10),
    ratio=(0.1, 0.99, 10),
    phi=(0.0, 0.6, 10),
    phi_gap=(0.01, 0.5, 10),
    x_norm_sq: float = 1.0,
) -> StepParams:
    """Cartesian grid of step parameters, each axis given as (lo, hi, count).

    phi_{i+1} = phi_i + gap, so the noise amplitude always increases.
    """
    axes = [np.linspace(*a[:2], int(a[2])) for a in (gamma, ratio, phi, phi_gap)]
    g, r, ph, gap = (m.ravel() for m in np.meshgrid(*axes, indexing="ij"))
    return StepParams(g, g * r, ph, ph + gap, x_norm_sq).validate()


def theory_checks(p: StepParams, h: float = 1e-3) -> dict[str, float | bool]:
    """Stationarity, convexity and sign checks of the closed-form optimum on a grid.

    The derivative is taken by a central difference, which is exact for a
    quadratic up to rounding.
    """
    lam = optimal_lambda(p)
    f_plus, f_0, f_minus = expected_sq_error(lam + h, p), expected_sq_error(lam, p), expected_sq_error(lam - h, p)
    resid = np.abs(f_plus - f_minus) / (2 * h)
    curvature = (f_plus - 2 * f_0 + f_minus) / h**2
    sign_ok = positivity_condition(p) == (lam > 0)
    return {
        "points": int(np.size(lam)),
        "max_stationarity_residual": float(np.max(resid)),
        "min_curvature": float(np.min(curvature)),
        "sign_mismatches": int(np.sum(~sign_ok)),
        "positive_fraction": float(np.mean(lam > 0)),
    }


def se_multiplier(trials: int, k: float = 3.0) -> float:
    """Student-t critical value with the two-sided coverage of k normal SEs.

    The standard errors are estimated from ``trials`` samples, so the t
    quantile with trials - 1 degrees of freedom keeps the false-alarm rate
    at that of a k-sigma test; it equals k to within 1e-3 once trials > 10^4.
    """
    return float(stats.t.ppf(stats.norm.cdf(k), max(int(trials) - 1, 1)))
