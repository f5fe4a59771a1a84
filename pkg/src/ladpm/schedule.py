"""Variance-preserving noise schedules and sampling time grids.

A schedule maps continuous time t in [0, 1] to the signal and noise scales
(alpha_t, sigma_t) of the forward process z_t = alpha_t x + sigma_t eps, with
t = 0 the clean data and t = 1 (almost) pure noise.  Everything a sampler
needs is derived from log(alpha_t):

    sigma_t        = sqrt(1 - alpha_t^2)
    alpha_{t|s}    = alpha_t / alpha_s
    sigma_{t|s}^2  = sigma_t^2 - alpha_{t|s}^2 sigma_s^2
    log_snr(t)     = log(alpha_t / sigma_t)

Two schedules are provided: the linear-beta discrete schedule of DDPM (with
log(alpha) interpolated linearly between training steps so it can be queried
at any t) and its continuous-time limit, the VP-SDE linear schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DegenerateTimeError, DomainError, OrderingError, RangeError, ScheduleError

DEFAULT_T_MIN = 1e-3

_BISECT_MAX_ITER = 200


def _as_float_array(t):
    return np.asarray(t, dtype=np.float64)


def _check_domain(t: np.ndarray) -> None:
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError(f"time must lie in [0, 1], got {t}")


class Schedule:
    """Base class for VP schedules.

    Subclasses implement :meth:`_log_alpha` and :meth:`_dlog_alpha_dt` on
    validated float arrays.  All public methods accept scalars or arrays and
    return the same shape.
    """

    kind: str
    t_min: float

    # -- subclass hooks ----------------------------------------------------
    def _log_alpha(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _dlog_alpha_dt(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self, a: float, b: float) -> np.ndarray:
        """Times in the open interval (a, b) where the schedule is not smooth."""
        return np.empty(0)

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    # -- public maps -------------------------------------------------------
    def log_alpha(self, t):
        t = _as_float_array(t)
        _check_domain(t)
        return self._log_alpha(t)

    def alpha(self, t):
        return np.exp(self.log_alpha(t))

    def sigma(self, t):
        # -expm1 keeps full relative precision for small t
        return np.sqrt(-np.expm1(2.0 * self.log_alpha(t)))

    def alpha_sigma(self, t):
        """Return ``(alpha_t, sigma_t)``."""
        la = self.log_alpha(t)
        return np.exp(la), np.sqrt(-np.expm1(2.0 * la))

    def dlog_alpha_dt(self, t):
        """Time derivative of log(alpha_t) (equal to -beta(t)/2)."""
        t = _as_float_array(t)
        _check_domain(t)
        return self._dlog_alpha_dt(t)

    def conditional_coeffs(self, s, t):
        """Return ``(alpha_{t|s}, sigma_{t|s}^2)`` of the transition s -> t."""
        s = _as_float_array(s)
        t = _as_float_array(t)
        if np.any(s > t):
            raise OrderingError(f"conditional_coeffs needs s <= t, got s={s}, t={t}")
        a_s, sig_s = self.alpha_sigma(s)
        a_t, sig_t = self.alpha_sigma(t)
        a_ts = a_t / a_s
        var_ts = sig_t**2 - a_ts**2 * sig_s**2
        if np.any(var_ts < -1e-12):
            raise ScheduleError(f"negative transition variance {var_ts} for s={s}, t={t}")
        return a_ts, np.maximum(var_ts, 0.0)

    def posterior_params(self, z_t, x, s, t):
        """Mean and (scalar) variance of q(z_s | z_t, x) for s <= t."""
        a_ts, var_ts = self.conditional_coeffs(s, t)
        a_s, sig_s = self.alpha_sigma(s)
        sig_t = self.sigma(t)
        if np.any(sig_t == 0.0):
            raise DegenerateTimeError(f"sigma_t vanishes at t={t}")
        var_t = sig_t**2
        mean = (sig_s**2 / var_t) * a_ts * np.asarray(z_t) + (var_ts / var_t) * a_s * np.asarray(x)
        return mean, sig_s**2 * var_ts / var_t

    def log_snr(self, t):
        """log(alpha_t / sigma_t); strictly decreasing in t."""
        la = self.log_alpha(t)
        if np.any(la == 0.0):
            raise DegenerateTimeError("log_snr is infinite where sigma_t = 0")
        return la - 0.5 * np.log(-np.expm1(2.0 * la))

    def log_snr_range(self) -> tuple[float, float]:
        """Achievable logSNR interval ``(log_snr(1), log_snr(t_min))``."""
        return float(self.log_snr(1.0)), float(self.log_snr(self.t_min))

    def t_of_log_snr(self, lam):
        """Inverse of :meth:`log_snr` on [t_min, 1] by bracketed bisection."""
        lam = _as_float_array(lam)
        lo_lam, hi_lam = self.log_snr_range()
        tol = 1e-12 * max(1.0, abs(lo_lam), abs(hi_lam))
        if np.any(~np.isfinite(lam)) or np.any(lam < lo_lam - tol) or np.any(lam > hi_lam + tol):
            raise RangeError(f"logSNR {lam} outside achievable range [{lo_lam}, {hi_lam}]")
        lo = np.full(lam.shape, self.t_min)
        hi = np.ones(lam.shape)
        for _ in range(_BISECT_MAX_ITER):
            mid = 0.5 * (lo + hi)
            done = (mid <= lo) | (mid >= hi)
            if np.all(done):
                break
            above = self.log_snr(mid) > lam
            lo = np.where(above & ~done, mid, lo)
            hi = np.where(~above & ~done, mid, hi)
        # pick whichever bracket end is closer in logSNR
        pick_lo = np.abs(self.log_snr(lo) - lam) <= np.abs(self.log_snr(hi) - lam)
        out = np.where(pick_lo, lo, hi)
        return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class ContinuousVP(Schedule):
    """beta(t) = beta_min + t (beta_max - beta_min), alpha_t = exp(-1/2 int_0^t beta)."""

    beta_min: float = 0.1
    beta_max: float = 20.0
    t_min: float = DEFAULT_T_MIN
    kind: str = field(default="continuous-vp", init=False)

    def __post_init__(self):
        if not (0.0 < self.beta_min <= self.beta_max):
            raise ScheduleError("need 0 < beta_min <= beta_max")
        if not (0.0 < self.t_min < 1.0):
            raise ScheduleError("t_min must lie in (0, 1)")

    def _log_alpha(self, t):
        return -0.25 * t**2 * (self.beta_max - self.beta_min) - 0.5 * t * self.beta_min

    def _dlog_alpha_dt(self, t):
        return -0.5 * (self.beta_min + t * (self.beta_max - self.beta_min))

    def to_dict(self):
        return {"kind": self.kind, "beta_min": self.beta_min, "beta_max": self.beta_max, "t_min": self.t_min}


@dataclass(frozen=True, eq=False)
class DiscreteVP(Schedule):
    """Linear-beta DDPM schedule with ``num_steps`` training steps.

    ``beta_min``/``beta_max`` are quoted for 1000 steps and rescaled by
    1000 / num_steps, so the continuous-time limit does not depend on the
    discretization.  Knot j sits at t = j / num_steps with
    alpha_j = sqrt(prod_{k <= j} (1 - beta_k)); log(alpha) is linear between
    knots.
    """

    num_steps: int = 1000
    beta_min: float = 1e-4
    beta_max: float = 0.02
    t_min: float = DEFAULT_T_MIN
    kind: str = field(default="discrete-vp", init=False)
    betas: np.ndarray = field(init=False, repr=False)
    _knots: np.ndarray = field(init=False, repr=False)
    _log_alpha_knots: np.ndarray = field(init=False, repr=False)
    _slopes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.num_steps) != self.num_steps or self.num_steps < 1:
            raise ScheduleError("num_steps must be a positive integer")
        if not (0.0 < self.beta_min <= self.beta_max):
            raise ScheduleError("need 0 < beta_min <= beta_max")
        if not (0.0 < self.t_min < 1.0):
            raise ScheduleError("t_min must lie in (0, 1)")
        n = int(self.num_steps)
        betas = np.linspace(self.beta_min, self.beta_max, n) * (1000.0 / n)
        if np.any(betas >= 1.0):
            raise ScheduleError("rescaled beta reaches 1; use more steps")
        log_alpha = np.concatenate([[0.0], np.cumsum(0.5 * np.log1p(-betas))])
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "_knots", np.arange(n + 1) / n)
        object.__setattr__(self, "_log_alpha_knots", log_alpha)
        object.__setattr__(self, "_slopes", np.diff(log_alpha) * n)

    def _log_alpha(self, t):
        return np.interp(t, self._knots, self._log_alpha_knots)

    def _dlog_alpha_dt(self, t):
        idx = np.clip(np.floor(t * self.num_steps).astype(int), 0, self.num_steps - 1)
        return self._slopes[idx]

    def breakpoints(self, a, b):
        k = self._knots
        return k[(k > a) & (k < b)]

    def to_dict(self):
        return {
            "kind": self.kind,
            "num_steps": int(self.num_steps),
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
            "t_min": self.t_min,
        }


def schedule_from_dict(d: dict[str, Any]) -> Schedule:
    d = dict(d)
    kind = d.pop("kind", "discrete-vp")
    if kind == "discrete-vp":
        return DiscreteVP(**d)
    if kind == "continuous-vp":
        return ContinuousVP(**d)
    raise ScheduleError(f"unknown schedule kind {kind!r}")


SPACINGS = ("uniform-t", "uniform-logsnr")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Sampling times t_0 < t_1 < ... < t_N, stored so that ``times[i] = t_i``.

    The backward process walks i = N, ..., 1, producing z_{i-1} from z_i.
    Per-node alpha, sigma and logSNR are cached.
    """

    schedule: Schedule
    times: np.ndarray
    spacing: str = "uniform-t"
    alphas: np.ndarray = field(init=False, repr=False)
    sigmas: np.ndarray = field(init=False, repr=False)
    log_snrs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or times.size < 2:
            raise DomainError("a time grid needs at least two nodes")
        if np.any(np.diff(times) <= 0.0):
            raise DomainError("grid times must be strictly increasing in the index")
        if times[0] < self.schedule.t_min * (1 - 1e-12) or times[-1] > 1.0:
            raise DomainError(f"grid must lie in [t_min={self.schedule.t_min}, 1]")
        a, s = self.schedule.alpha_sigma(times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "sigmas", s)
        object.__setattr__(self, "log_snrs", self.schedule.log_snr(times))

    @property
    def steps(self) -> int:
        return self.times.size - 1


def make_time_grid(schedule: Schedule, steps: int, spacing: str = "uniform-t") -> TimeGrid:
    """Grid of ``steps`` backward steps from t=1 down to ``schedule.t_min``."""
    if int(steps) != steps or steps < 1:
        raise DomainError("steps must be a positive integer")
    t_min = schedule.t_min
    if spacing == "uniform-t":
        times = t_min + (1.0 - t_min) * np.arange(steps + 1) / steps
        times[-1] = 1.0
    elif spacing == "uniform-logsnr":
        lam_1, lam_min = schedule.log_snr_range()
        lams = lam_min + (lam_1 - lam_min) * np.arange(steps + 1) / steps
        times = np.asarray(schedule.t_of_log_snr(lams), dtype=np.float64)
        times[0], times[-1] = t_min, 1.0
    else:
        raise DomainError(f"unknown spacing {spacing!r}; expected one of {SPACINGS}")
    return TimeGrid(schedule, times, spacing)
