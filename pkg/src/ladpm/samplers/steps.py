"""Single backward steps z_i -> z_{i-1} for each sampler family.

Every stepper takes a lookahead strength ``la`` (>= 0) and the previous
step's data estimate ``prev``; with ``la == 0`` it performs the published
baseline update exactly.  The extrapolated estimate is

    x_tilde = (1 + la) * x_hat_cur - la * x_hat_prev

Steppers are pure functions of their inputs, the oracle, the grid and (for
DDPM) a pre-drawn standard-normal ``noise`` array.  They return a
:class:`StepOut` whose ``carry`` is what the next step passes back as
``prev``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..errors import DegenerateTimeError, SequencingError
from ..oracle import EpsilonOracle
from ..schedule import Schedule, TimeGrid


class StepOut(NamedTuple):
    z: np.ndarray  # z_{i-1}
    carry: np.ndarray  # estimate the next step extrapolates from
    eps: np.ndarray  # noise estimate used at z_i
    xhat: np.ndarray  # data estimate formed at z_i
    xtilde: np.ndarray  # its extrapolation
    history: tuple = ()  # multistep noise history, newest first


def xhat(z, eps, t: float, schedule: Schedule) -> np.ndarray:
    """Data estimate x_hat = (z - sigma_t eps) / alpha_t."""
    a, s = schedule.alpha_sigma(t)
    if s == 0.0:
        raise DegenerateTimeError(f"x_hat needs sigma_t > 0, got t={t}")
    return _xhat(np.asarray(z), np.asarray(eps), float(a), float(s))


def _xhat(z, eps, a, s):
    return (z - s * eps) / a


def lookahead(cur, prev, la: float) -> np.ndarray:
    """(1 + la) cur - la prev; returns ``cur`` itself when la == 0."""
    if la < 0:
        raise ValueError(f"lookahead strength must be >= 0, got {la}")
    if la == 0:
        return cur
    if prev is None:
        raise SequencingError("lookahead with la > 0 needs a previous estimate")
    return (1.0 + la) * cur - la * prev


def _node(grid: TimeGrid, i: int):
    if not 1 <= i <= grid.steps:
        raise IndexError(f"step index {i} outside 1..{grid.steps}")
    return grid.times[i], grid.alphas[i], grid.sigmas[i], grid.times[i - 1], grid.alphas[i - 1], grid.sigmas[i - 1]


def la_ddpm_step(z, prev, i: int, la: float, oracle: EpsilonOracle, grid: TimeGrid, noise) -> StepOut:
    """Ancestral step: draw z_{i-1} from q(z_{i-1} | z_i, x = x_tilde).

    The noise is scaled by the standard deviation sqrt(phi_i) of the
    backward conditional, phi_i = sigma_{i-1}^2 sigma_{i|i-1}^2 / sigma_i^2.
    """
    t, a, s, t_prev, _, _ = _node(grid, i)
    eps = oracle(z, t)
    xh = _xhat(z, eps, a, s)
    xt = lookahead(xh, prev, la)
    mean, var = grid.schedule.posterior_params(z, xt, t_prev, t)
    return StepOut(mean + np.sqrt(var) * noise, xh, eps, xh, xt)


def la_ddim_step(z, prev, i: int, la: float, oracle: EpsilonOracle, grid: TimeGrid) -> StepOut:
    t, a, s, _, a_prev, s_prev = _node(grid, i)
    eps = oracle(z, t)
    xh = _xhat(z, eps, a, s)
    xt = lookahead(xh, prev, la)
    return StepOut(a_prev * xt + s_prev * eps, xh, eps, xh, xt)


def _log_snr_fraction(grid: TimeGrid, i: int, frac: float) -> tuple[float, float, float]:
    """Time at logSNR lam_i + frac * h_i, with its alpha and sigma."""
    lam_i, lam_prev = grid.log_snrs[i], grid.log_snrs[i - 1]
    tm = grid.schedule.t_of_log_snr(lam_i + frac * (lam_prev - lam_i))
    am, sm = grid.schedule.alpha_sigma(tm)
    return float(tm), float(am), float(sm)


def la_dpm_solver2_step(z, prev, i: int, la: float, oracle: EpsilonOracle, grid: TimeGrid) -> StepOut:
    """Second-order DPM-Solver step with the lookahead on the midpoint stage.

    The midpoint state is written in its DDIM-like form
    z_mid = alpha_mid x_tilde + sigma_mid eps_i, which equals the
    exponential-integrator form because logSNR(t_mid) is the average of the
    endpoint logSNRs.  ``carry`` is x_hat at the midpoint.
    """
    t, a, s, _, a_prev, s_prev = _node(grid, i)
    h = grid.log_snrs[i - 1] - grid.log_snrs[i]
    t_mid, a_mid, s_mid = _log_snr_fraction(grid, i, 0.5)

    eps = oracle(z, t)
    xh = _xhat(z, eps, a, s)
    xt = lookahead(xh, prev, la)
    z_mid = a_mid * xt + s_mid * eps
    eps_mid = oracle(z_mid, t_mid)
    z_new = (a_prev / a) * z - s_prev * np.expm1(h) * eps_mid
    return StepOut(z_new, _xhat(z_mid, eps_mid, a_mid, s_mid), eps, xh, xt)


def la_dpm_solver3_step(z, prev, i: int, la: float, oracle: EpsilonOracle, grid: TimeGrid) -> StepOut:
    """Third-order DPM-Solver step; lookahead enters at the first third point.

    ``carry`` is x_hat at the second intermediate point z_{i-2/3}, which the
    next step sees as its z_{(i-1)+1/3}.
    """
    t, a, s, _, a_prev, s_prev = _node(grid, i)
    h = grid.log_snrs[i - 1] - grid.log_snrs[i]
    t1, a1, s1 = _log_snr_fraction(grid, i, 1.0 / 3.0)
    t2, a2, s2 = _log_snr_fraction(grid, i, 2.0 / 3.0)

    eps = oracle(z, t)
    xh = _xhat(z, eps, a, s)
    xt = lookahead(xh, prev, la)
    z1 = a1 * xt + s1 * eps
    r1 = oracle(z1, t1) - eps

    e2 = np.expm1(2.0 * h / 3.0)
    z2 = (a2 / a) * z - s2 * e2 * eps - 2.0 * s2 * (e2 / (2.0 * h / 3.0) - 1.0) * r1
    eps2 = oracle(z2, t2)
    r2 = eps2 - eps

    e1 = np.expm1(h)
    z_new = (a_prev / a) * z - s_prev * e1 * eps - 1.5 * s_prev * (e1 / h - 1.0) * r2
    return StepOut(z_new, _xhat(z2, eps2, a2, s2), eps, xh, xt)


def spndm_first_step(z, i: int, oracle: EpsilonOracle, grid: TimeGrid) -> StepOut:
    """Pseudo improved Euler step used for the first S-PNDM step (i = N).

    ``carry`` is x_hat_N, which seeds the extrapolation chain; the history
    holds eps_hat(z_N, t_N) for the following multistep update.
    """
    t, a, s, t_prev, a_prev, s_prev = _node(grid, i)
    eps = oracle(z, t)
    z_trial = a_prev * _xhat(z, eps, a, s) + s_prev * eps
    eps_avg = 0.5 * (eps + oracle(z_trial, t_prev))
    xh = _xhat(z, eps_avg, a, s)
    return StepOut(a_prev * xh + s_prev * eps_avg, xh, eps_avg, xh, xh, (eps,))


def la_spndm_step(z, eps_next, prev, i: int, la: float, oracle: EpsilonOracle, grid: TimeGrid) -> StepOut:
    """Pseudo linear multistep update with lookahead.

    ``eps_next`` is eps_hat(z_{i+1}, t_{i+1}) and ``prev`` the extrapolated
    estimate x_tilde_{[i+1:i+2]} carried from the previous step; unlike the
    other families the carried value is the extrapolated estimate.
    """
    if eps_next is None or prev is None:
        raise SequencingError("S-PNDM multistep update needs the previous step's noise and estimate")
    t, a, s, _, a_prev, s_prev = _node(grid, i)
    eps = oracle(z, t)
    eps_ms = 0.5 * (3.0 * eps - eps_next)
    xh = _xhat(z, eps_ms, a, s)
    xt = lookahead(xh, prev, la)
    return StepOut(a_prev * xt + s_prev * eps_ms, xt, eps_ms, xh, xt, (eps,))
