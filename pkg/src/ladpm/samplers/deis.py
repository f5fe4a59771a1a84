"""Time-domain Adams-Bashforth DEIS (tAB-DEIS) and its lookahead variant.

The probability-flow ODE of a VP schedule is dz/dt = f(t) z + g^2(t)/(2 sigma_t) eps
with f = d log(alpha)/dt and g^2 = -2 f.  Its exponential-integrator solution over
one step is

    z_{i-1} = (alpha_{i-1}/alpha_i) z_i + int_{t_i}^{t_{i-1}} alpha_{i-1} d(sigma/alpha)/dtau eps(tau) dtau

and tAB-DEIS replaces eps(tau) by the Lagrange polynomial through the last
r + 1 evaluations at t_i, ..., t_{i+r}.  The integral of each basis polynomial
against the weight gives the coefficient c_{ij}.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError
from ..oracle import EpsilonOracle
from ..schedule import TimeGrid
from .steps import StepOut, _node, _xhat, lookahead

GAUSS_NODES = 64


def lagrange_basis(nodes: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis polynomials, shape (len(nodes), len(tau))."""
    nodes = np.asarray(nodes, dtype=np.float64)
    if np.unique(nodes).size != nodes.size:
        raise DomainError(f"interpolation nodes must be distinct, got {nodes}")
    out = np.ones((nodes.size, np.size(tau)))
    for j, tj in enumerate(nodes):
        for m, tm in enumerate(nodes):
            if m != j:
                out[j] *= (tau - tm) / (tj - tm)
    return out


def _weight(grid: TimeGrid, a_prev: float, tau: np.ndarray) -> np.ndarray:
    # alpha_{i-1} d(sigma/alpha)/dtau, using d(sigma/alpha)/dtau = -f / (alpha sigma)
    sch = grid.schedule
    a, s = sch.alpha_sigma(tau)
    return -a_prev * sch.dlog_alpha_dt(tau) / (a * s)


def deis_tab_coeffs(grid: TimeGrid, i: int, r: int, quad_nodes: int = GAUSS_NODES) -> np.ndarray:
    """Coefficients c_{i0}, ..., c_{ir} of the tAB-DEIS update at step i.

    Gauss-Legendre quadrature with ``quad_nodes`` points on every smooth piece
    of [t_{i-1}, t_i] (pieces are split at schedule breakpoints).
    """
    if r < 0 or i + r > grid.steps:
        raise DomainError(f"DEIS order {r} at step {i} needs nodes beyond t_N (N={grid.steps})")
    _, _, _, _, a_prev, _ = _node(grid, i)
    lo, hi = grid.times[i - 1], grid.times[i]
    edges = np.concatenate([[lo], grid.schedule.breakpoints(lo, hi), [hi]])
    x, w = np.polynomial.legendre.leggauss(quad_nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    tau = (mid[:, None] + half[:, None] * x).ravel()
    wts = (half[:, None] * w).ravel()
    basis = lagrange_basis(grid.times[i : i + r + 1], tau)
    # integral runs from t_i down to t_{i-1}
    return -(basis * (wts * _weight(grid, a_prev, tau))).sum(axis=1)


def deis_coeff_table(grid: TimeGrid, r: int) -> dict[int, np.ndarray]:
    """Coefficients for every step, with the order ramped down near t_N."""
    return {i: deis_tab_coeffs(grid, i, min(r, grid.steps - i)) for i in range(1, grid.steps + 1)}


def la_deis_step(
    z,
    history,
    prev,
    i: int,
    r: int,
    la: float,
    oracle: EpsilonOracle,
    grid: TimeGrid,
    coeffs: np.ndarray | None = None,
) -> StepOut:
    """One LA-tAB-DEIS step.

    ``history`` holds earlier noise evaluations newest first
    (eps_hat at t_{i+1}, t_{i+2}, ...); the effective order is
    min(r, len(history)).  ``prev`` is the data estimate x_ddot of step i+1.
    """
    t, a, s, _, a_prev, s_prev = _node(grid, i)
    eps = oracle(z, t)
    window = (eps,) + tuple(history)[: max(r, 0)]
    order = len(window) - 1
    if coeffs is None:
        coeffs = deis_tab_coeffs(grid, i, order)
    if len(coeffs) != len(window):
        raise DomainError(f"got {len(coeffs)} coefficients for a window of {len(window)}")
    ddim_coeff = s_prev - a_prev * s / a
    eps_ab = sum(c * e for c, e in zip(coeffs, window)) / ddim_coeff
    xdd = _xhat(z, eps_ab, a, s)
    xt = lookahead(xdd, prev, la)
    return StepOut(a_prev * xt + s_prev * eps_ab, xdd, eps_ab, xdd, xt, window[:r] if r > 0 else ())
