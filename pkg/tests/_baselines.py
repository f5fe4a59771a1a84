"""Plain reference samplers written from the textbook update formulas.

They share only the schedule's alpha/sigma values and the per-chain random
streams with the package; every update rule is coded afresh here (posterior
mean form for DDPM, the transfer function form for S-PNDM, raw
exponential-integrator forms for DPM-Solver, scipy quadrature for DEIS).
Each returns the list of states [z_N, ..., z_0] for a batch of chains plus the
final data estimate.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate, optimize

from ladpm.rng import chain_normals


def initial_and_noise(seed, n, dim, rows):
    draws = np.stack([chain_normals(seed, c, rows, dim) for c in range(n)], axis=1)
    return draws[0], draws[1:]


def _ab(sch, t):
    la = float(sch.log_alpha(t))
    return float(np.exp(la)), float(np.sqrt(-np.expm1(2.0 * la)))


def _final(oracle, sch, z, t0):
    a, s = _ab(sch, t0)
    return (z - s * oracle(z, t0)) / a


def ddpm(oracle, sch, times, seed, n, dim):
    N = len(times) - 1
    z, noise = initial_and_noise(seed, n, dim, N + 1)
    path = [z]
    for k, i in enumerate(range(N, 0, -1)):
        t, s = times[i], times[i - 1]
        ab_t = float(np.exp(2 * sch.log_alpha(t)))  # alpha-bar
        ab_s = float(np.exp(2 * sch.log_alpha(s)))
        beta = 1.0 - ab_t / ab_s
        x0 = (z - np.sqrt(1 - ab_t) * oracle(z, t)) / np.sqrt(ab_t)
        mean = (np.sqrt(ab_s) * beta / (1 - ab_t)) * x0 + (np.sqrt(ab_t / ab_s) * (1 - ab_s) / (1 - ab_t)) * z
        var = (1 - ab_s) / (1 - ab_t) * beta
        z = mean + np.sqrt(var) * noise[k]
        path.append(z)
    return path, _final(oracle, sch, z, times[0])


def ddim(oracle, sch, times, seed, n, dim):
    N = len(times) - 1
    z, _ = initial_and_noise(seed, n, dim, 1)
    path = [z]
    for i in range(N, 0, -1):
        a, s = _ab(sch, times[i])
        ap, sp = _ab(sch, times[i - 1])
        e = oracle(z, times[i])
        z = ap * (z - s * e) / a + sp * e
        path.append(z)
    return path, _final(oracle, sch, z, times[0])


def _pndm_transfer(sch, z, e, t, tp):
    ab = float(np.exp(2 * sch.log_alpha(t)))
    abp = float(np.exp(2 * sch.log_alpha(tp)))
    return np.sqrt(abp / ab) * z - (abp - ab) / (np.sqrt(ab) * (np.sqrt((1 - abp) * ab) + np.sqrt((1 - ab) * abp))) * e


def s_pndm(oracle, sch, times, seed, n, dim):
    N = len(times) - 1
    z, _ = initial_and_noise(seed, n, dim, 1)
    path = [z]
    e_old = None
    for i in range(N, 0, -1):
        t, tp = times[i], times[i - 1]
        e = oracle(z, t)
        if e_old is None:
            z1 = _pndm_transfer(sch, z, e, t, tp)
            e_use = 0.5 * (e + oracle(z1, tp))
        else:
            e_use = 1.5 * e - 0.5 * e_old
        z = _pndm_transfer(sch, z, e_use, t, tp)
        e_old = e
        path.append(z)
    return path, _final(oracle, sch, z, times[0])


def _t_of(sch, lam):
    return optimize.brentq(lambda t: float(sch.log_snr(t)) - lam, sch.t_min, 1.0, xtol=1e-16, rtol=1e-15)


def dpm_solver2(oracle, sch, times, seed, n, dim):
    N = len(times) - 1
    z, _ = initial_and_noise(seed, n, dim, 1)
    path = [z]
    for i in range(N, 0, -1):
        t, tn = times[i], times[i - 1]
        lt, ln = float(sch.log_snr(t)), float(sch.log_snr(tn))
        h = ln - lt
        s = _t_of(sch, lt + 0.5 * h)
        a_t, _ = _ab(sch, t)
        a_s, s_s = _ab(sch, s)
        a_n, s_n = _ab(sch, tn)
        e = oracle(z, t)
        u = (a_s / a_t) * z - s_s * (np.exp(0.5 * h) - 1) * e
        z = (a_n / a_t) * z - s_n * (np.exp(h) - 1) * oracle(u, s)
        path.append(z)
    return path, _final(oracle, sch, z, times[0])


def dpm_solver3(oracle, sch, times, seed, n, dim):
    r1, r2 = 1.0 / 3.0, 2.0 / 3.0
    N = len(times) - 1
    z, _ = initial_and_noise(seed, n, dim, 1)
    path = [z]
    for i in range(N, 0, -1):
        t, tn = times[i], times[i - 1]
        lt, ln = float(sch.log_snr(t)), float(sch.log_snr(tn))
        h = ln - lt
        s1, s2 = _t_of(sch, lt + r1 * h), _t_of(sch, lt + r2 * h)
        a_t, _ = _ab(sch, t)
        a1, sg1 = _ab(sch, s1)
        a2, sg2 = _ab(sch, s2)
        a_n, s_n = _ab(sch, tn)
        e = oracle(z, t)
        u1 = (a1 / a_t) * z - sg1 * (np.exp(r1 * h) - 1) * e
        d1 = oracle(u1, s1) - e
        u2 = (
            (a2 / a_t) * z
            - sg2 * (np.exp(r2 * h) - 1) * e
            - (sg2 * r2 / r1) * ((np.exp(r2 * h) - 1) / (r2 * h) - 1) * d1
        )
        d2 = oracle(u2, s2) - e
        z = (a_n / a_t) * z - s_n * (np.exp(h) - 1) * e - (s_n / r2) * ((np.exp(h) - 1) / h - 1) * d2
        path.append(z)
    return path, _final(oracle, sch, z, times[0])


def _dlog_alpha(sch, t):
    """d log(alpha)/dt rebuilt from the schedule parameters."""
    if sch.kind == "continuous-vp":
        return -0.5 * (sch.beta_min + t * (sch.beta_max - sch.beta_min))
    n = sch.num_steps
    betas = np.linspace(sch.beta_min, sch.beta_max, n) * (1000.0 / n)
    j = min(int(np.floor(t * n)), n - 1)
    return 0.5 * np.log(1.0 - betas[j]) * n


def deis_coeffs(sch, times, i, r):
    """c_ij = int_{t_i}^{t_{i-1}} alpha_{i-1} d(sigma/alpha)/dtau l_j(tau) dtau by adaptive quadrature."""
    a_prev, _ = _ab(sch, times[i - 1])
    nodes = [times[i + j] for j in range(r + 1)]

    def basis(tau):
        out = np.ones(len(nodes))
        for j, tj in enumerate(nodes):
            for m, tm in enumerate(nodes):
                if m != j:
                    out[j] *= (tau - tm) / (tj - tm)
        return out

    def weight(tau):
        a, s = _ab(sch, tau)
        # d(sigma/alpha)/dtau = -dlogalpha/dtau / (alpha sigma)
        return -a_prev * _dlog_alpha(sch, tau) / (a * s)

    lo, hi = times[i - 1], times[i]
    pts = None
    if sch.kind == "discrete-vp":
        k = np.arange(sch.num_steps + 1) / sch.num_steps
        pts = list(k[(k > lo) & (k < hi)]) or None
    val, _ = integrate.quad_vec(lambda u: weight(u) * basis(u), lo, hi, points=pts, epsabs=1e-15, epsrel=1e-13,
                                limit=2000)
    return -val


def deis(oracle, sch, times, seed, n, dim, r):
    N = len(times) - 1
    z, _ = initial_and_noise(seed, n, dim, 1)
    path = [z]
    hist = []
    for i in range(N, 0, -1):
        a, _ = _ab(sch, times[i])
        ap, _ = _ab(sch, times[i - 1])
        hist.insert(0, oracle(z, times[i]))
        rr = min(r, N - i)
        c = deis_coeffs(sch, times, i, rr)
        z = (ap / a) * z + sum(c[j] * hist[j] for j in range(rr + 1))
        hist = hist[: max(r, 1)]
        path.append(z)
    return path, _final(oracle, sch, z, times[0])


FAMILIES = {
    "ddpm": ddpm,
    "ddim": ddim,
    "s_pndm": s_pndm,
    "dpm_solver2": dpm_solver2,
    "dpm_solver3": dpm_solver3,
    "deis_tab": lambda *a: deis(*a, r=2),
}
