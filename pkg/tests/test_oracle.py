import numpy as np
import pytest
from scipy import integrate

from ladpm.errors import ConfigError, DegenerateTimeError
from ladpm.oracle import GmmTarget, NoisyOracle, gaussian_oracle, gmm_oracle, noisy_wrapper, point_mass_oracle
from ladpm.samplers import xhat
from ladpm.schedule import ContinuousVP, DiscreteVP, make_time_grid

SCH = DiscreteVP()


def quadrature_eps(density, z, t, sch, lo=-8.0, hi=8.0, atoms=()):
    """eps_hat via E[x|z] computed by 1-D numerical integration over x."""
    a, s = sch.alpha_sigma(t)

    def lik(x):
        return np.exp(-0.5 * ((z - a * x) / s) ** 2)

    num, _ = integrate.quad(lambda x: x * density(x) * lik(x), lo, hi, epsabs=0, epsrel=1e-12, limit=400)
    den, _ = integrate.quad(lambda x: density(x) * lik(x), lo, hi, epsabs=0, epsrel=1e-12, limit=400)
    return (z - a * num / den) / s


def normal_pdf(x, m, v):
    return np.exp(-0.5 * (x - m) ** 2 / v) / np.sqrt(2 * np.pi * v)


def test_point_mass_oracle():
    x0 = np.array([0.7, -0.2])
    orc = point_mass_oracle(x0, SCH)
    a, s = SCH.alpha_sigma(0.4)
    np.testing.assert_allclose(orc(a * x0, 0.4), 0.0, atol=1e-15)
    u = np.array([0.3, 1.1])
    np.testing.assert_allclose(orc(a * x0 + s * u, 0.4), u, rtol=1e-12)
    z = np.array([0.5, 0.5])
    np.testing.assert_allclose(point_mass_oracle([0.0, 0.0], SCH)(z, 0.4), z / s, rtol=1e-15)


def test_point_mass_xhat_exact_on_grid():
    x0 = np.array([1.3])
    orc = point_mass_oracle(x0, SCH)
    g = make_time_grid(SCH, 25)
    z = np.random.default_rng(0).standard_normal((4, 1))
    for t in g.times:
        np.testing.assert_allclose(xhat(z, orc(z, t), t, SCH), np.broadcast_to(x0, z.shape), atol=1e-12 * max(1, 1 / SCH.alpha(t)))


def test_standard_normal_oracle_is_sigma_z():
    orc = gaussian_oracle(0.0, 1.0, SCH)
    z = np.linspace(-2, 2, 5)[:, None]
    for t in (0.1, 0.5, 0.99):
        np.testing.assert_allclose(orc(z, t), SCH.sigma(t) * z, rtol=1e-12, atol=1e-15)


def test_gaussian_oracle_at_mean_input():
    orc = gaussian_oracle([0.4], 0.3, SCH)
    a = SCH.alpha(0.6)
    np.testing.assert_allclose(orc(np.array([a * 0.4]), 0.6), 0.0, atol=1e-14)


def test_gaussian_oracle_matches_quadrature():
    m, sd = 0.4, 0.7
    orc = gaussian_oracle([m], sd, SCH)
    rng = np.random.default_rng(4)
    for _ in range(10):
        z, t = rng.normal(), rng.uniform(0.05, 1.0)
        ref = quadrature_eps(lambda x: normal_pdf(x, m, sd**2), z, t, SCH)
        assert orc(np.array([z]), t)[0] == pytest.approx(ref, abs=1e-8)


def test_gaussian_oracle_rejects_bad_std():
    with pytest.raises(ConfigError):
        gaussian_oracle(0.0, 0.0, SCH)


def test_gmm_single_component_equals_gaussian():
    tg = GmmTarget([1.0], [[0.3, -0.1]], [0.49])
    z = np.random.default_rng(5).standard_normal((6, 2))
    np.testing.assert_allclose(gmm_oracle(tg, SCH)(z, 0.3), gaussian_oracle([0.3, -0.1], 0.7, SCH)(z, 0.3), rtol=1e-12)


def test_gmm_symmetry():
    tg = GmmTarget([0.5, 0.5], [[-1.0], [1.0]], [0.04, 0.04])
    assert gmm_oracle(tg, SCH)(np.zeros((1, 1)), 0.5)[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_gmm_matches_quadrature():
    w, m, v = [0.3, 0.7], [-1.0, 1.5], [0.04, 0.09]
    tg = GmmTarget(w, [[mu] for mu in m], v)
    orc = gmm_oracle(tg, ContinuousVP())

    def density(x):
        return sum(wk * normal_pdf(x, mk, vk) for wk, mk, vk in zip(w, m, v))

    rng = np.random.default_rng(6)
    for _ in range(10):
        z, t = rng.normal(scale=1.5), rng.uniform(0.05, 1.0)
        ref = quadrature_eps(density, z, t, ContinuousVP())
        assert orc(np.array([z]), t)[0] == pytest.approx(ref, abs=1e-8)


def test_gmm_extreme_inputs_are_finite():
    tg = GmmTarget([0.5, 0.5], [[-1.0], [1.0]], [0.0, 0.04])
    out = gmm_oracle(tg, SCH)(np.array([[1e3], [-1e3], [0.0]]), 0.01)
    assert np.all(np.isfinite(out))


def test_gmm_zero_variance_is_point_mass():
    tg = GmmTarget([1.0], [[0.8]], [0.0])
    z = np.random.default_rng(7).standard_normal((5, 1))
    np.testing.assert_allclose(gmm_oracle(tg, SCH)(z, 0.4), point_mass_oracle([0.8], SCH)(z, 0.4), rtol=1e-12)


def test_gmm_target_validation_and_moments():
    with pytest.raises(ConfigError):
        GmmTarget([0.5, 0.4], [[0.0], [1.0]], [1.0, 1.0])
    with pytest.raises(ConfigError):
        GmmTarget([0.5, 0.5], [[0.0], [1.0]], [1.0])
    with pytest.raises(ConfigError):
        GmmTarget([1.0], [[0.0]], [-1.0])
    tg = GmmTarget([0.25, 0.75], [[-2.0], [2.0]], [1.0, 0.25])
    assert tg.mean()[0] == pytest.approx(1.0)
    # E[x^2] = 0.25 * 5 + 0.75 * 4.25 = 4.4375
    assert tg.variance()[0] == pytest.approx(3.4375)
    assert GmmTarget.from_dict(tg.to_dict()).to_dict() == tg.to_dict()
    x = tg.sample(200_000, np.random.default_rng(8))
    assert x.mean() == pytest.approx(1.0, abs=4 * np.sqrt(3.4375 / 200_000))


def test_oracle_at_t_zero_is_degenerate():
    with pytest.raises(DegenerateTimeError):
        point_mass_oracle([0.0], SCH)(np.zeros(1), 0.0)


def test_noisy_zero_scale_is_identical():
    inner = gaussian_oracle(0.0, 1.0, SCH)
    z = np.random.default_rng(9).standard_normal((5, 1))
    assert np.array_equal(noisy_wrapper(inner, 0.0, 1)(z, 0.3), inner(z, 0.3))


def test_noisy_reproducible_and_keyed():
    inner = gaussian_oracle(0.0, 1.0, SCH)
    z = np.ones((4, 1))
    a = [noisy_wrapper(inner, 0.1, 3)(z, 0.5) for _ in range(2)]
    np.testing.assert_array_equal(a[0], a[1])
    w = noisy_wrapper(inner, 0.1, 3)
    assert not np.array_equal(w.spawn(1)(z, 0.5), w.spawn(2)(z, 0.5))
    assert not w.deterministic and inner.deterministic


def test_noisy_variance():
    inner = gaussian_oracle(0.0, 1.0, SCH)
    scale, n = 0.3, 100_000
    z = np.zeros((n, 1))
    d = (noisy_wrapper(inner, scale, 11)(z, 0.5) - inner(z, 0.5)).ravel()
    var = d.var(ddof=1)
    se = scale**2 * np.sqrt(2.0 / (n - 1))
    assert abs(var - scale**2) <= 3 * se


def test_noisy_rejects_negative_scale():
    with pytest.raises(ConfigError):
        NoisyOracle(gaussian_oracle(0.0, 1.0, SCH), -0.1, 0)
