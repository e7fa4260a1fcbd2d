import csv
import math

import numpy as np
import pytest

from langevin_transport import flow as fl
from langevin_transport import oracle as orc
from langevin_transport.measures import AbsValue, GaussianQuadratic, Linear, SmoothedAbs, SphereLinear, SphereUniform, Zero

X = np.linspace(-3, 3, 13)[:, None]


def test_time_grid():
    g = fl.time_grid(8.0, 100, 4)
    assert g[0] == 0 and g[-1] == pytest.approx(8.0) and np.all(np.diff(g) > 0)
    assert g[1] == pytest.approx(0.08 / 16)
    assert len(g) == 100 + 4
    with pytest.raises(fl.FlowError):
        fl.time_grid(0.0)


def test_default_horizon():
    assert fl.default_horizon(0.0, 1.0) == 1.0
    tau = fl.default_horizon(1.0, 1.0, 1e-4)
    assert math.exp(-tau) == pytest.approx(1e-4)


def test_zero_perturbation_is_identity():
    res = fl.forward_map_S(fl.Oracle1D(Zero(), 1.0), X, tau=2.0, n_steps=50)
    assert np.allclose(res.endpoint, X, atol=1e-13)
    assert np.allclose(res.jacobian, 1.0, atol=1e-13)


def test_linear_closed_form_and_round_trip():
    field, tau = fl.Oracle1D(Linear(1.0), 1.0), 8.0
    S = fl.forward_map_S(field, X, tau=tau, n_steps=200)
    assert np.allclose(S.endpoint, X - math.expm1(-tau), atol=1e-10)
    T = fl.inverse_map_T(field, X, tau=tau, n_steps=200)
    assert np.allclose(T.endpoint, X + math.expm1(-tau), atol=1e-10)
    # the truncated T differs from the exact map x - 1 by the e^{-tau} tail
    assert np.max(np.abs(T.endpoint - (X - 1))) <= math.exp(-tau) * (1 + 1e-6)
    back = fl.forward_map_S(field, T.endpoint, tau=tau, n_steps=200)
    assert np.max(np.abs(back.endpoint - X)) <= 1e-10


def test_smoothed_abs_matches_monotone_map():
    w = SmoothedAbs(1.0)
    T = fl.inverse_map_T(fl.Oracle1D(w, 1.0), X, tau=12.0, n_steps=600)
    exact, dexact = orc.monotone_map(w, 1.0, X[:, 0])
    assert np.max(np.abs(T.endpoint[:, 0] - exact)) <= 1e-4
    err = np.abs(T.jacobian[:, 0, 0] - dexact)
    kink = X[:, 0] == 0
    # at the smoothed kink the early-time Hessian varies on the scale eps
    assert err[~kink].max() <= 1e-3 and err[kink].max() <= 1e-2


def test_hermite_map():
    w = Linear(0.5)
    res = fl.inverse_map_T(fl.Oracle1D(w, 1.0), np.linspace(-4, 4, 9)[:, None], tau=6.0, n_steps=100)
    hm = fl.HermiteMap(res)
    x = np.linspace(-4, 4, 101)
    assert np.allclose(hm(x), x + 0.5 * math.expm1(-6.0), atol=1e-10)
    with pytest.raises(fl.FlowError):
        hm(np.array([5.0]))


def test_empirical_lipschitz():
    probes = np.linspace(-2, 2, 41)[:, None]
    ident = lambda p: (p, np.ones((len(p), 1, 1)))
    rep = fl.empirical_lipschitz(ident, probes)
    assert rep.sup_jacobian_norm == 1.0 and rep.pairwise_ratio_sup == pytest.approx(1.0)
    lin = lambda p: (3 * p + 1, 3 * np.ones((len(p), 1, 1)))
    rep = fl.empirical_lipschitz(lin, probes, pair_budget=100)
    assert rep.pairwise_ratio_sup == pytest.approx(3.0)
    with pytest.raises(fl.FlowError):
        fl.empirical_lipschitz(ident, probes[:1])


def test_pushforward_examples():
    m = GaussianQuadratic(1.0)
    rep = fl.pushforward_check(lambda p: p - 1.0, m, Linear(1.0), n_samples=10_000, mode="quantile")
    assert rep.ks_statistic <= 1e-3 and abs(rep.mean_discrepancy[0]) <= 1e-10
    rep = fl.pushforward_check(lambda p: p - 1.0, m, Linear(1.0), n_samples=10_000, mode="random")
    assert rep.ks_statistic <= rep.ks_null_99
    # the identity does not push mu onto a shifted target
    rep = fl.pushforward_check(lambda p: p, m, Linear(1.0), n_samples=10_000, mode="quantile")
    assert rep.ks_statistic > 0.3
    w = AbsValue(1.0)
    T = lambda p: orc.monotone_map(w, 1.0, p[:, 0])[0][:, None]
    assert fl.pushforward_check(T, m, w, n_samples=4000, mode="quantile").ks_statistic <= 1e-3
    with pytest.raises(fl.FlowError):
        fl.pushforward_check(lambda p: p, m, Linear(1.0), n_samples=10)


def test_sharpness_pairwise():
    # W = -L|x| with L = 1: the flow-built T expands by more than e^{1/2} near 0
    w = SmoothedAbs(1.0, 1e-3, 1, -1.0)
    probes = np.linspace(-0.5, 0.5, 21)[:, None]
    rep = fl.empirical_lipschitz(lambda p: fl.inverse_map_T(fl.Oracle1D(w, 1.0), p, tau=12.0, n_steps=600),
                                 probes)
    assert rep.pairwise_ratio_sup >= math.exp(0.5) * (1 - 1e-2)


def test_sphere_flow_round_trip_and_pole():
    field = fl.OracleSphereAxisymmetric(1.0, lmax=60)
    th = np.array([0.0, 0.4, 1.5, 2.9])
    pts = np.stack([np.sin(th), np.zeros_like(th), np.cos(th)], axis=1)
    T = fl.inverse_map_T(field, pts, tau=6.0, n_steps=200)
    assert np.allclose(np.linalg.norm(T.endpoint, axis=1), 1.0, atol=1e-12)
    # W = x_3 moves mass toward the south pole; the poles are fixed
    assert np.allclose(T.endpoint[0], [0, 0, 1], atol=1e-12)
    assert np.all(T.endpoint[1:3, 2] < pts[1:3, 2])
    S = fl.forward_map_S(field, T.endpoint, tau=6.0, n_steps=200)
    assert np.max(np.linalg.norm(S.endpoint - pts, axis=1)) <= 1e-6


def test_monte_carlo_field_linear():
    m, w = GaussianQuadratic(1.0), Linear(1.0)
    field = fl.MonteCarloField(m, w, n_paths=2000, dt=1e-2, seed=1)
    vel, hess = field.evaluate(0.5, np.array([[0.3]]))
    assert vel[0, 0] == pytest.approx(math.exp(-0.5), abs=2e-2)
    assert abs(hess[0, 0, 0]) <= 0.2


def test_export_csv(tmp_path):
    res = fl.forward_map_S(fl.Oracle1D(Linear(1.0), 1.0), X[:3], tau=1.0, n_steps=10)
    path = tmp_path / "map.csv"
    fl.export_map_csv(path, res)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x0", "y0", "J00"] and len(rows) == 4
    assert float(rows[1][1]) == res.endpoint[0, 0]


def test_step_guard():
    with pytest.raises(fl.FlowError, match="more steps"):
        fl.forward_map_S(fl.Oracle1D(Linear(30.0), 1.0), X[:2], tau=1.0, n_steps=2, graded=1)
