import math

import numpy as np
import pytest
from scipy import stats

from langevin_transport import oracle as orc
from langevin_transport import rng as rngmod
from langevin_transport import semigroup as sg
from langevin_transport.bounds import EuclideanParams, theta_euclidean
from langevin_transport.measures import (
    GaussianQuadratic, Linear, PerturbedConvex, SmoothedAbs, SphereLinear, SphereUniform, Zero,
)


def _run_euclid(m, x0, t, dt, count, seed=0):
    gen = rngmod.generator(seed, 1)
    st = sg.EuclideanPathState.start(np.atleast_1d(x0), count)
    for _ in range(int(round(t / dt))):
        st = sg.step_euclidean(m, st, dt, gen)
    return st


def test_gaussian_variation_flows():
    kappa, t, dt = 1.5, 1.0, 1e-4
    st = _run_euclid(GaussianQuadratic(kappa), 0.3, t, dt, 64)
    assert np.allclose(st.J[:, 0, 0], math.exp(-kappa * t), rtol=1e-3)
    assert np.all(st.H == 0)


def test_ou_endpoint_distribution():
    st = _run_euclid(GaussianQuadratic(1.0), 0.0, 1.0, 1e-3, 20_000)
    sd = math.sqrt(1 - math.exp(-2.0))
    assert stats.kstest(st.x[:, 0] / sd, "norm").pvalue > 1e-3


def test_ou_transition_sample():
    gen = rngmod.generator(3, 2)
    y = sg.ou_transition_sample(np.array([4.0]), math.log(2), 1.0, gen, 200_000)[:, 0]
    assert y.mean() == pytest.approx(2.0, abs=0.01)
    assert y.var() == pytest.approx(0.75, rel=0.01)


def test_variation_bounds_perturbed_convex():
    m = PerturbedConvex(2.0, 0.5, 2)
    kappa, K = m.kappa, m.K
    times, jn, hn = sg.simulate_variation_paths(m, np.array([0.3, -1.0]), 1.0, n_paths=2000, dt=1e-3,
                                                u=np.array([0.6, 0.8]))
    assert np.all(jn <= np.exp(-kappa * times) * (1 + 1e-2))
    hb = K * (np.exp(-kappa * times) - np.exp(-2 * kappa * times)) / kappa
    assert np.all(hn <= hb * (1 + 1e-2) + 1e-12)


def test_est_pt_examples():
    m = GaussianQuadratic(1.0)
    z = sg.est_Pt(m, Zero(), np.array([0.4]), 0.5, n_paths=1000)
    assert z.value == 1.0 and z.std_error == 0.0
    L, t, x = 1.0, 0.5, 0.7
    est = sg.est_Pt(m, Linear(L), np.array([x]), t, n_paths=100_000, seed=1)
    a = math.exp(-t)
    exact = math.exp(-L * a * x + 0.5 * L * L * (1 - a * a))
    assert abs(est.value - exact) <= 4 * est.std_error
    est = sg.est_Pt(m, SmoothedAbs(1.0), np.array([x]), t, n_paths=100_000, seed=1)
    assert abs(est.value - orc.quad_Pt(SmoothedAbs(1.0), 1.0, x, t)[0]) <= 4 * est.std_error


def test_est_grad_linear():
    # Euler flow gives J = (1 - dt)^n; allow that bias on top of the noise
    t, dt = 0.5, 1e-3
    est = sg.est_grad_log_Pt(GaussianQuadratic(1.0), Linear(1.0), np.array([0.2]), t, n_paths=10_000, dt=dt)
    assert abs(est.value[0] + math.exp(-t)) <= 4 * est.std_error[0] + 1e-3


@pytest.mark.parametrize("inverse", ["solve", "adjoint"])
def test_est_hess_euclidean_matches_oracle(inverse):
    w, x, t = SmoothedAbs(1.0), 0.1, 0.5
    est = sg.est_hess_log_Pt_euclidean(GaussianQuadratic(1.0), w, np.array([x]), t, n_paths=50_000,
                                       seed=2, inverse=inverse)
    ref = orc.quad_hess_log_Pt(w, 1.0, x, t)[0]
    assert abs(est.value - ref) <= 4 * est.std_error
    assert est.value <= theta_euclidean(t, EuclideanParams(1.0, 0.0, 1.0)) + 4 * est.std_error
    assert set(est.terms) == {"term1", "term2", "grad"}


def test_est_hess_linear_perturbed_convex_term2_active():
    m = PerturbedConvex(2.0, 0.5, 1)
    est = sg.est_hess_log_Pt_euclidean(m, Linear(1.0), np.array([0.8]), 0.5, n_paths=20_000, seed=4)
    assert np.isfinite(est.value) and est.terms["term2"][0] != 0.0


def test_hess_errors():
    m = GaussianQuadratic(1.0)
    with pytest.raises(sg.SemigroupError):
        sg.est_hess_log_Pt_euclidean(m, Linear(1.0), np.array([0.0]), 0.0)
    with pytest.raises(sg.SemigroupError):
        sg.est_hess_log_Pt_euclidean(m, Linear(1.0), np.array([0.0]), 0.5, inverse="lu")
    # f = exp(-W) is vanishingly small and noisy: the ratio guard fires
    with pytest.raises(sg.SemigroupError, match="ratio unreliable"):
        sg.est_hess_log_Pt_euclidean(m, Linear(40.0), np.array([3.0]), 1.0, n_paths=200, dt=1e-2)


def test_non_finite_detected():
    st = sg.EuclideanPathState.start(np.array([0.0]), 2)
    st.x[0, 0] = np.nan
    with pytest.raises(sg.SemigroupError, match="non-finite"):
        sg.step_euclidean(GaussianQuadratic(1.0), st, 1e-3, xi=np.zeros((2, 1)))


def test_sphere_frame_stays_orthonormal():
    space = SphereUniform(3).space
    x0 = np.array([0.0, 0.0, 1.0])
    st = sg.SpherePathState.start(x0, None, 16, 10.0)
    gen = rngmod.generator(0, 5)
    for _ in range(10_000):
        st = sg.step_sphere(space, st, 1e-3, gen)
    assert np.allclose(np.linalg.norm(st.x, axis=1), 1, atol=1e-12)
    gram = np.einsum("pij,pkj->pik", st.frame, st.frame)
    assert np.allclose(gram, np.eye(2), atol=1e-10)
    assert np.allclose(np.einsum("pij,pj->pi", st.frame, st.x), 0, atol=1e-10)


def test_sphere_eigenfunction_mean():
    space = SphereUniform(3).space
    x0 = np.array([0.0, 0.0, 1.0])
    t = 0.5
    st = sg.SpherePathState.start(x0, None, 20_000, t)
    gen = rngmod.generator(1, 5)
    for _ in range(500):
        st = sg.step_sphere(space, st, 1e-3, gen)
    c = st.x[:, 2]
    assert abs(c.mean() - math.exp(-2 * t)) <= 4 * c.std() / math.sqrt(c.size) + 2e-3


def test_sphere_step_too_large():
    space = SphereUniform(3).space
    st = sg.SpherePathState.start(np.array([0.0, 0.0, 1.0]), None, 1, 1.0)
    with pytest.raises(sg.SemigroupError, match="pi/4"):
        sg.step_sphere(space, st, 0.5, xi=np.array([[1.0, 0.0]]))


def test_sphere_est_pt_matches_spectral():
    m, w = SphereUniform(3), SphereLinear(1.0, 3)
    x = np.array([math.sin(1.0), 0.0, math.cos(1.0)])
    est = sg.est_Pt(m, w, x, 0.3, n_paths=20_000, dt=1e-3)
    ref = orc.SphereSpectral(1.0).Pt(0.3, 1.0)
    assert abs(est.value - ref) <= 4 * est.std_error + 2e-3


def test_sphere_hessian_matches_spectral():
    m, w, th, t = SphereUniform(3), SphereLinear(1.0, 3), 1.0, 0.5
    x = np.array([math.sin(th), 0.0, math.cos(th)])
    v = np.array([math.cos(th), 0.0, -math.sin(th)])  # increasing polar angle
    est = sg.est_hess_log_Pt_sphere(m, w, x, t, v=v, n_paths=20_000, dt=2e-3, seed=3)
    ref = orc.SphereSpectral(1.0).hess_log(t, th)
    assert abs(est.value - ref) <= 4 * est.std_error + 0.02
    with pytest.raises(sg.SemigroupError):
        sg.est_hess_log_Pt_sphere(m, w, x, t, v=x)


def test_sphere_quadratic_variations():
    for t in (0.2, 1.0):
        qv = sg.sphere_quadratic_variations(3, t, n_paths=64, dt=1e-2)
        assert np.all(qv[:, 0] <= (1 - math.exp(-2 * t)) / (2 * t * t) * (1 + 1e-12))
        assert np.all(qv[:, 0] <= 1 / t)
        assert np.all(qv[:, 1] <= 0.5)


def test_reverse_holder_mc():
    val, se, bound = sg.est_reverse_holder(GaussianQuadratic(1.0), SmoothedAbs(1.0), np.array([0.5]), 1.0,
                                           n_paths=50_000)
    assert val <= bound + 4 * se
    _, Pf2, Pf = orc.reverse_holder_margin(SmoothedAbs(1.0), 1.0, 0.5, 1.0)
    assert abs(val - (math.log(Pf2[0]) - 2 * math.log(Pf[0]))) <= 4 * se


def test_martingale_tail():
    rows = sg.martingale_tail(1.0, 2.0, [0.5, 1.0, 2.0], n_sims=20_000, dt=1e-2)
    for delta, emp, bound, margin, m4 in rows:
        assert emp <= bound
        assert margin <= 0 or emp <= bound
    assert rows[0][4] == pytest.approx(3.0, rel=0.1)


def test_thread_count_does_not_change_results():
    args = (GaussianQuadratic(1.0), SmoothedAbs(1.0), np.array([0.3]), 0.5)
    old = rngmod.get_threads()
    try:
        rngmod.set_threads(1)
        a = sg.est_hess_log_Pt_euclidean(*args, n_paths=20_000, dt=1e-2, seed=9)
        rngmod.set_threads(4)
        b = sg.est_hess_log_Pt_euclidean(*args, n_paths=20_000, dt=1e-2, seed=9)
    finally:
        rngmod.set_threads(old)
    assert a.value == b.value and a.std_error == b.std_error
