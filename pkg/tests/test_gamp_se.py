import numpy as np
import pytest

from graphamp import NumericalError
from graphamp.gamp_se import (GaussBernoulliPrior, GaussianPrior, GlmScalars,
                              QuadSpec, RademacherPrior, gamp_overlap_se,
                              gh_points, make_channel)
from graphamp.prox import ProxSpec

# frozen two-sided quadrature oracles for the soft-threshold instance
# lam = 0.6, delta = 0.5, sigma = 0.5, prior 0.25 * N(0, 4):
# the t = 1 scalars are closed-form, m/p/kappa1 were integrated with an
# independent adaptive-quadrature implementation
T1 = {
    "d0": -0.25,
    "alpha1": 4.0,
    "nu1": 0.25,
    "kappa2_1": 0.15625,
    "m1": 0.3465217096,
    "p1": 0.3602616856,
    "kappa1_1": 0.2401843904,
}


def _lasso_pieces(lam=0.6, sigma=0.5):
    prior = GaussBernoulliPrior(eps=0.25, var=4.0)
    scalars = GlmScalars(penalty=ProxSpec("abs", gamma=1.0, weight=lam),
                         loss="squared")
    channel = make_channel("linear", sigma)
    return prior, channel, scalars


def test_gh_points_integrate_polynomials():
    z, w = gh_points(61)
    assert abs(np.sum(w) - 1.0) < 1e-12
    assert abs(np.sum(w * z ** 2) - 1.0) < 1e-10
    assert abs(np.sum(w * z ** 4) - 3.0) < 1e-8


def test_first_iteration_scalars_are_closed_form():
    prior, channel, scalars = _lasso_pieces()
    pts = gamp_overlap_se(prior, channel, scalars, delta=0.5, T=1, beta0=1.0)
    assert abs(pts[0].d - T1["d0"]) < 1e-12
    assert abs(pts[1].alpha - T1["alpha1"]) < 1e-12
    assert abs(pts[1].nu - T1["nu1"]) < 1e-10
    assert abs(pts[1].kappa2 - T1["kappa2_1"]) < 1e-10


def test_first_iteration_expectations_match_independent_quadrature():
    prior, channel, scalars = _lasso_pieces()
    pts = gamp_overlap_se(prior, channel, scalars, delta=0.5, T=1, beta0=1.0)
    assert abs(pts[1].m - T1["m1"]) < 1e-6
    assert abs(pts[1].p - T1["p1"]) < 1e-6
    assert abs(pts[1].kappa1 - T1["kappa1_1"]) < 1e-6


def test_mc_quadrature_tracks_gh():
    prior, channel, scalars = _lasso_pieces(lam=1.2)
    gh = gamp_overlap_se(prior, channel, scalars, delta=0.5, T=8, beta0=1.0)
    mc = gamp_overlap_se(prior, channel, scalars, delta=0.5, T=8, beta0=1.0,
                         quad=QuadSpec("mc", samples=20_000, seed=2))
    for t in range(1, 9):
        assert abs(gh[t].m - mc[t].m) < 0.02
        assert abs(gh[t].kappa1 - mc[t].kappa1) < 0.03


def test_mc_quadrature_is_seed_deterministic():
    prior, channel, scalars = _lasso_pieces()
    a = gamp_overlap_se(prior, channel, scalars, delta=0.5, T=5, beta0=1.0,
                        quad=QuadSpec("mc", samples=2000, seed=3))
    b = gamp_overlap_se(prior, channel, scalars, delta=0.5, T=5, beta0=1.0,
                        quad=QuadSpec("mc", samples=2000, seed=3))
    assert all(x.m == y.m and x.kappa1 == y.kappa1 for x, y in zip(a, b))


def test_vanishing_signal_forces_vanishing_overlap():
    # rho = 0 is rejected as degenerate; the overlap must scale away
    # linearly with the prior mass as rho -> 0
    scalars = GlmScalars(penalty=ProxSpec("abs", gamma=1.0, weight=0.6),
                         loss="squared")
    channel = make_channel("linear", 0.5)
    with pytest.raises(ValueError):
        gamp_overlap_se(GaussBernoulliPrior(eps=0.0, var=4.0), channel,
                        scalars, delta=0.5, T=2, beta0=1.0)
    for eps in (1e-3, 2e-3):
        prior = GaussBernoulliPrior(eps=eps, var=4.0)
        pts = gamp_overlap_se(prior, channel, scalars, delta=0.5, T=6,
                              beta0=1.0)
        assert max(abs(p.m) for p in pts[1:]) <= 5.0 * prior.rho


def test_fixed_point_stable_under_doubled_samples():
    prior, channel, scalars = _lasso_pieces()
    a = gamp_overlap_se(prior, channel, scalars, delta=0.5, T=12, beta0=1.0,
                        quad=QuadSpec("mc", samples=4000, seed=4))
    b = gamp_overlap_se(prior, channel, scalars, delta=0.5, T=12, beta0=1.0,
                        quad=QuadSpec("mc", samples=8000, seed=5))
    assert abs(a[12].m - b[12].m) < 0.02


def test_priors_expose_second_moment_and_sampling():
    gb = GaussBernoulliPrior(eps=0.25, var=4.0)
    assert abs(gb.rho - 1.0) < 1e-12
    assert abs(RademacherPrior().rho - 1.0) < 1e-12
    g = GaussianPrior(var=2.0)
    assert abs(g.rho - 2.0) < 1e-12
    x = gb.sample(50_000, np.random.default_rng(0))
    assert abs(np.mean(x == 0.0) - 0.75) < 0.01
    assert abs(x.var() - 1.0) < 0.05
