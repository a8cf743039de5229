import numpy as np

from graphamp import CommitteeModel, GraphInstance, build_committee_instance
from graphamp.engine import run, stationary_provider
from graphamp.graphs import EdgeId, single_loop
from graphamp.nonlinearity import Entrywise, Identity, Zero, relu
from graphamp.state_evolution import (amp_observable_stats, compare,
                                      mc_observable_stats, se_run)
from graphamp.ensembles import sample_goe, stream


def _loop_instance(f, n=400, x0_val=1.0, seed=9):
    g = single_loop("v", n)
    loop = EdgeId("v", "v")
    Y = sample_goe(n, stream(seed, "loop"), scale_N=n)
    return GraphInstance(
        graph=g,
        matrices={loop: Y},
        provider=stationary_provider({loop: f}),
        x0={loop: np.full((n, 1), x0_val)},
    ), loop


def test_identity_updates_keep_variance_fixed():
    inst, loop = _loop_instance(Identity())
    cov = se_run(inst, T=5, reps=4000, seed=0)
    k11 = cov.kernel(loop, 1, 1)[0, 0]
    for t in range(2, 6):
        ktt = cov.kernel(loop, t, t)[0, 0]
        assert abs(ktt - k11) <= 0.05 * k11


def test_zero_map_collapses_covariance():
    inst, loop = _loop_instance(Zero())
    cov = se_run(inst, T=4, reps=500, seed=0)
    for t in range(2, 5):
        assert np.allclose(cov.kernel(loop, t, t), 0.0)


def test_relu_halves_unit_variance():
    # E[max(Z,0)^2] = kappa/2 for Z ~ N(0, kappa); start at kappa = 1
    f = Entrywise(relu, lambda x: (x > 0).astype(float))
    inst, loop = _loop_instance(f, n=400, x0_val=1.0)
    cov = se_run(inst, T=3, reps=20_000, seed=1)
    assert abs(cov.kernel(loop, 1, 1)[0, 0] - 1.0) < 1e-12
    k22 = cov.kernel(loop, 2, 2)[0, 0]
    assert abs(k22 - 0.5) < 3.0 * 0.5 * np.sqrt(2.0 / 20_000) + 0.01


def test_kernels_are_symmetric_and_psd():
    inst, _ = build_committee_instance(CommitteeModel(d=150, n=100), seed=2)
    T = 4
    cov = se_run(inst, T=T, reps=2000, seed=3)
    for e in inst.graph.edges:
        q = inst.graph.q(e)
        K = np.zeros((T * q, T * q))
        for s in range(1, T + 1):
            for t in range(1, T + 1):
                blk = cov.kernel(e, s, t)
                K[(s - 1) * q:s * q, (t - 1) * q:t * q] = blk
                assert np.allclose(blk, cov.kernel(e, t, s).T, atol=1e-12)
        assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_doubled_sample_count_moves_kernels_little():
    inst, _ = build_committee_instance(CommitteeModel(d=150, n=100), seed=2)
    cov1 = se_run(inst, T=3, reps=1000, seed=4)
    cov2 = se_run(inst, T=3, reps=2000, seed=5)
    for e in inst.graph.edges:
        a = cov1.kernel(e, 3, 3)
        b = cov2.kernel(e, 3, 3)
        scale = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
        assert np.max(np.abs(a - b)) <= 0.2 * scale


def test_compare_merges_amp_and_se_statistics():
    inst, _ = build_committee_instance(CommitteeModel(d=150, n=100), seed=6)
    from graphamp.engine import norm_sq_observable
    fwd = EdgeId("wts", "obs")
    obs = [norm_sq_observable(fwd, scale=1.0 / 100.0, name="nsq")]
    trajs = []
    for s in range(4):
        i2, _ = build_committee_instance(CommitteeModel(d=150, n=100), seed=10 + s)
        trajs.append(run(i2, 4, allow_degenerate=True))
    amp = amp_observable_stats(trajs, obs, times=[1, 2, 3])
    cov = se_run(inst, T=3, reps=1500, seed=7)
    se = mc_observable_stats(inst, cov, obs, times=[1, 2, 3], reps=300, seed=8)
    recs = compare(amp, se)
    assert len(recs) == 3
    for r in recs:
        assert r["z"] < 6.0
