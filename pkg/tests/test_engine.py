import numpy as np
import pytest

from graphamp import GraphInstance, NumericalError, ShapeError
from graphamp.engine import (Observable, init, norm_sq_observable, observe,
                             overlap_observable, run, stationary_provider,
                             step)
from graphamp.graphs import EdgeId, single_loop, two_node_chain
from graphamp.nonlinearity import Entrywise, FromCallable, Identity


def _chain_instance(A, x0_fwd, scale):
    """Two-node chain with identity updates on both edges."""
    n, d = A.shape
    g = two_node_chain("sig", d, "obs", n)
    fwd = EdgeId("sig", "obs")
    return GraphInstance(
        graph=g,
        matrices={fwd: A},
        provider=stationary_provider({fwd: Identity(),
                                      fwd.reversed(): Identity()}),
        x0={fwd: x0_fwd},
        scale_base={fwd: scale},
    ), fwd


def test_first_step_has_no_correction():
    A = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, -1.0]])
    x0 = np.array([[1.0], [-1.0]])
    inst, fwd = _chain_instance(A, x0, scale=3.0)
    traj = run(inst, 1, allow_degenerate=True)
    bwd = fwd.reversed()
    # x^1_fwd = A m^0_fwd with m^0_fwd = identity(x^0_bwd) = 0
    assert np.allclose(traj.x[fwd][1], 0.0)
    # x^1_bwd = A^T m^0_bwd with m^0_bwd = identity(x^0_fwd)
    assert np.allclose(traj.x[bwd][1], A.T @ x0)


def test_second_step_subtracts_onsager_term():
    A = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, -1.0]])
    x0 = np.array([[1.0], [-1.0]])
    inst, fwd = _chain_instance(A, x0, scale=3.0)
    traj = run(inst, 2, allow_degenerate=True)
    bwd = fwd.reversed()
    # identity on d = 3 rows: J = 3, b = J / scale = 1
    m1_fwd = A.T @ x0                       # = x^1_bwd, identity message
    m0_bwd = x0
    x2_fwd = A @ m1_fwd - m0_bwd * 1.0
    assert np.allclose(traj.x[fwd][2], x2_fwd)
    # observation side: J = 2 rows, same shared scale 3
    m1_bwd = np.zeros((2, 1))               # = x^1_fwd
    m0_fwd = np.zeros((3, 1))               # = x^0_bwd
    x2_bwd = A.T @ m1_bwd - m0_fwd * (2.0 / 3.0)
    assert np.allclose(traj.x[bwd][2], x2_bwd)
    assert np.allclose(traj.b[fwd][1], [[1.0]])
    assert np.allclose(traj.b[bwd][1], [[2.0 / 3.0]])


def test_degenerate_zero_init_warns():
    A = np.eye(3)
    inst, _ = _chain_instance(A, np.zeros((3, 1)), scale=3.0)
    with pytest.warns(UserWarning, match="all-zero"):
        init(inst)


@pytest.mark.filterwarnings("ignore:overflow")
def test_divergence_aborts_with_location():
    n = 30
    g = single_loop("v", n)
    loop = EdgeId("v", "v")
    Y = sample_goe_like(n)
    inst = GraphInstance(
        graph=g,
        matrices={loop: Y},
        provider=stationary_provider(
            {loop: Entrywise(lambda x: 50.0 * x,
                             lambda x: np.full_like(x, 50.0))}),
        x0={loop: np.ones((n, 1))},
    )
    with pytest.raises(NumericalError) as ei:
        run(inst, 400, allow_degenerate=True)
    assert ei.value.edge == str(loop)
    assert ei.value.t is not None and ei.value.t > 1


def sample_goe_like(n):
    rng = np.random.default_rng(11)
    G = rng.normal(size=(n, n)) / np.sqrt(2 * n)
    return G + G.T


def test_nonfinite_message_aborts():
    g = single_loop("v", 4)
    loop = EdgeId("v", "v")
    inst = GraphInstance(
        graph=g,
        matrices={loop: np.eye(4)},
        provider=stationary_provider(
            {loop: FromCallable(lambda inputs, side: inputs[0] / 0.0,
                                row_local=True)}),
        x0={loop: np.ones((4, 1))},
    )
    with pytest.raises(NumericalError):
        with np.errstate(divide="ignore", invalid="ignore"):
            run(inst, 1, allow_degenerate=True)


def test_wrong_output_shape_is_rejected():
    g = single_loop("v", 4)
    loop = EdgeId("v", "v")
    inst = GraphInstance(
        graph=g,
        matrices={loop: np.eye(4)},
        provider=stationary_provider(
            {loop: FromCallable(lambda inputs, side: inputs[0][:2],
                                row_local=True)}),
        x0={loop: np.ones((4, 1))},
    )
    with pytest.raises(ShapeError):
        run(inst, 1, allow_degenerate=True)


def test_observe_records_and_builtin_observables():
    A = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, -1.0]])
    x0 = np.array([[1.0], [-1.0]])
    inst, fwd = _chain_instance(A, x0, scale=3.0)
    traj = run(inst, 2, allow_degenerate=True)
    bwd = fwd.reversed()
    obs = [norm_sq_observable(bwd, scale=1.0 / 3.0),
           overlap_observable(bwd, np.ones((3, 1)))]
    recs = observe(traj, obs, times=[1, 2])
    assert {r["t"] for r in recs} == {1, 2}
    want = float(np.sum((A.T @ x0) ** 2)) / 3.0
    got = [r["value"] for r in recs
           if r["t"] == 1 and r["observable"].startswith("norm_sq")]
    assert np.allclose(got, want)


def test_observable_callable_protocol():
    f = Observable("const", lambda xs, t: 4.2)
    assert f({}, 0) == 4.2
