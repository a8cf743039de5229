import numpy as np

from graphamp import CommitteeModel, build_committee_instance, lasso_model
from graphamp.embedding import (BlockLayout, embed, onsager_block_pattern_err,
                                run_symmetric, verify_equivalence)
from graphamp.engine import run
from graphamp.graphs import EdgeId, line_graph
from graphamp.models.glm import build_gamp_instance

from helpers import default_prior


def _small_glm():
    model = lasso_model(d=90, n=45, lam=1.2, prior=default_prior(), sigma=0.5)
    inst, _ = build_gamp_instance(model, seed=3)
    return inst


def test_layout_blocks_partition_the_flattened_dimension():
    g = line_graph(["z0", "z1", "z2"], [5, 4, 3])
    layout = BlockLayout.from_graph(g)
    # one row block of size n_end(e) per directed edge: 4 + 5 + 3 + 4
    assert layout.N == 16
    assert layout.q_tot == 4
    covered = np.zeros(layout.N, dtype=int)
    for e in layout.order:
        s = layout.row_slices[e]
        assert s.stop - s.start == g.node_dim[e.end]
        covered[s] += 1
    assert np.all(covered == 1)
    X = np.zeros((layout.N, layout.q_tot))
    for e in g.edges:
        blk = layout.x_block(X, e)
        assert blk.shape == (g.node_dim[e.end], g.q(e))


def test_scalar_chain_equivalence_is_machine_exact():
    rep = verify_equivalence(_small_glm(), T=10, seed=0)
    assert rep.max_err <= 1e-12
    assert rep.ok(1e-10)


def test_matrix_valued_equivalence_is_machine_exact():
    inst, _ = build_committee_instance(CommitteeModel(d=80, n=60), seed=1)
    rep = verify_equivalence(inst, T=10, seed=0)
    assert rep.max_err <= 1e-12


def test_equivalence_independent_of_fill():
    inst = _small_glm()
    for fill in ("goe", "zero"):
        rep = verify_equivalence(inst, T=6, seed=5, fill=fill)
        assert rep.max_err <= 1e-12


def test_equivalence_records_cover_all_times_and_edges():
    inst = _small_glm()
    T = 5
    rep = verify_equivalence(inst, T=T, seed=0)
    keyed = {(r["t"], r["edge"]) for r in rep.records}
    assert len(keyed) == (T + 1) * len(inst.graph.edges)


def test_symmetric_onsager_respects_block_pattern():
    inst = _small_glm()
    graph_traj = run(inst, 8, allow_degenerate=True)
    emb = embed(inst, seed=0, graph_traj=graph_traj)
    sym_traj = run_symmetric(emb, 8)
    for t in range(1, 8):
        B = sym_traj.b[emb.loop_edge][t]
        assert onsager_block_pattern_err(emb.layout, B) <= 1e-12
