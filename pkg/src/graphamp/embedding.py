"""Reduction of a graph iteration to one symmetric matrix iteration.

The graph instance is flattened into a single loop: one symmetric
N x N matrix (N the sum of per-edge row counts), one iterate matrix
with a column block per edge, and one update function that applies
every per-edge function to its designated blocks and writes zeros
elsewhere.  Tracked blocks of the big iterate then reproduce the graph
iterates exactly, step for step; untracked blocks carry independent
Gaussian noise that never couples back.

Edges with a non-default variance base S are rescaled on the way in
(A -> A sqrt(S/N), f -> sqrt(N/S) f), which leaves the x-iterates
unchanged but makes every block of the big matrix variance-1/N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import engine
from .engine import AmpTrajectory, GraphInstance
from .ensembles import sample_goe, stream
from .errors import GraphError, ShapeError
from .graphs import EdgeId, GraphSpec, canonical_edge_order, edges_into, reversed_input_index, single_loop
from .nonlinearity import Nonlinearity


@dataclass(frozen=True)
class BlockLayout:
    """Row and column block positions of each edge inside the flattened
    iterate.  Row block e has the rows of x_e (n_end(e) of them); column
    block e has q_e columns.  Blocks follow canonical edge order."""

    order: tuple
    row_slices: Dict[EdgeId, slice]
    col_slices: Dict[EdgeId, slice]
    N: int
    q_tot: int

    @classmethod
    def from_graph(cls, g: GraphSpec) -> "BlockLayout":
        order = canonical_edge_order(g)
        rows: Dict[EdgeId, slice] = {}
        cols: Dict[EdgeId, slice] = {}
        r = c = 0
        for e in order:
            nr = g.node_dim[e.end]
            rows[e] = slice(r, r + nr)
            cols[e] = slice(c, c + g.q(e))
            r += nr
            c += g.q(e)
        return cls(order=order, row_slices=rows, col_slices=cols, N=r, q_tot=c)

    def x_block(self, X: np.ndarray, e: EdgeId) -> np.ndarray:
        return X[self.row_slices[e], self.col_slices[e]]


class EmbeddedNonlinearity(Nonlinearity):
    """One time-slice of the flattened update function.

    Reads block (rows(e'), cols(e')) for each input edge e' of e,
    applies f_e, writes sqrt(N/S_e) m_e at (rows(reversed e), cols(e)),
    zeros everywhere else.  The diagonal Jacobian sum is assembled
    analytically from the per-edge traces, so no finite differences run
    on the big iterate.
    """

    def __init__(self, source: GraphInstance, layout: BlockLayout, t: int,
                 graph_traj: Optional[AmpTrajectory] = None):
        self.source = source
        self.layout = layout
        self.t = t
        self.graph_traj = graph_traj
        self.arity = 1
        self.out_cols = layout.q_tot
        self._scale = {e: math.sqrt(layout.N / source.scale(e)) for e in layout.order}

    def _edge_fn(self, e: EdgeId) -> Nonlinearity:
        return self.source.provider(e, self.t, self.graph_traj)

    def _edge_inputs(self, X: np.ndarray, e: EdgeId) -> List[np.ndarray]:
        return [self.layout.x_block(X, ein) for ein in edges_into(self.source.graph, e)]

    def apply(self, inputs, side=None):
        (X,) = inputs
        lay = self.layout
        M = np.zeros((lay.N, lay.q_tot))
        for e in lay.order:
            f = self._edge_fn(e)
            m = np.asarray(f.apply(self._edge_inputs(X, e), side=self.source.side_data(e)))
            M[lay.row_slices[e.reversed()], lay.col_slices[e]] = self._scale[e] * m
        return M

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        (X,) = inputs
        lay = self.layout
        g = self.source.graph
        B = np.zeros((lay.q_tot, lay.q_tot))
        for e in lay.order:
            f = self._edge_fn(e)
            J = f.jacobian_trace(
                self._edge_inputs(X, e),
                side=self.source.side_data(e),
                wrt=reversed_input_index(g, e),
                notes=notes,
            )
            B[lay.col_slices[e], lay.col_slices[e.reversed()]] = self._scale[e] * np.atleast_2d(J)
        return B


@dataclass
class EmbeddedInstance:
    """The flattened instance: a single-loop graph iteration whose matrix
    is the filled block matrix and whose update function is the
    per-edge dispatcher."""

    symmetric: GraphInstance
    layout: BlockLayout
    source: GraphInstance

    @property
    def loop_edge(self) -> EdgeId:
        return next(iter(self.symmetric.graph.edges))

    def tracked_block(self, X: np.ndarray, e: EdgeId) -> np.ndarray:
        return self.layout.x_block(X, e)


def _check_pair_scales(instance: GraphInstance) -> None:
    for e in instance.graph.edges:
        if not math.isclose(instance.scale(e), instance.scale(e.reversed())):
            raise GraphError(
                f"edges {e} and {e.reversed()} have different variance bases; "
                "the flattening rescale needs them equal"
            )


def embed(instance: GraphInstance, seed: int = 0, fill: str = "goe",
          graph_traj: Optional[AmpTrajectory] = None) -> EmbeddedInstance:
    """Flatten a graph instance into a single symmetric iteration.

    fill selects the untracked blocks: "goe" samples a fresh GOE(N)
    matrix and overwrites the tracked blocks (the default; gives a
    genuine Gaussian symmetric instance), "zero" leaves them zero
    (cheaper; iterates of tracked blocks are identical either way).
    graph_traj supplies a precomputed trajectory to providers that read
    history (adaptive step sizes); stationary providers ignore it.
    """
    _check_pair_scales(instance)
    g = instance.graph
    lay = BlockLayout.from_graph(g)
    N = lay.N

    if fill == "goe":
        A = sample_goe(N, stream(seed, "embed", "fill"), scale_N=N)
    elif fill == "zero":
        A = np.zeros((N, N))
    else:
        raise ValueError(f"unknown fill {fill!r}")

    done = set()
    for e in lay.order:
        if e in done:
            continue
        block = instance.matrix(e) * math.sqrt(instance.scale(e) / N)
        A[lay.row_slices[e], lay.row_slices[e.reversed()]] = block
        if not e.is_loop():
            A[lay.row_slices[e.reversed()], lay.row_slices[e]] = block.T
        done.add(e)
        done.add(e.reversed())

    X0 = np.zeros((N, lay.q_tot))
    for e in lay.order:
        if e in instance.x0:
            X0[lay.row_slices[e], lay.col_slices[e]] = instance.x0[e]

    loop = single_loop("flat", N, q=lay.q_tot)
    loop_edge = next(iter(loop.edges))

    def provider(edge, t, traj):
        return EmbeddedNonlinearity(instance, lay, t, graph_traj=graph_traj)

    sym = GraphInstance(
        graph=loop,
        matrices={loop_edge: A},
        provider=provider,
        x0={loop_edge: X0},
        meta={"flattened_from": instance.meta.get("name", "graph-instance")},
    )
    return EmbeddedInstance(symmetric=sym, layout=lay, source=instance)


def sym_step(emb: EmbeddedInstance, traj: AmpTrajectory) -> AmpTrajectory:
    """One step of X^{t+1} = A M^t - M^{t-1} (b^t)^T on the flattened
    instance (b is the q_tot x q_tot diagonal Jacobian sum over N)."""
    return engine.step(emb.symmetric, traj)


def run_symmetric(emb: EmbeddedInstance, T: int) -> AmpTrajectory:
    return engine.run(emb.symmetric, T, allow_degenerate=True)


@dataclass
class EquivalenceReport:
    """Blockwise comparison of flattened vs. graph iterates."""

    max_err: float
    records: List[dict] = field(default_factory=list)

    def ok(self, tol: float = 1e-10) -> bool:
        return self.max_err <= tol


def verify_equivalence(instance: GraphInstance, T: int, seed: int = 0,
                       fill: str = "goe") -> EquivalenceReport:
    """Run both sides for T steps and compare every tracked block.

    Per (t, e) error is ||X^t block - x^t_e||_F / (1 + ||x^t_e||_F).
    The graph trajectory is computed first and handed to the flattening
    so history-dependent update functions resolve identically on both
    sides.
    """
    graph_traj = engine.run(instance, T, allow_degenerate=True)
    emb = embed(instance, seed=seed, fill=fill, graph_traj=graph_traj)
    sym_traj = run_symmetric(emb, T)
    loop_edge = emb.loop_edge

    records = []
    max_err = 0.0
    for t in range(T + 1):
        X = sym_traj.x[loop_edge][t]
        for e in emb.layout.order:
            ref = graph_traj.x[e][t]
            err = float(np.linalg.norm(emb.tracked_block(X, e) - ref) / (1.0 + np.linalg.norm(ref)))
            records.append({"t": t, "edge": str(e), "err": err})
            max_err = max(max_err, err)
    return EquivalenceReport(max_err=max_err, records=records)


def onsager_block_pattern_err(layout: BlockLayout, B: np.ndarray) -> float:
    """Largest absolute entry of B outside the (cols(e), cols(rev e))
    sparsity pattern; zero for a correctly assembled Jacobian sum."""
    mask = np.ones_like(B, dtype=bool)
    for e in layout.order:
        mask[layout.col_slices[e], layout.col_slices[e.reversed()]] = False
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(B[mask]))) if B[mask].size else 0.0
