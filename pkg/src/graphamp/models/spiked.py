"""Rank-one spiked symmetric matrix, optionally with a generative prior.

Observation Y = (sqrt(lam)/N) v0 v0^T + W with W a GOE(N) draw
(off-diagonal variance 1/N), so lam = 1 is the spectral threshold.
Estimation iterates x^{t+1} = Y f(x^t) - b f(x^{t-1}) on a single-loop
graph whose matrix is Y itself.

For the plain (depth-0) prior the rank-one part contributes a
deterministic signal direction and two scalars close the recursion:

    mu_{t+1} = sqrt(lam) E[V f(mu_t V + sqrt(q_t) G)]
    q_{t+1}  = E[f(mu_t V + sqrt(q_t) G)^2]

with V ~ prior (unit second moment makes lam the SNR), G standard
normal.  q is the full second moment: the noise W is independent of
v0, so no projection is involved.

With depth L >= 1 the spike is generated by a small pipeline
v0 = phi(A_L ... phi(A_1 w)) and the estimation graph attaches the
generative chain below the loop node; denoisers combine the loop field
with the chain field at fixed weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..engine import GraphInstance, stationary_provider
from ..ensembles import sample_goe, sample_iid, stream
from ..errors import NumericalError
from ..gamp_se import Prior, RademacherPrior, gh_points
from ..graphs import EdgeId, GraphSpec, edges_into
from ..nonlinearity import Entrywise, Nonlinearity
from .multilayer import _activation


@dataclass(frozen=True)
class SpikedModel:
    N: int
    lam: float
    prior: Prior = field(default_factory=RademacherPrior)
    denoiser: str = "tanh"
    theta: float = 1.0
    init_overlap: float = 0.2
    gen_dims: Tuple[int, ...] = ()
    gen_activation: str = "tanh"
    w_mix: float = 0.5

    @property
    def depth(self) -> int:
        return len(self.gen_dims)


def _denoiser_pair(kind: str, theta: float):
    if kind == "tanh":
        return (lambda x: np.tanh(theta * x),
                lambda x: theta * (1.0 - np.tanh(theta * x) ** 2))
    if kind == "linear":
        return (lambda x: theta * x, lambda x: np.full_like(x, theta))
    raise ValueError(f"unknown denoiser {kind!r}")


class LoopCombine(Nonlinearity):
    """Loop-node output when a generative chain is attached: mixes the
    loop field with the chain field before the entrywise denoiser."""

    def __init__(self, model: SpikedModel, loop_index: int, chain_index: int,
                 emit: str):
        self.f, self.df = _denoiser_pair(model.denoiser, model.theta)
        self.w = model.w_mix
        self.loop_i = loop_index
        self.chain_i = chain_index
        self.emit = emit
        self.arity = 2
        self.out_cols = 1
        self.row_local = True

    def _field(self, inputs):
        return (1.0 - self.w) * inputs[self.loop_i] + self.w * inputs[self.chain_i]

    def apply(self, inputs, side=None):
        z = self._field(inputs)
        return self.f(z)

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        z = self._field(inputs)
        w = (1.0 - self.w) if wrt == self.loop_i else self.w
        return np.array([[w * float(np.sum(self.df(z)))]])


def build_spiked_instance(model: SpikedModel, seed: int = 0):
    """Sample (v0, W), form Y, and assemble the estimation graph.

    Returns (instance, v0).  Depth 0 is a single loop; depth L >= 1
    adds a generative line below the loop node.
    """
    N, lam = model.N, model.lam
    if model.depth == 0:
        v0 = model.prior.sample(N, stream(seed, "spiked", "v0"))
    else:
        dims = model.gen_dims + (N,)
        act, _ = _activation(model.gen_activation)
        z = model.prior.sample(dims[0], stream(seed, "spiked", "w0"))
        gen_mats = {}
        for l in range(1, len(dims)):
            gen_mats[l] = sample_iid(dims[l], dims[l - 1], dims[l - 1],
                                     stream(seed, "spiked", "G", l))
            z = act(gen_mats[l] @ z)
        v0 = z

    W = sample_goe(N, stream(seed, "spiked", "W"), scale_N=N)
    Y = (math.sqrt(lam) / N) * np.outer(v0, v0) + W
    # keep the loop matrix exactly symmetric against rounding
    Y = 0.5 * (Y + Y.T)

    f, df = _denoiser_pair(model.denoiser, model.theta)
    loop = EdgeId("spike", "spike")

    if model.depth == 0:
        g = GraphSpec(node_dim={"spike": N}, edges=frozenset({loop}))
        # informative start aligned with the spike: the two-scalar
        # recursion then begins at (mu0, q0) = (init_overlap, 0)
        inst = GraphInstance(
            graph=g,
            matrices={loop: Y},
            provider=stationary_provider({loop: Entrywise(f, df)}),
            x0={loop: model.init_overlap * v0.reshape(-1, 1)},
            meta={"name": "spiked", "depth": 0, "lam": lam, "seed": seed,
                  "se_mode": "spiked_scalar"},
        )
        return inst, v0

    dims = model.gen_dims + (N,)
    names = [f"g{l}" for l in range(len(model.gen_dims))] + ["spike"]
    node_dim = {nm: dims[i] for i, nm in enumerate(names)}
    edges = {loop}
    for i in range(1, len(names)):
        e = EdgeId(names[i - 1], names[i])
        edges |= {e, e.reversed()}
    g = GraphSpec(node_dim=node_dim, edges=frozenset(edges))

    mats: Dict[EdgeId, np.ndarray] = {loop: Y}
    scale = {loop: float(N)}
    for i in range(1, len(names)):
        e = EdgeId(names[i - 1], names[i])
        mats[e] = sample_iid(dims[i], dims[i - 1], dims[i - 1],
                             stream(seed, "spiked", "A", i))
        scale[e] = float(dims[i - 1])

    fns: Dict[EdgeId, Nonlinearity] = {}
    top_up = EdgeId(names[-2], "spike")
    ins_at_spike = edges_into(g, loop)
    li = ins_at_spike.index(loop)
    ci = ins_at_spike.index(top_up)
    fns[loop] = LoopCombine(model, li, ci, emit="loop")
    fns[top_up.reversed()] = LoopCombine(model, li, ci, emit="down")
    gact, dgact = _activation(model.gen_activation)
    for i in range(1, len(names) - 1):
        up_e = EdgeId(names[i - 1], names[i])
        below = up_e
        above = EdgeId(names[i + 1], names[i])
        ins = edges_into(g, EdgeId(names[i], names[i + 1]))
        fns[EdgeId(names[i], names[i + 1])] = _ChainUp(gact, dgact, ins.index(below), ins.index(above))
        fns[up_e.reversed()] = _ChainDown(ins.index(below), ins.index(above))
    fns[EdgeId(names[0], names[1])] = Entrywise(np.tanh, lambda x: 1.0 - np.tanh(x) ** 2)

    inst = GraphInstance(
        graph=g,
        matrices=mats,
        provider=stationary_provider(fns),
        x0={loop: 0.1 * np.ones((N, 1))},
        scale_base=scale,
        meta={"name": "spiked", "depth": model.depth, "lam": lam, "seed": seed},
    )
    return inst, v0


class _ChainUp(Nonlinearity):
    """Interior generative-chain message toward the spike: activation of
    the mixed local field."""

    def __init__(self, act, dact, below_i, above_i):
        self.act, self.dact = act, dact
        self.bi, self.ai = below_i, above_i
        self.arity = 2
        self.out_cols = 1
        self.row_local = True

    def apply(self, inputs, side=None):
        return self.act(0.5 * (inputs[self.bi] + inputs[self.ai]))

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        z = 0.5 * (inputs[self.bi] + inputs[self.ai])
        return np.array([[0.5 * float(np.sum(self.dact(z)))]])


class _ChainDown(Nonlinearity):
    """Interior generative-chain residual message away from the spike."""

    def __init__(self, below_i, above_i):
        self.bi, self.ai = below_i, above_i
        self.arity = 2
        self.out_cols = 1
        self.row_local = True

    def apply(self, inputs, side=None):
        return 0.5 * (inputs[self.ai] - inputs[self.bi])

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        n = inputs[0].shape[0]
        s = -0.5 if wrt == self.bi else 0.5
        return np.array([[s * n]])


@dataclass
class SpikedSePoint:
    t: int
    mu: float
    q: float

    def overlap(self) -> float:
        """Limit of <v0, x^t> / N."""
        return self.mu

    def second_moment(self) -> float:
        """Limit of ||x^t||^2 / N (prior has unit second moment)."""
        return self.mu ** 2 + self.q


def spiked_scalar_se(model: SpikedModel, T: int, mu0: Optional[float] = None,
                     q0: float = 0.0, nodes: int = 121) -> List[SpikedSePoint]:
    """Two-scalar recursion for the depth-0 spike; requires the prior's
    second moment to be 1 so lam is the signal-to-noise ratio."""
    if model.depth != 0:
        raise ValueError("scalar recursion covers the depth-0 spike only")
    if abs(model.prior.rho - 1.0) > 1e-12:
        raise NumericalError("spike prior must have unit second moment")
    if mu0 is None:
        mu0 = model.init_overlap
    f, _ = _denoiser_pair(model.denoiser, model.theta)
    v, wv = model.prior.quad_points(nodes)
    gz, wg = gh_points(nodes)
    sl = math.sqrt(model.lam)
    pts = [SpikedSePoint(t=0, mu=mu0, q=q0)]
    mu, q = mu0, q0
    for t in range(1, T + 1):
        X = mu * v[:, None] + math.sqrt(max(q, 0.0)) * gz[None, :]
        W2 = wv[:, None] * wg[None, :]
        fx = f(X)
        a = float(np.sum(W2 * v[:, None] * fx))
        q = float(np.sum(W2 * fx ** 2))
        mu = sl * a
        pts.append(SpikedSePoint(t=t, mu=mu, q=q))
    return pts
