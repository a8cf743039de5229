"""Multilayer estimation on a line graph.

A depth-L pipeline z_0 -> phi_1(A_1 z_0) -> ... -> y couples L + 1
nodes in a line; each interior node carries two incoming fields (one
from below, one from above) and sends messages both ways:

    zhat      = w_a x_below + w_b x_above      (combined local field)
    downward  = w_h (zhat - x_below)           (residual message)
    upward    = w_e phi(zhat)                  (activation push)

The end nodes apply a penalty prox (signal side) and a loss residual
map (observation side).  All scales are fixed constants, so the
provider is time-independent and the plain covariance recursion
applies.

By default the observations are sampled from an independent copy of
the pipeline (fresh matrices), which keeps the side data independent
of the matrices the iteration multiplies by; that is the regime the
Gaussian-limit prediction covers.  planted=True reuses the run
matrices and is marked in meta as outside that coverage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..engine import GraphInstance, stationary_provider
from ..ensembles import sample_iid, stream
from ..gamp_se import GlmScalars, Prior, GaussBernoulliPrior, make_channel
from ..graphs import EdgeId, GraphSpec, edges_into, line_graph
from ..nonlinearity import Entrywise, FromCallable, Nonlinearity, SideData
from ..prox import ProxSpec, prox, prox_deriv
from . import glm as glm_mod


def _activation(kind: str):
    if kind == "linear":
        return (lambda x: x), (lambda x: np.ones_like(x))
    if kind == "relu":
        return (lambda x: np.maximum(x, 0.0)), (lambda x: (x > 0).astype(float))
    if kind == "tanh":
        return np.tanh, (lambda x: 1.0 - np.tanh(x) ** 2)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class LayerSpec:
    """One linear-then-activation stage: output width and nonlinearity."""

    dim: int
    activation: str = "linear"


def layer_specs(dims, activations):
    if len(dims) != len(activations):
        raise ValueError("dims and activations must have equal length")
    return tuple(LayerSpec(int(d), str(a)) for d, a in zip(dims, activations))


@dataclass(frozen=True)
class MultilayerModel:
    d0: int
    layers: Tuple[LayerSpec, ...]
    prior: Prior = field(default_factory=lambda: GaussBernoulliPrior(0.25, 4.0))
    # Soft threshold small enough that typical interior fields (rms
    # around 0.15 for unit weights) are not annihilated.
    signal_prox: ProxSpec = ProxSpec(kind="abs", gamma=1.0, weight=0.05)
    obs_beta: float = 1.0
    w_a: float = 0.5
    w_b: float = 0.5
    w_h: float = 1.0
    w_e: float = 1.0

    @property
    def L(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> Tuple[int, ...]:
        return (self.d0,) + tuple(l.dim for l in self.layers)


class InteriorMessage(Nonlinearity):
    """Message out of an interior node: combines the below/above fields
    and emits either the downward residual or the upward activation."""

    def __init__(self, model: MultilayerModel, activation: str, direction: str,
                 below_index: int, above_index: int):
        act, dact = _activation(activation)
        self.act, self.dact = act, dact
        self.model = model
        self.direction = direction
        self.below = below_index
        self.above = above_index
        self.arity = 2
        self.out_cols = 1
        self.row_local = True

    def _zhat(self, inputs):
        return self.model.w_a * inputs[self.below] + self.model.w_b * inputs[self.above]

    def apply(self, inputs, side=None):
        z = self._zhat(inputs)
        if self.direction == "down":
            return self.model.w_h * (z - inputs[self.below])
        return self.model.w_e * self.act(z)

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        z = self._zhat(inputs)
        w = self.model.w_a if wrt == self.below else self.model.w_b
        if self.direction == "down":
            s = w - (1.0 if wrt == self.below else 0.0)
            return np.array([[self.model.w_h * s * inputs[0].shape[0]]])
        return np.array([[self.model.w_e * w * float(np.sum(self.dact(z)))]])


class SignalProx(Nonlinearity):
    """End-node denoiser on the signal side: fixed-scale penalty prox."""

    def __init__(self, spec: ProxSpec):
        self.spec = spec
        self.arity = 1
        self.out_cols = 1
        self.row_local = True

    def apply(self, inputs, side=None):
        return prox(self.spec, inputs[0])

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        return np.array([[float(np.sum(prox_deriv(self.spec, inputs[0])))]])


class ObservationResidual(Nonlinearity):
    """End-node map on the observation side: (y - v) / (1 + beta)."""

    def __init__(self, beta: float):
        self.beta = float(beta)
        self.arity = 1
        self.out_cols = 1
        self.row_local = True

    def apply(self, inputs, side=None):
        y = side.array("y").reshape(inputs[0].shape)
        return (y - inputs[0]) / (1.0 + self.beta)

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        return np.array([[-inputs[0].shape[0] / (1.0 + self.beta)]])


def sample_pipeline(model: MultilayerModel, mats: Dict[int, np.ndarray],
                    seed_rng) -> np.ndarray:
    """Push a fresh signal through the layer maps, returning y."""
    z = model.prior.sample(model.d0, seed_rng("signal"))
    for l, layer in enumerate(model.layers, start=1):
        act, _ = _activation(layer.activation)
        z = act(mats[l] @ z)
    return z


def build_multilayer_instance(model: MultilayerModel, seed: int = 0,
                              planted: bool = False):
    """Assemble the line-graph instance.

    Depth 1 is a plain penalized regression; it is delegated to the
    two-node chain builder so the adaptive-scale machinery and overlap
    recursion apply.  Returns (instance, y).
    """
    if model.L == 0:
        raise ValueError("need at least one layer")
    if model.L == 1:
        if model.layers[0].activation != "linear":
            raise ValueError("depth-1 delegation supports the linear activation only")
        gm = glm_mod.GlmModel(
            d=model.d0, n=model.layers[0].dim, prior=model.prior,
            channel=make_channel("linear", 0.0),
            scalars=GlmScalars(penalty=model.signal_prox, loss="squared"),
            beta0=model.obs_beta)
        inst, teacher = glm_mod.build_gamp_instance(gm, seed=seed)
        inst.meta["name"] = "multilayer"
        inst.meta["depth"] = 1
        return inst, teacher.y

    dims = model.dims
    names = [f"z{l}" for l in range(model.L + 1)]
    g = line_graph(names, dims)

    mats = {}
    for l in range(1, model.L + 1):
        mats[l] = sample_iid(dims[l], dims[l - 1], dims[l - 1],
                             stream(seed, "mlayer", "A", l))

    if planted:
        y = sample_pipeline(model, mats, lambda tag: stream(seed, "mlayer", "teacher", tag))
    else:
        fresh = {l: sample_iid(dims[l], dims[l - 1], dims[l - 1],
                               stream(seed, "mlayer", "indep", l))
                 for l in range(1, model.L + 1)}
        y = sample_pipeline(model, fresh, lambda tag: stream(seed, "mlayer", "teacher", tag))

    up = [EdgeId(names[l - 1], names[l]) for l in range(1, model.L + 1)]
    fns: Dict[EdgeId, Nonlinearity] = {}
    fns[up[0]] = SignalProx(model.signal_prox)
    fns[up[-1].reversed()] = ObservationResidual(model.obs_beta)
    for l in range(1, model.L):
        # both out-edges of z_l read the same inputs (edges ending at z_l)
        below_edge, above_edge = up[l - 1], up[l].reversed()
        ins = edges_into(g, up[l])
        bi, ai = ins.index(below_edge), ins.index(above_edge)
        act = model.layers[l - 1].activation
        fns[below_edge.reversed()] = InteriorMessage(model, act, "down", bi, ai)
        fns[up[l]] = InteriorMessage(model, act, "up", bi, ai)

    instance = GraphInstance(
        graph=g,
        matrices={e: mats[l] for l, e in enumerate(up, start=1)},
        provider=stationary_provider(fns),
        x0={up[0]: np.full(g.x_shape(up[0]), 0.3)},
        side={up[-1].reversed(): SideData(arrays={"y": y})},
        scale_base={e: float(dims[l - 1]) for l, e in enumerate(up, start=1)},
        meta={"name": "multilayer", "depth": model.L, "seed": seed,
              "se_mode": "mc", "planted": planted},
    )
    return instance, y
