"""Two-unit committee iteration: matrix-valued messages on a chain.

The weight matrix has q = 2 columns (one per hidden unit), so every
iterate, message, and correction coefficient is matrix valued; the
correction b is a full 2 x 2 matrix because the denoisers mix the
units.  Update functions are fixed (no adaptive scales):

    signal side:   U -> soft_threshold(U, theta) @ R
    observation:   V -> (Y - V) @ C

with R, C non-diagonal 2 x 2 matrices and Y independent side data
(drawn separately from the design, so the plain covariance recursion
covers the instance).  This is the stress case for the q x q Onsager
algebra and the flattening's block bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..engine import GraphInstance, stationary_provider
from ..ensembles import normals, sample_iid, stream
from ..graphs import EdgeId, GraphSpec
from ..nonlinearity import EntrywiseThenMix, Nonlinearity, SideData
from ..prox import soft_threshold


DEFAULT_R = np.array([[0.9, 0.25], [-0.15, 0.8]])
DEFAULT_C = np.array([[0.6, 0.2], [0.1, 0.5]])


@dataclass(frozen=True)
class CommitteeModel:
    d: int
    n: int
    theta: float = 0.4
    R: np.ndarray = field(default_factory=lambda: DEFAULT_R.copy())
    C: np.ndarray = field(default_factory=lambda: DEFAULT_C.copy())
    y_scale: float = 1.0


class AffineMix(Nonlinearity):
    """V -> (Y - V) @ C with side data Y; Jacobian sum is -n C^T."""

    def __init__(self, C: np.ndarray):
        self.C = np.asarray(C, dtype=float)
        self.arity = 1
        self.out_cols = self.C.shape[1]
        self.row_local = True

    def apply(self, inputs, side=None):
        Y = side.array("Y")
        return (Y - inputs[0]) @ self.C

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        n = inputs[0].shape[0]
        return -n * self.C.T


def build_committee_instance(model: CommitteeModel, seed: int = 0):
    """Chain instance with q = 2 on both edges; returns (instance, Y)."""
    fwd = EdgeId("wts", "obs")
    bwd = fwd.reversed()
    g = GraphSpec(node_dim={"wts": model.d, "obs": model.n},
                  edges=frozenset({fwd, bwd}),
                  edge_cols={fwd: 2, bwd: 2})
    A = sample_iid(model.n, model.d, model.d, stream(seed, "committee", "A"))
    Y = model.y_scale * normals(stream(seed, "committee", "Y"), (model.n, 2))

    theta = model.theta
    sig = EntrywiseThenMix(lambda x: soft_threshold(x, theta),
                           lambda x: (np.abs(x) > theta).astype(float),
                           model.R)
    instance = GraphInstance(
        graph=g,
        matrices={fwd: A},
        provider=stationary_provider({fwd: sig, bwd: AffineMix(model.C)}),
        x0={bwd: 0.5 * np.ones((model.d, 2))},
        side={bwd: SideData(arrays={"Y": Y})},
        scale_base={fwd: float(model.d)},
        meta={"name": "committee", "seed": seed, "se_mode": "mc"},
    )
    return instance, Y
