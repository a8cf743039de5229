"""Correlated-feature regression by change of coordinates.

A design with feature covariance Sigma factors as A = Z Sigma^{1/2}
with Z iid; rewriting the ridge objective in xt = Sigma^{1/2} x makes
the random matrix iid at the cost of a non-separable (but linear,
closed-form) penalty prox:

    e(U) = (I + alpha lam Sigma^{-1})^{-1} (alpha U),

whose diagonal Jacobian sum is the trace of that matrix.  The fixed
point solves (A^T A + lam I) x = A^T y exactly in the original
coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..engine import AmpTrajectory, GraphInstance, reindex_half_iterates
from ..ensembles import sample_iid, spectral_sqrt, stream
from ..errors import NumericalError
from ..gamp_se import Channel, Prior
from ..graphs import EdgeId, two_node_chain
from ..nonlinearity import Nonlinearity, SideData, Zero
from .glm import LossResidual, forward_edge
from ..gamp_se import GlmScalars
from ..prox import ProxSpec


class CovariancePenaltyProx(Nonlinearity):
    """xt -> argmin 0.5||xt - alpha u||^2 + 0.5 alpha lam xt' Sigma^{-1} xt,
    evaluated through the eigenbasis of Sigma (rows couple)."""

    def __init__(self, eigvals: np.ndarray, eigvecs: np.ndarray, lam: float, alpha: float):
        self.w = eigvals
        self.V = eigvecs
        self.lam = lam
        self.alpha = float(alpha)
        self.arity = 1
        self.out_cols = 1
        self.row_local = False
        self._gains = 1.0 / (1.0 + self.alpha * lam / self.w)

    def apply(self, inputs, side=None):
        u = inputs[0]
        return self.V @ (self._gains[:, None] * (self.V.T @ (self.alpha * u)))

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        return np.array([[self.alpha * float(np.sum(self._gains))]])


@dataclass(frozen=True)
class CovariantRidgeModel:
    d: int
    n: int
    lam: float
    prior: Prior
    channel: Channel
    Sigma: np.ndarray
    beta0: float = 1.0


def wrap_covariance(model: CovariantRidgeModel, seed: int = 0):
    """Build the iid-coordinates chain instance for a correlated design.

    Returns (instance, info) where info carries (A, x0, y, Sigma^{1/2})
    in the original coordinates and a map from stacked iterates back to
    x-coordinate estimates.
    """
    Sig = 0.5 * (model.Sigma + model.Sigma.T)
    w, V = np.linalg.eigh(Sig)
    if w[0] <= 0:
        raise NumericalError("feature covariance must be positive definite")
    root = (V * np.sqrt(w)) @ V.T

    fwd = forward_edge()
    bwd = fwd.reversed()
    g = two_node_chain("sig", model.d, "obs", model.n)
    Z = sample_iid(model.n, model.d, model.d, stream(seed, "cov", "Z"))
    x0 = model.prior.sample(model.d, stream(seed, "cov", "x0"))
    A = Z @ root
    y = model.channel.sample(A @ x0, stream(seed, "cov", "y"))

    scalars = GlmScalars(penalty=ProxSpec(kind="squared", gamma=1.0, weight=1.0),
                         loss="squared")
    zero = Zero(1)

    def provider(edge, t, traj):
        if edge == fwd:
            if t % 2 == 0:
                return zero
            d0 = float(traj.b[bwd][t - 1][0, 0])
            if abs(d0) < 1e-14:
                raise NumericalError("vanishing average derivative", edge=str(edge), t=t)
            return CovariancePenaltyProx(w, V, model.lam, alpha=-1.0 / d0)
        if t % 2 == 1:
            return zero
        beta = model.beta0 if t == 0 else float(traj.b[fwd][t - 1][0, 0])
        return LossResidual(scalars, beta=beta)

    instance = GraphInstance(
        graph=g,
        matrices={fwd: Z},
        provider=provider,
        side={bwd: SideData(arrays={"y": y})},
        scale_base={fwd: float(model.d)},
        meta={"name": "covariant_ridge", "seed": seed},
    )
    info = {"A": A, "x0": x0, "y": y, "root": root, "eigvals": w, "eigvecs": V}
    return instance, info


def covariant_estimate(traj: AmpTrajectory, model: CovariantRidgeModel, info) -> np.ndarray:
    """x-coordinate estimate from the last stacked iterate."""
    fwd = forward_edge()
    bwd = fwd.reversed()
    half = reindex_half_iterates(traj, fwd)
    t = len(half.u) - 1
    d0 = float(traj.b[bwd][2 * t - 2][0, 0])
    prox = CovariancePenaltyProx(info["eigvals"], info["eigvecs"], model.lam, alpha=-1.0 / d0)
    xt = prox.apply([half.u[t]])
    Vw = info["eigvecs"]
    inv_root = (Vw / np.sqrt(info["eigvals"])) @ Vw.T
    return (inv_root @ xt).reshape(-1)
