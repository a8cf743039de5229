"""Penalized regression on a two-node chain.

The design A (n x d, iid entries of variance 1/d) couples a signal
node to an observation node.  Iterates alternate phases: odd graph
times apply the penalty prox on the signal side, even times the loss
residual map on the observation side, and the off-phase function is
identically zero.  In the two-phase time indexing

    v^t = x^{2t} on the forward edge   (observation-side field)
    u^t = x^{2t-1} on the reversed edge (signal-side field)

the iteration reads v^t = A e_t(u^t) - <e_t'> h_{t-1}(v^{t-1}) and
u^{t+1} = A^T h_t(v^t) - <h_t'> e_t(u^t) with adaptive scales
alpha_t = -1/<h_{t-1}'> and beta_t = <e_t'>, both recoverable from the
stored correction coefficients (the variance base is d, so b = J/d is
exactly the d-normalized average derivative).

Fixed points solve min_x sum loss(y, (Ax)) + penalty(x) exactly; the
scalar overlap recursion (gamp_overlap_se) predicts the observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..engine import AmpTrajectory, GraphInstance, reindex_half_iterates
from ..ensembles import sample_iid, stream
from ..errors import NumericalError
from ..gamp_se import Channel, GlmScalars, Prior, make_channel
from ..graphs import EdgeId, two_node_chain
from ..nonlinearity import Nonlinearity, SideData, Zero
from ..prox import ProxSpec, penalty_grad


@dataclass(frozen=True)
class GlmModel:
    """Problem description: sizes, signal prior, observation channel,
    and the penalized-loss objective the iteration solves."""

    d: int
    n: int
    prior: Prior
    channel: Channel
    scalars: GlmScalars
    beta0: float = 1.0

    @property
    def delta(self) -> float:
        return self.n / self.d

    @property
    def rho(self) -> float:
        return self.prior.rho


@dataclass
class GlmTeacher:
    """Planted data: signal, noiseless projections, observations."""

    x0: np.ndarray
    z: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class SignalDecomposition:
    """Standardized planted direction: s_std has unit-variance entries,
    rho_hat = ||x0||^2 / d, and y = channel(sqrt(rho_hat) s_std)."""

    s_std: np.ndarray
    rho_hat: float


def decompose_teacher(A: np.ndarray, x0: np.ndarray) -> SignalDecomposition:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    rho_hat = float(x0 @ x0) / x0.size
    if rho_hat <= 0:
        raise NumericalError("planted signal is identically zero")
    s_std = (A @ x0) / math.sqrt(rho_hat)
    return SignalDecomposition(s_std=s_std, rho_hat=rho_hat)


class PenaltyProx(Nonlinearity):
    """Signal-side update u -> prox_{alpha penalty}(alpha u), scale fixed
    at construction; the diagonal Jacobian sum is the derivative sum."""

    def __init__(self, scalars: GlmScalars, alpha: float):
        self.scalars = scalars
        self.alpha = float(alpha)
        self.arity = 1
        self.out_cols = 1
        self.row_local = True

    def apply(self, inputs, side=None):
        (u,) = inputs
        return self.scalars.e_apply(u, self.alpha)

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        (u,) = inputs
        return np.array([[float(np.sum(self.scalars.e_deriv(u, self.alpha)))]])


class LossResidual(Nonlinearity):
    """Observation-side update v -> (prox_{beta loss(., y)}(v) - v)/beta
    with y taken from side data."""

    def __init__(self, scalars: GlmScalars, beta: float):
        self.scalars = scalars
        self.beta = float(beta)
        self.arity = 1
        self.out_cols = 1
        self.row_local = True

    def apply(self, inputs, side=None):
        (v,) = inputs
        y = side.array("y").reshape(v.shape)
        return self.scalars.h_apply(v, y, self.beta)

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        (v,) = inputs
        y = side.array("y").reshape(v.shape)
        return np.array([[float(np.sum(self.scalars.h_deriv(v, y, self.beta)))]])


def forward_edge() -> EdgeId:
    return EdgeId("sig", "obs")


def _b_scalar(traj: AmpTrajectory, e: EdgeId, t: int) -> float:
    return float(traj.b[e][t][0, 0])


def make_gamp_provider(model: GlmModel):
    """Phase-alternating provider with adaptive scales read from the
    trajectory's stored correction coefficients."""
    fwd = forward_edge()
    bwd = fwd.reversed()
    zero = Zero(1)

    def provider(edge, t, traj):
        if edge == fwd:
            if t % 2 == 0:
                return zero
            d0 = _b_scalar(traj, bwd, t - 1)
            if abs(d0) < 1e-14:
                raise NumericalError("vanishing average derivative on the "
                                     "observation side", edge=str(edge), t=t)
            return PenaltyProx(model.scalars, alpha=-1.0 / d0)
        if t % 2 == 1:
            return zero
        beta = model.beta0 if t == 0 else _b_scalar(traj, fwd, t - 1)
        return LossResidual(model.scalars, beta=beta)

    return provider


def build_gamp_instance(model: GlmModel, seed: int = 0):
    """Sample (A, x0, y) and assemble the chain instance.

    Returns (instance, teacher).  The observations are planted (y is
    drawn from A x0), so the plain covariance recursion does not cover
    this instance; meta marks it for the overlap recursion.
    """
    fwd = forward_edge()
    bwd = fwd.reversed()
    g = two_node_chain("sig", model.d, "obs", model.n)
    A = sample_iid(model.n, model.d, model.d, stream(seed, "glm", "A"))
    x0 = model.prior.sample(model.d, stream(seed, "glm", "x0"))
    z = A @ x0
    y = model.channel.sample(z, stream(seed, "glm", "y"))
    teacher = GlmTeacher(x0=x0, z=z, y=y)

    instance = GraphInstance(
        graph=g,
        matrices={fwd: A},
        provider=make_gamp_provider(model),
        x0={},
        side={bwd: SideData(arrays={"y": y})},
        scale_base={fwd: float(model.d)},
        meta={"name": "glm", "se_mode": "overlap", "model": model, "seed": seed},
    )
    return instance, teacher


@dataclass
class GampIterateStats:
    """Measured two-phase quantities at estimation time t: signal
    overlap m, squared error, estimate second moment p, and the
    per-row field second moments."""

    t: int
    m: float
    mse: float
    p: float
    u2: float
    v2: float


def gamp_estimates(traj: AmpTrajectory, model: GlmModel) -> List[np.ndarray]:
    """Signal estimates x_hat_t = e_t(u^t) for t = 1..; alpha_t is
    recovered from the stored observation-side coefficients."""
    fwd = forward_edge()
    bwd = fwd.reversed()
    half = reindex_half_iterates(traj, fwd)
    out = []
    for t in range(1, len(half.u)):
        d_prev = _b_scalar(traj, bwd, 2 * t - 2)
        alpha = -1.0 / d_prev
        out.append(model.scalars.e_apply(half.u[t].reshape(-1), alpha))
    return out


def gamp_iterate_stats(traj: AmpTrajectory, model: GlmModel,
                       teacher: GlmTeacher) -> List[GampIterateStats]:
    """Per-time overlap/error/field statistics for comparison with the
    overlap recursion (same normalizations: everything per coordinate)."""
    fwd = forward_edge()
    half = reindex_half_iterates(traj, fwd)
    xhats = gamp_estimates(traj, model)
    x0 = teacher.x0
    recs = []
    for t in range(1, len(half.u)):
        xh = xhats[t - 1]
        u = half.u[t].reshape(-1)
        rec = GampIterateStats(
            t=t,
            m=float(x0 @ xh) / model.d,
            mse=float(np.sum((xh - x0) ** 2)) / model.d,
            p=float(xh @ xh) / model.d,
            u2=float(u @ u) / model.d,
            v2=float(np.sum(half.v[t] ** 2)) / model.n if t < len(half.v) else math.nan,
        )
        recs.append(rec)
    return recs


def kkt_residual(model: GlmModel, A: np.ndarray, y: np.ndarray, xhat: np.ndarray) -> float:
    """Sup-norm violation of the first-order conditions of
    min_x sum loss(y, Ax) + penalty(x) at xhat."""
    xhat = np.asarray(xhat, dtype=float).reshape(-1)
    z = A @ xhat
    if model.scalars.loss == "squared":
        gz = z - y
    else:
        gz = -y / (1.0 + np.exp(y * z))
    grad = A.T @ gz
    pen = model.scalars.penalty
    if pen.kind == "abs":
        lam = pen.weight
        on = np.abs(grad + lam * np.sign(xhat))
        off = np.maximum(np.abs(grad) - lam, 0.0)
        return float(np.max(np.where(xhat != 0.0, on, off)))
    return float(np.max(np.abs(grad + penalty_grad(pen, xhat))))


def lasso_model(d: int, n: int, lam: float, prior: Prior, sigma: float = 0.0,
                beta0: float = 1.0) -> GlmModel:
    return GlmModel(d=d, n=n, prior=prior, channel=make_channel("linear", sigma),
                    scalars=GlmScalars(penalty=ProxSpec(kind="abs", gamma=1.0, weight=lam),
                                       loss="squared"), beta0=beta0)


def ridge_model(d: int, n: int, lam: float, prior: Prior, sigma: float = 0.0,
                beta0: float = 1.0) -> GlmModel:
    return GlmModel(d=d, n=n, prior=prior, channel=make_channel("linear", sigma),
                    scalars=GlmScalars(penalty=ProxSpec(kind="squared", gamma=1.0, weight=lam),
                                       loss="squared"), beta0=beta0)


def logistic_model(d: int, n: int, lam: float, prior: Prior,
                   beta0: float = 1.0) -> GlmModel:
    return GlmModel(d=d, n=n, prior=prior, channel=make_channel("logistic"),
                    scalars=GlmScalars(penalty=ProxSpec(kind="squared", gamma=1.0, weight=lam),
                                       loss="logistic"), beta0=beta0)
