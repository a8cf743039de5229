"""Mixture classification with a spatially coupled stacked design.

K clusters in R^d; a row of cluster k is mu_k plus correlated noise.
Writing the ridge weight matrix as W (d x K, one column per class) and
stacking per-cluster transformed copies X_k = Sigma_k^{1/2} W into
X (Kd x K), the data matrix becomes linear in X with an iid-plus-
deterministic design: row block k is

    A_k = [ sigma-coupled Gaussian blocks ] + 1 g_k^T  on block k,
    g_k = Sigma_k^{-1/2} mu_k,

so cluster means enter as deterministic rank-one row blocks and the
Gaussian part follows a K x K variance grid (diagonal 1, optional
coupling off the diagonal; nonzero coupling mixes neighbor covariances
into the effective cluster noise, still a valid mixture).

The iteration runs on a two-node chain with q = K columns.  The
penalty prox is non-separable across the K stacked blocks but closed
form: W* solves (lam gamma I + sum_k Sigma_k) W = sum_k Sigma_k^{1/2}
V_k and the output restacks Sigma_k^{1/2} W*.  Its diagonal Jacobian
sum is isotropic, so the adaptive scalar steps stay well defined.
The fixed point is the exact ridge minimizer of
  0.5 ||Y - A_eff W||_F^2 + 0.5 lam ||W||_F^2
with Y one-hot labels; predictions take an argmax of x^T W_hat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..engine import AmpTrajectory, GraphInstance, reindex_half_iterates
from ..ensembles import normals, sample_spatially_coupled, spectral_inv_sqrt, spectral_sqrt, stream
from ..errors import NumericalError
from ..graphs import EdgeId, GraphSpec
from ..nonlinearity import Nonlinearity, SideData, Zero


@dataclass(frozen=True)
class GmmSpatialModel:
    # mean_scale is the Euclidean norm of each cluster mean.  Keep it
    # small: the rank-one mean blocks contribute a loop gain of order
    # n_per_cluster * mean_scale^2 to the plain iteration, which must
    # stay below 1 or the mean direction diverges.
    K: int
    d: int
    n_per_cluster: int
    lam: float = 1.0
    mean_scale: float = 0.1
    coupling: float = 0.0
    cov_scales: Optional[Tuple[float, ...]] = None
    beta0: float = 1.0

    @property
    def n(self) -> int:
        return self.K * self.n_per_cluster

    def sigma_grid(self) -> np.ndarray:
        S = np.eye(self.K)
        for k in range(self.K - 1):
            S[k, k + 1] = S[k + 1, k] = self.coupling
        return S


@dataclass
class GmmData:
    means: List[np.ndarray]
    covs: List[np.ndarray]
    cov_sqrts: List[np.ndarray]
    design: np.ndarray        # stacked design (n x Kd), mean blocks included
    design_rows: np.ndarray   # effective per-sample feature rows (n x d)
    labels: np.ndarray        # cluster index per row
    Y: np.ndarray             # one-hot targets (n x K)


def _sample_means_covs(model: GmmSpatialModel, seed: int):
    means, covs, roots = [], [], []
    scales = model.cov_scales or tuple(1.0 + 0.5 * k for k in range(model.K))
    for k in range(model.K):
        # O(1)-norm means balance the O(1)-norm noise rows
        mu = model.mean_scale * normals(stream(seed, "gmm", "mean", k), model.d)
        mu /= math.sqrt(model.d)
        z = normals(stream(seed, "gmm", "cov", k), (model.d, model.d))
        q, _ = np.linalg.qr(z)
        eig = 0.5 + (scales[k] - 0.5) * (np.arange(model.d) + 0.5) / model.d
        Sigma = (q * eig) @ q.T
        means.append(mu)
        covs.append(Sigma)
        roots.append(spectral_sqrt(Sigma))
    return means, covs, roots


def sample_gmm_data(model: GmmSpatialModel, seed: int, tag: str = "train") -> GmmData:
    """Draw one dataset: coupled Gaussian blocks plus mean blocks."""
    K, d, npc = model.K, model.d, model.n_per_cluster
    means, covs, roots = _sample_means_covs(model, seed)
    Z = sample_spatially_coupled([npc] * K, [d] * K, model.sigma_grid(), d,
                                 stream(seed, "gmm", "Z", tag))
    design = Z.copy()
    for k in range(K):
        g_k = spectral_inv_sqrt(covs[k]) @ means[k]
        design[k * npc:(k + 1) * npc, k * d:(k + 1) * d] += np.outer(np.ones(npc), g_k)
    # effective per-sample rows: block row k maps W -> sum_j block_{kj} Sigma_j^{1/2} W
    rows = np.zeros((model.n, d))
    for k in range(K):
        for j in range(K):
            blk = design[k * npc:(k + 1) * npc, j * d:(j + 1) * d]
            if np.any(blk):
                rows[k * npc:(k + 1) * npc] += blk @ roots[j]
    labels = np.repeat(np.arange(K), npc)
    Y = np.zeros((model.n, K))
    Y[np.arange(model.n), labels] = 1.0
    return GmmData(means=means, covs=covs, cov_sqrts=roots, design=design,
                   design_rows=rows, labels=labels, Y=Y)


class StackPenaltyProx(Nonlinearity):
    """Non-separable prox of 0.5 lam ||W||_F^2 in stacked coordinates."""

    def __init__(self, model: GmmSpatialModel, covs, roots, alpha: float):
        self.model = model
        self.covs = covs
        self.roots = roots
        self.alpha = float(alpha)
        self.arity = 1
        self.out_cols = model.K
        self.row_local = False
        G = self.alpha * self.model.lam * np.eye(model.d) + sum(covs)
        self._G = G

    def _solve(self, U):
        K, d = self.model.K, self.model.d
        V = self.alpha * U
        rhs = np.zeros((d, K))
        for k in range(K):
            rhs += self.roots[k].T @ V[k * d:(k + 1) * d]
        W = np.linalg.solve(self._G, rhs)
        out = np.vstack([self.roots[k] @ W for k in range(K)])
        return W, out

    def apply(self, inputs, side=None):
        _, out = self._solve(inputs[0])
        return out

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        K = self.model.K
        Ginv = np.linalg.inv(self._G)
        tr = sum(float(np.trace(self.covs[k] @ Ginv)) for k in range(K))
        return self.alpha * tr * np.eye(K)

    def weights(self, U) -> np.ndarray:
        W, _ = self._solve(U)
        return W


class OneHotResidual(Nonlinearity):
    """Observation-side map (Y - V) / (1 + beta), columnwise."""

    def __init__(self, beta: float):
        self.beta = float(beta)
        self.arity = 1
        self.row_local = True

    def apply(self, inputs, side=None):
        Y = side.array("Y")
        return (Y - inputs[0]) / (1.0 + self.beta)

    def jacobian_trace(self, inputs, side=None, wrt=0, notes=None):
        n, K = inputs[0].shape
        return (-n / (1.0 + self.beta)) * np.eye(K)


def _iso_scalar(b: np.ndarray, what: str) -> float:
    off = np.abs(b - b[0, 0] * np.eye(b.shape[0])).max()
    if off > 1e-8 * (1.0 + abs(b[0, 0])):
        raise NumericalError(f"{what} coefficient is not isotropic (off by {off:.2e})")
    return float(b[0, 0])


def make_gmm_provider(model: GmmSpatialModel, covs, roots):
    fwd = EdgeId("stack", "obs")
    bwd = fwd.reversed()
    zero = Zero(model.K)

    def provider(edge, t, traj):
        if edge == fwd:
            if t % 2 == 0:
                return zero
            d0 = _iso_scalar(traj.b[bwd][t - 1], "observation-side")
            if abs(d0) < 1e-14:
                raise NumericalError("vanishing average derivative", edge=str(edge), t=t)
            return StackPenaltyProx(model, covs, roots, alpha=-1.0 / d0)
        if t % 2 == 1:
            return zero
        beta = model.beta0 if t == 0 else _iso_scalar(traj.b[fwd][t - 1], "stack-side")
        return OneHotResidual(beta)

    return provider


def build_gmm_spatial_instance(model: GmmSpatialModel, seed: int = 0):
    """Assemble the chain instance over the stacked variable.

    Returns (instance, data).  No Gaussian-limit gate applies (the
    design carries deterministic mean blocks); the checks are the
    ridge fixed point and classification accuracy.
    """
    fwd = EdgeId("stack", "obs")
    bwd = fwd.reversed()
    data = sample_gmm_data(model, seed, tag="train")
    g = GraphSpec(node_dim={"stack": model.K * model.d, "obs": model.n},
                  edges=frozenset({fwd, bwd}),
                  edge_cols={fwd: model.K, bwd: model.K})
    instance = GraphInstance(
        graph=g,
        matrices={fwd: data.design},
        provider=make_gmm_provider(model, data.covs, data.cov_sqrts),
        side={bwd: SideData(arrays={"Y": data.Y})},
        scale_base={fwd: float(model.d)},
        meta={"name": "gmm_spatial", "seed": seed, "model": model},
    )
    return instance, data


def gmm_weights(traj: AmpTrajectory, model: GmmSpatialModel, data: GmmData) -> np.ndarray:
    """Ridge weights W (d x K) recovered from the final stacked iterate."""
    fwd = EdgeId("stack", "obs")
    bwd = fwd.reversed()
    half = reindex_half_iterates(traj, fwd)
    t = len(half.u) - 1
    d0 = _iso_scalar(traj.b[bwd][2 * t - 2], "observation-side")
    prox = StackPenaltyProx(model, data.covs, data.cov_sqrts, alpha=-1.0 / d0)
    return prox.weights(half.u[t])


def ridge_baseline(model: GmmSpatialModel, data: GmmData) -> np.ndarray:
    """Direct minimizer of the same objective on the effective rows."""
    A = data.design_rows
    return np.linalg.solve(A.T @ A + model.lam * np.eye(model.d), A.T @ data.Y)


def classify(W: np.ndarray, rows: np.ndarray) -> np.ndarray:
    return np.argmax(rows @ W, axis=1)


def accuracy(W: np.ndarray, data: GmmData) -> float:
    return float(np.mean(classify(W, data.design_rows) == data.labels))
