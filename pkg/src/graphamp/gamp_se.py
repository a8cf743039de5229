"""Scalar overlap recursion for two-phase regression iterations.

The two-node chain with a planted signal (y drawn from the design
matrix itself) falls outside the plain covariance recursion: the
observations correlate with the matrix.  Conditioning on the planted
direction splits each iterate into a deterministic signal component
and a Gaussian remainder, giving a closed recursion over six scalars
per iteration:

    u-field:  U_t = nu_t X0 + sqrt(kappa2_t) H        (estimation side)
    v-field:  V_t = (m_t / sqrt(rho)) S + sqrt(kappa1_t) G,
              y = channel(sqrt(rho) S)                 (observation side)

with rho = E[X0^2], X0 the prior, S, G, H independent standard
normals, and

    m_t   = E[X0 e_t(U_t)]                 (overlap)
    kappa1_t = E[e_t(U_t)^2] - m_t^2 / rho (orthogonal variance)
    beta_t   = E[e_t'(U_t)]
    d_t      = delta E[h_t'(V_t, y)]
    kappa2_{t+1} = delta E[h_t(V_t, y)^2]  (full second moment; the
                   conditioning removes only the planted direction on
                   the column side)
    nu_{t+1}     = (delta / sqrt(rho)) E[S h_t] - d_t m_t / rho
    alpha_{t+1}  = -1 / d_t

started from h_0 evaluated at v = 0.  Here e_t(u) = prox of the
penalty at scale alpha_t applied to alpha_t u, and h_t(v, y) is the
residual map of the loss prox at scale beta_t.

Expectations run on tensorized Gauss-Hermite grids by default, or by
seeded Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import roots_hermitenorm

from .ensembles import normals, stream
from .errors import NumericalError
from .prox import ProxSpec, prox, prox_deriv

DEFAULT_GH_NODES = 61


def gh_points(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and probability weights so E[f(Z)] = sum w f(x), Z std normal."""
    x, w = roots_hermitenorm(n)
    return x, w / math.sqrt(2.0 * math.pi)


_TAIL_SDS = 12.0


def gaussian_piecewise_nodes(mean: float, sd: float, kinks, n: int):
    """Nodes and weights for E[g(U)], U ~ N(mean, sd^2), with g smooth
    between the given kink points.

    Gauss-Hermite converges poorly across kinks (thresholding makes the
    integrand only piecewise smooth), so the axis is split at the kinks
    and each finite piece integrated by Gauss-Legendre against the
    explicit normal density; the truncated tails carry ~1e-32 mass.
    """
    if sd == 0.0:
        return np.array([mean]), np.array([1.0])
    lo, hi = mean - _TAIL_SDS * sd, mean + _TAIL_SDS * sd
    cuts = [lo] + sorted(k for k in kinks if lo < k < hi) + [hi]
    xg, wg = np.polynomial.legendre.leggauss(n)
    nodes, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        u = 0.5 * (b - a) * xg + 0.5 * (a + b)
        dens = np.exp(-0.5 * ((u - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))
        nodes.append(u)
        weights.append(0.5 * (b - a) * wg * dens)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class QuadSpec:
    """Expectation backend: tensorized Gauss-Hermite (method "gh" with
    nodes per axis) or seeded Monte Carlo (method "mc" with samples)."""

    method: str = "gh"
    nodes: int = DEFAULT_GH_NODES
    samples: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("gh", "mc"):
            raise ValueError(f"unknown quadrature method {self.method!r}")


class Prior:
    """Signal coordinate distribution: second moment, sampling, and a
    finite point mass/quadrature representation for expectations."""

    rho: float

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def quad_points(self, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
        """(values, weights) with weights summing to 1."""
        raise NotImplementedError


@dataclass(frozen=True)
class GaussBernoulliPrior(Prior):
    """Zero with probability 1 - eps, else centered normal with
    variance var."""

    eps: float = 0.1
    var: float = 1.0

    @property
    def rho(self) -> float:
        return self.eps * self.var

    def sample(self, n, rng):
        mask = (rng.integers(0, 1 << 53, size=n) + 0.5) / float(1 << 53) < self.eps
        return np.where(mask, math.sqrt(self.var) * normals(rng, n), 0.0)

    def quad_points(self, nodes):
        x, w = gh_points(nodes)
        vals = np.concatenate([[0.0], math.sqrt(self.var) * x])
        wts = np.concatenate([[1.0 - self.eps], self.eps * w])
        return vals, wts


@dataclass(frozen=True)
class GaussianPrior(Prior):
    var: float = 1.0

    @property
    def rho(self) -> float:
        return self.var

    def sample(self, n, rng):
        return math.sqrt(self.var) * normals(rng, n)

    def quad_points(self, nodes):
        x, w = gh_points(nodes)
        return math.sqrt(self.var) * x, w


@dataclass(frozen=True)
class RademacherPrior(Prior):
    a: float = 1.0

    @property
    def rho(self) -> float:
        return self.a ** 2

    def sample(self, n, rng):
        u = (rng.integers(0, 1 << 53, size=n) + 0.5) / float(1 << 53)
        return np.where(u < 0.5, -self.a, self.a)

    def quad_points(self, nodes):
        return np.array([-self.a, self.a]), np.array([0.5, 0.5])


class Channel:
    """Observation law y | z.  cond_points gives, per z value, a finite
    set of (y, weight) pairs (exact for discrete outputs, Gauss-Hermite
    for additive noise); sample draws observations for data generation."""

    def sample(self, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def cond_points(self, z: np.ndarray, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
        """Arrays of shape z.shape + (k,): support points and weights."""
        raise NotImplementedError


@dataclass(frozen=True)
class LinearGaussianChannel(Channel):
    """y = z + sigma * noise."""

    sigma: float = 0.0

    def sample(self, z, rng):
        if self.sigma == 0.0:
            return np.array(z, dtype=float, copy=True)
        return z + self.sigma * normals(rng, np.shape(z))

    def cond_points(self, z, nodes):
        z = np.asarray(z, dtype=float)
        if self.sigma == 0.0:
            return z[..., None], np.ones(z.shape + (1,))
        xi, w = gh_points(nodes)
        y = z[..., None] + self.sigma * xi
        return y, np.broadcast_to(w, y.shape).copy()


@dataclass(frozen=True)
class SignChannel(Channel):
    """y = sign(z), with sign(0) = +1."""

    def sample(self, z, rng):
        return np.where(np.asarray(z) >= 0, 1.0, -1.0)

    def cond_points(self, z, nodes):
        z = np.asarray(z, dtype=float)
        y = np.where(z >= 0, 1.0, -1.0)[..., None]
        return y, np.ones(z.shape + (1,))


@dataclass(frozen=True)
class LogisticChannel(Channel):
    """y = +1 with probability sigmoid(z), else -1."""

    def sample(self, z, rng):
        z = np.asarray(z, dtype=float)
        u = (rng.integers(0, 1 << 53, size=z.shape) + 0.5) / float(1 << 53)
        p = 1.0 / (1.0 + np.exp(-z))
        return np.where(u < p, 1.0, -1.0)

    def cond_points(self, z, nodes):
        z = np.asarray(z, dtype=float)
        p = 1.0 / (1.0 + np.exp(-z))
        y = np.broadcast_to(np.array([1.0, -1.0]), z.shape + (2,)).copy()
        w = np.stack([p, 1.0 - p], axis=-1)
        return y, w


def make_channel(kind: str, sigma: float = 0.0) -> Channel:
    if kind in ("linear", "linear_gaussian"):
        return LinearGaussianChannel(sigma=sigma)
    if kind == "sign":
        return SignChannel()
    if kind == "logistic":
        return LogisticChannel()
    raise ValueError(f"unknown channel {kind!r}")


@dataclass(frozen=True)
class GlmScalars:
    """Coordinatewise update maps of the two-phase iteration.

    e_t(u) = prox_{alpha penalty}(alpha u) on the estimation side and
    h_t(v, y) = (prox_{beta loss(., y)}(v) - v) / beta on the
    observation side; both vectorize over arrays.
    """

    penalty: ProxSpec
    loss: str = "squared"

    def __post_init__(self):
        if self.loss not in ("squared", "logistic"):
            raise ValueError(f"unknown loss {self.loss!r}")

    def e_kinks(self, alpha: float):
        """Points where u -> e(u) is not smooth (quadrature split points)."""
        pen = self.penalty
        if pen.kind == "abs":
            return [-pen.weight, pen.weight]
        if pen.kind == "indicator":
            return [pen.lo / alpha, pen.hi / alpha] if math.isfinite(pen.hi) else [pen.lo / alpha]
        return []

    def e_apply(self, u, alpha: float):
        spec = self.penalty.with_gamma(alpha)
        return prox(spec, alpha * np.asarray(u, dtype=float))

    def e_deriv(self, u, alpha: float):
        spec = self.penalty.with_gamma(alpha)
        return alpha * prox_deriv(spec, alpha * np.asarray(u, dtype=float))

    def h_apply(self, v, y, beta: float):
        v = np.asarray(v, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.loss == "squared":
            return (y - v) / (1.0 + beta)
        spec = ProxSpec(kind="logistic", gamma=beta)
        p = prox(spec, v, labels=y)
        return (p - v) / beta

    def h_deriv(self, v, y, beta: float):
        v = np.asarray(v, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.loss == "squared":
            return np.full(np.broadcast(v, y).shape, -1.0 / (1.0 + beta))
        spec = ProxSpec(kind="logistic", gamma=beta)
        dp = prox_deriv(spec, v, labels=y)
        return (dp - 1.0) / beta


@dataclass
class GampSePoint:
    """State of the overlap recursion at one iteration.

    For t >= 1: the u-field parameters (nu, kappa2, alpha), the overlap
    m, second moment p = E[e^2], mse, orthogonal variance kappa1, and
    the step scalars (beta, d) feeding t + 1.  The t = 0 point carries
    only the init-stage scalars.
    """

    t: int
    nu: float = 0.0
    kappa2: float = 0.0
    alpha: float = 0.0
    m: float = 0.0
    p: float = 0.0
    mse: float = 0.0
    kappa1: float = 0.0
    beta: float = 0.0
    d: float = 0.0

    def v_second_moment(self) -> float:
        return self.p

    def u_second_moment(self, rho: float) -> float:
        return self.nu ** 2 * rho + self.kappa2


def _u_expectations(prior: Prior, scalars: GlmScalars, nu: float, kappa2: float,
                    alpha: float, quad: QuadSpec):
    """E[X0 e], E[e^2], E[e'], E[(e - X0)^2] over U = nu X0 + sqrt(kappa2) H."""
    sk = math.sqrt(max(kappa2, 0.0))
    if quad.method == "gh":
        x0, wx = prior.quad_points(quad.nodes)
        kinks = scalars.e_kinks(alpha)
        pts = [gaussian_piecewise_nodes(nu * v, sk, kinks, quad.nodes) for v in x0]
        width = max(len(p[0]) for p in pts)
        U = np.zeros((len(x0), width))
        W = np.zeros((len(x0), width))
        for i, (ui, wi) in enumerate(pts):
            U[i, : len(ui)] = ui
            W[i, : len(ui)] = wx[i] * wi
        X0 = x0[:, None]
    else:
        # common random numbers across iterations: the recursion runs on
        # one fixed M-sample empirical measure instead of compounding
        # fresh MC noise every step
        rng = stream(quad.seed, "overlap-se", "u")
        X0 = prior.sample(quad.samples, rng)
        U = nu * X0 + sk * normals(rng, quad.samples)
        W = np.full(quad.samples, 1.0 / quad.samples)
    e = scalars.e_apply(U, alpha)
    de = scalars.e_deriv(U, alpha)
    m = float(np.sum(W * X0 * e))
    p = float(np.sum(W * e ** 2))
    beta = float(np.sum(W * de))
    mse = float(np.sum(W * (e - X0) ** 2))
    return m, p, beta, mse


def _v_expectations(channel: Channel, scalars: GlmScalars, m: float, kappa1: float,
                    rho: float, beta: float, quad: QuadSpec):
    """E[S h], E[h^2], E[h'] over V = (m/sqrt(rho)) S + sqrt(kappa1) G,
    y ~ channel(sqrt(rho) S)."""
    sr = math.sqrt(rho)
    sk = math.sqrt(max(kappa1, 0.0))
    if quad.method == "gh":
        s, ws = gh_points(quad.nodes)
        g, wg = gh_points(quad.nodes)
        Y, Wy = channel.cond_points(sr * s, quad.nodes)
        V = (m / sr) * s[:, None, None] + sk * g[None, :, None]
        W = ws[:, None, None] * wg[None, :, None] * Wy[:, None, :]
        S = s[:, None, None]
        Yb = Y[:, None, :]
    else:
        # same fixed sample base at every iteration (see _u_expectations)
        rng = stream(quad.seed, "overlap-se", "v")
        S = normals(rng, quad.samples)
        Yb = channel.sample(sr * S, rng)
        V = (m / sr) * S + sk * normals(rng, quad.samples)
        W = np.full(quad.samples, 1.0 / quad.samples)
    hv = scalars.h_apply(V, Yb, beta)
    dh = scalars.h_deriv(V, Yb, beta)
    e_sh = float(np.sum(W * S * hv))
    e_h2 = float(np.sum(W * hv ** 2))
    e_dh = float(np.sum(W * dh))
    return e_sh, e_h2, e_dh


def gamp_overlap_se(prior: Prior, channel: Channel, scalars: GlmScalars, delta: float,
                    T: int, beta0: float = 1.0,
                    quad: Optional[QuadSpec] = None) -> List[GampSePoint]:
    """Run the six-scalar recursion for T estimation-side iterations.

    Returns points [0..T]; point t = 0 holds the init scalars, point t
    holds the u-field of iteration t and the quantities derived from it.
    """
    quad = quad or QuadSpec()
    rho = prior.rho
    if rho <= 0:
        raise ValueError("prior second moment must be positive")

    e_sh, e_h2, e_dh = _v_expectations(channel, scalars, 0.0, 0.0, rho, beta0, quad)
    d = delta * e_dh
    if abs(d) < 1e-14:
        raise NumericalError("init stage has vanishing average derivative; "
                             "cannot set the estimation step size")
    points = [GampSePoint(t=0, beta=beta0, d=d)]
    nu = (delta / math.sqrt(rho)) * e_sh
    kappa2 = delta * e_h2
    alpha = -1.0 / d

    for t in range(1, T + 1):
        m, p, beta_t, mse = _u_expectations(prior, scalars, nu, kappa2, alpha, quad)
        kappa1 = max(p - m ** 2 / rho, 0.0)
        pt = GampSePoint(t=t, nu=nu, kappa2=kappa2, alpha=alpha, m=m, p=p,
                         mse=mse, kappa1=kappa1, beta=beta_t)
        if t < T:
            e_sh, e_h2, e_dh = _v_expectations(channel, scalars, m, kappa1, rho, beta_t, quad)
            d = delta * e_dh
            if abs(d) < 1e-14:
                raise NumericalError(f"average derivative vanished at t={t}")
            pt.d = d
            nu = (delta / math.sqrt(rho)) * e_sh - d * m / rho
            kappa2 = delta * e_h2
            alpha = -1.0 / d
        points.append(pt)
    return points
