"""Covariance recursion for the Gaussian limit of the graph iteration.

For each edge the iterates (x^1_e, ..., x^t_e) converge (rows jointly)
to a centered Gaussian family with a q_e x q_e covariance kernel per
time pair, independent across edges:

    kappa^{1,1}_e     = (1/S_e) f^0_e(x^0)^T f^0_e(x^0)
    kappa^{t+1,s+1}_e = (1/S_e) E[ f^s_e(Z^s, ..)^T f^t_e(Z^t, ..) ]

with Z^0 fixed at the actual initializer and the expectation over the
Gaussian family of the input edges.  Expectations are estimated by
replicated Monte Carlo: full-width copies of every input family are
drawn with common random numbers, the real update functions (with
their real side data) are evaluated on each copy, and products are
accumulated in fixed chunk order so results are reproducible.

This generic recursion needs update functions with a fixed schedule
(provider callable with traj=None).  Iterations whose step sizes adapt
to the run are covered by the scalar overlap recursion instead (see
gamp_se).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .engine import AmpTrajectory, GraphInstance, Observable
from .ensembles import normals, stream
from .errors import NumericalError
from .graphs import EdgeId, canonical_edge_order, edges_into
from .nonlinearity import Nonlinearity, SideData

DEFAULT_CHUNK = 256
JITTER_REL = 1e-10


@dataclass
class SECovariances:
    """Per-edge covariance kernels; K[e][a, b] is the q x q covariance
    between iterate times a+1 and b+1."""

    K: Dict[EdgeId, np.ndarray]
    T: int

    def kernel(self, e: EdgeId, s: int, t: int) -> np.ndarray:
        """Covariance of (x^s_e, x^t_e), 1-based times."""
        return self.K[e][s - 1, t - 1]


def _m0(instance: GraphInstance, e: EdgeId) -> np.ndarray:
    g = instance.graph
    x0 = {ein: instance.x0.get(ein, np.zeros(g.x_shape(ein))) for ein in g.edges}
    f = instance.provider(e, 0, None)
    inputs = [np.asarray(x0[ein], dtype=float) for ein in edges_into(g, e)]
    return np.asarray(f.apply(inputs, side=instance.side_data(e)), dtype=float)


def se_init(instance: GraphInstance) -> SECovariances:
    """One-time kernel from the deterministic first update."""
    g = instance.graph
    K = {}
    for e in canonical_edge_order(g):
        m0 = _m0(instance, e)
        K[e] = (m0.T @ m0 / instance.scale(e)).reshape(1, 1, g.q(e), g.q(e))
    return SECovariances(K=K, T=1)


def family_factor(K_e: np.ndarray) -> np.ndarray:
    """Square-root factor of the stacked (t q) x (t q) family covariance.

    Negative eigenvalues (Monte Carlo noise) are clipped and a relative
    jitter keeps the factorization well posed near rank deficiency.
    """
    t, _, q, _ = K_e.shape
    C = K_e.transpose(0, 2, 1, 3).reshape(t * q, t * q)
    C = 0.5 * (C + C.T)
    w, V = np.linalg.eigh(C)
    w = np.maximum(w, 0.0)
    jitter = JITTER_REL * float(np.trace(C)) / C.shape[0]
    return V * np.sqrt(w + jitter)


def sample_gaussian_family(K_e: np.ndarray, n_rows: int, reps: int,
                           rng: np.random.Generator) -> np.ndarray:
    """reps independent copies of the length-n_rows family; returns an
    array of shape (reps, t, n_rows, q) whose rows are iid with the
    stacked kernel covariance."""
    t, _, q, _ = K_e.shape
    F = family_factor(K_e)
    Z = normals(rng, (reps * n_rows, t * q)) @ F.T
    return Z.reshape(reps, n_rows, t, q).transpose(0, 2, 1, 3)


def _tile_side(side: Optional[SideData], reps: int) -> Optional[SideData]:
    if side is None or reps == 1:
        return side
    arrays = {k: np.tile(v, (reps,) + (1,) * (np.ndim(v) - 1)) for k, v in side.arrays.items()}
    return SideData(arrays=arrays, scalars=dict(side.scalars))


def _eval_replicated(f: Nonlinearity, inputs_rep: List[np.ndarray],
                     side: Optional[SideData]) -> np.ndarray:
    """Apply f to (reps, n, q) inputs, returning (reps, n, q_out).

    Row-local functions are evaluated once on the stacked rows (side
    arrays tiled to match); others loop over copies.
    """
    reps, n = inputs_rep[0].shape[:2]
    if f.row_local:
        flat = [x.reshape(reps * n, -1) for x in inputs_rep]
        out = np.asarray(f.apply(flat, side=_tile_side(side, reps)))
        return out.reshape(reps, n, -1)
    outs = [np.asarray(f.apply([x[r] for x in inputs_rep], side=side)) for r in range(reps)]
    return np.stack(outs, axis=0)


def se_step(instance: GraphInstance, cov: SECovariances, reps: int,
            rng_factory: Callable[..., np.random.Generator],
            chunk: int = DEFAULT_CHUNK) -> SECovariances:
    """Extend every kernel by one time using reps Monte Carlo copies.

    rng_factory(*labels) must return independent generators for
    distinct labels; draws are chunked and accumulated in canonical
    edge order, so output depends only on (kernels, reps, chunk, rngs).
    """
    g = instance.graph
    t = cov.T
    order = canonical_edge_order(g)
    x0 = {e: np.asarray(instance.x0.get(e, np.zeros(g.x_shape(e))), dtype=float) for e in order}
    fns = {e: [instance.provider(e, s, None) for s in range(t + 1)] for e in order}
    sums = {e: [np.zeros((g.q(e), g.q(e))) for _ in range(t + 1)] for e in order}
    rngs = {e: rng_factory("se", t, str(e)) for e in order}

    done = 0
    while done < reps:
        rc = min(chunk, reps - done)
        fam = {}
        for e in order:
            Z = sample_gaussian_family(cov.K[e], g.node_dim[e.end], rc, rngs[e])
            fam[e] = [np.broadcast_to(x0[e], (rc,) + x0[e].shape)] + [Z[:, s] for s in range(t)]
        for e in order:
            ins = edges_into(g, e)
            side = instance.side_data(e)
            ms = []
            for s in range(t + 1):
                inputs_rep = [fam[ein][s] for ein in ins]
                ms.append(_eval_replicated(fns[e][s], inputs_rep, side))
            mt = ms[t]
            for s in range(t + 1):
                sums[e][s] += np.einsum("rna,rnb->ab", ms[s], mt)
        done += rc

    K = {}
    for e in order:
        q = g.q(e)
        new = np.zeros((t + 1, t + 1, q, q))
        new[:t, :t] = cov.K[e]
        for s in range(t + 1):
            kst = sums[e][s] / (reps * instance.scale(e))
            new[t, s] = kst.T
            new[s, t] = kst
        K[e] = new
    return SECovariances(K=K, T=t + 1)


def se_run(instance: GraphInstance, T: int, reps: int = 2000, seed: int = 0,
           chunk: int = DEFAULT_CHUNK) -> SECovariances:
    """Covariance kernels for iterate times 1..T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    factory = lambda *labels: stream(seed, *labels)
    cov = se_init(instance)
    while cov.T < T:
        cov = se_step(instance, cov, reps, factory, chunk=chunk)
    return cov


def mc_observable_stats(instance: GraphInstance, cov: SECovariances,
                        observables: Sequence[Observable],
                        times: Optional[Sequence[int]] = None,
                        reps: int = 400, seed: int = 1,
                        chunk: int = 64) -> Dict[Tuple[int, str], dict]:
    """Monte Carlo mean and sd of each observable under the Gaussian
    family, keyed by (t, name).  Time 0 evaluates the initializer."""
    g = instance.graph
    order = canonical_edge_order(g)
    ts = sorted(set(times)) if times is not None else list(range(cov.T + 1))
    if any(s < 0 or s > cov.T for s in ts):
        raise ValueError(f"times outside kernel range 0..{cov.T}")
    x0 = {e: np.asarray(instance.x0.get(e, np.zeros(g.x_shape(e))), dtype=float) for e in order}
    rngs = {e: stream(seed, "se-obs", str(e)) for e in order}
    acc: Dict[Tuple[int, str], List[float]] = {(s, o.name): [] for s in ts for o in observables}

    done = 0
    while done < reps:
        rc = min(chunk, reps - done)
        fam = {}
        for e in order:
            Z = sample_gaussian_family(cov.K[e], g.node_dim[e.end], rc, rngs[e])
            fam[e] = [np.broadcast_to(x0[e], (rc,) + x0[e].shape)] + [Z[:, s] for s in range(cov.T)]
        for r in range(rc):
            for s in ts:
                xs = {e: fam[e][s][r] for e in order}
                for o in observables:
                    acc[(s, o.name)].append(o(xs, s))
        done += rc

    out = {}
    for key, vals in acc.items():
        arr = np.asarray(vals)
        out[key] = {"mean": float(arr.mean()), "std": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
                    "n": len(arr)}
    return out


def amp_observable_stats(trajs: Sequence[AmpTrajectory],
                         observables: Sequence[Observable],
                         times: Optional[Sequence[int]] = None) -> Dict[Tuple[int, str], dict]:
    """Across-seed mean and sd of trajectory observables, keyed by (t, name)."""
    from .engine import observe

    acc: Dict[Tuple[int, str], List[float]] = {}
    for traj in trajs:
        for rec in observe(traj, observables, times=times):
            acc.setdefault((rec["t"], rec["observable"]), []).append(rec["value"])
    out = {}
    for key, vals in acc.items():
        arr = np.asarray(vals)
        out[key] = {"mean": float(arr.mean()), "std": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
                    "n": len(arr)}
    return out


def compare(amp_stats: Mapping[Tuple[int, str], dict],
            se_stats: Mapping[Tuple[int, str], dict]) -> List[dict]:
    """Match iteration statistics against the Gaussian-limit prediction.

    One record per shared (t, observable): means, sds, relative error
    against the prediction, and the z-score under the combined standard
    error.  Records are sorted by (t, observable).
    """
    records = []
    for key in sorted(set(amp_stats) & set(se_stats)):
        t, name = key
        a, s = amp_stats[key], se_stats[key]
        diff = a["mean"] - s["mean"]
        sem2 = 0.0
        if a["n"] > 1:
            sem2 += a["std"] ** 2 / a["n"]
        if s["n"] > 1:
            sem2 += s["std"] ** 2 / s["n"]
        if sem2 > 0:
            z = abs(diff) / math.sqrt(sem2)
        else:
            z = 0.0 if diff == 0 else math.inf
        denom = max(abs(s["mean"]), 1e-12)
        records.append({
            "t": t, "observable": name,
            "amp_mean": a["mean"], "amp_std": a["std"], "amp_n": a["n"],
            "se_mean": s["mean"], "se_std": s["std"], "se_n": s["n"],
            "rel_err": abs(diff) / denom, "z": z,
        })
    return records
