"""Gaussian random-matrix samplers and deterministic seed streams.

All normal variates are produced by inverse-CDF (scipy.special.ndtri)
applied to 53-bit uniforms drawn from a PCG64 stream, so draws are
reproducible byte-for-byte across platforms for a fixed (master seed,
stream key).  Stream keys are derived by hashing string labels, giving
every (edge, purpose, index) its own independent substream.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import NumericalError

_TWO53 = float(1 << 53)


def stream(master_seed: int, *labels) -> np.random.Generator:
    """Independent generator keyed by (master_seed, labels)."""
    tag = "/".join(str(x) for x in labels)
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    spawn_key = tuple(int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4))
    ss = np.random.SeedSequence(entropy=int(master_seed) & ((1 << 64) - 1), spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(ss))


def normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals via a fixed uniform-to-normal transform."""
    u = (rng.integers(0, 1 << 53, size=shape, dtype=np.uint64).astype(float) + 0.5) / _TWO53
    return ndtri(u)


@dataclass(frozen=True)
class SeededRng:
    """Hierarchical deterministic randomness: one master seed, draws keyed
    by string labels, each key an independent stream."""

    master_seed: int

    def generator(self, *labels) -> np.random.Generator:
        return stream(self.master_seed, *labels)

    def normals(self, shape, *labels) -> np.ndarray:
        return normals(self.generator(*labels), shape)

    def child(self, *labels) -> "SeededRng":
        g = self.generator(*labels)
        return SeededRng(int(g.integers(0, 1 << 63)))


@dataclass(frozen=True)
class EnsembleSpec:
    """Declarative description of a random-matrix family.

    kind: goe | iid_gaussian | spatially_coupled | correlated.
    scale_N is the variance base: entries ~ N(0, 1/scale_N) (GOE diag
    2/scale_N); spatially coupled blocks use sigma[i][j]/scale_N.
    """

    kind: str
    rows: int
    cols: int
    scale_N: float
    block_rows: Optional[Sequence[int]] = None
    block_cols: Optional[Sequence[int]] = None
    sigma: Optional[Sequence[Sequence[float]]] = None
    sigma_factor: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("goe", "iid_gaussian", "spatially_coupled", "correlated"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.kind == "goe" and self.rows != self.cols:
            raise ValueError("goe requires rows == cols")
        if self.kind == "spatially_coupled":
            if self.block_rows is None or self.block_cols is None or self.sigma is None:
                raise ValueError("spatially_coupled needs block_rows, block_cols, sigma")
            if sum(self.block_rows) != self.rows or sum(self.block_cols) != self.cols:
                raise ValueError("block sizes must sum to rows/cols")
            if any(s < 0 for row in self.sigma for s in row):
                raise ValueError("sigma grid entries must be >= 0")
        if self.kind == "correlated" and self.sigma_factor is None:
            raise ValueError("correlated needs a covariance factor")


def sample_goe(n: int, rng: np.random.Generator, scale_N: Optional[float] = None) -> np.ndarray:
    """A = G + G^T with G_ij iid N(0, 1/(2 scale)): off-diagonal variance
    1/scale, diagonal 2/scale.  Default scale is n itself."""
    scale = float(scale_N if scale_N is not None else n)
    G = normals(rng, (n, n)) / math.sqrt(2.0 * scale)
    return G + G.T


def sample_iid(rows: int, cols: int, scale_N: float, rng: np.random.Generator) -> np.ndarray:
    return normals(rng, (rows, cols)) / math.sqrt(float(scale_N))


def sample_spatially_coupled(
    block_rows: Sequence[int],
    block_cols: Sequence[int],
    sigma,
    scale_N: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Block matrix with block (i, j) iid N(0, sigma[i][j]/scale_N);
    zero sigma gives an exactly zero block."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (len(block_rows), len(block_cols)):
        raise ValueError(
            f"sigma grid shape {sigma.shape} does not match blocks "
            f"({len(block_rows)}, {len(block_cols)})"
        )
    out = np.zeros((sum(block_rows), sum(block_cols)))
    r0 = 0
    for i, nr in enumerate(block_rows):
        c0 = 0
        for j, nc in enumerate(block_cols):
            if sigma[i, j] > 0:
                out[r0 : r0 + nr, c0 : c0 + nc] = normals(rng, (nr, nc)) * math.sqrt(
                    sigma[i, j] / float(scale_N)
                )
            c0 += nc
        r0 += nr
    return out


def sample_correlated_rows(
    rows: int, sigma_factor: np.ndarray, scale_N: float, rng: np.random.Generator
) -> np.ndarray:
    """Z @ Sigma^{1/2} with Z iid N(0, 1/scale_N): row covariance Sigma/scale_N."""
    sigma_factor = np.asarray(sigma_factor, dtype=float)
    if sigma_factor.ndim != 2 or sigma_factor.shape[0] != sigma_factor.shape[1]:
        raise ValueError("covariance factor must be square")
    Z = normals(rng, (rows, sigma_factor.shape[0])) / math.sqrt(float(scale_N))
    return Z @ sigma_factor


EIG_FLOOR = 1e-12


def spectral_sqrt(Sigma: np.ndarray, require_pd: bool = True) -> np.ndarray:
    """Symmetric square root by eigendecomposition; rejects non-PD input
    (eigenvalue below EIG_FLOOR relative to the largest)."""
    Sigma = np.asarray(Sigma, dtype=float)
    Sigma = 0.5 * (Sigma + Sigma.T)
    w, V = np.linalg.eigh(Sigma)
    floor = EIG_FLOOR * max(1.0, float(w[-1]))
    if require_pd and w[0] < floor:
        raise NumericalError(f"covariance not positive definite: min eigenvalue {w[0]:.3e}")
    w = np.maximum(w, floor)
    return (V * np.sqrt(w)) @ V.T


def spectral_inv_sqrt(Sigma: np.ndarray) -> np.ndarray:
    Sigma = np.asarray(Sigma, dtype=float)
    Sigma = 0.5 * (Sigma + Sigma.T)
    w, V = np.linalg.eigh(Sigma)
    floor = EIG_FLOOR * max(1.0, float(w[-1]))
    if w[0] < floor:
        raise NumericalError(f"covariance not positive definite: min eigenvalue {w[0]:.3e}")
    return (V / np.sqrt(w)) @ V.T


def sample(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "goe":
        return sample_goe(spec.rows, rng, spec.scale_N)
    if spec.kind == "iid_gaussian":
        return sample_iid(spec.rows, spec.cols, spec.scale_N, rng)
    if spec.kind == "spatially_coupled":
        return sample_spatially_coupled(spec.block_rows, spec.block_cols, spec.sigma, spec.scale_N, rng)
    if spec.kind == "correlated":
        return sample_correlated_rows(spec.rows, spec.sigma_factor, spec.scale_N, rng)
    raise AssertionError(spec.kind)
