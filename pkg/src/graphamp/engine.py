"""Message-passing iteration on a symmetric directed graph.

Each directed edge e = (v, w) carries an iterate x_e with n_w rows and
q_e columns.  One step computes, for every edge,

    m^t_e = f^t_e((x^t_{e'})_{e' -> e})          (inputs: edges ending at v)
    b^t_e = J_e / S_e,  J_e = sum_i d f^t_{e,i} / d x^t_{e<-,i}
    x^{t+1}_e = A_e m^t_e - m^{t-1}_{e<-} (b^t_e)^T

where e<- is the reversed edge and S_e is the edge's variance base
(the scale_N of its matrix ensemble; defaults to the global N).  The
t = 0 update has no correction term (m^{-1} = 0).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import GraphError, NumericalError, ShapeError
from .graphs import EdgeId, GraphSpec, canonical_edge_order, edges_into, require_valid, reversed_input_index
from .nonlinearity import Nonlinearity, SideData

Provider = Callable[[EdgeId, int, "AmpTrajectory"], Nonlinearity]


def stationary_provider(fns: Mapping[EdgeId, Nonlinearity]) -> Provider:
    """Provider for time-independent update functions."""
    table = dict(fns)

    def provider(edge, t, traj):
        return table[edge]

    return provider


@dataclass
class GraphInstance:
    """A concrete iteration: graph, one matrix per edge pair, update
    functions, and initial iterates.

    matrices holds one array per unordered pair, keyed by a single
    direction; the reversed direction is served as the transpose.  Loop
    matrices must be symmetric.  scale_base[e] is the ensemble variance
    base of A_e (entries ~ 1/S_e); both directions of a pair share it.
    """

    graph: GraphSpec
    matrices: Dict[EdgeId, np.ndarray]
    provider: Provider
    x0: Dict[EdgeId, np.ndarray] = field(default_factory=dict)
    side: Dict[EdgeId, SideData] = field(default_factory=dict)
    scale_base: Dict[EdgeId, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        require_valid(self.graph)
        seen = set()
        for e in self.graph.edges:
            if e in self.matrices:
                key = e
            elif e.reversed() in self.matrices:
                key = e.reversed()
            else:
                raise GraphError(f"no matrix for edge {e}")
            seen.add(key)
            A = np.asarray(self.matrices[key])
            want = (self.graph.node_dim[key.end], self.graph.node_dim[key.start])
            if A.shape != want:
                raise ShapeError(f"matrix for {key} has shape {A.shape}, expected {want}")
            if key.is_loop() and not np.allclose(A, A.T):
                raise ShapeError(f"loop matrix at {key.start} must be symmetric")
        extra = set(self.matrices) - seen
        if extra:
            raise GraphError(f"matrices for unknown edges: {sorted(str(e) for e in extra)}")

    def matrix(self, e: EdgeId) -> np.ndarray:
        """A_e, with A_{(w,v)} = A_{(v,w)}^T served by transposition."""
        if e in self.matrices:
            return np.asarray(self.matrices[e])
        return np.asarray(self.matrices[e.reversed()]).T

    def scale(self, e: EdgeId) -> float:
        if e in self.scale_base:
            return float(self.scale_base[e])
        if e.reversed() in self.scale_base:
            return float(self.scale_base[e.reversed()])
        return float(self.graph.N)

    def side_data(self, e: EdgeId) -> Optional[SideData]:
        return self.side.get(e)


@dataclass
class AmpTrajectory:
    """Per-edge history of iterates x^0..x^T, outputs m^0..m^{T-1}, and
    correction coefficients b^0..b^{T-1} (q_e x q_{e<-} each)."""

    graph: GraphSpec
    x: Dict[EdgeId, List[np.ndarray]]
    m: Dict[EdgeId, List[np.ndarray]]
    b: Dict[EdgeId, List[np.ndarray]]

    @property
    def T(self) -> int:
        e = next(iter(self.x))
        return len(self.x[e]) - 1

    def last_x(self, e: EdgeId) -> np.ndarray:
        return self.x[e][-1]


def init(instance: GraphInstance, allow_degenerate: bool = False) -> AmpTrajectory:
    """Trajectory holding x^0 (zeros where not supplied)."""
    g = instance.graph
    xs: Dict[EdgeId, List[np.ndarray]] = {}
    any_nonzero = False
    for e in canonical_edge_order(g):
        if e in instance.x0:
            v = np.asarray(instance.x0[e], dtype=float)
            if v.shape != g.x_shape(e):
                raise ShapeError(f"x0 for {e} has shape {v.shape}, expected {g.x_shape(e)}")
        else:
            v = np.zeros(g.x_shape(e))
        if np.any(v != 0.0):
            any_nonzero = True
        xs[e] = [v]
    if not any_nonzero and not allow_degenerate:
        warnings.warn(
            "all edges initialized at zero; odd update functions will keep the "
            "iteration at the all-zero fixed point (pass allow_degenerate=True "
            "to silence)",
            stacklevel=2,
        )
    return AmpTrajectory(graph=g, x=xs, m={e: [] for e in xs}, b={e: [] for e in xs})


def _gather_inputs(traj: AmpTrajectory, g: GraphSpec, e: EdgeId, t: int) -> List[np.ndarray]:
    return [traj.x[ein][t] for ein in edges_into(g, e)]


def onsager(instance: GraphInstance, e: EdgeId, t: int, traj: AmpTrajectory,
            f: Optional[Nonlinearity] = None) -> np.ndarray:
    """Correction coefficient b^t_e = J_e / S_e where J_e sums the rowwise
    Jacobian of f^t_e with respect to the reversed input edge."""
    g = instance.graph
    if f is None:
        f = instance.provider(e, t, traj)
    inputs = _gather_inputs(traj, g, e, t)
    wrt = reversed_input_index(g, e)
    J = f.jacobian_trace(inputs, side=instance.side_data(e), wrt=wrt)
    J = np.atleast_2d(np.asarray(J, dtype=float))
    want = (g.q(e), g.q(e.reversed()))
    if J.shape != want:
        raise ShapeError(f"jacobian trace for {e} has shape {J.shape}, expected {want}")
    return J / instance.scale(e)


def step(instance: GraphInstance, traj: AmpTrajectory) -> AmpTrajectory:
    """Advance every edge by one iteration (in place; returns traj)."""
    g = instance.graph
    t = traj.T
    order = canonical_edge_order(g)
    ms: Dict[EdgeId, np.ndarray] = {}
    bs: Dict[EdgeId, np.ndarray] = {}
    for e in order:
        f = instance.provider(e, t, traj)
        inputs = _gather_inputs(traj, g, e, t)
        m = np.asarray(f.apply(inputs, side=instance.side_data(e)), dtype=float)
        if m.shape != g.m_shape(e):
            raise ShapeError(f"f for {e} returned shape {m.shape}, expected {g.m_shape(e)}")
        if not np.all(np.isfinite(m)):
            raise NumericalError("update function produced non-finite values", edge=str(e), t=t)
        ms[e] = m
        bs[e] = onsager(instance, e, t, traj, f=f)
    for e in order:
        # overflow surfaces through the isfinite guard, not a warning
        with np.errstate(over="ignore", invalid="ignore"):
            x_new = instance.matrix(e) @ ms[e]
            if t >= 1:
                x_new = x_new - traj.m[e.reversed()][t - 1] @ bs[e].T
        if not np.all(np.isfinite(x_new)):
            raise NumericalError("iterate diverged (non-finite values)", edge=str(e), t=t + 1)
        traj.x[e].append(x_new)
        traj.m[e].append(ms[e])
        traj.b[e].append(bs[e])
    return traj


def run(instance: GraphInstance, T: int, allow_degenerate: bool = False) -> AmpTrajectory:
    """Run T steps from x^0, returning the full trajectory."""
    traj = init(instance, allow_degenerate=allow_degenerate)
    for _ in range(T):
        step(instance, traj)
    return traj


@dataclass(frozen=True)
class Observable:
    """Scalar functional of the iterate family at a fixed time.

    fn receives ({edge: x^t_e}, t); the same callable is evaluated on
    iterates and on Gaussian families sampled from the limit covariance,
    so it must not read anything but its arguments and captured
    constants (e.g. a planted signal).
    """

    name: str
    fn: Callable[[Mapping[EdgeId, np.ndarray], int], float]

    def __call__(self, xs: Mapping[EdgeId, np.ndarray], t: int) -> float:
        return float(self.fn(xs, t))


def norm_sq_observable(e: EdgeId, scale: float = 1.0, name: Optional[str] = None) -> Observable:
    """(scale) * ||x_e||_F^2."""
    label = name or f"norm_sq[{e}]"
    return Observable(label, lambda xs, t, _e=e, _s=scale: _s * float(np.sum(xs[_e] ** 2)))


def overlap_observable(e: EdgeId, ref: np.ndarray, scale: float = 1.0,
                       name: Optional[str] = None) -> Observable:
    """(scale) * <ref, x_e> for a fixed reference vector/matrix."""
    r = np.asarray(ref, dtype=float)
    label = name or f"overlap[{e}]"
    return Observable(label, lambda xs, t, _e=e, _s=scale, _r=r: _s * float(np.sum(_r * xs[_e])))


def observe(traj: AmpTrajectory, observables: Sequence[Observable],
            times: Optional[Sequence[int]] = None) -> List[dict]:
    """Evaluate observables along the trajectory; one record per (t, name)."""
    ts = list(times) if times is not None else list(range(traj.T + 1))
    records = []
    for t in ts:
        xs = {e: traj.x[e][t] for e in traj.x}
        for obs in observables:
            records.append({"t": t, "observable": obs.name, "value": obs(xs, t)})
    return records


@dataclass
class HalfIterates:
    """Two-phase view of a two-node chain trajectory.

    v[k] = x^{2k} on the forward edge (the variable-side field) and
    u[k] = x^{2k-1} on the reversed edge (the observation-side field,
    defined for k >= 1; u[0] is None).  Off-phase iterates are zero by
    construction when the off-phase update functions are Zero.
    """

    v: List[np.ndarray]
    u: List[Optional[np.ndarray]]


def reindex_half_iterates(traj: AmpTrajectory, forward_edge: EdgeId) -> HalfIterates:
    back = forward_edge.reversed()
    if forward_edge not in traj.x or back not in traj.x:
        raise GraphError(f"trajectory has no edge {forward_edge}")
    T = traj.T
    v = [traj.x[forward_edge][2 * k] for k in range(T // 2 + 1)]
    u: List[Optional[np.ndarray]] = [None]
    for k in range(1, (T + 1) // 2 + 1):
        u.append(traj.x[back][2 * k - 1])
    return HalfIterates(v=v, u=u)
