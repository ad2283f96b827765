"""ForceAtlas2-style layout: linear attraction, degree-scaled 1/d repulsion.

Exact O(n^2) repulsion, no Barnes-Hut. All nodes share one global step size
per iteration (adapted from swinging/traction totals as in Gephi), so forces
that cancel pairwise also leave the centroid where it is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, DivergenceError
from .graph import Graph

MIN_SPEED_EFFICIENCY = 0.05
MAX_RISE = 0.5


@dataclass(frozen=True)
class FA2Params:
    k_repulsion: float = 1.0
    gravity: float = 0.0
    edge_weight_influence: float = 1.0
    iterations: int = 1000
    speed: float = 1.0
    tolerance: float = 1e-7
    jitter_tolerance: float = 1.0
    max_move_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.k_repulsion > 0:
            raise ConfigError("k_repulsion must be > 0")
        if self.gravity < 0:
            raise ConfigError("gravity must be >= 0")
        if self.edge_weight_influence < 0:
            raise ConfigError("edge_weight_influence must be >= 0")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not self.speed > 0 or not self.jitter_tolerance > 0:
            raise ConfigError("speed and jitter_tolerance must be > 0")
        if self.tolerance < 0 or not 0 < self.max_move_fraction <= 1:
            raise ConfigError("tolerance must be >= 0 and max_move_fraction in (0, 1]")


@dataclass(frozen=True, eq=False)
class LayoutState:
    positions: np.ndarray
    iteration: int = 0
    global_speed: float = 1.0
    speed_efficiency: float = 1.0
    last_forces: np.ndarray | None = None
    max_displacement: float | None = None
    stopped_by: str | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must have shape (n, 2)")
        if not np.isfinite(pos).all():
            raise DivergenceError("non-finite node position")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)


def init_positions(g: Graph, seed: int = 0, speed: float = 1.0) -> LayoutState:
    """Seeded uniform scatter in the unit square."""
    rng = np.random.default_rng(seed)
    return LayoutState(rng.random((g.n, 2)), 0, speed)


def _layout_diameter(pos: np.ndarray) -> float:
    if pos.shape[0] < 2:
        return 0.0
    span = pos.max(axis=0) - pos.min(axis=0)
    return math.hypot(span[0], span[1])


def fa2_step(g: Graph, st: LayoutState, params: FA2Params = FA2Params(),
             backend: str | None = None) -> LayoutState:
    kern = _kernels.get(backend)
    pos = np.ascontiguousarray(st.positions)
    n = g.n
    if n == 0:
        return replace(st, iteration=st.iteration + 1, max_displacement=0.0)
    mass = (g.degree + 1).astype(np.float64)
    attraction = np.ascontiguousarray(g.weight ** params.edge_weight_influence)
    forces, bad_i, bad_j = kern.fa2_forces(pos, mass, g.src, g.dst, attraction,
                                           float(params.k_repulsion), float(params.gravity),
                                           int(params.seed))
    if bad_i >= 0:
        where = f"node {bad_i}" if bad_i == bad_j else f"nodes {bad_i} and {bad_j}"
        raise DivergenceError(f"non-finite force between {where} at iteration {st.iteration}",
                              (int(bad_i), int(bad_j)))

    prev = forces if st.last_forces is None else st.last_forces
    swinging = float(np.sum(mass * np.hypot(*(forces - prev).T)))
    traction = float(np.sum(mass * np.hypot(*(forces + prev).T))) / 2.0

    speed, efficiency = st.global_speed, st.speed_efficiency
    if traction > 0.0:
        estimated = 0.05 * math.sqrt(n)
        jitter = params.jitter_tolerance * max(math.sqrt(estimated),
                                               min(10.0, estimated * traction / (n * n)))
        if swinging / traction > 2.0:
            if efficiency > MIN_SPEED_EFFICIENCY:
                efficiency *= 0.5
            jitter = max(jitter, params.jitter_tolerance)
        target = math.inf if swinging == 0.0 else jitter * efficiency * traction / swinging
        if swinging > jitter * traction:
            if efficiency > MIN_SPEED_EFFICIENCY:
                efficiency *= 0.7
        elif speed < 1000:
            efficiency *= 1.3
        speed = speed + min(target - speed, MAX_RISE * speed)

    step = speed * forces
    lengths = np.hypot(step[:, 0], step[:, 1])
    biggest = float(lengths.max())
    cap = params.max_move_fraction * max(_layout_diameter(pos), 1e-6)
    if biggest > cap:
        step *= cap / biggest
        biggest = cap
    new = pos + step
    if not np.isfinite(new).all():
        i = int(np.argwhere(~np.isfinite(new))[0, 0])
        raise DivergenceError(f"node {i} left the finite plane at iteration {st.iteration}", (i, i))
    return LayoutState(new, st.iteration + 1, speed, efficiency, forces, biggest)


def fa2_run(g: Graph, params: FA2Params = FA2Params(), state: LayoutState | None = None,
            backend: str | None = None) -> LayoutState:
    """Iterate until the largest node displacement drops below ``params.tolerance``
    or ``params.iterations`` steps have run. ``stopped_by`` names which fired."""
    st = state if state is not None else init_positions(g, params.seed, params.speed)
    if params.iterations == 0:
        return replace(st, stopped_by="iterations")
    for _ in range(params.iterations):
        st = fa2_step(g, st, params, backend)
        if st.max_displacement is not None and st.max_displacement < params.tolerance:
            return replace(st, stopped_by="converged")
    return replace(st, stopped_by="iterations")


def write_positions_csv(st: LayoutState, entity_ids, stream) -> None:
    stream.write("entity_id,x,y\n")
    for eid, (x, y) in zip(entity_ids, st.positions.tolist()):
        stream.write(f"{eid},{x!r},{y!r}\n")
