"""Velocity schemes, grid geometry, flat indexing and the streaming permutation.

Populations are stored as one flat vector over fluid nodes only. Nodes are
ordered row-major over their coordinates and each node holds its ``Q``
directions contiguously, so ``f.reshape(n_fluid, Q)`` gives a per-node view.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, GeometryError

PERIODIC = "periodic"
BOUNCE_BACK = "bounce-back"
WALL_RULES = (PERIODIC, BOUNCE_BACK)


@dataclass(frozen=True)
class VelocityScheme:
    """A DdQq lattice: integer directions ``e``, weights ``w`` and ``opp``."""

    name: str
    e: np.ndarray
    w: np.ndarray
    opp: np.ndarray

    @property
    def Q(self) -> int:
        return len(self.w)

    @property
    def dim(self) -> int:
        return self.e.shape[1]

    def __post_init__(self):
        for arr in (self.e, self.w, self.opp):
            arr.setflags(write=False)


_SCHEMES = {
    # rest, +x, -x
    "D1Q3": (
        [[0], [1], [-1]],
        [2 / 3, 1 / 6, 1 / 6],
    ),
    # rest; +x, +y, -x, -y; +x+y, -x+y, -x-y, +x-y
    "D2Q9": (
        [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]],
        [4 / 9] + [1 / 9] * 4 + [1 / 36] * 4,
    ),
}


def build_scheme(name: str) -> VelocityScheme:
    key = name.upper()
    if key not in _SCHEMES:
        raise ConfigurationError(f"unknown velocity scheme {name!r}; expected one of {sorted(_SCHEMES)}")
    dirs, weights = _SCHEMES[key]
    e = np.array(dirs, dtype=np.int64)
    w = np.array(weights, dtype=np.float64)
    opp = np.array([int(np.flatnonzero((e == -row).all(axis=1))[0]) for row in e], dtype=np.int64)
    return VelocityScheme(key, e, w, opp)


@dataclass(frozen=True)
class Grid:
    """Rectangular node grid with solid obstacle nodes and a wall rule per axis."""

    dims: tuple[int, ...]
    solid: np.ndarray  # bool mask with shape ``dims``
    wall_rules: tuple[str, ...]

    @property
    def fluid(self) -> np.ndarray:
        return ~self.solid

    @property
    def n_fluid(self) -> int:
        return int(self.fluid.sum())

    @property
    def n_solid(self) -> int:
        return int(self.solid.sum())

    def is_solid(self, coord: Sequence[int]) -> bool:
        return bool(self.solid[tuple(coord)])


def build_grid(
    dims: Sequence[int],
    solids: Iterable[Sequence[int]] = (),
    wall_rules: Sequence[str] | str = PERIODIC,
) -> Grid:
    """Build a :class:`Grid`.

    ``wall_rules`` is either one rule for every axis or one rule per axis,
    each ``"periodic"`` or ``"bounce-back"``.
    """
    dims = tuple(int(d) for d in dims)
    if not dims or any(d <= 0 for d in dims):
        raise GeometryError(f"grid dimensions must be positive, got {dims}")
    if isinstance(wall_rules, str):
        wall_rules = (wall_rules,) * len(dims)
    wall_rules = tuple(wall_rules)
    if len(wall_rules) != len(dims):
        raise GeometryError(f"need {len(dims)} wall rules, got {len(wall_rules)}")
    for rule in wall_rules:
        if rule not in WALL_RULES:
            raise GeometryError(f"unknown wall rule {rule!r}; expected one of {WALL_RULES}")

    solid = np.zeros(dims, dtype=bool)
    for s in solids:
        s = tuple(int(c) for c in np.atleast_1d(s))
        if len(s) != len(dims) or any(not 0 <= c < d for c, d in zip(s, dims)):
            raise GeometryError(f"solid node {s} lies outside grid {dims}")
        solid[s] = True
    if solid.all():
        raise GeometryError("grid has no fluid nodes")
    solid.setflags(write=False)
    return Grid(dims, solid, wall_rules)


@dataclass(frozen=True)
class IndexMap:
    """Bijection between (fluid node, direction) pairs and flat indices."""

    dims: tuple[int, ...]
    Q: int
    coords: np.ndarray  # (n_fluid, dim) coordinates of fluid nodes in storage order
    node_of_cell: np.ndarray = field(repr=False)  # grid-shaped; -1 on solid nodes

    @property
    def n_fluid(self) -> int:
        return len(self.coords)

    @property
    def N(self) -> int:
        return self.n_fluid * self.Q

    def node(self, coord: Sequence[int]) -> int:
        n = int(self.node_of_cell[tuple(coord)])
        if n < 0:
            raise KeyError(f"{tuple(coord)} is not a fluid node")
        return n

    def forward(self, coord: Sequence[int], direction: int) -> int:
        if not 0 <= direction < self.Q:
            raise KeyError(f"direction {direction} out of range")
        return self.node(coord) * self.Q + int(direction)

    def inverse(self, k: int) -> tuple[tuple[int, ...], int]:
        if not 0 <= k < self.N:
            raise KeyError(f"flat index {k} out of range")
        n, i = divmod(int(k), self.Q)
        return tuple(int(c) for c in self.coords[n]), i


def build_index_map(grid: Grid, scheme: VelocityScheme) -> IndexMap:
    if len(grid.dims) != scheme.dim:
        raise GeometryError(f"{scheme.name} needs a {scheme.dim}-d grid, got dims {grid.dims}")
    coords = np.argwhere(grid.fluid)  # row-major order
    node_of_cell = np.full(grid.dims, -1, dtype=np.int64)
    node_of_cell[tuple(coords.T)] = np.arange(len(coords))
    coords.setflags(write=False)
    node_of_cell.setflags(write=False)
    return IndexMap(grid.dims, scheme.Q, coords, node_of_cell)


@dataclass(frozen=True)
class StreamingPermutation:
    """Gather form of one streaming step: ``f_new[k] = f[src[k]]``."""

    src: np.ndarray
    bounced: np.ndarray  # True where the population was reflected at a solid link

    @property
    def N(self) -> int:
        return len(self.src)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return f[self.src]

    def matrix(self):
        import scipy.sparse as sp

        N = self.N
        return sp.csr_matrix((np.ones(N), (np.arange(N), self.src)), shape=(N, N))


def _upstream(coord: np.ndarray, e: np.ndarray, grid: Grid) -> np.ndarray | None:
    """Node a population moving along ``e`` came from, or None at a bounce-back wall."""
    up = coord - e
    for axis, (c, d) in enumerate(zip(up, grid.dims)):
        if 0 <= c < d:
            continue
        if grid.wall_rules[axis] == PERIODIC:
            up[axis] = c % d
        else:
            return None
    return up


def build_streaming_permutation(grid: Grid, scheme: VelocityScheme, index: IndexMap) -> StreamingPermutation:
    """Resolve every population's source before streaming.

    Interior links gather from ``x - e_i``; periodic links wrap; links whose
    upstream node is solid, or lies beyond a bounce-back wall, gather the
    opposite population at the same node (full-way bounce-back).
    """
    Q = scheme.Q
    src = np.empty(index.N, dtype=np.int64)
    bounced = np.zeros(index.N, dtype=bool)
    for n, coord in enumerate(index.coords):
        for i in range(Q):
            k = n * Q + i
            up = _upstream(coord.copy(), scheme.e[i], grid)
            if up is None or grid.solid[tuple(up)]:
                src[k] = n * Q + scheme.opp[i]
                bounced[k] = True
            else:
                src[k] = index.node_of_cell[tuple(up)] * Q + i
    if not np.array_equal(np.sort(src), np.arange(index.N)):
        raise RuntimeError("streaming map is not a bijection")
    src.setflags(write=False)
    bounced.setflags(write=False)
    return StreamingPermutation(src, bounced)


@dataclass(frozen=True)
class Lattice:
    """Scheme, grid, index map and streaming permutation bundled together."""

    scheme: VelocityScheme
    grid: Grid
    index: IndexMap
    stream: StreamingPermutation

    @property
    def N(self) -> int:
        return self.index.N

    @property
    def Q(self) -> int:
        return self.scheme.Q

    @property
    def n_fluid(self) -> int:
        return self.index.n_fluid


def make_lattice(scheme: str | VelocityScheme, dims, solids=(), wall_rules=PERIODIC) -> Lattice:
    if isinstance(scheme, str):
        scheme = build_scheme(scheme)
    grid = build_grid(dims, solids, wall_rules)
    index = build_index_map(grid, scheme)
    return Lattice(scheme, grid, index, build_streaming_permutation(grid, scheme, index))
