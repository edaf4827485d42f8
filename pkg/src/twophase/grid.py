"""Cartesian lattice over a ball, scalar fields on it, phase decomposition.

The domain is the closed ball of radius R centered at the origin, sampled on
the lattice x = h*z for integer vectors z with |x| <= R.  Membership is
decided in exact integer arithmetic (|z|^2 <= K^2 with K = R/h), so the node
set is reproducible across platforms.  Nodes whose axis neighbors all lie in
the ball are *interior*; the remaining nodes form the boundary shell where
Dirichlet data lives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError, ResolutionError

logger = logging.getLogger(__name__)

MIN_DIMENSION = 2
MAX_DIMENSION = 4  # memory guardrail; higher dimensions are out of scope


def _as_exact_int(x: float, what: str) -> int:
    k = round(x)
    if k == 0 or abs(x - k) > 1e-9 * max(1, abs(k)):
        raise ConfigurationError(f"{what} = {x!r} is not an integer")
    return int(k)


@dataclass(frozen=True)
class GridSpec:
    """Lattice over the ball of radius ``R``: nodes x = h*z, |x| <= R.

    ``coords`` holds the integer vectors z in lexicographic order; this
    enumeration is the canonical node numbering used by every field and by
    the dump format.  All arrays are read-only after construction.
    """

    n: int
    R: float
    h: float
    K: int
    coords: np.ndarray          # (N, n) int32, lexicographic
    index_map: np.ndarray       # ((2K+1)^n,) int32 flat cube -> node index or -1
    interior: np.ndarray        # (N,) bool: all 2n axis neighbors inside the ball
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def node_count(self) -> int:
        return self.coords.shape[0]

    @property
    def shell(self) -> np.ndarray:
        return ~self.interior

    @property
    def side(self) -> int:
        """Nodes per axis of the enclosing cube (2K+1)."""
        return 2 * self.K + 1

    def points(self) -> np.ndarray:
        """Physical coordinates h*z, shape (N, n)."""
        return self.coords.astype(np.float64) * self.h

    def cube_strides(self) -> np.ndarray:
        """Row-major strides of the flattened (2K+1)^n cube."""
        s = np.empty(self.n, dtype=np.int64)
        s[-1] = 1
        for a in range(self.n - 2, -1, -1):
            s[a] = s[a + 1] * self.side
        return s

    def index_of(self, z) -> int:
        """Node index of integer coordinates z, or -1 if outside the ball."""
        z = np.asarray(z, dtype=np.int64)
        if np.any(np.abs(z) > self.K):
            return -1
        flat = int(np.dot(z + self.K, self.cube_strides()))
        return int(self.index_map[flat])

    def neighbor_table(self) -> np.ndarray:
        """(N, n, 2) int32: index of z - e_a (slot 0) / z + e_a (slot 1), -1 if absent.

        Built lazily; large analysis-only grids never pay for it.
        """
        tab = self._cache.get("nbr")
        if tab is None:
            strides = self.cube_strides()
            flat = (self.coords.astype(np.int64) + self.K) @ strides
            tab = np.empty((self.node_count, self.n, 2), dtype=np.int32)
            for a in range(self.n):
                za = self.coords[:, a].astype(np.int64)
                for slot, step in ((0, -1), (1, +1)):
                    ok = np.abs(za + step) <= self.K
                    idx = np.full(self.node_count, -1, dtype=np.int32)
                    idx[ok] = self.index_map[flat[ok] + step * strides[a]]
                    tab[:, a, slot] = idx
            tab.setflags(write=False)
            self._cache["nbr"] = tab
        return tab


def build_grid(n: int, R: float, h: float) -> GridSpec:
    """Construct the lattice ball.

    Requires R/h to be an integer >= 8 (ConfigurationError / ResolutionError
    otherwise; note ResolutionError is a ConfigurationError subclass).
    """
    if not (MIN_DIMENSION <= n <= MAX_DIMENSION):
        raise ConfigurationError(f"dimension n = {n} outside supported range "
                                 f"[{MIN_DIMENSION}, {MAX_DIMENSION}]")
    if not (R > 0 and h > 0):
        raise ConfigurationError(f"R = {R} and h = {h} must be positive")
    K = _as_exact_int(R / h, "R/h")
    if K < 8:
        raise ResolutionError(f"R/h = {K} < 8: grid too coarse")
    side = 2 * K + 1
    if side ** n > 40_000_000:
        raise ConfigurationError(f"grid of {side}^{n} cube sites exceeds the memory guardrail")

    axes = np.arange(-K, K + 1, dtype=np.int32)
    mesh = np.meshgrid(*([axes] * n), indexing="ij")
    zs = np.stack([m.ravel() for m in mesh], axis=1)          # C order == lexicographic
    r2 = np.sum(zs.astype(np.int64) ** 2, axis=1)
    inside = r2 <= K * K
    coords = np.ascontiguousarray(zs[inside])

    index_map = np.full(side ** n, -1, dtype=np.int32)
    index_map[np.nonzero(inside)[0]] = np.arange(coords.shape[0], dtype=np.int32)

    # interior: |z +- e_a|^2 <= K^2 for every axis, in integer arithmetic
    z64 = coords.astype(np.int64)
    rr = np.sum(z64 ** 2, axis=1)
    interior = np.ones(coords.shape[0], dtype=bool)
    for a in range(n):
        interior &= (rr + 2 * z64[:, a] + 1) <= K * K
        interior &= (rr - 2 * z64[:, a] + 1) <= K * K

    for arr in (coords, index_map, interior):
        arr.setflags(write=False)
    return GridSpec(n=n, R=float(R), h=float(h), K=K, coords=coords,
                    index_map=index_map, interior=interior)


@dataclass(frozen=True)
class ScalarField:
    """Values of u on the lattice, aligned with the grid's node enumeration."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.node_count,):
            raise InputError(f"field has {v.shape} values for {self.grid.node_count} nodes")
        if not np.all(np.isfinite(v)):
            raise InputError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def field_from_function(grid: GridSpec, fn) -> ScalarField:
    """Sample ``fn`` (vectorized over an (N, n) array of points) on the grid."""
    return ScalarField(grid, np.asarray(fn(grid.points()), dtype=np.float64))


@dataclass(frozen=True)
class PhaseDecomposition:
    """Partition of the interior nodes by sign and interface adjacency.

    positive_set:   u > 0
    interface_band: u <= 0 with an axis neighbor (interior or shell) where u > 0
    negative_set:   the remaining u <= 0 interior nodes
    """

    positive_set: np.ndarray    # sorted node indices
    negative_set: np.ndarray
    interface_band: np.ndarray


def phase_masks(field: ScalarField):
    """Boolean masks (positive, negative, band) over all nodes; shell excluded."""
    g = field.grid
    v = field.values
    nbr = g.neighbor_table()
    pos = (v > 0) & g.interior
    nbr_vals = np.where(nbr >= 0, v[np.maximum(nbr, 0)], -np.inf)
    has_pos_nbr = np.any(nbr_vals > 0, axis=(1, 2))
    band = g.interior & (v <= 0) & has_pos_nbr
    neg = g.interior & (v <= 0) & ~has_pos_nbr
    return pos, neg, band


def phase_split(field: ScalarField) -> PhaseDecomposition:
    pos, neg, band = phase_masks(field)
    return PhaseDecomposition(
        positive_set=np.nonzero(pos)[0],
        negative_set=np.nonzero(neg)[0],
        interface_band=np.nonzero(band)[0],
    )


def sup_norm_on_ball(field: ScalarField, r: float) -> float:
    """max over nodes with |x| <= r of |u(x)|."""
    g = field.grid
    if r < g.h:
        raise ResolutionError(f"radius r = {r} below the lattice spacing h = {g.h}")
    if not (0 < r <= g.R):
        raise InputError(f"radius r = {r} outside (0, R = {g.R}]")
    # exact in integer arithmetic when r/h is close to a lattice radius
    rr = np.sum(field.grid.coords.astype(np.int64) ** 2, axis=1)
    cut = (r / g.h) ** 2 * (1 + 1e-12)
    return float(np.max(np.abs(field.values[rr <= cut])))


@dataclass(frozen=True)
class Gradient:
    vector: np.ndarray
    one_sided: bool


def gradient_at(field: ScalarField, node: int) -> Gradient:
    """Centered-difference gradient; one-sided (and flagged) where a neighbor
    is missing on the boundary shell.  Exact on affine fields at interior nodes."""
    g = field.grid
    v = field.values
    nbr = g.neighbor_table()
    vec = np.zeros(g.n)
    one_sided = False
    for a in range(g.n):
        lo, hi = int(nbr[node, a, 0]), int(nbr[node, a, 1])
        if lo >= 0 and hi >= 0:
            vec[a] = (v[hi] - v[lo]) / (2 * g.h)
        elif hi >= 0:
            vec[a] = (v[hi] - v[node]) / g.h
            one_sided = True
        elif lo >= 0:
            vec[a] = (v[node] - v[lo]) / g.h
            one_sided = True
        else:
            raise StencilError(f"node {node} has no neighbor along axis {a}")
    return Gradient(vector=vec, one_sided=one_sided)


def gradient_field(field: ScalarField):
    """Vectorized gradient at every node: (N, n) array plus one-sided mask."""
    g = field.grid
    v = field.values
    nbr = g.neighbor_table()
    vecs = np.zeros((g.node_count, g.n))
    one_sided = np.zeros(g.node_count, dtype=bool)
    for a in range(g.n):
        lo = nbr[:, a, 0]
        hi = nbr[:, a, 1]
        both = (lo >= 0) & (hi >= 0)
        vecs[both, a] = (v[hi[both]] - v[lo[both]]) / (2 * g.h)
        fw = (lo < 0) & (hi >= 0)
        vecs[fw, a] = (v[hi[fw]] - v[fw]) / g.h
        bw = (hi < 0) & (lo >= 0)
        vecs[bw, a] = (v[bw] - v[lo[bw]]) / g.h
        one_sided |= fw | bw
    return vecs, one_sided


# --- dump format ------------------------------------------------------------
#
# One header line `n=<int> R=<real> h=<real>`, then one row per node in
# lexicographic order: integer coordinates, then the value, comma-separated.

def field_to_csv(field: ScalarField, path) -> None:
    g = field.grid
    with open(path, "w") as fh:
        fh.write(f"n={g.n} R={g.R!r} h={g.h!r}\n")
        for z, val in zip(g.coords, field.values):
            fh.write(",".join(str(int(c)) for c in z) + f",{val!r}\n")


def field_from_csv(path, grid: GridSpec | None = None) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            parts = dict(kv.split("=") for kv in header.split())
            n, R, h = int(parts["n"]), float(parts["R"]), float(parts["h"])
        except (ValueError, KeyError) as exc:
            raise InputError(f"malformed grid dump header: {header!r}") from exc
        if grid is None:
            grid = build_grid(n, R, h)
        elif (grid.n, grid.R, grid.h) != (n, R, h):
            raise InputError(f"dump geometry (n={n}, R={R}, h={h}) does not match "
                             f"grid (n={grid.n}, R={grid.R}, h={grid.h})")
        coords = np.empty((grid.node_count, n), dtype=np.int32)
        values = np.empty(grid.node_count)
        for i, line in enumerate(fh):
            cells = line.strip().split(",")
            if len(cells) != n + 1:
                raise InputError(f"row {i} has {len(cells)} fields, expected {n + 1}")
            coords[i] = [int(c) for c in cells[:n]]
            values[i] = float(cells[n])
        if i + 1 != grid.node_count:
            raise InputError(f"dump has {i + 1} rows for {grid.node_count} nodes")
    if not np.array_equal(coords, grid.coords):
        raise InputError("dump node enumeration does not match the grid")
    return ScalarField(grid, values)
