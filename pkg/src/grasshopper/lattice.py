"""Discrete grasshopper lawns on a cubic lattice.

A lawn is a set of ``M`` occupied cells of edge ``h = M**(-1/N)``. Its
probability is a pair sum over occupied cells of a smoothed delta
function of the distance minus the jump length (the cosine kernel of
Peskin, support ``|x| <= 2h``), normalized so that the sum tends to the
continuum probability as ``h -> 0``.

The grid is padded by a margin of permanently empty cells at least as wide
as the kernel reach, so kernel lookups from any allowed cell stay inside
the array.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .analytic import ProblemSpec, sphere_area, unit_ball_radius
from .errors import ConfigurationError

__all__ = [
    "Lattice",
    "SpinConfiguration",
    "InteractionKernel",
    "peskin",
    "build_kernel",
    "total_probability",
    "move_delta",
    "init_shape",
    "brute_force_probability",
    "dump_configuration",
    "load_configuration",
]


def peskin(x):
    """Smoothed unit-mass delta on [-2, 2]: ``(1 + cos(pi x / 2)) / 4``."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) <= 2.0
    return np.where(inside, 0.25 * (1.0 + np.cos(0.5 * np.pi * np.where(inside, x, 0.0))), 0.0)


def cell_size_for(M, N):
    return float(M) ** (-1.0 / N)


def kernel_reach(d, h):
    """Largest per-axis offset (in cells) the kernel can reach."""
    return int(math.floor((d + 2 * h) / h))


@dataclass(frozen=True)
class Lattice:
    """Padded N-dimensional grid.

    ``origin`` is the position of the centre of cell ``(0, ..., 0)``.
    Cells with every index in ``[margin, extent - margin)`` form the
    allowed region; all other cells stay empty.
    """

    dimension: int
    cell_size: float
    extents: tuple
    margin: int
    origin: tuple

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ConfigurationError("lattice dimension must be 2 or 3")
        if not self.cell_size > 0:
            raise ConfigurationError("cell size must be positive")
        if len(self.extents) != self.dimension or len(self.origin) != self.dimension:
            raise ConfigurationError("extents and origin need one entry per axis")
        if any(e <= 2 * self.margin for e in self.extents):
            raise ConfigurationError("extents leave no allowed region inside the margin")
        object.__setattr__(self, "extents", tuple(int(e) for e in self.extents))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def for_problem(cls, N, d, M, room=1.0):
        """Grid centred on the origin for M cells at jump length d.

        The allowed region is a cube of half-width ``room * R0N`` (plus one
        cell); the margin equals the kernel reach.
        """
        h = cell_size_for(M, N)
        if room < 1.0:
            raise ConfigurationError("room must be >= 1 so that a unit-volume ball fits")
        margin = kernel_reach(d, h) + 1
        half = int(math.ceil(room * unit_ball_radius(N) / h)) + 1
        side = 2 * (half + margin) + 1
        origin = (-(half + margin) * h,) * N
        return cls(N, h, (side,) * N, margin, origin)

    @property
    def size(self):
        return int(np.prod(self.extents))

    @property
    def strides(self):
        s = np.ones(self.dimension, dtype=np.int64)
        for ax in range(self.dimension - 2, -1, -1):
            s[ax] = s[ax + 1] * self.extents[ax + 1]
        return s

    def flat(self, multi):
        multi = np.asarray(multi, dtype=np.int64)
        return multi @ self.strides

    def unflat(self, flat):
        return np.stack(np.unravel_index(np.asarray(flat, dtype=np.int64), self.extents), axis=-1)

    def positions(self, flat):
        return np.asarray(self.origin) + self.cell_size * self.unflat(flat)

    def allowed_mask(self):
        mask = np.zeros(self.extents, dtype=np.uint8)
        inner = tuple(slice(self.margin, e - self.margin) for e in self.extents)
        mask[inner] = 1
        return mask.ravel()

    def centre_cell(self):
        """Cell nearest the centre of the allowed region."""
        return tuple(e // 2 for e in self.extents)

    def to_json(self):
        return {
            "dimension": self.dimension,
            "h": self.cell_size,
            "extents": list(self.extents),
            "margin": self.margin,
            "origin": list(self.origin),
        }


class SpinConfiguration:
    """Occupied cells of a lattice.

    Holds a dense occupancy grid (O(1) membership), the list of occupied
    flat indices (O(1) uniform sampling) and the inverse map from cell to
    list slot. The number of occupied cells never changes.
    """

    def __init__(self, lattice, cells, check_normalization=True):
        self.lattice = lattice
        cells = np.asarray(cells, dtype=np.int64).ravel()
        if np.unique(cells).size != cells.size:
            raise ConfigurationError("duplicate occupied cells")
        allowed = lattice.allowed_mask()
        if cells.size and (cells.min() < 0 or cells.max() >= lattice.size or not np.all(allowed[cells])):
            raise ConfigurationError("occupied cells must lie inside the allowed region")
        if check_normalization:
            h, N = lattice.cell_size, lattice.dimension
            if abs(cells.size * h ** N - 1.0) > h ** N * (1 + 1e-9):
                raise ConfigurationError(
                    f"M h^N = {cells.size * h ** N!r} is not 1 within one cell volume"
                )
        self.grid = np.zeros(lattice.size, dtype=np.uint8)
        self.grid[cells] = 1
        self.cells = cells.copy()
        self.where = np.full(lattice.size, -1, dtype=np.int64)
        self.where[cells] = np.arange(cells.size)
        self.allowed = allowed

    @property
    def occupied_count(self):
        return int(self.cells.size)

    M = occupied_count

    def sorted_cells(self):
        return np.sort(self.cells)

    def multi_indices(self):
        return self.lattice.unflat(self.sorted_cells())

    def positions(self):
        return self.lattice.positions(self.sorted_cells())

    def centroid(self):
        return self.positions().mean(axis=0)

    def occupied(self, cell):
        return bool(self.grid[cell])

    def copy(self):
        new = SpinConfiguration.__new__(SpinConfiguration)
        new.lattice = self.lattice
        new.grid = self.grid.copy()
        new.cells = self.cells.copy()
        new.where = self.where.copy()
        new.allowed = self.allowed
        return new

    def set_cells(self, cells):
        """Replace the occupied set in place (same count)."""
        cells = np.asarray(cells, dtype=np.int64)
        if cells.size != self.cells.size:
            raise ConfigurationError("occupied count is conserved")
        self.grid[self.cells] = 0
        self.where[self.cells] = -1
        self.grid[cells] = 1
        self.cells = cells.copy()
        self.where[cells] = np.arange(cells.size)

    def apply_move(self, src, dst):
        if not self.grid[src]:
            raise ConfigurationError(f"source cell {src} is not occupied")
        if self.grid[dst]:
            raise ConfigurationError(f"target cell {dst} is not empty")
        if not self.allowed[dst]:
            raise ConfigurationError(f"target cell {dst} lies in the margin")
        slot = self.where[src]
        self.grid[src] = 0
        self.grid[dst] = 1
        self.cells[slot] = dst
        self.where[dst] = slot
        self.where[src] = -1

    def shifted(self, vector):
        """Copy translated by an integer lattice vector."""
        multi = self.lattice.unflat(self.cells) + np.asarray(vector, dtype=np.int64)
        lo = self.lattice.margin
        hi = np.asarray(self.lattice.extents) - self.lattice.margin
        if np.any(multi < lo) or np.any(multi >= hi):
            raise ConfigurationError("translation leaves the allowed region")
        return SpinConfiguration(self.lattice, self.lattice.flat(multi), check_normalization=False)

    def recentre(self):
        """Translate in place so the centroid sits near the centre cell; returns the shift."""
        multi = self.lattice.unflat(self.cells)
        shift = np.rint(np.asarray(self.lattice.centre_cell()) - multi.mean(axis=0)).astype(np.int64)
        lo = self.lattice.margin - multi.min(axis=0)
        hi = np.asarray(self.lattice.extents) - self.lattice.margin - 1 - multi.max(axis=0)
        shift = np.clip(shift, lo, hi)
        if np.any(shift):
            self.set_cells(self.lattice.flat(multi + shift))
        return shift


@dataclass(frozen=True)
class InteractionKernel:
    """Integer offsets in the shell ``|r - d| < 2h`` with their pair weights.

    ``weights`` already carry the normalization ``1 / (S(N, d) M^2 h)``;
    ``scale`` is that normalization alone and ``raw`` the bare kernel
    values, so ``weights == scale * raw``.
    """

    dimension: int
    jump: float
    cell_size: float
    M: int
    offsets: np.ndarray
    raw: np.ndarray
    scale: float
    flat_offsets: np.ndarray
    dense: np.ndarray
    reach: int
    strides: np.ndarray

    @property
    def weights(self):
        return self.scale * self.raw

    @property
    def size(self):
        return int(self.raw.size)

    def weight(self, delta):
        """Weight of a single integer displacement vector."""
        delta = np.asarray(delta, dtype=np.int64)
        if np.any(np.abs(delta) > self.reach):
            return 0.0
        side = 2 * self.reach + 1
        key = 0
        for v in delta:
            key = key * side + int(v) + self.reach
        return self.scale * float(self.dense[key])


def build_kernel(lattice, spec, M):
    """Enumerate the annulus of offsets for a jump length and M spins.

    ``spec`` is a :class:`ProblemSpec` or a bare jump length.
    """
    if isinstance(spec, ProblemSpec):
        if spec.dimension != lattice.dimension:
            raise ConfigurationError("problem and lattice dimensions differ")
        d = spec.jump
    else:
        d = float(spec)
    N, h = lattice.dimension, lattice.cell_size
    if not h < d / 2:
        raise ConfigurationError(f"need h < d/2 so the kernel has no self-interaction (h={h!r}, d={d!r})")
    reach = kernel_reach(d, h)
    if lattice.margin < reach:
        raise ConfigurationError(f"lattice margin {lattice.margin} is smaller than the kernel reach {reach}")
    span = np.arange(-reach, reach + 1)
    grids = np.meshgrid(*([span] * N), indexing="ij")
    delta = np.stack([g.ravel() for g in grids], axis=1)
    dist = np.sqrt((delta.astype(float) ** 2).sum(axis=1)) * h
    x = (dist - d) / h
    raw_all = peskin(x)
    keep = np.abs(x) < 2.0
    raw_all[~keep] = 0.0
    offsets = delta[keep]
    raw = raw_all[keep]
    scale = 1.0 / (sphere_area(N, d) * float(M) ** 2 * h)
    for arr in (offsets, raw, raw_all):
        arr.setflags(write=False)
    return InteractionKernel(
        dimension=N,
        jump=float(d),
        cell_size=h,
        M=int(M),
        offsets=offsets,
        raw=raw,
        scale=scale,
        flat_offsets=np.ascontiguousarray(offsets @ lattice.strides),
        dense=raw_all,
        reach=reach,
        strides=lattice.strides,
    )


def _check_pair(config, kernel):
    lat = config.lattice
    if (
        kernel.dimension != lat.dimension
        or kernel.cell_size != lat.cell_size
        or kernel.M != config.occupied_count
        or not np.array_equal(kernel.strides, lat.strides)
    ):
        raise ConfigurationError("kernel and configuration were built for different (N, h, M, lattice)")


def total_probability(config, kernel):
    """Discrete probability: normalized kernel sum over ordered occupied pairs."""
    _check_pair(config, kernel)
    raw_sum = _kernels.total_pair_sum(config.grid, config.sorted_cells(), kernel.flat_offsets, kernel.raw)
    return kernel.scale * raw_sum


def move_delta(config, kernel, src, dst):
    """Probability change if the occupied cell ``src`` moves to the empty cell ``dst``."""
    _check_pair(config, kernel)
    if not config.grid[src]:
        raise ConfigurationError(f"source cell {src} is not occupied")
    if config.grid[dst]:
        raise ConfigurationError(f"target cell {dst} is occupied")
    if not config.allowed[dst]:
        raise ConfigurationError(f"target cell {dst} lies in the margin")
    raw = _kernels.move_delta(
        config.grid, int(src), int(dst), kernel.flat_offsets, kernel.raw, kernel.strides, kernel.reach, kernel.dense
    )
    return kernel.scale * raw


def brute_force_probability(config, d):
    """O(M^2) double loop with direct kernel evaluation; for small M only."""
    pos = config.positions()
    h = config.lattice.cell_size
    M = config.occupied_count
    N = config.lattice.dimension
    total = 0.0
    for i in range(M):
        r = np.sqrt(((pos - pos[i]) ** 2).sum(axis=1))
        x = (r - d) / h
        x[i] = np.inf
        total += float(peskin(x).sum())
    return total / (sphere_area(N, d) * M * M * h)


# --- shapes -----------------------------------------------------------------

def _rank_truncate(lattice, M, signed_distance):
    allowed = np.flatnonzero(lattice.allowed_mask())
    pos = lattice.positions(allowed)
    sd = signed_distance(pos)
    order = np.lexsort((allowed, sd))
    if M > order.size:
        raise ConfigurationError("shape does not fit in the lattice")
    chosen = allowed[order[:M]]
    # the truncation level must stay clear of the allowed-region boundary
    level = sd[order[M - 1]]
    border = _border_cells(lattice)
    if np.any(signed_distance(lattice.positions(border)) <= level):
        raise ConfigurationError("shape does not fit in the lattice with its margin")
    return chosen


def _border_cells(lattice):
    mask = lattice.allowed_mask().reshape(lattice.extents).astype(bool)
    inner = np.zeros_like(mask)
    core = tuple(slice(lattice.margin + 1, e - lattice.margin - 1) for e in lattice.extents)
    inner[core] = True
    return np.flatnonzero((mask & ~inner).ravel())


def init_shape(lattice, M, shape, **params):
    """Rasterize a unit-volume shape to exactly M cells.

    ``shape`` is one of ``"ball"``, ``"shell"`` (``rho``), ``"cog"``
    (``n``, ``eps``; 2D only) or ``"random_blob"`` (``seed``). Cells are
    ranked by signed distance to the shape (ties by flat index) and the
    first M kept, which makes the rasterization exact in volume and
    reproducible.
    """
    N = lattice.dimension
    R0 = unit_ball_radius(N)
    if shape == "ball":
        def sd(p):
            return np.sqrt((p ** 2).sum(axis=1)) - R0
    elif shape == "shell":
        if N != 3:
            raise ConfigurationError("shell shapes are three-dimensional")
        rho = float(params["rho"])
        outer = (rho ** 3 + R0 ** 3) ** (1 / 3)

        def sd(p):
            r = np.sqrt((p ** 2).sum(axis=1))
            return np.maximum(rho - r, r - outer)
    elif shape == "cog":
        if N != 2:
            raise ConfigurationError("cog shapes are two-dimensional")
        n, eps = int(params["n"]), float(params["eps"])
        base = math.sqrt(R0 * R0 - 0.5 * eps * eps)

        def sd(p):
            r = np.hypot(p[:, 0], p[:, 1])
            return r - (base + eps * np.cos(n * np.arctan2(p[:, 1], p[:, 0])))
    elif shape == "random_blob":
        seed = int(params.get("seed", 0))
        density = float(params.get("density", 0.5))
        rng = np.random.default_rng(seed)
        allowed = np.flatnonzero(lattice.allowed_mask())
        r = np.sqrt((lattice.positions(allowed) ** 2).sum(axis=1))
        blob = allowed[r <= R0 * density ** (-1.0 / N)]
        if blob.size < M:
            raise ConfigurationError("random blob does not fit")
        cells = np.sort(rng.choice(blob, size=M, replace=False))
        return SpinConfiguration(lattice, cells)
    else:
        raise ConfigurationError(f"unknown shape {shape!r}")
    return SpinConfiguration(lattice, np.sort(_rank_truncate(lattice, M, sd)))


# --- dump format ------------------------------------------------------------

def dump_configuration(config, d, seed=None, probability=None):
    """Text dump: one JSON header line, then one line of integer indices per occupied cell."""
    header = dict(config.lattice.to_json())
    header.update({"d": float(d), "M": config.occupied_count, "seed": seed,
                   "probability": None if probability is None else float(probability)})
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(" ".join(str(int(v)) for v in row) for row in config.multi_indices())
    return "\n".join(lines) + "\n"


def load_configuration(text):
    """Inverse of :func:`dump_configuration`; returns ``(config, header)``."""
    lines = text.splitlines()
    if not lines:
        raise ConfigurationError("empty configuration dump")
    try:
        header = json.loads(lines[0])
        lattice = Lattice(header["dimension"], header["h"], tuple(header["extents"]),
                          header["margin"], tuple(header["origin"]))
        rows = [ln.split() for ln in lines[1:] if ln.strip()]
        multi = np.array([[int(v) for v in row] for row in rows], dtype=np.int64).reshape(-1, lattice.dimension)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"corrupt configuration dump: {exc}") from exc
    if multi.shape[0] != header["M"]:
        raise ConfigurationError("occupied count in header does not match the cell list")
    if np.any(multi < 0) or np.any(multi >= np.asarray(lattice.extents)):
        raise ConfigurationError("cell index outside the lattice")
    return SpinConfiguration(lattice, lattice.flat(multi)), header


def problem_of(header):
    return ProblemSpec(int(header["dimension"]), float(header["d"]))
