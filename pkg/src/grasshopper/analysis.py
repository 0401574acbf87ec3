"""Post-processing of lattice lawns: boundaries, radial histograms, cog spectra, components."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .analytic import ball_probability, format_float, unit_ball_radius
from .errors import ConfigurationError, StarShapeError
from .lattice import Lattice, build_kernel, init_shape, total_probability
from .oracle import ShellSpec, shell_probability

__all__ = [
    "BoundaryReport",
    "boundary_cells",
    "radial_histogram",
    "cog_spectrum",
    "connected_components",
    "cavity_count",
    "shell_radii",
    "classify_regime",
    "discretization_report",
    "ISOTROPY_THRESHOLD",
]

ISOTROPY_THRESHOLD = 0.05


def _occupancy(config):
    return config.grid.reshape(config.lattice.extents).astype(bool)


def _face_structure(N):
    return ndimage.generate_binary_structure(N, 1)


def _boundary_mask(mask):
    # cells outside the array count as empty
    inner = ndimage.binary_erosion(mask, structure=_face_structure(mask.ndim), border_value=0)
    return mask & ~inner


def boundary_cells(config):
    """Occupied cells with at least one empty face neighbour, as sorted flat indices."""
    return np.flatnonzero(_boundary_mask(_occupancy(config)).ravel())


def connected_components(config):
    """Face-connected components as arrays of flat indices, largest first."""
    labels, n = ndimage.label(_occupancy(config), structure=_face_structure(config.lattice.dimension))
    flat = labels.ravel()
    comps = [np.flatnonzero(flat == i) for i in range(1, n + 1)]
    comps.sort(key=lambda c: (-c.size, int(c[0])))
    return comps


def cavity_count(config):
    """Number of empty face-connected regions fully enclosed by occupied cells."""
    empty = ~_occupancy(config)
    labels, n = ndimage.label(empty, structure=_face_structure(config.lattice.dimension))
    touching = set()
    for ax in range(labels.ndim):
        for side in (0, -1):
            touching.update(np.unique(np.take(labels, side, axis=ax)).tolist())
    return len(set(range(1, n + 1)) - touching)


@dataclass
class BoundaryReport:
    """Boundary cells, their radial histogram about the centroid and, in 2D, the cog spectrum."""

    boundary: np.ndarray
    centroid: np.ndarray
    cell_size: float
    bin_edges: np.ndarray
    counts: np.ndarray
    expected_radii: list
    outside_fraction: float
    isotropic: bool
    threshold: float = ISOTROPY_THRESHOLD
    modes: list = field(default_factory=list)
    components: int | None = None
    cavities: int | None = None

    def to_json(self):
        return {
            "boundary_count": int(self.boundary.size),
            "centroid": [float(x) for x in self.centroid],
            "h": self.cell_size,
            "expected_radii": [float(r) for r in self.expected_radii],
            "outside_fraction": self.outside_fraction,
            "isotropy_threshold": self.threshold,
            "isotropic": self.isotropic,
            "components": self.components,
            "cavities": self.cavities,
            "modes": [[int(n), float(a)] for n, a in self.modes],
        }

    def histogram_csv(self):
        lines = ["r_low,r_high,count"]
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            lines.append(f"{format_float(lo)},{format_float(hi)},{int(c)}")
        return "\n".join(lines) + "\n"


def _boundary_radii(config):
    cells = boundary_cells(config)
    centroid = config.centroid()
    pos = config.lattice.positions(cells) - centroid
    return cells, centroid, np.sqrt((pos ** 2).sum(axis=1))


def radial_histogram(config, bins=50, expected=None, threshold=ISOTROPY_THRESHOLD):
    """Histogram of boundary-cell radii measured from the occupied-cell centroid.

    The lawn counts as isotropic when less than ``threshold`` of the
    boundary cells lie outside the windows ``[r - h, r + h]`` around the
    ``expected`` radii. Without expected radii the median radius is used,
    which suits single-surface lawns.
    """
    if bins < 10:
        raise ConfigurationError("radial_histogram needs at least 10 bins")
    if config.occupied_count == 0:
        raise ConfigurationError("empty configuration")
    cells, centroid, r = _boundary_radii(config)
    h = config.lattice.cell_size
    counts, edges = np.histogram(r, bins=bins, range=(0.0, float(r.max()) + h))
    expected = [float(np.median(r))] if expected is None else [float(x) for x in expected]
    inside = np.zeros(r.size, dtype=bool)
    for r0 in expected:
        inside |= np.abs(r - r0) <= h
    outside = float(1.0 - inside.mean())
    return BoundaryReport(
        boundary=cells,
        centroid=centroid,
        cell_size=h,
        bin_edges=edges,
        counts=counts,
        expected_radii=expected,
        outside_fraction=outside,
        isotropic=outside < threshold,
        threshold=threshold,
    )


def default_bins(boundary_count, cap=512):
    """Largest power of two not above half the boundary count, capped."""
    b = 1
    while b * 2 <= min(cap, boundary_count // 2):
        b *= 2
    return b


def cog_spectrum(config, bins=None, max_mode=None):
    """Fourier amplitudes of the outer boundary radius r(theta) about the centroid.

    Holes are filled before the boundary is taken. Returns ``(n, eps_n)``
    pairs for ``n >= 2`` sorted by decreasing amplitude, where
    ``eps_n = 2 |c_n| / bins``. Raises :class:`StarShapeError` when the
    lawn is disconnected, an angular bin holds no boundary cell, or a ray
    from the centroid crosses a second solid layer.
    """
    lat = config.lattice
    if lat.dimension != 2:
        raise ConfigurationError("cog spectra are defined for 2D lawns")
    mask = _occupancy(config)
    _, n = ndimage.label(mask, structure=_face_structure(2))
    if n != 1:
        raise StarShapeError(f"lawn has {n} components; use connected_components instead")
    filled = ndimage.binary_fill_holes(mask, structure=_face_structure(2))
    cells = np.flatnonzero(_boundary_mask(filled).ravel())
    pos = lat.positions(cells) - config.centroid()
    r = np.hypot(pos[:, 0], pos[:, 1])
    theta = np.arctan2(pos[:, 1], pos[:, 0])
    B = default_bins(cells.size) if bins is None else int(bins)
    if B < 8:
        raise StarShapeError("too few boundary cells for a spectrum")
    idx = np.floor((theta + np.pi) / (2 * np.pi) * B).astype(np.int64) % B
    counts = np.bincount(idx, minlength=B)
    if np.any(counts == 0):
        b = int(np.flatnonzero(counts == 0)[0])
        raise StarShapeError(f"angular bin {b} of {B} holds no boundary cell; use connected_components")
    radius = np.bincount(idx, weights=r, minlength=B) / counts
    layered = _layered_rays(filled, lat, config.centroid(), B, float(r.max()))
    if layered.size:
        raise StarShapeError(f"ray at angular bin {int(layered[0])} crosses several boundary layers; not star-shaped")
    amp = 2.0 * np.abs(np.fft.rfft(radius)) / B
    top = amp.size - 1 if max_mode is None else min(int(max_mode), amp.size - 1)
    modes = [(n, float(amp[n])) for n in range(2, top + 1)]
    modes.sort(key=lambda t: (-t[1], t[0]))
    return modes


def _layered_rays(filled, lattice, centre, B, r_max, gap=3.0):
    """Bins whose central ray leaves the filled lawn and re-enters a solid layer.

    A layer counts when both the empty run before it and the occupied run
    itself exceed ``gap`` cells; rays that start outside the lawn count too.
    """
    h = lattice.cell_size
    t = np.arange(0.0, r_max + 2 * h, 0.5 * h)
    phi = (np.arange(B) + 0.5) * 2 * np.pi / B - np.pi
    pts = centre[None, None, :] + t[None, :, None] * np.stack([np.cos(phi), np.sin(phi)], -1)[:, None, :]
    ij = np.rint((pts - np.asarray(lattice.origin)) / h).astype(np.int64)
    ij = np.clip(ij, 0, np.asarray(filled.shape) - 1)
    inside = filled[ij[..., 0], ij[..., 1]]
    bad = []
    for b in range(B):
        ray = inside[b]
        if not ray[0]:
            bad.append(b)
            continue
        # run lengths in cells, alternating occupied / empty from the centre out
        edges = np.flatnonzero(np.diff(ray.astype(np.int8))) + 1
        runs = np.diff(np.concatenate([[0], edges, [ray.size]])) * 0.5
        if any(runs[i] > gap and runs[i + 1] > gap for i in range(1, runs.size - 1, 2)):
            bad.append(b)
    return np.array(bad, dtype=np.int64)


def classify_regime(config, d=None):
    """Coarse 3D regime label from components, cavities and radial isotropy."""
    comps = connected_components(config)
    if len(comps) > 1:
        return "disconnected"
    holes = cavity_count(config)
    if holes == 0:
        rep = radial_histogram(config)
        return "solid ball" if rep.isotropic else "anisotropic"
    if holes == 1:
        _, _, r = _boundary_radii(config)
        rep = radial_histogram(config, expected=_two_layers(r))
        return "shell" if rep.isotropic else "anisotropic shell"
    return "anisotropic"


def shell_radii(config):
    """Volume-equivalent inner and outer radii of a single-cavity 3D lawn.

    The inner radius is that of a ball with the cavity's volume, the outer
    one that of a ball with the cavity plus occupied volume.
    """
    if config.lattice.dimension != 3:
        raise ConfigurationError("shell radii are defined for 3D lawns")
    empty = ~_occupancy(config)
    labels, n = ndimage.label(empty, structure=_face_structure(3))
    edge = set()
    for ax in range(3):
        for side in (0, -1):
            edge.update(np.unique(np.take(labels, side, axis=ax)).tolist())
    enclosed = [i for i in range(1, n + 1) if i not in edge]
    if len(enclosed) != 1:
        raise ConfigurationError(f"expected exactly one cavity, found {len(enclosed)}")
    cell_volume = config.lattice.cell_size ** 3
    cavity = float(np.count_nonzero(labels == enclosed[0])) * cell_volume
    occupied = config.occupied_count * cell_volume
    k = 3.0 / (4.0 * np.pi)
    return (k * cavity) ** (1 / 3), (k * (cavity + occupied)) ** (1 / 3)


def _two_layers(r):
    """Median radii of the inner and outer boundary layers (split at the widest gap)."""
    s = np.sort(r)
    k = int(np.argmax(np.diff(s))) + 1
    return float(np.median(s[:k])), float(np.median(s[k:]))


def discretization_report(shape, d, M_values, rho=None, room=1.0):
    """Rows ``(M, h, discrete, continuum, relative deviation)`` for a rasterized ball or shell (3D)."""
    rows = []
    for M in M_values:
        lat = Lattice.for_problem(3, d, M, room=room if rho is None else max(room, _shell_room(rho)))
        kernel = build_kernel(lat, d, M)
        if shape == "ball":
            config = init_shape(lat, M, "ball")
            exact = ball_probability(d) if d <= unit_ball_radius(3) else shell_probability(0.0, d)
        elif shape == "shell":
            if rho is None:
                raise ConfigurationError("shell reports need an inner radius")
            config = init_shape(lat, M, "shell", rho=rho)
            exact = shell_probability(ShellSpec(rho), d)
        else:
            raise ConfigurationError(f"unknown shape {shape!r}")
        p = total_probability(config, kernel)
        rows.append((int(M), lat.cell_size, p, exact, (p - exact) / exact))
    return rows


def _shell_room(rho):
    return ShellSpec(rho).outer_radius / unit_ball_radius(3) * 1.02


def report_table_csv(rows):
    lines = ["M,h,discrete,continuum,relative_deviation"]
    for M, h, p, e, dev in rows:
        lines.append(",".join([str(M)] + [format_float(x) for x in (h, p, e, dev)]))
    return "\n".join(lines) + "\n"


def spectrum_csv(modes):
    lines = ["mode,amplitude"]
    lines.extend(f"{n},{format_float(a)}" for n, a in sorted(modes))
    return "\n".join(lines) + "\n"


def report_json(report):
    return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
