"""Closed-form quantities for the grasshopper problem.

Probabilities for isotropic lawns (disk and ball), the radial Green's
potential used by the boundary-integral form of the probability, and the
second-order stability coefficients of the flat interface (plane waves in
N dimensions) and of the unit-area disk (n-fold cosine perturbations).

All lengths are measured with the lawn volume normalized to one.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError, SingularInputError

__all__ = [
    "ProblemSpec",
    "StabilityCurve",
    "PerturbedDiskSpec",
    "unit_ball_radius",
    "sphere_area",
    "disk_probability",
    "ball_probability",
    "greens_potential",
    "greens_potential_derivative",
    "halfspace_stability",
    "halfspace_stability_2d",
    "halfspace_stability_3d",
    "halfspace_collapse",
    "halfspace_limit_curve",
    "disk_phi0",
    "disk_stability",
    "disk_first_zero",
    "most_unstable_modes",
    "scaled_disk_stability",
    "halfspace_curve",
    "disk_curve",
]

R02 = 1.0 / math.sqrt(math.pi)
R03 = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)


def unit_ball_radius(N):
    """Radius of the N-ball with unit volume."""
    if N == 2:
        return R02
    if N == 3:
        return R03
    return math.exp((special.gammaln(N / 2 + 1) - (N / 2) * math.log(math.pi)) / N)


def sphere_area(N, d):
    """Surface area of the (N-1)-sphere of radius ``d`` in R^N."""
    if N == 2:
        return 2 * math.pi * d
    if N == 3:
        return 4 * math.pi * d * d
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2) * d ** (N - 1)


@dataclass(frozen=True)
class ProblemSpec:
    """Dimension and jump length, plus the constants derived from them."""

    dimension: int
    jump: float

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.dimension}")
        if not (self.jump >= 0 and math.isfinite(self.jump)):
            raise DomainError(f"jump length must be finite and non-negative, got {self.jump}")

    @property
    def unit_radius(self):
        return unit_ball_radius(self.dimension)

    @property
    def sphere_area(self):
        return sphere_area(self.dimension, self.jump)


@dataclass(frozen=True)
class PerturbedDiskSpec:
    """Area-preserving cosine perturbation ``r(t) = R_eps + eps cos(n t)`` of the unit disk."""

    mode: int
    amplitude: float

    def __post_init__(self):
        if self.mode < 2:
            raise DomainError("mode must be >= 2 (n=1 is a translation)")
        if self.amplitude < 0:
            raise DomainError("amplitude must be non-negative")
        if not self.amplitude < self.area_radius:
            raise DomainError("amplitude too large: the boundary would pass through the origin")

    @property
    def area_radius(self):
        return math.sqrt(R02 * R02 - 0.5 * self.amplitude ** 2)

    def radius(self, theta):
        return self.area_radius + self.amplitude * np.cos(self.mode * np.asarray(theta))

    def radius_derivative(self, theta):
        return -self.mode * self.amplitude * np.sin(self.mode * np.asarray(theta))


# --- isotropic lawns -------------------------------------------------------

def disk_probability(d):
    """Probability of staying on the unit-area disk after a jump of length ``d``."""
    d = float(d)
    if not 0.0 <= d <= 2 * R02:
        raise DomainError(f"disk_probability needs 0 <= d <= 2/sqrt(pi) = {2 * R02!r}, got {d!r}")
    x = d / (2 * R02)
    if x >= 1.0:
        return 0.0
    return 1.0 - (2.0 / math.pi) * (x * math.sqrt(1.0 - x * x) + math.asin(x))


def ball_probability(d):
    """Probability of staying on the unit-volume 3-ball; valid only for ``d <= R03``."""
    d = float(d)
    if not 0.0 <= d <= R03:
        raise DomainError(
            f"ball_probability needs 0 <= d <= R03 = {R03!r}, got {d!r}; "
            "use oracle.shell_probability beyond the ball radius"
        )
    x = d / R03
    return 1.0 - 0.75 * x + x ** 3 / 16.0


# --- Green's potential -----------------------------------------------------

def greens_potential(r, d, N):
    """Radial solution of ``lap(Phi) = delta(r - d) / S(N, d)``.

    In 2D the potential vanishes inside the jump sphere; for N > 2 it
    tends to zero at infinity.
    """
    if d <= 0:
        raise DomainError("d must be positive")
    if N < 2:
        raise DomainError("N must be >= 2")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("r must be non-negative")
    outside = r > d
    if N == 2:
        with np.errstate(divide="ignore"):
            val = np.where(outside, np.log(np.where(outside, r, d) / d), 0.0) / (2 * math.pi)
    else:
        S = sphere_area(N, d)
        with np.errstate(divide="ignore"):
            ratio = np.where(outside, (d / np.where(outside, r, d)) ** (N - 2), 1.0)
        val = d / ((N - 2) * S) * (np.where(outside, 1.0 - ratio, 0.0) - 1.0)
    return val[()] if val.ndim == 0 else val


def greens_potential_derivative(r, d, N):
    """d Phi / dr; equal to ``Theta(r - d) / (S_N r^(N-1))`` in every dimension."""
    r = np.asarray(r, dtype=float)
    unit_area = sphere_area(N, 1.0)
    with np.errstate(divide="ignore"):
        val = np.where(r > d, 1.0 / (unit_area * np.where(r > 0, r, 1.0) ** (N - 1)), 0.0)
    return val[()] if val.ndim == 0 else val


# --- half-space plane waves --------------------------------------------------

def _hyp0f1_minus_one(b, z):
    """``0F1(; b; z) - 1`` for z <= 0, without cancellation at small |z|."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1.0
    if np.any(small):
        zs = z[small]
        term = np.ones_like(zs)
        acc = np.zeros_like(zs)
        for m in range(1, 40):
            term = term * zs / ((b + m - 1) * m)
            acc += term
        out[small] = acc
    big = ~small
    if np.any(big):
        x = 2.0 * np.sqrt(-z[big])
        nu = b - 1.0
        # Gamma(nu+1) J_nu(x) / (x/2)^nu, in logs to survive large nu
        scale = np.exp(special.gammaln(nu + 1.0) - nu * np.log(x / 2.0))
        out[big] = scale * special.jv(nu, x) - 1.0
    return out


def _check_wave(k, d):
    k = np.asarray(k, dtype=float)
    if d <= 0:
        raise DomainError(f"d must be positive, got {d!r}")
    if np.any(k < 0) or not np.all(np.isfinite(k)):
        raise DomainError("wavenumber k must be finite and >= 0")
    return k


def halfspace_stability(k, d, N):
    """Second-order coefficient of a plane-wave perturbation ``cos(k x)`` of a flat interface.

    Negative values mean the flat interface is stable. The expression is
    evaluated as ``Gamma(N/2) / (2 sqrt(pi) d Gamma((N-1)/2)) * (0F1(;(N-1)/2;-(kd)^2/4) - 1)``,
    which equals the Bessel form with ``J_{(N-3)/2}`` but stays finite for large N.
    """
    if N < 2:
        raise DomainError("N must be >= 2")
    k = _check_wave(k, d)
    x = k * d
    b = (N - 1) / 2.0
    prefactor = math.exp(special.gammaln(N / 2) - special.gammaln(b)) / (2 * math.sqrt(math.pi) * d)
    val = prefactor * _hyp0f1_minus_one(b, -0.25 * x * x)
    return val[()] if val.ndim == 0 else val


def halfspace_stability_2d(k, d):
    k = _check_wave(k, d)
    # cos x - 1 = -2 sin^2(x/2) without cancellation
    val = -np.sin(0.5 * k * d) ** 2 / (math.pi * d)
    return val[()] if val.ndim == 0 else val


def halfspace_stability_3d(k, d):
    k = _check_wave(k, d)
    x = np.atleast_1d(k * d).astype(float)
    val = special.j0(x) - 1.0
    small = x < 0.5
    if np.any(small):
        val[small] = _hyp0f1_minus_one(1.0, -0.25 * x[small] ** 2)
    val = val / (4 * d)
    return val[0] if np.ndim(k) == 0 else val


def halfspace_collapse(x, N):
    """``N^(-1/2) d dp_k(d)`` at ``k d = sqrt(N) x``; independent of d."""
    x = np.asarray(x, dtype=float)
    return halfspace_stability(math.sqrt(N) * x, 1.0, N) / math.sqrt(N)


def halfspace_limit_curve(x):
    """Large-N limit of :func:`halfspace_collapse`."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be >= 0")
    val = np.expm1(-0.5 * x * x) / (2 * math.sqrt(2 * math.pi))
    return val[()] if val.ndim == 0 else val


# --- perturbed disk ----------------------------------------------------------

def disk_phi0(d):
    """Central angle subtending a chord of length ``d`` on the unit-area circle."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0) or np.any(d_arr > 2 * R02):
        raise DomainError(f"disk_phi0 needs 0 < d <= 2/sqrt(pi) = {2 * R02!r}")
    # 2 asin(d / 2R) equals acos(1 - d^2 / 2R^2) and keeps full precision at small d
    val = 2.0 * np.arcsin(np.minimum(d_arr / (2 * R02), 1.0))
    return val[()] if val.ndim == 0 else val


def disk_stability(n, d):
    """Coefficient of ``eps^2`` in the probability of the disk perturbed by ``eps cos(n t)``."""
    if int(n) != n or n < 2:
        raise DomainError(f"mode n must be an integer >= 2, got {n!r}")
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0) or np.any(d_arr > 2 * R02):
        raise DomainError(f"disk_stability needs 0 < d < 2/sqrt(pi) = {2 * R02!r}")
    phi0 = disk_phi0(d_arr)
    s = np.sin(phi0)
    at_diameter = d_arr >= 2 * R02
    if np.any(at_diameter):
        if n % 2 == 0:
            raise SingularInputError(f"even mode n={n} diverges at d = 2/sqrt(pi)")
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -(np.cos(phi0) - np.cos(n * phi0)) / s
    # odd modes vanish at the diameter
    val = np.where(at_diameter, 0.0, val)
    return val[()] if val.ndim == 0 else val


def disk_first_zero(n):
    """Smallest d > 0 where ``disk_stability(n, d)`` changes sign."""
    if int(n) != n or n < 2:
        raise DomainError(f"mode n must be an integer >= 2, got {n!r}")
    # R sqrt(2 - 2 cos phi) = 2 R sin(phi / 2), phi = 2 pi / (n + 1)
    return 2 * R02 * math.sin(math.pi / (n + 1))


def most_unstable_modes(d, n_max):
    """All modes ``2..n_max`` ranked by decreasing ``disk_stability(n, d)``.

    Exact ties go to the smaller mode.
    """
    if n_max < 2:
        raise DomainError("n_max must be >= 2")
    if not 0 < d < 2 * R02:
        raise DomainError(f"most_unstable_modes needs 0 < d < 2/sqrt(pi) = {2 * R02!r}")
    table = [(n, float(disk_stability(n, d))) for n in range(2, int(n_max) + 1)]
    return sorted(table, key=lambda item: (-item[1], item[0]))


def scaled_disk_stability(n, kd):
    """``d dp_n(d) / (2 sqrt(pi))`` at ``d = kd / (sqrt(pi) n)``.

    With ``k = n / R02`` the disk boundary carries the wavenumber of a
    plane wave, and the scaled value is directly comparable with
    ``d * halfspace_stability_2d(k, d) = (cos(kd) - 1) / (2 pi)``.
    """
    kd = np.asarray(kd, dtype=float)
    d = kd / (math.sqrt(math.pi) * n)
    val = d * disk_stability(n, d) / (2 * math.sqrt(math.pi))
    return val


# --- sampled curves ----------------------------------------------------------

@dataclass
class StabilityCurve:
    kind: str
    mode: float
    abscissa: np.ndarray
    coefficient: np.ndarray
    dimension: int | None = None
    provenance: str = "closed_form"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("half_space", "disk"):
            raise DomainError(f"unknown curve kind {self.kind!r}")
        if self.provenance not in ("closed_form", "numeric_oracle"):
            raise DomainError(f"unknown provenance {self.provenance!r}")
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        self.coefficient = np.asarray(self.coefficient, dtype=float)
        if self.abscissa.shape != self.coefficient.shape or self.abscissa.ndim != 1:
            raise DomainError("abscissa and coefficient must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.abscissa)) and np.all(np.isfinite(self.coefficient))):
            raise DomainError("curve samples must be finite")
        if np.any(np.diff(self.abscissa) <= 0):
            raise DomainError("curve abscissae must be strictly increasing")

    @property
    def samples(self):
        return list(zip(self.abscissa.tolist(), self.coefficient.tolist()))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["abscissa", "coefficient"])
        for x, y in zip(self.abscissa, self.coefficient):
            writer.writerow([format_float(x), format_float(y)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, kind, mode, **kwargs):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["abscissa", "coefficient"]:
            raise DomainError("expected header 'abscissa,coefficient'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]]).reshape(-1, 2)
        return cls(kind, mode, data[:, 0], data[:, 1], **kwargs)


def format_float(x):
    """17 significant digits, which round-trips any double."""
    return format(float(x), ".17g")


def halfspace_curve(N, k, d_values: Sequence[float]) -> StabilityCurve:
    """Half-space coefficient for fixed wavenumber, sampled over jump lengths."""
    d_values = np.asarray(d_values, dtype=float)
    coeff = np.array([halfspace_stability(k, dv, N) for dv in d_values])
    return StabilityCurve("half_space", k, d_values, coeff, dimension=N)


def disk_curve(n, d_values: Sequence[float]) -> StabilityCurve:
    d_values = np.asarray(d_values, dtype=float)
    return StabilityCurve("disk", n, d_values, disk_stability(n, d_values), dimension=2)
