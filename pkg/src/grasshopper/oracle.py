"""Independent numerical references for the closed forms.

Nothing here evaluates a Bessel function or a stability formula; each
routine goes back to the defining integral of the probability:

* :func:`mc_pair_probability` samples start points and jump directions.
* :func:`perturbed_disk_probability` integrates the boundary double
  integral with the 2D Green's potential along a polar curve.
* :func:`shell_probability` reduces the pair integral of a 3-shell to a
  radial integral of spherical-cap fractions.
* :func:`halfspace_stability_numeric` integrates the plane-wave
  coefficient in hyperspherical (r, phi_1) coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .analytic import R02, R03, disk_probability, sphere_area
from .errors import BracketError, DomainError, QuadratureError, SamplingError

__all__ = [
    "Lawn",
    "disk_lawn",
    "ball_lawn",
    "shell_lawn",
    "curve_lawn",
    "mc_pair_probability",
    "ParametricCurve2D",
    "perturbed_disk_probability",
    "perturbation_coefficient",
    "ShellSpec",
    "shell_probability",
    "optimal_shell_radius",
    "halfspace_stability_numeric",
]


# --- Monte Carlo -------------------------------------------------------------

class Lawn(NamedTuple):
    """Indicator of a unit-volume region together with a bounding box."""

    indicator: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dimension(self):
        return len(self.lower)


def _radial_lawn(N, inner, outer):
    def indicator(x):
        r2 = np.einsum("ij,ij->i", x, x)
        return (r2 < outer * outer) & (r2 >= inner * inner)

    return Lawn(indicator, np.full(N, -outer), np.full(N, outer))


def disk_lawn():
    return _radial_lawn(2, 0.0, R02)


def ball_lawn():
    return _radial_lawn(3, 0.0, R03)


def shell_lawn(inner_radius):
    shell = ShellSpec(inner_radius)
    return _radial_lawn(3, shell.inner_radius, shell.outer_radius)


def curve_lawn(curve):
    """Star-shaped 2D lawn bounded by a :class:`ParametricCurve2D`."""
    rmax = float(np.max(curve.radius(np.linspace(0, 2 * np.pi, 4097)))) * 1.01

    def indicator(x):
        r = np.hypot(x[:, 0], x[:, 1])
        return r < curve.radius(np.arctan2(x[:, 1], x[:, 0]))

    return Lawn(indicator, np.full(2, -rmax), np.full(2, rmax))


def _random_directions(rng, n, N):
    v = rng.standard_normal((n, N))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v


def mc_pair_probability(lawn, d, samples=10 ** 6, seed=0, chunk=2 ** 20):
    """Monte-Carlo estimate of the grasshopper probability of ``lawn``.

    Start points are drawn uniformly from the lawn by rejection from its
    bounding box, jump directions uniformly from the unit sphere. Returns
    ``(estimate, standard_error)``. Each chunk of candidates has its own
    child stream of ``SeedSequence(seed)``, so the result depends only on
    the arguments.
    """
    if samples < 10 ** 4:
        raise DomainError("mc_pair_probability needs at least 1e4 samples")
    if d < 0:
        raise DomainError("d must be non-negative")
    N = lawn.dimension
    lower = np.asarray(lawn.lower, dtype=float)
    width = np.asarray(lawn.upper, dtype=float) - lower

    hits = taken = accepted = proposed = 0
    block = 0
    while taken < samples:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
        block += 1
        cand = lower + width * rng.random((chunk, N))
        start = cand[lawn.indicator(cand)]
        proposed += chunk
        accepted += len(start)
        if accepted < 1e-3 * proposed:
            raise SamplingError(
                f"bounding-box rejection efficiency {accepted / proposed:.2e} < 1e-3; "
                f"box lower={lower.tolist()} upper={np.asarray(lawn.upper).tolist()}"
            )
        start = start[: samples - taken]
        end = start + d * _random_directions(rng, len(start), N)
        hits += int(np.count_nonzero(lawn.indicator(end)))
        taken += len(start)
    p = hits / taken
    stderr = math.sqrt(max(p * (1 - p), 0.0) / (taken - 1))
    return p, stderr


# --- boundary integral of a polar curve ---------------------------------------

@dataclass
class ParametricCurve2D:
    """Closed star-shaped curve ``r(theta)`` in polar coordinates."""

    radius: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    smooth: bool = True

    def __post_init__(self):
        t = np.linspace(0.0, 2 * np.pi, 4097)
        r = np.asarray(self.radius(t), dtype=float)
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise DomainError("curve radius must be positive everywhere (self-intersecting curve)")
        for f in (self.radius, self.derivative):
            a, b = float(f(np.array([0.0]))[0]), float(f(np.array([2 * np.pi]))[0])
            if abs(a - b) > 1e-12 * max(1.0, abs(a)):
                raise DomainError("curve radius and derivative must be 2*pi periodic")

    @classmethod
    def cosine_modes(cls, amplitudes):
        """Area-one curve ``R + sum_n eps_n cos(n theta)``; ``amplitudes`` maps n to eps_n."""
        modes = sorted(amplitudes.items())
        for n, _ in modes:
            if int(n) != n or n < 1:
                raise DomainError("cosine modes must be positive integers")
        power = sum(e * e for _, e in modes)
        if power / 2 >= R02 * R02:
            raise DomainError("perturbation amplitudes too large for a unit-area curve")
        base = math.sqrt(R02 * R02 - 0.5 * power)
        ns = np.array([n for n, _ in modes], dtype=float)
        es = np.array([e for _, e in modes], dtype=float)

        def radius(t):
            t = np.asarray(t, dtype=float)
            return base + np.tensordot(es, np.cos(np.multiply.outer(ns, t)), axes=1)

        def derivative(t):
            t = np.asarray(t, dtype=float)
            return -np.tensordot(es * ns, np.sin(np.multiply.outer(ns, t)), axes=1)

        return cls(radius, derivative)

    @classmethod
    def from_spec(cls, spec):
        """Curve of a :class:`~grasshopper.analytic.PerturbedDiskSpec`."""
        return cls(spec.radius, spec.radius_derivative)

    def points(self, t):
        r = self.radius(t)
        return r * np.cos(t), r * np.sin(t)

    def tangents(self, t):
        r = self.radius(t)
        dr = self.derivative(t)
        c, s = np.cos(t), np.sin(t)
        return dr * c - r * s, dr * s + r * c


def _kink_angles(curve, theta, d, sign):
    """Smallest phi in (0, pi] with ``|r(theta) - r(theta + sign*phi)| = d``.

    Returns pi where the chord never reaches d.
    """
    x1, y1 = curve.points(theta)

    def excess(phi):
        x2, y2 = curve.points(theta + sign * phi)
        return np.hypot(x2 - x1, y2 - y1) - d

    lo = np.zeros_like(theta)
    hi = np.full_like(theta, np.pi)
    never = excess(hi) <= 0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = excess(mid) < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    root = 0.5 * (lo + hi)
    root[never] = np.pi
    return root


def _check_single_crossing(curve, theta, d, a, sign):
    # the chord must exceed d everywhere beyond the kink, otherwise the
    # integration interval is not a single panel run
    x1, y1 = curve.points(theta)
    u = np.linspace(0.0, 1.0, 65)[1:-1]
    phi = a[:, None] + (np.pi - a)[:, None] * u[None, :]
    x2, y2 = curve.points(theta[:, None] + sign * phi)
    chord = np.hypot(x2 - x1[:, None], y2 - y1[:, None])
    if np.any(chord < d * (1 - 1e-9)):
        raise QuadratureError("chord length crosses the jump length more than once; curve too irregular")


def _boundary_integral(curve, d, n_theta, n_panels, order):
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    a = _kink_angles(curve, theta, d, +1.0)
    b = 2 * np.pi - _kink_angles(curve, theta, d, -1.0)
    width = np.maximum(b - a, 0.0)
    x1, y1 = curve.points(theta)
    tx1, ty1 = curve.tangents(theta)

    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    total = np.zeros(n_theta)
    for u0, u1 in zip(edges[:-1], edges[1:]):
        u = u0 + (u1 - u0) * (nodes + 1) / 2
        w = weights * (u1 - u0) / 2
        phi = a[:, None] + width[:, None] * u[None, :]
        t2 = theta[:, None] + phi
        x2, y2 = curve.points(t2)
        tx2, ty2 = curve.tangents(t2)
        chord = np.hypot(x2 - x1[:, None], y2 - y1[:, None])
        potential = np.log(np.maximum(chord, d) / d) / (2 * np.pi)
        dot = tx1[:, None] * tx2 + ty1[:, None] * ty2
        total += (potential * dot) @ w
    total *= width
    return -total.sum() * (2 * np.pi / n_theta), (theta, a, b)


def perturbed_disk_probability(curve, d, tol=1e-12, max_level=6):
    """Grasshopper probability of the lawn enclosed by ``curve``.

    Evaluates ``-int dtheta int dphi Phi(|r(theta) - r(theta+phi)|) r'(theta).r'(theta+phi)``.
    Phi vanishes for chords shorter than d and has a kink where the chord
    equals d, so for every theta the phi-range is cut at the two kink
    angles and the remaining arc is integrated with composite
    Gauss-Legendre panels. The theta integrand is smooth and periodic and
    uses the trapezoidal rule. Resolution doubles until two successive
    levels agree within ``tol``.
    """
    if d <= 0:
        raise DomainError("d must be positive")
    n_theta, n_panels, order = 64, 2, 24
    prev = None
    for level in range(max_level + 1):
        value, (theta, a, _) = _boundary_integral(curve, d, n_theta, n_panels, order)
        if level == 0:
            _check_single_crossing(curve, theta, d, a, +1.0)
        if prev is not None and abs(value - prev) <= tol:
            return value
        prev = value
        n_theta *= 2
        n_panels *= 2
    raise QuadratureError(
        f"boundary integral did not converge to {tol:g}", achieved=abs(value - prev) if prev is not None else None
    )


def perturbation_coefficient(amplitudes, d, eps, tol=1e-13):
    """``(p - p_disc) / eps^2`` for the curve with mode amplitudes ``a_n * eps``."""
    curve = ParametricCurve2D.cosine_modes({n: a * eps for n, a in amplitudes.items()})
    p = perturbed_disk_probability(curve, d, tol=tol)
    return (p - disk_probability(d)) / (eps * eps)


# --- radially symmetric 3-shells ---------------------------------------------

@dataclass(frozen=True)
class ShellSpec:
    """Unit-volume 3-shell; the outer radius follows from the inner one."""

    inner_radius: float

    def __post_init__(self):
        if not self.inner_radius >= 0:
            raise DomainError("inner radius must be >= 0")

    @property
    def outer_radius(self):
        return (self.inner_radius ** 3 + R03 ** 3) ** (1.0 / 3.0)

    @property
    def volume(self):
        return 4 * math.pi / 3 * (self.outer_radius ** 3 - self.inner_radius ** 3)


def _cap_fraction(s, a, d):
    """Fraction of the sphere of radius d centred at distance s that lies inside radius a."""
    s = np.asarray(s, dtype=float)
    out = np.where(s + d <= a, 1.0, 0.0)
    partial = (np.abs(s - d) < a) & (s + d > a)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = (a * a - (s - d) ** 2) / (4 * s * d)
    return np.where(partial, frac, out)


_GL4 = np.polynomial.legendre.leggauss(4)


def shell_probability(shell, d):
    """Exact probability of a 3-shell, as a piecewise-polynomial radial integral."""
    if isinstance(shell, (int, float)):
        shell = ShellSpec(float(shell))
    if d <= 0:
        raise DomainError("d must be positive")
    rho, R = shell.inner_radius, shell.outer_radius
    cuts = {rho, R}
    for c in (R - d, d - R, R + d, rho - d, d - rho, rho + d):
        if rho < c < R:
            cuts.add(c)
    cuts = sorted(cuts)
    x, w = _GL4
    total = 0.0
    for s0, s1 in zip(cuts[:-1], cuts[1:]):
        s = s0 + (s1 - s0) * (x + 1) / 2
        f = _cap_fraction(s, R, d) - (_cap_fraction(s, rho, d) if rho > 0 else 0.0)
        total += (s1 - s0) / 2 * np.dot(w, 4 * math.pi * s * s * f)
    return float(total)


def optimal_shell_radius(d, xtol=1e-6, n_scan=81):
    """Inner radius maximizing :func:`shell_probability` at jump ``d``.

    A coarse scan brackets the single maximum; golden-section search
    refines it. Returns ``(rho_star, p_star)``.
    """
    if not R03 < d <= 2.5 * R03:
        raise DomainError(f"optimal_shell_radius needs R03 < d <= 2.5 R03 (R03 = {R03!r})")
    lo, hi = max(0.0, d - R03 - 0.2), d
    grid = np.linspace(lo, hi, n_scan)
    values = np.array([shell_probability(ShellSpec(r), d) for r in grid])
    i = int(np.argmax(values))
    scan = list(zip(grid.tolist(), values.tolist()))
    if i == n_scan - 1 or (i == 0 and lo > 0):
        raise BracketError(f"shell probability maximum not bracketed in [{lo:.6g}, {hi:.6g}]", scan=scan)
    a, b = grid[max(i - 1, 0)], grid[i + 1]

    def f(r):
        return shell_probability(ShellSpec(r), d)

    invphi = (math.sqrt(5) - 1) / 2
    c, e = b - invphi * (b - a), a + invphi * (b - a)
    fc, fe = f(c), f(e)
    while b - a > xtol:
        if fc > fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = f(e)
    rho = 0.5 * (a + b)
    return rho, f(rho)


# --- half-space plane waves --------------------------------------------------

def _inverse_square_cosine(a, d):
    """``int_d^inf cos(a r) / r^2 dr`` by QAWF."""
    if a == 0:
        return 1.0 / d
    val, err = integrate.quad(lambda r: 1.0 / (r * r), d, np.inf, weight="cos", wvar=a, limlst=200)
    if not np.isfinite(val) or err > 1e-7:
        raise QuadratureError(f"oscillatory radial integral did not converge (a={a!r})", achieved=err)
    return val


def halfspace_stability_numeric(k, d, N, tol=1e-9):
    """Plane-wave coefficient from the hyperspherical (r, phi_1) integral.

    The integrand ``Phi'/r + cos(k r cos phi_1) (k^2 Phi - Phi'/r)`` is not
    absolutely integrable at large r. Moving ``k^2 cos`` onto Phi by two
    integrations by parts along the wave direction (the boundary terms
    oscillate and average out) leaves, per unit of ``r^(N-2) dr dOmega``::

        (1 - (2 - N c^2) cos(k r c)) / (S_N r^N)     for r > d
        - c^2 cos(k d c) delta(r - d) / (S_N d^(N-1))

    with ``c = cos(phi_1)`` and ``Phi'(r) = 1 / (S_N r^(N-1))`` outside the
    jump sphere. The radial parts are computed with QAWF, the angular part
    with adaptive quadrature split at phi_1 = pi/2.
    """
    if N not in (2, 3, 4):
        raise DomainError("halfspace_stability_numeric supports N in {2, 3, 4}")
    if d <= 0 or k < 0:
        raise DomainError("need d > 0 and k >= 0")
    if k * d > 50:
        raise DomainError("halfspace_stability_numeric supports kd <= 50")
    unit_area = sphere_area(N, 1.0)

    def angular(c):
        return (
            _inverse_square_cosine(0.0, d)
            - (2 - N * c * c) * _inverse_square_cosine(k * abs(c), d)
            - c * c * math.cos(k * d * c) / d
        )

    if N == 2:
        # the "sphere" of directions in R^1 is the pair c = +1, c = -1
        total = 2 * angular(1.0)
    else:
        # measure of the (N-3)-sphere of the remaining angles
        measure = 2 * math.exp(((N - 2) / 2) * math.log(math.pi) - gammaln((N - 2) / 2))

        def f(t):
            return measure * math.sin(t) ** (N - 3) * angular(math.cos(t))

        total = 0.0
        for lo, hi in ((0.0, math.pi / 2), (math.pi / 2, math.pi)):
            val, err = integrate.quad(f, lo, hi, limit=200, epsabs=tol * 1e-3, epsrel=1e-12)
            if err > tol:
                raise QuadratureError("angular integral did not converge", achieved=err)
            total += val
    return -0.5 * total / unit_area
