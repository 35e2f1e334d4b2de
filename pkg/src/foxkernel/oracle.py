"""Independent reference values for the free Lévy propagator.

None of these go through the series or contour machinery of ``foxh``.  The
Fourier oracle integrates the momentum representation directly, the
Mellin-Barnes oracle integrates the contour integral of a different
parameter set (using only the gamma-ratio ``chi``) on a fixed line, and the
sampler draws from the symmetric stable law whose density is the
imaginary-time kernel.

All quadrature here is adaptive Gauss-Legendre on panels: each panel is
integrated with 15 and 30 nodes and bisected while the two disagree.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import interpolate, stats

from .errors import DomainError, ParameterError, QuadratureError
from .foxh import HParams, _log_chi
from .gamma import gamma, sinpi
from .kernels import PhysicalConfig, free_kernel_1d, free_kernel_3d

__all__ = [
    "QuadratureControl",
    "SampleStats",
    "adaptive_gauss",
    "wynn_epsilon",
    "fourier_kernel_1d",
    "mellin_barnes_params",
    "mellin_barnes_kernel_1d",
    "stable_sample",
    "stable_tail_density",
    "stable_tail_mass",
    "kernel_cdf",
    "ks_against_kernel",
    "check_normalization",
]


@dataclass(frozen=True)
class QuadratureControl:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-10
    max_subdivisions: int = 4000
    acceleration_order: int = 12

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ParameterError("quadrature tolerances must be positive", key="abs_tol")
        if int(self.max_subdivisions) < 1:
            raise ParameterError("max_subdivisions must be at least 1", key="max_subdivisions")
        if int(self.acceleration_order) < 1:
            raise ParameterError("acceleration_order must be at least 1", key="acceleration_order")


@dataclass(frozen=True)
class SampleStats:
    n_samples: int
    ks_statistic: float
    p_value: float


_GL_LO = np.polynomial.legendre.leggauss(15)
_GL_HI = np.polynomial.legendre.leggauss(30)


def _gauss(f, a, b, rule):
    nodes, weights = rule
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    s = mid[:, None] + half[:, None] * nodes[None, :]
    vals = f(s)
    return half * (vals @ weights)


def adaptive_gauss(f, edges, abs_tol, rel_tol, max_subdivisions):
    """Integrate a vectorised ``f`` over consecutive panels.

    ``edges`` are the panel boundaries (real, or complex for a straight
    path in the plane).  Returns ``(per_panel, error)``: the integral over
    each input panel and a bound on the total error.  Raises
    ``QuadratureError`` if the bisection budget runs out.
    """
    edges = np.asarray(edges)
    a, b = edges[:-1], edges[1:]
    owner = np.arange(a.size)
    done = np.zeros(a.size, dtype=complex)
    err_total = 0.0
    budget = max_subdivisions
    while a.size:
        lo = _gauss(f, a, b, _GL_LO)
        hi = _gauss(f, a, b, _GL_HI)
        err = np.abs(hi - lo)
        # Local acceptance against the current estimate of the whole.
        scale = abs(done.sum() + hi.sum())
        ok = err <= np.maximum(abs_tol, rel_tol * scale) / max(a.size, 1) ** 0.5
        np.add.at(done, owner[ok], hi[ok])
        err_total += err[ok].sum()
        if np.all(ok):
            break
        budget -= int((~ok).sum())
        if budget < 0:
            raise QuadratureError("adaptive quadrature exceeded its subdivision budget", trace=done.tolist())
        mid = 0.5 * (a[~ok] + b[~ok])
        a = np.concatenate([a[~ok], mid])
        b = np.concatenate([mid, b[~ok]])
        owner = np.concatenate([owner[~ok], owner[~ok]])
    return done, err_total


def wynn_epsilon(partial_sums, order=None):
    """Wynn's epsilon algorithm on a sequence of partial sums.

    Returns ``(estimate, error)``.  ``estimate`` is the last entry of the
    deepest even column built from the last ``2 * order + 1`` sums (all of
    them when ``order`` is None); ``error`` is its distance to the last
    entry of the previous even column.
    """
    seq = np.asarray(partial_sums, dtype=complex)
    if order is not None:
        seq = seq[-(2 * order + 1):]
    if seq.size < 3:
        return complex(seq[-1]), float(abs(seq[-1] - seq[0])) if seq.size > 1 else math.inf
    prev = np.zeros(seq.size + 1, dtype=complex)
    cur = seq.copy()
    evens = [complex(seq[-1])]
    col = 0
    while cur.size > 1:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            nxt = prev[1:cur.size] + 1.0 / (cur[1:] - cur[:-1])
        if not np.all(np.isfinite(nxt)):
            break
        prev, cur = cur, nxt
        col += 1
        if col % 2 == 0:
            evens.append(complex(cur[-1]))
    if len(evens) == 1:
        return evens[0], float(abs(seq[-1] - seq[-2]))
    return evens[-1], float(abs(evens[-1] - evens[-2]))


def _scaled_arguments(x, t, cfg):
    if not t > 0:
        raise DomainError("t must be positive")
    sigma = float(cfg.scale(t))
    return abs(float(x)) / sigma, sigma


# Imaginary time: the integrand decays like exp(-u**alpha); past u**alpha = 60
# it is below 1e-26 of its peak.
_DAMPED_CUTOFF = 60.0


def _fourier_imaginary(xi, alpha, qc):
    upper = _DAMPED_CUTOFF ** (1.0 / alpha)
    width = min(1.0, math.pi / xi) if xi > 0 else 1.0
    edges = np.linspace(0.0, upper, int(math.ceil(upper / width)) + 1)
    f = lambda u: np.cos(xi * u) * np.exp(-(u ** alpha))
    parts, err = adaptive_gauss(f, edges, qc.abs_tol, qc.rel_tol, qc.max_subdivisions)
    return parts.sum().real, err


def _chirp_breaks(alpha, slope, start, count):
    """Points past ``start`` where ``u**alpha - slope*u`` has advanced by
    successive multiples of pi.  The phase is convex and increasing there,
    so Newton started to the right of each root converges monotonically."""
    phase = lambda u: u ** alpha - slope * u
    target = phase(start) + math.pi * np.arange(1, count + 1)
    base = max(target.max(), 1.0)
    u = np.maximum((2 * np.abs(target)) ** (1 / alpha), (2 * max(slope, 0.0)) ** (1 / (alpha - 1)) if alpha > 1 else 0.0)
    u = np.maximum(u, start + 1e-12)
    for _ in range(100):
        step = (phase(u) - target) / (alpha * u ** (alpha - 1) - slope)
        u = u - step
        if np.all(np.abs(step) <= 4e-16 * u + 1e-300 * base):
            break
    return u


def _chirp(xi, alpha, sign, qc):
    """Integral over u >= 0 of exp(-i (u**alpha - sign*xi*u))."""
    slope = sign * xi
    stationary = (slope / alpha) ** (1 / (alpha - 1)) if slope > 0 else 0.0
    start = max(2.0 * stationary, 2.0)
    f = lambda u: np.exp(-1j * (u ** alpha - slope * u))
    # Head: resolve every half-period of the phase before the monotone tail.
    worst = alpha * start ** (alpha - 1) + abs(slope)
    n_head = int(math.ceil(start * worst / math.pi)) + 1
    head, err = adaptive_gauss(f, np.linspace(0.0, start, n_head + 1), qc.abs_tol, qc.rel_tol, qc.max_subdivisions)
    total = head.sum()
    trace = [total]
    estimate, last_err, hits = total, math.inf, 0
    left, batch = start, 32
    budget = qc.max_subdivisions
    while budget > 0:
        breaks = _chirp_breaks(alpha, slope, left, batch)
        parts, e = adaptive_gauss(f, np.concatenate([[left], breaks]), qc.abs_tol, qc.rel_tol, qc.max_subdivisions)
        err += e
        for piece in parts:
            total = total + piece
            trace.append(total)
            if len(trace) < 2 * qc.acceleration_order + 1:
                continue
            new, spread = wynn_epsilon(trace, qc.acceleration_order)
            limit = max(qc.abs_tol, qc.rel_tol * abs(new))
            hits = hits + 1 if (spread <= limit and abs(new - estimate) <= limit) else 0
            estimate, last_err = new, spread
            if hits >= 2:
                return estimate, err + last_err
        left = breaks[-1]
        budget -= batch
    raise QuadratureError("epsilon acceleration of the oscillatory tail did not converge", trace=trace)


def fourier_kernel_1d(x, t, cfg, qc=None):
    """Free propagator from its momentum integral.

    ``(1/(pi hbar)) * integral_0^inf cos(p x/hbar) exp(-(i/hbar) d_alpha p**alpha t) dp``,
    with ``i t`` replaced by the Euclidean time in imaginary-time mode.  In
    scaled units ``u = p sigma / hbar`` this is ``(1/(pi sigma))`` times
    ``integral cos(u |x|/sigma) exp(-u**alpha)`` (or ``exp(-i u**alpha)``).

    Real time writes the cosine as two exponentials and sums each chirp
    over half-periods of its own phase, accelerating the alternating panel
    sums with ``wynn_epsilon``.
    """
    qc = qc or QuadratureControl()
    xi, sigma = _scaled_arguments(x, t, cfg)
    alpha = cfg.alpha
    if cfg.imaginary:
        value, _ = _fourier_imaginary(xi, alpha, qc)
        return complex(value / (math.pi * sigma))
    plus, _ = _chirp(xi, alpha, +1, qc)
    minus, _ = _chirp(xi, alpha, -1, qc)
    return complex(0.5 * (plus + minus) / (math.pi * sigma))


def mellin_barnes_params(alpha):
    """Parameter set whose gamma ratio is ``Gamma(-s) Gamma((1+s)/alpha) / (pi sec(pi s/2))``.

    Its fundamental strip is ``-1 < Re s < 0`` and
    ``K(x) = (w / (alpha sigma)) H(w |x| / sigma)`` with ``w`` the
    real-time phase (1 in imaginary time).
    """
    return HParams(1, 1, ((1 - 1 / alpha, 1 / alpha), (0.5, 0.5)), ((0.0, 1.0), (0.5, 0.5)))


# Real time: on the vertical line the upper half only decays algebraically, so
# that half is swung onto a ray into the right half-plane (no poles off the
# real axis, and the integrand decays in the swept sector).
_REAL_TIME_RAY = math.radians(75.0)
_PANEL = 1.0
_QUIET_PANELS = 3


def _half_line(integrand, origin, direction, qc):
    total, err, quiet, count = 0.0j, 0.0, 0, 0
    trace = []
    left = 0.0
    batch = 16
    while count < qc.max_subdivisions:
        radii = left + _PANEL * np.arange(batch + 1)
        edges = origin + direction * radii
        parts, e = adaptive_gauss(integrand, edges, qc.abs_tol, qc.rel_tol, qc.max_subdivisions)
        err += e
        for piece in parts:
            total += piece
            trace.append(total)
            count += 1
            quiet = quiet + 1 if abs(piece) < qc.abs_tol else 0
            if quiet >= _QUIET_PANELS:
                return total, err
        left = radii[-1]
    raise QuadratureError("Mellin-Barnes integrand did not fall below abs_tol", trace=trace)


def mellin_barnes_kernel_1d(x, t, cfg, qc=None, c=0.5):
    """Free propagator from a Mellin-Barnes integral on ``Re s = -c``.

    ``0 < c < 1``.  At ``x = 0`` the integral degenerates and the value is
    the residue at ``s = 0``, ``w Gamma(1 + 1/alpha) / (pi sigma)``.
    """
    qc = qc or QuadratureControl()
    if not 0.0 < c < 1.0:
        raise DomainError("the line Re s = -c needs 0 < c < 1")
    xi, sigma = _scaled_arguments(x, t, cfg)
    alpha = cfg.alpha
    w = complex(cfg.phase)
    if xi == 0.0:
        return w * gamma(1 + 1 / alpha).real / (math.pi * sigma)
    params = mellin_barnes_params(alpha)
    log_z = math.log(xi) + 1j * math.atan2(w.imag, w.real)

    # chi(s) z**s, combined in log form: each factor alone overflows far out.
    def integrand(s):
        logv, _, sign = _log_chi(s, params)
        return sign * np.exp(logv + s * log_z)

    origin = complex(-c, 0.0)
    up_dir = 1j if cfg.imaginary else complex(math.cos(_REAL_TIME_RAY), math.sin(_REAL_TIME_RAY))
    upper, _ = _half_line(integrand, origin, up_dir, qc)
    lower, _ = _half_line(integrand, origin, -1j, qc)
    # Both halves are integrated outward from -c; the contour runs upward.
    h_value = (upper - lower) / (2j * math.pi)
    return w * h_value / (alpha * sigma)


def stable_sample(alpha, n, seed):
    """Standard symmetric alpha-stable draws, characteristic function exp(-|k|**alpha).

    Uses the Chambers-Mallows-Stuck transform of a uniform angle and a
    unit exponential.  At ``alpha = 2`` this is N(0, 2).
    """
    if not 1.0 < alpha <= 2.0:
        raise ParameterError("alpha must satisfy 1 < alpha <= 2", key="alpha")
    if int(n) < 1:
        raise ParameterError("n must be at least 1", key="n")
    rng = np.random.default_rng(seed)
    v = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, int(n))
    w = rng.exponential(1.0, int(n))
    return np.sin(alpha * v) / np.cos(v) ** (1 / alpha) * (np.cos(v - alpha * v) / w) ** ((1 - alpha) / alpha)


def _tail_coefficients(alpha, terms):
    k = np.arange(1, terms + 1)
    mags = np.array([math.exp(math.lgamma(alpha * j + 1) - math.lgamma(j + 1)) for j in k])
    return k, (-1.0) ** (k + 1) * mags * sinpi(k * alpha / 2).real / np.pi


def stable_tail_density(xi, alpha, terms=8):
    """Large-argument expansion of the standard symmetric stable density."""
    xi = np.asarray(xi, dtype=float)
    k, coef = _tail_coefficients(alpha, terms)
    return np.sum(coef[:, None] * np.abs(xi.ravel())[None, :] ** (-alpha * k[:, None] - 1), axis=0).reshape(xi.shape)


def stable_tail_mass(xi, alpha, terms=8):
    """Mass of the standard symmetric stable law beyond ``xi`` (one side)."""
    xi = np.asarray(xi, dtype=float)
    k, coef = _tail_coefficients(alpha, terms)
    return np.sum((coef / (alpha * k))[:, None] * np.abs(xi.ravel())[None, :] ** (-alpha * k[:, None]), axis=0).reshape(xi.shape)


# The tail expansion is used beyond this many widths; there its first
# neglected term is below 1e-12 of the tail mass for 1 < alpha <= 2.
_TAIL_START = 40.0



def _standard_density(alpha):
    cfg = PhysicalConfig(alpha, 1.0, 1.0, "imaginary")
    return lambda xi: free_kernel_1d(xi, 1.0, cfg).real


def kernel_cdf(alpha, step=0.05):
    """CDF of the standard stable law built from the imaginary-time kernel.

    The kernel is integrated panel by panel (8-point Gauss) on ``[0, 40]``;
    between panel edges the CDF is a cubic Hermite interpolant whose slopes
    are the kernel itself.  Beyond 40 the tail expansion takes over.
    Returns a vectorised callable.
    """
    density = _standard_density(alpha)
    edges = np.arange(0.0, _TAIL_START + step / 2, step)
    nodes, weights = np.polynomial.legendre.leggauss(8)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * step
    vals = density((mid[:, None] + half * nodes[None, :]).ravel()).reshape(mid.size, -1)
    cumulative = np.concatenate([[0.0], np.cumsum(half * vals @ weights)])
    # The two pieces should meet at the cut; pin them together exactly.
    tail = float(stable_tail_mass(_TAIL_START, alpha))
    cumulative *= (0.5 - tail) / cumulative[-1]
    inner = interpolate.CubicHermiteSpline(edges, cumulative, density(edges))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        far = ax > _TAIL_START
        mass = np.where(far, 0.5 - stable_tail_mass(np.maximum(ax, _TAIL_START), alpha), inner(np.minimum(ax, _TAIL_START)))
        return 0.5 + np.sign(x) * mass

    return cdf


def ks_against_kernel(samples, alpha, scale=1.0):
    """Kolmogorov-Smirnov test of ``samples / scale`` against ``kernel_cdf``."""
    res = stats.kstest(np.asarray(samples, dtype=float) / scale, kernel_cdf(alpha))
    return SampleStats(len(samples), float(res.statistic), float(res.pvalue))


def check_normalization(kernel, t, cfg, qc=None):
    """Total mass of the imaginary-time kernel, by quadrature.

    ``kernel`` is ``"free"`` (integral over the line) or ``"free-3d"``
    (radial integral over space).  The range up to 40 widths is integrated
    numerically and the rest from the stable-law tail expansion.  For the
    3D kernel the tail follows from the 1D one: with
    ``K3 = -(1/(2 pi r)) dK1/dr``, the mass beyond ``R`` is
    ``2 R K1(R) + 2 * (1D mass beyond R)``.
    """
    qc = qc or QuadratureControl()
    if not cfg.imaginary:
        raise DomainError("normalization is only checked in imaginary time")
    if not t > 0:
        raise DomainError("t must be positive")
    sigma = float(cfg.scale(t))
    alpha = cfg.alpha
    cut = _TAIL_START * sigma
    edges = np.concatenate([np.linspace(0.0, 4 * sigma, 33), np.geomspace(4 * sigma, cut, 40)[1:]])
    if kernel == "free":
        f = lambda x: free_kernel_1d(x.real, t, cfg).real
        inner, _ = adaptive_gauss(f, edges, qc.abs_tol, qc.rel_tol, qc.max_subdivisions)
        return float(2 * (inner.sum().real + stable_tail_mass(_TAIL_START, alpha)))
    if kernel == "free-3d":
        f = lambda r: 4 * np.pi * r.real ** 2 * free_kernel_3d(r.real, t, cfg).real
        inner, _ = adaptive_gauss(f, edges, qc.abs_tol, qc.rel_tol, qc.max_subdivisions)
        k1_cut = float(free_kernel_1d(cut, t, cfg).real)
        tail = 2 * cut * k1_cut + 2 * float(stable_tail_mass(_TAIL_START, alpha))
        return float(inner.sum().real + tail)
    raise ParameterError(f"unknown kernel {kernel!r}; expected 'free' or 'free-3d'", key="kernel")
