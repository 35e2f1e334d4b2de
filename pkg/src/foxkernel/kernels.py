"""Free-particle Lévy propagators and the particle in a box.

Units are whatever ``hbar`` and ``d_alpha`` are expressed in; the defaults
``hbar = d_alpha = 1`` make lengths and times dimensionless.  The
fractional coefficient ``d_alpha`` carries dimension
``energy**(1-alpha) * length**alpha * time**-alpha``, which only matters for
documentation here.

Every kernel depends on position and time through the scaled argument
``|x| / sigma`` with ``sigma = (hbar**(alpha-1) * d_alpha * t)**(1/alpha)``.
In real time the argument also carries the phase ``(1/i)**(1/alpha) =
exp(-i pi / (2 alpha))``; imaginary time (``t -> -i tau``) drops it, which
turns the propagator into the symmetric alpha-stable density of scale
``sigma``.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    GridResolutionWarning,
    NonConvergenceError,
    ParameterError,
    TruncationWarning,
    UnsupportedBranchError,
)
from .foxh import HParams, SeriesControl, SeriesResult, evaluate
from .gamma import gamma

__all__ = [
    "PhysicalConfig",
    "BoxConfig",
    "free_1d_params",
    "free_3d_params",
    "laplace_1d_params",
    "fixed_energy_3d_params",
    "free_kernel_1d",
    "feynman_kernel_1d",
    "feynman_kernel_3d",
    "free_kernel_3d",
    "laplace_kernel_1d",
    "fixed_energy_kernel_3d",
    "momentum_kernel",
    "box_eigen",
    "box_kernel_spectral",
    "box_kernel_images",
    "default_image_count",
    "wall_kernel",
    "box_fixed_energy_spectral",
    "evolve_wavefunction",
]

TIME_MODES = ("imaginary", "real")
_ORIGIN_CUTOFF = 1e-8


@dataclass(frozen=True)
class PhysicalConfig:
    alpha: float
    hbar: float = 1.0
    d_alpha: float = 1.0
    time_mode: str = "imaginary"

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and 1.0 < self.alpha <= 2.0):
            raise ParameterError(f"alpha must satisfy 1 < alpha <= 2, got {self.alpha!r}", key="alpha")
        if not (isinstance(self.hbar, (int, float)) and self.hbar > 0 and math.isfinite(self.hbar)):
            raise ParameterError(f"hbar must be positive, got {self.hbar!r}", key="hbar")
        if not (isinstance(self.d_alpha, (int, float)) and self.d_alpha > 0 and math.isfinite(self.d_alpha)):
            raise ParameterError(f"d_alpha must be positive, got {self.d_alpha!r}", key="d_alpha")
        if self.time_mode not in TIME_MODES:
            raise ParameterError(f"time_mode must be one of {TIME_MODES}, got {self.time_mode!r}", key="time_mode")

    @property
    def imaginary(self):
        return self.time_mode == "imaginary"

    @property
    def phase(self):
        """Phase of the scaled kernel argument: ``(1/i)**(1/alpha)`` or 1."""
        return 1.0 + 0j if self.imaginary else np.exp(-0.5j * np.pi / self.alpha)

    def scale(self, t):
        """Kernel width ``(hbar**(alpha-1) d_alpha t)**(1/alpha)``."""
        return (self.hbar ** (self.alpha - 1) * self.d_alpha * np.asarray(t, dtype=float)) ** (1.0 / self.alpha)

    def energy(self, p):
        return self.d_alpha * np.abs(p) ** self.alpha


@dataclass(frozen=True)
class BoxConfig:
    """Infinite square well on ``[-a, a]``.

    ``n_images = None`` picks ``default_image_count`` for each time.
    """

    a: float
    n_modes: int = 200
    n_images: int = None

    def __post_init__(self):
        if not (isinstance(self.a, (int, float)) and self.a > 0 and math.isfinite(self.a)):
            raise ParameterError(f"box half-width must be positive, got {self.a!r}", key="box.a")
        if int(self.n_modes) < 1:
            raise ParameterError("box.n_modes must be at least 1", key="box.n_modes")
        if self.n_images is not None and int(self.n_images) < 0:
            raise ParameterError("box.n_images must be nonnegative", key="box.n_images")


def free_1d_params(alpha):
    return HParams(1, 1, ((1, 1 / alpha), (1, 0.5)), ((1, 1), (1, 0.5)))


def free_3d_params(alpha):
    return HParams(1, 2, ((1, 1), (1, 1 / alpha), (1, 0.5)), ((1, 1), (1, 0.5), (2, 1)))


def laplace_1d_params(alpha):
    return HParams(1, 2, ((1, 1 / alpha), (0, -1 / alpha), (1, 0.5)), ((1, 1), (1, 0.5)))


def fixed_energy_3d_params(alpha):
    return HParams(1, 3, ((0, -1 / alpha), (1, 1), (1, 1 / alpha), (1, 0.5)), ((1, 1), (1, 0.5), (2, 1)))


def _positive(name, value):
    arr = np.asarray(value, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be positive")
    return arr


def _wrap(value, err, used, conv, method, shape, full_output, what):
    if shape == ():
        value, err, used, conv = complex(value[0]), float(err[0]), int(used[0]), bool(conv[0])
        method = method[0]
    else:
        value, err, used, conv = (v.reshape(shape) for v in (value, err, used, conv))
        method = method.reshape(shape)
    res = SeriesResult(value, err, used, conv, method)
    if full_output:
        return res
    if not np.all(conv):
        raise NonConvergenceError(f"{what} did not reach the requested tolerance", res)
    return value


def _h_scaled(z, prefactor, params, ctl):
    """prefactor * H(z), flattened, with error estimates scaled alike."""
    res = evaluate(z, params, ctl)
    return (
        np.atleast_1d(res.value) * prefactor,
        np.atleast_1d(res.abs_error_estimate) * np.abs(prefactor),
        np.atleast_1d(res.terms_used),
        np.atleast_1d(res.converged),
        np.atleast_1d(np.asarray(res.method, dtype=object)),
    )


def free_kernel_1d(x, t, cfg, ctl=None, *, full_output=False):
    """Free Lévy propagator in one dimension.

    Vectorised over ``x`` and ``t`` (broadcast).  With ``full_output`` the
    return value is a ``SeriesResult`` carrying per-point error estimates,
    node/term counts, convergence flags and the evaluation method.
    Otherwise unconverged points raise ``NonConvergenceError``.
    """
    ctl = ctl or SeriesControl()
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), _positive("t", t))
    shape = x.shape
    x, t = x.ravel(), t.ravel()
    alpha = cfg.alpha
    sigma = cfg.scale(t)
    zeta = np.abs(x) / sigma
    origin = zeta < _ORIGIN_CUTOFF
    value = np.empty(x.size, dtype=complex)
    err = np.zeros(x.size)
    used = np.zeros(x.size, dtype=int)
    conv = np.ones(x.size, dtype=bool)
    method = np.full(x.size, "closed-form", dtype=object)
    if np.any(origin):
        k0 = gamma(1 + 1 / alpha).real * cfg.phase / (np.pi * sigma[origin])
        value[origin] = k0
        err[origin] = 4 * np.finfo(float).eps * np.abs(k0)
    rest = ~origin
    if np.any(rest):
        pref = 1.0 / (alpha * np.abs(x[rest]))
        z = cfg.phase * zeta[rest]
        value[rest], err[rest], used[rest], conv[rest], method[rest] = _h_scaled(z, pref, free_1d_params(alpha), ctl)
    return _wrap(value, err, used, conv, method, shape, full_output, "free_kernel_1d")


def feynman_kernel_1d(x, t, m_mass=1.0, hbar=1.0, *, imaginary=False):
    """Closed-form free propagator of ordinary quantum mechanics.

    ``sqrt(m / (2 pi i hbar t)) exp(i m x**2 / (2 hbar t))`` on the principal
    branch, or the heat kernel ``sqrt(m / (2 pi hbar t)) exp(-m x**2 / (2 hbar t))``
    in imaginary time.
    """
    t = _positive("t", t)
    if not m_mass > 0:
        raise DomainError("mass must be positive")
    x = np.asarray(x, dtype=float)
    if imaginary:
        out = np.sqrt(m_mass / (2 * np.pi * hbar * t)) * np.exp(-m_mass * x**2 / (2 * hbar * t)) + 0j
    else:
        out = np.sqrt(m_mass / (2j * np.pi * hbar * t)) * np.exp(1j * m_mass * x**2 / (2 * hbar * t))
    return complex(out) if np.ndim(out) == 0 else out


def feynman_kernel_3d(r, t, m_mass=1.0, hbar=1.0, *, imaginary=False):
    """Closed-form 3D free propagator: the cube of the 1D prefactor times the phase in ``r``."""
    t = _positive("t", t)
    r = np.asarray(r, dtype=float)
    if imaginary:
        out = (m_mass / (2 * np.pi * hbar * t)) ** 1.5 * np.exp(-m_mass * r**2 / (2 * hbar * t)) + 0j
    else:
        root = np.sqrt(m_mass / (2j * np.pi * hbar * t))
        out = root**3 * np.exp(1j * m_mass * r**2 / (2 * hbar * t))
    return complex(out) if np.ndim(out) == 0 else out


def free_kernel_3d(r, t, cfg, ctl=None, *, full_output=False):
    """Free Lévy propagator in three dimensions as a function of ``r = |x_b - x_a|``.

    Related to the 1D kernel by ``K3(r) = -(1/(2 pi r)) dK1/dr``.
    """
    ctl = ctl or SeriesControl()
    r, t = np.broadcast_arrays(_positive("r", r), _positive("t", t))
    shape = r.shape
    r, t = r.ravel(), t.ravel()
    alpha = cfg.alpha
    z = cfg.phase * r / cfg.scale(t)
    pref = -1.0 / (2 * np.pi * alpha * r**3)
    out = _h_scaled(z, pref, free_3d_params(alpha), ctl)
    return _wrap(*out, shape, full_output, "free_kernel_3d")


def laplace_kernel_1d(x, s, cfg, ctl=None, *, full_output=False):
    """Laplace transform in time of the 1D propagator, at transform variable ``s > 0``.

    In imaginary time this is the transform of the stable density; in real
    time it is the transform of the oscillatory propagator, defined by
    analytic continuation.
    """
    ctl = ctl or SeriesControl()
    x, s = np.broadcast_arrays(np.asarray(x, dtype=float), _positive("s", s))
    if np.any(x == 0):
        raise DomainError("laplace_kernel_1d needs x != 0")
    shape = x.shape
    x, s = x.ravel(), s.ravel()
    alpha, hbar = cfg.alpha, cfg.hbar
    # (1/hbar) (hbar s / (i D))**(1/alpha) |x|
    z = cfg.phase * hbar ** (1 / alpha - 1) * (s / cfg.d_alpha) ** (1 / alpha) * np.abs(x)
    pref = 1.0 / (alpha * np.abs(x) * s)
    out = _h_scaled(z, pref, laplace_1d_params(alpha), ctl)
    return _wrap(*out, shape, full_output, "laplace_kernel_1d")


def fixed_energy_kernel_3d(r, energy, cfg, ctl=None, *, full_output=False):
    """Energy-domain 3D propagator for bound-region energies ``E < 0``.

    Defined from the real-time propagator, so ``cfg.time_mode`` is ignored.
    ``E > 0`` needs a branch choice for ``(-E)**(1/alpha)`` that is left
    open, and raises ``UnsupportedBranchError``.
    """
    ctl = ctl or SeriesControl()
    r = _positive("r", r)
    if energy == 0:
        raise DomainError("fixed-energy kernel is singular at E = 0")
    if energy > 0:
        raise UnsupportedBranchError("E > 0 is not supported: the branch of (-E)**(1/alpha) is unspecified")
    shape = r.shape
    r = r.ravel()
    alpha, hbar = cfg.alpha, cfg.hbar
    kappa = (-energy / cfg.d_alpha) ** (1 / alpha) / hbar
    pref = hbar / (2j * np.pi * alpha * energy * r**3)
    out = _h_scaled(kappa * r + 0j, pref, fixed_energy_3d_params(alpha), ctl)
    return _wrap(*out, shape, full_output, "fixed_energy_kernel_3d")


def momentum_kernel(p, dt, cfg, *, vector=False):
    """Diagonal momentum-space propagator ``exp(-(i/hbar) D |p|**alpha dt)``.

    The accompanying ``(2 pi hbar)**3 delta(p_a - p_b)`` factor is left
    implicit.  With ``vector=True`` the last axis of ``p`` holds Cartesian
    components.
    """
    dt = _positive("dt", dt)
    p = np.asarray(p, dtype=float)
    mag = np.linalg.norm(p, axis=-1) if vector else np.abs(p)
    expo = cfg.d_alpha * mag**cfg.alpha * dt / cfg.hbar
    out = np.exp(-expo) + 0j if cfg.imaginary else np.exp(-1j * expo)
    return complex(out) if np.ndim(out) == 0 else out


def box_eigen(n, box, cfg):
    """Energy and wavefunction of the ``n``-th box state (``n >= 1``)."""
    if int(n) != n or n < 1:
        raise DomainError("quantum number must be a positive integer")
    a = box.a
    energy = cfg.d_alpha * (np.pi * cfg.hbar / a) ** cfg.alpha * n**cfg.alpha

    def psi(x):
        return np.sin(n * np.pi * np.asarray(x, dtype=float) / a) / np.sqrt(a)

    return energy, psi


def _check_in_box(box, *xs):
    for x in xs:
        if np.any(np.abs(x) > box.a * (1 + 1e-12)):
            raise DomainError("positions must lie inside the box [-a, a]")


def _box_modes(x_b, x_a, t, box, cfg):
    n = np.arange(1, int(box.n_modes) + 1)
    a = box.a
    energy = cfg.d_alpha * (np.pi * cfg.hbar * n / a) ** cfg.alpha
    expo = energy * t / cfg.hbar
    weight = np.exp(-expo) + 0j if cfg.imaginary else np.exp(-1j * expo)
    terms = (
        np.sin(np.pi * x_b[..., None] * n / a) * np.sin(np.pi * x_a[..., None] * n / a) * weight / a
    )
    return terms


def box_kernel_spectral(x_b, x_a, t, box, cfg, *, tol=1e-8, full_output=False):
    """Eigenfunction expansion of the box propagator, truncated at ``box.n_modes``.

    In imaginary time the terms decay like ``exp(-E_n tau)``; a
    ``TruncationWarning`` is issued when the last retained term exceeds
    ``tol``.  In real time the phase sum has no tail bound; the result is
    the plain truncation, always flagged as unconverged.
    """
    t = float(_positive("t", t))
    x_b, x_a = np.broadcast_arrays(np.asarray(x_b, dtype=float), np.asarray(x_a, dtype=float))
    _check_in_box(box, x_b, x_a)
    terms = _box_modes(x_b, x_a, t, box, cfg)
    value = terms.sum(axis=-1)
    last = np.abs(terms[..., -1])
    if cfg.imaginary:
        conv = last <= tol
        if not np.all(conv):
            warnings.warn(f"spectral box sum truncated with last term {last.max():.3g} > {tol:g}", TruncationWarning)
    else:
        conv = np.zeros(value.shape, dtype=bool)
    if not full_output:
        return complex(value) if value.ndim == 0 else value
    return SeriesResult(value, last, np.full(value.shape, int(box.n_modes)), conv, "spectral")


def default_image_count(t, box, cfg):
    """``ceil(8 sigma / (2a)) + 2`` images on each side."""
    sigma = float(cfg.scale(t))
    return int(math.ceil(8 * sigma / (2 * box.a))) + 2


def _images_free_kernel(xs, t, cfg, ctl, negligible=1e-30):
    """Free kernel at sorted distances ``xs`` for an image sum.

    In imaginary time the kernel is a symmetric stable density, decreasing
    in ``|x|``; once a block of values drops below ``negligible`` times the
    peak, every farther point is bounded by the last value and is returned
    as zero with that bound as its error.
    """
    if not cfg.imaginary:
        res = free_kernel_1d(xs, t, cfg, ctl, full_output=True)
        return np.atleast_1d(res.value), np.atleast_1d(res.abs_error_estimate), np.atleast_1d(res.converged)
    value = np.zeros(xs.size, dtype=complex)
    err = np.zeros(xs.size)
    conv = np.ones(xs.size, dtype=bool)
    peak = abs(free_kernel_1d(0.0, t, cfg, ctl))
    start, block = 0, 64
    while start < xs.size:
        sl = slice(start, start + block)
        res = free_kernel_1d(xs[sl], t, cfg, ctl, full_output=True)
        value[sl], err[sl], conv[sl] = res.value, res.abs_error_estimate, res.converged
        start += block
        block *= 2
        last = abs(value[start - 1]) if start <= xs.size else 0.0
        if start < xs.size and last < negligible * peak:
            err[start:] = last
            break
    return value, err, conv


def box_kernel_images(x_b, x_a, t, box, cfg, ctl=None, *, tol=1e-8, full_output=False):
    """Method-of-images box propagator.

    Sums ``K0(x_b - x_a + 2la) - K0(-x_b - x_a + 2la)`` over ``|l| <= L``
    with ``K0`` the free propagator, and halves the result.  The half comes
    from the Poisson resummation of the eigenfunction expansion on
    ``[-a, a]``: the images repeat with period ``2a``, so each lattice
    point is counted once from the ``+l`` and once from the mirrored
    sequence.  The two representations then agree pointwise.

    The ``|l| = L`` ring is reported as the tail estimate; a
    ``TruncationWarning`` is issued when it exceeds ``tol``.
    """
    ctl = ctl or SeriesControl()
    t = float(_positive("t", t))
    x_b, x_a = np.broadcast_arrays(np.asarray(x_b, dtype=float), np.asarray(x_a, dtype=float))
    _check_in_box(box, x_b, x_a)
    L = default_image_count(t, box, cfg) if box.n_images is None else int(box.n_images)
    shifts = 2 * box.a * np.arange(-L, L + 1)
    direct = (x_b - x_a)[..., None] + shifts
    mirror = (-x_b - x_a)[..., None] + shifts
    args = np.abs(np.stack([direct, mirror]))
    uniq, inv = np.unique(args, return_inverse=True)
    kv, ke, kc = _images_free_kernel(uniq, t, cfg, ctl)
    vals = kv[inv].reshape(args.shape)
    errs = ke[inv].reshape(args.shape)
    terms = 0.5 * (vals[0] - vals[1])
    value = terms.sum(axis=-1)
    ring = np.abs(terms[..., 0] + terms[..., -1]) if L > 0 else np.abs(terms[..., 0])
    err = 0.5 * errs.sum(axis=(0, -1))
    conv = (ring <= tol) & np.all(kc)
    if np.any(ring > tol):
        warnings.warn(f"image sum truncated at L={L} with ring contribution {ring.max():.3g} > {tol:g}", TruncationWarning)
    if not full_output:
        return complex(value) if value.ndim == 0 else value
    return SeriesResult(value, err + ring, np.full(value.shape, 2 * (2 * L + 1)), conv, "images")


def wall_kernel(x_b, x_a, t, cfg, ctl=None):
    """Propagator on the half line ``x > 0`` with an absorbing wall at the origin."""
    x_b, x_a = np.broadcast_arrays(np.asarray(x_b, dtype=float), np.asarray(x_a, dtype=float))
    if np.any(x_b <= 0) or np.any(x_a <= 0):
        raise DomainError("wall_kernel needs x_a, x_b > 0")
    return free_kernel_1d(x_b - x_a, t, cfg, ctl) - free_kernel_1d(x_b + x_a, t, cfg, ctl)


def box_fixed_energy_spectral(x2, x1, energy, eps, box, cfg):
    """Energy-domain box propagator ``sum_n psi_n(x2) psi_n(x1) i hbar / (E - E_n + i eps)``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    x2, x1 = np.broadcast_arrays(np.asarray(x2, dtype=float), np.asarray(x1, dtype=float))
    _check_in_box(box, x2, x1)
    n = np.arange(1, int(box.n_modes) + 1)
    a = box.a
    e_n = cfg.d_alpha * (np.pi * cfg.hbar * n / a) ** cfg.alpha
    terms = np.sin(np.pi * x2[..., None] * n / a) * np.sin(np.pi * x1[..., None] * n / a) / a
    out = (terms * (1j * cfg.hbar / (energy - e_n + 1j * eps))).sum(axis=-1)
    return complex(out) if out.ndim == 0 else out


def _trapezoid_weights(grid):
    w = np.zeros_like(grid)
    dx = np.diff(grid)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def _on_differences(fn, diff):
    uniq, inv = np.unique(diff, return_inverse=True)
    return np.asarray(fn(uniq))[inv].reshape(diff.shape)


def evolve_wavefunction(psi_a, grid, t, kernel, cfg, *, box=None, ctl=None):
    """Propagate samples ``psi_a`` on ``grid`` for time ``t``.

    ``kernel`` is ``"free"``, ``"box-spectral"``, ``"box-images"``,
    ``"wall"`` or a callable ``K(x_b, x_a)`` broadcasting over arrays.  The
    integral over the initial point uses the trapezoid rule on ``grid``.
    A ``GridResolutionWarning`` is issued when a complex kernel changes
    phase by more than a quarter turn between neighbouring grid points
    (oscillation wavelength below four steps).  The truncated spectral box
    kernel is a finite sine sum, so there the test is instead that the
    grid step is at most ``a / n_modes``; coarser grids alias high modes
    onto low ones.
    """
    t = float(_positive("t", t))
    grid = np.asarray(grid, dtype=float)
    psi_a = np.asarray(psi_a, dtype=complex)
    if grid.ndim != 1 or grid.size < 2 or psi_a.shape != grid.shape:
        raise DomainError("psi_a and grid must be 1-d arrays of equal length >= 2")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    xb, xa = grid[:, None], grid[None, :]
    if callable(kernel):
        kmat = np.asarray(kernel(xb, xa), dtype=complex)
    elif kernel == "free":
        kmat = _on_differences(lambda d: free_kernel_1d(d, t, cfg, ctl), xb - xa)
    elif kernel in ("box-spectral", "box-images"):
        if box is None:
            raise DomainError(f"kernel {kernel!r} needs a BoxConfig")
        fn = box_kernel_spectral if kernel == "box-spectral" else box_kernel_images
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            kmat = np.asarray(fn(xb, xa, t, box, cfg), dtype=complex)
        if kernel == "box-spectral":
            if np.max(np.diff(grid)) > box.a / box.n_modes * (1 + 1e-9):
                warnings.warn(
                    f"grid step exceeds a / n_modes = {box.a / box.n_modes:.3g}; high box modes alias onto low ones",
                    GridResolutionWarning,
                )
            return kmat @ (_trapezoid_weights(grid) * psi_a)
    elif kernel == "wall":
        kmat = wall_kernel(xb, xa, t, cfg, ctl)
    else:
        raise DomainError(f"unknown kernel choice {kernel!r}")
    if np.any(kmat.imag != 0):
        _check_resolution(kmat)
    return kmat @ (_trapezoid_weights(grid) * psi_a)


def _check_resolution(kmat):
    mag = np.abs(kmat)
    significant = mag > 1e-3 * mag.max()
    step = np.abs(np.angle(kmat[:, 1:] * np.conj(kmat[:, :-1])))
    both = significant[:, 1:] & significant[:, :-1]
    if np.any(step[both] > np.pi / 2):
        warnings.warn(
            "kernel oscillation wavelength is below four grid steps; refine the grid", GridResolutionWarning
        )
