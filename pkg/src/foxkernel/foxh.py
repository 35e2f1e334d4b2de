"""Fox H-function: parameter sets, residue series and contour quadrature.

The H-function is the Mellin-Barnes integral

    H(z) = 1/(2 pi i) * integral over L of chi(s) z**s ds

with ``chi`` the ratio of gamma products built from the lower pairs
``(b_j, B_j)`` and upper pairs ``(a_j, A_j)``:

    chi(s) = prod_{j<=m} Gamma(b_j - B_j s) * prod_{j<=n} Gamma(1 - a_j + A_j s)
             / (prod_{j>m} Gamma(1 - b_j + B_j s) * prod_{j>n} Gamma(a_j - A_j s))

Two evaluators are provided.  ``eval_series`` sums residues at the poles
``s = (b_h + k)/B_h`` of the first ``m`` gamma factors.  ``eval_contour``
integrates along a vertical line in the pole-free strip, bending onto a 45
degree ray past the saddle when ``arg z`` sits on the edge of the
convergence sector (the case of real-time propagators).  ``evaluate`` picks
between them and records which one produced each value.

z**s always uses the principal branch, ``arg z`` in ``(-pi, pi]``.
"""
import json
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    ContourError,
    DomainError,
    NotApplicableError,
    ParameterError,
    PoleError,
    PreconditionError,
    SeriesDivergenceError,
)
from .gamma import POLE_TOL, log_gamma

__all__ = [
    "HParams",
    "SeriesControl",
    "SeriesResult",
    "mu",
    "beta",
    "check_poles_separated",
    "chi",
    "eval_series",
    "eval_contour",
    "evaluate",
    "series_is_complete",
    "transform_reduce",
    "transform_invert",
    "transform_scale",
    "transform_power_shift",
    "transform_laplace_lift",
    "is_meijer_g",
    "EXP_SET",
]

_EPS = np.finfo(float).eps
_LOG_OVERFLOW = 700.0
_RUN = 20
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_TAIL_RATIO = 1e-18
_RHO_MIN = 0.2


def _pair(item):
    if len(item) == 2:
        a, slope = item
    elif len(item) == 3:
        a, slope = complex(item[0], item[1]), item[2]
    else:
        raise ParameterError(f"expected (a, A) or (re, im, A), got {item!r}")
    a = complex(a)
    slope = float(slope)
    if not (np.isfinite(a.real) and np.isfinite(a.imag)):
        raise ParameterError(f"non-finite parameter {a!r}")
    if not np.isfinite(slope) or slope == 0.0:
        raise ParameterError(f"slopes must be finite and nonzero, got {slope!r}")
    return (a, slope)


@dataclass(frozen=True)
class HParams:
    """Parameter set of an H-function ``H^{m,n}_{p,q}``.

    ``upper`` holds the ``p`` pairs ``(a_j, A_j)`` and ``lower`` the ``q``
    pairs ``(b_j, B_j)``.  Pairs may be given as ``(a, A)`` with complex
    ``a`` or as ``(re, im, A)``.  Slopes outside the first ``m`` lower pairs
    may be negative.  ``m = 0`` is accepted when ``n >= 1`` so that the
    inversion identity stays closed; such sets have no residue series.
    """

    m: int
    n: int
    upper: tuple = ()
    lower: tuple = ()

    def __post_init__(self):
        upper = tuple(_pair(u) for u in self.upper)
        lower = tuple(_pair(b) for b in self.lower)
        m, n = int(self.m), int(self.n)
        if not 0 <= n <= len(upper):
            raise ParameterError(f"need 0 <= n <= p, got n={n}, p={len(upper)}")
        if not 0 <= m <= len(lower) or m + n == 0:
            raise ParameterError(f"need 0 <= m <= q and m + n >= 1, got m={m}, q={len(lower)}")
        for b, slope in lower[:m]:
            if slope <= 0:
                raise ParameterError(f"slopes of the first m lower pairs must be positive, got {slope}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "lower", lower)

    @property
    def p(self):
        return len(self.upper)

    @property
    def q(self):
        return len(self.lower)

    def to_dict(self):
        enc = lambda pairs: [[a.real, a.imag, s] for a, s in pairs]
        return {"m": self.m, "n": self.n, "upper": enc(self.upper), "lower": enc(self.lower)}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data["m"], data["n"], data.get("upper", []), data.get("lower", []))
        except KeyError as exc:
            raise ParameterError(f"missing key {exc.args[0]!r} in parameter set") from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


EXP_SET = HParams(1, 0, (), ((0.0, 1.0),))


@dataclass(frozen=True)
class SeriesControl:
    """Stopping controls.

    ``tol`` is relative: a result counts as converged when its error
    estimate is at most ``tol * |value|``, or at most ``underflow_floor``
    (an absolute floor, also used to treat vanishing terms as zero).
    """

    tol: float = 1e-11
    max_terms: int = 4000
    underflow_floor: float = 1e-300

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError("tol must be positive")
        if int(self.max_terms) < 1:
            raise ParameterError("max_terms must be at least 1")
        if self.underflow_floor < 0:
            raise ParameterError("underflow_floor must be nonnegative")


@dataclass
class SeriesResult:
    value: complex
    abs_error_estimate: float
    terms_used: int
    converged: bool
    method: object = field(default="series")


def mu(params):
    return sum(s for _, s in params.lower) - sum(s for _, s in params.upper)


def beta(params):
    """Product of ``|A|**|A|`` over upper slopes times ``|B|**-|B|`` over lower.

    Absolute values keep the result real for sets with signed slopes; for
    positive slopes this is the usual definition.
    """
    out = 1.0
    for _, s in params.upper:
        out *= abs(s) ** abs(s)
    for _, s in params.lower:
        out *= abs(s) ** -abs(s)
    return out


def _slope_excess(params):
    # Exponential decay rate of |chi(c + iy)| is (pi/2) * this * |y|.
    num = sum(abs(s) for _, s in params.lower[: params.m]) + sum(abs(s) for _, s in params.upper[: params.n])
    den = sum(abs(s) for _, s in params.lower[params.m:]) + sum(abs(s) for _, s in params.upper[params.n:])
    return num - den


def check_poles_separated(params, window=50):
    """True when no pole of the first ``m`` lower gammas meets a pole of the
    first ``n`` upper gammas, scanning ``nu, lam`` in ``0..window``."""
    nu = np.arange(window + 1)
    for b, bs in params.lower[: params.m]:
        for a, as_ in params.upper[: params.n]:
            lhs = as_ * (b + nu[:, None])
            rhs = bs * (a - nu[None, :] - 1)
            if np.any(np.abs(lhs - rhs) <= POLE_TOL):
                return False
    return True


def is_meijer_g(params):
    return all(s == 1.0 for _, s in params.upper + params.lower)


@lru_cache(maxsize=256)
def _factors(params):
    """(offset, slope, sign) for each gamma factor: Gamma(offset + slope*s)
    in the numerator (sign +1) or denominator (sign -1)."""
    out = []
    for j, (b, bs) in enumerate(params.lower):
        out.append((b, -bs, 1) if j < params.m else (1 - b, bs, -1))
    for j, (a, as_) in enumerate(params.upper):
        out.append((1 - a, as_, 1) if j < params.n else (a, -as_, -1))
    return tuple(out)


def _log_chi(s, params):
    """log chi(s) with poles regularised.

    Returns ``(logv, order, sign)``.  At a pole ``w = -k`` of a factor
    ``Gamma(w)``, ``w = c + d s``, the factor contributes its residue
    coefficient ``(-1)**k / (k! d)`` and ``order`` counts the net pole order
    (numerator poles minus denominator poles).  The signs of residue
    coefficients are kept exactly in ``sign`` rather than as ``i*pi``
    phases.  Where ``order == 0``, ``sign * exp(logv)`` is the finite limit
    of chi.
    """
    s = np.asarray(s, dtype=complex)
    logv = np.zeros(s.shape, dtype=complex)
    order = np.zeros(s.shape, dtype=int)
    sgn = np.ones(s.shape)
    for c0, d, sign in _factors(params):
        w = c0 + d * s
        k = np.round(w.real)
        pole = (k <= 0) & (np.abs(w - k) <= POLE_TOL)
        if np.any(pole):
            lg = np.array(log_gamma(np.where(pole, 1.0, w)))
            kk = -k[pole]
            lg[pole] = -np.asarray(log_gamma(kk + 1.0)).real - math.log(abs(d))
            sgn[pole] *= (1.0 - 2.0 * np.mod(kk, 2.0)) * math.copysign(1.0, d)
            order += sign * pole
        else:
            lg = np.asarray(log_gamma(w))
        logv += sign * lg
    return logv, order, sgn


def chi(s, params):
    """The gamma ratio of the Mellin-Barnes integrand.

    Removable singularities (a numerator pole cancelled by a denominator
    pole) return the limit; a net pole raises ``PoleError``.
    """
    arr = np.asarray(s, dtype=complex)
    logv, order, sgn = _log_chi(arr, params)
    if np.any(order > 0):
        raise PoleError(f"chi has a pole at s={arr[order > 0].ravel()[0]}")
    with np.errstate(over="ignore"):
        out = np.where(order < 0, 0.0, sgn * np.exp(logv))
    return complex(out) if arr.ndim == 0 else out


def _prepare_z(z):
    arr = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(arr).ravel()
    if not np.all(np.isfinite(flat)):
        raise DomainError("argument must be finite")
    if np.any(flat == 0):
        raise DomainError("H-function argument must be nonzero")
    return flat, arr.shape


def _real_params(params):
    return all(complex(v).imag == 0 for pair in params.upper + params.lower for v in pair)


def _project_real(value, z, params):
    """With real parameters H is real on the positive axis (conjugate
    symmetry); drop the rounding-level imaginary part there."""
    if _real_params(params):
        axis = (z.imag == 0) & (z.real > 0)
        value = np.where(axis, value.real + 0j, value)
    return value


def _shape_result(value, err, used, conv, method, shape):
    if shape == ():
        m = method[0] if isinstance(method, np.ndarray) else method
        return SeriesResult(complex(value[0]), float(err[0]), int(used[0]), bool(conv[0]), m)
    if isinstance(method, np.ndarray):
        method = method.reshape(shape)
    return SeriesResult(value.reshape(shape), err.reshape(shape), used.reshape(shape), conv.reshape(shape), method)


def _check_series_domain(z, params):
    if params.m == 0:
        raise NotApplicableError("m = 0: no right-hand poles, the residue series is empty")
    mu_ = mu(params)
    if mu_ < -1e-12:
        raise DomainError(f"residue series diverges for mu < 0 (mu={mu_:.6g})")
    if abs(mu_) <= 1e-12 and np.any(np.abs(z) >= 1.0 / beta(params)):
        raise DomainError("mu = 0 requires |z| < 1/beta")


def _series_rows(z, params, ctl):
    """Residue series for each entry of 1-d ``z``.

    Returns value, error estimate, terms used, converged, overflowed.
    Overflowing rows are flagged instead of raising.
    """
    logz = np.log(z)
    nz = z.size
    value = np.zeros(nz, dtype=complex)
    err = np.zeros(nz)
    used = np.zeros(nz, dtype=int)
    conv = np.ones(nz, dtype=bool)
    over = np.zeros(nz, dtype=bool)
    # Rows go in chunks to keep the (rows x terms) work arrays bounded.
    chunk = 256
    for b, bs in params.lower[: params.m]:
        for i in range(0, nz, chunk):
            sl = slice(i, i + chunk)
            v, e, u, c, o = _pole_row(z[sl], logz[sl], b, bs, params, ctl)
            value[sl] += v
            err[sl] += e
            used[sl] += u
            conv[sl] &= c
            over[sl] |= o
    return value, err, used, conv, over


@lru_cache(maxsize=256)
def _integer_steps(params, bs, max_step=4):
    """``(offset, slope, sign, n)`` per gamma factor when one step along a pole
    family of slope ``bs`` moves every factor argument by an integer ``n``;
    None otherwise."""
    out = []
    for c0, d, sign in _factors(params):
        n = d / bs
        if abs(n - round(n)) > 1e-15 or abs(n) > max_step:
            return None
        out.append((c0, d, sign, int(round(n))))
    return tuple(out)


def _term_ratios(s, steps):
    """chi(s + 1/bs) / chi(s) as a rational function, for each ``s``.

    Gamma(w + n) / Gamma(w) is a finite product, and the regularised
    residue coefficients at poles obey the same ratios.
    """
    ratio = np.ones(s.shape, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        for c0, d, sign, n in steps:
            w = c0 + d * s
            if not np.any(w.imag):
                # complex division rounds more than real division
                w = w.real
            if n > 0:
                r = np.prod([w + i for i in range(n)], axis=0)
            elif n < 0:
                r = 1.0 / np.prod([w - i for i in range(1, -n + 1)], axis=0)
            else:
                continue
            ratio = ratio * r if sign > 0 else ratio / r
    return ratio


def _neumaier(x, upto):
    total = np.zeros(x.shape[0])
    carry = np.zeros(x.shape[0])
    for j in range(int(upto.max()) + 1):
        t = np.where(j <= upto, x[:, j], 0.0)
        u = total + t
        carry += np.where(np.abs(total) >= np.abs(t), (total - u) + t, (t - u) + total)
        total = u
    return total + carry


def _compensated_sum(T, upto):
    """Row sums of ``T[:, :upto+1]`` with Neumaier compensation, so that
    cancelling terms cost about one rounding of the result."""
    with np.errstate(invalid="ignore", over="ignore"):
        return _neumaier(T.real, upto) + 1j * _neumaier(T.imag, upto)


def _pole_row(z, logz, b, bs, params, ctl):
    nz = z.size
    K = min(ctl.max_terms, 64)
    while True:
        k = np.arange(K)
        s = (b + k) / bs
        logc, order, sgn = _log_chi(s, params)
        if np.any(order >= 2):
            bad = s[order >= 2][0]
            raise PoleError(f"non-simple pole at s={bad}; the residue series does not apply")
        live = order == 1
        L = logc[None, :] + s[None, :] * logz[:, None]
        L = np.where(live[None, :], L, -np.inf)
        over = np.any(L.real > _LOG_OVERFLOW, axis=1)
        L[over] = -np.inf
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            # Residue of chi at a right-hand pole; the contour runs around
            # these poles clockwise, hence the sign.
            T = -sgn[None, :] * np.exp(L)
            # exp(L) inherits an absolute error of about eps*|L| in L.
            mag = np.where(np.isfinite(L), np.abs(L), 0.0)
            steps = _integer_steps(params, bs)
            if steps is not None and K > 1 and np.all(live):
                # Commensurate slopes: a running product of exact ratios
                # keeps each term to a few ulps per step, where exp(L)
                # would lose eps*|L|.
                ratio = _term_ratios(s[:-1], steps)
                if np.all(np.isfinite(ratio) & (ratio != 0)):
                    # exp(log z) is off by eps*|log z|, a bias every step would repeat
                    inv = 1.0 / bs
                    zstep = z ** int(round(inv)) if abs(inv - round(inv)) < 1e-15 and 1 <= inv <= 4 else np.exp(logz / bs)
                    walk = np.cumprod(ratio[None, :] * zstep[:, None], axis=1)
                    T = np.where(np.isfinite(L), T[:, :1] * np.concatenate([np.ones((nz, 1)), walk], axis=1), 0.0)
                    mag = np.where(np.isfinite(L), np.abs(L[:, :1]) + 2.0 * k[None, :], 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            S = np.cumsum(T, axis=1)
        aT = np.abs(T)
        small = aT <= np.maximum(0.1 * ctl.tol * np.abs(S), ctl.underflow_floor)
        if K >= _RUN:
            cs = np.cumsum(small, axis=1)
            win = cs[:, _RUN - 1:].copy()
            win[:, 1:] -= cs[:, : K - _RUN]
            hits = win == _RUN
            found = hits.any(axis=1) & ~over
            stop = np.where(found, hits.argmax(axis=1) + _RUN - 1, K - 1)
        else:
            found = np.zeros(nz, dtype=bool)
            stop = np.full(nz, K - 1)
        if np.all(found | over) or K >= ctl.max_terms:
            break
        K = min(2 * K, ctl.max_terms)
    value = _compensated_sum(T, stop)
    lo = np.maximum(stop - _RUN + 1, 0)
    idx = np.arange(K)[None, :]
    window = (idx >= lo[:, None]) & (idx <= stop[:, None])
    trunc = np.max(np.where(window, aT, 0.0), axis=1)
    with np.errstate(over="ignore"):
        # Sums near the overflow guard may reach inf: the row is then unconverged.
        absum = np.sum(np.where(idx <= stop[:, None], aT * (2.0 + mag), 0.0), axis=1)
    err = trunc + 2 * _EPS * absum
    conv = found & (err <= np.maximum(ctl.tol * np.abs(value), ctl.underflow_floor))
    value = np.where(over, np.nan, value)
    err = np.where(over, np.inf, err)
    return value, err, stop + 1, conv, over


def eval_series(z, params, ctl=None):
    """Sum the residue series at ``z`` (scalar or array).

    Stops when 20 consecutive terms fall below a tenth of ``ctl.tol``
    times the running sum.  ``converged`` is False when ``max_terms`` runs
    out or rounding in the terms swamps the tolerance.

    Raises
    ------
    DomainError
        ``z == 0``, or the series does not converge for this set/argument.
    PoleError
        Colliding poles make the residues non-simple.
    SeriesDivergenceError
        Terms overflow double precision.
    """
    ctl = ctl or SeriesControl()
    flat, shape = _prepare_z(z)
    _check_series_domain(flat, params)
    value, err, used, conv, over = _series_rows(flat, params, ctl)
    if np.any(over):
        raise SeriesDivergenceError(f"series terms overflow at z={flat[over][0]}")
    value = _project_real(value, flat, params)
    return _shape_result(value, err, used, conv, "series", shape)


# ---------------------------------------------------------------------------
# Contour quadrature


def _pole_families(params):
    """Yield (first location, step, side) for each family of gamma poles."""
    for b, bs in params.lower[: params.m]:
        yield b / bs, 1.0 / bs, "right"
    for a, as_ in params.upper[: params.n]:
        yield (a - 1) / as_, -1.0 / as_, "left" if as_ > 0 else "right"


@lru_cache(maxsize=256)
def _effective_strip(params, window=60):
    """Strip between the nearest genuine left and right poles of chi.

    Poles cancelled by a denominator gamma are skipped.  A side with no
    genuine pole within ``window`` steps is reported as infinite.
    """
    left, right = -np.inf, np.inf
    for first, step, side in _pole_families(params):
        locs = first + step * np.arange(window)
        _, order, _ = _log_chi(locs, params)
        real = locs[order > 0].real
        if real.size:
            if side == "left":
                left = max(left, real.max())
            else:
                right = min(right, real.min())
    return left, right


@lru_cache(maxsize=256)
def series_is_complete(params, window=60):
    """True when every pole right of the contour is a residue-series pole.

    Negative upper slopes in the first ``n`` pairs put poles on the right
    that the residue series does not visit; unless a denominator cancels
    them the series then misses terms.
    """
    for a, as_ in params.upper[: params.n]:
        if as_ < 0:
            locs = (a - 1) / as_ - np.arange(window) / as_
            _, order, _ = _log_chi(locs, params)
            # poles the series already visits
            visited = np.zeros(locs.shape, dtype=int)
            for b, bs in params.lower[: params.m]:
                w = b - bs * locs
                k = np.round(w.real)
                visited += (k <= 0) & (np.abs(w - k) <= POLE_TOL)
            if np.any(order > visited):
                return False
    return True


@lru_cache(maxsize=256)
def _abscissas(params):
    """Candidate vertical lines ``(c, d)``, ``d`` the distance to the nearest pole.

    Several are offered so that each argument can take the line on which
    the integrand is smallest: near the left poles for large ``|z|`` (where
    H decays), near the right poles for small ``|z|``, and far to the left
    when there are no genuine left poles at all (Gaussian-like decay).
    """
    left, right = _effective_strip(params)
    if not left < right - 1e-9:
        raise ContourError("no vertical line separates the left and right poles")
    if np.isinf(left) and np.isinf(right):
        return ((0.0, 0.5),)
    # Offsets grow geometrically (ratio 2**(1/4)) out to 2**11, far enough
    # to reach arguments whose H value underflows.
    offsets = np.unique(np.round(2.0 ** (np.arange(45) / 4) - 1, 6))
    if np.isinf(left):
        return tuple((right - 0.5 - o, 0.5) for o in offsets)
    if np.isinf(right):
        return tuple((left + 0.5 + o, 0.5) for o in offsets)
    d = min(0.5, (right - left) / 2)
    cands = [(left + d, d), (right - d, d)]
    if right - left > 2.0:
        cands.insert(1, ((left + right) / 2, d))
    return tuple(cands)


@lru_cache(maxsize=256)
def _shifted_lines(params, max_poles=40):
    """Lines left of the strip that cross the first ``k`` genuine left poles.

    Returns ``(c, d, poles)`` triples; ``poles`` holds the crossed pole
    locations, whose residues are added back after integrating along
    ``Re s = c``.  For large ``|z|`` the factor ``|z|**c`` makes the
    shifted integral much smaller than the value, so far less cancels.
    Only simple poles are crossed.
    """
    left, _ = _effective_strip(params)
    if np.isinf(left):
        return ()
    locs = [
        (a - 1 - k) / as_
        for a, as_ in params.upper[: params.n]
        if as_ > 0
        for k in range(max_poles + 1)
    ]
    locs = np.array(sorted(set(np.round(np.array(locs, dtype=complex), 12)), key=lambda v: -v.real))
    _, order, _ = _log_chi(locs, params)
    poles = locs[order > 0]
    simple = order[order > 0] == 1
    out = []
    for k in range(1, poles.size):
        if not simple[k - 1]:
            break
        hi, lo = poles[k - 1].real, poles[k].real
        if hi - lo < 1e-3:
            continue
        d = min(0.5, (hi - lo) / 2)
        out.append(((hi + lo) / 2, d, tuple(poles[:k])))
    return tuple(out)


@lru_cache(maxsize=256)
def _lines(params):
    """All vertical lines offered to ``eval_contour``: ``(c, d, crossed poles)``."""
    return tuple((c, d, ()) for c, d in _abscissas(params)) + _shifted_lines(params)


@lru_cache(maxsize=256)
def _line_tables(params):
    """Per line: ``log|chi(c)|`` (inf on a pole) and ``(poles, log residue, sign)``."""
    lines = _lines(params)
    cs = np.array([c for c, _, _ in lines])
    logv, order, _ = _log_chi(cs.astype(complex), params)
    base = np.where(order == 0, logv.real, np.inf)
    crossed = []
    for _, _, poles in lines:
        pts = np.array(poles, dtype=complex)
        lv, _, sgn = _log_chi(pts, params) if poles else (pts, None, pts)
        crossed.append((pts, lv, sgn))
    return cs, base, tuple(crossed)


def _residues(index, lz, params):
    """Left-pole residues of ``chi(s) z**s`` for the poles line ``index`` crosses, with a rounding estimate."""
    pts, logv, sgn = _line_tables(params)[2][index]
    if not pts.size:
        return np.zeros(lz.size, dtype=complex), np.zeros(lz.size)
    g = logv[None, :] + pts[None, :] * lz[:, None]
    with np.errstate(under="ignore", over="ignore"):
        terms = sgn[None, :] * np.exp(g)
    rnd = 4 * _EPS * (np.abs(terms) * (1.0 + np.abs(g))).sum(axis=1)
    return terms.sum(axis=1), rnd


def _choose_abscissa(params, lz):
    """Index into ``_lines`` minimising the largest piece of the result.

    For a plain line that is the integrand at the real axis,
    ``|chi(c)| |z|**c``; a shifted line also counts its largest residue.
    """
    cs, base, crossed = _line_tables(params)
    if cs.size == 1:
        return np.zeros(lz.size, dtype=int)
    phi = base[None, :] + cs[None, :] * lz.real[:, None]
    for i, (pts, logv, _) in enumerate(crossed):
        if pts.size:
            biggest = (logv[None, :] + pts[None, :] * lz[:, None]).real.max(axis=1)
            phi[:, i] = np.maximum(phi[:, i], biggest)
    return np.argmin(phi, axis=1)


def _path_abscissa(params, absz):
    """Abscissa for the bent path: one of the two strip-edge candidates."""
    cands = _abscissas(params)
    left, right = _effective_strip(params)
    if np.isinf(left) or np.isinf(right) or len(cands) == 1:
        return cands[0]
    return cands[0] if absz >= 1.0 else cands[-1]


def _panels(start, length, count):
    left = start + length * np.arange(count)
    y = left[:, None] + 0.5 * length * (1.0 + _GL_X)[None, :]
    w = np.broadcast_to(0.5 * length * _GL_W, y.shape)
    return y.ravel(), w.ravel().copy()


def _masked_log_chi(s, params):
    logv, order, sgn = _log_chi(s, params)
    if np.any(order > 0):
        raise ContourError(f"integration path meets a pole of chi at s={s[order > 0][0]}")
    return np.where(order < 0, -np.inf, logv + np.where(sgn < 0, 1j * np.pi, 0.0))


class _LineRule:
    """Gauss-Legendre nodes on ``c +/- iy``, ``y >= 0``, with log chi cached.

    Shared across every argument evaluated with the same parameter set, so
    the gamma products are computed once per node.
    """

    def __init__(self, params, c, h):
        self.params, self.c, self.h = params, c, h
        self.count = 0
        self.y = np.empty(0)
        self.w = np.empty(0)
        self.logchi = {1: np.empty(0, dtype=complex), -1: np.empty(0, dtype=complex)}
        self._lock = threading.Lock()

    def get(self, side, count):
        with self._lock:
            if count > self.count:
                y, w = _panels(self.count * self.h, self.h, count - self.count)
                for sd in (1, -1):
                    lc = _masked_log_chi(self.c + sd * 1j * y, self.params)
                    self.logchi[sd] = np.concatenate([self.logchi[sd], lc])
                self.y = np.concatenate([self.y, y])
                self.w = np.concatenate([self.w, w])
                self.count = count
            n = 16 * count
            return self.y[:n], self.w[:n], self.logchi[side][:n]


_RULES = OrderedDict()
_RULES_LOCK = threading.Lock()


def _rule(params, c, h):
    key = (params, c, h)
    with _RULES_LOCK:
        rule = _RULES.get(key)
        if rule is None:
            rule = _RULES[key] = _LineRule(params, c, h)
            while len(_RULES) > 32:
                _RULES.popitem(last=False)
        return rule


def _vertical_half(lz, params, c, h, side, rho, max_nodes):
    """Integrate the upper (side=+1) or lower (side=-1) half of the
    vertical line for every log-argument in ``lz``.

    Returns sum, rounding estimate, truncation estimate, node count.
    """
    rule = _rule(params, c, h)
    count = int(math.ceil((60.0 / rho + 20.0 + abs(c)) / h))
    max_count = max(1, max_nodes // 16)
    while True:
        count = min(count, max_count)
        y, w, lchi = rule.get(side, count)
        s = c + side * 1j * y
        total = np.empty(lz.size, dtype=complex)
        rnd = np.empty(lz.size)
        tail = np.empty(lz.size)
        ok = np.empty(lz.size, dtype=bool)
        chunk = max(1, (1 << 21) // y.size)
        for i in range(0, lz.size, chunk):
            g = lchi[None, :] + s[None, :] * lz[i:i + chunk, None]
            with np.errstate(under="ignore", over="ignore", invalid="ignore"):
                f = np.exp(g)
                af = np.abs(f) * w
                mag = np.where(np.isfinite(g), np.abs(g), 0.0)
            pm = af.reshape(af.shape[0], count, 16).max(axis=2)
            peak = pm.max(axis=1)
            last = pm[:, -3:].max(axis=1)
            ok[i:i + chunk] = last <= _TAIL_RATIO * np.maximum(peak, 1e-300)
            total[i:i + chunk] = (f * w).sum(axis=1)
            rnd[i:i + chunk] = 4 * _EPS * (af * (1.0 + mag)).sum(axis=1)
            tail[i:i + chunk] = af[:, -16:].sum(axis=1)
        if np.all(ok) or count >= max_count:
            break
        count *= 2
    scale = 1.0 / (2 * np.pi)
    return total * scale, rnd * scale, np.where(ok, tail, np.inf) * scale, 16 * count


def _saddle_half(zk, lz, params, c, h, side, max_nodes):
    """Half contour for an argument on the edge of the convergence sector.

    Goes along the vertical line up to the saddle height ``y*`` (where the
    gamma asymptotics balance ``|z|``), then leaves on a ray at 45 degrees
    into the right half-plane, where the integrand decays like a Gaussian.
    For ``mu < 0`` the picture is mirrored (``s -> -s``, ``z -> 1/z``) and
    the ray leaves into the left half-plane.
    """
    mu_ = mu(params)
    if abs(mu_) <= 1e-12:
        raise ContourError("bent contour needs mu != 0")
    ratio = abs(zk) / beta(params) if mu_ > 0 else beta(params) / abs(zk)
    mu_ = abs(mu_)
    ystar = max(ratio ** (1.0 / mu_), 4.0)
    freq = mu_ * math.log(ystar) + abs(lz) + 2.0
    hv = min(h, 4.0 / freq)
    if not ystar / hv * 16 <= max_nodes:
        return np.nan, np.inf, np.inf, max_nodes
    count = int(math.ceil(ystar / hv))
    hv = ystar / count
    total = 0j
    rnd = 0.0
    peak = 0.0
    block = 4096
    for start in range(0, count, block):
        nb = min(block, count - start)
        y, w = _panels(start * hv, hv, nb)
        s = c + side * 1j * y
        g = _masked_log_chi(s, params) + s * lz
        with np.errstate(under="ignore", over="ignore", invalid="ignore"):
            f = np.exp(g)
            af = np.abs(f) * w
            mag = np.where(np.isfinite(g), np.abs(g), 0.0)
        total += (f * w).sum()
        rnd += 4 * _EPS * (af * (1.0 + mag)).sum()
        peak = max(peak, af.max(initial=0.0))
    nodes = 16 * count
    direction = np.exp(side * 1j * np.pi / 4)
    if mu(params) < 0:
        direction = -direction.conjugate()
    hr = min(max(0.5 * math.sqrt(ystar / mu_), hv), 50.0)
    origin = c + side * 1j * ystar
    ray = 0j
    quiet = 0
    r0 = 0.0
    tail = np.inf
    while nodes < max_nodes:
        r, w = _panels(r0, hr, 32)
        s = origin + r * direction
        g = _masked_log_chi(s, params) + s * lz
        with np.errstate(under="ignore", over="ignore", invalid="ignore"):
            f = np.exp(g)
            af = np.abs(f) * w
            mag = np.where(np.isfinite(g), np.abs(g), 0.0)
        ray += (f * w).sum()
        rnd += 4 * _EPS * (af * (1.0 + mag)).sum()
        nodes += r.size
        pm = af.reshape(32, 16).max(axis=1)
        peak = max(peak, pm.max())
        r0 += 32 * hr
        for v in pm:
            quiet = quiet + 1 if v <= _TAIL_RATIO * peak else 0
        if quiet >= 3:
            tail = af[-16:].sum()
            break
    value = total / (2 * np.pi) + side * direction * ray / (2j * np.pi)
    return value, rnd / (2 * np.pi), tail / (2 * np.pi), nodes


def eval_contour(z, params, ctl=None, *, max_nodes=4_000_000):
    """Evaluate H(z) by numerical quadrature of the Mellin-Barnes integral.

    Inside the convergence sector the path is the vertical line through the
    pole-free strip; each half whose decay rate is too slow (real-time
    propagators sit exactly on the sector edge) is replaced by the bent
    saddle path.  ``terms_used`` reports quadrature nodes.
    """
    ctl = ctl or SeriesControl()
    flat, shape = _prepare_z(z)
    lz = np.log(flat)
    lines = _lines(params)
    rate = 0.5 * np.pi * _slope_excess(params)
    rho = {1: rate + lz.imag, -1: rate - lz.imag}
    bent = (rho[1] < _RHO_MIN) | (rho[-1] < _RHO_MIN)
    choice = _choose_abscissa(params, lz)
    value = np.zeros(flat.size, dtype=complex)
    rnd = np.zeros(flat.size)
    tail = np.zeros(flat.size)
    nodes = np.zeros(flat.size, dtype=int)
    for i in np.flatnonzero(bent):
        c, d = _path_abscissa(params, abs(flat[i]))
        for side in (1, -1):
            if rho[side][i] < _RHO_MIN:
                v, r, t, nn = _saddle_half(flat[i], lz[i], params, c, d, side, max_nodes)
            else:
                v, r, t, nn = _vertical_half(lz[i:i + 1], params, c, d, side, rho[side][i], max_nodes)
                v, r, t = v[0], r[0], t[0]
            value[i] += v
            rnd[i] += r
            tail[i] += t
            nodes[i] += nn
    for ci, (c, d, poles) in enumerate(lines):
        sel = ~bent & (choice == ci)
        if not np.any(sel):
            continue
        res, res_rnd = _residues(ci, lz[sel], params)
        value[sel] += res
        rnd[sel] += res_rnd
        # Resolve the z**(iy) oscillation; halve h per octave of log|z|.
        hmax = 4.0 / np.maximum(np.abs(lz), 1.0)
        steps = np.maximum(0, np.ceil(np.log2(d / np.minimum(hmax, d)))).astype(int)
        for j in np.unique(steps[sel]):
            grp = sel & (steps == j)
            h = d / 2.0 ** j
            for side in (1, -1):
                v, r, t, nn = _vertical_half(lz[grp], params, c, h, side, rho[side][grp].min(), max_nodes)
                value[grp] += v
                rnd[grp] += r
                tail[grp] += t
                nodes[grp] += nn
    err = rnd + tail
    conv = np.isfinite(err) & (err <= np.maximum(ctl.tol * np.abs(value), ctl.underflow_floor))
    value = _project_real(value, flat, params)
    return _shape_result(value, err, nodes, conv, "contour", shape)


def evaluate(z, params, ctl=None, *, max_nodes=4_000_000):
    """Evaluate H(z), choosing the method per argument.

    The residue series is tried first when it is complete for this set and
    converges for this argument; otherwise, or when the series fails to
    reach the tolerance (typically large ``|z|``, where alternating terms
    cancel catastrophically), the contour quadrature is used.  The choice
    is explicit in ``result.method``.
    """
    ctl = ctl or SeriesControl()
    flat, shape = _prepare_z(z)
    nz = flat.size
    value = np.full(nz, np.nan, dtype=complex)
    err = np.full(nz, np.inf)
    used = np.zeros(nz, dtype=int)
    conv = np.zeros(nz, dtype=bool)
    method = np.full(nz, "series", dtype=object)
    mu_ = mu(params)
    use_series = params.m > 0 and series_is_complete(params) and mu_ >= -1e-12
    inside = np.ones(nz, dtype=bool)
    if use_series and abs(mu_) <= 1e-12:
        inside = np.abs(flat) < 1.0 / beta(params)
    if use_series and np.any(inside):
        try:
            rows = _series_rows(flat[inside], params, ctl)
        except PoleError:
            pass
        else:
            value[inside], err[inside], used[inside], conv[inside] = rows[:4]
    todo = ~conv
    if np.any(todo):
        try:
            res = eval_contour(flat[todo], params, ctl, max_nodes=max_nodes)
        except ContourError:
            # keep unconverged series values, but never hand back a bare NaN
            if np.any(np.isnan(value[todo])):
                raise
        else:
            idx = np.flatnonzero(todo)
            better = res.converged | (res.abs_error_estimate < err[idx])
            idx = idx[better]
            value[idx] = res.value[better]
            err[idx] = res.abs_error_estimate[better]
            used[idx] = res.terms_used[better]
            conv[idx] = res.converged[better]
            method[idx] = "contour"
    value = _project_real(value, flat, params)
    return _shape_result(value, err, used, conv, method, shape)


# ---------------------------------------------------------------------------
# Parameter identities


def transform_reduce(params):
    """Cancel a first upper pair that reappears as the last lower pair."""
    if params.n < 1 or params.q <= params.m or not params.upper:
        raise NotApplicableError("need n >= 1 and q > m")
    if params.upper[0] != params.lower[-1]:
        raise NotApplicableError("first upper pair does not match the last lower pair")
    return HParams(params.m, params.n - 1, params.upper[1:], params.lower[:-1])


def transform_invert(params):
    """Parameters of H at ``1/z``: ``(1-b, B)`` up, ``(1-a, A)`` down, m and n swapped."""
    return HParams(
        params.n,
        params.m,
        tuple((1 - b, s) for b, s in params.lower),
        tuple((1 - a, s) for a, s in params.upper),
    )


def transform_scale(params, k):
    """Multiply every slope by ``k > 0``; ``H(z)/k`` becomes ``H'(z**k)``."""
    if not k > 0:
        raise ParameterError("scale factor must be positive")
    return HParams(
        params.m,
        params.n,
        tuple((a, s * k) for a, s in params.upper),
        tuple((b, s * k) for b, s in params.lower),
    )


def transform_power_shift(params, sigma):
    """Absorb ``z**sigma`` into the parameters: ``a -> a + sigma*A``, ``b -> b + sigma*B``."""
    return HParams(
        params.m,
        params.n,
        tuple((a + sigma * s, s) for a, s in params.upper),
        tuple((b + sigma * s, s) for b, s in params.lower),
    )


def transform_laplace_lift(params, alpha_exp, r):
    """Parameters of ``integral_0^inf x**(alpha_exp-1) exp(-x) H(w x**r) dx`` as a function of ``w``.

    Prepends ``(1 - alpha_exp, r)`` to the upper pairs and increments ``n``.
    """
    if r == 0:
        raise PreconditionError("r must be nonzero")
    if params.m == 0:
        raise PreconditionError("need m >= 1")
    lowest = min((b / s).real for b, s in params.lower[: params.m])
    if not complex(alpha_exp).real + r * lowest > 0:
        raise PreconditionError(
            f"Re alpha + r * min Re(b/B) must be positive, got {complex(alpha_exp).real + r * lowest:.6g}"
        )
    return HParams(params.m, params.n + 1, ((1 - alpha_exp, r),) + params.upper, params.lower)
