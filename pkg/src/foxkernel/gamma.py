"""Complex gamma, log-gamma and reciprocal gamma.

All three functions accept Python scalars or numpy arrays and broadcast
elementwise.  Scalar input gives a Python ``complex`` back.

The right half-plane ``Re z >= 1/2`` uses the Lanczos approximation with
Godfrey's coefficients (g = 607/128, 15 terms), evaluated in log form so that
large arguments do not overflow before the final exponential.  The left
half-plane is reached through the reflection formula.  For ``log_gamma``
it is written as

    log Gamma(w) = log(2 pi) - i pi/2 + i pi w - log(1 - exp(2 pi i w)) - log Gamma(1 - w)

for ``Im w >= 0``, which is continuous on the closed upper-left quadrant and
coincides with the principal branch there; it needs no recurrence and does
not overflow for large imaginary parts.
"""
import numpy as np

__all__ = ["PoleError", "POLE_TOL", "gamma", "log_gamma", "reciprocal_gamma", "sinpi"]

POLE_TOL = 1e-12

_LANCZOS_G = 607.0 / 128.0
_LANCZOS_COEF = np.array([
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
])
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG_2PI = np.log(2.0 * np.pi)
_BIG_IMAG = 100.0


class PoleError(ValueError):
    """Argument sits on a pole of the gamma function (a non-positive integer)."""


def _as_complex(z):
    arr = np.asarray(z, dtype=complex)
    return np.atleast_1d(arr), arr.shape


def _out(arr, shape):
    return complex(arr[0]) if shape == () else arr.reshape(shape)


def _near_pole(z, tol=POLE_TOL):
    n = np.round(z.real)
    return (n <= 0) & (np.abs(z - n) <= tol)


def sinpi(z):
    """sin(pi z) with the real part reduced first, so that the result stays
    accurate for large ``|Re z|``."""
    z = np.asarray(z, dtype=complex)
    n = np.round(z.real)
    sign = 1.0 - 2.0 * np.mod(n, 2.0)
    return sign * np.sin(np.pi * (z - n))


def _log_gamma_right(z):
    """Lanczos log-gamma, valid (to ~1e-14) for Re z >= 1/2."""
    w = z - 1.0
    acc = np.full_like(w, _LANCZOS_COEF[0])
    for k in range(1, len(_LANCZOS_COEF)):
        acc = acc + _LANCZOS_COEF[k] / (w + k)
    t = w + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (w + 0.5) * np.log(t) - t + np.log(acc)


def _log_gamma_left(w):
    """Reflection for Re w < 1/2, Im w >= 0."""
    one_minus = -np.expm1(2j * np.pi * w)
    return _LOG_2PI - 0.5j * np.pi + 1j * np.pi * w - np.log(one_minus) - _log_gamma_right(1.0 - w)


def _upper(z):
    # Fold the lower half-plane onto the upper one; conjugate symmetry then
    # holds exactly.  Signed zeros are normalised to +0 so the negative real
    # axis is approached from above.
    lower = z.imag < 0
    w = np.where(lower, np.conj(z), z)
    w = w.real + 1j * np.abs(w.imag)
    return w, lower


def gamma(z):
    """Gamma function of a complex argument.

    Raises
    ------
    PoleError
        If any element lies within ``POLE_TOL`` of a non-positive integer.
    """
    z, shape = _as_complex(z)
    if np.any(_near_pole(z)):
        raise PoleError(f"gamma has a pole at {z[_near_pole(z)].ravel()[0]}")
    w, lower = _upper(z)
    right = w.real >= 0.5
    out = np.empty_like(w)
    with np.errstate(over="ignore", invalid="ignore"):
        out[right] = np.exp(_log_gamma_right(w[right]))
        small = ~right & (w.imag < _BIG_IMAG)
        wl = w[small]
        out[small] = np.pi / (sinpi(wl) * np.exp(_log_gamma_right(1.0 - wl)))
        big = ~right & ~small
        out[big] = np.exp(_log_gamma_left(w[big]))
    out = np.where(lower, np.conj(out), out)
    return _out(out, shape)


def log_gamma(z):
    """Principal branch of log Gamma(z).

    Agrees with ``log(gamma(z))`` up to a multiple of ``2*pi*i``; the branch
    is the one continuous on the plane cut along ``(-inf, 0]`` and real on the
    positive axis.  On the cut itself the value is the limit from above.
    """
    z, shape = _as_complex(z)
    if np.any(_near_pole(z)):
        raise PoleError(f"log_gamma has a pole at {z[_near_pole(z)].ravel()[0]}")
    w, lower = _upper(z)
    right = w.real >= 0.5
    out = np.empty_like(w)
    out[right] = _log_gamma_right(w[right])
    out[~right] = _log_gamma_left(w[~right])
    out = np.where(lower, np.conj(out), out)
    return _out(out, shape)


def reciprocal_gamma(z):
    """1/Gamma(z), an entire function; exactly zero at the poles of Gamma."""
    z, shape = _as_complex(z)
    w, lower = _upper(z)
    right = w.real >= 0.5
    out = np.empty_like(w)
    with np.errstate(over="ignore", invalid="ignore"):
        out[right] = np.exp(-_log_gamma_right(w[right]))
        small = ~right & (w.imag < _BIG_IMAG)
        wl = w[small]
        out[small] = sinpi(wl) * np.exp(_log_gamma_right(1.0 - wl)) / np.pi
        big = ~right & ~small
        out[big] = np.exp(-_log_gamma_left(w[big]))
    out[_near_pole(w)] = 0.0
    out = np.where(lower, np.conj(out), out)
    return _out(out, shape)
