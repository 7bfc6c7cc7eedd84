"""Pointwise hot loops, compiled with numba when available.

Set INLS_DISABLE_NUMBA=1 to force the pure-numpy versions.  The compiled
reductions only pay off for integer exponents; fractional ones defer to numpy.  Both backends
are deterministic; they are not guaranteed to agree bit for bit with each
other because summation order differs.
"""
import os

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is optional
    njit = None

DISABLED = os.environ.get("INLS_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")
BACKEND = "numpy" if (njit is None or DISABLED) else "numba"


def nonlinear_phase_numpy(u, w, alpha, dt):
    """In place: u <- u * exp(i dt w |u|^alpha)."""
    u *= np.exp(1j * dt * w * np.abs(u) ** alpha)
    return u


def weighted_power_numpy(c, u, p):
    """sum(c * |u|^p)."""
    return float(np.sum(c * np.abs(u) ** p))


def power_density_numpy(w, u, p):
    """w * |u|^p as a new array."""
    return w * np.abs(u) ** p


if njit is not None:

    @njit(cache=True, inline="always")
    def _abs_pow(a2, p):
        # |z|^p from |z|^2; integer and half-integer p avoid pow, which dominates these loops
        n = int(p)
        if n == p:
            return a2 ** (n // 2) * (np.sqrt(a2) if n % 2 else 1.0)
        return a2 ** (0.5 * p)

    @njit(cache=True)
    def _phase_loop(u, w, alpha, dt):
        for i in range(u.size):
            z = u[i]
            ph = dt * w[i] * _abs_pow(z.real * z.real + z.imag * z.imag, alpha)
            c, s = np.cos(ph), np.sin(ph)
            u[i] = complex(z.real * c - z.imag * s, z.real * s + z.imag * c)

    @njit(cache=True)
    def _power_sum(c, u, p):
        acc = 0.0
        for i in range(u.size):
            z = u[i]
            acc += c[i] * _abs_pow(z.real * z.real + z.imag * z.imag, p)
        return acc

    @njit(cache=True)
    def _power_density(w, u, p, out):
        for i in range(u.size):
            z = u[i]
            out[i] = w[i] * _abs_pow(z.real * z.real + z.imag * z.imag, p)

    def nonlinear_phase_numba(u, w, alpha, dt):
        _phase_loop(u.reshape(-1), np.ascontiguousarray(w, dtype=np.float64).reshape(-1),
                    float(alpha), float(dt))
        return u

    def weighted_power_numba(c, u, p):
        if p != int(p):
            # numpy's vectorized pow beats a scalar loop for fractional exponents
            return weighted_power_numpy(c, u, p)
        c = np.broadcast_to(c, u.shape)
        return float(_power_sum(np.ascontiguousarray(c, dtype=np.float64).reshape(-1),
                                np.ascontiguousarray(u).reshape(-1), float(p)))

    def power_density_numba(w, u, p):
        if p != int(p):
            return power_density_numpy(w, u, p)
        out = np.empty(u.shape, dtype=np.float64)
        w = np.broadcast_to(w, u.shape)
        _power_density(np.ascontiguousarray(w, dtype=np.float64).reshape(-1),
                       np.ascontiguousarray(u).reshape(-1), float(p), out.reshape(-1))
        return out

else:  # pragma: no cover
    nonlinear_phase_numba = nonlinear_phase_numpy
    weighted_power_numba = weighted_power_numpy
    power_density_numba = power_density_numpy


if BACKEND == "numba":
    nonlinear_phase = nonlinear_phase_numba
    weighted_power = weighted_power_numba
    power_density = power_density_numba
else:
    nonlinear_phase = nonlinear_phase_numpy
    weighted_power = weighted_power_numpy
    power_density = power_density_numpy
