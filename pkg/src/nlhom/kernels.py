"""Integrable jump kernels: moments, periodization, sampling.

The nonlocal part of the Part I operators is built from an even, nonnegative,
integrable kernel c with finite second moment.  Kernels are truncated at a
radius R chosen so the neglected tail mass is below a configured tolerance;
moments are computed by adaptive quadrature and cached on the kernel object.

Periodization: the scaled kernel (1/eps) c(z/eps) is wrapped onto the unit
torus by summing translates.  This is what turns the full-line convolution of
the multiscale operator into a circular convolution on periodic grids.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .torus import TorusGrid

__all__ = [
    "IntegrableKernel",
    "kernel_moments",
    "periodize_kernel",
    "wrapped_kernel_samples",
    "box_kernel",
    "laplace_kernel",
    "gaussian_kernel",
    "triangle_kernel",
]

_SYMMETRY_TOL = 1e-12
_TAIL_TOL = 1e-10


@dataclass(frozen=True)
class IntegrableKernel:
    """Even nonnegative jump kernel c(z) truncated at radius R.

    Parameters
    ----------
    evaluate : callable
        Vectorized z -> c(z) >= 0; must vanish for |z| > R up to tail_tol.
    truncation_radius : float
        Support radius R > 0.
    breakpoints : sequence of float
        Interior points of [0, R] where c is not smooth (quadrature panels
        split there; e.g. the edge of a box kernel).
    name : str
        Label used in reports and fixture lookups.
    sampler : callable, optional
        rng, size -> jump sizes distributed as c/a1.  Built-in kernels supply
        exact samplers; generic kernels fall back to inverse-CDF tables in
        the particle module.

    Moments (mass a1, first absolute moment s1, second moment s2) are
    computed by adaptive quadrature at construction.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    truncation_radius: float
    breakpoints: Sequence[float] = ()
    name: str = "kernel"
    sampler: Optional[Callable] = None
    a1: float = field(init=False, default=0.0)
    s1: float = field(init=False, default=0.0)
    s2: float = field(init=False, default=0.0)

    def __post_init__(self):
        R = float(self.truncation_radius)
        if not (R > 0):
            raise ValueError("truncation radius must be positive")
        # symmetry and nonnegativity probes
        z = np.linspace(0.013, R * 0.999, 37)
        cp, cm = self.evaluate(z), self.evaluate(-z)
        if np.max(np.abs(cp - cm)) > _SYMMETRY_TOL * max(1.0, np.max(np.abs(cp))):
            raise ValueError("kernel is not even: c(z) != c(-z)")
        if np.min(cp) < 0 or self.evaluate(np.zeros(1))[0] < 0:
            raise ValueError("kernel must be nonnegative")
        # tail probe just beyond R
        tail = np.max(np.abs(self.evaluate(np.array([1.001 * R, 1.5 * R, 3.0 * R]))))
        if tail > _TAIL_TOL:
            raise ValueError("kernel does not vanish beyond its truncation radius")
        a1, s1, s2 = kernel_moments(self)
        if a1 <= 0:
            raise ValueError("kernel mass must be positive")
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "s2", s2)

    def __repr__(self):
        return "IntegrableKernel(%s, R=%g, a1=%.6g, s2=%.6g)" % (
            self.name,
            self.truncation_radius,
            self.a1,
            self.s2,
        )


def kernel_moments(kernel, rel_tol=1e-10):
    """(a1, s1, s2) = integrals of c, |z| c, z^2 c by adaptive quadrature.

    Quadrature runs over [0, R] (the kernel is even) on panels split at the
    declared breakpoints; relative accuracy rel_tol.
    """
    R = float(kernel.truncation_radius)
    pts = sorted(p for p in kernel.breakpoints if 0.0 < p < R)

    def integrate(weight):
        val, err = quad(
            lambda z: weight(z) * kernel.evaluate(np.array([z]))[0],
            0.0,
            R,
            points=pts or None,
            limit=400,
            epsabs=1e-14,
            epsrel=rel_tol * 1e-2,
        )
        if not np.isfinite(val):
            raise RuntimeError("kernel moment quadrature failed to converge")
        return 2.0 * val  # even integrand over [-R, R]

    a1 = integrate(lambda z: 1.0)
    s1 = integrate(lambda z: abs(z))
    s2 = integrate(lambda z: z * z)
    return a1, s1, s2


def wrapped_kernel_samples(kernel, z_points, period, eps=1.0):
    """Samples of sum_k (1/eps) c((z + k*period)/eps) at the given points.

    The workhorse behind all discrete convolutions: wrapping the scaled
    kernel onto a periodic domain of the given period.  The translate range
    covers the full truncated support.
    """
    z = np.asarray(z_points, dtype=float)
    R_scaled = float(kernel.truncation_radius) * eps
    kmax = int(np.ceil((R_scaled + period) / period))
    out = np.zeros_like(z)
    for k in range(-kmax, kmax + 1):
        arg = (z + k * period) / eps
        mask = np.abs(arg) <= kernel.truncation_radius
        if np.any(mask):
            out[mask] += kernel.evaluate(arg[mask]) / eps
    return out


def periodize_kernel(kernel, grid, eps=None):
    """Wrapped-sum periodization of (1/eps) c(z/eps) on the unit-torus grid.

    Returns the sample vector used by circular convolution; the discrete mass
    h * sum(samples) reproduces a1 (trapezoid-consistently, so within 1e-8
    for the built-in kernels on admissible grids).

    Raises if the scaled support exceeds half the unit period: the scaled
    kernel must fit the torus without self-overlap.  Cell problems, which
    wrap the unscaled kernel with arbitrary support, use
    :func:`wrapped_kernel_samples` directly.
    """
    scale = 1.0 if eps is None else float(getattr(eps, "value", eps))
    if scale * kernel.truncation_radius > 0.5 + 1e-12:
        raise ValueError(
            "scaled kernel support %.3g exceeds half the unit period"
            % (scale * kernel.truncation_radius)
        )
    return wrapped_kernel_samples(kernel, grid.x, 1.0, eps=scale)


# ---------------------------------------------------------------------------
# built-in kernels
# ---------------------------------------------------------------------------


def box_kernel(half_width=1.0, height=0.5):
    """c = height on |z| < half_width, with midpoint values at the edges.

    The midpoint (half-height) convention at the jump makes grid sampling
    trapezoid-exact: the default box periodized at unit scale is identically
    one on the torus, and discrete masses match a1 exactly on commensurate
    grids.
    """
    w, c0 = float(half_width), float(height)

    def evaluate(z):
        az = np.abs(np.asarray(z, dtype=float))
        out = np.where(az < w, c0, 0.0)
        return np.where(az == w, 0.5 * c0, out)

    def sampler(rng, size):
        return rng.uniform(-w, w, size=size)

    return IntegrableKernel(
        evaluate, w, breakpoints=(w * 0.5, w), name="box", sampler=sampler
    )


def laplace_kernel(rate=1.0, radius=40.0):
    """c(z) = (rate/2) e^{-rate |z|}, truncated where the tail is < 1e-10."""

    r = float(rate)

    def evaluate(z):
        az = np.abs(np.asarray(z, dtype=float))
        return np.where(az <= radius, 0.5 * r * np.exp(-r * az), 0.0)

    def sampler(rng, size):
        u = rng.exponential(scale=1.0 / r, size=size)
        return u * rng.choice((-1.0, 1.0), size=size)

    return IntegrableKernel(evaluate, radius, breakpoints=(1.0 / r,), name="laplace",
                            sampler=sampler)


def gaussian_kernel(width=0.22, radius=None, mass=1.0):
    """Truncated-Gaussian kernel: smooth, short support, spectrally friendly.

    The default width keeps the support inside half a period even after the
    coarsest scaling used in the experiments (eps = 1/4), while the cutoff
    sits ~8.5 sigma out so the truncation error (~1e-16 relative) is far
    below every tolerance in the package.
    """
    s = float(width)
    R = 8.5 * s if radius is None else float(radius)
    amp = mass / (s * np.sqrt(2.0 * np.pi))

    def evaluate(z):
        z = np.asarray(z, dtype=float)
        return np.where(np.abs(z) <= R, amp * np.exp(-0.5 * (z / s) ** 2), 0.0)

    def sampler(rng, size):
        # rejection-free in practice: resample the negligible tail mass
        out = rng.normal(scale=s, size=size)
        bad = np.abs(out) > R
        while np.any(bad):
            out[bad] = rng.normal(scale=s, size=int(bad.sum()))
            bad = np.abs(out) > R
        return out

    return IntegrableKernel(evaluate, R, breakpoints=(s, 3 * s), name="gaussian",
                            sampler=sampler)


def triangle_kernel(half_width):
    """c(z) = (1/w) max(0, 1 - |z|/w): unit mass, support [-w, w].

    With w equal to one grid step its periodization is the discrete delta.
    """
    w = float(half_width)

    def evaluate(z):
        z = np.asarray(z, dtype=float)
        return np.maximum(0.0, 1.0 - np.abs(z) / w) / w

    def sampler(rng, size):
        u, v = rng.uniform(size=size), rng.uniform(size=size)
        return w * (u + v - 1.0)  # sum of two uniforms is triangular

    return IntegrableKernel(evaluate, w, breakpoints=(0.5 * w,), name="triangle",
                            sampler=sampler)
