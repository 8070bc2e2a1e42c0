"""Spectral calculus on the unit torus.

Everything downstream (cell problems, operator assembly, correctors) lives on
equispaced periodic grids, so derivatives, convolutions and the periodic
fractional Laplacian are all realized as Fourier multipliers.  All torus
integrals are h-weighted sums on the grid, which is spectrally accurate for
smooth periodic integrands and consistent with the FFT representation.

Conventions
-----------
* A field f on ``TorusGrid(n)`` is represented by its values at x_j = j/n.
* Spectral coefficients are Fourier-series coefficients: f(x) = sum_k c_k
  e^{2 pi i k x} with c_k = FFT(values)[k] / n, k = -n/2+1, ..., n/2.
* Multiplier operators act as c_k -> s(k) c_k.  For odd derivative orders the
  (unpaired) Nyquist mode is zeroed, the standard choice that keeps real
  fields real; all fields used here are effectively band-limited well below
  Nyquist so this is exact in practice.
* Operators mapping constants to constants do so exactly (k = 0 handled
  explicitly where the symbol would be singular or ambiguous).
"""

import numpy as np
from scipy.linalg import circulant

TWO_PI = 2.0 * np.pi

__all__ = [
    "TorusGrid",
    "PeriodicField",
    "field_from_function",
    "spectral_derivative",
    "fractional_laplacian_periodic",
    "circular_convolution",
    "derivative_matrix",
    "fractional_laplacian_matrix",
    "convolution_matrix",
]


class TorusGrid:
    """Equispaced half-open grid x_j = j h, h = 1/n, on the unit torus.

    Parameters
    ----------
    n : int
        Number of points; must be a power of two and at least 8 (keeps FFTs
        fast and refinement studies trivial).
    """

    __slots__ = ("n", "h", "x")

    def __init__(self, n):
        n = int(n)
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError("grid size must be a power of two >= 8, got %r" % n)
        self.n = n
        self.h = 1.0 / n
        self.x = np.arange(n) * self.h
        self.x.setflags(write=False)

    def wavenumbers(self):
        """Integer wavenumbers in FFT order (0, 1, ..., -1)."""
        return np.fft.fftfreq(self.n, d=self.h).astype(np.int64)

    def refine(self, factor=2):
        return TorusGrid(self.n * factor)

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and other.n == self.n

    def __hash__(self):
        return hash(("TorusGrid", self.n))

    def __repr__(self):
        return "TorusGrid(n=%d)" % self.n


def _multiplier(grid, symbol):
    """Symbol values s(k) on the FFT-ordered wavenumbers, Nyquist-aware."""
    k = grid.wavenumbers()
    return symbol(k)


class PeriodicField:
    """A real 1-periodic function sampled on a :class:`TorusGrid`.

    Values are immutable after construction (the array is copied and marked
    read-only); operations return new fields.  Spectral coefficients are
    computed lazily and cached — immutability guarantees the cache can never
    go stale.
    """

    __slots__ = ("grid", "values", "_coeffs")

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise ValueError(
                "values shape %r does not match grid size %d" % (values.shape, grid.n)
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        v = values.copy()
        v.setflags(write=False)
        self.values = v
        self._coeffs = None

    # -- spectral representation ------------------------------------------

    @property
    def coeffs(self):
        """Fourier-series coefficients c_k = FFT(values)/n, FFT ordering."""
        if self._coeffs is None:
            c = np.fft.fft(self.values) / self.grid.n
            c.setflags(write=False)
            self._coeffs = c
        return self._coeffs

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        vals = np.fft.ifft(np.asarray(coeffs) * grid.n)
        return cls(grid, vals.real)

    def apply_multiplier(self, symbol_values):
        """New field with coefficients s(k) c_k (s in FFT order)."""
        return PeriodicField.from_coeffs(self.grid, self.coeffs * symbol_values)

    # -- calculus -----------------------------------------------------------

    def derivative(self, order=1):
        return spectral_derivative(self, order)

    def mean(self):
        return float(np.mean(self.values))

    def integral(self):
        """h-weighted sum, the torus integral (period = 1 so = mean)."""
        return float(np.sum(self.values) * self.grid.h)

    def l2_norm(self):
        return float(np.sqrt(np.sum(self.values**2) * self.grid.h))

    # -- evaluation off the grid ---------------------------------------------

    def _pruned_modes(self, tol=1e-15):
        c = self.coeffs
        k = self.grid.wavenumbers()
        scale = np.max(np.abs(c))
        if scale == 0.0:
            return np.zeros(1, dtype=np.int64), np.zeros(1, dtype=complex)
        keep = np.abs(c) > tol * scale
        keep[0] = True
        return k[keep], c[keep]

    def evaluate(self, x):
        """Trigonometric interpolation at arbitrary points (vectorized).

        Exact for the band-limited interpolant through the samples; modes with
        negligible coefficients are pruned so evaluation cost tracks the
        field's effective bandwidth, not the grid size.
        """
        x = np.asarray(x, dtype=float)
        k, c = self._pruned_modes()
        nyq = self.grid.n // 2
        out = np.zeros(x.shape, dtype=float)
        for ki, ci in zip(k, c):
            if ki == -nyq:
                # unpaired Nyquist mode: real cosine convention
                out += ci.real * np.cos(TWO_PI * nyq * x)
            else:
                ph = TWO_PI * ki * x
                out += ci.real * np.cos(ph) - ci.imag * np.sin(ph)
        return out

    def shifted(self, z):
        """Field y -> f(y - z), computed by exact spectral phase shift."""
        k = self.grid.wavenumbers().astype(float)
        phase = np.exp(-1j * TWO_PI * k * z)
        nyq = self.grid.n // 2
        phase[nyq] = np.cos(TWO_PI * nyq * z)  # keep the shift real-valued
        return self.apply_multiplier(phase)

    # -- misc ---------------------------------------------------------------

    def with_values(self, values):
        return PeriodicField(self.grid, values)

    def __repr__(self):
        v = self.values
        return "PeriodicField(n=%d, min=%.3g, max=%.3g)" % (
            self.grid.n,
            v.min(),
            v.max(),
        )


def field_from_function(grid, fn):
    """Sample a callable on the grid."""
    return PeriodicField(grid, np.asarray(fn(grid.x), dtype=float))


# ---------------------------------------------------------------------------
# multiplier operators
# ---------------------------------------------------------------------------


def _derivative_symbol(grid, order):
    k = grid.wavenumbers().astype(float)
    sym = (1j * TWO_PI * k) ** order
    if order % 2 == 1:
        sym[grid.n // 2] = 0.0  # unpaired Nyquist mode
    return sym


def spectral_derivative(f, order=1):
    """order-th derivative via the multiplier (2 pi i k)^order."""
    order = int(order)
    if order < 1:
        raise ValueError("derivative order must be a positive integer")
    return f.apply_multiplier(_derivative_symbol(f.grid, order))


def fractional_laplacian_periodic(f, alpha):
    """Periodic fractional Laplacian (-Delta)^{alpha/2}: symbol |2 pi k|^alpha.

    The k = 0 mode maps to 0 (constants are annihilated).  This is the
    normalized convention under which the operator is exactly the generator
    (negated) of the standard symmetric alpha-stable process.
    """
    if not (0.0 < alpha < 2.0):
        raise ValueError("alpha must lie in (0, 2), got %r" % alpha)
    k = f.grid.wavenumbers().astype(float)
    sym = np.abs(TWO_PI * k) ** alpha
    return f.apply_multiplier(sym)


def circular_convolution(f, kernel_samples):
    """h-scaled circular convolution (c * f)(x_i) = h sum_j c(x_i - x_j) f(x_j).

    The h factor makes the discrete convolution the trapezoid-consistent
    quadrature of the periodic convolution integral.
    """
    kernel_samples = np.asarray(kernel_samples, dtype=float)
    if kernel_samples.shape != (f.grid.n,):
        raise ValueError("kernel sample count must equal the grid size")
    out = np.fft.ifft(np.fft.fft(f.values) * np.fft.fft(kernel_samples)).real
    return PeriodicField(f.grid, out * f.grid.h)


# ---------------------------------------------------------------------------
# dense matrix realizations (used by the cell solver's singular systems)
# ---------------------------------------------------------------------------


def _multiplier_matrix(grid, sym):
    """Dense real matrix of a Fourier multiplier operator."""
    eye = np.eye(grid.n)
    cols = np.fft.ifft(np.fft.fft(eye, axis=0) * sym[:, None], axis=0)
    return cols.real


def derivative_matrix(grid, order=1):
    return _multiplier_matrix(grid, _derivative_symbol(grid, order))


def fractional_laplacian_matrix(grid, alpha):
    if not (0.0 < alpha < 2.0):
        raise ValueError("alpha must lie in (0, 2), got %r" % alpha)
    k = grid.wavenumbers().astype(float)
    return _multiplier_matrix(grid, np.abs(TWO_PI * k) ** alpha)


def convolution_matrix(grid, kernel_samples):
    """Matrix of the h-scaled circular convolution (a symmetric circulant
    whenever the kernel samples are even under index negation)."""
    kernel_samples = np.asarray(kernel_samples, dtype=float)
    if kernel_samples.shape != (grid.n,):
        raise ValueError("kernel sample count must equal the grid size")
    return circulant(kernel_samples) * grid.h
