"""Time stepping for the two-scale stochastic PDEs and their limits.

Heterogeneous equations are advanced with a semi-implicit scheme: the stiff
generator (carrying the 1/eps and 1/eps^2 scalings) is treated implicitly
through a preassembled resolvent while the scalar multiplicative noise is
explicit Euler--Maruyama,

    (I - dt T) u_{n+1} = u_n (1 + sigma(x/eps) dW_n).

Homogenized equations use the exact constant-coefficient semigroup on the
grid's Fourier modes composed with the same explicit noise factor, so their
only time-discretization error is in the noise product.

Ensembles march all paths of a chunk in lockstep as the columns of a single
state matrix: every path still sees a strictly serial step sequence, but each
resolvent application becomes one BLAS-3 product, which is what makes the
weak-convergence studies affordable at the dt demanded by the stability rule
(dt <= min(0.1 eps^2, 0.25 dx^2 / max a) for the integrable family,
dt <= 0.1 eps^alpha for the stable family).  Heterogeneous and homogenized
solvers consume identical Brownian increments when the coupling is shared,
which slashes the variance of paired law comparisons.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .coefficients import CoefficientSetII
from .lineops import (LineGrid, gaussian_bump, assemble_T_eps, assemble_V_eps,
                      _cell_trace, _eps_value)
from .particles import RngStream, _step_grid

__all__ = [
    "SpdeConfig", "FieldPath", "initial_profile", "default_test_battery",
    "heterogeneous_dt_limit", "prepare_heterogeneous_I",
    "prepare_homogenized_I", "prepare_heterogeneous_II",
    "prepare_homogenized_II", "prepare_explicit", "step_heterogeneous_I",
    "step_homogenized_I", "step_heterogeneous_II", "step_homogenized_II",
    "run_path", "run_ensemble", "write_snapshot_csv", "write_functional_csv",
]

#: Energy-cap constant C in the monitor max_paths ||u_t||^4 <= C (1 + ||u_0||^4).
#: The multiplicative noise makes the per-path norm lognormal, so the max over
#: an ensemble is heavy-tailed even though the mean obeys a moment bound:
#: pilots measured max ratios ~0.2 (no noise), ~4.3 (64 paths, sigma_bar ~ 1,
#: T = 0.25) and the 2000-path acceptance configs project to O(10^2-10^3).
#: The default therefore sits at 1e4: far beyond any plausible noise
#: excursion of the acceptance runs, yet many orders of magnitude before a
#: genuine scheme blow-up, which is what the abort is for.  Tighten per run
#: via SpdeConfig.energy_cap_C when the noise level is known.
ENERGY_CAP_C = 1.0e4

_PROFILE_NAMES = ("gauss", "double", "indicator")


def initial_profile(grid, name):
    """Named initial conditions, all supported well inside [-L/2, L/2].

    Parameters
    ----------
    grid : LineGrid
        Spatial grid; widths scale with its half-width L.
    name : str
        One of ``"gauss"`` (single bump of width L/10), ``"double"`` (two
        bumps at +-L/6, width L/14), ``"indicator"`` (smoothed indicator of
        [-L/4, L/4], transition width L/40).

    Returns
    -------
    ndarray
        Profile samples; boundary mass is below 1e-12 of the total for
        every named profile.
    """
    L = grid.half_width
    x = grid.x
    if name == "gauss":
        return gaussian_bump(grid, 0.0, L / 10.0)
    if name == "double":
        w = L / 14.0
        return (gaussian_bump(grid, -L / 6.0, w)
                + gaussian_bump(grid, L / 6.0, w))
    if name == "indicator":
        s = L / 40.0
        return 0.5 * (np.tanh((x + L / 4.0) / s) - np.tanh((x - L / 4.0) / s))
    raise ValueError("unknown profile %r; expected one of %r"
                     % (name, _PROFILE_NAMES))


def default_test_battery(grid):
    """Default pairing battery: bump, derivative-of-bump, wide bump.

    Returns
    -------
    labels : list of str
    xi : ndarray, shape (3, n)
        Test functions on the grid.
    xi_d2 : ndarray, shape (3, n)
        Their second derivatives (spectral), stored so path records carry
        both <u, xi> and <u, xi''> for martingale diagnostics.
    """
    w = grid.half_width / 8.0
    bump = gaussian_bump(grid, 0.0, w)
    dbump = grid.apply_derivative(bump, 1) * w  # O(1) amplitude
    wide = gaussian_bump(grid, 0.0, grid.half_width / 4.0)
    xi = np.stack([bump, dbump, wide])
    xi_d2 = np.stack([grid.apply_derivative(row, 2) for row in xi])
    return ["bump", "dbump", "wide"], xi, xi_d2


def heterogeneous_dt_limit(cset, eps, grid):
    """Largest admissible dt for the heterogeneous semi-implicit step.

    Integrable family: min(0.1 eps^2, 0.25 dx^2 / max a) -- the first clause
    resolves the 1/eps^2 jump intensity in time, the second keeps the step
    small enough that a 10x-refined explicit scheme remains a stable
    cross-check.  Stable family: 0.1 eps^alpha resolves the eps^-alpha
    scaling; the fractional resolvent itself is unconditionally stable.
    """
    e = _eps_value(eps)
    if isinstance(cset, CoefficientSetII):
        return 0.1 * e ** cset.alpha
    amax = float(np.max(cset.a.values))
    return min(0.1 * e * e, 0.25 * grid.dx ** 2 / amax)


def _check_dt(dt, limit, label):
    if dt > limit * (1.0 + 1e-9):
        raise ValueError("dt = %g exceeds the %s stability limit %g"
                         % (dt, label, limit))


class _Stepper:
    """Common shape handling: states are (n,) vectors or (n, m) column
    blocks, noise increments scalars or (m,) rows."""

    part = None
    kind = None

    def _noise_factor(self, state, dw, trace):
        if state.ndim == 1:
            return state * (1.0 + trace * dw)
        dw = np.asarray(dw)
        if np.ndim(trace) == 0:
            return state * (1.0 + trace * dw[None, :])
        return state * (1.0 + trace[:, None] * dw[None, :])


class SemiImplicitStepper(_Stepper):
    """Preassembled resolvent step for a heterogeneous generator.

    Parameters
    ----------
    operator : LineOperator
        Dense two-scale generator (T^eps or V^eps).
    sigma_trace : ndarray
        sigma(x/eps) sampled on the line grid.
    dt : float
        Time step; must satisfy the family's stability rule.
    """

    kind = "semi-implicit"

    def __init__(self, operator, sigma_trace, dt, part):
        if operator.matrix is None:
            raise ValueError("semi-implicit stepping needs a dense operator")
        self.operator = operator
        self.grid = operator.grid
        self.sigma_trace = np.asarray(sigma_trace, dtype=float)
        self.dt = float(dt)
        self.part = part
        n = self.grid.n
        # resolvent stored as an explicit inverse: each step is then a single
        # BLAS-3 product over a whole path block
        self._resolvent = np.linalg.inv(np.eye(n) - self.dt * operator.matrix)

    def step(self, state, dw):
        rhs = self._noise_factor(np.asarray(state, dtype=float), dw,
                                 self.sigma_trace)
        return self._resolvent @ rhs


class SpectralStepper(_Stepper):
    """Exact constant-coefficient semigroup step plus explicit noise.

    The semigroup factor acts on the real-FFT modes; the noise enters as the
    scalar multiplier (1 + sigma_bar dW) after the deterministic flow.
    """

    kind = "spectral"

    def __init__(self, grid, factor, sigma_bar, dt, part):
        self.grid = grid
        self._factor = factor
        self.sigma_bar = float(sigma_bar)
        self.dt = float(dt)
        self.part = part

    def step(self, state, dw):
        state = np.asarray(state, dtype=float)
        u_hat = np.fft.rfft(state, axis=0)
        if state.ndim == 1:
            u_hat *= self._factor
        else:
            u_hat *= self._factor[:, None]
        flowed = np.fft.irfft(u_hat, n=self.grid.n, axis=0)
        return self._noise_factor(flowed, dw, self.sigma_bar)


class ExplicitStepper(_Stepper):
    """Plain explicit Euler reference: u + dt T u + sigma u dW.

    Only used as a refined cross-check oracle; conditionally stable, so it
    runs at a fraction of the semi-implicit dt.
    """

    kind = "explicit"

    def __init__(self, operator, sigma_trace, dt, part):
        self.operator = operator
        self.grid = operator.grid
        self.sigma_trace = np.asarray(sigma_trace, dtype=float)
        self.dt = float(dt)
        self.part = part

    def _apply(self, state):
        if self.operator.matrix is not None:
            return self.operator.matrix @ state
        if state.ndim == 1:
            return self.operator.apply(state)
        return np.stack([self.operator.apply(col) for col in state.T], axis=1)

    def step(self, state, dw):
        state = np.asarray(state, dtype=float)
        drifted = state + self.dt * self._apply(state)
        noise = self._noise_factor(state, dw, self.sigma_trace) - state
        return drifted + noise


def prepare_heterogeneous_I(cset, eps, grid, dt):
    """Semi-implicit stepper for the integrable-jump two-scale equation."""
    eps = _eps_value(eps)
    _check_dt(dt, heterogeneous_dt_limit(cset, eps, grid), "integrable-family")
    op = assemble_T_eps(cset, eps, grid)
    sigma_trace = _cell_trace(cset.sigma, grid, eps)
    return SemiImplicitStepper(op, sigma_trace, dt, part="I")


def prepare_homogenized_I(Q, sigma_bar, grid, dt):
    """Exact heat-semigroup stepper for the homogenized integrable limit."""
    if Q <= 0:
        raise ValueError("Q must be positive, got %r" % (Q,))
    omega = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
    factor = np.exp(-Q * omega ** 2 * dt)
    return SpectralStepper(grid, factor, sigma_bar, dt, part="I")


def prepare_heterogeneous_II(cset, eps, grid, dt):
    """Semi-implicit stepper for the stable-family two-scale equation."""
    eps = _eps_value(eps)
    _check_dt(dt, heterogeneous_dt_limit(cset, eps, grid), "stable-family")
    op = assemble_V_eps(cset, eps, grid, dense=True)
    sigma_trace = _cell_trace(cset.sigma, grid, eps)
    return SemiImplicitStepper(op, sigma_trace, dt, part="II")


def prepare_homogenized_II(cell, grid, dt):
    """Exact stable-semigroup stepper for the homogenized stable limit.

    One complex multiplier per mode combines the fractional decay
    exp(-dba |omega|^alpha dt), the advection phase exp(i omega g_bar dt)
    and the zero-order growth exp(f_bar dt); the Nyquist phase is dropped to
    keep the inverse real transform consistent.
    """
    alpha = cell.cset.alpha
    omega = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
    phase = 1j * omega * cell.g_bar
    if grid.n % 2 == 0:
        phase[-1] = 0.0
    factor = np.exp(dt * (-cell.delta_bar_alpha * np.abs(omega) ** alpha
                          + phase + cell.f_bar))
    return SpectralStepper(grid, factor, cell.sigma_bar, dt, part="II")


def prepare_explicit(cset, eps, grid, dt, part):
    """Explicit-Euler reference stepper (refined-scheme oracle)."""
    eps = _eps_value(eps)
    if part == "I":
        op = assemble_T_eps(cset, eps, grid)
    elif part == "II":
        op = assemble_V_eps(cset, eps, grid, dense=True)
    else:
        raise ValueError("part must be 'I' or 'II', got %r" % (part,))
    sigma_trace = _cell_trace(cset.sigma, grid, eps)
    return ExplicitStepper(op, sigma_trace, dt, part=part)


def _checked_step(state, dw, stepper, kind, part):
    if stepper.kind != kind or stepper.part != part:
        raise ValueError("stepper is %s/part %s; expected %s/part %s"
                         % (stepper.kind, stepper.part, kind, part))
    return stepper.step(state, dw)


def step_heterogeneous_I(state, dw, stepper):
    """One semi-implicit step of the integrable-family equation."""
    return _checked_step(state, dw, stepper, "semi-implicit", "I")


def step_homogenized_I(state, dw, stepper):
    """One exact-semigroup step of the homogenized integrable limit."""
    return _checked_step(state, dw, stepper, "spectral", "I")


def step_heterogeneous_II(state, dw, stepper):
    """One semi-implicit step of the stable-family equation."""
    return _checked_step(state, dw, stepper, "semi-implicit", "II")


def step_homogenized_II(state, dw, stepper):
    """One exact-semigroup step of the homogenized stable limit."""
    return _checked_step(state, dw, stepper, "spectral", "II")


def run_path(stepper, u0, increments):
    """Drive one state through a sequence of Brownian increments.

    Parameters
    ----------
    stepper : object with ``step(state, dw)``
    u0 : ndarray, shape (n,) or (n, m)
    increments : ndarray, shape (n_steps,) or (n_steps, m)

    Returns
    -------
    ndarray
        Terminal state.
    """
    state = np.array(u0, dtype=float)
    for dw in increments:
        state = stepper.step(state, dw)
    return state


# ---------------------------------------------------------------------------
# ensemble driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpdeConfig:
    """Run description for a paired heterogeneous/homogenized ensemble.

    Parameters
    ----------
    part : str
        "I" (integrable-jump family) or "II" (stable family).
    eps : Epsilon or float
        Scale separation; reciprocal of an integer.
    grid : LineGrid
        Periodic spatial grid; must tile eps with >= 16 points per cell.
    dt : float
        Time step; must satisfy the family's stability rule (the
        coefficient-dependent clause is enforced when operators are
        prepared).
    T_end : float
        Horizon; the effective step is T_end / ceil(T_end / dt).
    n_paths : int
        Ensemble size.
    seed : int
        Root seed; path j draws from the dedicated stream (seed, j).
    u0 : str or ndarray
        Named profile ("gauss", "double", "indicator") or explicit samples
        with finite, nonzero L2 norm.
    noise_coupling : str
        "shared" feeds both solvers identical increments; "independent"
        gives the homogenized solver the child stream.
    n_save : int
        Number of recorded times (pairings and snapshots), endpoints
        included.
    n_snapshot_paths : int
        Leading paths that retain full field snapshots.
    store_increments : bool
        Keep per-path increment arrays on the records (disable for large
        step counts; the variance check runs either way).
    energy_cap_C : float
        Abort threshold C in max_t ||u_t||^4 <= C (1 + ||u_0||^4).
    chunk_size : int
        Paths marched per state-matrix block.
    """

    part: str
    eps: Union[object, float]
    grid: LineGrid
    dt: float
    T_end: float
    n_paths: int
    seed: int
    u0: Union[str, np.ndarray] = "gauss"
    noise_coupling: str = "shared"
    n_save: int = 9
    n_snapshot_paths: int = 4
    store_increments: bool = True
    energy_cap_C: float = ENERGY_CAP_C
    chunk_size: int = 512

    def __post_init__(self):
        if self.part not in ("I", "II"):
            raise ValueError("part must be 'I' or 'II', got %r" % (self.part,))
        for label, val in (("dt", self.dt), ("T_end", self.T_end)):
            if not val > 0:
                raise ValueError("%s must be positive, got %r" % (label, val))
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.n_save < 2:
            raise ValueError("n_save must be >= 2")
        if self.n_snapshot_paths < 0 or self.chunk_size < 1:
            raise ValueError("n_snapshot_paths/chunk_size out of range")
        if self.noise_coupling not in ("shared", "independent"):
            raise ValueError("noise_coupling must be 'shared' or "
                             "'independent', got %r" % (self.noise_coupling,))
        e = _eps_value(self.eps)
        self.grid.points_per_cell(e)
        if self.part == "I" and self.dt > 0.1 * e * e * (1.0 + 1e-9):
            raise ValueError("dt = %g violates dt <= 0.1 eps^2 = %g"
                             % (self.dt, 0.1 * e * e))
        if isinstance(self.u0, str):
            if self.u0 not in _PROFILE_NAMES:
                raise ValueError("unknown profile %r" % (self.u0,))
        else:
            arr = np.asarray(self.u0, dtype=float)
            if arr.shape != (self.grid.n,):
                raise ValueError("u0 samples must have shape (%d,)"
                                 % self.grid.n)
            if not np.all(np.isfinite(arr)) or not np.any(arr):
                raise ValueError("u0 must be finite with nonzero norm")

    def initial_state(self):
        """Initial profile as a fresh array."""
        if isinstance(self.u0, str):
            return initial_profile(self.grid, self.u0)
        return np.array(self.u0, dtype=float)


@dataclass(frozen=True)
class FieldPath:
    """Record of one solution path.

    Attributes
    ----------
    path_index : int
    times : ndarray, shape (n_rec,)
        Recorded times (first is 0, last is T_end).
    pairings : ndarray, shape (n_rec, n_xi)
        <u_t, xi_j> for the run's battery.
    pairings_d2 : ndarray, shape (n_rec, n_xi)
        <u_t, xi_j''>, kept for martingale diagnostics.
    snapshots : ndarray or None, shape (n_rec, n)
        Full fields at the recorded times (leading paths only).
    increments : ndarray or None, shape (n_steps,)
        Brownian increments consumed by this path's solver.
    increment_var : float
        Sample variance of those increments (target: dt).
    max_norm4 : float
        max_t ||u_t||^4 observed along the path.
    boundary_frac : float
        Largest fraction of |u| mass in the outer 5% of the window at any
        recorded time.
    config : SpdeConfig
    """

    path_index: int
    times: np.ndarray
    pairings: np.ndarray
    pairings_d2: np.ndarray
    snapshots: Optional[np.ndarray]
    increments: Optional[np.ndarray]
    increment_var: float
    max_norm4: float
    boundary_frac: float
    config: SpdeConfig

    def __post_init__(self):
        if self.pairings.shape != self.pairings_d2.shape \
                or self.pairings.shape[0] != self.times.shape[0]:
            raise ValueError("inconsistent record shapes")
        if not (np.all(np.isfinite(self.pairings))
                and np.all(np.isfinite(self.pairings_d2))):
            raise RuntimeError("non-finite pairings on path %d"
                               % self.path_index)


def _prepare_pair(config, cell, cset, dt_eff):
    if config.part == "I":
        het = prepare_heterogeneous_I(cset, config.eps, config.grid, dt_eff)
        hom = prepare_homogenized_I(cell.Q, cell.sigma_bar, config.grid,
                                    dt_eff)
    else:
        het = prepare_heterogeneous_II(cset, config.eps, config.grid, dt_eff)
        hom = prepare_homogenized_II(cell, config.grid, dt_eff)
    return het, hom


def run_ensemble(config, cell, cset, battery=None):
    """March paired heterogeneous/homogenized ensembles.

    Parameters
    ----------
    config : SpdeConfig
    cell : CellSolutionI or CellSolutionII
        Supplies the homogenized coefficients (Q, sigma_bar or the stable
        family's averaged set).
    cset : CoefficientSetI or CoefficientSetII
        Oscillating coefficients for the heterogeneous side.
    battery : (labels, xi, xi_d2), optional
        Pairing battery; defaults to `default_test_battery`.

    Returns
    -------
    (list of FieldPath, list of FieldPath)
        Heterogeneous and homogenized path records, index-aligned, with
        shared Brownian increments when the coupling is shared.

    Raises
    ------
    RuntimeError
        On non-finite states, energy-cap violation, or a pooled increment
        variance further than 6 standard errors from dt.
    """
    grid = config.grid
    n_steps, dt_eff, save_idx = _step_grid(config.T_end, config.dt,
                                           config.n_save)
    het, hom = _prepare_pair(config, cell, cset, dt_eff)
    if battery is None:
        battery = default_test_battery(grid)
    _, xi, xi_d2 = battery
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    xi_d2 = np.atleast_2d(np.asarray(xi_d2, dtype=float))

    u0 = config.initial_state()
    norm0_sq = grid.l2_norm(u0) ** 2
    cap = config.energy_cap_C * (1.0 + norm0_sq ** 2)
    band = np.abs(grid.x) >= 0.95 * grid.half_width
    save_set = {int(k): i for i, k in enumerate(save_idx)}
    times = save_idx * dt_eff
    n_rec = len(save_idx)
    shared = config.noise_coupling == "shared"
    sqrt_dt = np.sqrt(dt_eff)

    # pooled second moment of all consumed increments, checked at the end
    pool_ss = 0.0
    pool_n = 0

    n_xi = xi.shape[0]
    het_paths, hom_paths = [], []
    for lo in range(0, config.n_paths, config.chunk_size):
        hi = min(lo + config.chunk_size, config.n_paths)
        m = hi - lo
        n_snap = min(m, max(0, config.n_snapshot_paths - lo))
        inc_het = np.empty((n_steps, m))
        inc_hom = inc_het if shared else np.empty((n_steps, m))
        for j in range(m):
            stream = RngStream(config.seed, stream=lo + j)
            inc_het[:, j] = stream.generator().standard_normal(n_steps)
            if not shared:
                inc_hom[:, j] = stream.child().generator() \
                    .standard_normal(n_steps)
        inc_het *= sqrt_dt
        if not shared:
            inc_hom *= sqrt_dt

        states = {"het": np.tile(u0[:, None], (1, m)),
                  "hom": np.tile(u0[:, None], (1, m))}
        pair = {s: np.empty((n_rec, n_xi, m)) for s in ("het", "hom")}
        pair2 = {s: np.empty((n_rec, n_xi, m)) for s in ("het", "hom")}
        snaps = {s: np.empty((n_snap, n_rec, grid.n)) for s in ("het", "hom")}
        max4 = {"het": np.zeros(m), "hom": np.zeros(m)}
        bfrac = {"het": np.zeros(m), "hom": np.zeros(m)}

        def record(side, slot):
            U = states[side]
            pair[side][slot] = (xi @ U) * grid.dx
            pair2[side][slot] = (xi_d2 @ U) * grid.dx
            absU = np.abs(U)
            total = absU.sum(axis=0)
            frac = absU[band].sum(axis=0) / np.where(total > 0, total, 1.0)
            np.maximum(bfrac[side], frac, out=bfrac[side])
            if n_snap:
                snaps[side][:, slot, :] = U[:, :n_snap].T

        def monitor(side, k):
            U = states[side]
            nsq = np.einsum("ij,ij->j", U, U) * grid.dx
            if not np.all(np.isfinite(nsq)):
                bad = lo + int(np.argmax(~np.isfinite(nsq)))
                raise RuntimeError(
                    "non-finite %s state on path %d at t = %.6g"
                    % (side, bad, k * dt_eff))
            n4 = nsq ** 2
            np.maximum(max4[side], n4, out=max4[side])
            worst = int(np.argmax(n4))
            if n4[worst] > cap:
                raise RuntimeError(
                    "energy cap violated on %s path %d at t = %.6g: "
                    "||u||^4 = %.6g > %.6g" % (side, lo + worst,
                                               k * dt_eff, n4[worst], cap))

        for side in ("het", "hom"):
            monitor(side, 0)
            record(side, 0)
        for k in range(n_steps):
            states["het"] = het.step(states["het"], inc_het[k])
            states["hom"] = hom.step(states["hom"], inc_hom[k])
            for side in ("het", "hom"):
                monitor(side, k + 1)
            slot = save_set.get(k + 1)
            if slot is not None:
                for side in ("het", "hom"):
                    record(side, slot)

        pool_ss += float(np.sum(inc_het ** 2))
        pool_n += inc_het.size
        if not shared:
            pool_ss += float(np.sum(inc_hom ** 2))
            pool_n += inc_hom.size

        for side, out, inc in (("het", het_paths, inc_het),
                               ("hom", hom_paths, inc_hom)):
            for j in range(m):
                out.append(FieldPath(
                    path_index=lo + j,
                    times=times.copy(),
                    pairings=pair[side][:, :, j].copy(),
                    pairings_d2=pair2[side][:, :, j].copy(),
                    snapshots=snaps[side][j].copy() if j < n_snap else None,
                    increments=inc[:, j].copy()
                    if config.store_increments else None,
                    increment_var=float(np.var(inc[:, j], ddof=1))
                    if n_steps > 1 else 0.0,
                    max_norm4=float(max4[side][j]),
                    boundary_frac=float(bfrac[side][j]),
                    config=config))

    # per-run statistical verification of the consumed noise
    mean_sq = pool_ss / pool_n
    tol = 6.0 * np.sqrt(2.0 / pool_n) * dt_eff
    if abs(mean_sq - dt_eff) > max(tol, 1e-300):
        raise RuntimeError(
            "increment variance %.6g deviates from dt = %.6g beyond 6 SE"
            % (mean_sq, dt_eff))
    return het_paths, hom_paths


def write_snapshot_csv(path_record, out_path):
    """Dump a path's field snapshots as CSV rows (time, x, u)."""
    if path_record.snapshots is None:
        raise ValueError("path %d carries no snapshots"
                         % path_record.path_index)
    grid = path_record.config.grid
    with open(out_path, "w") as fh:
        fh.write("time,x,u\n")
        for t, row in zip(path_record.times, path_record.snapshots):
            for xv, uv in zip(grid.x, row):
                fh.write("%.17g,%.17g,%.17g\n" % (t, xv, uv))


def write_functional_csv(paths, out_path):
    """Dump pairing series as CSV rows (time, path, xi_index, value)."""
    with open(out_path, "w") as fh:
        fh.write("time,path,xi_index,value\n")
        for rec in paths:
            for i, t in enumerate(rec.times):
                for j in range(rec.pairings.shape[1]):
                    fh.write("%.17g,%d,%d,%.17g\n"
                             % (t, rec.path_index, j, rec.pairings[i, j]))
