"""Particle-level simulation of the fast-coefficient dynamics.

Three ingredients live here:

* a Chambers--Mallows--Stuck sampler for symmetric alpha-stable increments,
* the jump-diffusion whose generator is the heterogeneous integrable-jump
  operator (Euler drift/diffusion plus exactly thinned jumps), together with
  the Monte-Carlo variance oracle for the effective diffusivity Q,
* the alpha-stable signal of the stable family (Euler drift plus exact
  stable increments).

Paths are grouped into fixed-size chunks; chunk ``c`` of a run draws every
random number from the dedicated stream ``(seed, c)``, so ensembles are
bit-identical for identical configurations regardless of how chunks are
scheduled, and workers splitting the chunk range never share a stream.
Coefficient fields are evaluated through dense periodic lookup tables
(linear interpolation, resolution 8192) whose error is far below Monte
Carlo resolution.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coefficients import Epsilon

__all__ = [
    "RngStream",
    "ParticleEnsemble",
    "sample_stable_increment",
    "simulate_jump_diffusion_I",
    "estimate_Q_monte_carlo",
    "simulate_signal_II",
    "read_paths_binary",
]

_TABLE_RESOLUTION = 8192
_CHUNK_SIZE = 4096
_BINARY_MAGIC = b"NLHOMPE1"


def _eps_value(eps):
    if isinstance(eps, Epsilon):
        return eps.value
    return Epsilon.from_value(float(eps)).value


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Distinct ``(seed, stream)`` pairs yield statistically independent
    generators (numpy ``SeedSequence`` spawn keys); the same pair always
    reproduces bit-identical draws.  ``counter`` derives further
    independent children from the same pair without touching the stream
    index, which simulation drivers reserve for path chunks.
    """

    seed: int
    stream: int = 0
    counter: int = 0

    def generator(self):
        """Fresh numpy Generator for this (seed, stream, counter) triple."""
        seq = np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(self.stream), int(self.counter))
        )
        return np.random.default_rng(seq)

    def child(self):
        """Next counter value on the same (seed, stream) pair."""
        return RngStream(self.seed, self.stream, self.counter + 1)


def _field_table(field, resolution=_TABLE_RESOLUTION):
    ys = np.linspace(0.0, 1.0, resolution + 1)
    vals = np.asarray(field.evaluate(ys), dtype=float)
    vals[-1] = vals[0]
    return ys, vals


class _TableLookup:
    """Periodic linear-interpolation view of a unit-cell field.

    The grid is uniform, so lookups are direct index arithmetic (no
    binary search); ``transform`` post-processes the sampled values once
    (e.g. sqrt(2 a) or a premultiplied drift scale).
    """

    def __init__(self, field, resolution=_TABLE_RESOLUTION, transform=None):
        self.ys, vals = _field_table(field, resolution)
        if transform is not None:
            vals = transform(vals)
        self.vals = vals
        self.resolution = resolution

    def __call__(self, y):
        t = y * self.resolution
        idx = t.astype(np.int64)
        frac = t - idx
        v = self.vals
        return v[idx] * (1.0 - frac) + v[idx + 1] * frac

    @property
    def max(self):
        return float(self.vals.max())


def _kernel_sampler(kernel, resolution=4096):
    """Sampler for Z ~ c/a1; exact built-in sampler or inverse-CDF table."""
    if kernel.sampler is not None:
        return kernel.sampler
    R = kernel.truncation_radius
    z = np.linspace(-R, R, resolution + 1)
    density = np.maximum(np.asarray(kernel.evaluate(z), dtype=float), 0.0)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]))])
    cdf *= (z[1] - z[0])
    cdf /= cdf[-1]
    # make the table strictly increasing so np.interp inverts it cleanly
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    z_keep, cdf_keep = z[keep], cdf[keep]

    def sampler(rng, size):
        return np.interp(rng.uniform(0.0, 1.0, size), cdf_keep, z_keep)

    return sampler


# ---------------------------------------------------------------------------
# stable increments


def _stable_draws(alpha, size, rng, truncation=1e6):
    """CMS draws of the standard symmetric alpha-stable law S(alpha).

    Characteristic function exp(-|theta|^alpha).  Returns (draws, number of
    draws clipped at +-truncation).
    """
    u = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size)
    if alpha == 1.0:
        x = np.tan(u)
    else:
        w = rng.exponential(1.0, size)
        x = (np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)) * (
            np.cos((1.0 - alpha) * u) / w
        ) ** ((1.0 - alpha) / alpha)
    clipped = int(np.count_nonzero(np.abs(x) > truncation))
    if clipped:
        x = np.clip(x, -truncation, truncation)
    return x, clipped


def sample_stable_increment(alpha, dt, rng):
    """One increment of a standard symmetric alpha-stable process over dt.

    Distributed as ``dt**(1/alpha) * S(alpha)`` where S(alpha) has
    characteristic function exp(-|theta|^alpha), via the
    Chambers--Mallows--Stuck construction (tangent branch at alpha = 1).

    Parameters
    ----------
    alpha : float
        Stability index in (0, 2).
    dt : float
        Time increment, > 0.
    rng : numpy.random.Generator or RngStream
        Draw source.  Pass a Generator when sampling sequences; an
        RngStream is converted once, so repeated calls with the same
        stream repeat the same value.

    Returns
    -------
    float
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2), got %r" % (alpha,))
    if not dt > 0.0:
        raise ValueError("dt must be positive, got %r" % (dt,))
    if isinstance(rng, RngStream):
        rng = rng.generator()
    draw, _ = _stable_draws(alpha, 1, rng)
    return float(dt ** (1.0 / alpha) * draw[0])


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class ParticleEnsemble:
    """Positions of an independent-path ensemble at sample times.

    Attributes
    ----------
    times : ndarray, shape (n_times,)
        Sample times, a subset of the step grid including 0 and T_end.
    positions : ndarray, shape (n_times, n_paths)
        Path positions at the sample times.
    path_streams : ndarray, shape (n_paths,)
        Stream index (chunk) whose generator produced each path.
    dt : float
        Actual step used (T_end / n_steps, never above the requested dt).
    T_end : float
    seed : int
    jump_counts : ndarray or None
        Accepted-jump count per path (jump-diffusion runs).
    jump_sizes : ndarray or None
        Flat array of accepted jump sizes when diagnostics were kept.
    truncation_count : int
        Stable increments clipped at the safety magnitude (signal runs).
    """

    times: np.ndarray
    positions: np.ndarray
    path_streams: np.ndarray
    dt: float
    T_end: float
    seed: int
    jump_counts: Optional[np.ndarray] = None
    jump_sizes: Optional[np.ndarray] = None
    truncation_count: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        positions = np.asarray(self.positions, dtype=float)
        if positions.ndim != 2 or positions.shape[0] != times.size:
            raise ValueError("positions must be (n_times, n_paths)")
        if self.path_streams.shape != (positions.shape[1],):
            raise ValueError("path_streams must have one entry per path")
        if not np.isfinite(positions).all():
            raise RuntimeError("ensemble contains non-finite positions")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)

    @property
    def n_paths(self):
        return self.positions.shape[1]

    @property
    def n_times(self):
        return self.positions.shape[0]

    def summary_rows(self):
        """(time, mean, var, se) per sample time; se is the SE of the mean."""
        n = self.n_paths
        mean = self.positions.mean(axis=1)
        var = self.positions.var(axis=1, ddof=1)
        se = np.sqrt(var / n)
        return [(float(t), float(m), float(v), float(s))
                for t, m, v, s in zip(self.times, mean, var, se)]

    def write_summary_csv(self, path):
        lines = ["time,mean,var,se"]
        for row in self.summary_rows():
            lines.append(",".join("%.17g" % v for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def write_paths_binary(self, path):
        """Dump raw paths.

        Layout: 8-byte magic ``NLHOMPE1``, then n_paths and n_times as
        little-endian uint64, then the sample times as little-endian
        float64, then positions row-major (time-major) little-endian
        float64.
        """
        with open(path, "wb") as fh:
            fh.write(_BINARY_MAGIC)
            np.array([self.n_paths, self.n_times], dtype="<u8").tofile(fh)
            self.times.astype("<f8").tofile(fh)
            np.ascontiguousarray(self.positions, dtype="<f8").tofile(fh)


def read_paths_binary(path):
    """Read a ``write_paths_binary`` dump -> (times, positions)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _BINARY_MAGIC:
            raise ValueError("not an ensemble dump (bad magic %r)" % (magic,))
        n_paths, n_times = np.fromfile(fh, dtype="<u8", count=2)
        times = np.fromfile(fh, dtype="<f8", count=int(n_times))
        flat = np.fromfile(fh, dtype="<f8", count=int(n_times * n_paths))
    if flat.size != n_times * n_paths:
        raise ValueError("truncated ensemble dump")
    return times, flat.reshape(int(n_times), int(n_paths))


def _step_grid(T_end, dt, n_save):
    if not T_end > 0.0:
        raise ValueError("T_end must be positive, got %r" % (T_end,))
    n_steps = max(1, int(np.ceil(T_end / dt - 1e-9)))
    dt_eff = T_end / n_steps
    n_save = max(2, min(int(n_save), n_steps + 1))
    save_idx = np.unique(np.round(np.linspace(0, n_steps, n_save)).astype(int))
    return n_steps, dt_eff, save_idx


def _chunk_ranges(n_paths, chunk_size):
    starts = list(range(0, n_paths, chunk_size))
    return [(c, s, min(s + chunk_size, n_paths)) for c, s in enumerate(starts)]


# ---------------------------------------------------------------------------
# Part I jump-diffusion


def simulate_jump_diffusion_I(cset, eps, T_end, dt, n_paths, seed, x0=0.0,
                              n_save=9, dt_safety=0.1, keep_jump_sizes=False,
                              scheme="milstein", chunk_size=_CHUNK_SIZE):
    """Euler-type paths of the jump-diffusion dual to the heterogeneous
    operator.

    Per step of size dt: drift (1/eps) b(x/eps), diffusion sqrt(2 a(x/eps))
    dW, and thinned jumps — proposals arrive as a Poisson process of exact
    rate lambda_max a1 / eps**2 (lambda_max = the set's declared intensity
    bound alpha2), each accepted with probability lambda(x/eps)/lambda_max
    and, when accepted, displacing the path by eps * Z with Z ~ c/a1.
    Proposals are pooled across the chunk each step (one Poisson total,
    owners uniform over paths), which reproduces the per-path Poisson law
    exactly by superposition.  Acceptance and coefficients use the
    start-of-step state.

    The weak error is O(dt), but with a fast-oscillating diffusion
    coefficient its constant scales like 1/eps**2 (the cell dynamics
    relaxes on the eps**2 clock), and the dominant term comes from the
    omitted Ito-Taylor correction (1/2) sigma sigma' ((dW)^2 - dt) =
    (a'(x/eps)/(2 eps)) ((dW)^2 - dt).  ``scheme="milstein"`` (default)
    includes that term; ``scheme="euler"`` drops it, for the plain scheme
    and for step-bias studies.

    Parameters
    ----------
    cset : CoefficientSetI
    eps : Epsilon or float
        Reciprocal-integer scale.
    T_end, dt : float
        Horizon and requested step; requires dt <= dt_safety * eps**2.
        The actual step is T_end/n_steps <= dt.
    n_paths, seed : int
    x0 : float, optional
        Common initial position.
    n_save : int, optional
        Number of sample times (including 0 and T_end).
    keep_jump_sizes : bool, optional
        Record the flat array of accepted jump sizes (diagnostics).
    scheme : {"milstein", "euler"}, optional
        Whether the diffusion part carries the Milstein correction.
    chunk_size : int, optional
        Paths per random stream; part of the sampling design, so changing
        it changes the (still reproducible) draws.

    Returns
    -------
    ParticleEnsemble
    """
    eps_val = _eps_value(eps)
    if dt > dt_safety * eps_val**2 * (1.0 + 1e-12):
        raise ValueError(
            "dt=%g too large for eps=%g: need dt <= %g (= dt_safety*eps^2)"
            % (dt, eps_val, dt_safety * eps_val**2)
        )
    n_steps, dt_eff, save_idx = _step_grid(T_end, dt, n_save)

    lam_tab = _TableLookup(cset.lam)
    lam_max = float(cset.alpha2)
    if lam_tab.max > lam_max * (1.0 + 1e-9):
        raise ValueError(
            "intensity bound alpha2=%g below max lambda=%g; thinning needs "
            "lambda <= alpha2" % (lam_max, lam_tab.max)
        )
    a1 = cset.kernel.a1
    sampler = _kernel_sampler(cset.kernel)
    proposal_rate = lam_max * a1 / eps_val**2
    inv_eps = 1.0 / eps_val

    positions = np.empty((save_idx.size, n_paths))
    jump_counts = np.zeros(n_paths, dtype=np.int64)
    sizes_out = [] if keep_jump_sizes else None

    sqrt_dt = np.sqrt(dt_eff)
    # premultiplied per-step tables: drift displacement and noise amplitude
    bdt_tab = _TableLookup(cset.b, transform=lambda v: v * (inv_eps * dt_eff))
    sig_tab = _TableLookup(
        cset.a, transform=lambda v: np.sqrt(2.0 * v) * sqrt_dt
    )
    if scheme == "milstein":
        mil_tab = _TableLookup(
            cset.a.derivative(1),
            transform=lambda v: v * (0.5 * inv_eps * dt_eff),
        )
    elif scheme == "euler":
        mil_tab = None
    else:
        raise ValueError("scheme must be 'milstein' or 'euler'")
    for chunk, lo, hi in _chunk_ranges(n_paths, chunk_size):
        g = RngStream(seed, chunk).generator()
        m = hi - lo
        x = np.full(m, float(x0))
        save_pos = 0
        if save_idx[0] == 0:
            positions[0, lo:hi] = x
            save_pos = 1
        counts_chunk = np.zeros(m, dtype=np.int64)
        for step in range(1, n_steps + 1):
            y = np.mod(x * inv_eps, 1.0)
            dW = g.standard_normal(m)
            total = int(g.poisson(m * proposal_rate * dt_eff))
            jump_sum = 0.0
            if total:
                owners = g.integers(0, m, total)
                accept = (g.uniform(0.0, 1.0, total) * lam_max
                          < lam_tab(y[owners]))
                z = sampler(g, total)
                sizes = eps_val * z * accept
                jump_sum = np.bincount(owners, weights=sizes, minlength=m)
                counts_chunk += np.bincount(
                    owners[accept], minlength=m
                ).astype(np.int64)
                if keep_jump_sizes and accept.any():
                    sizes_out.append(eps_val * z[accept])
            x = x + (bdt_tab(y) + sig_tab(y) * dW + jump_sum)
            if mil_tab is not None:
                x += mil_tab(y) * (dW * dW - 1.0)
            if save_pos < save_idx.size and step == save_idx[save_pos]:
                if not np.isfinite(x).all():
                    raise RuntimeError(
                        "non-finite particle state at step %d" % step
                    )
                positions[save_pos, lo:hi] = x
                save_pos += 1
        jump_counts[lo:hi] = counts_chunk

    path_streams = np.repeat(
        np.arange(len(_chunk_ranges(n_paths, chunk_size))),
        [hi - lo for _, lo, hi in _chunk_ranges(n_paths, chunk_size)],
    )
    jump_sizes = None
    if keep_jump_sizes:
        jump_sizes = (np.concatenate(sizes_out) if sizes_out
                      else np.empty(0))
    return ParticleEnsemble(
        times=save_idx * dt_eff,
        positions=positions,
        path_streams=path_streams,
        dt=dt_eff,
        T_end=float(T_end),
        seed=int(seed),
        jump_counts=jump_counts,
        jump_sizes=jump_sizes,
    )


def _jackknife_variance_se(x, scale):
    """Delete-one jackknife SE of scale * Var(x) (ddof=1), in O(n)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        raise ValueError("jackknife needs at least 3 paths")
    s1 = x.sum()
    s2 = (x * x).sum()
    mu_i = (s1 - x) / (n - 1)
    var_i = (s2 - x * x - (n - 1) * mu_i**2) / (n - 2)
    theta = scale * var_i
    return float(np.sqrt((n - 1) / n * ((theta - theta.mean()) ** 2).sum()))


def estimate_Q_monte_carlo(cset, eps, T_end, n_paths, seed, dt=None,
                           dt_safety=0.1, oracle_dt_safety=0.005,
                           scheme="milstein", chunk_size=_CHUNK_SIZE):
    """Monte-Carlo oracle for the effective diffusivity Q.

    The homogenized generator is Q d^2/dx^2, so the particle variance grows
    as 2 Q t; the estimate is Var(x_T)/(2 T_end) with a delete-one
    jackknife standard error.

    Parameters
    ----------
    cset : CoefficientSetI
    eps : Epsilon or float
    T_end : float
    n_paths, seed : int
    dt : float, optional
        Step; defaults to oracle_dt_safety * eps**2, tighter than the
        pathwise default because the step bias of variance-type
        functionals scales with dt/eps**2 (the cell dynamics lives on the
        eps**2 clock) and the oracle is consumed through 3-SE brackets at
        the percent level.  Measured on the workhorse heterogeneous set at
        eps = 1/8 with 3e4 paths: the plain Euler scheme drifts
        +5.1%/+3.0%/+0.9% of Q at dt/eps**2 = 0.02/0.005/0.00125, while
        the Milstein correction leaves no drift visible above the 0.8%
        noise floor anywhere in that range.

    Returns
    -------
    (float, float)
        (Q_hat, jackknife standard error).
    """
    eps_val = _eps_value(eps)
    if dt is None:
        dt = oracle_dt_safety * eps_val**2
    ens = simulate_jump_diffusion_I(
        cset, eps, T_end, dt, n_paths, seed, n_save=2,
        dt_safety=dt_safety, scheme=scheme, chunk_size=chunk_size,
    )
    x = ens.positions[-1]
    scale = 1.0 / (2.0 * float(T_end))
    q_hat = float(np.var(x, ddof=1) * scale)
    return q_hat, _jackknife_variance_se(x, scale)


# ---------------------------------------------------------------------------
# Part II signal


def simulate_signal_II(cset, eps, T_end, dt, n_paths, seed, x0=0.0, n_save=9,
                       dt_safety=0.1, drift_scaling="operator",
                       truncation=1e6, chunk_size=_CHUNK_SIZE):
    """Euler paths of the alpha-stable signal with fast coefficients.

    Per step: x <- x + s(eps) d(x/eps) dt + delta(x/eps) dL, with dL an
    exact symmetric alpha-stable increment over dt (clipped at
    ``truncation`` for float safety; the clip count is reported on the
    ensemble).

    The drift scale s(eps) follows ``drift_scaling``:

    * ``"operator"`` (default): s = eps**(1-alpha), the scale at which the
      drift joins the fractional part in the fast generator — the fast
      cell dynamics then match the invariant density m1 and the effective
      fractional coefficient, which is what the generator-level
      convergence statements use.
    * ``"literal"``: s = 1/eps, the displayed SDE scaling.  For alpha < 2
      this makes the fast drift dominate the fast jumps (order
      eps**(alpha-2) in cell time), so no nontrivial homogenized limit is
      reached; it is kept selectable for side-by-side comparison.

    Parameters
    ----------
    cset : CoefficientSetII
    eps : Epsilon or float
    T_end, dt : float
        Requires dt <= dt_safety * eps.
    n_paths, seed : int
    x0, n_save, chunk_size : as in the jump-diffusion.

    Returns
    -------
    ParticleEnsemble
    """
    eps_val = _eps_value(eps)
    if dt > dt_safety * eps_val * (1.0 + 1e-12):
        raise ValueError(
            "dt=%g too large for eps=%g: need dt <= %g (= dt_safety*eps)"
            % (dt, eps_val, dt_safety * eps_val)
        )
    alpha = float(cset.alpha)
    if drift_scaling == "operator":
        drift_scale = eps_val ** (1.0 - alpha)
    elif drift_scaling == "literal":
        drift_scale = 1.0 / eps_val
    else:
        raise ValueError("drift_scaling must be 'operator' or 'literal'")
    n_steps, dt_eff, save_idx = _step_grid(T_end, dt, n_save)
    jump_scale = dt_eff ** (1.0 / alpha)

    d_tab = _TableLookup(cset.d)
    delta_tab = _TableLookup(cset.delta)
    inv_eps = 1.0 / eps_val

    positions = np.empty((save_idx.size, n_paths))
    n_clipped = 0

    for chunk, lo, hi in _chunk_ranges(n_paths, chunk_size):
        g = RngStream(seed, chunk).generator()
        m = hi - lo
        x = np.full(m, float(x0))
        save_pos = 0
        if save_idx[0] == 0:
            positions[0, lo:hi] = x
            save_pos = 1
        for step in range(1, n_steps + 1):
            y = np.mod(x * inv_eps, 1.0)
            draws, clipped = _stable_draws(alpha, m, g, truncation)
            n_clipped += clipped
            x = x + drift_scale * d_tab(y) * dt_eff \
                + delta_tab(y) * jump_scale * draws
            if save_pos < save_idx.size and step == save_idx[save_pos]:
                if not np.isfinite(x).all():
                    raise RuntimeError(
                        "non-finite particle state at step %d" % step
                    )
                positions[save_pos, lo:hi] = x
                save_pos += 1

    path_streams = np.repeat(
        np.arange(len(_chunk_ranges(n_paths, chunk_size))),
        [hi - lo for _, lo, hi in _chunk_ranges(n_paths, chunk_size)],
    )
    return ParticleEnsemble(
        times=save_idx * dt_eff,
        positions=positions,
        path_streams=path_streams,
        dt=dt_eff,
        T_end=float(T_end),
        seed=int(seed),
        truncation_count=n_clipped,
    )
