"""Parameter scans, peak finding, scaling fits and seeded void ensembles.

All ensembles are pure functions of (params, seed): configuration c draws its
occupation mask from an independent stream seeded with (master_seed, c), so
results do not depend on evaluation order or thread count.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import __version__
from .errors import CapabilityError, ConfigurationError, ValidationError
from .model import K0, guided_coupling_matrices, make_params
from .closed_form import (
    geometric_bragg_angle,
    mb_envelope,
    modified_bragg_angle,
    rate_geometric_sum,
    rate_positions_sum,
)
from .steady import AmplitudeVector, guided_rate, solve_amplitudes
from .lindblad import build_liouvillian, guided_rate_exact, steady_density

DEFAULT_SEED = 7

TIERS = ("closed", "linear", "lindblad")

PEAK_GRID_POINTS = 2001
COARSE_GRID_POINTS = 201
REFINE_GRID_POINTS = 81


@dataclass(frozen=True)
class ScanResult:
    """Gridded observables with the parameters and provenance that made them.

    axes is a list of (name, grid) pairs; each array in values has shape
    (len(axis_0), len(axis_1), ...).
    """

    axes: list
    values: dict
    tier: str
    params: object
    seed: object = None
    version: str = __version__


@dataclass(frozen=True)
class PeakResult:
    delta_max: float
    rate_max: float
    branch: str
    grid_step: float
    parabolic_shift: float
    boundary: bool


@dataclass(frozen=True)
class VoidEnsembleResult:
    eta: float
    n_configs: int
    seed: int
    mean_rate: float
    std_rate: float
    robustness: float
    reference_rate: float
    rates: np.ndarray


@dataclass(frozen=True)
class OscillationEstimate:
    frequency: float
    bin_width: float
    amplitude: float
    flat: bool


class PowerLawFit(NamedTuple):
    exponent: float
    prefactor: float
    r_squared: float


@dataclass(frozen=True)
class AtGB:
    """Peak-over-detuning policy at the geometric Bragg angle of order m."""
    m: int = 2


@dataclass(frozen=True)
class AtMB:
    """Peak-over-detuning policy along the zero-mismatch (modified Bragg) locus."""
    m: int = 2


@dataclass(frozen=True)
class FixedPoint:
    """Raw rate at a fixed (theta, delta) drive point."""
    theta: float
    delta: float


def _check_tier(tier, params):
    if tier not in TIERS:
        raise ConfigurationError(f"unknown tier {tier!r}, expected one of {TIERS}")
    if tier == "closed" and params.gamma_l != 0.0:
        raise ConfigurationError(
            "closed tier requires unidirectional coupling (gamma_l = 0); "
            "use tier='linear' for D < 1")


def _full_chain(params, n):
    """params resized to a fully occupied chain of n sites."""
    return params.replace(n_sites=int(n), occupation=np.ones(int(n), dtype=bool))


def _linear_rate(theta, delta, params, matrices):
    """Guided rate from the dense solver, reusing prebuilt coupling matrices."""
    n = matrices.positions.size
    a = (-1j * delta * np.eye(n, dtype=complex)
         + 0.5 * matrices.total
         + 1j * matrices.v_coherent)
    v = np.exp(1j * K0 * matrices.positions * np.cos(theta))
    amps = solve_amplitudes(a, v, params.omega)
    return guided_rate(amps, matrices.gamma_right)


def _lindblad_rate(theta, delta, params):
    pp = params.replace(theta=float(theta), delta=float(delta))
    mats = guided_coupling_matrices(pp)
    rho = steady_density(build_liouvillian(pp, mats))
    return guided_rate_exact(rho, mats.gamma_right)


def _rate_point(theta, delta, params, tier, matrices=None):
    if tier == "closed":
        if params.n_atoms == params.n_sites:
            return rate_geometric_sum(params.n_atoms, theta, delta, params)
        z = params.a * np.flatnonzero(params.occupation).astype(float)
        return rate_positions_sum(z, theta, delta, params)
    if tier == "linear":
        if matrices is None:
            matrices = guided_coupling_matrices(params)
        return _linear_rate(theta, delta, params, matrices)
    return _lindblad_rate(theta, delta, params)


def _check_grid(grid, name):
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValidationError(f"{name} grid is empty")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValidationError(f"{name} grid must be strictly ascending")
    return grid


def spectrum_scan(theta, delta_grid, tier, params):
    """Guided rate versus detuning at a fixed drive angle."""
    _check_tier(tier, params)
    grid = _check_grid(delta_grid, "delta")
    if tier == "closed" and params.n_atoms == params.n_sites:
        vals = rate_geometric_sum(params.n_atoms, theta, grid, params)
    else:
        matrices = guided_coupling_matrices(params) if tier == "linear" else None
        vals = np.array([_rate_point(theta, d, params, tier, matrices) for d in grid])
    return ScanResult(axes=[("delta", grid)], values={"rate_r": np.asarray(vals)},
                      tier=tier, params=params)


def map_scan(theta_grid, delta_grid, tier, params):
    """Guided rate on a (theta, delta) grid."""
    _check_tier(tier, params)
    tgrid = _check_grid(theta_grid, "theta")
    dgrid = _check_grid(delta_grid, "delta")
    out = np.empty((tgrid.size, dgrid.size))
    matrices = guided_coupling_matrices(params) if tier == "linear" else None
    for i, th in enumerate(tgrid):
        if tier == "closed" and params.n_atoms == params.n_sites:
            out[i] = rate_geometric_sum(params.n_atoms, th, dgrid, params)
        else:
            out[i] = [_rate_point(th, d, params, tier, matrices) for d in dgrid]
    return ScanResult(axes=[("theta", tgrid), ("delta", dgrid)],
                      values={"rate_r": out}, tier=tier, params=params)


def find_peak(grid, values, branch="positive"):
    """Grid argmax restricted to a sign branch, refined by a 3-point parabola.

    The refinement is clamped to one grid step; a peak sitting on the grid
    boundary is flagged instead of refined.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.size < 3:
        raise ValidationError("peak search needs at least 3 grid points")
    if branch == "positive":
        mask = grid > 0
    elif branch == "negative":
        mask = grid < 0
    elif branch == "global":
        mask = np.ones_like(grid, dtype=bool)
    else:
        raise ValidationError(f"unknown branch {branch!r}")
    if not np.any(mask):
        raise ValidationError(f"branch {branch!r} selects no grid points")

    idx = np.flatnonzero(mask)
    i = idx[int(np.argmax(values[idx]))]
    step = float(np.median(np.diff(grid)))
    if i == 0 or i == grid.size - 1:
        return PeakResult(delta_max=float(grid[i]), rate_max=float(values[i]),
                          branch=branch, grid_step=step, parabolic_shift=0.0,
                          boundary=True)

    x0, x1, x2 = grid[i - 1], grid[i], grid[i + 1]
    y0, y1, y2 = values[i - 1], values[i], values[i + 1]
    coef = np.polyfit([x0, x1, x2], [y0, y1, y2], 2)
    shift = 0.0
    peak_x, peak_y = float(x1), float(y1)
    if coef[0] < 0.0:
        vx = -0.5 * coef[1] / coef[0]
        vx = min(max(vx, x1 - (x1 - x0)), x1 + (x2 - x1))
        peak_x = float(vx)
        peak_y = float(np.polyval(coef, vx))
        shift = float(vx - x1)
    return PeakResult(delta_max=peak_x, rate_max=peak_y, branch=branch,
                      grid_step=step, parabolic_shift=shift, boundary=False)


def _peak_grid(n, g):
    """Symmetric detuning grid wide enough to bracket the spectral peaks at any n."""
    m = max(4.0, 2.0 * g * n)
    return np.linspace(-m, m, PEAK_GRID_POINTS)


def _scaling_peak_closed(policy, n, params):
    g = params.gamma_r
    grid = _peak_grid(n, g)
    if isinstance(policy, AtMB):
        vals = mb_envelope(n, grid, g, params.omega)
    else:
        theta = geometric_bragg_angle(policy.m, params)
        vals = rate_geometric_sum(n, theta, grid, params)
    return find_peak(grid, vals, branch="positive")


def _scaling_peak_linear(policy, n, params):
    # two-stage search keeps the dense-solver count manageable: a coarse pass
    # brackets the peak, then a local grid around it feeds the refinement
    g = params.gamma_r
    pp = _full_chain(params, n)
    matrices = guided_coupling_matrices(pp)
    if isinstance(policy, AtMB):
        guess_grid = _peak_grid(n, g)
        guess = find_peak(guess_grid, mb_envelope(n, guess_grid, g, params.omega),
                          branch="positive").delta_max
        local = np.linspace(0.3 * guess, 2.2 * guess, REFINE_GRID_POINTS)
        vals = [
            _linear_rate(modified_bragg_angle(policy.m, d, pp), d, pp, matrices)
            for d in local
        ]
        return find_peak(local, np.asarray(vals), branch="global")
    theta = geometric_bragg_angle(policy.m, params)
    coarse = _peak_grid(n, g)[:: (PEAK_GRID_POINTS - 1) // (COARSE_GRID_POINTS - 1)]
    cvals = np.asarray([_linear_rate(theta, d, pp, matrices) for d in coarse])
    cpk = find_peak(coarse, cvals, branch="positive")
    cstep = coarse[1] - coarse[0]
    local = np.linspace(cpk.delta_max - 2 * cstep, cpk.delta_max + 2 * cstep,
                        REFINE_GRID_POINTS)
    vals = np.asarray([_linear_rate(theta, d, pp, matrices) for d in local])
    return find_peak(local, vals, branch="global")


def n_scaling(policy, n_list, tier, params):
    """Peak detuning and rate (or the raw rate for FixedPoint) per chain length.

    Chains are perfect (fully occupied) with params' lattice constant and
    couplings; params.n_sites is ignored here.
    """
    _check_tier(tier, params)
    n_arr = np.asarray(n_list, dtype=int)
    if n_arr.size == 0:
        raise ValidationError("n_list is empty")
    if np.any(np.diff(n_arr) <= 0):
        raise ValidationError("n_list must be strictly ascending")

    if isinstance(policy, FixedPoint):
        rates = np.empty(n_arr.size)
        for k, n in enumerate(n_arr):
            if tier == "closed":
                rates[k] = rate_geometric_sum(int(n), policy.theta, policy.delta, params)
            elif tier == "linear":
                pp = _full_chain(params, n)
                rates[k] = _rate_point(policy.theta, policy.delta, pp, tier)
            else:
                pp = _full_chain(params, n)
                rates[k] = _lindblad_rate(policy.theta, policy.delta, pp)
        return ScanResult(axes=[("n", n_arr)], values={"rate_r": rates},
                          tier=tier, params=params)

    if not isinstance(policy, (AtGB, AtMB)):
        raise ValidationError(f"unknown policy {policy!r}")
    if tier == "lindblad":
        raise CapabilityError("peak-search policies support tiers 'closed' and 'linear'")
    dmax = np.empty(n_arr.size)
    rmax = np.empty(n_arr.size)
    bflag = np.zeros(n_arr.size)
    for k, n in enumerate(n_arr):
        if tier == "closed":
            pk = _scaling_peak_closed(policy, int(n), params)
        else:
            pk = _scaling_peak_linear(policy, int(n), params)
        dmax[k], rmax[k], bflag[k] = pk.delta_max, pk.rate_max, float(pk.boundary)
    return ScanResult(axes=[("n", n_arr)],
                      values={"delta_max": dmax, "rate_max": rmax,
                              "boundary_flag": bflag},
                      tier=tier, params=params)


def fit_power_law(n_values, y_values):
    """Least-squares exponent/prefactor of y = C * N^p on log-log axes."""
    n = np.asarray(n_values, dtype=float)
    y = np.asarray(y_values, dtype=float)
    if n.size < 4:
        raise ValidationError("power-law fit needs at least 4 points")
    if np.any(y <= 0) or np.any(n <= 0):
        raise ValidationError("power-law fit needs positive values")
    lx, ly = np.log(n), np.log(y)
    p, logc = np.polyfit(lx, ly, 1)
    resid = ly - (p * lx + logc)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return PowerLawFit(exponent=float(p), prefactor=float(np.exp(logc)),
                       r_squared=r2)


def _mask_positions(rng, n_sites, n_atoms, a):
    sites = np.sort(rng.choice(n_sites, size=n_atoms, replace=False))
    return a * sites.astype(float)


def void_ensemble(params, n_atoms, n_configs, seed, tier="closed",
                  reference_rate=None):
    """Seeded ensemble of occupation masks with exactly n_atoms emitters.

    Masks are uniform over the C(n_sites, n_atoms) possibilities; config c uses
    the stream seeded with (seed, c).  The observable is the guided rate at
    (params.theta, params.delta).  robustness divides the ensemble mean by
    reference_rate, defaulting to the perfect n_atoms-chain rate at the same
    drive point.  The closed tier is bit-reproducible for fixed seed under any
    thread count (elementwise reductions only).
    """
    _check_tier(tier, params)
    if tier == "lindblad":
        raise CapabilityError("void ensembles support tiers 'closed' and 'linear'")
    n_atoms = int(n_atoms)
    if n_configs < 1:
        raise ValidationError(f"n_configs must be >= 1, got {n_configs}")
    if not (1 <= n_atoms <= params.n_sites):
        raise ValidationError(
            f"n_atoms={n_atoms} must lie in [1, n_sites={params.n_sites}]")

    if reference_rate is None:
        perfect = _full_chain(params, n_atoms)
        reference_rate = _rate_point(params.theta, params.delta, perfect, tier)

    rates = np.empty(int(n_configs))
    for c in range(int(n_configs)):
        rng = np.random.default_rng([int(seed), c])
        z = _mask_positions(rng, params.n_sites, n_atoms, params.a)
        if tier == "closed":
            rates[c] = rate_positions_sum(z, params.theta, params.delta, params)
        else:
            mask = np.zeros(params.n_sites, dtype=bool)
            mask[np.round(z / params.a).astype(int)] = True
            rates[c] = _rate_point(params.theta, params.delta,
                                   params.replace(occupation=mask), tier)
    mean = float(np.mean(rates))
    return VoidEnsembleResult(
        eta=n_atoms / params.n_sites, n_configs=int(n_configs), seed=int(seed),
        mean_rate=mean, std_rate=float(np.std(rates)),
        robustness=mean / reference_rate if reference_rate > 0 else np.inf,
        reference_rate=float(reference_rate), rates=rates)


def void_beta_sweep(betas, n_atoms, eta, n_configs, seed, params, m=2,
                    tier="closed"):
    """Robustness against voids versus coupling strength (unidirectional).

    Per beta the drive is set to the zero-mismatch angle of the partially
    filled lattice (effective constant a/eta, order round(m/eta)) at the
    detuning that maximizes the perfect-chain envelope; robustness divides by
    that envelope peak, i.e. by the best the perfect n_atoms-chain can do.
    """
    betas = _check_grid(betas, "beta")
    n_sites = int(round(n_atoms / eta))
    a_eff = params.a / eta
    m_eff = int(round(m / eta))
    cols = {k: np.empty(betas.size) for k in ("mean_rate", "std_rate", "robustness_r")}
    for i, beta in enumerate(betas):
        pp = make_params(
            n_sites=n_sites, a=params.a, n_eff=params.n_eff, omega=params.omega,
            delta=params.delta, theta=params.theta,
            gamma_r=beta, gamma_l=0.0, gamma_u=1.0 - beta)
        grid = _peak_grid(n_atoms, beta)
        env = mb_envelope(n_atoms, grid, beta, pp.omega)
        pk = find_peak(grid, env, branch="positive")
        theta = modified_bragg_angle(m_eff, pk.delta_max, pp.replace(a=a_eff))
        pp = pp.replace(theta=theta, delta=pk.delta_max)
        ens = void_ensemble(pp, n_atoms, n_configs, seed, tier=tier,
                            reference_rate=pk.rate_max)
        cols["mean_rate"][i] = ens.mean_rate
        cols["std_rate"][i] = ens.std_rate
        cols["robustness_r"][i] = ens.robustness
    return ScanResult(axes=[("beta", betas)], values=cols, tier=tier,
                      params=params, seed=int(seed))


def void_n_sweep(n_values, eta, n_configs, seed, params, tier="closed"):
    """Void-ensemble mean rate versus atom number at a fixed drive point."""
    n_arr = np.asarray(n_values, dtype=int)
    if n_arr.size == 0:
        raise ValidationError("n_values is empty")
    cols = {k: np.empty(n_arr.size) for k in ("mean_rate", "std_rate", "robustness_r")}
    for i, n in enumerate(n_arr):
        n_sites = int(round(n / eta))
        pp = params.replace(n_sites=n_sites,
                            occupation=np.ones(n_sites, dtype=bool))
        ens = void_ensemble(pp, int(n), n_configs, seed, tier=tier)
        cols["mean_rate"][i] = ens.mean_rate
        cols["std_rate"][i] = ens.std_rate
        cols["robustness_r"][i] = ens.robustness
    return ScanResult(axes=[("n", n_arr)], values=cols, tier=tier,
                      params=params, seed=int(seed))


def oscillation_frequency(n_values, rates):
    """Dominant angular frequency of rate oscillations over consecutive N.

    The saturating background is removed by fitting A + B*r^N (r profiled by
    a bounded scalar search, A and B by linear least squares), then the
    residual's periodogram peak gives the folded frequency in [0, pi].
    A signal whose residual RMS amplitude is below 1e-12 of the mean rate is
    flagged flat.
    """
    from scipy.optimize import minimize_scalar

    n = np.asarray(n_values, dtype=float)
    y = np.asarray(rates, dtype=float)
    if n.size < 16:
        raise ValidationError("need at least 16 samples to estimate a frequency")
    if np.any(np.diff(n) != 1.0):
        raise ValidationError("n_values must be consecutive integers")

    m = n - n[0]

    def fit_residual(log_r):
        basis = np.column_stack([np.ones_like(m), np.exp(log_r) ** m])
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return y - basis @ coef

    res = minimize_scalar(lambda lr: float(np.sum(fit_residual(lr) ** 2)),
                          bounds=(np.log(1e-6), np.log(1.0 - 1e-9)),
                          method="bounded")
    d = fit_residual(res.x)

    length = d.size
    bin_width = 2.0 * np.pi / length
    amplitude = float(np.sqrt(2.0 * np.mean(d**2)))
    if amplitude < 1e-12 * abs(float(np.mean(y))):
        return OscillationEstimate(frequency=0.0, bin_width=bin_width,
                                   amplitude=amplitude, flat=True)
    power = np.abs(np.fft.rfft(d - d.mean())) ** 2
    k = 1 + int(np.argmax(power[1:]))
    return OscillationEstimate(frequency=2.0 * np.pi * k / length,
                               bin_width=bin_width, amplitude=amplitude,
                               flat=False)
