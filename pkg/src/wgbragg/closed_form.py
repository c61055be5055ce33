"""Closed-form transfer model for a unidirectionally coupled emitter chain.

Everything here treats the chain analytically: light entering the guided mode
passes each emitter once, picking up the complex single-pass factor t per
site.  The functions taking a ModelParams use params.gamma_r as the coupling
that builds up the forward amplitude; for unidirectional coupling
(gamma_l = 0) this equals the guided fraction beta, which is the regime the
closed-form rate expressions are exact in.

Scalar helpers (transmission_coefficient, mb_envelope, ...) take the coupling
as an explicit argument named beta to match the unidirectional reading.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .model import K0

DENOM_FALLBACK_TOL = 1e-12

# classify_regime thresholds; asymptotic statements made operational
QUADRATIC_LOG_TOL = 0.1
QUADRATIC_PERIOD_FRACTION = 0.25
SATURATION_POW_TOL = 0.01
B_ZERO_TOL = 1e-9


@dataclass(frozen=True)
class BraggSolution:
    """Bragg geometry for one order m at a given detuning.

    b, b_alias and period describe the per-site phase mismatch at the angle
    the solution was evaluated for (the caller's theta, not theta_mb).
    """

    m: int
    theta_gb: float
    theta_mb: float
    cos_theta_gb: float
    cos_theta_mb: float
    b: float
    b_alias: float
    period: float


@dataclass(frozen=True)
class RegimeLabel:
    """Growth regime of the rate vs N, plus the scalars that justified it."""

    label: str
    t_abs: float
    n_log_t: float
    b_alias: float
    period: float


def transmission_coefficient(delta, beta):
    """Single-pass amplitude factor t = 1 - 2i*beta / (2*delta + i).

    Equivalent to (2*delta + i(1 - 2*beta)) / (2*delta + i); |t| <= 1 for
    beta in [0, 1].
    """
    delta = np.asarray(delta, dtype=float)
    t = 1.0 - 2j * beta / (2.0 * delta + 1j)
    return t if t.ndim else complex(t)


def single_atom_guided_rate(delta, omega, beta):
    """Guided scattering rate of one emitter, 4 omega^2 beta / (4 delta^2 + 1)."""
    delta = np.asarray(delta, dtype=float)
    rate = 4.0 * omega**2 * beta / (4.0 * delta**2 + 1.0)
    return rate if rate.ndim else float(rate)


def k_effective(theta, params):
    """Per-site wavenumber k0 cos(theta) + k_f combining drive and guided phases."""
    return K0 * np.cos(theta) + params.k_f


def _log_t_abs(delta, beta):
    # 1 - |t|^2 = 4 beta (1 - beta) / (4 delta^2 + 1), so log|t| stays accurate
    # arbitrarily close to |t| = 1
    x = -4.0 * beta * (1.0 - beta) / (4.0 * np.asarray(delta, dtype=float) ** 2 + 1.0)
    with np.errstate(divide="ignore"):
        return 0.5 * np.log1p(x)


def _one_minus_t_abs(delta, beta):
    x = 4.0 * beta * (1.0 - beta) / (4.0 * np.asarray(delta, dtype=float) ** 2 + 1.0)
    r = np.sqrt(1.0 - x)
    return x / (1.0 + r)


def rate_direct_sum(n, theta, delta, params):
    """Term-by-term transfer sum: Gamma~ * |sum_m t^m exp(-i m k_eff a)|^2.

    Scalar delta only; this is the literal summation used as the oracle for
    rate_geometric_sum.  Phases reach hundreds of radians at large n, so the
    terms are accumulated in extended precision (where the platform has it)
    to keep the oracle's own rounding well below the comparison tolerance.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    g = params.gamma_r
    t = np.clongdouble(transmission_coefficient(delta, g))
    keff_a = np.longdouble(k_effective(theta, params)) * np.longdouble(params.a)
    m = np.arange(n)
    terms = t**m * np.exp(-1j * keff_a * m)
    s = complex(np.sum(terms))
    return single_atom_guided_rate(delta, params.omega, g) * abs(s) ** 2


def rate_geometric_sum(n, theta, delta, params):
    """Closed form of the transfer sum.

    Gamma~ * [(1-|t|^N)^2 + 4|t|^N sin^2(bN/2)] / [(1-|t|)^2 + 4|t| sin^2(b/2)]
    with b = arg t - k_eff a.  Vectorized over delta.  When the denominator is
    below 1e-12 (|t| -> 1 together with b -> 0) the removable singularity is
    evaluated by falling back to the direct summation, whose limit is
    N^2 Gamma~.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    g = params.gamma_r
    delta_arr = np.atleast_1d(np.asarray(delta, dtype=float))
    t = 1.0 - 2j * g / (2.0 * delta_arr + 1j)
    r = np.abs(t)
    log_r = _log_t_abs(delta_arr, g)
    one_minus_r = _one_minus_t_abs(delta_arr, g)
    b = np.angle(t) - k_effective(theta, params) * params.a

    with np.errstate(invalid="ignore"):
        rn = np.exp(n * log_r)
        one_minus_rn = -np.expm1(n * log_r)
    num = one_minus_rn**2 + 4.0 * rn * np.sin(0.5 * b * n) ** 2
    den = one_minus_r**2 + 4.0 * r * np.sin(0.5 * b) ** 2
    tilde = 4.0 * params.omega**2 * g / (4.0 * delta_arr**2 + 1.0)

    out = np.empty_like(delta_arr)
    bad = den < DENOM_FALLBACK_TOL
    ok = ~bad
    out[ok] = tilde[ok] * num[ok] / den[ok]
    for i in np.flatnonzero(bad):
        out[i] = rate_direct_sum(n, theta, float(delta_arr[i]), params)
    if np.ndim(delta) == 0:
        return float(out[0])
    return out


def rate_positions_sum(positions, theta, delta, params):
    """Transfer sum for an arbitrary set of occupied positions (ascending).

    Each emitter's field is transmitted through all emitters downstream of it,
    giving Gamma~ * |sum_j t^(n-1-j) exp(+i k_eff z_j)|^2.  Agrees with
    rate_direct_sum for a fully occupied lattice and with the unidirectional
    steady-state solver for any mask.
    """
    z = np.asarray(positions, dtype=float)
    n = z.size
    if n < 1:
        raise ValidationError("positions must be nonempty")
    g = params.gamma_r
    t = transmission_coefficient(delta, g)
    keff = k_effective(theta, params)
    w = t ** (n - 1 - np.arange(n))
    s = np.sum(w * np.exp(1j * keff * z))
    return single_atom_guided_rate(delta, params.omega, g) * float(np.abs(s)) ** 2


def bragg_orders(params):
    """All integer orders m with |m/a - n_eff| <= 1, each with its angle.

    Returns a list of (m, theta_gb) in ascending m; empty when no order fits.
    """
    lo = int(np.ceil(params.a * (params.n_eff - 1.0) - 1e-12))
    hi = int(np.floor(params.a * (params.n_eff + 1.0) + 1e-12))
    out = []
    for m in range(lo, hi + 1):
        c = m / params.a - params.n_eff
        if abs(c) <= 1.0:
            out.append((m, float(np.arccos(c))))
    return out


def geometric_bragg_angle(m, params):
    """theta_GB for order m: cos(theta) = m/a - n_eff."""
    c = m / params.a - params.n_eff
    if abs(c) > 1.0:
        raise NumericalError(
            f"Bragg order m={m} has |cos theta| = {abs(c):.6g} > 1 for a={params.a}, "
            f"n_eff={params.n_eff}")
    return float(np.arccos(c))


def modified_bragg_angle(m, delta, params):
    """Detuning-dependent Bragg angle: cos(theta_MB) = cos(theta_GB) + arg(t)/(k0 a).

    The transmission phase uses the forward coupling rate params.gamma_r (equal
    to beta for unidirectional coupling); with this choice the per-site
    mismatch b vanishes identically at theta_MB for the order's lattice.
    """
    c = np.cos(geometric_bragg_angle(m, params))
    t = transmission_coefficient(delta, params.gamma_r)
    c_mb = c + np.angle(t) / (K0 * params.a)
    if abs(c_mb) > 1.0:
        raise NumericalError(
            f"modified Bragg angle undefined: |cos| = {abs(c_mb):.6g} > 1 "
            f"(m={m}, delta={delta})")
    return float(np.arccos(c_mb))


def alias_analysis(b):
    """Fold a per-site phase mismatch into [0, pi] and give the beat period.

    b is first reduced to (-pi, pi] (ties at pi go to +pi), then the magnitude
    is the alias frequency seen when sampling at integer N.  Returns
    (b_alias, period) with period = 2*pi / b_alias, +inf when b is an exact
    multiple of 2*pi.
    """
    r = np.mod(b, 2.0 * np.pi)
    if r > np.pi:
        r = 2.0 * np.pi - r
    b_alias = float(abs(r))
    period = np.inf if b_alias == 0.0 else 2.0 * np.pi / b_alias
    return b_alias, period


def phase_mismatch(theta, delta, params):
    """Per-site phase mismatch b = arg(t) - k_eff * a at the given drive angle."""
    t = transmission_coefficient(delta, params.gamma_r)
    return float(np.angle(t) - k_effective(theta, params) * params.a)


def bragg_solution(m, params, delta=None, theta=None):
    """Bundle the Bragg geometry of order m with the mismatch at a drive angle.

    delta defaults to params.delta and theta to params.theta; the mismatch
    fields (b, b_alias, period) refer to that theta, while theta_mb is the
    detuning-corrected angle for this order.
    """
    if delta is None:
        delta = params.delta
    if theta is None:
        theta = params.theta
    theta_gb = geometric_bragg_angle(m, params)
    theta_mb = modified_bragg_angle(m, delta, params)
    b = phase_mismatch(theta, delta, params)
    b_alias, period = alias_analysis(b)
    return BraggSolution(m=int(m), theta_gb=theta_gb, theta_mb=theta_mb,
                         cos_theta_gb=float(np.cos(theta_gb)),
                         cos_theta_mb=float(np.cos(theta_mb)),
                         b=b, b_alias=b_alias, period=period)


def gb_peak_asymptotics(n, beta, omega):
    """Large-N estimates of the spectral peaks at the geometric Bragg angle.

    Returns ((-delta_max, +delta_max), rate_max) with delta_max = beta*n/pi
    and rate_max = (omega^2/beta) * (1 + exp(-pi^2 (1-beta) / (2 beta n)))^2.
    These are asymptotic estimates; the caller judges whether n is large
    enough for them to be close (the true peak sits further out at moderate
    n, approaching the estimate from above as n grows).
    """
    d = beta * n / np.pi
    with np.errstate(divide="ignore"):
        rate = (omega**2 / beta) * (1.0 + np.exp(-np.pi**2 * (1.0 - beta) / (2.0 * beta * n))) ** 2
    return (-float(d), float(d)), float(rate)


def mb_envelope(n, delta, beta, omega):
    """Rate along the zero-mismatch locus: Gamma~ * ((1 - |t|^N)/(1 - |t|))^2.

    This is the value of the transfer sum with b = 0, reached at the modified
    Bragg angle for every delta; vectorized over delta.  The |t| -> 1 limit is
    N^2 Gamma~.
    """
    delta_arr = np.atleast_1d(np.asarray(delta, dtype=float))
    log_r = _log_t_abs(delta_arr, beta)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(log_r == 0.0, float(n), np.expm1(n * log_r) / np.expm1(log_r))
    out = 4.0 * omega**2 * beta / (4.0 * delta_arr**2 + 1.0) * ratio**2
    if np.ndim(delta) == 0:
        return float(out[0])
    return out


def classify_regime(n, theta, delta, params):
    """Label how the rate grows with chain length at the given drive point.

    quadratic:  |N ln|t|| <= 0.1 and N <= period/4 (coherent buildup, sum ~ N)
    linear:     b = 0 mod 2pi (within 1e-9) with |t| < 1
    saturating: |t|^N <= 0.01
    oscillatory: everything else
    Precedence is quadratic > linear > saturating > oscillatory.
    """
    g = params.gamma_r
    t = transmission_coefficient(delta, g)
    t_abs = float(np.abs(t))
    n_log_t = float(n * _log_t_abs(delta, g))
    b = phase_mismatch(theta, delta, params)
    b_alias, period = alias_analysis(b)

    if abs(n_log_t) <= QUADRATIC_LOG_TOL and n <= QUADRATIC_PERIOD_FRACTION * period:
        label = "quadratic"
    elif b_alias <= B_ZERO_TOL and t_abs < 1.0:
        label = "linear"
    elif np.exp(n_log_t) <= SATURATION_POW_TOL:
        label = "saturating"
    else:
        label = "oscillatory"
    return RegimeLabel(label=label, t_abs=t_abs, n_log_t=n_log_t,
                       b_alias=b_alias, period=period)
