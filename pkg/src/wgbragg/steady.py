"""Weak-drive steady state of the emitter array for arbitrary coupling asymmetry.

In the weak-drive limit the coherences x_j = <sigma_j> obey a linear system
A x = -i Omega v with A = -i Delta I + Gamma/2 + i V and drive phases
v_j = exp(i k0 z_j cos theta).  The sign of the detuning term is pinned by
requiring that the unidirectional solve reproduce the closed-form transfer
sum; see the conventions note in the README.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import K0, guided_coupling_matrices, positions_from_mask

RESIDUAL_TOL = 1e-12
COND_LIMIT = 1e12


@dataclass(frozen=True)
class AmplitudeVector:
    """Stationary coherences and the drive phases they were computed with."""

    x: np.ndarray
    drive: np.ndarray
    omega: float


def drive_vector(params):
    """Unit-amplitude drive phases v_j = exp(i k0 z_j cos theta)."""
    z = positions_from_mask(params)
    return np.exp(1j * K0 * z * np.cos(params.theta))


def assemble_system(matrices, params):
    """Build (A, v) with A = -i Delta I + (1/2) Gamma + i V."""
    n = matrices.positions.size
    a = (-1j * params.delta * np.eye(n, dtype=complex)
         + 0.5 * matrices.total
         + 1j * matrices.v_coherent)
    return a, drive_vector(params)


def solve_amplitudes(a, v, omega):
    """Direct dense solve of A x = -i omega v.

    Checks the residual against 1e-12 * ||rhs||; on failure (or non-finite
    output) raises NumericalError carrying a condition-number estimate.
    """
    rhs = -1j * omega * np.asarray(v, dtype=complex)
    try:
        x = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"steady-state system is singular: {exc}") from exc
    rhs_norm = np.linalg.norm(rhs)
    res = np.linalg.norm(a @ x - rhs)
    if not np.all(np.isfinite(x)) or res > RESIDUAL_TOL * max(rhs_norm, 1e-300):
        cond = np.linalg.cond(a, 1)
        raise NumericalError(
            f"steady-state solve unreliable: residual {res:.3e} vs rhs norm "
            f"{rhs_norm:.3e}, cond(A) ~ {cond:.3e}"
            + (" (> 1e12)" if cond > COND_LIMIT else ""))
    return AmplitudeVector(x=x, drive=np.asarray(v, dtype=complex), omega=float(omega))


def solve_steady_state(params, matrices=None):
    """Convenience wrapper: build matrices, assemble and solve for params."""
    if matrices is None:
        matrices = guided_coupling_matrices(params)
    a, v = assemble_system(matrices, params)
    return solve_amplitudes(a, v, params.omega)


def guided_rate(amplitudes, gamma_matrix):
    """Scattering rate x^dag Gamma x for one dissipation channel (real, >= 0)."""
    x = amplitudes.x if isinstance(amplitudes, AmplitudeVector) else np.asarray(amplitudes)
    val = float(np.real(np.vdot(x, gamma_matrix @ x)))
    return max(val, 0.0)


def energy_balance_residual(amplitudes, matrices, params):
    """Relative mismatch between total scattering and absorbed drive power.

    Stationarity gives x^dag Gamma x = 2 Omega Im(x^dag v), a direct
    consequence of A + A^dag = Gamma.  Returns 0 for omega = 0.
    """
    if params.omega == 0.0:
        return 0.0
    x = amplitudes.x
    total = float(np.real(np.vdot(x, matrices.total @ x)))
    absorbed = 2.0 * params.omega * float(np.imag(np.vdot(x, amplitudes.drive)))
    if total == 0.0:
        return 0.0 if absorbed == 0.0 else np.inf
    return abs(total - absorbed) / abs(total)
