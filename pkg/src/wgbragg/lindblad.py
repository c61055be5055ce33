"""Exact Lindblad steady state on the full 2^N Hilbert space (small N oracle).

The master equation is

    drho/dt = -i[H, rho] + sum_jl Gamma_jl (sigma_l rho sigma_j^dag
                                            - 1/2 {sigma_j^dag sigma_l, rho})

with H = sum_j (Omega e^{i phi_j} sigma_j^dag + h.c.) - Delta sum_j n_j
+ sum_{j!=l} V_jl sigma_j^dag sigma_l, using the same coupling matrices and
detuning sign as the weak-drive solver.  Superoperators are dense with
column-stacked vectorization; the hard cap N <= 6 keeps them at 4096^2.
"""

import numpy as np

from .errors import CapabilityError, NumericalError
from .model import K0, guided_coupling_matrices

N_CAP = 6


def _lowering_ops(n):
    """Dense sigma_j = |g><e| acting on site j of an n-site chain."""
    sm = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    eye = np.eye(2, dtype=complex)
    ops = []
    for j in range(n):
        op = np.array([[1.0]], dtype=complex)
        for k in range(n):
            op = np.kron(op, sm if k == j else eye)
        ops.append(op)
    return ops


def _vec(rho):
    return rho.reshape(-1, order="F")


def _unvec(v):
    dim = int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim, order="F")


def build_liouvillian(params, matrices=None):
    """Dense generator L with vec(drho/dt) = L vec(rho).  Requires N <= 6."""
    if matrices is None:
        matrices = guided_coupling_matrices(params)
    z = matrices.positions
    n = z.size
    if n > N_CAP:
        raise CapabilityError(
            f"Lindblad oracle capped at N <= {N_CAP} sites, got {n}")
    sigma = _lowering_ops(n)
    dim = 2**n
    eye = np.eye(dim, dtype=complex)

    phi = K0 * z * np.cos(params.theta)
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(n):
        sj = sigma[j]
        h += params.omega * (np.exp(1j * phi[j]) * sj.conj().T
                             + np.exp(-1j * phi[j]) * sj)
        h -= params.delta * (sj.conj().T @ sj)
    v = matrices.v_coherent
    for j in range(n):
        for l in range(n):
            if j != l:
                h += v[j, l] * (sigma[j].conj().T @ sigma[l])

    lio = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    gtot = matrices.total
    for j in range(n):
        for l in range(n):
            g = gtot[j, l]
            if g == 0.0:
                continue
            jump = np.kron(sigma[j].conj(), sigma[l])
            e_jl = sigma[j].conj().T @ sigma[l]
            lio += g * (jump - 0.5 * np.kron(eye, e_jl) - 0.5 * np.kron(e_jl.T, eye))
    return lio


def steady_density(lio, method="null"):
    """Steady state of the generator: trace-one Hermitian rho with L rho = 0.

    method="null" takes the singular vector of the smallest singular value;
    method="integrate" relaxes rho from the ground state until ||drho/dt||
    is negligible.  Raises NumericalError when the null space is degenerate
    (not expected while any dissipation is present).
    """
    dim2 = lio.shape[0]
    dim = int(round(np.sqrt(dim2)))
    if method == "null":
        _, s, vh = np.linalg.svd(lio)
        if s[-2] < 1e-10 * max(s[0], 1.0):
            raise NumericalError(
                f"steady state ambiguous: two smallest singular values "
                f"{s[-1]:.3e}, {s[-2]:.3e}")
        rho = _unvec(vh[-1].conj())
    elif method == "integrate":
        from scipy.integrate import solve_ivp

        rho0 = np.zeros((dim, dim), dtype=complex)
        rho0[0, 0] = 1.0  # all-ground state is the first basis vector
        y0 = _vec(rho0)
        t_end = 400.0
        sol = solve_ivp(lambda _, y: lio @ y, (0.0, t_end), y0,
                        rtol=1e-10, atol=1e-12, method="DOP853")
        y = sol.y[:, -1]
        if np.linalg.norm(lio @ y) > 1e-10:
            raise NumericalError("time integration did not reach stationarity")
        rho = _unvec(y)
    else:
        raise ValueError(f"unknown method {method!r}")

    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise NumericalError("null vector has vanishing trace")
    return rho / tr


def guided_rate_exact(rho, gamma_matrix):
    """Channel rate sum_jl Gamma_jl Tr(rho sigma_j^dag sigma_l) from a density matrix."""
    dim = rho.shape[0]
    n = int(round(np.log2(dim)))
    sigma = _lowering_ops(n)
    rate = 0.0
    for j in range(n):
        for l in range(n):
            g = gamma_matrix[j, l]
            if g == 0.0:
                continue
            rate += (g * np.trace(rho @ sigma[j].conj().T @ sigma[l])).real
    return float(rate)
