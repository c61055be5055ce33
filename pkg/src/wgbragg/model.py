"""Physical parameter space and coupling matrices for an emitter array on a waveguide.

Natural units are used throughout: the total single-emitter decay rate is
Gamma = 1, lengths are in units of the drive wavelength lambda (so k0 = 2*pi),
rates are in units of Gamma and angles in radians.  The guided mode propagates
along the array axis with wavenumber k_f = 2*pi*n_eff.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

K0 = 2.0 * np.pi

RATE_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Validated array geometry, drive and coupling rates.

    occupation marks which lattice sites hold an emitter; the number of True
    entries is the atom number N.  Build instances through make_params, which
    enforces the invariants (rates normalized to Gamma = 1, theta in [0, pi],
    at least one occupied site).
    """

    n_sites: int
    occupation: np.ndarray
    a: float
    n_eff: float
    omega: float
    delta: float
    theta: float
    gamma_r: float
    gamma_l: float
    gamma_u: float

    @property
    def n_atoms(self):
        return int(np.count_nonzero(self.occupation))

    @property
    def beta(self):
        return self.gamma_r + self.gamma_l

    @property
    def directionality(self):
        """(gamma_r - gamma_l) / beta, or 0.0 for beta = 0."""
        b = self.beta
        if b == 0.0:
            return 0.0
        return (self.gamma_r - self.gamma_l) / b

    @property
    def filling(self):
        return self.n_atoms / self.n_sites

    @property
    def k_f(self):
        return K0 * self.n_eff

    def replace(self, **kw):
        """Return a validated copy with the given fields changed."""
        vals = dict(
            n_sites=self.n_sites, occupation=self.occupation, a=self.a,
            n_eff=self.n_eff, omega=self.omega, delta=self.delta,
            theta=self.theta, gamma_r=self.gamma_r, gamma_l=self.gamma_l,
            gamma_u=self.gamma_u,
        )
        vals.update(kw)
        return make_params(**vals)


@dataclass(frozen=True)
class CouplingMatrices:
    """Dissipation matrices (right/left guided, unguided) and coherent coupling V.

    All are N x N complex with N the number of occupied sites; positions holds
    the occupied-site coordinates z_j in units of lambda, ascending.
    """

    gamma_right: np.ndarray
    gamma_left: np.ndarray
    gamma_unguided: np.ndarray
    v_coherent: np.ndarray
    positions: np.ndarray

    @property
    def total(self):
        return self.gamma_right + self.gamma_left + self.gamma_unguided


def rates_from_beta_d(beta, d):
    """Split a guided fraction beta and directionality d into (gamma_r, gamma_l, gamma_u)."""
    if not (0.0 <= beta <= 1.0):
        raise ValidationError(f"beta must lie in [0, 1], got {beta}")
    if not (-1.0 <= d <= 1.0):
        raise ValidationError(f"directionality must lie in [-1, 1], got {d}")
    gamma_r = 0.5 * beta * (1.0 + d)
    gamma_l = 0.5 * beta * (1.0 - d)
    return gamma_r, gamma_l, 1.0 - beta


def make_params(n_sites=None, occupation=None, a=1.0, n_eff=1.2, omega=0.01,
                delta=0.0, theta=0.0, gamma_r=0.0707, gamma_l=0.0,
                gamma_u=0.9293):
    """Validate raw values and build a ModelParams.

    Either n_sites (full occupation) or an explicit occupation mask must be
    given.  Raises ValidationError on non-finite input, unnormalized rates,
    negative rates, an empty mask, or theta outside [0, pi].
    """
    if occupation is None:
        if n_sites is None:
            raise ValidationError("either n_sites or occupation is required")
        occupation = np.ones(int(n_sites), dtype=bool)
    occupation = np.asarray(occupation, dtype=bool)
    if occupation.ndim != 1 or occupation.size == 0:
        raise ValidationError("occupation must be a nonempty 1-d mask")
    if n_sites is None:
        n_sites = occupation.size
    n_sites = int(n_sites)
    if n_sites != occupation.size:
        raise ValidationError(
            f"n_sites={n_sites} does not match occupation length {occupation.size}")
    if n_sites < 1:
        raise ValidationError("n_sites must be >= 1")
    if not np.any(occupation):
        raise ValidationError("occupation mask holds no atoms")

    scalars = dict(a=a, n_eff=n_eff, omega=omega, delta=delta, theta=theta,
                   gamma_r=gamma_r, gamma_l=gamma_l, gamma_u=gamma_u)
    for name, val in scalars.items():
        if not np.isfinite(val):
            raise ValidationError(f"{name} must be finite, got {val}")
    if a <= 0:
        raise ValidationError(f"lattice constant a must be > 0, got {a}")
    if not (0.0 <= theta <= np.pi):
        raise ValidationError(f"theta must lie in [0, pi], got {theta}")
    for name in ("gamma_r", "gamma_l", "gamma_u"):
        if scalars[name] < 0:
            raise ValidationError(f"{name} must be >= 0, got {scalars[name]}")
    total = gamma_r + gamma_l + gamma_u
    if abs(total - 1.0) > RATE_SUM_TOL:
        raise ValidationError(
            f"decay rates must sum to 1 (Gamma), got {total!r}")

    occupation.setflags(write=False)
    return ModelParams(n_sites=n_sites, occupation=occupation, a=float(a),
                       n_eff=float(n_eff), omega=float(omega),
                       delta=float(delta), theta=float(theta),
                       gamma_r=float(gamma_r), gamma_l=float(gamma_l),
                       gamma_u=float(gamma_u))


def positions_from_mask(params):
    """Occupied-site coordinates z_j = a * site_index, ascending."""
    idx = np.flatnonzero(params.occupation)
    return params.a * idx.astype(float)


def guided_coupling_matrices(params):
    """Build the guided dissipation matrices and the coherent coupling V.

    Phase convention (j, l label occupied sites, d = z_j - z_l):

        Gamma^R_jl = gamma_r * exp(-i k_f d)
        Gamma^L_jl = gamma_l * exp(+i k_f d)
        V_jl = -(i/2) gamma_r sgn(d) exp(-i k_f d)
               +(i/2) gamma_l sgn(d) exp(+i k_f d),   V_jj = 0
        Gamma^u = gamma_u * I

    The sign/phase choice is pinned by the requirement that the unidirectional
    (gamma_l = 0) steady-state solve reproduces the closed-form transfer sum
    with k_eff = k0 cos(theta) + k_f; the mirrored choice gives the
    delta-reflected spectrum and is rejected by that contract.
    """
    z = positions_from_mask(params)
    d = z[:, None] - z[None, :]
    sg = np.sign(d)
    kf = params.k_f
    phase_r = np.exp(-1j * kf * d)
    phase_l = np.exp(+1j * kf * d)
    gr = params.gamma_r * phase_r
    gl = params.gamma_l * phase_l
    gu = params.gamma_u * np.eye(len(z), dtype=complex)
    v = -0.5j * params.gamma_r * sg * phase_r + 0.5j * params.gamma_l * sg * phase_l
    np.fill_diagonal(v, 0.0)
    return CouplingMatrices(gamma_right=gr, gamma_left=gl, gamma_unguided=gu,
                            v_coherent=v, positions=z)


def collective_rates(matrices):
    """Eigenvalues of the total dissipation matrix, sorted descending.

    The total matrix is Hermitian PSD; round-off can push eigenvalues a hair
    below zero, so anything above -1e-12 is clipped to 0.
    """
    evals = np.linalg.eigvalsh(matrices.total)
    evals = np.clip(evals, 0.0, None)
    return evals[::-1]
