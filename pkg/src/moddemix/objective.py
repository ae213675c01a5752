"""Coherence parameters, the regularized loss and its Wirtinger gradients.

The objective is ``F_tilde = F + G`` where ``F`` is the squared residual of
the measurement map and ``G`` is a hinge penalty that keeps the iterates
norm-bounded and spectrally incoherent.  Gradients follow the Wirtinger
convention (derivative w.r.t. the conjugated variable), so a descent step is
``z <- z - eta * grad``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (
    BlockFactorPair,
    MeasurementEnsemble,
    ObservationVector,
    forward_map,
    partial_dft_adjoint,
    partial_dft_apply,
)

__all__ = [
    "CoherenceReport",
    "PenaltyParams",
    "NeighborhoodFlags",
    "coherences",
    "g0",
    "g0_prime",
    "loss_measurement",
    "penalty",
    "grad_measurement",
    "grad_penalty",
    "grad_total",
    "loss_total",
    "neighborhood_membership",
]


class DegenerateInputError(ValueError):
    """Raised when an operation receives an all-zero vector it cannot handle."""


@dataclass(frozen=True)
class CoherenceReport:
    """Spectral/temporal dispersion measures of a factor pair.

    mu_sq in [1, L] measures how peaky the channel spectra are, nu_sq in
    [1, Q] how peaky the coded messages are.  nu_max_sq is a diagnostic on
    the coding matrices alone.  kappa >= 1 is the component-energy spread.
    """

    mu_sq: float
    nu_sq: float
    nu_max_sq: float
    kappa: float
    d_n: np.ndarray
    d0: float

    @property
    def mu(self) -> float:
        return float(np.sqrt(self.mu_sq))

    @property
    def nu(self) -> float:
        return float(np.sqrt(self.nu_sq))


def coherences(ens: MeasurementEnsemble, z: BlockFactorPair) -> CoherenceReport:
    """Compute mu^2, nu^2, nu_max^2, per-component energies d_n and kappa."""
    z.check_dims(ens.dims)
    d = ens.dims
    h_norms = np.linalg.norm(z.channels, axis=1)
    x_norms = np.linalg.norm(z.coefficients, axis=1)
    if np.any(h_norms == 0.0) or np.any(x_norms == 0.0):
        raise DegenerateInputError("coherences undefined for zero factors")
    spectra = partial_dft_apply(d.L, z.channels.T)                  # (L, N)
    mu_sq = d.L * np.max(np.max(np.abs(spectra), axis=0) ** 2 / h_norms**2)
    coded = np.einsum("nqk,nk->qn", ens.coding, z.coefficients)     # (Q, N)
    nu_sq = d.Q * np.max(np.max(np.abs(coded), axis=0) ** 2 / x_norms**2)
    nu_max_sq = d.Q * np.max(np.sum(ens.coding**2, axis=2))
    d_n = h_norms * x_norms
    return CoherenceReport(
        mu_sq=float(mu_sq),
        nu_sq=float(nu_sq),
        nu_max_sq=float(nu_max_sq),
        kappa=float(np.max(d_n) / np.min(d_n)),
        d_n=d_n,
        d0=float(np.sqrt(np.sum(d_n**2))),
    )


@dataclass(frozen=True)
class PenaltyParams:
    """Hinge-penalty configuration: weight rho, global/per-component scale
    estimates d and d_n, and the coherence bounds mu, nu used inside G."""

    rho: float
    d: float
    d_n: np.ndarray
    mu: float
    nu: float

    def __post_init__(self):
        object.__setattr__(self, "d_n", np.asarray(self.d_n, dtype=float))
        if self.rho <= 0 or self.d <= 0 or np.any(self.d_n <= 0):
            raise ValueError("rho, d and all d_n must be positive")
        if self.mu <= 0 or self.nu <= 0:
            raise ValueError("mu and nu must be positive")


def g0(z: float) -> float:
    """Hinge: max(z - 1, 0)^2."""
    return max(z - 1.0, 0.0) ** 2


def g0_prime(z: float) -> float:
    """Derivative of the hinge: 2 max(z - 1, 0)."""
    return 2.0 * max(z - 1.0, 0.0)


def _g0_arr(z: np.ndarray) -> np.ndarray:
    return np.maximum(z - 1.0, 0.0) ** 2


def _g0_prime_arr(z: np.ndarray) -> np.ndarray:
    return 2.0 * np.maximum(z - 1.0, 0.0)


def loss_measurement(ens: MeasurementEnsemble, z: BlockFactorPair,
                     y_hat: ObservationVector) -> float:
    """Measurement loss F = ||A(Z(h, x)) - y_hat||_2^2."""
    y_hat.check_dims(ens.dims)
    residual = forward_map(ens, z) - y_hat.samples
    return float(np.vdot(residual, residual).real)


def penalty(ens: MeasurementEnsemble, z: BlockFactorPair, p: PenaltyParams) -> float:
    """Hinge penalty G: norm hinges plus spectral/coded incoherence hinges."""
    z.check_dims(ens.dims)
    d = ens.dims
    total = 0.0
    for n in range(d.N):
        dn = p.d_n[n]
        h, x = z.channels[n], z.coefficients[n]
        total += g0(float(np.vdot(h, h).real) / (2 * dn))
        total += g0(float(np.vdot(x, x).real) / (2 * dn))
        spec = np.abs(partial_dft_apply(d.L, h)) ** 2
        total += float(np.sum(_g0_arr(d.L * spec / (8 * dn * p.mu**2))))
        coded = np.abs(ens.coding[n] @ x) ** 2
        total += float(np.sum(_g0_arr(d.Q * coded / (8 * dn * p.nu**2))))
    return p.rho * total


def grad_measurement(ens: MeasurementEnsemble, z: BlockFactorPair,
                     y_hat: ObservationVector) -> BlockFactorPair:
    """Wirtinger gradient of F: per component,
    grad_h = A_n^*(residual) x_n and grad_x = [A_n^*(residual)]^H h_n,
    both evaluated without materializing the adjoint block."""
    y_hat.check_dims(ens.dims)
    z.check_dims(ens.dims)
    d = ens.dims
    residual = forward_map(ens, z) - y_hat.samples
    gh = np.empty_like(z.channels)
    gx = np.empty_like(z.coefficients)
    for n in range(d.N):
        cc = ens.coded_spectra[n]
        gh[n] = partial_dft_adjoint(d.L, residual * (np.conj(cc) @ z.coefficients[n]), d.M)
        ch_spec = partial_dft_apply(d.L, z.channels[n])
        gx[n] = cc.T @ (np.conj(residual) * ch_spec)
    return BlockFactorPair(gh, gx)


def grad_penalty(ens: MeasurementEnsemble, z: BlockFactorPair,
                 p: PenaltyParams) -> BlockFactorPair:
    """Wirtinger gradient of G.  The spectral hinge sum is an FFT, a
    real hinge weighting, and an inverse FFT; the coded hinge sum is the
    analogous weighted normal product with C_n."""
    z.check_dims(ens.dims)
    d = ens.dims
    gh = np.zeros_like(z.channels)
    gx = np.zeros_like(z.coefficients)
    for n in range(d.N):
        dn = p.d_n[n]
        h, x = z.channels[n], z.coefficients[n]

        g = g0_prime(float(np.vdot(h, h).real) / (2 * dn)) * h
        spec = partial_dft_apply(d.L, h)
        wts = _g0_prime_arr(d.L * np.abs(spec) ** 2 / (8 * dn * p.mu**2))
        g += (d.L / (4 * p.mu**2)) * partial_dft_adjoint(d.L, wts * spec, d.M)
        gh[n] = (p.rho / (2 * dn)) * g

        g = g0_prime(float(np.vdot(x, x).real) / (2 * dn)) * x
        coded = ens.coding[n] @ x
        wts = _g0_prime_arr(d.Q * np.abs(coded) ** 2 / (8 * dn * p.nu**2))
        g += (d.Q / (4 * p.nu**2)) * (ens.coding[n].T @ (wts * coded))
        gx[n] = (p.rho / (2 * dn)) * g
    return BlockFactorPair(gh, gx)


def loss_total(ens: MeasurementEnsemble, z: BlockFactorPair,
               y_hat: ObservationVector, p: PenaltyParams) -> float:
    return loss_measurement(ens, z, y_hat) + penalty(ens, z, p)


def grad_total(ens: MeasurementEnsemble, z: BlockFactorPair,
               y_hat: ObservationVector, p: PenaltyParams) -> BlockFactorPair:
    gf = grad_measurement(ens, z, y_hat)
    gg = grad_penalty(ens, z, p)
    return BlockFactorPair(gf.channels + gg.channels, gf.coefficients + gg.coefficients)


@dataclass(frozen=True)
class NeighborhoodFlags:
    """Membership in the norm, spectral-incoherence, coded-incoherence and
    proximity neighborhoods of the ground truth."""

    norm: bool
    spectral: bool
    coded: bool
    proximity: bool

    @property
    def all_incoherence(self) -> bool:
        return self.norm and self.spectral and self.coded


def neighborhood_membership(ens: MeasurementEnsemble, z: BlockFactorPair,
                            truth: BlockFactorPair, eps: float) -> NeighborhoodFlags:
    """Evaluate the four neighborhood predicates of ``z`` around ``truth``."""
    z.check_dims(ens.dims)
    truth.check_dims(ens.dims)
    d = ens.dims
    d_n0 = np.linalg.norm(truth.channels, axis=1) * np.linalg.norm(truth.coefficients, axis=1)
    if np.any(d_n0 == 0.0):
        raise DegenerateInputError("truth has a zero component")
    root = np.sqrt(d_n0)

    h_norms = np.linalg.norm(z.channels, axis=1)
    x_norms = np.linalg.norm(z.coefficients, axis=1)
    in_norm = bool(np.all(h_norms <= 2 * root) and np.all(x_norms <= 2 * root))

    report = coherences(ens, truth)
    spec_inf = np.max(np.abs(partial_dft_apply(d.L, z.channels.T)), axis=0)
    in_spec = bool(np.all(np.sqrt(d.L) * spec_inf <= 4 * report.mu * root))

    coded_inf = np.array([np.max(np.abs(ens.coding[n] @ z.coefficients[n]))
                          for n in range(d.N)])
    in_coded = bool(np.all(np.sqrt(d.Q) * coded_inf <= 4 * report.nu * root))

    prox = np.array([
        np.linalg.norm(z.lifted_block(n) - truth.lifted_block(n)) for n in range(d.N)
    ])
    in_prox = bool(np.all(prox <= eps * d_n0))
    return NeighborhoodFlags(in_norm, in_spec, in_coded, in_prox)
