"""Partial-DFT plumbing and the rank-1 lifted measurement maps.

The observation model sums, over ``N`` transmitters, the elementwise product
of two length-``L`` spectra: the channel spectrum ``F_M h_n`` and the coded
spectrum of the modulated message.  Everything here is FFT-backed; a dense
matrix oracle (`dense_oracle`) exists purely so tests can cross-check the
fast path.

Conventions
-----------
* ``F_W`` is the first-``W``-column slice of the unitary ``L``-point DFT.
* The lifted unknown per component is the conjugate outer product
  ``Z_n = h_n x_n^*`` (``M x K``).  With that choice the measurement map is
  linear in ``Z_n`` but conjugate-linear in the coefficient vector ``x_n``;
  the per-component map reads

      A_n(h x^*) = (F_M h) * (conj(B_n) conj(x)),   B_n = sqrt(L) F_Q R_n C_n.

  The conjugated coded spectra ``conj(B_n)`` are cached on the ensemble.
* Inner products are conjugate-linear in the first argument,
  ``<a, b> = a^H b``; the Frobenius pairing is ``<X, Y> = trace(X^H Y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dimensions",
    "MeasurementEnsemble",
    "BlockFactorPair",
    "ObservationVector",
    "partial_dft_apply",
    "partial_dft_adjoint",
    "forward_component",
    "forward_lifted",
    "forward_map",
    "adjoint_component",
    "dense_oracle",
    "operator_norm",
    "dft_basis",
]

_ORTHO_TOL = 1e-12
_DENSE_GUARD = 4096


@dataclass(frozen=True)
class Dimensions:
    """Problem geometry: sample count L, modulation length Q, channel taps M,
    subspace dimension K and number of components N."""

    L: int
    Q: int
    M: int
    K: int
    N: int

    def __post_init__(self):
        if not (1 <= self.K <= self.Q <= self.L):
            raise ValueError(f"need K <= Q <= L, got K={self.K}, Q={self.Q}, L={self.L}")
        if not (1 <= self.M <= self.L):
            raise ValueError(f"need 1 <= M <= L, got M={self.M}, L={self.L}")
        if self.N < 1:
            raise ValueError(f"need N >= 1, got N={self.N}")


def partial_dft_apply(L: int, v: np.ndarray) -> np.ndarray:
    """Apply the first-W-column slice of the unitary L-point DFT.

    ``v`` has W <= L rows; columns (if any) are transformed independently.
    Implemented as a zero-padded L-point FFT scaled by 1/sqrt(L).
    """
    v = np.asarray(v)
    if v.shape[0] > L:
        raise ValueError(f"input length {v.shape[0]} exceeds L={L}")
    return np.fft.fft(v, n=L, axis=0) / np.sqrt(L)


def partial_dft_adjoint(L: int, w: np.ndarray, W: int) -> np.ndarray:
    """Adjoint of `partial_dft_apply`: F_W^H w, truncated to the first W rows."""
    w = np.asarray(w)
    if w.shape[0] != L:
        raise ValueError(f"input length {w.shape[0]} != L={L}")
    if W > L:
        raise ValueError(f"W={W} exceeds L={L}")
    return (np.sqrt(L) * np.fft.ifft(w, axis=0))[:W]


def dft_basis(L: int, W: int) -> np.ndarray:
    """Dense L x W matrix of the partial unitary DFT (for projections/tests)."""
    return partial_dft_apply(L, np.eye(W))


@dataclass(frozen=True)
class MeasurementEnsemble:
    """Fixed problem geometry: dimensions, +-1 modulation sequences r_n and
    real orthonormal Q x K coding matrices C_n.

    The conjugated coded spectra conj(sqrt(L) F_Q R_n C_n), shape (N, L, K),
    are precomputed once and shared read-only.
    """

    dims: Dimensions
    modulation: np.ndarray  # (N, Q), entries exactly +-1
    coding: np.ndarray      # (N, Q, K), each slice orthonormal
    coded_spectra: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = self.dims
        modulation = np.asarray(self.modulation, dtype=float)
        coding = np.asarray(self.coding, dtype=float)
        if modulation.shape != (d.N, d.Q):
            raise ValueError(f"modulation shape {modulation.shape} != {(d.N, d.Q)}")
        if coding.shape != (d.N, d.Q, d.K):
            raise ValueError(f"coding shape {coding.shape} != {(d.N, d.Q, d.K)}")
        if not np.all(np.abs(modulation) == 1.0):
            raise ValueError("modulation entries must be exactly +-1")
        eye = np.eye(d.K)
        for n in range(d.N):
            err = np.linalg.norm(coding[n].T @ coding[n] - eye)
            if err > _ORTHO_TOL * max(1.0, d.K):
                raise ValueError(f"coding matrix {n} not orthonormal (defect {err:.2e})")
        # conj(B_n) with B_n = sqrt(L) F_Q diag(r_n) C_n; sqrt(L) F_Q = plain FFT
        modulated = modulation[:, :, None] * coding           # (N, Q, K)
        spectra = np.conj(np.fft.fft(modulated, n=d.L, axis=1))
        for arr in (modulation, coding, spectra):
            arr.setflags(write=False)
        object.__setattr__(self, "modulation", modulation)
        object.__setattr__(self, "coding", coding)
        object.__setattr__(self, "coded_spectra", spectra)

    def _check_component(self, n: int) -> None:
        if not 0 <= n < self.dims.N:
            raise ValueError(f"component index {n} out of range [0, {self.dims.N})")


@dataclass
class BlockFactorPair:
    """The unknowns: per-component channels h_n (N x M) and coefficient
    vectors x_n (N x K).  The lifted block of component n is h_n x_n^*."""

    channels: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=complex)
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.channels.ndim != 2 or self.coefficients.ndim != 2:
            raise ValueError("channels and coefficients must be 2-D (N x M, N x K)")
        if self.channels.shape[0] != self.coefficients.shape[0]:
            raise ValueError("channel/coefficient component counts differ")
        if not (np.all(np.isfinite(self.channels)) and np.all(np.isfinite(self.coefficients))):
            raise ValueError("non-finite entries in factor pair")

    @property
    def n_components(self) -> int:
        return self.channels.shape[0]

    def check_dims(self, dims: Dimensions) -> None:
        if self.channels.shape != (dims.N, dims.M):
            raise ValueError(f"channels shape {self.channels.shape} != {(dims.N, dims.M)}")
        if self.coefficients.shape != (dims.N, dims.K):
            raise ValueError(
                f"coefficients shape {self.coefficients.shape} != {(dims.N, dims.K)}")

    def lifted_block(self, n: int) -> np.ndarray:
        """Dense M x K outer product h_n x_n^* (tests and diagnostics only)."""
        return np.outer(self.channels[n], np.conj(self.coefficients[n]))

    def copy(self) -> "BlockFactorPair":
        return BlockFactorPair(self.channels.copy(), self.coefficients.copy())


@dataclass(frozen=True)
class ObservationVector:
    """Fourier-domain observation: samples (length L) and, in simulation
    mode, the noise realization that went into them."""

    samples: np.ndarray
    noise: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        if self.noise is not None:
            noise = np.asarray(self.noise, dtype=complex)
            if noise.shape != self.samples.shape:
                raise ValueError("noise shape differs from samples")
            object.__setattr__(self, "noise", noise)

    def check_dims(self, dims: Dimensions) -> None:
        if self.samples.shape != (dims.L,):
            raise ValueError(f"samples shape {self.samples.shape} != ({dims.L},)")


def forward_component(ens: MeasurementEnsemble, n: int,
                      h: np.ndarray, x: np.ndarray) -> np.ndarray:
    """A_n(h x^*): elementwise product of the channel spectrum with the
    conjugate-coded message spectrum.  Length-L complex output."""
    ens._check_component(n)
    d = ens.dims
    h = np.asarray(h, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if h.shape != (d.M,):
        raise ValueError(f"channel length {h.shape} != ({d.M},)")
    if x.shape != (d.K,):
        raise ValueError(f"coefficient length {x.shape} != ({d.K},)")
    return partial_dft_apply(d.L, h) * (ens.coded_spectra[n] @ np.conj(x))


def forward_lifted(ens: MeasurementEnsemble, n: int, Z: np.ndarray) -> np.ndarray:
    """A_n applied to a dense M x K lifted block (linear in Z)."""
    ens._check_component(n)
    d = ens.dims
    Z = np.asarray(Z, dtype=complex)
    if Z.shape != (d.M, d.K):
        raise ValueError(f"lifted block shape {Z.shape} != {(d.M, d.K)}")
    return np.sum(partial_dft_apply(d.L, Z) * ens.coded_spectra[n], axis=1)


def forward_map(ens: MeasurementEnsemble, z: BlockFactorPair) -> np.ndarray:
    """A(Z(h, x)) = sum_n A_n(h_n x_n^*); equals the noiseless observation."""
    z.check_dims(ens.dims)
    d = ens.dims
    spectra = partial_dft_apply(d.L, z.channels.T)                    # (L, N)
    coded = np.einsum("nlk,nk->ln", ens.coded_spectra, np.conj(z.coefficients))
    return np.sum(spectra * coded, axis=1)


def adjoint_component(ens: MeasurementEnsemble, n: int, w: np.ndarray) -> np.ndarray:
    """A_n^*(w): the M x K adjoint block, satisfying
    <A_n(Z), w> = <Z, A_n^*(w)>_F exactly.  Computed via one inverse FFT."""
    ens._check_component(n)
    d = ens.dims
    w = np.asarray(w, dtype=complex)
    if w.shape != (d.L,):
        raise ValueError(f"input length {w.shape} != ({d.L},)")
    return partial_dft_adjoint(d.L, w[:, None] * np.conj(ens.coded_spectra[n]), d.M)


def dense_oracle(ens: MeasurementEnsemble, n: int) -> np.ndarray:
    """Explicit L x (M*K) matrix of A_n (row-major (m, k) column order).

    Test oracle only; refuses lifted dimensions above the allocation guard.
    """
    ens._check_component(n)
    d = ens.dims
    if d.M * d.K > _DENSE_GUARD:
        raise ValueError(f"M*K = {d.M * d.K} exceeds dense-oracle guard {_DENSE_GUARD}")
    fcols = partial_dft_apply(d.L, np.eye(d.M))                       # (L, M)
    return (fcols[:, :, None] * ens.coded_spectra[n][:, None, :]).reshape(d.L, d.M * d.K)


def operator_norm(ens: MeasurementEnsemble, iters: int = 100, tol: float = 1e-8,
                  seed: int = 0) -> float:
    """Spectral norm of the summed lifted map A, by power iteration on A^* A
    over the block-diagonal lifted space."""
    d = ens.dims
    rng = np.random.default_rng(seed)
    blocks = rng.standard_normal((d.N, d.M, d.K)) + 1j * rng.standard_normal((d.N, d.M, d.K))
    blocks /= np.linalg.norm(blocks)
    sigma = 0.0
    for _ in range(iters):
        w = np.zeros(d.L, dtype=complex)
        for n in range(d.N):
            w += forward_lifted(ens, n, blocks[n])
        back = np.stack([adjoint_component(ens, n, w) for n in range(d.N)])
        new_sigma = np.linalg.norm(back)
        if new_sigma == 0.0:
            return 0.0
        blocks = back / new_sigma
        if abs(new_sigma - sigma) <= tol * new_sigma:
            sigma = new_sigma
            break
        sigma = new_sigma
    return float(np.sqrt(sigma))
