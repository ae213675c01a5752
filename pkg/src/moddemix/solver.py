"""Spectral initialization and regularized Wirtinger gradient descent.

`initialize` builds the starting point from the leading singular triple of
each back-projected observation, pushed into the incoherent set by a convex
projection.  `solve` then runs simultaneous Wirtinger updates of all channel
and coefficient blocks, by default with a backtracking step size that
guarantees a non-increasing objective.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .objective import (
    DegenerateInputError,
    PenaltyParams,
    coherences,
    grad_total,
    loss_measurement,
    loss_total,
    penalty,
)
from .operators import (
    BlockFactorPair,
    MeasurementEnsemble,
    ObservationVector,
    adjoint_component,
    dft_basis,
    operator_norm,
)

__all__ = [
    "SolverConfig",
    "InitResult",
    "SolveTrace",
    "DivergenceError",
    "NumericalFailureError",
    "leading_singular_triple",
    "project_incoherent",
    "initialize",
    "descend_step",
    "solve",
]


class DivergenceError(RuntimeError):
    """Fixed-step descent blew up; retry with a smaller step size."""


class NumericalFailureError(RuntimeError):
    """A gradient or loss evaluation produced non-finite values."""


@dataclass
class SolverConfig:
    """Penalty, step and stopping parameters.

    eta is either the string "backtracking" (default) or a fixed positive
    step size.  tol is the relative-error stopping threshold used when the
    ground truth is supplied; grad_tol stops on gradient norm below
    grad_tol * d^2.  mu/nu are blind-mode coherence bounds, used when no
    truth is available or oracle_coherence is off.
    """

    eta: float | str = "backtracking"
    max_iters: int = 5000
    tol: float = 1e-3
    grad_tol: float = 1e-7
    rho: float | None = None
    mu: float | None = None
    nu: float | None = None
    oracle_coherence: bool = True
    power_iters: int = 200
    power_tol: float = 1e-10
    projection_tol: float = 1e-8
    projection_max_iters: int = 500
    sequential: bool = False
    start: BlockFactorPair | None = None
    stall_window: int = 50
    stall_rtol: float = 1e-13
    penalty: PenaltyParams | None = None

    def __post_init__(self):
        if isinstance(self.eta, str):
            if self.eta != "backtracking":
                raise ValueError(f"unknown step mode {self.eta!r}")
        elif self.eta <= 0:
            raise ValueError("fixed step size must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0 or self.grad_tol <= 0 or self.projection_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class InitResult:
    """Output of the spectral initializer: leading singular values d_n, the
    unit singular vector pairs, and the projected scaled starting point."""

    d_n: np.ndarray
    raw_channels: np.ndarray      # (N, M) unit left singular vectors
    raw_coefficients: np.ndarray  # (N, K) unit right singular vectors
    start: BlockFactorPair


@dataclass
class SolveTrace:
    """Per-iteration history.  Row 0 is the starting point."""

    t: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    f_tilde: np.ndarray = field(default_factory=lambda: np.empty(0))
    f: np.ndarray = field(default_factory=lambda: np.empty(0))
    g: np.ndarray = field(default_factory=lambda: np.empty(0))
    rel_err: np.ndarray = field(default_factory=lambda: np.empty(0))
    grad_norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    stop_reason: str = ""
    iterations: int = 0


def leading_singular_triple(A: np.ndarray, iters: int = 200,
                            tol: float = 1e-10) -> tuple[float, np.ndarray, np.ndarray]:
    """Leading singular triple (d, u, v) of a complex matrix by power
    iteration on A^H A.  Deterministic start from the dominant column."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    col_norms = np.linalg.norm(A, axis=0)
    if not np.any(col_norms > 0):
        raise DegenerateInputError("zero matrix has no leading singular triple")
    v = np.zeros(A.shape[1], dtype=complex)
    v[int(np.argmax(col_norms))] = 1.0
    sigma_sq = 0.0
    converged = False
    for _ in range(iters):
        w = A.conj().T @ (A @ v)
        new_sigma_sq = np.linalg.norm(w)
        if new_sigma_sq == 0.0:
            break
        v = w / new_sigma_sq
        if abs(new_sigma_sq - sigma_sq) <= tol * new_sigma_sq:
            sigma_sq = new_sigma_sq
            converged = True
            break
        sigma_sq = new_sigma_sq
    if not converged:
        warnings.warn("power iteration did not converge; returning best triple",
                      RuntimeWarning, stacklevel=2)
    Av = A @ v
    d = float(np.linalg.norm(Av))
    if d == 0.0:
        raise DegenerateInputError("matrix numerically rank deficient at start column")
    return d, Av / d, v


def project_incoherent(g: np.ndarray, basis: np.ndarray, bound: float,
                       tol: float = 1e-8, max_iters: int = 500) -> np.ndarray:
    """Euclidean projection of g onto {z : sqrt(rows) * ||basis z||_inf <= bound}.

    basis must be a tall matrix with orthonormal columns (partial DFT or a
    coding matrix).  Square unitary bases use the closed-form spectral clip;
    tall bases use Dykstra's alternating projections between the range of the
    basis and the infinity ball, which converges to the exact projection.
    The returned point is always feasible (a final rescale enforces the
    constraint if the iteration hits max_iters first).
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    basis = np.asarray(basis)
    g = np.asarray(g, dtype=complex)
    rows, cols = basis.shape
    if g.shape != (cols,):
        raise ValueError(f"point length {g.shape} incompatible with basis {basis.shape}")
    radius = bound / np.sqrt(rows)
    if not np.any(g):
        return np.zeros(cols, dtype=complex)

    def clip(u):
        mag = np.abs(u)
        return np.where(mag > radius, u * (radius / np.maximum(mag, 1e-300)), u)

    if rows == cols:
        return basis.conj().T @ clip(basis @ g)

    u = basis @ g
    p = np.zeros_like(u)
    q = np.zeros_like(u)
    scale = max(1.0, float(np.linalg.norm(u)))
    converged = False
    for _ in range(max_iters):
        y = clip(u + p)
        p = u + p - y
        w = y + q
        u_new = basis @ (basis.conj().T @ w)
        q = w - u_new
        step = np.linalg.norm(u_new - u)
        u = u_new
        infeas = max(0.0, float(np.max(np.abs(u))) - radius)
        if step <= tol * scale and infeas <= tol * radius:
            converged = True
            break
    if not converged:
        warnings.warn("incoherence projection hit max_iters; clipping to feasibility",
                      RuntimeWarning, stacklevel=2)
    z = basis.conj().T @ u
    attained = np.sqrt(rows) * np.max(np.abs(basis @ z))
    if attained > bound:
        z *= bound / attained
    return z


def initialize(ens: MeasurementEnsemble, y_hat: ObservationVector,
               mu: float, nu: float, cfg: SolverConfig | None = None) -> InitResult:
    """Spectral initialization: per component, the leading singular triple of
    the back-projected observation, scaled by sqrt(d_n) and projected into
    the incoherent set."""
    cfg = cfg or SolverConfig()
    y_hat.check_dims(ens.dims)
    if not np.any(y_hat.samples):
        raise DegenerateInputError("cannot initialize from a zero observation")
    d = ens.dims
    fm = dft_basis(d.L, d.M)
    d_n = np.empty(d.N)
    raw_h = np.empty((d.N, d.M), dtype=complex)
    raw_x = np.empty((d.N, d.K), dtype=complex)
    u0 = np.empty((d.N, d.M), dtype=complex)
    v0 = np.empty((d.N, d.K), dtype=complex)
    for n in range(d.N):
        block = adjoint_component(ens, n, y_hat.samples)
        dn, hv, xv = leading_singular_triple(block, cfg.power_iters, cfg.power_tol)
        d_n[n] = dn
        raw_h[n] = hv
        raw_x[n] = xv
        root = np.sqrt(dn)
        u0[n] = project_incoherent(root * hv, fm, 2 * root * mu,
                                   cfg.projection_tol, cfg.projection_max_iters)
        v0[n] = project_incoherent(root * xv, ens.coding[n], 2 * root * nu,
                                   cfg.projection_tol, cfg.projection_max_iters)
    return InitResult(d_n=d_n, raw_channels=raw_h, raw_coefficients=raw_x,
                      start=BlockFactorPair(u0, v0))


def _check_finite(g: BlockFactorPair) -> None:
    if not (np.all(np.isfinite(g.channels)) and np.all(np.isfinite(g.coefficients))):
        raise NumericalFailureError("non-finite gradient")


def _apply_step(z: BlockFactorPair, g: BlockFactorPair, eta: float) -> BlockFactorPair:
    return BlockFactorPair(z.channels - eta * g.channels,
                           z.coefficients - eta * g.coefficients)


def _backtrack(ens, z, y_hat, p, g, gn_sq, f_cur, eta, min_eta=1e-20):
    """Halve eta until sufficient decrease; returns (z_new, f_new, eta) or
    (z, f_cur, 0.0) when no decrease is achievable (plateau)."""
    while eta > min_eta:
        trial = _apply_step(z, g, eta)
        f_trial = loss_total(ens, trial, y_hat, p)
        if f_trial <= f_cur - 0.05 * eta * gn_sq:
            return trial, f_trial, eta
        eta *= 0.5
    return z, f_cur, 0.0


def descend_step(ens: MeasurementEnsemble, z: BlockFactorPair,
                 y_hat: ObservationVector, cfg: SolverConfig) -> tuple[BlockFactorPair, dict]:
    """One simultaneous Wirtinger update of all 2N blocks from a single
    gradient evaluation.  Requires cfg.penalty to be set."""
    if cfg.penalty is None:
        raise ValueError("descend_step requires cfg.penalty")
    p = cfg.penalty
    g = grad_total(ens, z, y_hat, p)
    _check_finite(g)
    gn_sq = float(np.linalg.norm(g.channels) ** 2 + np.linalg.norm(g.coefficients) ** 2)
    f_cur = loss_total(ens, z, y_hat, p)
    if isinstance(cfg.eta, str):
        eta0 = 1.0 / (2.0 * operator_norm(ens) ** 2 * p.d)
        z_new, f_new, eta = _backtrack(ens, z, y_hat, p, g, gn_sq, f_cur, eta0)
    else:
        eta = cfg.eta
        z_new = _apply_step(z, g, eta)
        f_new = loss_total(ens, z_new, y_hat, p)
    return z_new, {"eta": eta, "f_before": f_cur, "f_after": f_new,
                   "grad_norm": float(np.sqrt(gn_sq))}


def _normalize_output(z: BlockFactorPair) -> BlockFactorPair:
    """Balance per-component factor norms and fix the phase so the first
    nonzero channel entry is real positive; leaves h_n x_n^* unchanged."""
    h = z.channels.copy()
    x = z.coefficients.copy()
    for n in range(h.shape[0]):
        hn, xn = np.linalg.norm(h[n]), np.linalg.norm(x[n])
        if hn == 0.0 or xn == 0.0:
            continue
        nz = np.nonzero(h[n])[0][0]
        theta = np.angle(h[n][nz])
        beta = np.sqrt(xn / hn) * np.exp(-1j * theta)
        h[n] *= beta
        x[n] *= np.exp(-1j * theta) / np.sqrt(xn / hn)
    return BlockFactorPair(h, x)


def solve(ens: MeasurementEnsemble, y_hat: ObservationVector,
          cfg: SolverConfig | None = None,
          truth: BlockFactorPair | None = None) -> tuple[BlockFactorPair, SolveTrace]:
    """Initialize (unless cfg.start is given) and descend until max_iters,
    a small gradient, or (with truth) a small relative error."""
    from .instances import relative_error

    cfg = cfg or SolverConfig()
    y_hat.check_dims(ens.dims)

    if cfg.oracle_coherence and truth is not None:
        rep = coherences(ens, truth)
        mu, nu = rep.mu, rep.nu
    elif cfg.mu is not None and cfg.nu is not None:
        mu, nu = cfg.mu, cfg.nu
    else:
        raise ValueError("need cfg.mu/cfg.nu bounds when no oracle truth is available")

    if cfg.start is not None:
        z = cfg.start.copy()
        d_n = np.linalg.norm(z.channels, axis=1) * np.linalg.norm(z.coefficients, axis=1)
        d_n = np.where(d_n > 0, d_n, 1.0)
    else:
        init = initialize(ens, y_hat, mu, nu, cfg)
        z = init.start
        d_n = init.d_n
    d = float(np.sqrt(np.sum(d_n**2)))
    if cfg.rho is not None:
        rho = cfg.rho
    elif y_hat.noise is not None:
        rho = d**2 + 2.0 * float(np.vdot(y_hat.noise, y_hat.noise).real)
    else:
        rho = d**2
    p = PenaltyParams(rho=rho, d=d, d_n=d_n, mu=mu, nu=nu)

    backtracking = isinstance(cfg.eta, str)
    eta0 = (1.0 / (2.0 * operator_norm(ens) ** 2 * d)) if backtracking else float(cfg.eta)
    eta = eta0

    rows = []  # (t, f_tilde, f, g, rel_err, grad_norm)

    def record(t, f_t, f_m, gn):
        err = relative_error(z, truth) if truth is not None else np.nan
        rows.append((t, f_t, f_m, f_t - f_m, err, gn))
        return err

    f_cur = loss_total(ens, z, y_hat, p)
    f_init = max(f_cur, np.finfo(float).tiny)
    stop = "max_iters"
    err = record(0, f_cur, loss_measurement(ens, z, y_hat), np.nan)
    if truth is not None and err < cfg.tol:
        stop = "rel_err"
    else:
        for t in range(1, cfg.max_iters + 1):
            g = grad_total(ens, z, y_hat, p)
            _check_finite(g)
            gn_sq = float(np.linalg.norm(g.channels) ** 2
                          + np.linalg.norm(g.coefficients) ** 2)
            gn = np.sqrt(gn_sq)
            if gn < cfg.grad_tol * d**2:
                stop = "grad_tol"
                break
            if cfg.sequential:
                z, f_cur = _sequential_pass(ens, z, y_hat, p, eta)
            elif backtracking:
                eta_try = min(2.0 * eta, eta0) if eta > 0 else eta0
                z, f_cur, eta = _backtrack(ens, z, y_hat, p, g, gn_sq, f_cur, eta_try)
                if eta == 0.0:
                    record(t, f_cur, loss_measurement(ens, z, y_hat), gn)
                    stop = "no_decrease"
                    break
            else:
                z = _apply_step(z, g, eta)
                f_cur = loss_total(ens, z, y_hat, p)
                if not np.isfinite(f_cur) or f_cur > 10.0 * f_init:
                    raise DivergenceError(
                        f"objective grew to {f_cur:.3e} (initial {f_init:.3e}); "
                        "reduce the fixed step size")
            err = record(t, f_cur, loss_measurement(ens, z, y_hat), gn)
            if truth is not None and err < cfg.tol:
                stop = "rel_err"
                break
            w = cfg.stall_window
            if len(rows) > w and rows[-1 - w][1] - f_cur <= cfg.stall_rtol * f_init:
                stop = "stall"
                break

    arr = np.array(rows, dtype=float)
    trace = SolveTrace(
        t=arr[:, 0].astype(int), f_tilde=arr[:, 1], f=arr[:, 2], g=arr[:, 3],
        rel_err=arr[:, 4], grad_norm=arr[:, 5],
        stop_reason=stop, iterations=int(arr[-1, 0]),
    )
    return _normalize_output(z), trace


def _sequential_pass(ens, z, y_hat, p, eta):
    """Gauss-Seidel variant: refresh the gradient after each component's
    channel/coefficient update.  No backtracking acceptance."""
    z = z.copy()
    for n in range(ens.dims.N):
        g = grad_total(ens, z, y_hat, p)
        _check_finite(g)
        z.channels[n] -= eta * g.channels[n]
        z.coefficients[n] -= eta * g.coefficients[n]
    return z, loss_total(ens, z, y_hat, p)
