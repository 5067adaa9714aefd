"""Self-consistent trace system behind the deterministic resolvent equivalent.

For a k-class mixture with per-class second moments Sigma_l, weights
w_l = n_l/n and regularization z > 0, define the interference map

    I(x)_l = (1/n) tr( Sigma_l ( sum_h w_h Sigma_h / (1 + x_h) + z I_p )^-1 ).

I is entrywise increasing in x, and the start point x0_l = tr(Sigma_l)/(n z)
satisfies I(x0) <= x0 (the resolvent norm is at most 1/z), so Picard
iteration from x0 decreases monotonically to the unique nonnegative fixed
point delta'. That vector parameterizes every spectral prediction downstream.

The complex variant evaluates the same system at a spectral argument w with
Im(w) > 0 (resolvent convention Sigma_delta - w I) and is used for density
recovery near the real axis. It runs damped Picard iteration; convergence
there is flagged, not guaranteed, and callers treat a non-converged grid
point as a flagged data point rather than a fatal error.

Tolerances are empirical: the underlying contraction estimates hold for any
z bounded away from zero, with constants that play no computational role
here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import ParameterError, ShapeError
from .model import Mixture

__all__ = [
    "FixedPointSolution",
    "ComplexFixedPointSolution",
    "interference_map",
    "solve_delta",
    "solve_delta_complex",
]

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000
_MIN_DAMPING = 1.0 / 64.0


@dataclass(frozen=True)
class FixedPointSolution:
    """Result of the nonnegative fixed-point solve at real z > 0.

    ``delta`` is the fixed-point vector, ``residual`` the sup-norm of
    I(delta) - delta at the returned iterate, and ``trace`` optionally
    records the per-iteration sup-norm steps.
    """

    delta: np.ndarray
    residual: float
    iterations: int
    converged: bool
    z: float
    trace: np.ndarray | None = None


@dataclass(frozen=True)
class ComplexFixedPointSolution:
    """Damped Picard result at a complex spectral argument w, Im(w) > 0."""

    delta: np.ndarray
    residual: float
    iterations: int
    converged: bool
    w: complex
    damping: float


def _check_z(z) -> float:
    arr = np.asarray(z)
    if arr.ndim != 0 or np.iscomplexobj(arr):
        raise ParameterError(f"z must be a positive real scalar, got {z!r}")
    val = float(arr)
    if not np.isfinite(val) or val <= 0.0:
        raise ParameterError(f"z must be a positive real scalar, got {z!r}")
    return val


def _coefficients(mixture: Mixture, delta) -> np.ndarray:
    """Per-class scalars w_l / (1 + delta_l) entering Sigma_delta."""
    delta = np.asarray(delta)
    if delta.shape != (mixture.k,):
        raise ShapeError(
            f"delta has shape {delta.shape}, expected ({mixture.k},)"
        )
    return mixture.weights / (1.0 + delta)


def _dense_traces(mixture: Mixture, coeff: np.ndarray, shift) -> np.ndarray:
    """tr(Sigma_l (sum_h coeff_h Sigma_h + shift I)^-1) for every class l.

    Real positive ``shift`` uses a Cholesky factorization; complex shifts go
    through an LU factorization of the (complex symmetric, non-Hermitian)
    matrix. The resolvent is assembled explicitly because k traces against
    arbitrary class matrices are needed.
    """
    p = mixture.p
    core = np.zeros((p, p), dtype=np.result_type(coeff.dtype, type(shift)))
    for c, cls in zip(coeff, mixture.classes):
        core += c * cls.sigma
    core[np.diag_indices_from(core)] += shift
    if np.iscomplexobj(core):
        lu, piv = la.lu_factor(core, check_finite=False)
        resolvent = la.lu_solve((lu, piv), np.eye(p, dtype=complex), check_finite=False)
    else:
        cf = la.cho_factor(core, lower=True, check_finite=False)
        resolvent = la.cho_solve(cf, np.eye(p), check_finite=False)
    out = np.empty(mixture.k, dtype=resolvent.dtype)
    for l, cls in enumerate(mixture.classes):
        out[l] = np.sum(cls.sigma * resolvent)
    return out


def _spectral_traces(eigs: np.ndarray, coeff: np.ndarray, shift) -> np.ndarray:
    """Same traces in a joint eigenbasis: sum_i s_l[i] / (sum_h c_h s_h[i] + shift)."""
    denom = coeff @ eigs + shift
    return (eigs / denom).sum(axis=1)


def _map_traces(mixture: Mixture, delta, shift) -> np.ndarray:
    coeff = _coefficients(mixture, delta)
    cache = mixture.spectral()
    if cache is not None:
        return _spectral_traces(cache.class_eigs, coeff, shift)
    return _dense_traces(mixture, coeff, shift)


def interference_map(delta, mixture: Mixture, z: float) -> np.ndarray:
    """One application of the interference map I at regularization z > 0.

    ``delta`` must be entrywise nonnegative; the output again is, and is
    entrywise increasing in ``delta``.
    """
    z = _check_z(z)
    delta = np.asarray(delta, dtype=float)
    if delta.min() < 0:
        raise ParameterError("delta must be entrywise nonnegative")
    return np.real(_map_traces(mixture, delta, z)) / mixture.n


def solve_delta(
    mixture: Mixture,
    z: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    record_trace: bool = False,
) -> FixedPointSolution:
    """Solve delta = I(delta) by monotone Picard iteration from above.

    Starting from x0_l = tr(Sigma_l)/(n z) the iterates decrease
    componentwise toward the unique nonnegative fixed point; the loop stops
    once the sup-norm step falls below ``tol``. The reported residual is
    ||I(delta) - delta||_inf evaluated at the returned iterate.
    """
    z = _check_z(z)
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ParameterError(f"max_iter must be at least 1, got {max_iter}")
    cur = mixture.class_traces() / (mixture.n * z)
    steps = [] if record_trace else None
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt = np.real(_map_traces(mixture, cur, z)) / mixture.n
        step = float(np.abs(nxt - cur).max())
        if steps is not None:
            steps.append(step)
        cur = nxt
        if step <= tol:
            converged = True
            break
    final = np.real(_map_traces(mixture, cur, z)) / mixture.n
    residual = float(np.abs(final - cur).max())
    return FixedPointSolution(
        delta=cur,
        residual=residual,
        iterations=iterations,
        converged=converged,
        z=z,
        trace=np.array(steps) if steps is not None else None,
    )


def solve_delta_complex(
    mixture: Mixture,
    w: complex,
    tol: float = 1e-10,
    max_iter: int = 2_000,
    damping: float = 1.0,
) -> ComplexFixedPointSolution:
    """Damped Picard iteration for the system at spectral argument w.

    The map is I(x)_l = (1/n) tr(Sigma_l (sum_h w_h Sigma_h/(1+x_h) - w I)^-1)
    with Im(w) > 0. The update is x <- (1-beta) x + beta I(x); beta starts at
    ``damping`` and is halved whenever consecutive steps reverse direction
    (oscillation), down to a floor. Non-convergence within ``max_iter`` is
    reported through the ``converged`` flag.
    """
    w = complex(w)
    if not w.imag > 0:
        raise ParameterError(f"w must have positive imaginary part, got {w!r}")
    if not 0 < damping <= 1:
        raise ParameterError(f"damping must lie in (0, 1], got {damping}")
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    beta = float(damping)
    cur = (mixture.class_traces() / (mixture.n * abs(w))).astype(complex)
    prev_step = None
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        mapped = _map_traces(mixture, cur, -w) / mixture.n
        step = mapped - cur
        size = float(np.abs(step).max())
        if size <= tol:
            cur = mapped
            converged = True
            break
        if prev_step is not None and beta > _MIN_DAMPING:
            if np.real(np.vdot(prev_step, step)) < 0.0:
                beta = max(beta / 2.0, _MIN_DAMPING)
        cur = cur + beta * step
        prev_step = step
    mapped = _map_traces(mixture, cur, -w) / mixture.n
    residual = float(np.abs(mapped - cur).max())
    if converged and float(np.imag(cur).min()) < -tol:
        converged = False
    return ComplexFixedPointSolution(
        delta=cur,
        residual=residual,
        iterations=iterations,
        converged=converged,
        w=w,
        damping=beta,
    )
