"""Deterministic equivalents for the sample covariance resolvent.

Given a mixture and the fixed-point vector delta' of
:func:`covspec.fixed_point.solve_delta`, the deterministic resolvent

    Qbar(z) = ( sum_l w_l Sigma_l / (1 + delta'_l) + z I_p )^-1

approximates E[(X X^T/n + z I)^-1] with spectral-norm error decaying like
n^(-1/2). Its normalized trace approximates the Stieltjes transform of the
empirical spectral distribution at -z, and pushing z to a complex spectral
argument close to the real axis recovers a density profile via the usual
Im(m)/pi limit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import ConvergenceError, ParameterError, ShapeError
from .fixed_point import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    solve_delta,
    solve_delta_complex,
    _check_z,
    _coefficients,
)
from .model import Mixture

__all__ = [
    "SpectralPrediction",
    "sigma_delta",
    "deterministic_resolvent",
    "stieltjes_prediction",
    "stieltjes_from_delta",
    "density_prediction",
    "atom_at_zero",
    "empirical_resolvent",
    "empirical_stieltjes",
    "resolvent_bounds",
]

# When True, empirical_resolvent certifies the three operator-norm bounds
# ||Q|| <= 1/z, ||Q S|| <= 1, ||Q X/sqrt(n)|| <= 1/sqrt(z) on every call.
# Costs an extra eigendecomposition per call, so it is reserved for tests.
DEBUG_CHECKS = False


@dataclass(frozen=True)
class SpectralPrediction:
    """Predicted spectral density on a grid of real locations.

    ``density[j]`` approximates the continuous part of the limiting spectral
    density at ``lambdas[j]``; ``atom_at_zero`` is the predicted point mass
    at zero from rank bookkeeping. Grid points whose complex solve did not
    reach tolerance are marked in ``converged`` and carry their last iterate
    value rather than NaN.
    """

    lambdas: np.ndarray
    density: np.ndarray
    atom_at_zero: float
    epsilon: float
    converged: np.ndarray


def sigma_delta(mixture: Mixture, delta) -> np.ndarray:
    """Weighted population moment sum_l (n_l/n) Sigma_l / (1 + delta_l)."""
    delta = np.asarray(delta)
    if delta.shape != (mixture.k,):
        raise ShapeError(f"delta has shape {delta.shape}, expected ({mixture.k},)")
    if np.any(delta == -1.0):
        raise ParameterError("delta component equal to -1 divides by zero")
    coeff = mixture.weights / (1.0 + delta)
    out = np.zeros((mixture.p, mixture.p), dtype=coeff.dtype)
    for c, cls in zip(coeff, mixture.classes):
        out += c * cls.sigma
    return out


def deterministic_resolvent(mixture: Mixture, delta, z: float) -> np.ndarray:
    """Full matrix (sigma_delta + z I)^-1 via an SPD factorization."""
    z = _check_z(z)
    delta = np.asarray(delta, dtype=float)
    if delta.min() < 0:
        raise ParameterError("delta must be entrywise nonnegative")
    core = sigma_delta(mixture, delta)
    core[np.diag_indices_from(core)] += z
    cf = la.cho_factor(core, lower=True, check_finite=False)
    out = la.cho_solve(cf, np.eye(mixture.p), check_finite=False)
    return (out + out.T) / 2.0


def stieltjes_from_delta(mixture: Mixture, delta, z: float) -> float:
    """(1/p) tr Qbar(z) at a given fixed-point vector.

    The trace is computed from the factorization alone: with
    sigma_delta + zI = L L^T, tr Qbar = ||L^-1||_F^2. No full inverse is
    assembled. A joint-eigenbasis cache, when present, shortcuts both.
    """
    z = _check_z(z)
    cache = mixture.spectral()
    coeff = _coefficients(mixture, np.asarray(delta, dtype=float))
    if cache is not None:
        denom = coeff @ cache.class_eigs + z
        return float((1.0 / denom).sum() / mixture.p)
    core = sigma_delta(mixture, np.asarray(delta, dtype=float))
    core[np.diag_indices_from(core)] += z
    lower = la.cholesky(core, lower=True, check_finite=False)
    inv_l = la.solve_triangular(
        lower, np.eye(mixture.p), lower=True, check_finite=False
    )
    return float((inv_l**2).sum() / mixture.p)


def stieltjes_prediction(
    mixture: Mixture,
    z: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """Predicted Stieltjes transform value m(-z) = (1/p) tr Qbar(z).

    Raises :class:`ConvergenceError` if the underlying fixed point does not
    reach tolerance.
    """
    sol = solve_delta(mixture, z, tol=tol, max_iter=max_iter)
    if not sol.converged:
        raise ConvergenceError(
            f"fixed point did not converge at z={z} "
            f"(residual {sol.residual:.3e} after {sol.iterations} iterations)",
            solution=sol,
        )
    return stieltjes_from_delta(mixture, sol.delta, z)


def atom_at_zero(mixture: Mixture) -> float:
    """Point mass at zero forced by rank bookkeeping.

    The data matrix has rank at most sum_l min(n_l, rank Sigma_l), so at
    least p minus that many eigenvalues of the sample covariance vanish
    exactly. For full-rank classes this reduces to max(0, 1 - 1/gamma).
    """
    reachable = sum(min(c.n_l, c.rank()) for c in mixture.classes)
    return max(0, mixture.p - reachable) / mixture.p


def _density_point(mixture: Mixture, lam: float, epsilon: float, tol, max_iter):
    w = complex(lam, epsilon)
    sol = solve_delta_complex(mixture, w, tol=tol, max_iter=max_iter)
    cache = mixture.spectral()
    coeff = _coefficients(mixture, sol.delta)
    if cache is not None:
        denom = coeff @ cache.class_eigs - w
        m = (1.0 / denom).sum() / mixture.p
    else:
        core = sigma_delta(mixture, sol.delta)
        core = core.astype(complex)
        core[np.diag_indices_from(core)] -= w
        lu, piv = la.lu_factor(core, check_finite=False)
        q = la.lu_solve((lu, piv), np.eye(mixture.p, dtype=complex), check_finite=False)
        m = np.trace(q) / mixture.p
    return max(float(m.imag) / np.pi, 0.0), sol.converged


def density_prediction(
    mixture: Mixture,
    lambdas,
    epsilon: float,
    tol: float = 1e-10,
    max_iter: int = 2_000,
    workers: int = 1,
) -> SpectralPrediction:
    """Continuous spectral density profile on a real grid.

    Each grid point solves the complex system at w = lambda + i epsilon from
    a cold start, so points are independent and may be evaluated in
    parallel; results are assembled by index either way.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise ShapeError("lambda grid must be a nonempty 1-d array")
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    if np.any(np.diff(lambdas) <= 0):
        raise ParameterError("lambda grid must be strictly increasing")
    atom = atom_at_zero(mixture)
    mixture.spectral()  # materialize the cache once, outside the worker pool

    def one(lam):
        return _density_point(mixture, lam, epsilon, tol, max_iter)

    if workers > 1 and lambdas.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, lambdas))
    else:
        results = [one(lam) for lam in lambdas]
    density = np.array([r[0] for r in results])
    converged = np.array([r[1] for r in results], dtype=bool)
    return SpectralPrediction(
        lambdas=lambdas,
        density=density,
        atom_at_zero=atom,
        epsilon=float(epsilon),
        converged=converged,
    )


def empirical_resolvent(X: np.ndarray, z: float) -> np.ndarray:
    """(X X^T/n + z I)^-1 for a data matrix X of shape (p, n)."""
    z = _check_z(z)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-d, got shape {X.shape}")
    p, n = X.shape
    if n == 0:
        raise ShapeError("X must have at least one column")
    S = X @ X.T / n
    S = (S + S.T) / 2.0
    S[np.diag_indices_from(S)] += z
    cf = la.cho_factor(S, lower=True, check_finite=False)
    Q = la.cho_solve(cf, np.eye(p), check_finite=False)
    Q = (Q + Q.T) / 2.0
    if DEBUG_CHECKS:
        norms = resolvent_bounds(X, z, Q)
        slack = 1.0 + 1e-8
        assert norms["resolvent"] <= slack / z, norms
        assert norms["resolvent_covariance"] <= slack, norms
        assert norms["resolvent_data"] <= slack / np.sqrt(z), norms
    return Q


def resolvent_bounds(X: np.ndarray, z: float, Q: np.ndarray | None = None) -> dict:
    """Operator norms certifying the resolvent contraction bounds.

    Returns ||Q||, ||Q S|| and ||Q X/sqrt(n)|| for S = X X^T/n; the three
    are bounded by 1/z, 1 and 1/sqrt(z) respectively.
    """
    X = np.asarray(X, dtype=float)
    p, n = X.shape
    if Q is None:
        Q = empirical_resolvent(X, z)
    S = X @ X.T / n
    return {
        "resolvent": float(np.linalg.norm(Q, 2)),
        "resolvent_covariance": float(np.linalg.norm(Q @ S, 2)),
        "resolvent_data": float(np.linalg.norm(Q @ X, 2) / np.sqrt(n)),
    }


def empirical_stieltjes(X: np.ndarray, z: float) -> float:
    """(1/p) tr (X X^T/n + z I)^-1."""
    z = _check_z(z)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ShapeError(f"X must be 2-d with at least one column, got {X.shape}")
    p, n = X.shape
    S = X @ X.T / n
    S = (S + S.T) / 2.0
    S[np.diag_indices_from(S)] += z
    lower = la.cholesky(S, lower=True, check_finite=False)
    inv_l = la.solve_triangular(lower, np.eye(p), lower=True, check_finite=False)
    return float((inv_l**2).sum() / p)
