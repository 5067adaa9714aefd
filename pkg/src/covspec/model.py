"""Mixture models for multi-class sample covariance analysis.

A data matrix X of shape (p, n) collects n independent column samples drawn
from k classes. Class l contributes n_l columns with per-class second-moment
matrix Sigma_l = E[y y^T] (uncentered: the mean, when nonzero, is part of
Sigma_l). The objects here are purely statistical descriptions; sampling
lives in :mod:`covspec.sampler` and spectral predictions in
:mod:`covspec.fixed_point` / :mod:`covspec.equivalent`.

The aspect ratio gamma = p/n and its shifted companion gamma_bar = 1 + gamma
are cached on the mixture since every error bound downstream is expressed in
terms of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError, ShapeError

__all__ = [
    "ClassModel",
    "Mixture",
    "SpectralCache",
    "toeplitz_covariance",
    "build_mixture",
    "estimate_class_model",
]

# Relative eigenvalue slack allowed when certifying positive semidefiniteness.
_PSD_SLACK = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ClassModel:
    """Second-moment description of one mixture class.

    Parameters
    ----------
    sigma:
        (p, p) symmetric PSD second-moment matrix E[y y^T].
    mean:
        (p,) mean vector of the class.
    n_l:
        Number of columns this class contributes to the data matrix.
    """

    sigma: np.ndarray
    mean: np.ndarray
    n_l: int

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        mean = np.asarray(self.mean, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ShapeError(f"sigma must be square, got shape {sigma.shape}")
        if mean.ndim != 1 or mean.shape[0] != sigma.shape[0]:
            raise ShapeError(
                f"mean has shape {mean.shape}, expected ({sigma.shape[0]},)"
            )
        if not (np.isfinite(sigma).all() and np.isfinite(mean).all()):
            raise DataError("class model entries must be finite")
        if not isinstance(self.n_l, (int, np.integer)) or self.n_l < 1:
            raise ParameterError(f"n_l must be a positive integer, got {self.n_l!r}")
        asym = np.abs(sigma - sigma.T).max() if sigma.size else 0.0
        if asym != 0.0:
            raise ShapeError(f"sigma must be exactly symmetric, max|s_ij - s_ji| = {asym:g}")
        # Sigma - mean mean^T is the centered covariance; it must be PSD up to
        # an eigenvalue slack proportional to the scale of sigma.
        scale = np.abs(sigma).max() if sigma.size else 0.0
        centered = sigma - np.outer(mean, mean)
        lo = float(np.linalg.eigvalsh(centered)[0]) if sigma.size else 0.0
        if lo < -_PSD_SLACK * max(scale, 1e-300):
            raise DataError(
                f"sigma - mean mean^T has eigenvalue {lo:g}, below the PSD slack"
            )
        object.__setattr__(self, "sigma", _freeze(sigma))
        object.__setattr__(self, "mean", _freeze(mean))
        object.__setattr__(self, "n_l", int(self.n_l))

    @property
    def p(self) -> int:
        return self.sigma.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.sigma))

    def rank(self, rtol: float = _PSD_SLACK) -> int:
        """Numerical rank of sigma: eigenvalues above rtol * max eigenvalue."""
        w = np.linalg.eigvalsh(self.sigma)
        top = w[-1] if w.size else 0.0
        if top <= 0.0:
            return 0
        return int(np.count_nonzero(w > rtol * top))


@dataclass(frozen=True)
class SpectralCache:
    """Joint eigenbasis for a mixture whose class matrices all commute.

    ``basis`` is orthogonal with basis^T Sigma_l basis = diag(class_eigs[l]).
    When the class matrices do not commute no cache exists and callers fall
    back to dense factorizations.
    """

    basis: np.ndarray
    class_eigs: np.ndarray  # shape (k, p)


@dataclass(frozen=True, eq=False)
class Mixture:
    """A k-class mixture: class models plus the total sample count n."""

    classes: tuple[ClassModel, ...]
    n: int
    _spectral: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.classes:
            raise ShapeError("a mixture needs at least one class")
        p = self.classes[0].p
        for c in self.classes:
            if c.p != p:
                raise ShapeError("all class models must share the dimension p")
        total = sum(c.n_l for c in self.classes)
        if total != self.n:
            raise ShapeError(
                f"class counts sum to {total}, expected total n = {self.n}"
            )
        if self.n < 1:
            raise ParameterError("n must be positive")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "_spectral", [False, None])

    @property
    def p(self) -> int:
        return self.classes[0].p

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def gamma(self) -> float:
        return self.p / self.n

    @property
    def gamma_bar(self) -> float:
        return 1.0 + self.gamma

    @property
    def weights(self) -> np.ndarray:
        """Class proportions n_l / n."""
        return np.array([c.n_l / self.n for c in self.classes])

    @property
    def counts(self) -> np.ndarray:
        return np.array([c.n_l for c in self.classes], dtype=int)

    def sigma(self) -> np.ndarray:
        """Population-level second moment sum_l (n_l/n) Sigma_l."""
        out = np.zeros((self.p, self.p))
        for w, c in zip(self.weights, self.classes):
            out += w * c.sigma
        return out

    def class_traces(self) -> np.ndarray:
        return np.array([c.trace() for c in self.classes])

    def spectral(self) -> SpectralCache | None:
        """Joint eigenbasis of the class matrices, or None if they do not commute.

        Computed lazily once and cached. A candidate basis is taken from a
        generic positive combination of the class matrices and certified by
        checking that it actually diagonalizes every Sigma_l; certification
        failure (non-commuting classes, or a degenerate combination) simply
        disables the fast path.
        """
        if self._spectral[0]:
            return self._spectral[1]
        cache = _joint_eigenbasis([c.sigma for c in self.classes])
        self._spectral[1] = cache
        self._spectral[0] = True
        return cache


def _joint_eigenbasis(sigmas) -> SpectralCache | None:
    p = sigmas[0].shape[0]
    k = len(sigmas)
    if k == 1:
        w, v = np.linalg.eigh(sigmas[0])
        return SpectralCache(basis=v, class_eigs=w[None, :].copy())
    scales = [max(np.abs(s).max(), 1e-300) for s in sigmas]
    for a in range(k):
        for b in range(a + 1, k):
            comm = sigmas[a] @ sigmas[b] - sigmas[b] @ sigmas[a]
            if np.abs(comm).max() > 1e-10 * scales[a] * scales[b] * p:
                return None
    # Generic combination: irrational-looking weights break ties between
    # classes so the combination is simple whenever one exists.
    combo = np.zeros_like(sigmas[0])
    for j, s in enumerate(sigmas):
        combo += (1.0 + (j + 1) / np.pi) / scales[j] * s
    _, v = np.linalg.eigh(combo)
    eigs = np.empty((k, p))
    for j, s in enumerate(sigmas):
        m = v.T @ s @ v
        d = np.diagonal(m).copy()
        off = np.abs(m - np.diag(d)).max()
        if off > 1e-10 * max(scales[j], 1e-300):
            return None
        eigs[j] = d
    return SpectralCache(basis=v, class_eigs=eigs)


def toeplitz_covariance(a: float, p: int) -> np.ndarray:
    """Symmetric Toeplitz matrix with entries a^(|i-j|+1).

    The first row reads (a, a^2, ..., a^p); for |a| < 1 the matrix is
    diagonally dominant, hence positive definite, once a > 0.
    """
    if not 0 < a < 1:
        raise ParameterError(f"toeplitz parameter must lie in (0, 1), got {a}")
    if p < 1:
        raise ParameterError(f"dimension must be positive, got {p}")
    idx = np.arange(p)
    return a ** (np.abs(idx[:, None] - idx[None, :]) + 1.0)


def build_mixture(classes, n: int) -> Mixture:
    """Assemble a Mixture from class models, checking counts against n."""
    return Mixture(classes=tuple(classes), n=n)


def estimate_class_model(samples: np.ndarray, n_l: int) -> ClassModel:
    """Estimate a ClassModel from raw columns of one class.

    ``samples`` has shape (p, m): m observed columns. The second moment is
    the uncentered average (1/m) sum_i y_i y_i^T, symmetrized so the result
    is exactly symmetric; the mean is the column average.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise ShapeError(f"samples must be 2-d, got shape {samples.shape}")
    p, m = samples.shape
    if m == 0:
        raise DataError("cannot estimate a class model from zero samples")
    if not np.isfinite(samples).all():
        raise DataError("samples contain non-finite entries")
    mean = samples.mean(axis=1)
    second = samples @ samples.T / m
    second = (second + second.T) / 2.0
    return ClassModel(sigma=second, mean=mean, n_l=n_l)
