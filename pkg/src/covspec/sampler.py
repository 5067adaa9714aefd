"""Column samplers for mixture data matrices.

Columns are generated one stream per column from a counter-based generator
(Philox, 64-bit keys): column j of a run seeded with s draws its latent
vector from the stream keyed (s, j). Generation order therefore never
affects the output, parallel or not, and a (seed, spec) pair pins the data
matrix byte for byte.

Three generator kinds are supported:

- ``gaussian``: y = mean + factor g, with g standard normal.
- ``lipschitz-of-gaussian``: y = mean + f(factor g) entrywise, f a fixed
  1-Lipschitz nonlinearity (tanh, relu, abs, or identity).
- ``bounded-affine``: y = mean + factor u with u i.i.d. symmetric entries
  in [-1, 1]; default is uniform signs (+-1), a uniform law on [-1, 1] is
  available and is rescaled by sqrt(3) inside the affine map so the latent
  second moment is the identity in both cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError, ShapeError
from .model import ClassModel, Mixture, build_mixture

__all__ = [
    "GeneratorSpec",
    "MixtureSample",
    "EmpiricalSpectrum",
    "Histogram",
    "gaussian_class_spec",
    "bounded_class_spec",
    "class_model_of",
    "mixture_of",
    "sample_class",
    "sample_mixture",
    "empirical_spectrum",
    "histogram",
    "spectral_ks_distance",
    "derive_seed",
    "principal_sqrt",
]

KINDS = ("gaussian", "lipschitz-of-gaussian", "bounded-affine")
NONLINEARITIES = ("identity", "tanh", "relu", "abs")
LATENTS = ("standard-normal", "rademacher", "uniform")

_EIG_FLOOR = 1e-10

_U64 = np.uint64


def derive_seed(seed: int, *path: int) -> int:
    """Stable 64-bit subseed for a (seed, index...) path."""
    ss = np.random.SeedSequence((int(seed),) + tuple(int(x) for x in path))
    return int(ss.generate_state(1, _U64)[0])


def _column_stream(seed: int, column: int) -> np.random.Generator:
    key = np.array([seed, column], dtype=_U64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Recipe for drawing one class's columns."""

    kind: str
    mean: np.ndarray
    factor: np.ndarray
    nonlinearity: str = "identity"
    latent: str = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown generator kind {self.kind!r}")
        if self.nonlinearity not in NONLINEARITIES:
            raise ParameterError(f"unknown nonlinearity {self.nonlinearity!r}")
        mean = np.asarray(self.mean, dtype=float)
        factor = np.asarray(self.factor, dtype=float)
        if factor.ndim != 2:
            raise ShapeError(f"factor must be 2-d, got shape {factor.shape}")
        if mean.ndim != 1 or mean.shape[0] != factor.shape[0]:
            raise ShapeError(
                f"mean has shape {mean.shape}, factor has {factor.shape[0]} rows"
            )
        if not (np.isfinite(mean).all() and np.isfinite(factor).all()):
            raise DataError("generator spec entries must be finite")
        latent = self.latent
        if latent is None:
            latent = "rademacher" if self.kind == "bounded-affine" else "standard-normal"
        if latent not in LATENTS:
            raise ParameterError(f"unknown latent law {latent!r}")
        if self.kind == "bounded-affine":
            if latent == "standard-normal":
                raise ParameterError("bounded-affine requires a bounded latent law")
            if self.nonlinearity != "identity":
                raise ParameterError("bounded-affine is affine: nonlinearity must be identity")
        else:
            if latent != "standard-normal":
                raise ParameterError(f"{self.kind} requires the standard-normal latent")
        if self.kind == "gaussian" and self.nonlinearity != "identity":
            raise ParameterError("gaussian kind takes the identity nonlinearity")
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "factor", _readonly(factor))
        object.__setattr__(self, "latent", latent)

    @property
    def p(self) -> int:
        return self.factor.shape[0]

    @property
    def dim_latent(self) -> int:
        return self.factor.shape[1]


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class MixtureSample:
    """A sampled data matrix with its class membership."""

    matrix: np.ndarray
    labels: np.ndarray
    seed: int


@dataclass(frozen=True, eq=False)
class EmpiricalSpectrum:
    """Ascending eigenvalues of X X^T / n, clamped at the numerical floor."""

    values: np.ndarray
    p: int
    n: int
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class Histogram:
    """Normalized histogram: masses sum to one over asc. bin edges."""

    edges: np.ndarray
    masses: np.ndarray
    transform: float | None = None


def principal_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues below the relative floor are treated as zero, so nearly
    singular inputs produce a clean low-rank factor.
    """
    matrix = np.asarray(matrix, dtype=float)
    w, v = np.linalg.eigh((matrix + matrix.T) / 2.0)
    top = w[-1] if w.size else 0.0
    if top < 0:
        raise DataError("matrix is negative definite; no PSD square root")
    floor = _EIG_FLOOR * max(top, 0.0)
    w = np.where(w > floor, w, 0.0)
    return (v * np.sqrt(w)) @ v.T


def gaussian_class_spec(sigma: np.ndarray, mean: np.ndarray | None = None) -> GeneratorSpec:
    """Gaussian generator matching a target second moment.

    The factor is the principal square root of sigma - mean mean^T, so
    E[y y^T] equals sigma exactly.
    """
    sigma = np.asarray(sigma, dtype=float)
    if mean is None:
        mean = np.zeros(sigma.shape[0])
    mean = np.asarray(mean, dtype=float)
    return GeneratorSpec(
        kind="gaussian",
        mean=mean,
        factor=principal_sqrt(sigma - np.outer(mean, mean)),
    )


def bounded_class_spec(
    sigma: np.ndarray,
    mean: np.ndarray | None = None,
    latent: str = "rademacher",
) -> GeneratorSpec:
    """Bounded-affine generator with the same second moment as the Gaussian one."""
    sigma = np.asarray(sigma, dtype=float)
    if mean is None:
        mean = np.zeros(sigma.shape[0])
    mean = np.asarray(mean, dtype=float)
    return GeneratorSpec(
        kind="bounded-affine",
        mean=mean,
        factor=principal_sqrt(sigma - np.outer(mean, mean)),
        latent=latent,
    )


def class_model_of(spec: GeneratorSpec, n_l: int) -> ClassModel:
    """Exact ClassModel of a spec whose second moment is analytic.

    Valid for gaussian and bounded-affine kinds (and the identity
    nonlinearity): E[y y^T] = mean mean^T + factor factor^T.
    """
    if spec.nonlinearity != "identity":
        raise ParameterError(
            "second moment is not analytic for a nonlinear pushforward; "
            "estimate it from samples instead"
        )
    second = np.outer(spec.mean, spec.mean) + spec.factor @ spec.factor.T
    second = (second + second.T) / 2.0
    return ClassModel(sigma=second, mean=spec.mean.copy(), n_l=n_l)


def mixture_of(pairs) -> Mixture:
    """Mixture of exact class models for (spec, count) pairs."""
    classes = [class_model_of(spec, count) for spec, count in pairs]
    return build_mixture(classes, sum(c.n_l for c in classes))


def _latent_block(spec: GeneratorSpec, count: int, seed: int, offset: int) -> np.ndarray:
    d = spec.dim_latent
    out = np.empty((d, count))
    for j in range(count):
        rng = _column_stream(seed, offset + j)
        if spec.latent == "standard-normal":
            out[:, j] = rng.standard_normal(d)
        elif spec.latent == "rademacher":
            out[:, j] = 2.0 * rng.integers(0, 2, size=d) - 1.0
        else:  # uniform on [-1, 1]
            out[:, j] = rng.uniform(-1.0, 1.0, size=d)
    return out


_SQRT3 = np.sqrt(3.0)


def sample_class(
    spec: GeneratorSpec, count: int, seed: int, column_offset: int = 0
) -> np.ndarray:
    """Draw ``count`` columns of one class as a (p, count) matrix.

    ``column_offset`` shifts the per-column stream indices; a mixture run
    passes each class its global column positions so the full matrix is
    reproducible independent of class interleaving.
    """
    if count < 1:
        raise ParameterError(f"count must be at least 1, got {count}")
    if not 0 <= int(seed) < 2**64:
        raise ParameterError("seed must fit in 64 bits")
    latent = _latent_block(spec, count, int(seed), int(column_offset))
    if spec.latent == "uniform":
        latent = latent * _SQRT3
    core = spec.factor @ latent
    if spec.nonlinearity == "tanh":
        core = np.tanh(core)
    elif spec.nonlinearity == "relu":
        core = np.maximum(core, 0.0)
    elif spec.nonlinearity == "abs":
        core = np.abs(core)
    return spec.mean[:, None] + core


def sample_mixture(pairs, seed: int) -> MixtureSample:
    """Draw a full (p, n) data matrix, columns grouped by class in order.

    ``pairs`` is a sequence of (GeneratorSpec, count). Labels record the
    class index of every column.
    """
    pairs = [(spec, int(count)) for spec, count in pairs]
    if not pairs:
        raise ShapeError("at least one (spec, count) pair is required")
    p = pairs[0][0].p
    for spec, count in pairs:
        if spec.p != p:
            raise ShapeError("all specs must share the dimension p")
        if count < 1:
            raise ParameterError(f"class counts must be positive, got {count}")
    n = sum(count for _, count in pairs)
    matrix = np.empty((p, n))
    labels = np.empty(n, dtype=int)
    offset = 0
    for idx, (spec, count) in enumerate(pairs):
        matrix[:, offset : offset + count] = sample_class(
            spec, count, seed, column_offset=offset
        )
        labels[offset : offset + count] = idx
        offset += count
    return MixtureSample(matrix=matrix, labels=labels, seed=int(seed))


def empirical_spectrum(X, seed: int | None = None) -> EmpiricalSpectrum:
    """Ascending spectrum of the sample covariance X X^T / n.

    Tiny negative eigenvalues from roundoff are clamped to zero; anything
    below -1e-10 times the largest eigenvalue is treated as data corruption.
    """
    if isinstance(X, MixtureSample):
        if seed is None:
            seed = X.seed
        X = X.matrix
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ShapeError(f"X must be 2-d with at least one column, got {X.shape}")
    if not np.isfinite(X).all():
        raise DataError("data matrix contains non-finite entries")
    p, n = X.shape
    S = X @ X.T / n
    S = (S + S.T) / 2.0
    vals = np.linalg.eigvalsh(S)
    top = max(vals[-1], 0.0)
    if vals[0] < -_EIG_FLOOR * max(top, 1e-300):
        raise DataError(
            f"eigenvalue {vals[0]:g} below the numerical floor; matrix corrupted"
        )
    vals = np.maximum(vals, 0.0)
    return EmpiricalSpectrum(values=vals, p=p, n=n, seed=seed)


def histogram(spectrum, bins, transform: float | None = None) -> Histogram:
    """Normalized histogram of a spectrum, optionally pushed through x -> x^t.

    ``bins`` is a bin count or an explicit ascending edge array; explicit
    edges must cover every (transformed) eigenvalue so the masses sum to
    one.
    """
    values = np.asarray(getattr(spectrum, "values", spectrum), dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ShapeError("spectrum must be a nonempty 1-d array")
    if transform is not None:
        t = float(transform)
        if t <= 0:
            raise ParameterError(f"transform exponent must be positive, got {t}")
        values = np.maximum(values, 0.0) ** t
    if np.ndim(bins) == 0:
        nbins = int(bins)
        if nbins < 1:
            raise ParameterError(f"bin count must be positive, got {bins}")
        counts, edges = np.histogram(values, bins=nbins)
    else:
        edges = np.asarray(bins, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ParameterError("bin edges must be a strictly increasing 1-d array")
        if values.min() < edges[0] or values.max() > edges[-1]:
            raise ParameterError(
                f"edges [{edges[0]:g}, {edges[-1]:g}] do not cover the spectrum "
                f"range [{values.min():g}, {values.max():g}]"
            )
        counts, edges = np.histogram(values, bins=edges)
    return Histogram(
        edges=edges,
        masses=counts / values.size,
        transform=None if transform is None else float(transform),
    )


def spectral_ks_distance(a, b) -> float:
    """Kolmogorov distance between the spectra's empirical distributions."""
    va = np.sort(np.asarray(getattr(a, "values", a), dtype=float))
    vb = np.sort(np.asarray(getattr(b, "values", b), dtype=float))
    if va.size == 0 or vb.size == 0:
        raise ShapeError("both spectra must be nonempty")
    grid = np.concatenate([va, vb])
    fa = np.searchsorted(va, grid, side="right") / va.size
    fb = np.searchsorted(vb, grid, side="right") / vb.size
    return float(np.abs(fa - fb).max())
