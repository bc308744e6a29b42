"""Ground-truth process models: Matérn covariances, spectral lines, simulation.

Fourier convention: ``K(h) = int exp(2 pi i w.h) S(w) dw``.  The Matérn family
uses the normalization with ``K(0) = sigma^2`` and

    K(r) = sigma^2 2^(1-nu) / Gamma(nu) (a r)^nu K_nu(a r),   a = sqrt(2 nu)/rho,

whose spectral density in ``d`` dimensions is

    S(w) = sigma^2 Gamma(nu + d/2) / (Gamma(nu) pi^(d/2)) a^(2 nu) (2 pi)^d
           (a^2 + 4 pi^2 |w|^2)^(-nu - d/2).

Anisotropy enters through ``K(h) = K_iso(|A h|)`` so that
``S(w) = S_iso(A^-T w) / |det A|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy import special
from scipy.spatial.distance import cdist

from .sampling import SampleSet, make_rng

__all__ = [
    "MaternSpec",
    "SpectralLine",
    "ProcessModel",
    "matern_sdf",
    "matern_cov",
    "matern_cov_lag",
    "process_cov_matrix",
    "gp_simulate",
    "DEFAULT_LINE_POWER",
]

DEFAULT_LINE_POWER = 1e-3


@dataclass(frozen=True)
class MaternSpec:
    sigma: float = 1.0
    rho: float = 0.1
    nu: float = 0.75
    dim: int = 1
    anisotropy: np.ndarray | None = None

    def __post_init__(self):
        for name in ("sigma", "rho", "nu"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        A = np.eye(self.dim) if self.anisotropy is None else np.asarray(self.anisotropy, dtype=float)
        A = A.reshape(self.dim, self.dim)
        if abs(np.linalg.det(A)) < 1e-14 * max(1.0, np.abs(A).max()) ** self.dim:
            raise ValueError("anisotropy matrix must be invertible")
        A.setflags(write=False)
        object.__setattr__(self, "anisotropy", A)

    @property
    def alpha(self) -> float:
        return math.sqrt(2 * self.nu) / self.rho


@dataclass(frozen=True)
class SpectralLine:
    """Sinusoidal component ``power * cos(2 pi f.h)`` in the covariance.

    The spectral measure puts ``power / 2`` at each of ``+f`` and ``-f``.
    """

    freq: float | tuple
    power: float = DEFAULT_LINE_POWER

    def __post_init__(self):
        if not (self.power >= 0):
            raise ValueError("line power must be nonnegative")

    @property
    def fvec(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.freq, dtype=float))


@dataclass(frozen=True)
class ProcessModel:
    matern: MaternSpec | None = None
    lines: tuple = ()
    nugget: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if self.nugget < 0:
            raise ValueError("nugget must be nonnegative")
        if self.matern is None and not self.lines and self.nugget == 0:
            raise ValueError("model has no components")

    @property
    def dim(self) -> int:
        if self.matern is not None:
            return self.matern.dim
        if self.lines:
            return self.lines[0].fvec.size
        return 1

    @property
    def variance(self) -> float:
        """Total marginal variance ``K(0)``."""
        v = self.nugget + sum(l.power for l in self.lines)
        if self.matern is not None:
            v += self.matern.sigma ** 2
        return float(v)

    def sdf(self, omega) -> np.ndarray:
        """Absolutely continuous part of the spectrum (Matérn only)."""
        if self.matern is None:
            w = np.asarray(omega, dtype=float)
            return np.zeros(w.shape if self.dim == 1 else w.reshape(-1, self.dim).shape[0])
        return matern_sdf(self.matern, omega)

    def covariance(self, lags) -> np.ndarray:
        """Stationary covariance at lag vectors (scalar lags in 1D)."""
        h = np.asarray(lags, dtype=float)
        if self.dim == 1:
            h1 = h
            out = np.zeros(h.shape)
        else:
            h1 = h.reshape(-1, self.dim)
            out = np.zeros(h1.shape[0])
        if self.matern is not None:
            out = out + matern_cov_lag(self.matern, h1)
        for line in self.lines:
            ph = h1 * line.fvec[0] if self.dim == 1 else h1 @ line.fvec
            out = out + line.power * np.cos(2 * np.pi * ph)
        if self.nugget:
            zero = h1 == 0 if self.dim == 1 else np.all(h1 == 0, axis=1)
            out = out + self.nugget * zero
        return out


def matern_sdf(spec: MaternSpec, omega) -> np.ndarray:
    """Matérn spectral density, integrating to ``sigma^2`` over R^d."""
    w = np.asarray(omega, dtype=float)
    d, nu, a = spec.dim, spec.nu, spec.alpha
    if d == 1:
        A = float(spec.anisotropy[0, 0])
        r2 = (w / A) ** 2
        det = abs(A)
    else:
        wv = w.reshape(-1, d)
        Ainv_T = np.linalg.inv(spec.anisotropy).T
        r2 = np.sum((wv @ Ainv_T.T) ** 2, axis=1)
        det = abs(np.linalg.det(spec.anisotropy))
    p = nu + d / 2.0
    logc = (2 * math.log(spec.sigma) + special.gammaln(p) - special.gammaln(nu)
            - (d / 2.0) * math.log(math.pi) + 2 * nu * math.log(a) + d * math.log(2 * math.pi))
    return np.exp(logc - p * np.log(a * a + 4 * math.pi ** 2 * r2)) / det


def matern_cov(spec: MaternSpec, r) -> np.ndarray:
    """Isotropic Matérn covariance at distances ``r >= 0``.

    Uses the modified Bessel function of the second kind from
    :mod:`scipy.special`; ``K(0) = sigma^2`` is set exactly.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("lags must be nonnegative")
    nu = spec.nu
    z = spec.alpha * r
    out = np.full(z.shape, spec.sigma ** 2)
    pos = z > 0
    zp = z[pos]
    with np.errstate(under="ignore"):
        logk = np.log(special.kve(nu, zp)) - zp
        val = np.exp((1 - nu) * math.log(2) - special.gammaln(nu) + nu * np.log(zp) + logk)
    out[pos] = spec.sigma ** 2 * np.minimum(val, 1.0)
    return out


def matern_cov_lag(spec: MaternSpec, lags) -> np.ndarray:
    """Matérn covariance at lag vectors through the anisotropy map."""
    h = np.asarray(lags, dtype=float)
    if spec.dim == 1:
        return matern_cov(spec, np.abs(h * spec.anisotropy[0, 0]))
    h = h.reshape(-1, spec.dim)
    return matern_cov(spec, np.linalg.norm(h @ spec.anisotropy.T, axis=1))


def process_cov_matrix(model: ProcessModel, sample: SampleSet | np.ndarray) -> np.ndarray:
    """Covariance matrix ``Sigma_jk = K(x_j - x_k)`` including lines and nugget."""
    x = sample.locations if isinstance(sample, SampleSet) else np.asarray(sample, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if d != model.dim:
        raise ValueError("model and sample dimensions differ")
    S = np.zeros((n, n))
    if model.matern is not None:
        if d == 1:
            D = np.abs(x[:, 0][:, None] - x[:, 0][None, :]) * abs(model.matern.anisotropy[0, 0])
        else:
            y = x @ model.matern.anisotropy.T
            D = cdist(y, y)
        S += matern_cov(model.matern, D)
    for line in model.lines:
        ph = 2 * np.pi * (x @ line.fvec.reshape(d))
        c, s = np.cos(ph), np.sin(ph)
        # cos(a - b) = cos a cos b + sin a sin b keeps the block exactly rank 2
        S += line.power * (np.outer(c, c) + np.outer(s, s))
    if model.nugget:
        S[np.diag_indices(n)] += model.nugget
    return 0.5 * (S + S.T)


def _cholesky_jittered(S: np.ndarray, max_tries: int = 8):
    n = S.shape[0]
    jitter = 0.0
    base = 1e-12 * np.trace(S) / n
    for k in range(max_tries + 1):
        try:
            L = sla.cholesky(S + jitter * np.eye(n) if jitter else S, lower=True, check_finite=False)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter = base if jitter == 0 else jitter * 10
    raise np.linalg.LinAlgError(f"covariance factorization failed with jitter up to {jitter:.3g}")


def gp_simulate(model: ProcessModel, sample: SampleSet | np.ndarray, replicates: int = 1,
                seed=None, dense_limit: int = 8192, return_jitter: bool = False):
    """Draw ``replicates`` zero-mean Gaussian vectors with the model covariance.

    Rows of the returned ``(replicates, n)`` array are i.i.d. ``N(0, Sigma)``,
    obtained as ``Z L^T`` with ``Sigma (+ jitter I) = L L^T``.  A jitter of
    ``1e-12 trace/n`` is added only if the plain factorization fails, and is
    escalated by factors of ten.
    """
    x = sample.locations if isinstance(sample, SampleSet) else np.asarray(sample, dtype=float)
    n = x.shape[0]
    if n > dense_limit:
        raise ValueError(f"n={n} exceeds the dense simulation limit {dense_limit}")
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    rng = make_rng(seed)
    S = process_cov_matrix(model, x)
    L, jitter = _cholesky_jittered(S)
    Z = rng.standard_normal((replicates, n))
    Y = Z @ L.T
    return (Y, jitter) if return_jitter else Y
