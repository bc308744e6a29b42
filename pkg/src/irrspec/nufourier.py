"""Nonuniform Fourier sums, their adjoints and frequency quadrature grids.

Sign convention: the forward transform is

    (F c)_k = sum_j c_j exp(-2 pi i  w_k . x_j)

and the adjoint uses ``exp(+2 pi i ...)``.  The fast path is a type-3
transform built from two Gaussian gridding stages: sources are spread onto a
uniform grid in location space, that grid is transformed to the target
frequencies through an oversampled FFT followed by Gaussian interpolation, and
both kernels are deconvolved analytically.  Spreading and interpolation are
stored as sparse matrices so that forward and adjoint applications share the
same tables and are exact adjoints of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

__all__ = [
    "FrequencyGrid",
    "NuftOptions",
    "chebyshev_nodes",
    "gauss_legendre",
    "uniform_grid",
    "tensor_grid",
    "nudft",
    "adjoint_nudft",
    "nufft",
    "adjoint_nufft",
    "NufftPlan",
    "GramOperator",
    "sinc_gram_apply",
]


# --------------------------------------------------------------------------
# frequency grids

@dataclass(frozen=True)
class FrequencyGrid:
    """Frequency nodes, optionally with quadrature weights.

    ``nodes`` is ``(m,)`` in 1D and ``(m, d)`` for tensor grids.  ``Omega`` is
    a float in 1D and a tuple of per-axis half-widths otherwise.
    """

    kind: str
    Omega: float | tuple
    nodes: np.ndarray
    quad_weights: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self.nodes.ndim == 1 else self.nodes.shape[1]


@dataclass(frozen=True)
class NuftOptions:
    tolerance: float = 1e-12
    force_direct: bool = False

    def __post_init__(self):
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")


def chebyshev_nodes(Omega: float, m: int) -> FrequencyGrid:
    """Chebyshev points ``Omega cos((2k-1) pi / (2m))``, k = 1..m.

    The set is made exactly antisymmetric by mirroring the first half.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    k = np.arange(1, m + 1)
    w = Omega * np.cos((2 * k - 1) * np.pi / (2 * m))
    half = m // 2
    w[m - half:] = -w[:half][::-1]
    if m % 2:
        w[half] = 0.0
    return FrequencyGrid("chebyshev", float(Omega), w)


@lru_cache(maxsize=32)
def _legendre_rule(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the m-point rule on [-1, 1], ascending."""
    if m == 1:
        return np.array([0.0]), np.array([2.0])
    nh = (m + 1) // 2
    k = np.arange(1, nh + 1)
    theta = (4 * k - 1) * np.pi / (4 * m + 2)
    # Tricomi-type initial guess; Newton then converges in a few steps
    x = (1 - (m - 1) / (8.0 * m ** 3)) * np.cos(theta)
    for it in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, m + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = m * (x * p1 - p0) / (x * x - 1)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        bad = int(np.argmax(np.abs(dx)))
        raise RuntimeError(f"Newton iteration for Legendre node {bad} did not converge")
    # one more evaluation at the converged points for the weights
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, m + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = m * (x * p1 - p0) / (x * x - 1)
    w = 2.0 / ((1 - x * x) * dp * dp)
    # x is descending positive half; mirror
    xs = np.concatenate([-x, x[::-1][m % 2:]])
    ws = np.concatenate([w, w[::-1][m % 2:]])
    if m % 2:
        xs[nh - 1] = 0.0
    xs.setflags(write=False)
    ws.setflags(write=False)
    return xs, ws


def gauss_legendre(Omega: float, m: int) -> FrequencyGrid:
    """Gauss-Legendre nodes and weights on ``[-Omega, Omega]``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    x, w = _legendre_rule(int(m))
    return FrequencyGrid("gauss-legendre", float(Omega), Omega * x, Omega * w)


def uniform_grid(Omega: float, m: int) -> FrequencyGrid:
    """``m`` equispaced nodes covering ``[-Omega, Omega]`` inclusive."""
    return FrequencyGrid("uniform", float(Omega), np.linspace(-Omega, Omega, m))


def tensor_grid(*grids: FrequencyGrid) -> FrequencyGrid:
    """Tensor product of 1D grids; first axis varies slowest."""
    mesh = np.meshgrid(*[g.nodes for g in grids], indexing="ij")
    nodes = np.stack([a.ravel() for a in mesh], axis=1)
    qw = None
    if all(g.quad_weights is not None for g in grids):
        wm = np.meshgrid(*[g.quad_weights for g in grids], indexing="ij")
        qw = np.prod(np.stack([a.ravel() for a in wm], axis=1), axis=1)
    kinds = {g.kind for g in grids}
    return FrequencyGrid(kinds.pop() if len(kinds) == 1 else "explicit",
                         tuple(float(g.Omega) for g in grids), nodes, qw)


# --------------------------------------------------------------------------
# direct sums

def _as_points(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def _phase_matrix(freqs: np.ndarray, locs: np.ndarray, sign: float) -> np.ndarray:
    t = freqs @ locs.T
    t -= np.round(t)
    return np.exp(sign * 2j * np.pi * t)


def nudft(locations, coeffs, freqs, chunk: int = 2 ** 22) -> np.ndarray:
    """Direct evaluation of ``sum_j coeffs_j exp(-2 pi i freqs_k . x_j)``.

    ``coeffs`` may be ``(n,)`` or a batch ``(B, n)``; the output is ``(m,)``
    or ``(B, m)`` accordingly.
    """
    return _direct(locations, coeffs, freqs, -1.0, chunk)


def adjoint_nudft(freq_nodes, values, locations, chunk: int = 2 ** 22) -> np.ndarray:
    """Direct evaluation of ``sum_k values_k exp(+2 pi i freqs_k . x_j)``."""
    return _direct(freq_nodes, values, locations, +1.0, chunk)


def _direct(src, coeffs, tgt, sign, chunk):
    src = _as_points(src)
    tgt = _as_points(tgt)
    if src.shape[1] != tgt.shape[1]:
        raise ValueError("dimension mismatch between locations and frequencies")
    c = np.asarray(coeffs)
    single = c.ndim == 1
    c2 = np.atleast_2d(c).astype(complex, copy=False)
    if c2.shape[1] != src.shape[0]:
        raise ValueError("coefficient length does not match number of points")
    m = tgt.shape[0]
    out = np.empty((c2.shape[0], m), dtype=complex)
    step = max(1, chunk // max(1, src.shape[0]))
    for s in range(0, m, step):
        E = _phase_matrix(tgt[s:s + step], src, sign)
        out[:, s:s + step] = (E @ c2.T).T
    return out[0] if single else out


# --------------------------------------------------------------------------
# fast type-3 transform

_SIGMA = 3.0


def _gaussian_params(tol: float, n: int, dim: int = 1, sigma: float = _SIGMA):
    """Grid-unit Gaussian standard deviation and half-width for a tolerance.

    With oversampling ``sigma`` in both stages the aliasing error is
    ``exp(-2 P (sigma-1)/sigma)``, ``P = pi^2 a^2``, and the two
    deconvolutions amplify it by ``exp(dim P / sigma^2)``.
    """
    L = math.log(1.0 / tol) + 0.5 * math.log(max(n, 1)) + 2.0
    P = L / (2.0 * (sigma - 1.0) / sigma - dim / sigma ** 2)
    a = math.sqrt(P) / math.pi
    w = int(math.ceil(a * math.sqrt(2.0 * (L + dim * P / sigma ** 2))))
    return a, w


def _spread_matrix(tau: np.ndarray, shape: tuple, a: float, w: int, scale=None):
    """Sparse (prod(shape), npts) matrix of Gaussian weights on a periodic grid.

    ``tau`` holds point coordinates in grid units, shape ``(npts, d)``.
    """
    npts, d = tau.shape
    offs = np.arange(-w, w + 1)
    idx_axes = []
    val_axes = []
    for i in range(d):
        c = np.round(tau[:, i]).astype(np.int64)
        l = c[:, None] + offs[None, :]
        val_axes.append(np.exp(-((l - tau[:, i:i + 1]) ** 2) / (2 * a * a)))
        idx_axes.append(np.mod(l, shape[i]))
    if d == 1:
        rows = idx_axes[0]
        vals = val_axes[0]
    else:
        rows = (idx_axes[0][:, :, None] * shape[1] + idx_axes[1][:, None, :]).reshape(npts, -1)
        vals = (val_axes[0][:, :, None] * val_axes[1][:, None, :]).reshape(npts, -1)
    if scale is not None:
        vals = vals * scale[:, None]
    cols = np.repeat(np.arange(npts), rows.shape[1])
    M = sp.csr_matrix((vals.ravel(), (rows.ravel(), cols)), shape=(int(np.prod(shape)), npts))
    return M


def _smul(M, v):
    """Sparse real matrix times complex dense block."""
    return M @ v.real + 1j * (M @ v.imag)


class NufftPlan:
    """Reusable type-3 transform between points ``x`` and frequencies ``s``.

    ``forward(c)`` evaluates ``sum_j c_j exp(-2 pi i s_k . x_j)`` and
    ``adjoint(v)`` evaluates ``sum_k v_k exp(+2 pi i s_k . x_j)``.  Batches are
    passed with shape ``(B, n)`` or ``(B, m)``.

    Small problems, or ``force_direct=True``, fall back to the direct sum; a
    plan in direct mode caches the dense matrix when it is small enough.
    """

    direct_threshold = 2 ** 18

    def __init__(self, locations, freqs, tol: float = 1e-12, force_direct: bool = False):
        x = _as_points(locations)
        s = _as_points(freqs)
        if x.shape[1] != s.shape[1]:
            raise ValueError("dimension mismatch between locations and frequencies")
        self.x, self.s = x, s
        self.n, self.m = x.shape[0], s.shape[0]
        self.dim = x.shape[1]
        self.tol = float(tol)
        if not 0 < tol < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        a, w = _gaussian_params(tol, max(self.n, self.m), self.dim)
        if 2 * w + 1 > 160:
            raise ValueError(
                f"tolerance {tol:g} needs spreading half-width {w} beyond the supported 79; "
                f"achievable tolerance is about 1e-15"
            )
        self.a, self.w = a, w
        self.direct = force_direct or self._prefer_direct()
        self._dense = None
        if self.direct:
            if self.n * self.m <= 2 ** 22 and not force_direct:
                self._dense = _phase_matrix(s, x, -1.0)
            return
        self._build()

    def _prefer_direct(self) -> bool:
        nm = self.n * self.m
        if nm <= self.direct_threshold:
            return True
        X = np.ptp(self.x, axis=0) / 2
        S = np.ptp(self.s, axis=0) / 2
        grid = 1.0
        for i in range(self.dim):
            grid *= _SIGMA * (4 * _SIGMA * X[i] * S[i] + 2 * self.w + 4)
        fast = (self.n + self.m) * (2 * self.w + 1) ** self.dim * 4 + 5 * grid * math.log2(grid + 2)
        return nm < fast

    def _build(self):
        a, w, d = self.a, self.w, self.dim
        xc = 0.5 * (self.x.max(axis=0) + self.x.min(axis=0))
        sc = 0.5 * (self.s.max(axis=0) + self.s.min(axis=0))
        xp = self.x - xc
        spp = self.s - sc
        X = np.max(np.abs(xp), axis=0)
        S = np.maximum(np.max(np.abs(spp), axis=0), 1e-8 / np.maximum(X, 1e-300))
        h = 1.0 / (2.0 * _SIGMA * S)
        L0 = np.ceil(X / h).astype(int) + w + 1
        Nu = tuple(int(sfft.next_fast_len(int(math.ceil(_SIGMA * (2 * l + 1))))) for l in L0)
        self.shape = Nu
        # stage A: sources onto the location grid, stored directly in FFT layout
        self.S_mat = _spread_matrix(xp / h, Nu, a, w)
        # stage B deconvolution over the location grid index l
        dec = np.ones(Nu)
        for i in range(d):
            l = np.fft.ifftshift(np.arange(Nu[i]) - Nu[i] // 2)
            b = a / Nu[i]
            phihat = b * math.sqrt(2 * math.pi) * np.exp(-2 * math.pi ** 2 * b * b * l.astype(float) ** 2)
            shp = [1] * d
            shp[i] = Nu[i]
            dec = dec * (1.0 / phihat).reshape(shp)
        mask = np.zeros(Nu, dtype=bool)
        sl = tuple(np.mod(np.arange(-L0[i], L0[i] + 1), Nu[i]) for i in range(d))
        mask[np.ix_(*sl)] = True
        dec[~mask] = 0.0
        self.dec = dec.ravel()
        # stage B interpolation at t = s' h, in units of 1/Nu
        tau = spp * h * np.array(Nu)
        self.I_mat = _spread_matrix(tau, Nu, a, w).T.tocsr()
        ah = a * h
        psihat = np.prod(ah * math.sqrt(2 * math.pi) * np.exp(-2 * math.pi ** 2 * (ah * spp) ** 2), axis=1)
        scale = np.prod(h) / np.prod(Nu) / psihat
        ph_post = spp @ xc + sc @ xc
        ph_post = ph_post - np.round(ph_post)
        self.post = scale * np.exp(-2j * np.pi * ph_post)
        ph_pre = xp @ sc
        ph_pre = ph_pre - np.round(ph_pre)
        self.pre = np.exp(-2j * np.pi * ph_pre)

    def _prep(self, c, length):
        c = np.asarray(c)
        single = c.ndim == 1
        c2 = np.atleast_2d(c)
        if c2.shape[1] != length:
            raise ValueError(f"expected trailing dimension {length}, got {c2.shape[1]}")
        return single, c2.astype(complex, copy=False)

    def forward(self, c) -> np.ndarray:
        single, c2 = self._prep(c, self.n)
        if self.direct:
            if self._dense is None:
                out = nudft(self.x, c2, self.s)
            else:
                out = (self._dense @ c2.T).T
        else:
            B = c2.shape[0]
            u = _smul(self.S_mat, (c2 * self.pre).T)          # (G, B)
            u *= self.dec[:, None]
            U = sfft.fftn(u.T.reshape((B,) + self.shape), axes=tuple(range(1, self.dim + 1)))
            f = _smul(self.I_mat, U.reshape(B, -1).T).T       # (B, m)
            out = f * self.post
        return out[0] if single else out

    def adjoint(self, v) -> np.ndarray:
        single, v2 = self._prep(v, self.m)
        if self.direct:
            if self._dense is None:
                out = adjoint_nudft(self.s, v2, self.x)
            else:
                out = (self._dense.conj().T @ v2.T).T
        else:
            B = v2.shape[0]
            g = _smul(self._It, (v2 * self.post.conj()).T)
            G = np.prod(self.shape)
            U = sfft.ifftn(g.T.reshape((B,) + self.shape), axes=tuple(range(1, self.dim + 1))) * G
            u = U.reshape(B, -1).T * self.dec[:, None]
            out = (self._St @ u).T * self.pre.conj()
        return out[0] if single else out

    @cached_property
    def _St(self):
        return self.S_mat.T.tocsr()

    @cached_property
    def _It(self):
        return self.I_mat.T.tocsr()


def nufft(locations, coeffs, freqs, options: NuftOptions | None = None) -> np.ndarray:
    """Fast ``sum_j coeffs_j exp(-2 pi i freqs_k . x_j)`` within ``options.tolerance``.

    The tolerance is relative to the largest output magnitude.  With
    ``force_direct`` the result is exactly :func:`nudft`.
    """
    options = options or NuftOptions()
    if options.force_direct:
        return nudft(locations, coeffs, freqs)
    return NufftPlan(locations, freqs, options.tolerance).forward(coeffs)


def adjoint_nufft(freq_nodes, values, locations, options: NuftOptions | None = None) -> np.ndarray:
    """Fast ``sum_k values_k exp(+2 pi i freqs_k . x_j)``."""
    options = options or NuftOptions()
    if options.force_direct:
        return adjoint_nudft(freq_nodes, values, locations)
    return NufftPlan(locations, freq_nodes, options.tolerance).adjoint(values)


# --------------------------------------------------------------------------
# Gram operator

class GramOperator:
    """Matrix-free ``F* D F`` for a quadrature frequency grid.

    With Gauss-Legendre nodes on ``[-Omega, Omega]`` this approximates the
    sinc kernel ``2 Omega sinc(2 Omega (x_j - x_k))`` (per axis products in 2D).
    """

    def __init__(self, locations, grid: FrequencyGrid, tol: float = 1e-13, D=None):
        if grid.quad_weights is None and D is None:
            raise ValueError("grid has no quadrature weights")
        self.grid = grid
        self.D = np.asarray(grid.quad_weights if D is None else D, dtype=float)
        self.plan = NufftPlan(locations, grid.nodes, tol)
        self.n = self.plan.n

    def matvec(self, v) -> np.ndarray:
        return self.plan.adjoint(self.D * self.plan.forward(v))

    def rhs(self, b) -> np.ndarray:
        """``F* D b`` for values ``b`` on the grid nodes."""
        return self.plan.adjoint(self.D * np.asarray(b))


def sinc_gram_apply(locations, grid: FrequencyGrid, v, tol: float = 1e-13) -> np.ndarray:
    """Apply ``F* D F`` to ``v`` by two transforms, never forming the matrix."""
    v = np.asarray(v)
    if not np.any(v):
        return np.zeros(v.shape, dtype=complex)
    return GramOperator(locations, grid, tol).matvec(v)
