"""Window functions ``g`` with Fourier transforms ``G`` and GPSS weights.

``G(w) = int g(x) exp(-2 pi i w.x) dx`` and every window is normalized to unit
L2 norm on its domain.  ``W`` is the half-bandwidth of the main lobe: for the
Kaiser window the sinh/sinc branch point, for prolates the radius of the
frequency region whose energy is maximized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import special
from scipy.sparse.linalg import eigsh

from .nufourier import NufftPlan, _legendre_rule
from .sampling import Domain

__all__ = [
    "WindowFunction",
    "GpssWeights",
    "boxcar",
    "kaiser",
    "prolate_1d",
    "prolate_2d",
    "concentration",
    "gpss_solve",
    "gpss_matrices",
    "default_W",
    "sinc_kernel",
]


def default_W(domain: Domain) -> float:
    """Default half-bandwidth ``4 / measure``."""
    return 4.0 / domain.measure


def _sinpi(t):
    """``sin(pi t)`` with exact zeros at the integers."""
    t = np.asarray(t, dtype=float)
    n = np.round(t)
    r = t - n
    sign = 1.0 - 2.0 * np.mod(n, 2)
    return sign * np.sin(np.pi * r)


def sinc_kernel(x, y, W: float) -> np.ndarray:
    """``sin(2 pi W (x - y)) / (pi (x - y))`` with value ``2W`` on the diagonal."""
    d = np.subtract.outer(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    out = np.full(d.shape, 2.0 * W)
    nz = d != 0
    out[nz] = _sinpi(2.0 * W * d[nz]) / (np.pi * d[nz])
    return out


def _gl_nodes(lo: float, hi: float, m: int):
    t, w = _legendre_rule(int(m))
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


def _as_x(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return x.reshape(-1) if x.ndim <= 1 or x.shape[-1] == 1 else x
    return x.reshape(-1, dim)


@dataclass(eq=False)
class WindowFunction:
    """Evaluable window pair.

    Subclasses implement :meth:`_g` (values on the domain) and :meth:`_G`.
    """

    kind: str
    domain: Domain
    W: float
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def eval_g(self, x) -> np.ndarray:
        """Window values, zero outside the domain."""
        shape = np.shape(x)
        xs = _as_x(x, self.dim)
        out = np.zeros(xs.shape[0] if self.dim > 1 else xs.shape)
        inside = self.domain.contains(xs)
        if np.any(inside):
            out[inside] = self._g(xs[inside])
        return out.reshape(shape[:-1] if self.dim > 1 else shape)

    def eval_G(self, omega) -> np.ndarray:
        w = np.asarray(omega, dtype=float)
        if self.dim == 1:
            return self._G(w.reshape(-1)).reshape(w.shape)
        return self._G(w.reshape(-1, self.dim))

    g = eval_g
    G = eval_G

    # quadrature helpers ---------------------------------------------------
    def _quad_nodes(self, m: int = 256):
        """Tensor Gauss-Legendre nodes covering every piece of the domain."""
        pts, wts = [], []
        for i in range(len(self.domain.pieces)):
            b = self.domain.bounds(i)
            axes = [_gl_nodes(b[k, 0], b[k, 1], m) for k in range(self.dim)]
            if self.dim == 1:
                pts.append(axes[0][0])
                wts.append(axes[0][1])
            else:
                X, Y = np.meshgrid(axes[0][0], axes[1][0], indexing="ij")
                WX, WY = np.meshgrid(axes[0][1], axes[1][1], indexing="ij")
                pts.append(np.stack([X.ravel(), Y.ravel()], 1))
                wts.append((WX * WY).ravel())
        return np.concatenate(pts), np.concatenate(wts)

    @property
    def l2norm(self) -> float:
        x, w = self._quad_nodes(256 if self.dim == 1 else 96)
        return float(math.sqrt(np.sum(w * self._g(x) ** 2)))

    @property
    def l1norm(self) -> float:
        if "l1" not in self.params:
            x, w = self._quad_nodes(512 if self.dim == 1 else 128)
            self.params["l1"] = float(np.sum(w * np.abs(self._g(x))))
        return self.params["l1"]

    def _g(self, x):
        raise NotImplementedError

    def _G(self, w):
        raise NotImplementedError

    def describe(self) -> dict:
        d = {"kind": self.kind, "W": self.W, "domain": self.domain.to_dict()}
        d.update({k: v for k, v in self.params.items() if isinstance(v, (int, float, str))})
        return d


# ---------------------------------------------------------------------------
# boxcar

class _Boxcar(WindowFunction):
    def _g(self, x):
        return np.full(x.shape[0], 1.0 / math.sqrt(self.domain.measure))

    def _G(self, w):
        c = 1.0 / math.sqrt(self.domain.measure)
        out = np.zeros(w.shape[0], dtype=complex)
        wv = w.reshape(w.shape[0], -1)
        for i in range(len(self.domain.pieces)):
            b = self.domain.bounds(i)
            term = np.ones(w.shape[0], dtype=complex)
            for k in range(self.dim):
                L = b[k, 1] - b[k, 0]
                mid = 0.5 * (b[k, 1] + b[k, 0])
                ph = wv[:, k] * mid
                term *= L * np.sinc(L * wv[:, k]) * np.exp(-2j * np.pi * (ph - np.round(ph)))
            out += term
        return c * out


def boxcar(domain: Domain, W: float | None = None) -> WindowFunction:
    """Indicator of the domain scaled to unit L2 norm."""
    W = default_W(domain) if W is None else W
    return _Boxcar("boxcar", domain, float(W), {})


# ---------------------------------------------------------------------------
# Kaiser

def _kaiser_std(nu: np.ndarray, beta: float) -> np.ndarray:
    """Transform of ``I0(beta sqrt(1 - 4u^2))`` on ``[-1/2, 1/2]``.

    ``sinh(sqrt(z))/sqrt(z)`` for ``z = beta^2 - pi^2 nu^2 > 0`` and
    ``sin(sqrt(-z))/sqrt(-z)`` beyond the branch point ``|pi nu| = beta``; a
    Taylor series in ``z`` is used near it.
    """
    z = beta * beta - (np.pi * nu) ** 2
    out = np.empty(z.shape)
    small = np.abs(z) < 1e-3
    zs = z[small]
    out[small] = 1 + zs / 6 + zs ** 2 / 120 + zs ** 3 / 5040 + zs ** 4 / 362880
    pos = (z > 0) & ~small
    s = np.sqrt(z[pos])
    out[pos] = np.sinh(s) / s
    neg = (z < 0) & ~small
    s = np.sqrt(-z[neg])
    out[neg] = np.sin(s) / s
    return out


class _Kaiser(WindowFunction):
    def _g(self, x):
        a, b = self.domain.pieces[0][0]
        L = b - a
        u = (x.reshape(-1) - 0.5 * (a + b)) / L
        arg = np.sqrt(np.maximum(0.0, 1.0 - 4.0 * u * u))
        return self.params["c0"] * special.i0(self.params["beta"] * arg)

    def _G(self, w):
        a, b = self.domain.pieces[0][0]
        L = b - a
        mid = 0.5 * (a + b)
        ph = w * mid
        ph = ph - np.round(ph)
        return L * self.params["c0"] * _kaiser_std(L * w, self.params["beta"]) * np.exp(-2j * np.pi * ph)

    @property
    def l1norm(self) -> float:
        # g >= 0, so the L1 norm is G(0)
        a, b = self.domain.pieces[0][0]
        return float((b - a) * self.params["c0"] * _kaiser_std(np.array([0.0]), self.params["beta"])[0])


def kaiser(interval, beta: float | None = None, W: float | None = None) -> WindowFunction:
    """Kaiser window on ``[a, b]``.

    ``g(x) = c0 I0(beta sqrt(1 - (2u)^2))`` with ``u = (x - mid)/(b - a)``.
    By default ``W = 4/(b - a)`` and ``beta = pi W (b - a)``, which puts the
    branch point of ``G`` exactly at ``|w| = W``.  ``c0`` enforces unit L2 norm.
    """
    dom = interval if isinstance(interval, Domain) else Domain.interval(*interval)
    if dom.dim != 1 or len(dom.pieces) != 1:
        raise ValueError("the Kaiser window needs a single interval")
    a, b = dom.pieces[0][0]
    L = b - a
    if beta is None:
        W = 4.0 / L if W is None else W
        beta = math.pi * W * L
    elif W is None:
        W = beta / (math.pi * L)
    if not beta > 0:
        raise ValueError("beta must be positive")
    if beta > 700:
        raise ValueError("beta above 700 overflows double precision")
    # |g|^2 is entire in u, so a modest Gauss-Legendre rule is exact to rounding
    u, wu = _gl_nodes(-0.5, 0.5, 200)
    e = np.sum(wu * special.i0(beta * np.sqrt(1 - 4 * u * u)) ** 2)
    c0 = 1.0 / math.sqrt(L * e)
    return _Kaiser("kaiser", dom, float(W), {"beta": float(beta), "c0": float(c0)})


# ---------------------------------------------------------------------------
# prolates

def _dominant_eig(M: np.ndarray):
    n = M.shape[0]
    if n <= 3000:
        lam, V = sla.eigh(M, subset_by_index=[n - 1, n - 1])
        return float(lam[0]), V[:, 0]
    lam, V = eigsh(M, k=1, which="LA", tol=1e-14, maxiter=20 * n)
    return float(lam[0]), V[:, 0]


def _orbit_basis(perms, n: int, sign=None) -> np.ndarray | None:
    """Orthonormal basis of vectors invariant under a permutation group.

    With ``sign`` (one entry per permutation, +-1) the basis spans the
    corresponding one-dimensional character sector instead.
    """
    seen = np.zeros(n, dtype=bool)
    cols = []
    for i in range(n):
        if seen[i]:
            continue
        v = np.zeros(n)
        for k, p in enumerate(perms):
            v[p[i]] += 1.0 if sign is None else sign[k]
        seen[[p[i] for p in perms]] = True
        nv = np.linalg.norm(v)
        if nv > 0:
            cols.append(v / nv)
    return np.array(cols).T if cols else None


def _sector_eig(M: np.ndarray, sectors):
    """Dominant eigenpair over a list of sector bases (``None`` = full space)."""
    best = None
    for Q in sectors:
        if Q is None:
            lam, v = _dominant_eig(M)
        else:
            lam, u = _dominant_eig(Q.T @ M @ Q)
            v = Q @ u
        if best is None or lam > best[0]:
            best = (lam, v)
    return best


class _Prolate1D(WindowFunction):
    def _kernel_apply(self, x):
        """g(x) = lambda^-1 sum_k w_k K(x, t_k) g_k, chunked over x."""
        t, wg = self.params["nodes"], self.params["wg"]
        out = np.empty(x.shape[0])
        step = max(1, 2 ** 21 // t.size)
        for s in range(0, x.shape[0], step):
            out[s:s + step] = sinc_kernel(x[s:s + step], t, self.W) @ wg
        return out / self.params["lam"]

    def _g(self, x):
        return self._kernel_apply(x.reshape(-1))

    def _fine(self, wmax: float):
        W = self.W
        counts = []
        for i in range(len(self.domain.pieces)):
            lo, hi = self.domain.pieces[i][0]
            ell = hi - lo
            counts.append(max(self.params["quad_order"], int(math.ceil(2.5 * ell * (wmax + W))) + 40))
        key = tuple(counts)
        cache = self.params.setdefault("_fine", {})
        if key not in cache:
            xs, ws = [], []
            for (lo, hi), m in zip((p[0] for p in self.domain.pieces), counts):
                x, w = _gl_nodes(lo, hi, m)
                xs.append(x)
                ws.append(w)
            x = np.concatenate(xs)
            w = np.concatenate(ws)
            if len(cache) > 8:
                cache.clear()
            cache[key] = (x, w * self._kernel_apply(x))
        return cache[key]

    def _G(self, w):
        if w.size == 0:
            return np.zeros(0, dtype=complex)
        x, c = self._fine(float(np.max(np.abs(w))))
        return NufftPlan(x, w, 1e-14).forward(c.astype(complex))


def prolate_1d(domain: Domain, W: float | None = None, quad_order: int = 128) -> WindowFunction:
    """Most concentrated unit-norm window on a union of intervals.

    The concentration operator with kernel ``sin(2 pi W (x - t))/(pi (x - t))``
    is discretized on ``quad_order`` Gauss-Legendre nodes per piece and
    symmetrized with square-root weights; its dominant eigenvector gives ``g``
    at the nodes and the eigenvalue is the concentration ``lambda``.
    """
    if domain.dim != 1:
        raise ValueError("prolate_1d needs a 1D domain")
    if quad_order < 64:
        raise ValueError("quad_order must be at least 64")
    W = default_W(domain) if W is None else float(W)
    if not W > 0:
        raise ValueError("W must be positive")
    xs, ws = [], []
    for (lo, hi), in domain.pieces:
        ell = hi - lo
        m = max(quad_order, int(math.ceil(3 * W * ell)) + 32)
        x, w = _gl_nodes(lo, hi, m)
        xs.append(x)
        ws.append(w)
    t = np.concatenate(xs)
    wt = np.concatenate(ws)
    sw = np.sqrt(wt)
    M = sw[:, None] * sinc_kernel(t, t, W) * sw[None, :]
    M = 0.5 * (M + M.T)
    order = np.argsort(t)
    mirror = np.empty(t.size, dtype=int)
    mirror[order] = order[::-1]
    c = 0.5 * (domain.hull[0, 0] + domain.hull[0, 1])
    sectors = [None]
    if np.allclose(t[mirror], 2 * c - t, rtol=0, atol=1e-12 * max(1.0, np.abs(t).max())):
        # eigenvectors split into even and odd parts about the midpoint
        ident = np.arange(t.size)
        sectors = [_orbit_basis([ident, mirror], t.size),
                   _orbit_basis([ident, mirror], t.size, sign=[1, -1])]
    lam, v = _sector_eig(M, sectors)
    if not lam > 0:
        raise np.linalg.LinAlgError("dominant eigenvalue is not positive")
    g = v / sw
    if np.sum(wt * g) < 0:
        g = -g
    g /= math.sqrt(np.sum(wt * g * g))
    params = {"nodes": t, "lam": lam, "wg": wt * g, "quad_order": int(quad_order), "eigenvalue": lam}
    return _Prolate1D("prolate1d", domain, W, params)


def _airy_kernel(d2: np.ndarray, W: float) -> np.ndarray:
    """``int_{|w|<=W} exp(2 pi i w.h) dw = W J1(2 pi W r)/r``, ``pi W^2`` at 0."""
    r = np.sqrt(d2)
    out = np.full(r.shape, math.pi * W * W)
    nz = r > 1e-300
    z = 2 * math.pi * W * r[nz]
    small = z < 1e-4
    val = np.empty(z.shape)
    val[~small] = W * special.j1(z[~small]) / r[nz][~small]
    zs = z[small]
    val[small] = math.pi * W * W * (1 - zs * zs / 8)
    out[nz] = val
    return out


class _Prolate2D(WindowFunction):
    def _kernel_apply(self, x):
        t, wg = self.params["nodes"], self.params["wg"]
        out = np.empty(x.shape[0])
        step = max(1, 2 ** 21 // t.shape[0])
        for s in range(0, x.shape[0], step):
            xc = x[s:s + step]
            d2 = (xc[:, 0:1] - t[None, :, 0]) ** 2 + (xc[:, 1:2] - t[None, :, 1]) ** 2
            out[s:s + step] = _airy_kernel(d2, self.W) @ wg
        return out / self.params["lam"]

    def _g(self, x):
        return self._kernel_apply(x)

    def _fine(self, wmax):
        b = self.domain.bounds(0)
        ell = b[:, 1] - b[:, 0]
        q = self.params["quad_order"]
        counts = tuple(max(q, int(math.ceil(2.5 * ell[k] * (wmax[k] + self.W))) + 24) for k in range(2))
        cache = self.params.setdefault("_fine", {})
        if counts not in cache:
            ax = [_gl_nodes(b[k, 0], b[k, 1], counts[k]) for k in range(2)]
            X, Y = np.meshgrid(ax[0][0], ax[1][0], indexing="ij")
            WX, WY = np.meshgrid(ax[0][1], ax[1][1], indexing="ij")
            x = np.stack([X.ravel(), Y.ravel()], 1)
            w = (WX * WY).ravel()
            if len(cache) > 4:
                cache.clear()
            cache[counts] = (x, w * self._kernel_apply(x))
        return cache[counts]

    def _G(self, w):
        if w.shape[0] == 0:
            return np.zeros(0, dtype=complex)
        x, c = self._fine(np.max(np.abs(w), axis=0))
        return NufftPlan(x, w, 1e-14).forward(c.astype(complex))


def _close_group(gens, n):
    group = {tuple(range(n))}
    frontier = [np.arange(n)]
    while frontier:
        nxt = []
        for p in frontier:
            for g in gens:
                c = g[p]
                key = tuple(c)
                if key not in group:
                    group.add(key)
                    nxt.append(c)
        frontier = nxt
    return [np.array(p) for p in group]


def prolate_2d(domain: Domain, W: float, quad_order: int = 48, dense_limit: int = 4096) -> WindowFunction:
    """Prolate window on a box whose transform is concentrated on a disk.

    The disk integral of the concentration kernel is the closed form
    ``W J1(2 pi W r)/r``; the operator is discretized on a tensor
    Gauss-Legendre grid with ``quad_order`` nodes per axis.
    """
    if domain.dim != 2 or len(domain.pieces) != 1:
        raise ValueError("prolate_2d needs a single 2D box")
    if quad_order ** 2 > dense_limit:
        raise ValueError(f"quad_order^2={quad_order ** 2} exceeds dense limit {dense_limit}")
    b = domain.bounds(0)
    ax = [_gl_nodes(b[k, 0], b[k, 1], quad_order) for k in range(2)]
    X, Y = np.meshgrid(ax[0][0], ax[1][0], indexing="ij")
    WX, WY = np.meshgrid(ax[0][1], ax[1][1], indexing="ij")
    t = np.stack([X.ravel(), Y.ravel()], 1)
    wt = (WX * WY).ravel()
    d2 = (t[:, 0:1] - t[None, :, 0]) ** 2 + (t[:, 1:2] - t[None, :, 1]) ** 2
    sw = np.sqrt(wt)
    M = sw[:, None] * _airy_kernel(d2, W) * sw[None, :]
    del d2
    q = quad_order
    I, J = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
    gens = [((q - 1 - I) * q + J).ravel(), (I * q + (q - 1 - J)).ravel()]
    if math.isclose(b[0, 1] - b[0, 0], b[1, 1] - b[1, 0], rel_tol=1e-12):
        gens.append((J * q + I).ravel())
    group = _close_group(gens, q * q)
    lam, v = _sector_eig(0.5 * (M + M.T), [_orbit_basis(group, q * q)])
    if not lam > 0:
        raise np.linalg.LinAlgError("dominant eigenvalue is not positive")
    g = v / sw
    if np.sum(wt * g) < 0:
        g = -g
    g /= math.sqrt(np.sum(wt * g * g))
    params = {"nodes": t, "lam": lam, "wg": wt * g, "quad_order": int(quad_order), "eigenvalue": lam}
    return _Prolate2D("prolate2d", domain, float(W), params)


# ---------------------------------------------------------------------------
# concentration

def concentration(window: WindowFunction, W: float | None = None, rtol: float = 1e-9,
                  region: str | None = None) -> float:
    """Spectral energy of ``G`` inside ``[-W, W]`` (1D) or a disk/box (2D).

    Gauss-Legendre rules are doubled until two successive estimates agree to
    ``rtol``.
    """
    W = window.W if W is None else float(W)
    if window.dim == 1:
        m = 64
        prev = None
        while m <= 2 ** 17:
            w, q = _gl_nodes(-W, W, m)
            val = float(np.sum(q * np.abs(window.eval_G(w)) ** 2))
            if prev is not None and abs(val - prev) <= rtol * abs(val):
                return val
            prev = val
            m *= 2
        raise RuntimeError("concentration integral did not converge")
    region = region or ("disk" if window.kind == "prolate2d" else "box")
    m = 32
    prev = None
    while m <= 1024:
        if region == "disk":
            r, qr = _gl_nodes(0.0, W, m)
            th = 2 * np.pi * np.arange(2 * m) / (2 * m)
            R, T = np.meshgrid(r, th, indexing="ij")
            pts = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], 1)
            wts = (qr[:, None] * r[:, None] * np.full(th.size, 2 * np.pi / th.size)[None, :]).ravel()
        else:
            w1, q1 = _gl_nodes(-W, W, m)
            A, B = np.meshgrid(w1, w1, indexing="ij")
            pts = np.stack([A.ravel(), B.ravel()], 1)
            wts = np.outer(q1, q1).ravel()
        val = float(np.sum(wts * np.abs(window.eval_G(pts)) ** 2))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
        m *= 2
    raise RuntimeError("concentration integral did not converge")


# ---------------------------------------------------------------------------
# GPSS

@dataclass(frozen=True)
class GpssWeights:
    beta: np.ndarray
    W: float
    Omega: float
    eigenvalue: float
    regularized: bool = False


def gpss_matrices(locations, W: float, Omega: float):
    """Sinc matrices ``A`` (band ``W``) and ``B`` (band ``Omega``)."""
    x = np.asarray(locations, dtype=float).reshape(-1)
    A = sinc_kernel(x, x, W)
    B = sinc_kernel(x, x, Omega)
    return 0.5 * (A + A.T), 0.5 * (B + B.T)


def gpss_solve(locations, W: float, Omega: float, dense_limit: int = 2000,
               delta: float = 1e-12) -> GpssWeights:
    """Dominant generalized eigenpair of ``A beta = lambda B beta``.

    ``B`` is shifted by ``delta ||B||_2`` when it is not numerically positive
    definite or the unshifted pencil returns a ratio above one.  ``beta`` is then
    scaled so that ``beta^T B beta = 1`` for the unshifted ``B`` and the
    eigenvalue reported is the Rayleigh quotient.
    """
    x = np.asarray(locations, dtype=float).reshape(-1)
    n = x.size
    if n > dense_limit:
        raise ValueError(f"n={n} exceeds the dense eigenproblem limit {dense_limit}")
    if not 0 < W <= Omega:
        raise ValueError("need 0 < W <= Omega")
    A, B = gpss_matrices(x, W, Omega)
    reg = False

    def solve(Bm):
        lam, V = sla.eigh(A, Bm, subset_by_index=[n - 1, n - 1])
        return lam[0], V[:, 0]

    try:
        lam, v = solve(B)
        ok = np.isfinite(lam) and lam <= 1 + 1e-8
    except (np.linalg.LinAlgError, ValueError):
        ok = False
    if not ok:
        reg = True
        shift = delta * np.linalg.norm(B, 2)
        try:
            lam, v = solve(B + shift * np.eye(n))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("B is numerically indefinite beyond regularization") from exc
    qb = float(v @ B @ v)
    if not qb > 0:
        raise np.linalg.LinAlgError("B is numerically indefinite beyond regularization")
    v = v / math.sqrt(qb)
    if np.sum(v) < 0:
        v = -v
    lam = float(v @ A @ v)
    return GpssWeights(v, float(W), float(Omega), lam, reg)
