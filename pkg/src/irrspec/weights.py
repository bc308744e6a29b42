"""Quadrature weights ``alpha`` with ``H_alpha(w) = sum_j alpha_j exp(-2 pi i w.x_j) ~ G(w)``.

Three solvers are provided: a dense least-squares solve on Chebyshev nodes,
a randomized low-rank solve for small space-bandwidth products, and a
preconditioned conjugate-gradient solve of the Gauss-Legendre weighted normal
equations that only touches ``F`` through nonuniform FFTs.
"""

from __future__ import annotations

import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .nufourier import (GramOperator, NufftPlan, chebyshev_nodes, gauss_legendre,
                        nudft, tensor_grid, FrequencyGrid)
from .sampling import Domain, SampleSet
from .windows import WindowFunction

__all__ = [
    "QuadratureWeights",
    "SolverConfig",
    "SolveReport",
    "trapezoid_weights",
    "forward_weights",
    "solve_dense",
    "solve_iterative",
    "solve_lowrank",
    "solve",
    "build_gaussian_precond",
    "GaussianPreconditioner",
    "validate_weights",
    "omega_guidance",
    "save_weights",
    "load_weights",
]


@dataclass(frozen=True)
class SolverConfig:
    """Solver options.

    ``tol`` is the rank truncation level for the dense and low-rank paths and
    the relative preconditioned-residual target for ``normal-krylov``; ``None``
    selects 1e-14 and 1e-15 respectively (the normal equations square the
    condition number, so the fit error behaves like ``sqrt(tol)``).
    ``delta`` is the ridge added to the normal equations; ``None`` means
    ``1e-14 * 2 Omega``.  ``nodes`` selects the collocation nodes of the dense
    and low-rank paths: ``"chebyshev"`` or ``"uniform"`` (the half-open
    equispaced grid ``-Omega + 2 Omega k / m``).
    """

    method: str = "dense-qr"
    tol: float | None = None
    max_iter: int = 3000
    precond: str = "none"
    delta: float | None = None
    oversample: float = 1.0
    nodes: str = "chebyshev"
    dense_limit: int = 4000
    precond_c: float = 1.0
    precond_drop: float = 1e-8
    precond_delta: float = 1e-6
    rank_cap: int = 1024
    nufft_tol: float = 1e-13
    seed: int = 0

    @property
    def rank_tol(self) -> float:
        return 1e-14 if self.tol is None else self.tol

    @property
    def krylov_tol(self) -> float:
        return 1e-15 if self.tol is None else self.tol

    def __post_init__(self):
        if self.method not in ("dense-qr", "low-rank", "normal-krylov"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.precond not in ("none", "scaled-identity", "sparse-gaussian"):
            raise ValueError(f"unknown preconditioner {self.precond!r}")
        if self.nodes not in ("chebyshev", "uniform"):
            raise ValueError(f"unknown node kind {self.nodes!r}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.oversample >= 1:
            raise ValueError("oversample must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveReport:
    iterations: int = 0
    final_residual: float = 0.0
    precond_build_seconds: float = 0.0
    solve_seconds: float = 0.0
    converged: bool = True
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class QuadratureWeights:
    alpha: np.ndarray
    Omega: float | tuple
    window: WindowFunction | None
    locations: np.ndarray
    l1: float
    l2: float
    sup_residual: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.alpha.size

    def relative_residual(self, g_l1: float | None = None) -> float:
        """``sup |H - G| / (||g||_1 + ||alpha||_1)``."""
        g1 = self.window.l1norm if g_l1 is None else g_l1
        return self.sup_residual / (g1 + self.l1)

    def H(self, freqs) -> np.ndarray:
        return _eval_H(self.locations, self.alpha, freqs)

    def summary(self) -> dict:
        om = list(self.Omega) if isinstance(self.Omega, tuple) else self.Omega
        return {"Omega": om, "method": self.method, "n": self.n, "l1": self.l1, "l2": self.l2,
                "sup_residual": self.sup_residual, **{k: v for k, v in self.diagnostics.items()
                                                      if isinstance(v, (int, float, str, bool))}}


# ---------------------------------------------------------------------------
# helpers

def _locs(sample) -> np.ndarray:
    x = sample.locations if isinstance(sample, SampleSet) else np.asarray(sample, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _flat(x: np.ndarray):
    return x[:, 0] if x.shape[1] == 1 else x


def _omega_tuple(Omega, dim):
    om = np.broadcast_to(np.asarray(Omega, dtype=float), (dim,)).copy()
    if np.any(om <= 0):
        raise ValueError("Omega must be positive")
    return om


def _eval_H(x, alpha, freqs, direct_limit: float = 4e6) -> np.ndarray:
    x = _locs(x)
    f = np.asarray(freqs, dtype=float)
    f2 = f[:, None] if f.ndim == 1 else f
    a = np.asarray(alpha).astype(complex)
    if x.shape[0] * f2.shape[0] <= direct_limit:
        return nudft(x, a, f2)
    return NufftPlan(x, f2, 1e-14).forward(a)


def _collocation_nodes(Omega, n, cfg: SolverConfig, dim: int, m_override=None):
    om = _omega_tuple(Omega, dim)
    if dim == 1:
        m = m_override or int(math.ceil(cfg.oversample * n))
        axes_m = [m]
    else:
        m = m_override or int(math.ceil(math.sqrt(cfg.oversample * n)))
        axes_m = [m] * dim
    grids = []
    for k in range(dim):
        mk = axes_m[k]
        if cfg.nodes == "chebyshev":
            grids.append(chebyshev_nodes(om[k], mk))
        else:
            w = -om[k] + 2 * om[k] * np.arange(mk) / mk
            grids.append(FrequencyGrid("uniform", float(om[k]), w))
    return grids[0] if dim == 1 else tensor_grid(*grids)


def _finish(alpha, Omega, window, x, method, report, diag=None, validate=True):
    alpha = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(alpha)):
        raise FloatingPointError("weights are not finite")
    om = float(Omega) if np.ndim(Omega) == 0 else tuple(float(o) for o in np.ravel(Omega))
    l1 = float(np.sum(np.abs(alpha)))
    l2 = float(np.linalg.norm(alpha))
    qw = QuadratureWeights(alpha, om, window, x, l1, l2, float("nan"), method, dict(diag or {}))
    if validate and window is not None:
        d = validate_weights(qw, window)
        qw = replace(qw, sup_residual=d["sup_error"])
    return qw


# ---------------------------------------------------------------------------
# baseline weights

def trapezoid_weights(locations) -> np.ndarray:
    """Irregular trapezoid rule weights for strictly increasing locations."""
    x = np.asarray(locations, dtype=float).reshape(-1)
    if x.size < 2:
        raise ValueError("need at least two locations")
    d = np.diff(x)
    if np.any(d <= 0):
        if np.any(d == 0):
            raise ValueError("duplicate locations")
        raise ValueError("locations must be strictly increasing")
    g = np.empty_like(x)
    g[0] = d[0] / 2
    g[-1] = d[-1] / 2
    g[1:-1] = (x[2:] - x[:-2]) / 2
    return g


def forward_weights(window: WindowFunction, locations) -> np.ndarray:
    """Uncorrected weights ``g(x_j) |D| / n``.

    The factor ``|D|`` (domain measure) makes the sum a Monte Carlo quadrature
    of ``G`` for uniform sampling; it is 1 on unit-measure domains.
    """
    x = _locs(locations)
    return window.eval_g(_flat(x)) * window.domain.measure / x.shape[0]


# ---------------------------------------------------------------------------
# dense path

def solve_dense(sample, window: WindowFunction, Omega, config: SolverConfig | None = None):
    """Least-squares collocation ``F alpha = b`` on ``ceil(oversample n)`` nodes.

    Real and imaginary parts are stacked into a real ``2m x n`` system solved
    by column-pivoted QR, so ``alpha`` is real by construction.
    """
    cfg = config or SolverConfig()
    x = _locs(sample)
    n, dim = x.shape
    if n > cfg.dense_limit:
        raise ValueError(f"n={n} exceeds the dense limit {cfg.dense_limit}")
    t0 = time.perf_counter()
    grid = _collocation_nodes(Omega, n, cfg, dim)
    nodes = grid.nodes if dim > 1 else grid.nodes[:, None]
    b = window.eval_G(grid.nodes)
    F = np.exp(-2j * np.pi * _frac(nodes @ x.T))
    A = np.concatenate([F.real, F.imag])
    del F
    rhs = np.concatenate([b.real, b.imag])
    alpha, _, rank, _ = sla.lstsq(A, rhs, cond=cfg.rank_tol, lapack_driver="gelsy", check_finite=False)
    res = float(np.linalg.norm(A @ alpha - rhs))
    rep = SolveReport(iterations=1, final_residual=res, solve_seconds=time.perf_counter() - t0,
                      info={"rank": int(rank), "nodes": grid.m})
    qw = _finish(alpha, Omega, window, x, "dense-qr", rep, {"rank": int(rank), "nodes": grid.m})
    return qw, rep


def _frac(t):
    return t - np.round(t)


# ---------------------------------------------------------------------------
# preconditioner

class GaussianPreconditioner:
    """Sparse LU factor of ``P + delta I`` with ``P_jk = exp(-|x_j - x_k|^2/(2 s^2))``."""

    def __init__(self, P: sp.csc_matrix, lu, delta: float, sigma):
        self.P = P
        self.lu = lu
        self.delta = delta
        self.sigma = sigma
        self.n = P.shape[0]

    def solve(self, r):
        r = np.asarray(r)
        if np.iscomplexobj(r):
            return self.lu.solve(np.ascontiguousarray(r.real)) + 1j * self.lu.solve(np.ascontiguousarray(r.imag))
        return self.lu.solve(r)

    @property
    def nnz(self) -> int:
        return int(self.P.nnz)


def build_gaussian_precond(locations, Omega, delta: float = 1e-14, c: float = 1.0,
                           drop: float = 1e-8, max_escalations: int = 3) -> GaussianPreconditioner:
    """Sparse Gaussian kernel matrix with width ``sigma = c / Omega`` per axis.

    Entries below ``drop`` are discarded.  If the sparse LU factorization
    fails, ``delta`` is multiplied by ten up to ``max_escalations`` times.
    """
    x = _locs(locations)
    n, dim = x.shape
    om = _omega_tuple(Omega, dim)
    sigma = c / om
    y = x / sigma
    radius = math.sqrt(2 * math.log(1 / drop))
    tree = cKDTree(y)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    if pairs.size:
        i, j = pairs[:, 0], pairs[:, 1]
        v = np.exp(-0.5 * np.sum((y[i] - y[j]) ** 2, axis=1))
        keep = v >= drop
        i, j, v = i[keep], j[keep], v[keep]
    else:
        i = j = np.zeros(0, dtype=int)
        v = np.zeros(0)
    off = sp.coo_matrix((np.concatenate([v, v]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                        shape=(n, n))
    P0 = (off + sp.identity(n)).tocsc()
    d = delta
    for attempt in range(max_escalations + 1):
        P = (P0 + d * sp.identity(n)).tocsc()
        try:
            lu = splu(P, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0)
            if np.all(np.isfinite(lu.U.diagonal())) and np.all(lu.U.diagonal() != 0):
                return GaussianPreconditioner(P, lu, d, sigma)
        except RuntimeError:
            pass
        d *= 10
    raise np.linalg.LinAlgError("sparse Gaussian preconditioner factorization failed")


# ---------------------------------------------------------------------------
# iterative path

def _gl_grid(Omega, x, n):
    dim = x.shape[1]
    om = _omega_tuple(Omega, dim)
    ext = np.ptp(x, axis=0)
    if dim == 1:
        m = max(n, int(math.ceil(4 * om[0] * max(ext[0], 1e-300))))
        return gauss_legendre(om[0], m)
    base = int(math.ceil(math.sqrt(n)))
    grids = [gauss_legendre(om[k], max(base, int(math.ceil(4 * om[k] * ext[k]))) + 8) for k in range(dim)]
    return tensor_grid(*grids)


def _pcg(apply_A, b, apply_M, tol, max_iter):
    x = np.zeros_like(b)
    r = b.copy()
    z = apply_M(r)
    z0 = np.linalg.norm(z)
    hist = [1.0]
    if z0 == 0:
        return x, 0, 0.0, True, hist
    p = z.copy()
    rz = np.vdot(r, z)
    best = (np.inf, x.copy())
    for k in range(1, max_iter + 1):
        Ap = apply_A(p)
        pAp = np.vdot(p, Ap)
        if pAp.real <= 0:
            break
        a = rz / pAp
        x = x + a * p
        r = r - a * Ap
        z = apply_M(r)
        rel = float(np.linalg.norm(z) / z0)
        hist.append(rel)
        if rel < best[0]:
            best = (rel, x.copy())
        if rel <= tol:
            return x, k, rel, True, hist
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return best[1], len(hist) - 1, best[0], False, hist


def solve_iterative(sample, window: WindowFunction, Omega, config: SolverConfig | None = None):
    """Conjugate gradients on ``(F* D F + delta I) alpha = F* D b``.

    ``D`` holds Gauss-Legendre weights on ``[-Omega, Omega]`` (tensor grid in
    2D) so that ``F* D F`` approximates the sinc kernel matrix.  With the
    sparse-Gaussian preconditioner the weights are multiplied by the Gaussian
    transform ``G_K`` so that the operator approximates the Gaussian kernel
    matrix that the preconditioner factors.  Iteration stops when the
    preconditioned residual falls below ``tol`` times its initial value.
    """
    cfg = config or SolverConfig(method="normal-krylov")
    x = _locs(sample)
    n, dim = x.shape
    om = _omega_tuple(Omega, dim)
    t0 = time.perf_counter()
    grid = _gl_grid(Omega, x, n)
    D = np.array(grid.quad_weights)
    pre = None
    build = 0.0
    if cfg.precond == "sparse-gaussian":
        tb = time.perf_counter()
        pre = build_gaussian_precond(x, om, cfg.precond_delta, cfg.precond_c, cfg.precond_drop)
        build = time.perf_counter() - tb
        sig = cfg.precond_c / om
        w2 = grid.nodes.reshape(grid.m, dim) ** 2
        D = D * np.prod(np.sqrt(2 * np.pi) * sig) * np.exp(-2 * np.pi ** 2 * np.sum(w2 * sig ** 2, axis=1))
    delta = cfg.delta if cfg.delta is not None else 1e-14 * float(np.sum(grid.quad_weights)) ** (1.0 / dim)
    gram = GramOperator(_flat(x), grid, tol=cfg.nufft_tol, D=D)
    b = window.eval_G(grid.nodes)
    rhs = gram.rhs(b)
    if cfg.precond == "none":
        apply_M = lambda r: r
    elif cfg.precond == "scaled-identity":
        s = 1.0 / float(np.sum(D))
        apply_M = lambda r: s * r
    else:
        apply_M = pre.solve
    # F* D F and F* D b are real for conjugate-symmetric grids and windows, so
    # the iteration runs in real arithmetic; the discarded imaginary parts are
    # tracked as a diagnostic.
    imag_track = [np.linalg.norm(rhs.imag) / max(np.linalg.norm(rhs), 1e-300)]

    def apply_A(v):
        Av = gram.matvec(v)
        imag_track.append(np.linalg.norm(Av.imag) / max(np.linalg.norm(Av), 1e-300))
        return Av.real + delta * v

    ts = time.perf_counter()
    a, iters, rel, ok, hist = _pcg(apply_A, np.ascontiguousarray(rhs.real), apply_M, cfg.krylov_tol, cfg.max_iter)
    solve_s = time.perf_counter() - ts
    imag_ratio = float(max(imag_track))
    if imag_ratio > 1e-10:
        warnings.warn(f"normal-equation imaginary residue is {imag_ratio:.2e} of the norm",
                      RuntimeWarning, stacklevel=2)
    info = {"grid_nodes": grid.m, "imag_ratio": imag_ratio, "delta": delta, "history": hist,
            "precond": cfg.precond}
    if pre is not None:
        info["precond_nnz"] = pre.nnz
        info["precond_delta"] = pre.delta
    rep = SolveReport(iters, rel, build, solve_s, ok, info)
    if not ok:
        warnings.warn(f"normal-krylov stopped after {iters} iterations at residual {rel:.2e}",
                      RuntimeWarning, stacklevel=2)
    qw = _finish(a, Omega, window, x, "normal-krylov", rep,
                 {"iterations": iters, "converged": ok, "imag_ratio": imag_ratio})
    rep.solve_seconds = solve_s
    rep.info["total_seconds"] = time.perf_counter() - t0
    return qw, rep


# ---------------------------------------------------------------------------
# low-rank path

def solve_lowrank(sample, window: WindowFunction, Omega, config: SolverConfig | None = None):
    """Randomized low-rank pseudoinverse solve for small ``Omega * extent``.

    The stacked real collocation matrix ``A`` is sketched with Gaussian test
    matrices of growing size until its numerical rank at ``tol`` is resolved,
    giving ``A ~ Q U S V^T``; then ``alpha = V S^-1 U^T Q^T b``.
    """
    cfg = config or SolverConfig(method="low-rank")
    x = _locs(sample)
    n, dim = x.shape
    t0 = time.perf_counter()
    om = _omega_tuple(Omega, dim)
    ext = np.ptp(x, axis=0)
    if dim == 1:
        m = min(int(math.ceil(cfg.oversample * n)), max(256, int(math.ceil(16 * om[0] * ext[0])) + 128))
    else:
        per = max(32, int(math.ceil(8 * max(om * ext))) + 24)
        m = min(int(math.ceil(math.sqrt(cfg.oversample * n))), per)
    grid = _collocation_nodes(Omega, n, cfg, dim, m_override=m)
    nodes = grid.nodes if dim > 1 else grid.nodes[:, None]
    b = window.eval_G(grid.nodes)
    rhs = np.concatenate([b.real, b.imag])
    if not np.any(rhs):
        rep = SolveReport(0, 0.0, 0.0, time.perf_counter() - t0, True, {"rank": 0})
        return _finish(np.zeros(n), Omega, window, x, "low-rank", rep, {"rank": 0}), rep
    F = np.exp(-2j * np.pi * _frac(nodes @ x.T))
    A = np.concatenate([F.real, F.imag])
    del F
    rng = np.random.default_rng(cfg.seed)
    k = min(64, n, A.shape[0])
    while True:
        Y = A @ rng.standard_normal((n, k))
        Q, _ = np.linalg.qr(Y)
        for _ in range(2):
            Z, _ = np.linalg.qr(A.T @ Q)
            Q, _ = np.linalg.qr(A @ Z)
        B = Q.T @ A
        U, s, Vt = np.linalg.svd(B, full_matrices=False)
        r = int(np.sum(s > cfg.rank_tol * s[0]))
        if r < k or k >= min(n, A.shape[0]):
            break
        if 2 * k > cfg.rank_cap:
            raise RuntimeError(
                f"numerical rank exceeds the cap {cfg.rank_cap}; use method=normal-krylov")
        k = min(2 * k, n, A.shape[0])
    if r > cfg.rank_cap:
        raise RuntimeError(f"numerical rank {r} exceeds the cap {cfg.rank_cap}; use method=normal-krylov")
    coef = (U[:, :r].T @ (Q.T @ rhs)) / s[:r]
    alpha = Vt[:r].T @ coef
    res = float(np.linalg.norm(A @ alpha - rhs))
    rep = SolveReport(1, res, 0.0, time.perf_counter() - t0, True, {"rank": r, "nodes": grid.m, "sketch": k})
    qw = _finish(alpha, Omega, window, x, "low-rank", rep, {"rank": r, "nodes": grid.m})
    return qw, rep


def solve(sample, window, Omega, config: SolverConfig | None = None):
    """Dispatch on ``config.method``."""
    cfg = config or SolverConfig()
    fn = {"dense-qr": solve_dense, "low-rank": solve_lowrank, "normal-krylov": solve_iterative}[cfg.method]
    return fn(sample, window, Omega, cfg)


# ---------------------------------------------------------------------------
# diagnostics

def validate_weights(weights: QuadratureWeights | np.ndarray, window: WindowFunction,
                     n_check_per_unit: float = 10, locations=None, Omega=None) -> dict:
    """Sup error of ``H_alpha - G`` on a dense uniform grid over the band.

    The grid has at least ``n_check_per_unit`` points per unit frequency, an
    odd count so that it contains 0, and at least 65537 points in 1D (64 per
    axis in 2D).  Near the rounding floor ``H - G`` is noise-like, so a dense
    grid is needed for a stable sup.
    """
    if isinstance(weights, QuadratureWeights):
        alpha, x, Om = weights.alpha, weights.locations, weights.Omega
    else:
        alpha, x, Om = np.asarray(weights, dtype=float), _locs(locations), Omega
    x = _locs(x)
    dim = x.shape[1]
    om = _omega_tuple(Om, dim)
    if dim == 1:
        m = max(65537, int(math.ceil(n_check_per_unit * 2 * om[0]))) | 1
        grid = np.linspace(-om[0], om[0], m)
    else:
        axes = [np.linspace(-om[k], om[k], max(65, int(math.ceil(n_check_per_unit * 2 * om[k])) | 1))
                for k in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([a.ravel() for a in mesh], 1)
    H = _eval_H(x, alpha, grid)
    G = window.eval_G(grid)
    err = np.abs(H - G)
    return {"sup_error": float(err.max()), "l1": float(np.sum(np.abs(alpha))),
            "l2": float(np.linalg.norm(alpha)), "grid_points": int(err.size),
            "argmax": grid[int(np.argmax(err))].tolist() if dim > 1 else float(grid[int(np.argmax(err))]),
            "sup_G": float(np.abs(G).max())}


def omega_guidance(n: int, domain: Domain):
    """Largest ``Omega`` covered by the recovery guarantee, ``(n - 35)/(5 L)``.

    ``L`` is the extent of the domain's bounding interval.  In 2D ``n`` is
    replaced by ``n^(1/2)`` and one value is returned per axis.  For too few
    points the guarantee is empty and 0 is returned with a warning.
    """
    ext = domain.extent
    neff = n ** (1.0 / domain.dim)
    if neff <= 35:
        warnings.warn(f"n={n} gives no guaranteed Omega (need n^(1/d) > 35)", RuntimeWarning, stacklevel=2)
        return 0.0 if domain.dim == 1 else np.zeros(domain.dim)
    val = (neff - 35) / (5 * ext)
    return float(val[0]) if domain.dim == 1 else val


# ---------------------------------------------------------------------------
# I/O

def save_weights(path, qw: QuadratureWeights, extra: dict | None = None) -> str:
    """Write ``x[,y],alpha`` CSV plus a ``.json`` sidecar; returns the sidecar path."""
    x = qw.locations
    cols = ["x", "y"][: x.shape[1]] + ["alpha"]
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row, a in zip(x, qw.alpha):
            fh.write(",".join("%.17g" % v for v in [*row, a]) + "\n")
    os.replace(tmp, path)
    meta = qw.summary()
    if qw.window is not None:
        meta["window"] = qw.window.describe()
    meta.update(extra or {})
    side = str(path) + ".json"
    tmp = f"{side}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
    os.replace(tmp, side)
    return side


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def load_weights(path):
    """Read a weights CSV (and its sidecar if present): ``(locations, alpha, meta)``."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if header[-1] != "alpha":
        raise ValueError(f"{path}: last column must be 'alpha'")
    meta = {}
    side = str(path) + ".json"
    if os.path.exists(side):
        with open(side, encoding="utf-8") as fh:
            meta = json.load(fh)
    return table[:, :-1], table[:, -1], meta
