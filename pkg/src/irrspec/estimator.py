"""Spectral estimators, exact expectations, bias oracles and baselines.

The quadrature estimator is

    S_hat(xi) = | sum_j exp(-2 pi i xi.x_j) alpha_j y_j |^2,

whose expectation under a covariance ``Sigma`` is ``h* Sigma h`` with
``h_j = alpha_j exp(-2 pi i xi.x_j)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .models import ProcessModel, process_cov_matrix
from .nufourier import NufftPlan, _legendre_rule
from .sampling import SampleSet, SamplingDensity
from .weights import QuadratureWeights

__all__ = [
    "SpectralEstimate",
    "BiasReport",
    "default_freqs",
    "estimate",
    "expected_estimate",
    "convolution_oracle",
    "aliasing_bias",
    "thm_aliasing_bound",
    "cor_rate_bound",
    "lemma_moments",
    "lomb_scargle",
    "regrid_estimate",
    "regrid_matrix",
    "gridded_estimate",
    "save_estimate",
    "save_bias_reports",
]


@dataclass(frozen=True)
class SpectralEstimate:
    """Estimator values on a frequency grid.

    ``values`` is the mean over replicates; per-replicate rows are kept in
    ``replicates`` (shape ``(R, m)``) when more than one was supplied.
    """

    freqs: np.ndarray
    values: np.ndarray
    kind: str
    weights_ref: dict = field(default_factory=dict)
    replicates: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class BiasReport:
    freq: float | tuple
    expected: float
    window_convolution: float
    aliasing_eps: float
    bound_prob: float = float("nan")


def _weights_ref(w: QuadratureWeights) -> dict:
    return {"Omega": w.Omega, "l2": w.l2, "sup_residual": w.sup_residual, "method": w.method}


def _freqs2(freqs, dim):
    f = np.asarray(freqs, dtype=float)
    if dim == 1:
        return f.reshape(-1, 1)
    return f.reshape(-1, dim)


def _values(sample, values):
    if values is None:
        if not isinstance(sample, SampleSet) or sample.values is None:
            raise ValueError("no data values supplied")
        values = sample.values
    y = np.asarray(values, dtype=float)
    return y[None, :] if y.ndim == 1 else y


def _locs(sample):
    x = sample.locations if isinstance(sample, SampleSet) else np.asarray(sample, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _pack(freqs, power, kind, ref):
    power = np.maximum(power, 0.0)
    mean = power.mean(axis=0)
    return SpectralEstimate(freqs, mean, kind, ref, power if power.shape[0] > 1 else None)


def default_freqs(domain, Omega, spacing: float | None = None) -> np.ndarray:
    """Uniform grid on ``[0, Omega]`` with spacing ``1/(2 |D|)``.

    In 2D the grid is the tensor product of ``[-Omega_k, Omega_k]`` axes with
    spacing ``1/(2 L_k)``, returned as an ``(m, 2)`` array.
    """
    if domain.dim == 1:
        h = spacing or 1.0 / (2 * domain.measure)
        Om = float(np.ravel(Omega)[0])
        return np.arange(0.0, Om + 0.5 * h, h)
    om = np.broadcast_to(np.asarray(Omega, dtype=float), (2,))
    axes = []
    for k in range(2):
        h = spacing or 1.0 / (2 * domain.extent[k])
        half = np.arange(0.0, om[k] + 0.5 * h, h)
        axes.append(np.concatenate([-half[:0:-1], half]))
    X, Y = np.meshgrid(*axes, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], 1)


# ---------------------------------------------------------------------------
# estimators

def estimate(sample, weights: QuadratureWeights, freqs, values=None, kind: str = "quadrature",
             tol: float = 1e-12) -> SpectralEstimate:
    """Quadrature estimator for one or more replicates.

    ``values`` (or ``sample.values``) may be ``(n,)`` or ``(R, n)``; the
    transform of every replicate goes through one nonuniform FFT plan.
    """
    x = _locs(sample)
    y = _values(sample, values)
    if y.shape[1] != x.shape[0] or weights.alpha.size != x.shape[0]:
        raise ValueError(f"size mismatch: {x.shape[0]} locations, {y.shape[1]} values, "
                         f"{weights.alpha.size} weights")
    f2 = _freqs2(freqs, x.shape[1])
    plan = NufftPlan(x, f2, tol)
    tr = plan.forward((y * weights.alpha).astype(complex))
    power = np.abs(np.atleast_2d(tr)) ** 2
    return _pack(np.asarray(freqs, dtype=float), power, kind, _weights_ref(weights))


def forward_estimate(sample, alpha, freqs, values=None) -> SpectralEstimate:
    """Estimator with arbitrary fixed weights (e.g. uncorrected ``g(x_j)``)."""
    x = _locs(sample)
    qw = QuadratureWeights(np.asarray(alpha, dtype=float), float("nan"), None, x,
                           float(np.abs(alpha).sum()), float(np.linalg.norm(alpha)), float("nan"), "fixed")
    return estimate(sample, qw, freqs, values, kind="forward")


def expected_estimate(model: ProcessModel, weights: QuadratureWeights, freqs,
                      chunk: int = 256) -> np.ndarray:
    """Exact ``E S_hat(xi) = h* Sigma h`` from the dense model covariance."""
    x = weights.locations
    S = process_cov_matrix(model, x)
    f2 = _freqs2(freqs, x.shape[1])
    out = np.empty(f2.shape[0])
    a = weights.alpha
    for s in range(0, f2.shape[0], chunk):
        ph = f2[s:s + chunk] @ x.T
        ph -= np.round(ph)
        Hm = a * np.exp(-2j * np.pi * ph)
        out[s:s + chunk] = np.real(np.sum(np.conj(Hm) * (Hm @ S), axis=1))
    return out


# ---------------------------------------------------------------------------
# convolution oracle

def _gl_panels(breaks, k):
    t, w = _legendre_rule(16)
    pts, wts = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        e = np.linspace(lo, hi, k + 1)
        mid = 0.5 * (e[1:] + e[:-1])
        half = 0.5 * (e[1:] - e[:-1])
        pts.append((mid[:, None] + half[:, None] * t[None, :]).ravel())
        wts.append((half[:, None] * w[None, :]).ravel())
    return np.concatenate(pts), np.concatenate(wts)


def _model_parts(model):
    if isinstance(model, ProcessModel):
        sdf = model.sdf if model.matern is not None else None
        return sdf, model.lines
    return model, ()


def convolution_oracle(model, window, xi, Omega, rtol: float = 1e-8, max_panels: int = 4096) -> float:
    """In-band window convolution ``int_{|xi - w| <= Omega} |G(xi - w)|^2 S(w) dw``.

    ``model`` is a :class:`ProcessModel` or a callable spectral density.  The
    absolutely continuous part is integrated by composite Gauss-Legendre panels
    with break points at ``xi +- W``, ``xi`` and 0, doubling the panel count
    until the relative change is below ``rtol``.  Spectral lines inside the
    band contribute ``power/2 |G(xi -+ f)|^2`` exactly.  A nugget has no
    integrable spectral density and is not included.
    """
    sdf, lines = _model_parts(model)
    dim = window.dim
    xi_v = np.atleast_1d(np.asarray(xi, dtype=float)).reshape(dim)
    om = np.broadcast_to(np.asarray(Omega, dtype=float), (dim,))
    W = window.W
    total = 0.0
    if sdf is not None:
        axes_breaks = []
        for k in range(dim):
            lo, hi = xi_v[k] - om[k], xi_v[k] + om[k]
            br = {lo, hi, xi_v[k]}
            for c in (xi_v[k] - W, xi_v[k] + W, 0.0):
                if lo < c < hi:
                    br.add(c)
            axes_breaks.append(sorted(br))

        def integrate(k):
            if dim == 1:
                w, q = _gl_panels(axes_breaks[0], k)
                G = window.eval_G(xi_v[0] - w)
                return float(np.sum(q * np.abs(G) ** 2 * sdf(w)))
            w1, q1 = _gl_panels(axes_breaks[0], k)
            w2, q2 = _gl_panels(axes_breaks[1], k)
            acc = 0.0
            step = max(1, 2 ** 20 // w2.size)
            for s in range(0, w1.size, step):
                X, Y = np.meshgrid(w1[s:s + step], w2, indexing="ij")
                pts = np.stack([X.ravel(), Y.ravel()], 1)
                G = window.eval_G(xi_v[None, :] - pts)
                acc += float(np.sum((q1[s:s + step, None] * q2[None, :]).ravel() * np.abs(G) ** 2 * sdf(pts)))
            return acc

        k = 2
        prev = integrate(k)
        while True:
            k *= 2
            cur = integrate(k)
            if abs(cur - prev) <= rtol * abs(cur) or cur == 0:
                break
            if k >= max_panels:
                raise RuntimeError(f"convolution quadrature did not converge (last change "
                                   f"{abs(cur - prev) / abs(cur):.2e})")
            prev = cur
        total += cur
    for line in lines:
        f = line.fvec
        for s in (1.0, -1.0):
            if np.all(np.abs(xi_v - s * f) <= om):
                total += 0.5 * line.power * float(np.abs(window.eval_G((xi_v - s * f) if dim > 1 else xi_v[0] - s * f[0])) ** 2)
    return total


def _band_integral(model, xi_v, om, rtol=1e-10):
    """``int_{band} S`` for the Matérn part plus in-band line power."""
    sdf, lines = _model_parts(model)
    dim = xi_v.size
    tot = 0.0
    if sdf is not None:
        def integ(k):
            if dim == 1:
                br = sorted({xi_v[0] - om[0], xi_v[0] + om[0]} | ({0.0} if abs(xi_v[0]) < om[0] else set()))
                w, q = _gl_panels(br, k)
                return float(np.sum(q * sdf(w)))
            ax = []
            for j in range(dim):
                br = sorted({xi_v[j] - om[j], xi_v[j] + om[j]} | ({0.0} if abs(xi_v[j]) < om[j] else set()))
                ax.append(_gl_panels(br, k))
            X, Y = np.meshgrid(ax[0][0], ax[1][0], indexing="ij")
            Q = np.outer(ax[0][1], ax[1][1]).ravel()
            return float(np.sum(Q * sdf(np.stack([X.ravel(), Y.ravel()], 1))))

        k, prev = 2, integ(2)
        while k < 1024:
            k *= 2
            cur = integ(k)
            if abs(cur - prev) <= rtol * abs(cur):
                break
            prev = cur
        tot += cur
    for line in lines:
        for s in (1.0, -1.0):
            if np.all(np.abs(xi_v - s * line.fvec) <= om):
                tot += 0.5 * line.power
    return tot


def aliasing_bias(model: ProcessModel, weights: QuadratureWeights, xi, window=None,
                  beta: float | None = None, rtol: float = 1e-8) -> BiasReport:
    """Split ``E S_hat(xi)`` into the in-band window convolution and ``eps``.

    With ``beta`` given, ``bound_prob`` holds the tail probability bound
    evaluated with ``int_E S`` = (continuous + line variance) minus the in-band
    spectral mass.
    """
    window = window or weights.window
    dim = weights.locations.shape[1]
    xi_v = np.atleast_1d(np.asarray(xi, dtype=float)).reshape(dim)
    om = np.broadcast_to(np.asarray(weights.Omega, dtype=float), (dim,))
    expected = float(expected_estimate(model, weights, xi_v[None, :] if dim > 1 else xi_v)[0])
    conv = convolution_oracle(model, window, xi_v if dim > 1 else xi_v[0], om, rtol=rtol)
    bound = float("nan")
    if beta is not None:
        var = sum(l.power for l in model.lines) + (model.matern.sigma ** 2 if model.matern else 0.0)
        tail = max(var - _band_integral(model, xi_v, om), 0.0)
        S_xi = float(np.ravel(model.sdf(xi_v[None, :] if dim > 1 else xi_v))[0])
        bound = thm_aliasing_bound(beta, S_xi, tail, weights.l2) if tail > 0 else 0.0
    fr = float(xi_v[0]) if dim == 1 else tuple(float(v) for v in xi_v)
    return BiasReport(fr, expected, conv, expected - conv, bound)


# ---------------------------------------------------------------------------
# theory helpers

def thm_aliasing_bound(beta: float, S_at_xi: float, tail_mass: float, l2_alpha: float) -> float:
    """``min(1, 2 exp(-beta S(xi) / (2 ||alpha||_2^2 int_E S)))``.

    ``l2_alpha`` is the Euclidean norm of the weights (squared internally).
    """
    for name, v in (("beta", beta), ("S_at_xi", S_at_xi), ("tail_mass", tail_mass), ("l2_alpha", l2_alpha)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    expo = beta * S_at_xi / (2.0 * l2_alpha ** 2 * tail_mass)
    return float(min(1.0, 2.0 * math.exp(-expo)))


def cor_rate_bound(nu: float, C: float, Omega_n, xi_n):
    """Rate bound ``C (Omega_n - xi_n)^(-2 nu) / nu`` for algebraic spectral tails."""
    Om = np.asarray(Omega_n, dtype=float)
    xi = np.asarray(xi_n, dtype=float)
    if np.any(Om <= xi):
        raise ValueError("need Omega_n > xi_n")
    if nu <= 0:
        raise ValueError("nu must be positive")
    out = C * (Om - xi) ** (-2.0 * nu) / nu
    return float(out) if out.ndim == 0 else out


def lemma_moments(density: SamplingDensity, omega, alpha):
    """Limiting mean and covariance of ``(Re H_alpha(w), Im H_alpha(w))``.

    For i.i.d. locations from a symmetric density with characteristic
    function ``phi`` and ``alpha = a + i b``::

        mean  = phi(w) (sum a, sum b)
        S11   = |a|^2 ((1 + phi(2w))/2 - phi(w)^2) + |b|^2 (1 - phi(2w))/2
        S22   = |a|^2 (1 - phi(2w))/2 + |b|^2 ((1 + phi(2w))/2 - phi(w)^2)
        S12   = <a, b> (phi(2w) - phi(w)^2)

    Returns ``(mean, cov)`` with shapes ``(..., 2)`` and ``(..., 2, 2)``.
    """
    al = np.asarray(alpha)
    a, b = np.real(al).astype(float), np.imag(al).astype(float)
    w = np.asarray(omega, dtype=float)
    p1 = np.real(density.charfn(w))
    p2 = np.real(density.charfn(2 * w))
    na, nb, ab = a @ a, b @ b, a @ b
    s11 = na * ((1 + p2) / 2 - p1 ** 2) + nb * (1 - p2) / 2
    s22 = na * (1 - p2) / 2 + nb * ((1 + p2) / 2 - p1 ** 2)
    s12 = ab * (p2 - p1 ** 2)
    mean = np.stack([p1 * a.sum(), p1 * b.sum()], axis=-1)
    cov = np.stack([np.stack([s11, s12], -1), np.stack([s12, s22], -1)], -2)
    return mean, cov


# ---------------------------------------------------------------------------
# baselines

def lomb_scargle(sample, freqs, values=None) -> SpectralEstimate:
    """Classical Lomb-Scargle periodogram on mean-centered data.

    ``P(f) = 1/2 [ (sum y c)^2 / sum c^2 + (sum y s)^2 / sum s^2 ]`` with
    ``c = cos 2 pi f (x - tau)``, ``s = sin 2 pi f (x - tau)`` and
    ``tan(4 pi f tau) = sum sin 4 pi f x / sum cos 4 pi f x``.  Frequencies are
    in cycles per unit and the power is in data-variance units (a sinusoid of
    amplitude ``A`` gives a peak near ``n A^2 / 4``).
    """
    x = _locs(sample)
    if x.shape[1] != 1:
        raise ValueError("Lomb-Scargle is one-dimensional")
    t = x[:, 0]
    if t.size < 3:
        raise ValueError("need at least three observations")
    y = _values(sample, values)
    y = y - y.mean(axis=1, keepdims=True)
    f = np.asarray(freqs, dtype=float).reshape(-1)
    if np.any(f == 0):
        raise ValueError("Lomb-Scargle is undefined at zero frequency")
    out = np.empty((y.shape[0], f.size))
    for i, fi in enumerate(f):
        w = 2 * np.pi * fi
        tau = math.atan2(np.sum(np.sin(2 * w * t)), np.sum(np.cos(2 * w * t))) / (2 * w)
        arg = w * (t - tau)
        c, s = np.cos(arg), np.sin(arg)
        cc, ss = c @ c, s @ s
        if cc <= 1e-300 or ss <= 1e-300:
            raise ValueError(f"degenerate frequency {fi}")
        out[:, i] = 0.5 * ((y @ c) ** 2 / cc + (y @ s) ** 2 / ss)
    return _pack(f, out, "lomb-scargle", {})


def regrid_matrix(locations, grid, kernel_range: float = 1e-3, k_nn: int = 10,
                  ridge: float = 1e-10) -> sparse.csr_matrix:
    """Sparse ``(m, n)`` interpolation matrix of local kernel-ridge fits.

    Each grid point uses its ``k_nn`` nearest observations with the kernel
    ``exp(-|x - y|^2 / kernel_range)`` and a ridge of ``ridge``.
    """
    x = np.asarray(locations, dtype=float).reshape(-1)
    g = np.asarray(grid, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("no observations to interpolate")
    k = min(k_nn, x.size)
    _, idx = cKDTree(x[:, None]).query(g[:, None], k=k)
    idx = idx.reshape(g.size, k)
    xs = x[idx]
    K = np.exp(-(xs[:, :, None] - xs[:, None, :]) ** 2 / kernel_range) + ridge * np.eye(k)
    kv = np.exp(-(xs - g[:, None]) ** 2 / kernel_range)
    wts = np.linalg.solve(K, kv[:, :, None])[:, :, 0]
    rows = np.repeat(np.arange(g.size), k)
    return sparse.csr_matrix((wts.ravel(), (rows, idx.ravel())), shape=(g.size, x.size))


def gridded_estimate(grid, gvals, values, freqs) -> np.ndarray:
    """Windowed periodogram on an equispaced grid in continuous units.

    ``S_hat(w) = dt |sum_j g_j y_j exp(-2 pi i w t_j)|^2 / sum_j g_j^2``.
    """
    t = np.asarray(grid, dtype=float)
    dt = t[1] - t[0]
    y = np.atleast_2d(values)
    f = np.asarray(freqs, dtype=float).reshape(-1, 1)
    plan = NufftPlan(t[:, None], f, 1e-12)
    tr = plan.forward((y * gvals).astype(complex))
    return dt * np.abs(np.atleast_2d(tr)) ** 2 / np.sum(gvals ** 2)


def regrid_estimate(sample, grid_m: int, freqs, kernel_range: float = 1e-3, k_nn: int = 10,
                    window=None, values=None, grid=None) -> SpectralEstimate:
    """Interpolate to a regular grid, then apply the gridded estimator.

    The default grid has ``grid_m`` cell-centred points on the hull of the
    sample's domain.  ``window`` (evaluated at the grid points) tapers the
    gridded data; ``None`` means no taper.
    """
    x = _locs(sample)
    if x.shape[1] != 1:
        raise ValueError("regridding is one-dimensional")
    if grid is None:
        if grid_m < 2:
            raise ValueError("grid_m must be at least 2")
        if isinstance(sample, SampleSet):
            a, b = sample.domain.hull[0]
        else:
            a, b = x.min(), x.max()
        grid = a + (np.arange(grid_m) + 0.5) * (b - a) / grid_m
    y = _values(sample, values)
    R = regrid_matrix(x[:, 0], grid, kernel_range, k_nn)
    yg = (R @ y.T).T
    gv = np.ones(grid.size) if window is None else window.eval_g(grid)
    power = gridded_estimate(grid, gv, yg, freqs)
    return _pack(np.asarray(freqs, dtype=float), power, "regrid", {"grid_m": int(grid.size), "k_nn": k_nn})


# ---------------------------------------------------------------------------
# I/O

def _atomic_write(path, text):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_estimate(path, est: SpectralEstimate) -> None:
    """CSV with frequency column(s), ``value`` and per-replicate columns if any."""
    f = est.freqs.reshape(est.m, -1)
    cols = ["omega"] if f.shape[1] == 1 else ["omega1", "omega2"]
    cols.append("value")
    reps = est.replicates
    if reps is not None:
        cols += [f"rep{r}" for r in range(reps.shape[0])]
    lines = [",".join(cols)]
    for i in range(est.m):
        row = [*f[i], est.values[i]]
        if reps is not None:
            row += list(reps[:, i])
        lines.append(",".join("%.17g" % v for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def save_bias_reports(path, reports) -> None:
    lines = ["freq,expected,window_convolution,aliasing_eps,bound_prob"]
    for r in reports:
        fr = r.freq if np.ndim(r.freq) == 0 else ";".join("%.17g" % v for v in r.freq)
        lines.append(",".join([fr if isinstance(fr, str) else "%.17g" % fr] +
                              ["%.17g" % v for v in (r.expected, r.window_convolution, r.aliasing_eps, r.bound_prob)]))
    _atomic_write(path, "\n".join(lines) + "\n")
