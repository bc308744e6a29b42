"""Observation locations, CSV ingestion and sampling domains.

All random generation uses numpy's PCG64 bit generator seeded through
``numpy.random.SeedSequence``.  Independent replicate streams are obtained
with ``SeedSequence.spawn``, so fixtures are portable across platforms for a
fixed numpy major version.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Domain",
    "SampleSet",
    "SamplingDensity",
    "make_rng",
    "spawn_rngs",
    "generate_uniform",
    "generate_jittered_grid",
    "generate_gappy_grid",
    "load_csv",
    "save_csv",
    "infer_domain",
    "charfn_uniform",
]


def make_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` (int, SeedSequence or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_rngs(seed, count: int) -> list[np.random.Generator]:
    """Independent child generators derived from one top-level seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(count)]


@dataclass(frozen=True)
class Domain:
    """Union of pairwise disjoint axis-aligned intervals (1D) or boxes (2D).

    Parameters
    ----------
    pieces : sequence
        In 1D a sequence of ``(a, b)`` pairs.  In 2D a sequence of boxes
        ``((a0, b0), (a1, b1))``.
    """

    pieces: tuple
    dim: int = 1

    def __init__(self, pieces, dim: int | None = None):
        arr = [np.asarray(p, dtype=float) for p in pieces]
        if len(arr) == 0:
            raise ValueError("domain must have at least one piece")
        if dim is None:
            dim = 1 if arr[0].ndim == 1 else arr[0].shape[0]
        norm = []
        for p in arr:
            p = p.reshape(dim, 2)
            if not np.all(np.isfinite(p)):
                raise ValueError("domain bounds must be finite")
            if np.any(p[:, 1] <= p[:, 0]):
                raise ValueError(f"degenerate piece {p.tolist()}")
            norm.append(tuple(tuple(float(v) for v in row) for row in p))
        if dim == 1:
            norm = sorted(norm, key=lambda q: q[0][0])
            for q0, q1 in zip(norm[:-1], norm[1:]):
                if q1[0][0] < q0[0][1]:
                    raise ValueError("domain pieces overlap")
        else:
            for i in range(len(norm)):
                for k in range(i + 1, len(norm)):
                    lo = np.maximum(np.array(norm[i])[:, 0], np.array(norm[k])[:, 0])
                    hi = np.minimum(np.array(norm[i])[:, 1], np.array(norm[k])[:, 1])
                    if np.all(hi > lo):
                        raise ValueError("domain pieces overlap")
        object.__setattr__(self, "pieces", tuple(norm))
        object.__setattr__(self, "dim", int(dim))

    @classmethod
    def interval(cls, a: float, b: float) -> "Domain":
        return cls([(a, b)])

    @classmethod
    def box(cls, *bounds) -> "Domain":
        return cls([tuple(bounds)], dim=len(bounds))

    def bounds(self, piece: int) -> np.ndarray:
        """``(dim, 2)`` array of lower/upper bounds of one piece."""
        return np.array(self.pieces[piece], dtype=float)

    @property
    def piece_measures(self) -> np.ndarray:
        return np.array([np.prod(np.diff(self.bounds(i), axis=1)) for i in range(len(self.pieces))])

    @property
    def measure(self) -> float:
        return float(self.piece_measures.sum())

    @property
    def hull(self) -> np.ndarray:
        """Bounding box of all pieces, shape ``(dim, 2)``."""
        b = np.array(self.pieces, dtype=float)
        return np.stack([b[:, :, 0].min(axis=0), b[:, :, 1].max(axis=0)], axis=1)

    @property
    def extent(self) -> np.ndarray:
        h = self.hull
        return h[:, 1] - h[:, 0]

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        """Boolean mask of points lying in the closed domain."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        mask = np.zeros(x.shape[0], dtype=bool)
        for i in range(len(self.pieces)):
            b = self.bounds(i)
            inside = np.all((x >= b[:, 0] - tol) & (x <= b[:, 1] + tol), axis=1)
            mask |= inside
        return mask

    def to_dict(self) -> dict:
        return {"dim": self.dim, "pieces": [list(map(list, p)) for p in self.pieces]}


@dataclass(frozen=True)
class SampleSet:
    """Observation locations with optional measurements.

    ``locations`` has shape ``(n, dim)``.  ``values`` is either ``None``
    (locations only), a length-``n`` vector, or an ``(m, n)`` stack of
    replicates.
    """

    locations: np.ndarray
    domain: Domain
    values: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.locations, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] < 1:
            raise ValueError("a sample set needs at least one location")
        if x.shape[1] != self.domain.dim:
            raise ValueError("location dimension does not match domain")
        if not np.all(np.isfinite(x)):
            raise ValueError("locations must be finite")
        if not np.all(self.domain.contains(x, tol=1e-12 * max(1.0, float(np.max(np.abs(x)))))):
            raise ValueError("some locations lie outside the domain")
        v = self.values
        if v is not None:
            v = np.asarray(v, dtype=float)
            if v.shape[-1] != x.shape[0]:
                raise ValueError("values length does not match number of locations")
            if not np.all(np.isfinite(v)):
                raise ValueError("values must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "locations", x)
        if v is not None:
            v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    @property
    def x(self) -> np.ndarray:
        """Locations as a flat vector (1D) or ``(n, 2)`` array (2D)."""
        return self.locations[:, 0] if self.dim == 1 else self.locations

    def with_values(self, values) -> "SampleSet":
        return SampleSet(self.locations, self.domain, values)


@dataclass(frozen=True)
class SamplingDensity:
    kind: str
    domain: Domain
    charfn: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def _sorted_set(x: np.ndarray, domain: Domain, values=None) -> SampleSet:
    if domain.dim == 1:
        order = np.argsort(x[:, 0], kind="stable")
        x = x[order]
        if values is not None:
            values = np.asarray(values)[..., order]
    return SampleSet(x, domain, values)


def generate_uniform(domain: Domain, n: int, seed=None) -> SampleSet:
    """Draw ``n`` i.i.d. points uniformly on ``domain``.

    The piece is chosen with probability proportional to its measure and the
    point drawn uniformly within it.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    meas = domain.piece_measures
    if meas.sum() <= 0:
        raise ValueError("empty domain")
    rng = make_rng(seed)
    which = rng.choice(len(meas), size=n, p=meas / meas.sum())
    u = rng.random((n, domain.dim))
    lo = np.array([domain.bounds(i)[:, 0] for i in range(len(meas))])
    hi = np.array([domain.bounds(i)[:, 1] for i in range(len(meas))])
    x = lo[which] + u * (hi[which] - lo[which])
    return _sorted_set(x, domain)


def generate_jittered_grid(domain, n: int, jitter_half_width: float, seed=None) -> SampleSet:
    """Midpoint grid on an interval with uniform jitter.

    ``x_j = a + (j - 1/2) h + u_j`` with ``h = (b - a)/n`` and
    ``u_j ~ U(-jitter_half_width, jitter_half_width)``.
    """
    if not isinstance(domain, Domain):
        domain = Domain.interval(*domain)
    if domain.dim != 1 or len(domain.pieces) != 1:
        raise ValueError("jittered grids need a single interval")
    if n < 1:
        raise ValueError("n must be at least 1")
    a, b = domain.pieces[0][0]
    h = (b - a) / n
    if jitter_half_width < 0 or jitter_half_width >= h / 2:
        raise ValueError(
            f"jitter_half_width={jitter_half_width} must lie in [0, spacing/2={h / 2})"
        )
    rng = make_rng(seed)
    grid = a + (np.arange(n) + 0.5) * h
    x = grid + rng.uniform(-jitter_half_width, jitter_half_width, n) if jitter_half_width > 0 else grid
    return SampleSet(np.sort(x)[:, None], domain)


def generate_gappy_grid(domain, spacing: float, gaps: Sequence = ()) -> SampleSet:
    """Equispaced grid from the left endpoint with points inside gaps removed.

    The returned domain is the interval minus the open gaps, so windows built
    on it see the holes.
    """
    if not isinstance(domain, Domain):
        domain = Domain.interval(*domain)
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    a, b = domain.hull[0]
    count = int(math.floor((b - a) / spacing * (1 + 1e-12) + 1e-9)) + 1
    x = a + spacing * np.arange(count)
    x = x[x <= b + 1e-12 * max(1.0, abs(b))]
    keep = np.ones(x.size, dtype=bool)
    gaps = sorted((float(g[0]), float(g[1])) for g in gaps)
    for lo, hi in gaps:
        keep &= ~((x > lo) & (x < hi))
    x = x[keep]
    if x.size == 0:
        raise ValueError("gaps remove every grid point")
    # surviving domain is [a, b] minus the gaps
    pieces = []
    left = a
    for lo, hi in gaps:
        lo, hi = max(lo, a), min(hi, b)
        if hi <= left:
            continue
        if lo > left:
            pieces.append((left, lo))
        left = max(left, hi)
    if left < b:
        pieces.append((left, b))
    x = np.clip(x, a, b)
    dom = Domain(pieces) if pieces else domain
    return SampleSet(x[:, None], dom)


def save_csv(path, sample: SampleSet) -> None:
    """Write ``x[,y][,value]`` rows with full round-trip precision."""
    cols = ["x", "y"][: sample.dim]
    data = [sample.locations]
    if sample.values is not None:
        v = np.atleast_2d(sample.values)
        if v.shape[0] == 1:
            cols.append("value")
        else:
            cols += [f"value_{k}" for k in range(v.shape[0])]
        data.append(v.T)
    table = np.hstack(data)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    os.replace(tmp, path)


def load_csv(path, domain: Domain | None = None, gap_factor: float = 10.0) -> SampleSet:
    """Parse a headed CSV with columns ``x[,y][,value | value_0, ...]``.

    If ``domain`` is not supplied it is inferred with :func:`infer_domain`.
    Rows are sorted by ``x`` in 1D.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0] != "x":
            raise ValueError(f"{path}: header must start with 'x'")
        dim = 2 if len(header) > 1 and header[1] == "y" else 1
        value_cols = header[dim:]
        for c in value_cols:
            if c != "value" and not c.startswith("value_"):
                raise ValueError(f"{path}: unexpected column {c!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed number") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}: line {lineno}: non-finite entry")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = np.array(rows, dtype=float)
    x = table[:, :dim]
    values = None
    if value_cols:
        v = table[:, dim:].T
        values = v[0] if len(value_cols) == 1 else v
    if domain is None:
        if x.shape[0] >= 2:
            domain = infer_domain(x, gap_factor)
        else:
            domain = Domain([[(c - 0.5, c + 0.5) for c in x[0]]], dim=dim)
    elif domain.dim != dim:
        raise ValueError(f"{path}: file has dimension {dim}, domain has {domain.dim}")
    return _sorted_set(x, domain, values)


def infer_domain(locations, gap_factor: float = 10.0) -> Domain:
    """Heuristic sampling domain from observed locations.

    In 1D the sorted points are split wherever a spacing exceeds
    ``gap_factor`` times the median spacing.  For strongly irregular designs
    (coefficient of variation of the spacings above 0.5) a split also needs
    the spacing to exceed the largest gap expected from i.i.d. uniform
    sampling, ``median/ln 2 * ln(100 (n-1))``.  Each piece is padded by half
    its local median spacing.  In 2D the bounding box is padded by half the
    typical spacing ``extent / sqrt(n)``.
    """
    x = np.asarray(locations, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, dim = x.shape
    if n < 2:
        raise ValueError("need at least two locations")
    if dim == 2:
        lo, hi = x.min(axis=0), x.max(axis=0)
        ext = np.maximum(hi - lo, 1e-12)
        pad = 0.5 * ext / math.sqrt(n)
        return Domain.box((lo[0] - pad[0], hi[0] + pad[0]), (lo[1] - pad[1], hi[1] + pad[1]))
    xs = np.sort(x[:, 0])
    d = np.diff(xs)
    pos = d[d > 0]
    med = float(np.median(pos)) if pos.size else 1.0
    thresh = gap_factor * med
    if pos.size > 1 and np.std(pos) > 0.5 * np.mean(pos):
        thresh = max(thresh, med / math.log(2) * math.log(100 * (n - 1)))
    cuts = np.nonzero(d > thresh)[0] if math.isfinite(thresh) else np.array([], dtype=int)
    starts = np.concatenate([[0], cuts + 1])
    ends = np.concatenate([cuts, [n - 1]])
    pieces = []
    for s, e in zip(starts, ends):
        seg = np.diff(xs[s : e + 1])
        seg = seg[seg > 0]
        loc = float(np.median(seg)) if seg.size else med
        pieces.append([xs[s] - loc / 2, xs[e] + loc / 2])
    # padding must not make neighbouring pieces touch
    for i in range(len(pieces) - 1):
        if pieces[i][1] >= pieces[i + 1][0]:
            mid = 0.5 * (xs[ends[i]] + xs[starts[i + 1]])
            pieces[i][1] = min(pieces[i][1], mid)
            pieces[i + 1][0] = max(pieces[i + 1][0], mid + 1e-15 * max(1.0, abs(mid)))
    return Domain([tuple(p) for p in pieces])


def charfn_uniform(domain) -> Callable[[np.ndarray], np.ndarray]:
    """Characteristic function of the uniform density on ``[-a, a]``.

    ``phi(t) = sin(2 pi a t) / (2 pi a t)``.
    """
    if isinstance(domain, Domain):
        if domain.dim != 1 or len(domain.pieces) != 1:
            raise ValueError("charfn_uniform needs a single interval")
        lo, hi = domain.pieces[0][0]
    else:
        lo, hi = domain
    if not math.isclose(lo, -hi, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError("interval must be symmetric about 0")
    a = hi

    def phi(t):
        return np.sinc(2.0 * a * np.asarray(t, dtype=float))

    return phi


def uniform_density(domain: Domain) -> SamplingDensity:
    return SamplingDensity("uniform-on-domain", domain, charfn_uniform(domain))
