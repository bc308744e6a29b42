"""Command-line driver: ``irrspec {simulate,weights,estimate,bench}``.

Configuration is a flat ``key = value`` file with dotted section prefixes,
for example::

    sampling.kind = jittered
    sampling.n = 1024
    sampling.domain = 0,1
    model.nu = 0.75
    window.kind = kaiser
    solver.Omega = auto

Exit status is 0 on success, 2 for configuration or input errors and 3 for
numerical failures.  A JSON manifest is written to the output directory for
every run, including failed ones.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
import traceback
import warnings

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

THREADS_ENV = "IRRSPEC_THREADS"


class ConfigError(Exception):
    """Invalid configuration or input; maps to exit status 2."""


class NumericalError(Exception):
    """Solver or factorization failure; maps to exit status 3."""


# ---------------------------------------------------------------------------
# config

SCHEMA = {
    "seed": int,
    "sampling.kind": str, "sampling.n": int, "sampling.domain": str, "sampling.jitter": float,
    "sampling.spacing": float, "sampling.gaps": str, "sampling.file": str,
    "model.sigma": float, "model.rho": float, "model.nu": float, "model.anisotropy": str,
    "model.lines": str, "model.line_power": float, "model.nugget": float,
    "simulate.replicates": int, "simulate.dense_limit": int,
    "window.kind": str, "window.W": float, "window.beta": float, "window.domain": str,
    "window.quad_order": int,
    "solver.method": str, "solver.Omega": str, "solver.tol": float, "solver.precond": str,
    "solver.oversample": float, "solver.max_iter": int, "solver.dense_limit": int,
    "solver.nodes": str, "solver.norm_warn": float, "solver.precond_c": float,
    "solver.precond_delta": float,
    "estimate.kinds": str, "estimate.fmin": float, "estimate.fmax": float, "estimate.spacing": float,
    "estimate.regrid_m": int, "estimate.k_nn": int, "estimate.kernel_range": float,
    "io.data": str, "io.weights": str,
    "bench.n": str, "bench.kind": str, "bench.omega_ratio": float, "bench.precond": str,
    "bench.gap": str,
}


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = SCHEMA[key](val)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} must be {SCHEMA[key].__name__}, got {val!r}") from None
    return out


def _floats(s: str, key: str) -> list:
    try:
        return [float(v) for v in s.replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"{key}: malformed number list {s!r}") from None


def _positive(cfg, key, default):
    v = cfg.get(key, default)
    if v is not None and not v > 0:
        raise ConfigError(f"{key} must be positive, got {v}")
    return v


# ---------------------------------------------------------------------------
# builders

def build_domain(cfg, key="sampling.domain", default="0,1"):
    from .sampling import Domain
    spec = cfg.get(key, default)
    pieces = []
    for part in spec.split(";"):
        v = _floats(part, key)
        if len(v) not in (2, 4):
            raise ConfigError(f"{key}: each piece needs 2 (1D) or 4 (2D) bounds")
        pieces.append([(v[i], v[i + 1]) for i in range(0, len(v), 2)])
    try:
        return Domain(pieces)
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from None


def build_sample(cfg, seed):
    from .sampling import generate_gappy_grid, generate_jittered_grid, generate_uniform, load_csv
    kind = cfg.get("sampling.kind", "uniform")
    domain = build_domain(cfg)
    try:
        if kind == "file":
            path = cfg.get("sampling.file")
            if not path:
                raise ConfigError("sampling.file is required for sampling.kind = file")
            return load_csv(path, domain if "sampling.domain" in cfg else None)
        if kind == "gappy":
            gaps = []
            if cfg.get("sampling.gaps"):
                for part in cfg["sampling.gaps"].split(";"):
                    g = _floats(part, "sampling.gaps")
                    if len(g) != 2:
                        raise ConfigError("sampling.gaps: each gap needs two bounds")
                    gaps.append(tuple(g))
            return generate_gappy_grid(domain, _positive(cfg, "sampling.spacing", None) or
                                       float(domain.extent[0]) / cfg.get("sampling.n", 1024), gaps)
        n = _positive(cfg, "sampling.n", 1024)
        if kind == "uniform":
            return generate_uniform(domain, n, seed=seed)
        if kind == "jittered":
            return generate_jittered_grid(domain, n, cfg.get("sampling.jitter", 0.0), seed=seed)
    except FileNotFoundError as e:
        raise ConfigError(f"input file not found: {e.filename}") from None
    except ValueError as e:
        raise ConfigError(f"sampling: {e}") from None
    raise ConfigError(f"sampling.kind: unknown kind {kind!r}")


def build_model(cfg, dim):
    import numpy as np
    from .models import MaternSpec, ProcessModel, SpectralLine, DEFAULT_LINE_POWER
    for key in ("model.sigma", "model.rho", "model.nu"):
        if key in cfg and not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive, got {cfg[key]}")
    A = None
    if "model.anisotropy" in cfg:
        A = np.array(_floats(cfg["model.anisotropy"], "model.anisotropy"))
        if A.size != dim * dim:
            raise ConfigError(f"model.anisotropy needs {dim * dim} entries")
        A = A.reshape(dim, dim)
    lines = []
    if cfg.get("model.lines"):
        for item in cfg["model.lines"].split(";" if dim > 1 else ","):
            item = item.strip()
            if not item:
                continue
            f, _, pw = item.partition(":")
            try:
                fv = _floats(f.replace(" ", ","), "model.lines") if dim > 1 else [float(f)]
                lines.append(SpectralLine(fv[0] if dim == 1 else tuple(fv),
                                          float(pw) if pw else cfg.get("model.line_power", DEFAULT_LINE_POWER)))
            except ValueError as e:
                raise ConfigError(f"model.lines: bad entry {item!r} ({e})") from None
    try:
        mat = MaternSpec(cfg.get("model.sigma", 1.0), cfg.get("model.rho", 0.1), cfg.get("model.nu", 0.75),
                         dim=dim, anisotropy=A)
        return ProcessModel(mat, tuple(lines), cfg.get("model.nugget", 0.0))
    except ValueError as e:
        raise ConfigError(f"model: {e}") from None


def build_window(cfg, sample_domain):
    from .windows import boxcar, kaiser, prolate_1d, prolate_2d
    kind = cfg.get("window.kind", "kaiser" if sample_domain.dim == 1 else "prolate2d")
    dom = build_domain(cfg, "window.domain") if "window.domain" in cfg else sample_domain
    W = cfg.get("window.W")
    try:
        if kind == "kaiser":
            lo, hi = dom.hull[0]
            return kaiser((lo, hi), beta=cfg.get("window.beta"), W=W)
        if kind == "boxcar":
            return boxcar(dom, W)
        if kind == "prolate":
            if dom.dim == 2:
                return prolate_2d(dom, W or 4.0, cfg.get("window.quad_order", 48))
            return prolate_1d(dom, W, cfg.get("window.quad_order", 128))
        if kind == "prolate2d":
            return prolate_2d(dom, W or 4.0, cfg.get("window.quad_order", 48))
    except ValueError as e:
        raise ConfigError(f"window: {e}") from None
    raise ConfigError(f"window.kind: unknown kind {kind!r}")


def resolve_omega(cfg, n, domain):
    from .weights import omega_guidance
    spec = cfg.get("solver.Omega", "auto")
    if spec == "auto":
        om = omega_guidance(n, domain)
        if (om <= 0) if domain.dim == 1 else (min(om) <= 0):
            raise ConfigError("solver.Omega = auto but too few points for a guaranteed band")
        return om if domain.dim == 1 else tuple(float(v) for v in om)
    v = _floats(spec, "solver.Omega")
    if any(x <= 0 for x in v):
        raise ConfigError("solver.Omega must be positive")
    if domain.dim == 1:
        return v[0]
    return tuple(v * 2) if len(v) == 1 else tuple(v)


def build_solver(cfg):
    from .weights import SolverConfig
    kw = {}
    for key, name in (("solver.method", "method"), ("solver.tol", "tol"), ("solver.precond", "precond"),
                      ("solver.oversample", "oversample"), ("solver.max_iter", "max_iter"),
                      ("solver.dense_limit", "dense_limit"), ("solver.nodes", "nodes"),
                      ("solver.precond_c", "precond_c"), ("solver.precond_delta", "precond_delta")):
        if key in cfg:
            kw[name] = cfg[key]
    kw.setdefault("seed", cfg.get("seed", 0))
    try:
        return SolverConfig(**kw)
    except ValueError as e:
        raise ConfigError(f"solver: {e}") from None


# ---------------------------------------------------------------------------
# run context

class Run:
    def __init__(self, command, config_text, cfg, out_dir, seed):
        self.command = command
        self.cfg = cfg
        self.out = out_dir
        self.seed = seed
        self.manifest = {
            "command": command,
            "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
            "seed": seed,
            "timings": {},
            "diagnostics": {},
            "outputs": [],
            "warnings": [],
            "status": "running",
        }
        self._stage = None

    def stage(self, name):
        run = self

        class _S:
            def __enter__(self):
                run._stage = name
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                run.manifest["timings"][name] = time.perf_counter() - self.t
                return False

        return _S()

    def path(self, name):
        return os.path.join(self.out, name)

    def output(self, name):
        p = self.path(name)
        self.manifest["outputs"].append(p)
        return p

    def warn(self, msg):
        self.manifest["warnings"].append(msg)
        print(f"warning: {msg}", file=sys.stderr)

    def finish(self, status, error=None):
        import numpy as np
        import scipy
        from . import __version__
        self.manifest["status"] = status
        if error is not None:
            self.manifest["error"] = str(error)
            self.manifest["failed_stage"] = self._stage
        self.manifest["versions"] = {"irrspec": __version__, "numpy": np.__version__,
                                     "scipy": scipy.__version__, "python": platform.python_version()}
        _write_json(self.path(f"manifest_{self.command}.json"), self.manifest)


def _json_default(o):
    import numpy as np
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def _write_json(path, obj):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    os.replace(tmp, path)


def _write_text(path, text):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _load_data(run):
    from .sampling import load_csv
    cfg = run.cfg
    path = cfg.get("io.data") or run.path("data.csv")
    if not os.path.exists(path):
        raise ConfigError(f"data file not found: {path}")
    dom = build_domain(cfg) if "sampling.domain" in cfg else None
    try:
        return load_csv(path, dom)
    except ValueError as e:
        raise ConfigError(str(e)) from None


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(run: Run):
    """Sample locations, draw replicates and write ``data.csv``."""
    from .models import gp_simulate
    from .sampling import save_csv, spawn_rngs
    cfg = run.cfg
    loc_rng, sim_rng = spawn_rngs(run.seed, 2)
    with run.stage("sampling"):
        sample = build_sample(cfg, loc_rng)
    with run.stage("model"):
        model = build_model(cfg, sample.dim)
    reps = cfg.get("simulate.replicates", 1)
    if reps < 1:
        raise ConfigError("simulate.replicates must be at least 1")
    with run.stage("simulate"):
        try:
            Y, jitter = gp_simulate(model, sample, reps, seed=sim_rng,
                                    dense_limit=cfg.get("simulate.dense_limit", 8192), return_jitter=True)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        except Exception as e:
            raise NumericalError(f"simulation failed: {e}") from e
    with run.stage("write"):
        save_csv(run.output("data.csv"), sample.with_values(Y[0] if reps == 1 else Y))
    run.manifest["diagnostics"].update({"n": sample.n, "replicates": reps, "jitter": jitter,
                                        "domain": sample.domain.to_dict()})


def cmd_weights(run: Run):
    """Solve for quadrature weights on the data locations."""
    import numpy as np
    from .weights import save_weights, solve
    cfg = run.cfg
    with run.stage("load"):
        if "io.data" in cfg or os.path.exists(run.path("data.csv")):
            sample = _load_data(run)
        else:
            sample = build_sample(cfg, None if "seed" not in cfg else run.seed)
    with run.stage("window"):
        window = build_window(cfg, sample.domain)
    Omega = resolve_omega(cfg, sample.n, sample.domain)
    solver = build_solver(cfg)
    with run.stage("solve"):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                qw, rep = solve(sample, window, Omega, solver)
            except ValueError as e:
                raise ConfigError(f"solver: {e}") from None
            except Exception as e:
                raise NumericalError(f"weight solve failed: {e}") from e
        for w in caught:
            run.warn(str(w.message))
    thresh = cfg.get("solver.norm_warn", 1e3 / np.sqrt(sample.n))
    if qw.l2 > thresh:
        run.warn(f"||alpha||_2 = {qw.l2:.3e} exceeds {thresh:.3e}; estimates will carry large "
                 "variance and aliasing bias (consider a window adapted to the sampling domain)")
    diag = {"Omega": Omega, "sup_residual": qw.sup_residual, "relative_residual": qw.relative_residual(),
            "l1": qw.l1, "l2": qw.l2, "iterations": rep.iterations, "converged": rep.converged,
            "method": qw.method, "precond_build_seconds": rep.precond_build_seconds,
            "solve_seconds": rep.solve_seconds}
    with run.stage("write"):
        path = run.output("weights.csv")
        side = save_weights(path, qw, {"relative_residual": diag["relative_residual"],
                                       "iterations": rep.iterations, "converged": rep.converged})
        run.manifest["outputs"].append(side)
    run.manifest["diagnostics"].update(diag)
    if not rep.converged:
        raise NumericalError(f"solver did not converge after {rep.iterations} iterations")


def _freq_grid(cfg, domain, Omega):
    import numpy as np
    from .estimator import default_freqs
    if domain.dim == 1:
        om = float(Omega)
        h = cfg.get("estimate.spacing", 1.0 / (2 * domain.measure))
        lo = cfg.get("estimate.fmin", 0.0)
        hi = cfg.get("estimate.fmax", om)
        if not hi > lo:
            raise ConfigError("estimate.fmax must exceed estimate.fmin")
        return np.arange(lo, hi + 0.5 * h, h)
    return default_freqs(domain, Omega, cfg.get("estimate.spacing"))


def cmd_estimate(run: Run):
    """Evaluate the requested estimators on the data replicates."""
    import numpy as np
    from .estimator import estimate, forward_estimate, lomb_scargle, regrid_estimate, save_estimate
    from .weights import QuadratureWeights, forward_weights, load_weights
    cfg = run.cfg
    with run.stage("load"):
        sample = _load_data(run)
        if sample.values is None:
            raise ConfigError("data file has no value columns")
    kinds = [k.strip() for k in cfg.get("estimate.kinds", "quadrature").split(",") if k.strip()]
    bad = set(kinds) - {"quadrature", "forward", "lomb-scargle", "regrid"}
    if bad:
        raise ConfigError(f"estimate.kinds: unknown {sorted(bad)}")
    window = None
    qw = None
    if "quadrature" in kinds:
        wpath = cfg.get("io.weights") or run.path("weights.csv")
        if not os.path.exists(wpath):
            raise ConfigError(f"weights file not found: {wpath}")
        x, alpha, meta = load_weights(wpath)
        if x.shape[0] != sample.n:
            raise ConfigError(f"weights have {x.shape[0]} rows but data has {sample.n}")
        order = np.lexsort(x.T[::-1]) if x.shape[1] > 1 else np.argsort(x[:, 0], kind="stable")
        if not np.allclose(x[order], sample.locations, rtol=0, atol=1e-12 * max(1.0, np.abs(x).max())):
            raise ConfigError("weight locations do not match data locations")
        alpha = alpha[order]
        Om = meta.get("Omega")
        Om = tuple(Om) if isinstance(Om, list) else Om
        qw = QuadratureWeights(alpha, Om, None, sample.locations, float(np.abs(alpha).sum()),
                               float(np.linalg.norm(alpha)), float(meta.get("sup_residual", np.nan)),
                               meta.get("method", "file"))
        Omega = Om
    else:
        Omega = resolve_omega(cfg, sample.n, sample.domain)
    freqs = _freq_grid(cfg, sample.domain, Omega)
    if "lomb-scargle" in kinds and sample.dim == 1 and np.any(freqs == 0):
        # Lomb-Scargle is undefined at zero; keep one shared frequency column
        freqs = freqs[freqs != 0]
    fmax = np.abs(freqs).max()
    om_max = float(np.max(Omega))
    if fmax > om_max * (1 + 1e-12):
        run.warn(f"frequencies up to {fmax:g} exceed Omega = {om_max:g}; estimates there carry "
                 "uncontrolled aliasing bias")
    for kind in kinds:
        with run.stage(f"estimate_{kind}"):
            if kind == "quadrature":
                est = estimate(sample, qw, freqs)
            elif kind == "forward":
                window = window or build_window(cfg, sample.domain)
                est = forward_estimate(sample, forward_weights(window, sample), freqs)
            elif kind == "lomb-scargle":
                try:
                    est = lomb_scargle(sample, freqs)
                except ValueError as e:
                    raise ConfigError(f"lomb-scargle: {e}") from None
            else:
                window = window or build_window(cfg, sample.domain)
                try:
                    est = regrid_estimate(sample, cfg.get("estimate.regrid_m", sample.n), freqs,
                                          cfg.get("estimate.kernel_range", 1e-3), cfg.get("estimate.k_nn", 10),
                                          window=window)
                except ValueError as e:
                    raise ConfigError(f"regrid: {e}") from None
            save_estimate(run.output(f"estimate_{kind}.csv"), est)
    run.manifest["diagnostics"].update({"kinds": kinds, "m": int(len(freqs)), "Omega": Omega})


def cmd_bench(run: Run):
    """Time weight solves over a list of ``n`` values."""
    import numpy as np
    from .sampling import Domain, generate_gappy_grid, generate_uniform, spawn_rngs
    from .weights import SolverConfig, solve_iterative
    from .windows import kaiser, prolate_1d
    cfg = run.cfg
    ns = [int(v) for v in _floats(cfg.get("bench.n", ""), "bench.n")]
    if not ns:
        raise ConfigError("bench.n must list at least one size")
    if any(n < 2 for n in ns):
        raise ConfigError("bench.n entries must be at least 2")
    kind = cfg.get("bench.kind", "uniform")
    if kind not in ("uniform", "gappy"):
        raise ConfigError(f"bench.kind: unknown kind {kind!r}")
    ratio = _positive(cfg, "bench.omega_ratio", 1.0 if kind == "gappy" else 0.2)
    precond = cfg.get("bench.precond", "scaled-identity" if kind == "gappy" else "sparse-gaussian")
    gap = _floats(cfg.get("bench.gap", "0.4,0.5"), "bench.gap")
    rngs = spawn_rngs(run.seed, len(ns))
    base = Domain.interval(0.0, 1.0)
    rows = []
    for n, rng in zip(ns, rngs):
        with run.stage(f"n={n}"):
            if kind == "gappy":
                s = generate_gappy_grid(base, 1.0 / n, [tuple(gap)])
                win = prolate_1d(s.domain)
            else:
                s = generate_uniform(base, n, seed=rng)
                win = kaiser((0.0, 1.0))
            Om = ratio * n / 2
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                try:
                    qw, rep = solve_iterative(s, win, Om, SolverConfig(method="normal-krylov", precond=precond,
                                                                      max_iter=cfg.get("solver.max_iter", 3000)))
                except Exception as e:
                    raise NumericalError(f"bench solve at n={n} failed: {e}") from e
            rows.append({"n": s.n, "Omega": Om, "iterations": rep.iterations, "converged": rep.converged,
                         "precond_build_seconds": rep.precond_build_seconds, "solve_seconds": rep.solve_seconds,
                         "total_seconds": time.perf_counter() - t0,
                         "relative_residual": qw.relative_residual()})
    cols = list(rows[0])
    text = ",".join(cols) + "\n" + "".join(
        ",".join(("%.17g" % r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols) + "\n" for r in rows)
    _write_text(run.output("bench.csv"), text)
    _write_json(run.output("bench.json"), {"kind": kind, "precond": precond, "omega_ratio": ratio, "rows": rows})
    run.manifest["diagnostics"]["rows"] = rows


COMMANDS = {"simulate": cmd_simulate, "weights": cmd_weights, "estimate": cmd_estimate, "bench": cmd_bench}


def _set_threads(n):
    """Limit BLAS/OpenMP pools to ``n`` threads (``$IRRSPEC_THREADS`` if ``None``)."""
    if n is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            if not env.isdigit():
                raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
            n = int(env)
    if n is None:
        return None
    if n < 1:
        raise ConfigError("--threads must be at least 1")
    from threadpoolctl import threadpool_limits
    threadpool_limits(limits=n)
    return n


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="irrspec", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="key = value configuration file")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"BLAS/OpenMP threads (default: ${THREADS_ENV})")
    args = parser.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    text = ""
    cfg = {}
    run = None
    try:
        threads = _set_threads(args.threads)
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        run = Run(args.command, text, {}, args.out, 0)
        cfg = parse_config(text)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        run.cfg, run.seed = cfg, seed
        run.manifest["seed"] = seed
        run.manifest["threads"] = threads
        COMMANDS[args.command](run)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        run = run or Run(args.command, text, cfg, args.out, 0)
        run.finish("config-error", e)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        run.finish("numerical-failure", e)
        return EXIT_NUMERIC
    except Exception as e:  # unexpected numerical breakdowns
        traceback.print_exc()
        run = run or Run(args.command, text, cfg, args.out, 0)
        run.finish("numerical-failure", e)
        return EXIT_NUMERIC
    run.finish("ok")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
