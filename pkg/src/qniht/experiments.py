"""Experiment runners: Gaussian toy problem, simulated sky, RIP sweeps and bound checks.

Every run is a pure function of its :class:`ExperimentConfig` (which holds
the master seed).  Random inputs of realization ``j`` come from
``substream(seed, kind, j, ...)``, so realizations can run in any order or
in parallel and still aggregate identically.  Wall-clock timings go to a
separate ``timings.csv`` so that the result tables are byte-reproducible.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    BoundReport,
    corollary1_bound,
    epsilon_q,
    epsilon_s,
    final_bound,
    general_bound,
    recovery_metrics,
)
from .linalg import DomainError, MeasurementMatrix, SparseSignal
from .niht import LowPrecision, RecoveryConfig, niht_recover, qniht_recover
from .quantize import LEVEL_MODES, substream
from .radio import (
    AntennaArray,
    SkyGrid,
    SkyImage,
    add_noise,
    build_measurement_matrix,
    clean,
    dirty_beam,
    dirty_image,
    observe,
    resonant_half_extent,
    simulate_sky,
    write_image_raw,
    write_pgm,
)
from .rip import DEFAULT_EPSILON, GAMMA_TARGET, RankDeficientError, certify, sweep_gamma, sweep_to_csv, tune_parameter

__all__ = [
    "FULL",
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "parse_values",
    "parse_bit_pairs",
    "derive_seed",
    "gaussian_instance",
    "run_gaussian",
    "run_sky",
    "run_rip_sweep",
    "run_bound_check",
    "match_sources",
    "CertificationError",
]

FULL = math.inf  # bit width of the full-precision sentinel
AUTO = ("auto", "auto")
KINDS = ("gaussian", "sky", "rip-sweep", "bound-check")
_STREAM = {k: i for i, k in enumerate(KINDS)}


class CertificationError(RuntimeError):
    """The instance does not satisfy the condition a bound needs."""


def parse_values(text: str) -> list[float]:
    """``"a:b:n"`` (``n`` evenly spaced points) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainError(f"range must be start:stop:count, got {text!r}")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise DomainError("range count must be positive")
        return [float(v) for v in np.linspace(lo, hi, n)]
    return [float(v) for v in text.split(",") if v.strip()]


def parse_bit_pairs(text: str) -> list[tuple[float, float]]:
    """``"full;2,8;4,8"`` -> ``[(inf, inf), (2, 8), (4, 8)]``.

    ``32`` also means full precision; ``auto`` stands for the certified width
    and is only meaningful to the bound check.
    """
    out = []
    for item in text.replace(" ", "").split(";"):
        if not item:
            continue
        if item.lower() in ("full", "32", "32,32", "inf"):
            out.append((FULL, FULL))
            continue
        if item.lower() == "auto":
            out.append(AUTO)
            continue
        a, _, b = item.partition(",")
        try:
            pair = (int(a), int(b or a))
        except ValueError:
            raise DomainError(f"bad bit pair {item!r}") from None
        if not all(1 <= v <= 32 for v in pair):
            raise DomainError(f"bit widths must lie in [1, 32], got {item!r}")
        out.append(pair)
    if not out:
        raise DomainError("no bit pairs given")
    return out


def _fmt_bits(b) -> str:
    return "full" if math.isinf(b) else str(int(b))


@dataclass
class ExperimentConfig:
    """Flat experiment configuration; every field is a ``key = value`` config key."""

    kind: str = "gaussian"
    seed: int = 0
    realizations: int = 100
    workers: int = 1
    # problem size (gaussian, bound-check)
    M: int = 256
    N: int = 512
    s: int = 8
    snr_db: str = "inf,20,0"
    bits: str = "full;2,8"
    # solver
    max_iter: int = 500
    tol: float = 1e-6
    c: float = 0.001
    k: float = 2.0
    level_mode: str = "power2"
    step_matrix: str = "quantized"
    # radio
    L: int = 10
    r: int = 64
    d: float = 0.0  # 0 selects d automatically
    array: str = "lattice"
    array_extent: int = 0  # lattice side; 0 means r // 2
    array_radius: float = 20.0
    array_seed: int = 0
    array_file: str = ""
    autocorrelations: bool = False
    flux_min: float = 1.0
    flux_max: float = 1.0
    clean_gain: float = 0.1
    clean_threshold_sigma: float = 3.0
    clean_max_components: int = 1000
    images: str = "first"
    full: bool = False
    # certification
    epsilon: float = DEFAULT_EPSILON
    d_candidates: str = "0.05:1.0:40"
    # rip-sweep
    param: str = "d"
    values: str = "0.05:0.5:10"
    # bound-check
    n_max: int = 20

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown experiment kind {self.kind!r}")
        if self.realizations < 1:
            raise DomainError("realizations must be >= 1")
        if self.level_mode not in LEVEL_MODES:
            raise DomainError(f"level_mode must be one of {LEVEL_MODES}")
        if self.images not in ("first", "all", "none"):
            raise DomainError("images must be first, all or none")
        if self.param not in ("d", "L"):
            raise DomainError("param must be d or L")
        if self.s < 0 or self.M < 1 or self.N < 1 or self.workers < 1:
            raise DomainError("sizes must be positive")
        self.bit_pairs()
        self.snr_list()
        if self.full:
            self.L, self.r = 30, 256

    def bit_pairs(self):
        pairs = parse_bit_pairs(self.bits)
        if AUTO in pairs and self.kind != "bound-check":
            raise DomainError("bits=auto is only valid for bound-check")
        return pairs

    def snr_list(self) -> list[float]:
        return [math.inf if v.strip().lower() in ("inf", "+inf") else float(v) for v in self.snr_db.split(",") if v.strip()]

    def recovery(self, s: int, bits=(FULL, FULL), seed: int = 0, keep_iterates=False) -> RecoveryConfig:
        prec = None
        if not math.isinf(bits[0]):
            prec = LowPrecision(int(bits[0]), int(bits[1]), self.level_mode, seed, self.step_matrix)
        return RecoveryConfig(s, self.max_iter, self.c, self.k, self.tol, prec, keep_iterates=keep_iterates)

    def canonical(self) -> str:
        return "\n".join(f"{f.name}={getattr(self, f.name)}" for f in dataclasses.fields(self))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def header(self) -> str:
        return f"qniht {__version__} config={self.digest()} kind={self.kind} seed={self.seed}"


def _convert(name: str, raw: str):
    typ = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}.get(name)
    if typ is None:
        raise DomainError(f"unknown config key {name!r}")
    raw = raw.strip()
    try:
        if typ == "bool":
            if raw.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError
            return raw.lower() in ("1", "true", "yes")
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise DomainError(f"config key {name}: cannot parse {raw!r} as {typ}") from None
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise DomainError(f"line {lineno}: expected key = value")
        out[key.strip()] = _convert(key.strip(), val)
    return out


def load_config(path=None, overrides: dict | None = None, **kw) -> ExperimentConfig:
    vals = parse_config_text(Path(path).read_text()) if path else {}
    for k, v in (overrides or {}).items():
        vals[k] = _convert(k, v) if isinstance(v, str) else v
    vals.update(kw)
    return ExperimentConfig(**vals)


def derive_seed(seed: int, *key: int) -> int:
    """Integer seed for the stream ``key`` under ``seed``."""
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(1, np.uint64)[0])


def _write_csv(path: Path, header: str, columns, rows) -> None:
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())


class _Timer:
    def __init__(self):
        self.totals = {}

    def add(self, phase: str, seconds: float):
        self.totals[phase] = self.totals.get(phase, 0.0) + seconds

    def write(self, path: Path, header: str):
        _write_csv(path, header, ("phase", "seconds"), sorted(self.totals.items()))


def _timed(timer, phase, fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    timer.add(phase, time.perf_counter() - t0)
    return out


# --------------------------------------------------------------------------- gaussian


def gaussian_instance(M: int, N: int, s: int, seed: int, j: int):
    """iid N(0, 1) matrix and an ``s``-sparse vector of random +-1 spikes."""
    rng = substream(seed, _STREAM["gaussian"], j)
    phi = rng.standard_normal((M, N))
    idx = np.sort(rng.choice(N, size=s, replace=False))
    x = SparseSignal(N, idx, rng.choice([-1.0, 1.0], size=s))
    return phi, x


def _gaussian_realization(cfg: ExperimentConfig, j: int):
    timer = _Timer()
    phi, x = _timed(timer, "build", gaussian_instance, cfg.M, cfg.N, cfg.s, cfg.seed, j)
    clean_y = phi[:, x.support] @ x.values
    rows = []
    for si, snr in enumerate(cfg.snr_list()):
        if cfg.s == 0:
            y = clean_y
        else:
            y, _ = add_noise(clean_y, snr, substream(cfg.seed, _STREAM["gaussian"], j, 1, si))
        for bi, bits in enumerate(cfg.bit_pairs()):
            rc = cfg.recovery(cfg.s, bits, derive_seed(cfg.seed, _STREAM["gaussian"], j, 2, si, bi))
            solver = niht_recover if rc.precision is None else qniht_recover
            rep = _timed(timer, "recover", solver, phi, y, rc)
            err, exact = recovery_metrics(rep.estimate, x)
            rows.append((snr, _fmt_bits(bits[0]), _fmt_bits(bits[1]), j, err, exact, rep.iterations, int(rep.converged),
                         rep.max_residual_increase(np.linalg.norm(y))))
    return rows, timer.totals


def _pool_map(cfg: ExperimentConfig, fn, items):
    if cfg.workers == 1:
        return [fn(cfg, j) for j in items]
    with ProcessPoolExecutor(cfg.workers) as ex:
        return list(ex.map(fn, [cfg] * len(items), items))


GAUSSIAN_COLUMNS = ("snr_db", "b_phi", "b_y", "realization", "recovery_error", "exact_recovery", "iterations", "converged",
                    "max_residual_increase")
SUMMARY_COLUMNS = ("snr_db", "b_phi", "b_y", "realizations", "recovery_error_mean", "recovery_error_std",
                   "exact_recovery_mean", "exact_recovery_std")


def summarize(rows) -> list[tuple]:
    """Mean and standard deviation per ``(snr, b_phi, b_y)`` cell, in first-seen order."""
    cells = {}
    for r in rows:
        cells.setdefault(r[:3], []).append(r)
    out = []
    for key, rs in cells.items():
        err = np.array([r[4] for r in rs], dtype=np.float64)
        ex = np.array([r[5] for r in rs], dtype=np.float64)
        out.append((*key, len(rs), float(err.mean()), float(err.std()), float(ex.mean()), float(ex.std())))
    return out


def run_gaussian(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Per (SNR, bit pair, realization) recovery on iid Gaussian matrices."""
    results = _pool_map(cfg, _gaussian_realization, list(range(cfg.realizations)))
    rows = [r for rs, _ in results for r in rs]
    timer = _Timer()
    for _, t in results:
        for k, v in t.items():
            timer.add(k, v)
    summary = summarize(rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "metrics.csv", cfg.header(), GAUSSIAN_COLUMNS, rows)
        _write_csv(out / "summary.csv", cfg.header(), SUMMARY_COLUMNS, summary)
        timer.write(out / "timings.csv", cfg.header())
    return {"rows": rows, "summary": summary, "timings": timer.totals}


# --------------------------------------------------------------------------- sky


def _make_array(cfg: ExperimentConfig, L: int | None = None) -> AntennaArray:
    L = cfg.L if L is None else L
    if cfg.array_file:
        return AntennaArray.from_csv(cfg.array_file)
    if cfg.array == "lattice":
        return AntennaArray.nonredundant_lattice(L, cfg.array_extent or cfg.r // 2, seed=cfg.array_seed)
    if cfg.array == "disk":
        return AntennaArray.random_disk(L, cfg.array_radius, seed=cfg.array_seed)
    if cfg.array == "ring":
        return AntennaArray.ring(L, cfg.array_radius)
    raise DomainError(f"unknown array layout {cfg.array!r}")


def choose_half_extent(cfg: ExperimentConfig, array: AntennaArray):
    """Use ``cfg.d`` when set, else search for a ``d`` that certifies ``gamma``.

    Returns ``(d, gamma, certified)``.
    """
    def build(d):
        return build_measurement_matrix(array, SkyGrid(cfg.r, d), cfg.autocorrelations)

    target = GAMMA_TARGET - cfg.epsilon
    if cfg.d > 0:
        try:
            g = certify(build(cfg.d), cfg.epsilon).estimate.gamma
        except RankDeficientError:
            g = math.inf
        return cfg.d, g, g <= target
    cands = [v for v in parse_values(cfg.d_candidates) if 0 < v <= 1]
    res = resonant_half_extent(array, cfg.r)
    if res is not None:
        cands.append(res)
    return tune_parameter(build, cands, target)


def match_sources(found, truth, r: int, radius: int = 1) -> tuple[int, int]:
    """``(true positives, false positives)`` with a Chebyshev pixel tolerance.

    A true source is found if some recovered pixel lies within ``radius``
    pixels of it; a recovered pixel is false if no true source lies that close.
    """
    f = np.array([divmod(int(p), r) for p in found], dtype=np.int64).reshape(-1, 2)
    t = np.array([divmod(int(p), r) for p in truth], dtype=np.int64).reshape(-1, 2)
    if len(f) == 0 or len(t) == 0:
        return 0, len(f)
    dist = np.max(np.abs(f[:, None, :] - t[None, :, :]), axis=2)
    near = dist <= radius
    return int(near.any(axis=0).sum()), int((~near.any(axis=1)).sum())


def robust_rms(a) -> float:
    """Median absolute deviation scaled to a Gaussian standard deviation."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    return float(1.4826 * np.median(np.abs(a - np.median(a))))


SKY_COLUMNS = ("realization", "method", "b_phi", "b_y", "recovery_error", "exact_recovery", "sources",
               "true_positives", "false_positives", "tp_rate", "iterations", "gamma_certified")


def run_sky(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Simulated point-source sky: NIHT, QNIHT at each bit pair, and CLEAN."""
    timer = _Timer()
    array = _timed(timer, "build", _make_array, cfg)
    d, gamma, certified = _timed(timer, "certify", choose_half_extent, cfg, array)
    grid = SkyGrid(cfg.r, d)
    phi = _timed(timer, "build", build_measurement_matrix, array, grid, cfg.autocorrelations)
    beam = _timed(timer, "build", dirty_beam, array, grid, cfg.autocorrelations)
    snr = cfg.snr_list()[0]
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rows = []
    for j in range(cfg.realizations):
        x = simulate_sky(grid, cfg.s, (cfg.flux_min, cfg.flux_max), derive_seed(cfg.seed, _STREAM["sky"], j, 0))
        if cfg.s == 0:
            snr_j = math.inf
        else:
            snr_j = snr
        vis = observe(array, phi, x, snr_j, derive_seed(cfg.seed, _STREAM["sky"], j, 1), cfg.autocorrelations)
        images = {"truth": SkyImage.from_vec(grid, x)}
        di = _timed(timer, "dirty", dirty_image, vis, grid)
        images["dirty"] = di
        for bi, bits in enumerate(cfg.bit_pairs()):
            rc = cfg.recovery(cfg.s, bits, derive_seed(cfg.seed, _STREAM["sky"], j, 2, bi))
            solver = niht_recover if rc.precision is None else qniht_recover
            rep = _timed(timer, "recover", solver, phi, vis.values, rc)
            err, exact = recovery_metrics(rep.estimate, x)
            tp, fp = match_sources(rep.estimate.support, x.support, cfg.r)
            name = "niht" if rc.precision is None else "qniht"
            rows.append((j, name, _fmt_bits(bits[0]), _fmt_bits(bits[1]), err, exact, x.nnz, tp, fp,
                         tp / x.nnz if x.nnz else 1.0, rep.iterations, int(certified)))
            images[f"{name}_{_fmt_bits(bits[0])}_{_fmt_bits(bits[1])}"] = SkyImage.from_vec(grid, rep.estimate)
        thr = cfg.clean_threshold_sigma * robust_rms(di.intensities)
        cl = _timed(timer, "clean", clean, di, beam, cfg.clean_gain, thr, cfg.clean_max_components)
        model = SparseSignal.from_dense(cl.model.reshape(-1))
        err, exact = recovery_metrics(model, x)
        tp, fp = match_sources(cl.support(cfg.r), x.support, cfg.r)
        rows.append((j, "clean", "full", "full", err, exact, x.nnz, tp, fp, tp / x.nnz if x.nnz else 1.0,
                     len(cl.components), int(certified)))
        images["clean"] = SkyImage(grid, cl.model)
        if out is not None and (cfg.images == "all" or (cfg.images == "first" and j == 0)):
            for name, img in images.items():
                write_pgm(out / f"{name}_{j}.pgm", img)
                write_image_raw(out / f"{name}_{j}.bin", img)
    info = dict(d=d, gamma=gamma, certified=bool(certified), M=phi.rows, N=phi.cols)
    if out is not None:
        header = cfg.header() + f" d={d!r} gamma={gamma!r} certified={int(certified)} pixel=l*r+m(0-based)"
        _write_csv(out / "metrics.csv", header, SKY_COLUMNS, rows)
        timer.write(out / "timings.csv", cfg.header())
    return {"rows": rows, "info": info, "timings": timer.totals}


# --------------------------------------------------------------------------- rip sweep


def run_rip_sweep(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Certification table over half-extents ``d`` or antenna counts ``L``."""
    values = parse_values(cfg.values)
    if cfg.param == "d":
        array = _make_array(cfg)

        def build(v):
            return build_measurement_matrix(array, SkyGrid(cfg.r, v), cfg.autocorrelations)
    else:
        def build(v):
            if v != int(v) or v < 2:
                raise DomainError(f"antenna count must be an integer >= 2, got {v}")
            array = _make_array(cfg, int(v))
            d = cfg.d if cfg.d > 0 else resonant_half_extent(array, cfg.r) or 0.5
            return build_measurement_matrix(array, SkyGrid(cfg.r, d), cfg.autocorrelations)
    rows = sweep_gamma(build, cfg.param, values, cfg.epsilon)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(sweep_to_csv(rows, header_comment=cfg.header()))
    return {"rows": rows}


# --------------------------------------------------------------------------- bound check


def orthonormal_instance(M: int, N: int, s: int, seed: int):
    """Matrix with orthonormal rows (all singular values 1) and a +-1 spike signal."""
    rng = substream(seed, _STREAM["bound-check"], 0)
    q, _ = np.linalg.qr(rng.standard_normal((N, M)))
    phi = np.ascontiguousarray(q.T)
    idx = np.sort(rng.choice(N, size=s, replace=False))
    return phi, SparseSignal(N, idx, rng.choice([-1.0, 1.0], size=s))


BOUND_CSV_COLUMNS = ("b_phi", "b_y", "n", "empirical_mean_error", "theorem3_bound", "corollary1_bound",
                     "epsilon_s", "epsilon_q", "general_bound", "final_bound")


def bound_curves(phi, x: SparseSignal, y, bits, cfg: ExperimentConfig, alpha: float, realizations: int):
    """Monte Carlo mean of ``||x^[n] - x^s||`` against the bounds, for ``n = 0..n_max``.

    ``x^[0] = 0``; runs that stop early are padded with their final iterate.
    """
    n_pts = cfg.n_max + 1
    rc_runs = 1 if math.isinf(bits[0]) else realizations
    errs = np.zeros((rc_runs, n_pts))
    xd = x.densify()
    c_y = c_phi = 0.0
    for q in range(rc_runs):
        rc = dataclasses.replace(cfg.recovery(x.nnz, bits, derive_seed(cfg.seed, _STREAM["bound-check"], 1, q),
                                              keep_iterates=True), max_iter=cfg.n_max, tol=0.0)
        rep = niht_recover(phi, y, rc) if rc.precision is None else qniht_recover(phi, y, rc)
        its = rep.iterates + [rep.iterates[-1]] * (n_pts - len(rep.iterates))
        errs[q] = [np.linalg.norm(z.densify() - xd) for z in its[:n_pts]]
        if rep.phi_scale is not None:
            c_phi, c_y = max(c_phi, rep.phi_scale), max(c_y, rep.y_scale)
    xs_norm = x.norm()
    e_norm = float(np.linalg.norm(y - phi[:, x.support] @ x.values))
    es = epsilon_s(xd, x, e_norm, alpha, s=max(1, x.nnz))
    eq = epsilon_q(phi.shape[0], alpha, bits[0], bits[1], xs_norm, c_phi, c_y)
    L = math.sqrt(phi.shape[0])
    sigma_n = e_norm / math.sqrt(L)
    n = np.arange(n_pts)
    rep = BoundReport(es, eq, xs_norm, errs.mean(axis=0),
                      np.atleast_1d(corollary1_bound(n, L, sigma_n, alpha, alpha, bits[0], bits[1], xs_norm)),
                      dict(alpha=alpha, b_phi=bits[0], b_y=bits[1], c_phi=c_phi, c_y=c_y, M=phi.shape[0]))
    gen = np.atleast_1d(general_bound(n, xs_norm, xd, x, e_norm, alpha, eq, s=max(1, x.nnz)))
    fin = np.atleast_1d(final_bound(n, L, sigma_n, alpha, alpha, bits[0], bits[1], xs_norm))
    return rep, gen, fin


def run_bound_check(cfg: ExperimentConfig, out_dir=None, bits_override=None) -> dict:
    """Empirical error curves against the bounds on a certified ``gamma = 0`` instance.

    The bit pair ``auto`` (the default when ``cfg.bits`` contains it) uses the
    width returned by the certificate for both ``Phi`` and ``y``.
    """
    phi, x = orthonormal_instance(cfg.M, cfg.N, cfg.s, cfg.seed)
    clean_y = phi[:, x.support] @ x.values
    snr = cfg.snr_list()[0]
    y = clean_y if math.isinf(snr) or cfg.s == 0 else add_noise(clean_y, snr, substream(cfg.seed, _STREAM["bound-check"], 2))[0]
    cert = certify(MeasurementMatrix(phi), cfg.epsilon)
    if not cert.certified:
        raise CertificationError(f"gamma={cert.estimate.gamma:.4g} is above 1/16 - epsilon; the bound does not apply")
    if bits_override is not None:
        pairs = bits_override
    else:
        pairs = [(cert.bits, cert.bits) if p == AUTO else p for p in cfg.bit_pairs()]
    results = []
    rows = []
    for bits in pairs:
        rep, gen, fin = bound_curves(phi, x, y, bits, cfg, cert.estimate.alpha, cfg.realizations)
        results.append((bits, rep))
        for n in rep.iterations:
            rows.append((_fmt_bits(bits[0]), _fmt_bits(bits[1]), int(n), rep.empirical[n], rep.bound[n],
                         rep.corollary[n], rep.epsilon_s, rep.epsilon_q, gen[n], fin[n]))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = cfg.header() + f" alpha={cert.estimate.alpha!r} gamma={cert.estimate.gamma!r} certified_bits={cert.bits}"
        _write_csv(out / "bounds.csv", header, BOUND_CSV_COLUMNS, rows)
    return {"results": results, "certificate": cert, "rows": rows}


RUNNERS = {"gaussian": run_gaussian, "sky": run_sky, "rip-sweep": run_rip_sweep, "bound-check": run_bound_check}
