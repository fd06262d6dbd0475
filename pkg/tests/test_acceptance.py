"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (also
collected into the terminal summary) and then asserts the criterion at its
stated tolerance and runtime.
"""
import math
import time

import numpy as np
import pytest

from qniht.experiments import (
    ExperimentConfig,
    orthonormal_instance,
    run_bound_check,
    run_gaussian,
    run_sky,
)
from qniht.linalg import SparseSignal, apply_adjoint
from qniht.niht import RecoveryConfig, niht_recover
from qniht.quantize import QuantizerConfig, quantization_error_bound, stochastic_round, substream
from qniht.radio import AntennaArray, SkyGrid, VisibilitySet, build_measurement_matrix, dirty_beam, dirty_image
from qniht.rip import certify, estimate_rics

pytestmark = pytest.mark.slow

RESULTS = []


def report(num, ok, detail, seconds=None):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    if seconds is not None:
        line += f"  [{seconds:.1f}s]"
    RESULTS.append(line)
    print(line)
    return ok


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_gaussian():
    cfg = ExperimentConfig(M=256, N=512, s=8, realizations=100, snr_db="inf", bits="full", seed=0)
    return timed(run_gaussian, cfg)


@pytest.fixture(scope="module")
def noisy_gaussian():
    cfg = ExperimentConfig(M=256, N=512, s=8, realizations=100, snr_db="20,0", bits="full;2,8", seed=0)
    return timed(run_gaussian, cfg)


@pytest.fixture(scope="module")
def bound_check():
    cfg = ExperimentConfig(kind="bound-check", M=64, N=128, s=4, realizations=50, bits="auto", n_max=20, seed=0)
    return timed(run_bound_check, cfg), cfg


def cell(summary, snr, b_phi):
    (row,) = [r for r in summary if r[0] == snr and r[1] == b_phi]
    return row


def test_c01_quantizer_unbiased():
    t0 = time.perf_counter()
    worst = 0.0
    ok = True
    for i, v in enumerate((0.37, -0.9, 0.0)):
        # a leading 1.0 pins the scale at 1 so the draws quantize v itself
        a = np.full(10**6 + 1, v)
        a[0] = 1.0
        for b in (2, 3, 8):
            vals, c = stochastic_round(a, QuantizerConfig(b), substream(1, b, i))
            assert c == 1.0
            draws = vals[1:]
            se = draws.std(ddof=1) / math.sqrt(draws.size)
            dev = abs(draws.mean() - v)
            ok &= dev <= 4 * se if se > 0 else dev == 0.0
            worst = max(worst, dev / se if se > 0 else 0.0)
    dt = time.perf_counter() - t0
    ok &= dt < 10
    report(1, ok, f"worst |mean - v| = {worst:.2f} standard errors (limit 4)", dt)
    assert ok


def test_c02_quantization_error_bound():
    t0 = time.perf_counter()
    ok = True
    worst = 0.0
    for M in (16, 900):
        v = np.random.default_rng(M).uniform(-1, 1, M)
        c = np.abs(v).max()
        for b in (2, 4, 8):
            errs = [np.linalg.norm(stochastic_round(v, QuantizerConfig(b), substream(s, M, b))[0] - v)
                    for s in range(200)]
            bound = quantization_error_bound(c, M, b)
            ok &= float(np.mean(errs)) <= bound
            worst = max(worst, float(np.mean(errs)) / bound)
    dt = time.perf_counter() - t0
    ok &= dt < 30
    report(2, ok, f"largest mean error / bound = {worst:.3f} (limit 1)", dt)
    assert ok


def test_c03_niht_exact_recovery(desk_gaussian):
    res, dt = desk_gaussian
    (_, _, _, n, err, _, exact, _), = res["summary"]
    ok = err < 1e-3 and exact >= 0.95 and dt < 300
    report(3, ok, f"mean error {err:.2e} (< 1e-3), exact support {exact:.2f} (>= 0.95) over {n}", dt)
    assert ok


def test_c04_low_precision_parity(noisy_gaussian):
    res, dt = noisy_gaussian
    s = res["summary"]
    gaps = {snr: abs(cell(s, snr, "full")[6] - cell(s, snr, "2")[6]) for snr in (20.0, 0.0)}
    ok = gaps[20.0] <= 0.10 and gaps[0.0] <= 0.15
    detail = (f"20 dB: full {cell(s, 20.0, 'full')[6]:.2f} vs (2,8) {cell(s, 20.0, '2')[6]:.2f} (gap <= 0.10); "
              f"0 dB: full {cell(s, 0.0, 'full')[6]:.2f} vs (2,8) {cell(s, 0.0, '2')[6]:.2f} (gap <= 0.15)")
    report(4, ok, detail, dt)
    assert ok


def test_c05_iteration_bound(bound_check):
    (res, dt), cfg = bound_check
    (bits, rep), = res["results"]
    slack = rep.bound - rep.empirical
    ok = bool(np.all(rep.empirical <= rep.bound)) and len(rep.empirical) == cfg.n_max + 1 and dt < 120
    report(5, ok, f"certified bits {bits[0]}, eps_q {rep.epsilon_q:.4f}, min slack {slack.min():.4f} over n=0..20", dt)
    assert ok


def test_c06_bit_width_certification():
    t0 = time.perf_counter()
    worst = 0.0
    checked = 0
    for inst in range(20):
        rng = np.random.default_rng(inst)
        M, N = 32, 64
        u, _ = np.linalg.qr(rng.standard_normal((M, M)))
        v, _ = np.linalg.qr(rng.standard_normal((N, M)))
        a = u @ np.diag(np.linspace(1, 1 + rng.uniform(0, 3 / 64), M)) @ v.T
        cert = certify(a)
        assert cert.certified and cert.estimate.gamma <= 1 / 16 - 1 / 64
        gh = [estimate_rics(stochastic_round(a, QuantizerConfig(cert.bits), substream(s, inst))[0]).gamma
              for s in range(20)]
        worst = max(worst, float(np.mean(gh)))
        checked += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1 / 16 + 0.005 and checked == 20 and dt < 300
    report(6, ok, f"worst mean quantized gamma {worst:.4f} (limit {1 / 16 + 0.005:.4f}) over {checked} instances", dt)
    assert ok


def test_c07_monotone_descent(desk_gaussian, noisy_gaussian, bound_check):
    rows = [r for r in desk_gaussian[0]["rows"] + noisy_gaussian[0]["rows"] if r[1] == "full"]
    worst = max(r[8] for r in rows)
    # the full-precision solver on the certified instance of criterion 5
    _, cfg = bound_check
    phi, x = orthonormal_instance(cfg.M, cfg.N, cfg.s, cfg.seed)
    y = phi[:, x.support] @ x.values
    rep = niht_recover(phi, y, RecoveryConfig(cfg.s, max_iter=cfg.n_max, tol=0.0))
    worst = max(worst, rep.max_residual_increase(np.linalg.norm(y)))
    ok = worst <= 1e-10
    report(7, ok, f"largest residual increase {worst:.2e} over {len(rows) + 1} full-precision runs (limit 1e-10)")
    assert ok


def test_c08_radio_identity():
    worst = 0.0
    centre_ok = True
    for seed in range(5):
        rng = np.random.default_rng(seed)
        arr = AntennaArray.random_disk(6, 10.0, seed=seed)
        grid = SkyGrid(16, rng.uniform(0.05, 1.0))
        phi = build_measurement_matrix(arr, grid)
        y = rng.standard_normal(phi.rows) + 1j * rng.standard_normal(phi.rows)
        img = dirty_image(VisibilitySet(y, arr.baselines()), grid)
        worst = max(worst, float(np.max(np.abs(img.intensities - apply_adjoint(phi.entries, y).reshape(16, 16)))))
        beam = dirty_beam(arr, grid)
        centre_ok &= beam.intensities[15, 15] == phi.rows
    ok = worst <= 1e-10 and centre_ok
    report(8, ok, f"max |dirty - Re(Phi^H y)| = {worst:.1e} (limit 1e-10), beam centre == M: {centre_ok}")
    assert ok


def test_c09_sky_recovery_against_clean():
    cfg = ExperimentConfig(kind="sky", L=10, r=64, s=10, snr_db="0", bits="2,8", realizations=20, images="none", seed=0)
    res, dt = timed(run_sky, cfg)
    q = [r for r in res["rows"] if r[1] == "qniht"]
    c = [r for r in res["rows"] if r[1] == "clean"]
    tp = float(np.mean([r[9] for r in q]))
    fewer = sum(a[8] < b[8] for a, b in zip(q, c))
    ok = tp >= 0.9 and fewer >= 15 and dt < 600
    detail = (f"QNIHT(2,8) true-positive rate {tp:.2f} (>= 0.9); fewer false positives than CLEAN on "
              f"{fewer}/20 seeds (>= 15); gamma {res['info']['gamma']:.4f}")
    report(9, ok, detail, dt)
    assert ok


def test_c10_timings_recorded(desk_gaussian):
    timings = desk_gaussian[0]["timings"]
    ok = set(timings) == {"build", "recover"} and all(v >= 0 for v in timings.values())
    report(10, ok, "per-phase wall clock recorded (" + ", ".join(f"{k} {v:.2f}s" for k, v in sorted(timings.items()))
           + "); speedup ratios are not asserted")
    assert ok
