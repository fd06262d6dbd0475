import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qniht.bounds import epsilon_q
from qniht.linalg import DimensionError, DomainError, SparseSignal
from qniht.niht import (
    DegenerateStepError,
    LowPrecision,
    RecoveryConfig,
    ShrinkageError,
    adaptive_step,
    niht_recover,
    qniht_recover,
)
from qniht.rip import estimate_rics


def spikes(rng, n, s):
    x = np.zeros(n)
    x[rng.choice(n, s, replace=False)] = rng.choice([-1.0, 1.0], s)
    return x


def gaussian_problem(seed, m=256, n=512, s=8):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n))
    x = spikes(rng, n, s)
    return a, x, a @ x


def residuals(a, y, report):
    """``||y - A x^[n]||`` for ``n = 0, 1, ...`` recomputed from scratch."""
    out = [np.linalg.norm(y)]
    out += [r.residual_norm for r in report.records]
    return np.array(out)


class TestAdaptiveStep:
    def test_identity(self, rng):
        g = rng.standard_normal(5)
        assert adaptive_step(g, np.eye(5), [0, 2, 3]) == pytest.approx(1.0, rel=1e-15)

    def test_scaled_identity(self, rng):
        g = rng.standard_normal(5)
        assert adaptive_step(g, 2 * np.eye(5), [1, 4]) == pytest.approx(0.25, rel=1e-15)

    def test_matches_oracle(self, rng):
        a = rng.standard_normal((8, 12))
        g = rng.standard_normal(12)
        sup = [2, 5, 9]
        assert adaptive_step(g, a, sup) == pytest.approx(oracles.step_size(a.tolist(), list(g), sup), rel=1e-12)

    def test_complex_matches_oracle(self, rng):
        a = rng.standard_normal((6, 7)) + 1j * rng.standard_normal((6, 7))
        g = rng.standard_normal(7)
        assert adaptive_step(g, a, [0, 6]) == pytest.approx(oracles.step_size(a.tolist(), list(g), [0, 6]), rel=1e-12)

    def test_degenerate(self):
        a = np.array([[1.0, 0.0]])
        with pytest.raises(DegenerateStepError):
            adaptive_step(np.array([0.0, 1.0]), a, [1])

    def test_empty_support(self):
        with pytest.raises(DomainError):
            adaptive_step(np.ones(2), np.eye(2), [])


class TestConfig:
    def test_shrinkage_must_exceed_guard(self):
        with pytest.raises(DomainError):
            RecoveryConfig(2, c=0.5, k=2.0)

    def test_guard_range(self):
        with pytest.raises(DomainError):
            RecoveryConfig(2, c=1.0)

    def test_step_matrix_choice(self):
        with pytest.raises(DomainError):
            LowPrecision(2, 8, step_matrix="other")


class TestNiht:
    def test_identity_recovers_in_one_iteration(self):
        x = np.array([0.0, 3.0, 0.0, -1.0, 0.0, 2.0])
        rep = niht_recover(np.eye(6), x, RecoveryConfig(3))
        assert rep.estimate == SparseSignal.from_dense(x)
        assert rep.iterations == 1
        assert rep.converged

    def test_zero_sparsity(self, rng):
        a = rng.standard_normal((4, 6))
        rep = niht_recover(a, rng.standard_normal(4), RecoveryConfig(0))
        assert rep.estimate.nnz == 0 and rep.iterations == 0

    def test_sparsity_above_rows(self, rng):
        with pytest.raises(DomainError):
            niht_recover(rng.standard_normal((3, 6)), np.ones(3), RecoveryConfig(4))

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            niht_recover(rng.standard_normal((3, 6)), np.ones(4), RecoveryConfig(1))

    def test_rejects_quantized_config(self):
        with pytest.raises(DomainError):
            niht_recover(np.eye(2), np.ones(2), RecoveryConfig(1, precision=LowPrecision(2, 2)))

    def test_gaussian_recovery_rate(self):
        hits = 0
        for seed in range(100):
            a, x, y = gaussian_problem(seed)
            rep = niht_recover(a, y, RecoveryConfig(8, max_iter=100))
            hits += np.linalg.norm(rep.estimate.densify() - x) / np.linalg.norm(x) < 1e-4
        assert hits >= 95

    def test_csv(self):
        a, x, y = gaussian_problem(3, 64, 128, 4)
        rep = niht_recover(a, y, RecoveryConfig(4, max_iter=5))
        lines = rep.to_csv(header_comment="run").splitlines()
        assert lines[0] == "# run"
        assert lines[1] == "iter,mu,residual_norm,support_size,support_change,shrink_count"
        assert len(lines) == 2 + rep.iterations

    def test_residual_norm_recorded_exactly(self):
        a, x, y = gaussian_problem(4, 40, 80, 3)
        rep = niht_recover(a, y, RecoveryConfig(3, max_iter=10, keep_iterates=True))
        for rec, xn in zip(rep.records, rep.iterates[1:]):
            assert rec.residual_norm == pytest.approx(np.linalg.norm(y - a @ xn.densify()), rel=1e-12, abs=1e-12)

    def test_max_residual_increase(self):
        a, x, y = gaussian_problem(4, 40, 80, 3)
        rep = niht_recover(a, y, RecoveryConfig(3, max_iter=10))
        ref = np.max(np.diff(residuals(a, y, rep)))
        assert rep.max_residual_increase(np.linalg.norm(y)) == ref <= 0
        assert niht_recover(a, y, RecoveryConfig(0)).max_residual_increase(1.0) == -np.inf

    def test_shrinkage_happens_and_is_bounded(self):
        # look for an instance where the step must be shrunk
        for seed in range(200):
            rng = np.random.default_rng(seed)
            a = rng.standard_normal((6, 12))
            y = rng.standard_normal(6)
            rep = niht_recover(a, y, RecoveryConfig(3, max_iter=30))
            shrunk = [r for r in rep.records if r.shrink_count]
            if shrunk:
                break
        else:
            pytest.fail("no shrinkage observed")
        assert all(r.support_change for r in shrunk)
        with pytest.raises(ShrinkageError):
            niht_recover(a, y, RecoveryConfig(3, max_iter=30, max_shrinks=0))

    @given(st.integers(0, 2**32 - 1), st.integers(3, 20), st.integers(1, 4), st.booleans())
    @settings(max_examples=60, deadline=None)
    def test_monotone_descent_and_cardinality(self, seed, m, s, complex_):
        rng = np.random.default_rng(seed)
        n = 2 * m
        a = rng.standard_normal((m, n))
        if complex_:
            a = a + 1j * rng.standard_normal((m, n))
        s = min(s, m)
        y = a @ spikes(rng, n, s) + 0.1 * rng.standard_normal(m)
        rep = niht_recover(a, y, RecoveryConfig(s, max_iter=40))
        res = residuals(a, y, rep)
        assert np.all(np.diff(res) <= 1e-10 * max(1.0, res[0]))
        assert all(len(r.support) <= s for r in rep.records)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 3))
    @settings(max_examples=40, deadline=None)
    def test_step_size_within_singular_value_range(self, seed, s):
        # tall matrix: every column subset keeps sigma_min >= alpha
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((12, 8))
        y = rng.standard_normal(12)
        est = estimate_rics(a)
        cfg = RecoveryConfig(s, max_iter=30)
        rep = niht_recover(a, y, cfg)
        fallback = 1 / np.sum(a * a)  # used when g vanishes on the current support
        for r in rep.records:
            if r.mu == pytest.approx(fallback, rel=1e-12):
                continue
            assert 1 / (cfg.k * est.beta**2) * (1 - 1e-12) <= r.mu <= 1 / est.alpha**2 * (1 + 1e-12)


class TestQniht:
    def test_identity_sixteen_bits(self):
        x = np.zeros(16)
        x[[2, 7, 11]] = [1.0, -0.5, 2.0]
        cfg = RecoveryConfig(3, max_iter=50, precision=LowPrecision(16, 16, seed=1))
        rep = qniht_recover(np.eye(16), x, cfg)
        xs = SparseSignal.from_dense(x)
        eq = epsilon_q(16, 1.0, 16, 16, xs.norm(), rep.phi_scale, rep.y_scale)
        assert np.linalg.norm(rep.estimate.densify() - x) <= 5 * eq

    def test_deterministic(self):
        a, x, y = gaussian_problem(5, 64, 128, 4)
        cfg = RecoveryConfig(4, max_iter=30, precision=LowPrecision(3, 6, seed=42))
        r1, r2 = qniht_recover(a, y, cfg), qniht_recover(a, y, cfg)
        assert r1.estimate == r2.estimate
        assert r1.records == r2.records

    def test_seed_changes_trajectory(self):
        a, x, y = gaussian_problem(5, 64, 128, 4)
        r1 = qniht_recover(a, y, RecoveryConfig(4, max_iter=10, precision=LowPrecision(2, 4, seed=1)))
        r2 = qniht_recover(a, y, RecoveryConfig(4, max_iter=10, precision=LowPrecision(2, 4, seed=2)))
        assert r1.records != r2.records

    def test_high_precision_matches_full(self):
        a, x, y = gaussian_problem(6)
        full = niht_recover(a, y, RecoveryConfig(8, max_iter=100))
        q = qniht_recover(a, y, RecoveryConfig(8, max_iter=100, precision=LowPrecision(20, 20, seed=3)))
        ref = full.estimate.densify()
        assert np.linalg.norm(q.estimate.densify() - ref) <= 1e-3 * np.linalg.norm(ref)

    def test_full_step_matrix(self):
        a, x, y = gaussian_problem(7, 64, 128, 4)
        cfg = RecoveryConfig(4, max_iter=60, precision=LowPrecision(12, 12, seed=3, step_matrix="full"))
        rep = qniht_recover(a, y, cfg)
        assert np.linalg.norm(rep.estimate.densify() - x) < 1e-2

    def test_complex_problem(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((40, 80)) + 1j * rng.standard_normal((40, 80))
        x = spikes(rng, 80, 3)
        rep = qniht_recover(a, a @ x, RecoveryConfig(3, max_iter=60, precision=LowPrecision(10, 10, seed=0)))
        assert set(rep.estimate.support) == set(np.flatnonzero(x))

    def test_needs_precision(self):
        with pytest.raises(DomainError):
            qniht_recover(np.eye(2), np.ones(2), RecoveryConfig(1))

    def test_scales_recorded(self):
        a, x, y = gaussian_problem(9, 32, 64, 2)
        rep = qniht_recover(a, y, RecoveryConfig(2, max_iter=3, precision=LowPrecision(4, 4)))
        assert rep.phi_scale == np.abs(a).max()
        assert rep.y_scale == np.abs(y).max()
