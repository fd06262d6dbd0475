"""Normalized iterative hard thresholding, in full and in low precision.

Both solvers share one loop.  At iteration ``n`` a gradient
``g = Re(A^H (y - B x))`` is formed from a pair of matrices ``(A, B)``; the
full-precision solver uses ``A = B = Phi``, the low-precision one draws two
fresh independent quantizations ``Phi_{2n-1}, Phi_{2n}`` of ``Phi`` and uses
the once-quantized observation.  The step size is the exact line search
along ``g`` restricted to the current support; if the thresholded proposal
leaves that support, the step is shrunk by ``k (1 - c)`` until

    mu <= (1 - c) ||dx||^2 / ||A dx||^2,

which guarantees descent of ``||y - A x||``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DimensionError,
    DomainError,
    MeasurementMatrix,
    Observation,
    SparseSignal,
    hard_threshold,
)
from .quantize import QuantizerConfig, StochasticRounder, stochastic_round_planes, substream

__all__ = [
    "DegenerateStepError",
    "ShrinkageError",
    "LowPrecision",
    "RecoveryConfig",
    "IterationRecord",
    "RecoveryReport",
    "adaptive_step",
    "niht_recover",
    "qniht_recover",
]

# substream keys
_PHI_STREAM = 0
_Y_STREAM = 1


class DegenerateStepError(ArithmeticError):
    """``A_G g_G`` vanished, so the line-search step is undefined."""


class ShrinkageError(RuntimeError):
    """The step-size shrinkage loop did not terminate."""


@dataclass(frozen=True)
class LowPrecision:
    """Bit widths for ``Phi`` and ``y`` and how to draw their quantizations.

    ``step_matrix`` selects the matrix in the step-size denominator:
    ``"quantized"`` uses the same ``Phi_{2n-1}`` that produced the gradient,
    ``"full"`` uses the full-precision ``Phi``.
    """

    phi_bits: int
    y_bits: int
    mode: str = "power2"
    seed: int = 0
    step_matrix: str = "quantized"

    def __post_init__(self):
        QuantizerConfig(self.phi_bits, self.mode, self.seed)
        QuantizerConfig(self.y_bits, self.mode, self.seed)
        if self.step_matrix not in ("quantized", "full"):
            raise DomainError(f"step_matrix must be 'quantized' or 'full', got {self.step_matrix!r}")

    def phi_config(self) -> QuantizerConfig:
        return QuantizerConfig(self.phi_bits, self.mode, self.seed)

    def y_config(self) -> QuantizerConfig:
        return QuantizerConfig(self.y_bits, self.mode, self.seed)


@dataclass(frozen=True)
class RecoveryConfig:
    s: int
    max_iter: int = 500
    c: float = 0.001
    k: float = 2.0
    tol: float = 1e-6
    precision: LowPrecision | None = None
    max_shrinks: int = 200
    keep_iterates: bool = False

    def __post_init__(self):
        if self.s < 0:
            raise DomainError("sparsity must be nonnegative")
        if self.max_iter < 1:
            raise DomainError("max_iter must be positive")
        if not 0.0 < self.c < 1.0:
            raise DomainError("step guard c must lie in (0, 1)")
        if not self.k > 1.0 / (1.0 - self.c):
            raise DomainError(f"shrinkage k={self.k} must exceed 1/(1-c)={1 / (1 - self.c):.6g}")
        if self.tol < 0:
            raise DomainError("tolerance must be nonnegative")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    mu: float
    residual_norm: float
    support: tuple
    support_change: bool
    shrink_count: int


CSV_COLUMNS = ("iter", "mu", "residual_norm", "support_size", "support_change", "shrink_count")


@dataclass
class RecoveryReport:
    estimate: SparseSignal
    records: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    iterates: list | None = None
    phi_scale: float | None = None
    y_scale: float | None = None

    def max_residual_increase(self, y_norm: float) -> float:
        """Largest ``||y - Phi x^[n+1]|| - ||y - Phi x^[n]||`` over the run, with ``x^[0] = 0``.

        Non-positive for a monotone run; ``-inf`` when no iteration ran.
        """
        res = [float(y_norm)] + [r.residual_norm for r in self.records]
        return float(np.max(np.diff(res))) if len(res) > 1 else -math.inf

    def to_csv(self, fh=None, header_comment: str | None = None) -> str:
        """Write one row per iteration; returns the text when ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        if header_comment:
            out.write(f"# {header_comment}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([r.iter, repr(r.mu), repr(r.residual_norm), len(r.support), int(r.support_change), r.shrink_count])
        return out.getvalue() if fh is None else ""


class _Planes:
    """Matrix held as separate real/imaginary planes for real-vector products."""

    __slots__ = ("re", "im")

    def __init__(self, re, im=None):
        self.re = re
        self.im = im

    @classmethod
    def of(cls, a):
        a = a.entries if isinstance(a, MeasurementMatrix) else np.asarray(a)
        if np.iscomplexobj(a):
            return cls(np.ascontiguousarray(a.real), np.ascontiguousarray(a.imag))
        return cls(np.ascontiguousarray(a, dtype=np.float64))

    def planes(self):
        return [self.re] if self.im is None else [self.re, self.im]

    def times(self, idx, vals):
        """``A[:, idx] @ vals`` as a tuple of planes."""
        return tuple(p[:, idx] @ vals for p in self.planes())

    def adjoint(self, r):
        """``Re(A^H r)`` for ``r`` given as planes."""
        g = self.re.T @ r[0]
        if self.im is not None and len(r) == 2:
            g += self.im.T @ r[1]
        return g

    def sq_norm(self, idx, vals) -> float:
        return float(sum(np.dot(v, v) for v in self.times(idx, vals)))

    def fro2(self) -> float:
        return float(sum(np.vdot(p, p) for p in self.planes()))


def _vec_planes(y):
    y = np.asarray(y)
    return (y.real.copy(), y.imag.copy()) if np.iscomplexobj(y) else (y.astype(np.float64),)


def _residual_norm(y_planes, op: _Planes, x: SparseSignal) -> float:
    if x.nnz == 0:
        return float(np.sqrt(sum(np.dot(p, p) for p in y_planes)))
    ax = op.times(x.support, x.values)
    return float(np.sqrt(sum(np.dot(p - q, p - q) for p, q in zip(y_planes, ax))))


def adaptive_step(g, a, support) -> float:
    """Line-search step ``||g_G||^2 / ||A_G g_G||^2`` on the support ``G``.

    Raises :class:`DegenerateStepError` if the denominator vanishes.
    """
    op = a if isinstance(a, _Planes) else _Planes.of(a)
    support = np.asarray(support, dtype=np.int64)
    if support.size == 0:
        raise DomainError("support must be nonempty")
    g_s = np.asarray(g, dtype=np.float64)[support]
    num = float(np.dot(g_s, g_s))
    den = op.sq_norm(support, g_s)
    if den == 0.0 or num == 0.0:
        raise DegenerateStepError("A_G g_G = 0")
    return num / den


def _check_problem(phi: MeasurementMatrix, y: Observation, cfg: RecoveryConfig):
    if not isinstance(phi, MeasurementMatrix):
        phi = MeasurementMatrix(phi)
    if not isinstance(y, Observation):
        y = Observation(y)
    if len(y) != phi.rows:
        raise DimensionError(f"observation length {len(y)} != matrix rows {phi.rows}")
    if cfg.s > phi.rows:
        raise DomainError(f"sparsity {cfg.s} exceeds the number of measurements {phi.rows}")
    return phi, y


def _iterate(phi_op, y_true, draw, cfg: RecoveryConfig, step_op=None) -> RecoveryReport:
    """Shared NIHT loop.

    ``draw(n)`` returns ``(A, B, y)`` for iteration ``n``: ``A`` forms the
    adjoint, the step size and the acceptance test, ``B`` the forward product.
    ``step_op``, when given, replaces ``A`` in the step-size denominator.
    """
    n_cols = phi_op.re.shape[1]
    x = SparseSignal.empty(n_cols)
    report = RecoveryReport(estimate=x, iterates=[x] if cfg.keep_iterates else None)
    if cfg.s == 0:
        report.converged = True
        return report

    shrink = cfg.k * (1.0 - cfg.c)
    support = None
    for n in range(1, cfg.max_iter + 1):
        a_op, b_op, y_planes = draw(n)
        if x.nnz:
            bx = b_op.times(x.support, x.values)
            r = tuple(p - q for p, q in zip(y_planes, bx))
        else:
            r = y_planes
        g = a_op.adjoint(r)
        if not np.any(g):
            report.converged = True
            break
        if support is None:
            support = hard_threshold(g, cfg.s).support

        x_dense = x.densify()
        try:
            mu = adaptive_step(g, step_op or a_op, support)
        except DegenerateStepError:
            mu = 1.0 / (step_op or a_op).fro2()
        proposal = hard_threshold(x_dense + mu * g, cfg.s)

        shrinks = 0
        changed = not np.array_equal(proposal.support, support)
        if changed:
            while True:
                dx = proposal.densify() - x_dense
                nz = np.flatnonzero(dx)
                dn = float(np.dot(dx[nz], dx[nz]))
                if dn == 0.0:
                    break
                den = a_op.sq_norm(nz, dx[nz])
                if den == 0.0 or mu <= (1.0 - cfg.c) * dn / den:
                    break
                shrinks += 1
                if shrinks > cfg.max_shrinks:
                    raise ShrinkageError(f"step size still too large after {cfg.max_shrinks} shrinks at iteration {n}")
                mu /= shrink
                proposal = hard_threshold(x_dense + mu * g, cfg.s)

        step = float(np.linalg.norm(proposal.densify() - x_dense))
        prev_norm = x.norm()
        x = proposal
        support = x.support
        report.records.append(
            IterationRecord(
                iter=n,
                mu=mu,
                residual_norm=_residual_norm(y_true, phi_op, x),
                support=tuple(int(i) for i in x.support),
                support_change=changed,
                shrink_count=shrinks,
            )
        )
        report.iterations = n
        if report.iterates is not None:
            report.iterates.append(x)
        if step <= cfg.tol * prev_norm:
            report.converged = True
            break
    report.estimate = x
    return report


def niht_recover(phi, y, cfg: RecoveryConfig) -> RecoveryReport:
    """Full-precision NIHT from ``x = 0``."""
    if cfg.precision is not None:
        raise DomainError("niht_recover runs in full precision; use qniht_recover for a quantized config")
    phi, y = _check_problem(phi, y, cfg)
    op = _Planes.of(phi)
    y_planes = _vec_planes(y.values)
    return _iterate(op, y_planes, lambda n: (op, op, y_planes), cfg)


def qniht_recover(phi, y, cfg: RecoveryConfig) -> RecoveryReport:
    """Low-precision NIHT: ``y`` quantized once, two fresh quantizations of ``Phi`` per iteration.

    Quantization ``j`` of ``Phi`` (``j = 1, 2, ...``) is drawn from
    ``substream(seed, 0, j)`` and that of ``y`` from ``substream(seed, 1, 0)``,
    so a run is a pure function of its inputs and ``cfg.precision.seed``.
    """
    lp = cfg.precision
    if lp is None:
        raise DomainError("qniht_recover needs cfg.precision")
    phi, y = _check_problem(phi, y, cfg)
    op = _Planes.of(phi)
    y_true = _vec_planes(y.values)
    y_hat, y_scale = stochastic_round_planes(list(y_true), lp.y_config(), substream(lp.seed, _Y_STREAM, 0))
    y_hat = tuple(y_hat)
    rounder = StochasticRounder(op.planes(), lp.phi_config())

    def quantized(j):
        return _Planes(*rounder.values(substream(lp.seed, _PHI_STREAM, j)))

    def draw(n):
        return quantized(2 * n - 1), quantized(2 * n), y_hat

    report = _iterate(op, y_true, draw, cfg, step_op=op if lp.step_matrix == "full" else None)
    report.phi_scale = rounder.scale
    report.y_scale = y_scale
    return report
