"""Error bounds for low-precision NIHT and the metrics used to compare recoveries.

Notation: ``x`` is the true signal, ``x^s`` its best ``s``-term
approximation, ``e`` the measurement noise.  The restricted-isometry
constants ``beta_2s`` (full precision) and ``beta_hat_2s`` (quantized) only
appear in denominators; callers pass a certified lower bound (the smallest
singular value of the full matrix) so that the evaluated bound stays an
upper bound.  A bit width of ``math.inf`` denotes full precision.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import DimensionError, DomainError, SparseSignal

__all__ = [
    "epsilon_s",
    "epsilon_q",
    "theorem3_bound",
    "stopped_bound",
    "general_bound",
    "epsilon_sky",
    "corollary1_bound",
    "final_bound",
    "recovery_metrics",
    "BoundReport",
    "BOUND_COLUMNS",
]


def _pow2_inv(bits) -> float:
    """``1 / 2**(bits - 1)``, zero for full precision."""
    if math.isinf(bits):
        return 0.0
    if bits < 1:
        raise DomainError("bit widths must be >= 1")
    return 2.0 ** (1 - bits)


def _tail_terms(x, xs: SparseSignal, s: int | None) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (xs.dim,):
        raise DimensionError("truth and its sparse approximation differ in length")
    s = xs.nnz if s is None else s
    if s < 1:
        raise DomainError("sparsity must be at least 1")
    tail = x - xs.densify()
    return float(np.linalg.norm(tail) + np.abs(tail).sum() / math.sqrt(s))


def epsilon_s(x, xs: SparseSignal, e_norm: float, beta2s: float, s: int | None = None) -> float:
    """``||x - x^s||_2 + ||x - x^s||_1 / sqrt(s) + ||e||_2 / beta_2s``.

    ``s`` defaults to ``|supp(x^s)|``.
    """
    if beta2s <= 0:
        raise DomainError("beta must be positive")
    return _tail_terms(x, xs, s) + e_norm / beta2s


def epsilon_q(M: int, beta2s_hat: float, b_phi, b_y, xs_norm: float, c_phi: float = 1.0, c_y: float = 1.0) -> float:
    """``sqrt(M) / beta_hat * (c_phi ||x^s|| / 2**(b_phi-1) + c_y / 2**(b_y-1))``."""
    if beta2s_hat <= 0:
        raise DomainError("beta_hat must be positive")
    return math.sqrt(M) / beta2s_hat * (c_phi * xs_norm * _pow2_inv(b_phi) + c_y * _pow2_inv(b_y))


def theorem3_bound(n, xs_norm: float, eps_s: float, eps_q: float):
    """``2**-n ||x^s|| + 10 eps_s + 5 eps_q``; ``n`` may be an array."""
    n = np.asarray(n, dtype=np.float64)
    out = np.exp2(-n) * xs_norm + 10.0 * eps_s + 5.0 * eps_q
    return float(out) if out.ndim == 0 else out


def stopped_bound(eps_s: float, eps_q: float) -> float:
    """Accuracy ``11 eps_s + 5 eps_q`` after the halting iteration."""
    return 11.0 * eps_s + 5.0 * eps_q


def general_bound(n, xs_norm: float, x, xs: SparseSignal, e_norm: float, beta2s: float, eps_q: float,
                  s: int | None = None):
    """Sharper form: ``2**-n ||x^s|| + 10 ||e||/beta + 6.4 [tail terms] + 5 eps_q``."""
    if beta2s <= 0:
        raise DomainError("beta must be positive")
    n = np.asarray(n, dtype=np.float64)
    out = np.exp2(-n) * xs_norm + 10.0 * e_norm / beta2s + 6.4 * _tail_terms(x, xs, s) + 5.0 * eps_q
    return float(out) if out.ndim == 0 else out


def epsilon_sky(xs_norm: float, b_phi, b_y) -> float:
    """``||x^s|| / 2**b_phi + 1 / 2**b_y``."""
    return 0.5 * (xs_norm * _pow2_inv(b_phi) + _pow2_inv(b_y))


def corollary1_bound(n, L: int, sigma_n: float, beta2s: float, beta2s_hat: float, b_phi, b_y, xs_norm: float):
    """Radio form ``2**-n ||x^s|| + 10 (sqrt(L) sigma_n / beta + L eps_sky / beta_hat)``."""
    return _radio_bound(n, L, sigma_n, beta2s, beta2s_hat, b_phi, b_y, xs_norm, 10.0, 10.0)


def final_bound(n, L: int, sigma_n: float, beta2s: float, beta2s_hat: float, b_phi, b_y, xs_norm: float):
    """Same as :func:`corollary1_bound` with coefficients 9 (noise) and 5 (quantization)."""
    return _radio_bound(n, L, sigma_n, beta2s, beta2s_hat, b_phi, b_y, xs_norm, 9.0, 5.0)


def _radio_bound(n, L, sigma_n, beta, beta_hat, b_phi, b_y, xs_norm, k_noise, k_quant):
    if beta <= 0 or beta_hat <= 0:
        raise DomainError("beta and beta_hat must be positive")
    n = np.asarray(n, dtype=np.float64)
    out = (np.exp2(-n) * xs_norm + k_noise * math.sqrt(L) * sigma_n / beta
           + k_quant * L * epsilon_sky(xs_norm, b_phi, b_y) / beta_hat)
    return float(out) if out.ndim == 0 else out


def recovery_metrics(estimate: SparseSignal, truth: SparseSignal) -> tuple[float, float]:
    """``(||x_hat - x|| / ||x||, |supp(x_hat) & supp(x)| / |supp(x)|)``.

    An empty truth gives exact recovery 1.0 only when the estimate is also
    empty, and relative error 0 or ``inf`` likewise.
    """
    if estimate.dim != truth.dim:
        raise DimensionError("estimate and truth differ in dimension")
    tn = truth.norm()
    diff = float(np.linalg.norm(estimate.densify() - truth.densify()))
    if tn == 0.0:
        err = 0.0 if diff == 0.0 else math.inf
    else:
        err = diff / tn
    if truth.nnz == 0:
        exact = 1.0 if estimate.nnz == 0 else 0.0
    else:
        exact = np.intersect1d(estimate.support, truth.support).size / truth.nnz
    return err, float(exact)


BOUND_COLUMNS = ("n", "empirical_mean_error", "theorem3_bound", "corollary1_bound")


@dataclass
class BoundReport:
    """Per-iteration bound curve next to the empirical mean error."""

    epsilon_s: float
    epsilon_q: float
    xs_norm: float
    empirical: np.ndarray
    corollary: np.ndarray | None = None
    inputs: dict = field(default_factory=dict)

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(len(self.empirical))

    @property
    def bound(self) -> np.ndarray:
        return np.atleast_1d(theorem3_bound(self.iterations, self.xs_norm, self.epsilon_s, self.epsilon_q))

    def holds(self) -> np.ndarray:
        return self.empirical <= self.bound

    def to_csv(self, fh=None, header_comment: str | None = None) -> str:
        out = io.StringIO() if fh is None else fh
        if header_comment:
            out.write(f"# {header_comment}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(BOUND_COLUMNS)
        cor = self.corollary if self.corollary is not None else [math.nan] * len(self.empirical)
        for n, emp, b, c in zip(self.iterations, self.empirical, self.bound, cor):
            w.writerow([int(n), repr(float(emp)), repr(float(b)), repr(float(c))])
        return out.getvalue() if fh is None else ""
