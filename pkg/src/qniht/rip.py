"""Restricted-isometry constants from extreme singular values.

For any column subset ``G`` the singular values of ``Phi_G`` satisfy
``sigma_max(Phi_G) <= sigma_max(Phi)``, and when ``Phi`` has at least as
many rows as columns also ``sigma_min(Phi_G) >= sigma_min(Phi)``.  The ratio
``gamma = sigma_max / sigma_min - 1`` of the full matrix is therefore a cheap
certificate that avoids enumerating supports.

Complex matrices are handled directly; their singular values coincide with
those of the real ``2M x 2N`` embedding (each with doubled multiplicity),
and since real vectors are a subset of complex ones the constants remain
valid bounds for the real signals recovered here.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .linalg import DomainError, MeasurementMatrix

__all__ = [
    "RankDeficientError",
    "NotCertifiableError",
    "RipEstimate",
    "Certificate",
    "GAMMA_TARGET",
    "DEFAULT_EPSILON",
    "estimate_rics",
    "min_bits_for_rip",
    "certify",
    "sweep_gamma",
    "sweep_to_csv",
    "tune_parameter",
]

GAMMA_TARGET = 1.0 / 16.0
DEFAULT_EPSILON = 1.0 / 64.0
SVD_MAX_COLS = 4096
# relative rank tolerance; the Gram route squares the condition number
_RANK_TOL_SVD = 1e-12
_RANK_TOL_GRAM = 1e-7


class RankDeficientError(ArithmeticError):
    def __init__(self, sigma_min: float, sigma_max: float):
        super().__init__(f"matrix is numerically rank deficient: sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e}")
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max


class NotCertifiableError(ValueError):
    """``gamma`` is too large for any bit width to certify ``gamma_hat <= 1/16``."""


@dataclass(frozen=True)
class RipEstimate:
    alpha: float
    beta: float

    @property
    def gamma(self) -> float:
        return self.beta / self.alpha - 1.0


def _extreme_singular_values(a: np.ndarray) -> tuple[float, float, float]:
    m, n = a.shape
    if n <= SVD_MAX_COLS:
        s = np.linalg.svd(a, compute_uv=False)
        return float(s[-1]), float(s[0]), _RANK_TOL_SVD
    # eigenvalues of the smaller Gram matrix are the squared singular values
    g = a @ a.conj().T if m <= n else a.conj().T @ a
    ev = np.linalg.eigvalsh(g)
    return math.sqrt(max(ev[0], 0.0)), math.sqrt(ev[-1]), _RANK_TOL_GRAM


def estimate_rics(phi) -> RipEstimate:
    """``alpha = sigma_min`` and ``beta = sigma_max`` of ``Phi``.

    Uses a dense SVD up to ``SVD_MAX_COLS`` columns and the eigenvalues of
    the smaller Gram matrix beyond that.

    Raises
    ------
    RankDeficientError
        If ``sigma_min`` is negligible next to ``sigma_max``.
    """
    a = phi.entries if isinstance(phi, MeasurementMatrix) else np.asarray(phi)
    if a.ndim != 2 or a.size == 0:
        raise DomainError("expected a non-empty matrix")
    lo, hi, tol = _extreme_singular_values(a)
    if hi == 0.0 or lo <= tol * hi:
        raise RankDeficientError(lo, hi)
    return RipEstimate(alpha=lo, beta=hi)


def min_bits_for_rip(gamma: float, epsilon: float, support_size: int, alpha: float) -> int:
    """Smallest ``b`` with ``sqrt(|G|) / (2**(b-1) alpha) <= epsilon``.

    Returns ``ceil(log2(2 sqrt(|G|) / (epsilon alpha)))``, at least 1.  A
    matrix with ``gamma <= 1/16 - epsilon`` quantized to that many bits
    keeps ``gamma_hat <= 1/16``.  ``alpha`` must refer to the matrix divided
    by its quantization scale.
    """
    if epsilon <= 0 or alpha <= 0 or support_size < 1:
        raise DomainError("need epsilon > 0, alpha > 0 and a nonempty support")
    if gamma > GAMMA_TARGET - epsilon:
        raise NotCertifiableError(f"gamma={gamma:.6g} exceeds 1/16 - epsilon = {GAMMA_TARGET - epsilon:.6g}")
    arg = 2.0 * math.sqrt(support_size) / (epsilon * alpha)
    # guard against log2 landing a hair above an exact power of two
    return max(1, math.ceil(math.log2(arg) - 1e-12))


@dataclass(frozen=True)
class Certificate:
    estimate: RipEstimate
    scale: float
    epsilon: float
    support_size: int
    bits: int | None
    status: str

    @property
    def certified(self) -> bool:
        return self.bits is not None


def certify(phi, epsilon: float = DEFAULT_EPSILON, support_size: int | None = None) -> Certificate:
    """Estimate the constants of ``Phi`` and the bit width that certifies its quantization.

    ``support_size`` defaults to the number of columns, which certifies every
    support at once.  The quantizer divides by ``c = max |component|``, so
    Lemma-style bit counts use ``alpha / c``.
    """
    a = phi.entries if isinstance(phi, MeasurementMatrix) else np.asarray(phi)
    est = estimate_rics(a)
    c = float(max(np.max(np.abs(a.real)), np.max(np.abs(a.imag)) if np.iscomplexobj(a) else 0.0))
    k = a.shape[1] if support_size is None else support_size
    try:
        bits = min_bits_for_rip(est.gamma, epsilon, k, est.alpha / c)
        status = "ok"
    except NotCertifiableError:
        bits, status = None, "not-certifiable"
    return Certificate(est, c, epsilon, k, bits, status)


SWEEP_COLUMNS = ("param_name", "param_value", "alpha", "beta", "gamma", "min_bits", "status")


def sweep_gamma(build, param_name: str, values, epsilon: float = DEFAULT_EPSILON, support_size=None) -> list[dict]:
    """Certify ``build(value)`` for every value; failures become rows, not exceptions."""
    rows = []
    for v in values:
        row = dict(param_name=param_name, param_value=v, alpha=math.nan, beta=math.nan, gamma=math.nan, min_bits="", status="ok")
        try:
            cert = certify(build(v), epsilon, support_size)
        except RankDeficientError as exc:
            row.update(alpha=exc.sigma_min, beta=exc.sigma_max, status="rank-deficient")
        except (ValueError, ArithmeticError, MemoryError) as exc:
            row.update(status=f"error: {exc}")
        else:
            row.update(
                alpha=cert.estimate.alpha,
                beta=cert.estimate.beta,
                gamma=cert.estimate.gamma,
                min_bits="" if cert.bits is None else cert.bits,
                status=cert.status,
            )
        rows.append(row)
    return rows


def sweep_to_csv(rows, fh=None, header_comment: str | None = None) -> str:
    out = io.StringIO() if fh is None else fh
    if header_comment:
        out.write(f"# {header_comment}\n")
    w = csv.DictWriter(out, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return out.getvalue() if fh is None else ""


def _gamma_or_inf(build, v) -> float:
    try:
        return estimate_rics(build(v)).gamma
    except RankDeficientError:
        return math.inf


def tune_parameter(build, candidates, target: float = GAMMA_TARGET - DEFAULT_EPSILON, tol: float = 1e-6):
    """Find a parameter value with ``gamma(build(value)) <= target``.

    ``gamma`` is not monotone in the parameter, so ``candidates`` are scanned
    in increasing order first.  Between the first passing candidate and the
    failing one before it the threshold crossing is then located by bisection.
    If no candidate passes, the best one is returned with ``ok=False``.

    Returns
    -------
    (value, gamma, ok)
    """
    cands = sorted(float(v) for v in candidates)
    if not cands:
        raise DomainError("no candidate values")
    gammas = [_gamma_or_inf(build, v) for v in cands]
    first = next((i for i, g in enumerate(gammas) if g <= target), None)
    if first is None:
        i = int(np.argmin(gammas))
        return cands[i], gammas[i], False
    if first == 0:
        return cands[0], gammas[0], True
    lo, hi, g_hi = cands[first - 1], cands[first], gammas[first]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g = _gamma_or_inf(build, mid)
        if g <= target:
            hi, g_hi = mid, g
        else:
            lo = mid
    return hi, g_hi, True
