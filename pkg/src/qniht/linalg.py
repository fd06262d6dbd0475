"""Dense measurement matrices, sparse signals and the products between them.

Everything here works in double precision.  The signal ``x`` is always real,
while the matrix and the observation may be complex (the radio case), so the
descent direction used by the solvers is ``Re(Phi^H r)``: the exact gradient
of ``||y - Phi x||^2`` over real ``x`` (up to a factor of -2).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DimensionError",
    "DomainError",
    "MeasurementMatrix",
    "Observation",
    "SparseSignal",
    "hard_threshold",
    "apply",
    "apply_adjoint",
    "densify",
    "write_matrix",
    "read_matrix",
]

MATRIX_MAGIC = b"QNIHT1"
_HEADER = struct.Struct("<QQB")


class DomainError(ValueError):
    """Input outside the domain of an operation (non-finite, out of range)."""


class DimensionError(ValueError):
    """Operand shapes do not agree."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """Dense ``M x N`` operator, real or complex, stored row-major."""

    entries: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise DimensionError(f"expected a non-empty 2-D array, got shape {a.shape}")
        if np.iscomplexobj(a):
            a = np.ascontiguousarray(a, dtype=np.complex128)
        else:
            a = np.ascontiguousarray(a, dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise DomainError("measurement matrix has non-finite entries")
        object.__setattr__(self, "entries", _readonly(a))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.entries)

    @property
    def scalar_kind(self) -> str:
        return "complex" if self.is_complex else "real"

    def scaled(self, factor: float) -> "MeasurementMatrix":
        return MeasurementMatrix(self.entries * factor, dict(self.meta))


@dataclass(frozen=True, eq=False)
class Observation:
    """Measured vector ``y`` with the noise level, when it is known."""

    values: np.ndarray
    noise_std: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1:
            raise DimensionError("observation must be a 1-D vector")
        v = v.astype(np.complex128 if np.iscomplexobj(v) else np.float64)
        if not np.all(np.isfinite(v)):
            raise DomainError("observation has non-finite entries")
        object.__setattr__(self, "values", _readonly(v))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class SparseSignal:
    """Real ``dim``-vector given by a strictly increasing support and its values."""

    dim: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("signal dimension must be positive")
        idx = np.asarray(self.support, dtype=np.int64).reshape(-1)
        val = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if idx.shape != val.shape:
            raise DimensionError("support and values differ in length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim or np.any(np.diff(idx) <= 0):
                raise DomainError("support must be strictly increasing indices in [0, dim)")
            if not np.all(np.isfinite(val)) or np.any(val == 0):
                raise DomainError("stored values must be finite and nonzero")
        object.__setattr__(self, "support", _readonly(idx))
        object.__setattr__(self, "values", _readonly(val))

    @classmethod
    def empty(cls, dim: int) -> "SparseSignal":
        return cls(dim, np.empty(0, np.int64), np.empty(0))

    @classmethod
    def from_dense(cls, v) -> "SparseSignal":
        v = np.asarray(v, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise DomainError("vector has non-finite entries")
        idx = np.flatnonzero(v)
        return cls(v.shape[0], idx, v[idx])

    @property
    def nnz(self) -> int:
        return int(self.support.size)

    def norm(self, ord=2) -> float:
        return float(np.linalg.norm(self.values, ord)) if self.nnz else 0.0

    def densify(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.support] = self.values
        return out

    def __eq__(self, other):
        if not isinstance(other, SparseSignal):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def densify(x: SparseSignal) -> np.ndarray:
    return x.densify()


def hard_threshold(v, s: int) -> SparseSignal:
    """Keep the ``s`` largest-magnitude entries of ``v``.

    Ties are broken toward the lower index.  Zero entries are never kept, so
    the result may hold fewer than ``s`` elements.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if s < 0:
        raise DomainError("sparsity budget must be nonnegative")
    if not np.all(np.isfinite(v)):
        raise DomainError("cannot threshold a vector with non-finite entries")
    if v.size == 0:
        raise DimensionError("cannot threshold an empty vector")
    if s == 0:
        return SparseSignal.empty(v.size)
    # stable sort on -|v| keeps the lower index first among equal magnitudes
    order = np.argsort(-np.abs(v), kind="stable")[:s]
    order = order[v[order] != 0]
    order.sort()
    return SparseSignal(v.size, order, v[order])


def _entries(phi) -> np.ndarray:
    return phi.entries if isinstance(phi, MeasurementMatrix) else np.asarray(phi)


def apply(phi, x: SparseSignal) -> np.ndarray:
    """``Phi @ x`` touching only the columns in ``supp(x)``."""
    a = _entries(phi)
    if x.dim != a.shape[1]:
        raise DimensionError(f"signal has dim {x.dim}, matrix has {a.shape[1]} columns")
    if x.nnz == 0:
        return np.zeros(a.shape[0], dtype=a.dtype)
    return a[:, x.support] @ x.values


def apply_adjoint(phi, r) -> np.ndarray:
    """``Re(Phi^H r)``, a real vector of length ``N``."""
    a = _entries(phi)
    r = np.asarray(r)
    if r.shape != (a.shape[0],):
        raise DimensionError(f"residual has shape {r.shape}, matrix has {a.shape[0]} rows")
    if np.iscomplexobj(a):
        # Re(conj(A)^T r) = A.real^T r.real + A.imag^T r.imag
        return a.real.T @ r.real + a.imag.T @ np.imag(r)
    return a.T @ np.real(r)


def write_matrix(path, a) -> None:
    """Write a matrix (or a vector, as ``N = 1``) in the ``QNIHT1`` binary format.

    Layout: magic, u64 rows, u64 cols, u8 kind (0 real, 1 complex), then
    little-endian f64 entries row-major, interleaved re/im when complex.
    """
    a = _entries(a)
    if a.ndim == 1:
        a = a[:, None]
    is_cplx = np.iscomplexobj(a)
    body = np.ascontiguousarray(a, dtype="<c16" if is_cplx else "<f8")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(_HEADER.pack(a.shape[0], a.shape[1], int(is_cplx)))
        fh.write(body.tobytes())


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(MATRIX_MAGIC):
        raise DomainError(f"{path}: not a QNIHT1 matrix file")
    off = len(MATRIX_MAGIC)
    rows, cols, kind = _HEADER.unpack_from(data, off)
    off += _HEADER.size
    if kind not in (0, 1):
        raise DomainError(f"{path}: unknown scalar kind {kind}")
    dtype = np.dtype("<c16" if kind else "<f8")
    expected = rows * cols * dtype.itemsize
    if len(data) - off != expected:
        raise DomainError(f"{path}: expected {expected} payload bytes, found {len(data) - off}")
    a = np.frombuffer(data, dtype=dtype, offset=off).reshape(rows, cols)
    return a.astype(np.complex128 if kind else np.float64)
