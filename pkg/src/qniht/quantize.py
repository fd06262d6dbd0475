"""Stochastic b-bit quantization onto an equally spaced grid on [-1, 1].

A tensor is divided by its largest absolute component ``c`` (real and
imaginary parts pooled), every component is rounded at random to one of the
two grid levels around it so that the rounding is unbiased, and the level
indices are stored bit-packed next to ``c``.

Two grids are supported:

* ``"power2"`` -- ``2**b`` levels, the default;
* ``"odd"`` -- ``2**(b-1) + 1`` levels, which always contains 0.

Random draws come from :func:`substream`, which derives an independent
PCG64 generator from ``(seed, *key)`` through :class:`numpy.random.SeedSequence`.
Each component consumes exactly one uniform draw, real plane first, so the
output depends only on the seed, the key and the input.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import DomainError, MeasurementMatrix

__all__ = [
    "LEVEL_MODES",
    "QuantizerConfig",
    "QuantizedMatrix",
    "substream",
    "level_count",
    "level_values",
    "quantize_scalar",
    "quantize_tensor",
    "dequantize",
    "stochastic_round",
    "stochastic_round_planes",
    "StochasticRounder",
    "quantization_error_bound",
    "write_quantized",
    "read_quantized",
]

LEVEL_MODES = ("power2", "odd")
QUANT_MAGIC = b"QNIHTQ1"
_QHEADER = struct.Struct("<QQBBBd")


@dataclass(frozen=True)
class QuantizerConfig:
    bits: int
    mode: str = "power2"
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.bits, (int, np.integer)) or not 1 <= self.bits <= 32:
            raise DomainError(f"bits must be an integer in [1, 32], got {self.bits!r}")
        if self.mode not in LEVEL_MODES:
            raise DomainError(f"level mode must be one of {LEVEL_MODES}, got {self.mode!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must fit in an unsigned 64-bit integer")

    @property
    def levels(self) -> int:
        return level_count(self.bits, self.mode)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream labelled ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def level_count(bits: int, mode: str = "power2") -> int:
    if mode == "power2":
        return 2**bits
    if mode == "odd":
        return 2 ** (bits - 1) + 1
    raise DomainError(f"unknown level mode {mode!r}")


def level_values(idx, n_levels: int) -> np.ndarray:
    """Grid value ``-1 + 2 i / (n - 1)`` of level index ``i``."""
    return -1.0 + np.asarray(idx, dtype=np.float64) * (2.0 / (n_levels - 1))


def _round_indices(u: np.ndarray, n_levels: int, draws: np.ndarray) -> np.ndarray:
    span = n_levels - 1
    t = (u + 1.0) * (span / 2.0)
    # values that sit on a level up to rounding error are treated as on-grid
    nearest = np.rint(t)
    t = np.where(np.abs(t - nearest) <= 8 * np.finfo(float).eps * max(span, 1), nearest, t)
    lower = np.floor(t)
    idx = lower + (draws < (t - lower))
    return np.clip(idx, 0, span).astype(np.uint64)


def quantize_scalar(v: float, cfg: QuantizerConfig, rng: np.random.Generator) -> int:
    """Level index for one value in [-1, 1]; always consumes one draw."""
    if not (np.isfinite(v) and -1.0 <= v <= 1.0):
        raise DomainError(f"value {v!r} is outside [-1, 1]; divide by the scale first")
    return int(_round_indices(np.array([float(v)]), cfg.levels, rng.random(1))[0])


@dataclass(frozen=True, eq=False)
class QuantizedMatrix:
    """Packed level indices of ``Q_b(A)`` plus the scale ``c``.

    ``scale`` is ``max |component|`` of the input; it is 0 only for an
    all-zero input, which then dequantizes to exact zeros in either mode.
    """

    rows: int
    cols: int
    is_complex: bool
    bits: int
    mode: str
    scale: float
    packed: bytes

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def indices(self) -> np.ndarray:
        """Level indices, shape ``(planes, rows, cols)``."""
        planes = 2 if self.is_complex else 1
        return unpack_indices(self.packed, planes * self.size, self.bits).reshape(planes, self.rows, self.cols)

    def nbytes(self) -> int:
        return len(self.packed)


def pack_indices(idx: np.ndarray, bits: int) -> bytes:
    """Concatenate ``bits``-wide unsigned integers, least significant bit first."""
    idx = np.asarray(idx, dtype=np.uint64).reshape(-1)
    if bits == 8:
        return idx.astype(np.uint8).tobytes()
    shifts = np.arange(bits, dtype=np.uint64)
    bitplane = ((idx[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bitplane.reshape(-1), bitorder="little").tobytes()


def unpack_indices(packed: bytes, count: int, bits: int) -> np.ndarray:
    raw = np.frombuffer(packed, dtype=np.uint8)
    if bits == 8:
        return raw[:count].astype(np.uint64)
    flat = np.unpackbits(raw, count=count * bits, bitorder="little").reshape(count, bits)
    weights = np.uint64(1) << np.arange(bits, dtype=np.uint64)
    return (flat.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def _as_2d(a) -> np.ndarray:
    a = a.entries if isinstance(a, MeasurementMatrix) else np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DomainError("can only quantize matrices and vectors")
    if not np.all(np.isfinite(a)):
        raise DomainError("cannot quantize non-finite values")
    return a


class StochasticRounder:
    """Repeated stochastic rounding of fixed real planes.

    Everything that depends only on the input (scale, floor level and the
    fractional position between levels) is computed once; each call then
    costs one uniform draw per component.  Calls consume the generator plane
    by plane, one draw per component, in row-major order.
    """

    def __init__(self, planes, cfg: QuantizerConfig):
        self.planes = [np.asarray(p, dtype=np.float64) for p in planes]
        self.scale = max(float(np.max(np.abs(p))) for p in self.planes)
        self.levels = cfg.levels
        span = self.levels - 1
        self._parts = []
        self._levels_cache = None
        for p in self.planes:
            if self.scale == 0.0:
                self._parts.append((np.full(p.size, float(span // 2)), None))
                continue
            t = (np.clip(p.reshape(-1) / self.scale, -1.0, 1.0) + 1.0) * (span / 2.0)
            # values that sit on a level up to rounding error are treated as on-grid
            nearest = np.rint(t)
            t = np.where(np.abs(t - nearest) <= 8 * np.finfo(float).eps * max(span, 1), nearest, t)
            lower = np.minimum(np.floor(t), span)
            self._parts.append((lower, t - lower))

    def indices(self, rng: np.random.Generator) -> list:
        out = []
        for lower, frac in self._parts:
            draws = rng.random(lower.size)
            out.append((lower if frac is None else lower + (draws < frac)).astype(np.uint64))
        return out

    def values(self, rng: np.random.Generator) -> list:
        """Dequantized planes, reshaped like the inputs."""
        if self._levels_cache is None:
            step = 2.0 / (self.levels - 1)
            self._levels_cache = [
                (self.scale * (-1.0 + lower * step), None if frac is None else self.scale * (-1.0 + (lower + 1) * step))
                for lower, frac in self._parts
            ]
        out = []
        for (lower, frac), (lo, hi), p in zip(self._parts, self._levels_cache, self.planes):
            draws = rng.random(lower.size)
            out.append((lo if frac is None else np.where(draws < frac, hi, lo)).reshape(p.shape))
        return out


def _quantize_planes(planes, cfg: QuantizerConfig, rng: np.random.Generator):
    r = StochasticRounder(planes, cfg)
    return r.indices(rng), r.scale


def _planes(a: np.ndarray) -> list:
    return [a.real, a.imag] if np.iscomplexobj(a) else [a]


def quantize_tensor(a, cfg: QuantizerConfig, key: tuple = ()) -> QuantizedMatrix:
    """Quantize a matrix or vector with the stream ``substream(cfg.seed, *key)``."""
    a = _as_2d(a)
    planes, scale = _quantize_planes(_planes(a), cfg, substream(cfg.seed, *key))
    return QuantizedMatrix(
        rows=a.shape[0],
        cols=a.shape[1],
        is_complex=bool(np.iscomplexobj(a)),
        bits=cfg.bits,
        mode=cfg.mode,
        scale=scale,
        packed=pack_indices(np.concatenate(planes), cfg.bits),
    )


def dequantize(q: QuantizedMatrix) -> MeasurementMatrix:
    n = level_count(q.bits, q.mode)
    vals = q.scale * level_values(q.indices(), n)
    out = vals[0] + 1j * vals[1] if q.is_complex else vals[0]
    return MeasurementMatrix(out)


def stochastic_round(a, cfg: QuantizerConfig, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Dequantized ``Q_b(a)`` without packing, drawing from ``rng``.

    Gives the same values as ``dequantize(quantize_tensor(...))`` for the same
    generator state.
    """
    arr = np.asarray(a.entries if isinstance(a, MeasurementMatrix) else a)
    vals, scale = stochastic_round_planes(_planes(_as_2d(arr)), cfg, rng)
    vals = [v.reshape(arr.shape) for v in vals]
    return (vals[0] + 1j * vals[1] if len(vals) == 2 else vals[0]), scale


def stochastic_round_planes(planes, cfg: QuantizerConfig, rng: np.random.Generator):
    """Like :func:`stochastic_round` for a matrix given as its real (and imaginary) planes."""
    r = StochasticRounder(planes, cfg)
    return r.values(rng), r.scale


def quantization_error_bound(c: float, m: int, bits: int) -> float:
    """Upper bound ``c sqrt(m) / 2**(bits-1)`` on ``E||Q(v) - v||_2`` for ``v`` of length ``m``."""
    if c <= 0 or m < 1 or bits < 1:
        raise DomainError("need c > 0, m >= 1 and bits >= 1")
    return c * math.sqrt(m) / 2.0 ** (bits - 1)


def write_quantized(path, q: QuantizedMatrix) -> None:
    """``QNIHTQ1`` file: header then the packed indices, real plane before imaginary."""
    with open(path, "wb") as fh:
        fh.write(QUANT_MAGIC)
        fh.write(_QHEADER.pack(q.rows, q.cols, int(q.is_complex), q.bits, LEVEL_MODES.index(q.mode), q.scale))
        fh.write(q.packed)


def read_quantized(path) -> QuantizedMatrix:
    data = Path(path).read_bytes()
    if not data.startswith(QUANT_MAGIC):
        raise DomainError(f"{path}: not a QNIHTQ1 file")
    rows, cols, kind, bits, mode, scale = _QHEADER.unpack_from(data, len(QUANT_MAGIC))
    packed = data[len(QUANT_MAGIC) + _QHEADER.size:]
    if kind not in (0, 1) or mode >= len(LEVEL_MODES) or not 1 <= bits <= 32:
        raise DomainError(f"{path}: corrupt header")
    count = rows * cols * (2 if kind else 1)
    if len(packed) != (count * bits + 7) // 8:
        raise DomainError(f"{path}: payload length does not match header")
    return QuantizedMatrix(rows, cols, bool(kind), bits, LEVEL_MODES[mode], scale, packed)
