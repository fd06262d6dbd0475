"""Point-source radio interferometry: arrays, sky grids, visibilities, dirty images and CLEAN.

Conventions
-----------
Antenna positions are in wavelengths, so a baseline ``b = p_i - p_k`` is the
``(u, v)`` coordinate directly.  The sky lives on an ``r x r`` grid of
direction cosines ``l, m`` spanning ``[-d, d]`` with spacing ``h = 2d/(r-1)``.
Indices are 0-based: pixel ``(a, b)`` (``l`` index ``a``, ``m`` index ``b``)
is column ``w = a r + b`` of the measurement matrix, i.e. the image is
flattened in C order, and baseline ``(i, k)`` is row ``z = i L + k``.  With
autocorrelations excluded the rows keep the same order with ``i == k``
skipped.

    Phi[z, w] = exp(-2j pi (u_z l_w + v_z m_w))
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import DimensionError, DomainError, MeasurementMatrix, Observation, SparseSignal, write_matrix

__all__ = [
    "ResourceError",
    "AntennaArray",
    "SkyGrid",
    "SkyImage",
    "VisibilitySet",
    "CleanResult",
    "DEFAULT_MAX_PIXELS",
    "build_measurement_matrix",
    "resonant_half_extent",
    "simulate_sky",
    "add_noise",
    "simulate_visibilities",
    "observe",
    "dirty_image",
    "dirty_beam",
    "clean",
    "write_pgm",
    "write_image_raw",
]

DEFAULT_MAX_PIXELS = 65536
_BLOCK = 1 << 22  # complex entries per chunk in the direct sums


class ResourceError(RuntimeError):
    """Requested problem exceeds the configured size cap."""


@dataclass(frozen=True, eq=False)
class AntennaArray:
    """Antenna positions in wavelengths.

    ``lattice`` is the grid spacing when every position is an integer
    multiple of it, else None.
    """

    positions: np.ndarray
    f0: float = 150e6
    lattice: float | None = None

    def __post_init__(self):
        p = np.array(self.positions, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 2:
            raise DomainError("need at least two 2-D antenna positions")
        if not np.all(np.isfinite(p)):
            raise DomainError("antenna positions must be finite")
        if len(np.unique(p, axis=0)) != len(p):
            raise DomainError("duplicate antenna positions")
        if not self.f0 > 0:
            raise DomainError("center frequency must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "positions", p)

    @property
    def L(self) -> int:
        return self.positions.shape[0]

    def baselines(self, autocorrelations: bool = True) -> np.ndarray:
        """``(u, v)`` of every ordered pair in row order, shape ``(M, 2)``."""
        p = self.positions
        b = (p[:, None, :] - p[None, :, :]).reshape(-1, 2)
        if not autocorrelations:
            keep = ~np.eye(self.L, dtype=bool).reshape(-1)
            b = b[keep]
        return b

    @classmethod
    def random_disk(cls, L: int, radius: float, seed: int = 0, f0: float = 150e6) -> "AntennaArray":
        """Uniformly random positions inside a disk."""
        rng = np.random.default_rng(seed)
        rad = radius * np.sqrt(rng.random(L))
        ang = 2 * np.pi * rng.random(L)
        return cls(np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]), f0)

    @classmethod
    def ring(cls, L: int, radius: float, f0: float = 150e6) -> "AntennaArray":
        ang = 2 * np.pi * np.arange(L) / L
        return cls(np.column_stack([radius * np.cos(ang), radius * np.sin(ang)]), f0)

    @classmethod
    def nonredundant_lattice(cls, L: int, extent: int, spacing: float = 1.0, seed: int = 0, f0: float = 150e6,
                             max_tries: int = 1000) -> "AntennaArray":
        """Positions on an ``extent x extent`` integer lattice with all baselines distinct.

        Antennas are placed greedily at random, rejecting any site that would
        repeat a baseline; the search restarts up to ``max_tries`` times.
        """
        if L < 2 or extent < 2:
            raise DomainError("need L >= 2 and extent >= 2")
        rng = np.random.default_rng(seed)
        sites = [(a, b) for a in range(extent) for b in range(extent)]
        for _ in range(max_tries):
            chosen, diffs = [], set()
            for j in rng.permutation(len(sites)):
                q = sites[j]
                new = set()
                ok = True
                for p in chosen:
                    d1 = (q[0] - p[0], q[1] - p[1])
                    d2 = (-d1[0], -d1[1])
                    if d1 in diffs or d1 in new:
                        ok = False
                        break
                    new.update((d1, d2))
                if ok:
                    chosen.append(q)
                    diffs |= new
                    if len(chosen) == L:
                        return cls(spacing * np.array(chosen, dtype=np.float64), f0, lattice=spacing)
        raise DomainError(f"no non-redundant layout of {L} antennas found on a {extent}x{extent} lattice")

    @classmethod
    def from_csv(cls, path, f0: float = 150e6) -> "AntennaArray":
        """Load a layout file with columns ``x_wavelengths, y_wavelengths``."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
        try:
            pos = [(float(r["x_wavelengths"]), float(r["y_wavelengths"])) for r in rows]
        except KeyError as exc:
            raise DomainError(f"{path}: missing column {exc}") from None
        return cls(np.array(pos), f0)


@dataclass(frozen=True)
class SkyGrid:
    r: int
    d: float

    def __post_init__(self):
        if self.r < 2:
            raise DomainError("grid needs at least 2 pixels per axis")
        if not 0 < self.d <= 1:
            raise DomainError("half-extent d must lie in (0, 1]")

    @property
    def N(self) -> int:
        return self.r * self.r

    @property
    def spacing(self) -> float:
        return 2.0 * self.d / (self.r - 1)

    def axis(self) -> np.ndarray:
        return (np.arange(self.r) - (self.r - 1) / 2.0) * self.spacing

    def directions(self) -> np.ndarray:
        """``(l, m)`` of every pixel in column order, shape ``(N, 2)``."""
        a = self.axis()
        ll, mm = np.meshgrid(a, a, indexing="ij")
        return np.column_stack([ll.ravel(), mm.ravel()])


@dataclass(frozen=True, eq=False)
class SkyImage:
    grid: SkyGrid
    intensities: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.intensities, dtype=np.float64)
        if a.shape != (self.grid.r, self.grid.r) and not (a.ndim == 2 and a.shape[0] == a.shape[1]):
            raise DimensionError(f"image shape {a.shape} does not match the grid")
        object.__setattr__(self, "intensities", a)

    def vec(self) -> np.ndarray:
        return self.intensities.reshape(-1)

    @classmethod
    def from_vec(cls, grid: SkyGrid, x) -> "SkyImage":
        x = x.densify() if isinstance(x, SparseSignal) else np.asarray(x, dtype=np.float64)
        if x.shape != (grid.N,):
            raise DimensionError(f"vector of length {x.shape} does not match {grid.N} pixels")
        return cls(grid, x.reshape(grid.r, grid.r))


@dataclass(frozen=True, eq=False)
class VisibilitySet:
    """Visibilities with their ``(u, v)`` coordinates.

    ``sigma_n`` is ``||e|| / sqrt(L)``, the per-antenna noise level for which
    ``||e|| = sqrt(L) sigma_n``.
    """

    values: np.ndarray
    uv: np.ndarray
    sigma_n: float = 0.0
    L: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        uv = np.asarray(self.uv, dtype=np.float64)
        if v.ndim != 1 or uv.shape != (v.shape[0], 2):
            raise DimensionError("need one (u, v) pair per visibility")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "uv", uv)

    @property
    def M(self) -> int:
        return self.values.shape[0]


def _check_size(grid: SkyGrid, max_pixels: int):
    if grid.N > max_pixels:
        raise ResourceError(f"grid has {grid.N} pixels, cap is {max_pixels}")


def build_measurement_matrix(array: AntennaArray, grid: SkyGrid, autocorrelations: bool = True,
                             max_pixels: int = DEFAULT_MAX_PIXELS) -> MeasurementMatrix:
    """``Phi[z, w] = exp(-2j pi <b_z, r_w>)``; see the module docstring for index order."""
    _check_size(grid, max_pixels)
    b = array.baselines(autocorrelations)
    phase = b @ grid.directions().T
    a = np.exp(-2j * np.pi * phase)
    meta = dict(L=array.L, r=grid.r, d=grid.d, autocorrelations=autocorrelations, index="z=i*L+k, w=a*r+b (0-based)")
    return MeasurementMatrix(a, meta)


def resonant_half_extent(array: AntennaArray, r: int) -> float | None:
    """Half-extent at which a lattice array gives an exact DFT matrix.

    With positions on a lattice of spacing ``g`` and pixel spacing
    ``1/(r g)``, every row is a 2-D DFT row; distinct baselines modulo ``r g``
    then give orthogonal rows and ``gamma = 0``.
    """
    if array.lattice is None:
        return None
    d = (r - 1) / (2.0 * r * array.lattice)
    return d if d <= 1 else None


def simulate_sky(grid: SkyGrid, s: int, flux_range=(1.0, 1.0), seed: int = 0) -> SparseSignal:
    """``s`` point sources at distinct random pixels with fluxes uniform in ``flux_range``."""
    lo, hi = flux_range
    if not 0 < lo <= hi:
        raise DomainError("flux range must be positive and ordered")
    if not 0 <= s <= grid.N:
        raise DomainError(f"cannot place {s} sources on {grid.N} pixels")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(grid.N, size=s, replace=False))
    flux = rng.uniform(lo, hi, size=s)
    return SparseSignal(grid.N, idx, flux)


def add_noise(clean, snr_db: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Add white noise scaled so that ``10 log10(||clean||^2 / ||e||^2) == snr_db``.

    Complex input gets circular complex Gaussian noise.  Returns ``(y, e)``.
    """
    clean = np.asarray(clean)
    if math.isinf(snr_db) and snr_db > 0:
        return clean.copy(), np.zeros_like(clean)
    if not np.isfinite(snr_db):
        raise DomainError("SNR must be finite or +inf")
    ps = float(np.vdot(clean, clean).real)
    if ps == 0.0:
        raise DomainError("cannot set a finite SNR for a zero signal")
    if np.iscomplexobj(clean):
        e = rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)
    else:
        e = rng.standard_normal(clean.shape)
    e *= math.sqrt(ps / 10 ** (snr_db / 10)) / np.linalg.norm(e)
    return clean + e, e


def simulate_visibilities(phi, x: SparseSignal, snr_db: float, seed: int = 0) -> Observation:
    """``y = Phi x + e`` at an exact SNR; ``noise_std`` records ``||e|| / sqrt(M)``."""
    from .linalg import apply

    clean_vis = apply(phi, x)
    y, e = add_noise(clean_vis, snr_db, np.random.default_rng(seed))
    return Observation(y, float(np.linalg.norm(e)) / math.sqrt(len(y)))


def observe(array: AntennaArray, phi: MeasurementMatrix, x: SparseSignal, snr_db: float, seed: int = 0,
            autocorrelations: bool = True) -> VisibilitySet:
    obs = simulate_visibilities(phi, x, snr_db, seed)
    e_norm = obs.noise_std * math.sqrt(len(obs))
    return VisibilitySet(obs.values, array.baselines(autocorrelations), e_norm / math.sqrt(array.L), array.L)


def _direct_sum(uv: np.ndarray, vis: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """``Re sum_z V_z exp(+2j pi <b_z, r>)`` for each direction ``r``, in blocks."""
    out = np.empty(dirs.shape[0])
    step = max(1, _BLOCK // max(1, uv.shape[0]))
    for s0 in range(0, dirs.shape[0], step):
        ph = np.exp(2j * np.pi * (dirs[s0:s0 + step] @ uv.T))
        out[s0:s0 + step] = (ph @ vis).real
    return out


def dirty_image(vis: VisibilitySet, grid: SkyGrid) -> SkyImage:
    """Direct-sum dirty image ``Re sum V exp(+2j pi (u l + v m))`` on the grid."""
    return SkyImage(grid, _direct_sum(vis.uv, vis.values, grid.directions()).reshape(grid.r, grid.r))


def _offset_grid(grid: SkyGrid) -> np.ndarray:
    off = (np.arange(2 * grid.r - 1) - (grid.r - 1)) * grid.spacing
    a, b = np.meshgrid(off, off, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def dirty_beam(array: AntennaArray, grid: SkyGrid, autocorrelations: bool = True) -> SkyImage:
    """Point-spread function on the ``(2r-1) x (2r-1)`` grid of pixel offsets.

    The zero offset sits at index ``(r-1, r-1)`` and equals the number of
    visibilities ``M``, so the beam covers every shift within the image.
    """
    uv = array.baselines(autocorrelations)
    vals = _direct_sum(uv, np.ones(uv.shape[0], dtype=np.complex128), _offset_grid(grid))
    n = 2 * grid.r - 1
    beam = vals.reshape(n, n)
    # the zero offset is a sum of M unit phasors at phase 0
    beam[grid.r - 1, grid.r - 1] = float(uv.shape[0])
    return SkyImage(SkyGrid(n, min(1.0, grid.spacing * (grid.r - 1))), beam)


@dataclass
class CleanResult:
    components: list = field(default_factory=list)  # ((row, col), flux)
    residual: np.ndarray | None = None
    model: np.ndarray | None = None

    def support(self, r: int) -> np.ndarray:
        return np.unique([a * r + b for (a, b), _ in self.components]).astype(np.int64)


def clean(dirty: SkyImage, beam: SkyImage, gain: float = 0.1, threshold: float = 0.0,
          max_components: int = 1000) -> CleanResult:
    """Hogbom CLEAN with a beam sampled on the full offset grid.

    Repeatedly takes the residual maximum ``p`` at pixel ``q``, subtracts
    ``gain * p / beam_peak`` times the beam centred on ``q`` and records the
    component ``(q, gain * p / beam_peak)``.  Stops when the residual maximum
    drops below ``threshold`` or after ``max_components`` components.
    Beam samples falling outside the offset grid count as zero.
    """
    if not 0 < gain <= 1:
        raise DomainError("loop gain must lie in (0, 1]")
    res = np.array(dirty.intensities, dtype=np.float64)
    r = res.shape[0]
    b = np.asarray(beam.intensities, dtype=np.float64)
    nb = b.shape[0]
    cb = nb // 2
    peak_b = b[cb, cb]
    if not peak_b > 0:
        raise DomainError("beam peak must be positive")
    model = np.zeros_like(res)
    out = CleanResult(residual=res, model=model)
    for _ in range(max_components):
        q = np.unravel_index(int(np.argmax(res)), res.shape)
        p = res[q]
        if p < threshold or p <= 0:
            break
        flux = gain * p / peak_b
        # rows/cols of the image covered by the beam centred at q
        r0, r1 = max(0, q[0] - cb), min(r, q[0] - cb + nb)
        c0, c1 = max(0, q[1] - cb), min(r, q[1] - cb + nb)
        res[r0:r1, c0:c1] -= flux * b[r0 - q[0] + cb:r1 - q[0] + cb, c0 - q[1] + cb:c1 - q[1] + cb]
        model[q] += flux
        out.components.append(((int(q[0]), int(q[1])), float(flux)))
    return out


def write_pgm(path, image, sidecar: bool = True) -> None:
    """16-bit binary PGM, linearly mapped so min -> 0 and max -> 65535.

    The sidecar ``<path>.txt`` gives ``value = offset + pixel * scale``.
    """
    a = np.asarray(image.intensities if isinstance(image, SkyImage) else image, dtype=np.float64)
    lo, hi = float(a.min()), float(a.max())
    if lo >= 0:
        lo = 0.0  # nonnegative images are max-normalized
    scale = (hi - lo) / 65535.0 if hi > lo else 1.0
    px = np.rint((a - lo) / scale).clip(0, 65535).astype(">u2")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n65535\n".encode())
        fh.write(px.tobytes())
    if sidecar:
        path.with_name(path.name + ".txt").write_text(
            f"offset={lo!r}\nscale={scale!r}\nvalue=offset+pixel*scale\n"
            "layout=row index l, column index m, 0-based, pixel w=l*r+m\n"
        )


def write_image_raw(path, image) -> None:
    """Image as an ``r x r`` real matrix in the binary matrix format."""
    a = np.asarray(image.intensities if isinstance(image, SkyImage) else image, dtype=np.float64)
    write_matrix(path, a)
