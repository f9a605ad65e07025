"""Raster classification of dynamical and parameter planes, pixel-counting
area estimates, and P6 pixmap encoding.

Pixel centers are sampled (no anti-aliasing); the area bias of a pixel
count is O(perimeter * pixel size).  Iteration is per-pixel independent,
so rasters are deterministic regardless of how the work is partitioned.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .errors import PreconditionError
from .maps import CubicHermanMap, QuadraticSiegelMap
from .siegel import ESCAPE_RADIUS, LinearizerSeries, subdisk_boundary

CODE_BOUNDED = 0
CODE_TO_INFINITY = 1
CODE_TO_ZERO = 2

#: parameter-plane fates per critical orbit
FATE_BOUNDED = 0
FATE_TO_INFINITY = 1
FATE_TO_ZERO = 2


@dataclass(frozen=True)
class RasterSpec:
    center: complex
    width: float
    height: float
    nx: int
    ny: int
    max_iter: int
    escape_out: float = 1e6
    capture_in: float = 1e-6

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise PreconditionError("nx and ny must be >= 1")
        if not self.escape_out > self.capture_in > 0:
            raise PreconditionError("need escape_out > capture_in > 0")
        if self.max_iter < 1:
            raise PreconditionError("max_iter must be >= 1")

    @property
    def pixel_area(self) -> float:
        return (self.width / self.nx) * (self.height / self.ny)

    def grid(self) -> np.ndarray:
        """Pixel centers, shape (ny, nx), top row first."""
        c = complex(self.center)
        xs = c.real - self.width / 2 + (np.arange(self.nx) + 0.5) * self.width / self.nx
        ys = c.imag + self.height / 2 - (np.arange(self.ny) + 0.5) * self.height / self.ny
        return xs[None, :] + 1j * ys[:, None]

    def halved(self) -> "RasterSpec":
        return RasterSpec(
            self.center, self.width, self.height,
            max(self.nx // 2, 1), max(self.ny // 2, 1),
            self.max_iter, self.escape_out, self.capture_in,
        )


@dataclass(frozen=True)
class ClassificationRaster:
    spec: RasterSpec
    kind: str  # "dynamical", "parameter" or "lm"
    codes: np.ndarray  # uint8, shape (ny, nx)
    hits: np.ndarray  # int32 first-hit iteration, 0 where undecided


@dataclass(frozen=True)
class AreaEstimate:
    value: float
    pixel_count: int
    resolution: tuple
    refinement_delta: Optional[float] = None


def _iterate_basins(mapping, spec: RasterSpec, z0: np.ndarray, u_array=None):
    """Shared escape/capture loop; returns flat (codes, hits)."""
    z = z0.ravel().astype(complex)
    n = z.size
    codes = np.zeros(n, dtype=np.uint8)
    hits = np.zeros(n, dtype=np.int32)
    active = np.ones(n, dtype=bool)
    u = None if u_array is None else u_array.ravel().astype(complex)
    # an exact hit of 0 only counts as captured when 0 actually attracts
    try:
        zero_attracting = abs(mapping.derivative(0.0)) < 0.5
    except Exception:
        zero_attracting = False

    def step(values, idx):
        if u is None:
            return mapping.eval_array(values)
        uu = u[idx]
        return uu * values * values * (values - mapping.a) / (1.0 - mapping.kappa * values)

    with np.errstate(all="ignore"):
        for k in range(1, spec.max_iter + 1):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            z[idx] = step(z[idx], idx)
            az = np.abs(z[idx])
            esc = ~np.isfinite(az) | (az > spec.escape_out)
            if esc.any():
                ei = idx[esc]
                codes[ei] = CODE_TO_INFINITY
                hits[ei] = k
                active[ei] = False
            near = (~esc) & (az < spec.capture_in) & (az > 0)
            if near.any():
                ni = idx[near]
                w = step(z[ni], ni)
                contained = np.abs(w) <= np.abs(z[ni]) / 2.0
                ci = ni[contained]
                if ci.size:
                    codes[ci] = CODE_TO_ZERO
                    hits[ci] = k
                    active[ci] = False
            if zero_attracting:
                zero = (~esc) & (az == 0)
                if zero.any():
                    zi = idx[zero]
                    codes[zi] = CODE_TO_ZERO
                    hits[zi] = k
                    active[zi] = False
    return codes, hits


def classify_dynamical(mapping, spec: RasterSpec) -> ClassificationRaster:
    """Per-pixel basin codes: to_infinity(k), to_zero(k) or bounded_other.

    The capture test demands |Q(z)| <= |z|/2 at the near-zero point, so a
    slow pass near 0 is not misclassified as captured.
    """
    grid = spec.grid()
    codes, hits = _iterate_basins(mapping, spec, grid)
    return ClassificationRaster(
        spec=spec,
        kind="dynamical",
        codes=codes.reshape(grid.shape),
        hits=hits.reshape(grid.shape),
    )


def classify_parameter(
    a: complex,
    spec: RasterSpec,
    probes: Optional[tuple] = None,
) -> ClassificationRaster:
    """u-plane classification by the fates of both free critical orbits.

    Codes combine the two fates as 3*fate(1) + fate(c) with fates in
    {0 bounded, 1 to infinity, 2 to zero}; code 0 (bounded-bounded) marks
    the Herman-ring candidates.
    """
    probe_map = CubicHermanMap(a=a, u=1.0)  # validates a
    if probes is None:
        probes = (1.0 + 0.0j, probe_map.c)
    grid = spec.grid()
    u = grid
    fates = []
    hit_list = []
    for z_crit in probes:
        z0 = np.full(grid.shape, complex(z_crit), dtype=complex)
        codes, hits = _iterate_basins(probe_map, spec, z0, u_array=u)
        fates.append(codes)
        hit_list.append(hits)
    combined = (3 * fates[0] + fates[1]).astype(np.uint8)
    hits = np.maximum(hit_list[0], hit_list[1]).astype(np.int32)
    return ClassificationRaster(
        spec=spec,
        kind="parameter",
        codes=combined.reshape(grid.shape),
        hits=hits.reshape(grid.shape),
    )


def classify_lm(
    series: LinearizerSeries,
    rho: float,
    spec: RasterSpec,
    k_max: int = 128,
    boundary_samples: int = 512,
) -> ClassificationRaster:
    """Batch orbit decomposition for the quadratic of the given linearizer.

    Codes: to_infinity(k) for escape beyond radius 4, to_zero(k) for entry
    into the invariant sub-disk of conformal radius rho at step k (capture
    target is the sub-disk here), bounded_other for orbits undecided within
    k_max steps — the L-set approximation.  Membership is a winding test
    against the sampled sub-disk boundary, the vectorized equivalent of the
    per-point series inversion.
    """
    from matplotlib.path import Path

    boundary = subdisk_boundary(series, rho, samples=boundary_samples)
    poly = Path(np.column_stack([boundary.real, boundary.imag]))
    r_bound = float(np.max(np.abs(boundary)))
    mapping = series.map_double()

    grid = spec.grid()
    z = grid.ravel().astype(complex)
    n = z.size
    codes = np.zeros(n, dtype=np.uint8)
    hits = np.zeros(n, dtype=np.int32)
    active = np.ones(n, dtype=bool)
    with np.errstate(all="ignore"):
        for k in range(0, k_max + 1):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            az = np.abs(z[idx])
            esc = ~np.isfinite(az) | (az > ESCAPE_RADIUS)
            if esc.any():
                ei = idx[esc]
                codes[ei] = CODE_TO_INFINITY
                hits[ei] = k
                active[ei] = False
            cand = idx[(~esc) & (az <= r_bound)]
            if cand.size:
                pts = np.column_stack([z[cand].real, z[cand].imag])
                inside = poly.contains_points(pts)
                ci = cand[inside]
                if ci.size:
                    codes[ci] = CODE_TO_ZERO
                    hits[ci] = k
                    active[ci] = False
            if k < k_max:
                idx = np.flatnonzero(active)
                z[idx] = mapping.eval_array(z[idx])
    return ClassificationRaster(
        spec=spec,
        kind="lm",
        codes=codes.reshape(grid.shape),
        hits=hits.reshape(grid.shape),
    )


def area_from_raster(
    raster: ClassificationRaster,
    code_filter: Union[int, Iterable[int]],
    previous: Optional[AreaEstimate] = None,
) -> AreaEstimate:
    """Pixel-counting measure of the region matching the code filter."""
    if isinstance(code_filter, (int, np.integer)):
        wanted = {int(code_filter)}
    else:
        wanted = {int(c) for c in code_filter}
    mask = np.isin(raster.codes, sorted(wanted))
    count = int(mask.sum())
    value = count * raster.spec.pixel_area
    delta = None
    if previous is not None:
        ref = max(abs(previous.value), 1e-300)
        delta = abs(value - previous.value) / ref
    return AreaEstimate(
        value=value,
        pixel_count=count,
        resolution=(raster.spec.nx, raster.spec.ny),
        refinement_delta=delta,
    )


def area_csv(rows) -> str:
    """Rows of (filter_name, estimate) to 'filter,resolution,value,delta'."""
    lines = ["filter,resolution,value,delta"]
    for name, est in rows:
        delta = "" if est.refinement_delta is None else repr(est.refinement_delta)
        lines.append(f"{name},{est.resolution[0]}x{est.resolution[1]},{est.value!r},{delta}")
    return "\n".join(lines) + "\n"


DEFAULT_DYNAMICAL_PALETTE = {
    CODE_BOUNDED: (0, 0, 0),
    CODE_TO_INFINITY: (255, 255, 255),
    CODE_TO_ZERO: (80, 130, 255),
}

#: 9 combined states for the parameter plane; bounded-bounded highlighted
DEFAULT_PARAMETER_PALETTE = {
    0: (0, 200, 80),
    1: (235, 235, 235),
    2: (120, 160, 255),
    3: (250, 250, 250),
    4: (30, 30, 30),
    5: (90, 90, 160),
    6: (160, 200, 255),
    7: (110, 110, 60),
    8: (60, 60, 110),
}


def default_palette(kind: str) -> dict:
    return dict(
        DEFAULT_PARAMETER_PALETTE if kind == "parameter" else DEFAULT_DYNAMICAL_PALETTE
    )


def encode_image(raster: ClassificationRaster, palette: Optional[dict] = None) -> bytes:
    """Binary P6 pixmap, 8-bit channels, row-major, top row first.

    Codes missing from the palette fall back to black with a warning.
    """
    pal = default_palette(raster.kind) if palette is None else palette
    codes = raster.codes
    ny, nx = codes.shape
    lut = np.zeros((256, 3), dtype=np.uint8)
    present = np.unique(codes)
    for code in present:
        if int(code) in pal:
            lut[int(code)] = pal[int(code)]
        else:
            warnings.warn(f"palette missing code {int(code)}; using black", stacklevel=2)
    rgb = lut[codes]
    header = f"P6\n{nx} {ny}\n255\n".encode("ascii")
    return header + rgb.tobytes()
