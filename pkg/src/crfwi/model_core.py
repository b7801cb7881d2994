"""Domain types, file I/O, source wavelets, and inversion-quality metrics.

Velocities are stored in m/s everywhere; metrics convert to km/s so their
magnitudes are comparable across experiments.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

VGRD_MAGIC = b"VGRD"
SGTH_MAGIC = b"SGTH"


class FormatError(Exception):
    """Raised when a binary grid/gather file does not match its format."""


class Boundary(Enum):
    FREE_TOP_PML_SIDES = "free-surface-top+pml-sides"
    PML_ALL = "pml-all-sides"


@dataclass(frozen=True)
class VelocityGrid:
    """Raster of velocities in m/s, row-major (depth-major) storage.

    nx == 1 denotes a 1D depth profile.
    """

    nz: int
    nx: int
    dz: float
    dx: float
    values: np.ndarray  # shape (nz, nx), float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(self.nz, self.nx)
        object.__setattr__(self, "values", v)
        if self.nz < 1 or self.nx < 1:
            raise ValueError("grid must have nz, nx >= 1")
        if not (self.dz > 0 and self.dx > 0):
            raise ValueError("grid spacing must be positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("velocities must be finite")
        if not np.all(v > 0):
            raise ValueError("velocities must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nz, self.nx)

    @property
    def is_1d(self) -> bool:
        return self.nx == 1

    def with_values(self, values: np.ndarray) -> "VelocityGrid":
        return VelocityGrid(self.nz, self.nx, self.dz, self.dx, values)


@dataclass(frozen=True)
class AcquisitionGeometry:
    source_positions: tuple[tuple[int, int], ...]
    receiver_positions: tuple[tuple[int, int], ...]
    boundary: Boundary = Boundary.FREE_TOP_PML_SIDES

    def __post_init__(self):
        object.__setattr__(self, "source_positions", tuple(map(tuple, self.source_positions)))
        object.__setattr__(self, "receiver_positions", tuple(map(tuple, self.receiver_positions)))
        if len(self.source_positions) < 1 or len(self.receiver_positions) < 1:
            raise ValueError("need at least one source and one receiver")

    def validate_against(self, grid: VelocityGrid) -> None:
        for iz, ix in (*self.source_positions, *self.receiver_positions):
            if not (0 <= iz < grid.nz and 0 <= ix < grid.nx):
                raise ValueError(f"position ({iz},{ix}) outside grid {grid.shape}")

    @property
    def n_shots(self) -> int:
        return len(self.source_positions)


@dataclass(frozen=True)
class Wavelet:
    dt: float
    nt: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64).reshape(self.nt)
        object.__setattr__(self, "samples", s)
        if self.nt < 1:
            raise ValueError("nt must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(s)):
            raise ValueError("wavelet samples must be finite")


@dataclass(frozen=True)
class ShotGather:
    """Receiver x time matrix of recorded wavefield samples for one source."""

    dt: float
    data: np.ndarray  # shape (n_receivers, nt)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("gather data must be 2D (receivers x time)")
        object.__setattr__(self, "data", d)

    @property
    def n_receivers(self) -> int:
        return self.data.shape[0]

    @property
    def nt(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Metrics:
    mse: float
    mae: float
    ssim: float
    mse_normalized: float = field(default=float("nan"))

    def as_rows(self) -> list[tuple[str, float]]:
        return [
            ("mse", self.mse),
            ("mae", self.mae),
            ("ssim", self.ssim),
            ("mse_normalized", self.mse_normalized),
        ]


def ricker(peak_freq_hz: float, dt: float, nt: int, t0: float | None = None) -> Wavelet:
    """Ricker wavelet (1 - 2 pi^2 f^2 (t-t0)^2) exp(-pi^2 f^2 (t-t0)^2).

    t0 defaults to 1/peak_freq so the onset is close to zero amplitude.
    """
    if peak_freq_hz <= 0:
        raise ValueError("peak frequency must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if nt < 1:
        raise ValueError("nt must be >= 1")
    if t0 is None:
        t0 = 1.0 / peak_freq_hz
    t = np.arange(nt, dtype=np.float64) * dt - t0
    arg = (np.pi * peak_freq_hz * t) ** 2
    samples = (1.0 - 2.0 * arg) * np.exp(-arg)
    return Wavelet(dt=dt, nt=nt, samples=samples)


# -- binary formats -----------------------------------------------------------

def save_velocity_grid(grid: VelocityGrid, path) -> None:
    payload = np.asarray(grid.values, dtype="<f4").tobytes()
    header = VGRD_MAGIC + struct.pack("<IIff", grid.nz, grid.nx, grid.dz, grid.dx)
    with open(path, "wb") as f:
        f.write(header + payload)


def load_velocity_grid(path) -> VelocityGrid:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 20 or raw[:4] != VGRD_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {VGRD_MAGIC!r}")
    nz, nx, dz, dx = struct.unpack("<IIff", raw[4:20])
    values = np.frombuffer(raw[20:], dtype="<f4")
    if values.size != nz * nx:
        raise FormatError(f"{path}: header says {nz}x{nx} cells, payload has {values.size}")
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: non-finite velocity values")
    return VelocityGrid(nz=nz, nx=nx, dz=float(dz), dx=float(dx),
                        values=values.astype(np.float64).reshape(nz, nx))


def save_shot_gather(gather: ShotGather, path) -> None:
    payload = np.asarray(gather.data, dtype="<f4").tobytes()
    header = SGTH_MAGIC + struct.pack("<IIf", gather.n_receivers, gather.nt, gather.dt)
    with open(path, "wb") as f:
        f.write(header + payload)


def load_shot_gather(path) -> ShotGather:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 16 or raw[:4] != SGTH_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {SGTH_MAGIC!r}")
    n_rec, nt, dt = struct.unpack("<IIf", raw[4:16])
    data = np.frombuffer(raw[16:], dtype="<f4")
    if data.size != n_rec * nt:
        raise FormatError(f"{path}: header says {n_rec}x{nt} samples, payload has {data.size}")
    return ShotGather(dt=float(dt), data=data.astype(np.float64).reshape(n_rec, nt))


# -- metrics ------------------------------------------------------------------

def _gaussian_window(size: int = 7, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    ax = np.arange(size) - half
    g1 = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g1, g1)
    return w / w.sum()


def _ssim(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean SSIM over valid 7x7 Gaussian windows, C1=(0.01 L)^2, C2=(0.03 L)^2.

    L is the dynamic range of the truth image. Falls back to global statistics
    when the image is smaller than the window.
    """
    L = float(truth.max() - truth.min())
    if L <= 0:
        # degenerate constant truth: SSIM defined through the stability
        # constants with a nominal range of 1
        L = 1.0
    c1 = (0.01 * L) ** 2
    c2 = (0.03 * L) ** 2
    win = _gaussian_window()
    k = win.shape[0]
    nz, nx = truth.shape
    if nz < k or nx < k:
        mu_x, mu_y = pred.mean(), truth.mean()
        var_x, var_y = pred.var(), truth.var()
        cov = ((pred - mu_x) * (truth - mu_y)).mean()
        return float(((2 * mu_x * mu_y + c1) * (2 * cov + c2))
                     / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)))

    from numpy.lib.stride_tricks import sliding_window_view

    px = sliding_window_view(pred, (k, k))
    tx = sliding_window_view(truth, (k, k))
    mu_x = np.einsum("ijkl,kl->ij", px, win)
    mu_y = np.einsum("ijkl,kl->ij", tx, win)
    xx = np.einsum("ijkl,kl->ij", px * px, win)
    yy = np.einsum("ijkl,kl->ij", tx * tx, win)
    xy = np.einsum("ijkl,kl->ij", px * tx, win)
    var_x = xx - mu_x ** 2
    var_y = yy - mu_y ** 2
    cov = xy - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) \
        / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
    return float(ssim_map.mean())


def evaluate_metrics(predicted: VelocityGrid, truth: VelocityGrid) -> Metrics:
    """MSE/MAE on velocities in km/s plus windowed SSIM.

    mse_normalized divides the km/s MSE by the variance of the truth, which
    makes it insensitive to the (unstated) normalization convention of
    published tables.
    """
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    p = predicted.values / 1000.0
    t = truth.values / 1000.0
    diff = p - t
    mse = float(np.mean(diff ** 2))
    mae = float(np.mean(np.abs(diff)))
    var_t = float(np.var(t))
    mse_norm = mse / var_t if var_t > 0 else float("nan")
    return Metrics(mse=mse, mae=mae, ssim=_ssim(p, t), mse_normalized=mse_norm)
