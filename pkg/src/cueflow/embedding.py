"""Delay embedding of target/source series into history matrices.

A history vector at time t stacks the d past samples
``[x(t - delta), x(t - 2*delta), ..., x(t - d*delta)]``; the current sample
never appears in its own history.  Multichannel rows are concatenated whole,
lag by lag, so channels vary fastest within each lag block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .timeseries import TimeSeries

_LAG_RTOL = 1e-9


@dataclass(frozen=True)
class EmbeddingSpec:
    """Embedding order ``d``, lag spacing ``delta_s`` (s), and sample step ``dt`` (s).

    ``delta_s`` must be an integer multiple of ``dt`` (to 1e-9 relative);
    the integer ratio is exposed as :attr:`stride`.
    """

    d: int
    delta_s: float
    dt: float

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 1:
            raise DataFormatError(f"embedding order d must be a positive integer, got {self.d}")
        if not (np.isfinite(self.delta_s) and self.delta_s > 0):
            raise DataFormatError(f"delta_s must be positive, got {self.delta_s}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DataFormatError(f"dt must be positive, got {self.dt}")
        stride = round(self.delta_s / self.dt)
        if stride < 1 or abs(stride * self.dt - self.delta_s) > _LAG_RTOL * max(self.delta_s, self.dt):
            raise DataFormatError(
                f"delta_s={self.delta_s} is not an integer multiple of dt={self.dt}"
            )
        object.__setattr__(self, "d", int(self.d))

    @property
    def stride(self) -> int:
        """Lag spacing in samples."""
        return round(self.delta_s / self.dt)

    @property
    def horizon(self) -> int:
        """Samples of history consumed before the first usable row: ``d * stride``."""
        return self.d * self.stride


@dataclass(frozen=True)
class EmbeddedDataset:
    """Aligned regression blocks produced by :func:`embed`.

    targets : (T, Dx) current target samples
    target_hist : (T, d*Dx) past target samples, lags delta..d*delta
    source_hist : (T, d*Dy) past source samples, same lag schedule
    times : (T,) timestamps of the target rows
    """

    targets: np.ndarray
    target_hist: np.ndarray
    source_hist: np.ndarray
    times: np.ndarray
    spec: EmbeddingSpec

    def __post_init__(self) -> None:
        n = self.targets.shape[0]
        for name in ("target_hist", "source_hist", "times"):
            if getattr(self, name).shape[0] != n:
                raise DataFormatError(f"{name} rows do not match targets rows")

    @property
    def n_rows(self) -> int:
        return self.targets.shape[0]

    @property
    def joint_hist(self) -> np.ndarray:
        """Target history with source history appended column-wise."""
        return np.hstack([self.target_hist, self.source_hist])


def _lag_block(data: np.ndarray, d: int, stride: int) -> np.ndarray:
    n = data.shape[0]
    off = d * stride
    cols = [data[off - j * stride: n - j * stride] for j in range(1, d + 1)]
    return np.hstack(cols)


def embed(target: TimeSeries, source: TimeSeries, spec: EmbeddingSpec) -> EmbeddedDataset:
    """Build aligned (targets, target_hist, source_hist) blocks.

    Both series must share ``dt`` (1e-9 relative) and length.  The first
    ``d * stride`` samples are consumed as history, so the output has
    ``N - d * stride`` rows; shorter inputs are an error.
    """
    if abs(target.dt - spec.dt) > _LAG_RTOL * max(target.dt, spec.dt):
        raise DataFormatError(f"target dt={target.dt} does not match spec dt={spec.dt}")
    if abs(source.dt - target.dt) > _LAG_RTOL * max(source.dt, target.dt):
        raise DataFormatError(f"source dt={source.dt} does not match target dt={target.dt}")
    n = target.n_samples
    if source.n_samples != n:
        raise DataFormatError(
            f"target has {n} samples but source has {source.n_samples}"
        )
    off = spec.horizon
    if n <= off:
        raise DataFormatError(
            f"series too short to embed: need more than {off} samples, got {n}"
        )
    return EmbeddedDataset(
        targets=target.data[off:],
        target_hist=_lag_block(target.data, spec.d, spec.stride),
        source_hist=_lag_block(source.data, spec.d, spec.stride),
        times=target.times[off:],
        spec=spec,
    )
