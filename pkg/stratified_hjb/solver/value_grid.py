"""
Value grid for Stratified HJB.

A ValueGrid holds U on a space-time lattice: one slice per time index, time
index 0 being the terminal cost. It also reads and writes the compact binary
layout:

    4 bytes   magic b"SHJB"
    uint32    format version (2)
    uint32    space dimension N
    uint32    number of time steps n (slices 0..n)
    N times   uint32 node count, float64 lower, float64 upper
    float64   dt
    float64   horizon T, the time of the last slice
    float64   values, row-major over (time, axis 1, ..., axis N)

All integers and floats are little-endian.
"""

import struct
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from stratified_hjb.core.errors import ConfigError

MAGIC = b"SHJB"
FORMAT_VERSION = 2


@dataclass
class ValueGrid:
    """U on a tensor lattice times a uniform time grid."""

    axes: List[np.ndarray]
    times: np.ndarray
    values: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.axes = [np.asarray(axis, dtype=float) for axis in self.axes]
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.times.size, *self.shape)
        if self.values.shape != expected:
            raise ValueError(f"Values have shape {self.values.shape}, expected {expected}")

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(axis.size for axis in self.axes)

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def dx(self) -> float:
        return float(self.axes[0][1] - self.axes[0][0])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def lower(self) -> np.ndarray:
        return np.array([axis[0] for axis in self.axes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([axis[-1] for axis in self.axes])

    def nodes(self) -> np.ndarray:
        """Lattice nodes in row-major order, shape (n_nodes, N)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def slice(self, n: int) -> np.ndarray:
        return self.values[n]

    def interpolator(self, n: int) -> RegularGridInterpolator:
        return RegularGridInterpolator(tuple(self.axes), self.values[n], method="linear",
                                       bounds_error=False, fill_value=None)

    def interpolate(self, points: np.ndarray, n: int) -> np.ndarray:
        """Multilinear interpolation of slice n at points, clamped to the lattice box."""
        points = np.clip(np.atleast_2d(points), self.lower, self.upper)
        return self.interpolator(n)(points)

    def value_at(self, points: np.ndarray, t: float) -> np.ndarray:
        """U at (points, t), multilinear in space and linear in time."""
        position = np.clip((t - self.times[0]) / self.dt, 0.0, self.steps) if self.steps else 0.0
        low = int(np.floor(position))
        high = min(low + 1, self.steps)
        weight = position - low
        first = self.interpolate(points, low)
        if weight == 0.0 or high == low:
            return first
        return (1.0 - weight) * first + weight * self.interpolate(points, high)

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns x1..xN, t, value; time-major, nodes row-major."""
        nodes = self.nodes()
        count = nodes.shape[0]
        data = {f"x{i + 1}": np.tile(nodes[:, i], self.times.size) for i in range(self.dimension)}
        data["t"] = np.repeat(self.times, count)
        data["value"] = self.values.reshape(self.times.size, count).reshape(-1)
        return pd.DataFrame(data)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, metadata: Dict[str, Any] = None) -> "ValueGrid":
        """Inverse of to_frame."""
        space_columns = sorted((c for c in frame.columns if c.startswith("x")), key=lambda c: int(c[1:]))
        if not space_columns or "t" not in frame.columns or "value" not in frame.columns:
            raise ConfigError("grid", "CSV grid needs columns x1..xN, t and value")
        axes = [np.unique(frame[column].to_numpy(dtype=float)) for column in space_columns]
        times = np.unique(frame["t"].to_numpy(dtype=float))
        ordered = frame.sort_values(["t", *space_columns], kind="stable")
        shape = (times.size, *(axis.size for axis in axes))
        if len(ordered) != int(np.prod(shape)):
            raise ConfigError("grid", f"CSV grid has {len(ordered)} rows, a full lattice needs {int(np.prod(shape))}")
        values = ordered["value"].to_numpy(dtype=float).reshape(shape)
        return cls(axes=axes, times=times, values=values, metadata=dict(metadata or {}))

    def to_bytes(self) -> bytes:
        header = [MAGIC, struct.pack("<III", FORMAT_VERSION, self.dimension, self.steps)]
        for axis in self.axes:
            header.append(struct.pack("<Idd", axis.size, axis[0], axis[-1]))
        header.append(struct.pack("<dd", self.dt, self.times[-1]))
        return b"".join(header) + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes) -> "ValueGrid":
        if payload[:4] != MAGIC:
            raise ConfigError("grid", "Not a binary value grid (bad magic)")
        version, dimension, steps = struct.unpack_from("<III", payload, 4)
        if version != FORMAT_VERSION:
            raise ConfigError("grid", f"Unsupported binary grid version {version}")
        offset = 16
        axes = []
        for _ in range(dimension):
            count, lower, upper = struct.unpack_from("<Idd", payload, offset)
            offset += struct.calcsize("<Idd")
            axes.append(np.linspace(lower, upper, count))
        dt, horizon = struct.unpack_from("<dd", payload, offset)
        offset += 16
        shape = (steps + 1, *(axis.size for axis in axes))
        values = np.frombuffer(payload, dtype="<f8", offset=offset, count=int(np.prod(shape)))
        times = np.linspace(0.0, horizon, steps + 1)
        return cls(axes=axes, times=times, values=values.reshape(shape).astype(float),
                   metadata={"dx": float(axes[0][1] - axes[0][0]), "dt": dt, "steps": steps})

    def write_binary(self, path: str) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def read_binary(cls, path: str) -> "ValueGrid":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())
