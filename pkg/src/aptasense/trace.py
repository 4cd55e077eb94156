"""Uniformly sampled current transients and voltammograms.

These are the value objects every simulator emits and every fitter
consumes.  Both are immutable after construction; the sample arrays are
marked read-only so traces can be shared across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Trace", "Voltammogram", "read_trace_csv", "read_voltammogram_csv"]


def _readonly(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Trace:
    """Current transient on a uniform time base.

    Attributes
    ----------
    t0 : float
        Time of the first sample, seconds.
    dt : float
        Sample spacing, seconds (> 0).
    samples : ndarray
        Current samples in amperes; finite values only.
    """

    t0: float
    dt: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", _readonly(self.samples))
        if not self.dt > 0:
            raise ValueError(f"Trace.dt must be > 0, got {self.dt}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("Trace.samples must be finite")

    def __len__(self) -> int:
        return len(self.samples)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))

    def to_csv(self, path) -> None:
        """Write the `t_s,i_A` schema (locale-independent, round-trip exact)."""
        lines = ["t_s,i_A"]
        for t, i in zip(self.times(), self.samples):
            lines.append(f"{float(t)!r},{float(i)!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Voltammogram:
    """Difference-current curve versus staircase potential."""

    potentials: np.ndarray = field(repr=False)
    delta_currents: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "potentials", _readonly(self.potentials))
        object.__setattr__(self, "delta_currents", _readonly(self.delta_currents))
        if len(self.potentials) != len(self.delta_currents):
            raise ValueError("potentials and delta_currents must have equal length")
        dE = np.diff(self.potentials)
        if len(dE) and not (np.all(dE > 0) or np.all(dE < 0)):
            raise ValueError("potentials must be strictly monotone")

    def __len__(self) -> int:
        return len(self.potentials)

    def peak(self) -> tuple[float, float]:
        """(potential, difference current) at the curve maximum."""
        k = int(np.argmax(self.delta_currents))
        return float(self.potentials[k]), float(self.delta_currents[k])

    def to_csv(self, path) -> None:
        """Write the `e_V,di_A` schema."""
        lines = ["e_V,di_A"]
        for e, di in zip(self.potentials, self.delta_currents):
            lines.append(f"{float(e)!r},{float(di)!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_two_column_csv(path, header: str) -> tuple[np.ndarray, np.ndarray]:
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not text or text[0].strip() != header:
        raise ValueError(f"{path}: expected header {header!r}")
    a, b = [], []
    for line in text[1:]:
        x, y = line.split(",")
        a.append(float(x))
        b.append(float(y))
    return np.asarray(a), np.asarray(b)


def read_trace_csv(path) -> Trace:
    """Load a `t_s,i_A` file; the time base must be uniform."""
    t, i = _read_two_column_csv(path, "t_s,i_A")
    if len(t) < 2:
        raise ValueError(f"{path}: need at least 2 samples")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * max(abs(dt[0]), 1e-30):
        raise ValueError(f"{path}: time base is not uniform")
    return Trace(t0=float(t[0]), dt=float(dt[0]), samples=i)


def read_voltammogram_csv(path) -> Voltammogram:
    e, di = _read_two_column_csv(path, "e_V,di_A")
    return Voltammogram(potentials=e, delta_currents=di)
