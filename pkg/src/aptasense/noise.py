"""Input-referred current-noise model for the two readout modes.

In the conventional (feedback) mode the amplifier voltage noise reaches
the working electrode through the cell impedance, which shrinks as
1/(2 pi f c_dl); the input-referred density therefore rises as f^2 and
peaks where it crosses the flat conveyor term:

    feedback:     S(f) = n1 (2 pi f c_dl)^2 (8 k T gamma / gm1)
                       + n2 (4 k T gamma gm2) (1 + f_corner / f)
    sample-hold:  S(f) = n2 (4 k T gamma gm2) (1 + f_corner / f)

Holding the electrode potentials on capacitors removes the feedback
amplifiers during recording, so the cell-dependent term disappears and
the density is independent of c_dl.  Flicker noise enters as a 1/f
multiplier on the flat term with a measured ~300 Hz corner.

Sizing: making the two feedback-mode terms cross at omega_peak requires
gm1 = (2 / gm2) (omega_peak c_dl)^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cell import ElectrochemicalCell
from .constants import BOLTZMANN, T_REF
from .trace import Trace

__all__ = [
    "NoiseBudget",
    "NoisePsd",
    "default_budget",
    "input_referred_psd",
    "required_gm1",
    "integrated_rms",
    "synthesize_noise",
    "psd_on_grid",
]

MODES = ("feedback", "sample_hold")


@dataclass(frozen=True)
class NoiseBudget:
    """Lumped noise parameters of the readout chain.

    gm1 : S, input devices of the feedback amplifiers
    gm2 : S, current-conveyor devices
    n1, n2 : counts of voltage- and current-noise contributors (>= 1)
    gamma : technology noise factor
    temp : K
    flicker_corner : Hz (0 disables flicker)
    mode : "feedback" or "sample_hold"
    """

    gm1: float = 26.4e-3
    gm2: float = 30e-6
    n1: int = 3
    n2: int = 3
    gamma: float = 1.0
    temp: float = T_REF
    flicker_corner: float = 300.0
    mode: str = "sample_hold"

    def __post_init__(self):
        if not (self.gm1 > 0 and self.gm2 > 0):
            raise ValueError("gm1 and gm2 must be > 0")
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("n1 and n2 must be >= 1")
        if not self.temp > 0:
            raise ValueError("temp must be > 0")
        if self.flicker_corner < 0:
            raise ValueError("flicker_corner must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    def with_mode(self, mode: str) -> "NoiseBudget":
        return replace(self, mode=mode)


@dataclass(frozen=True)
class NoisePsd:
    """One-sided PSD samples (A^2/Hz) on a strictly increasing grid."""

    grid: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float).copy()
        d = np.asarray(self.density, dtype=float).copy()
        if len(g) != len(d):
            raise ValueError("grid and density must have equal length")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(d < 0):
            raise ValueError("density must be >= 0")
        g.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "density", d)

    def to_csv(self, path) -> None:
        """Write the `f_Hz,psd_A2Hz` schema."""
        lines = ["f_Hz,psd_A2Hz"]
        for f, s in zip(self.grid, self.density):
            lines.append(f"{float(f)!r},{float(s)!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def default_budget(mode: str = "sample_hold") -> NoiseBudget:
    return NoiseBudget(mode=mode)


def cell_coupled_term(f, budget: NoiseBudget, cell: ElectrochemicalCell):
    """Feedback-path density n1 (2 pi f c_dl)^2 (8kT gamma / gm1)."""
    f = np.asarray(f, dtype=float)
    kt = BOLTZMANN * budget.temp
    return budget.n1 * (2.0 * np.pi * f * cell.c_dl) ** 2 * (8.0 * kt * budget.gamma / budget.gm1)


def conveyor_term(budget: NoiseBudget) -> float:
    """Flat conveyor density n2 (4kT gamma gm2), flicker excluded."""
    return budget.n2 * 4.0 * BOLTZMANN * budget.temp * budget.gamma * budget.gm2


def input_referred_psd(f, budget: NoiseBudget, cell: ElectrochemicalCell):
    """One-sided input-referred current-noise density at f (Hz), A^2/Hz."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be > 0")
    flat = conveyor_term(budget) * (1.0 + budget.flicker_corner / f)
    if budget.mode == "sample_hold":
        out = flat + np.zeros_like(f)
    else:
        out = cell_coupled_term(f, budget, cell) + flat
    return float(out) if out.ndim == 0 else out


def required_gm1(c_dl: float, gm2: float, omega_peak: float) -> float:
    """Feedback-amplifier gm that places the PSD crossover at omega_peak.

    gm1 = (2 / gm2) * (omega_peak * c_dl)^2, from equating the
    cell-coupled and conveyor terms with equal contributor counts.
    """
    if not (c_dl > 0 and gm2 > 0 and omega_peak > 0):
        raise ValueError("c_dl, gm2 and omega_peak must all be > 0")
    return (2.0 / gm2) * (omega_peak * c_dl) ** 2


def integrated_rms(
    budget: NoiseBudget,
    cell: ElectrochemicalCell,
    bw: float,
    f_min: float = 1.0,
) -> float:
    """Brick-wall integrated noise sqrt(int_{f_min}^{bw} S df), A rms.

    Closed form: the flat term integrates to S0 (bw - f_min), flicker to
    S0 f_c ln(bw / f_min), and the f^2 term to A (bw^3 - f_min^3) / 3.
    bw <= f_min returns 0.
    """
    if not bw > 0:
        raise ValueError("bw must be > 0")
    if bw <= f_min:
        return 0.0
    s0 = conveyor_term(budget)
    total = s0 * (bw - f_min)
    if budget.flicker_corner > 0:
        total += s0 * budget.flicker_corner * np.log(bw / f_min)
    if budget.mode == "feedback":
        a = cell_coupled_term(1.0, budget, cell)  # density coefficient at 1 Hz
        total += a * (bw**3 - f_min**3) / 3.0
    return float(np.sqrt(total))


def psd_on_grid(
    budget: NoiseBudget,
    cell: ElectrochemicalCell,
    f_min: float = 1.0,
    f_max: float = 2500.0,
    n_points: int = 512,
) -> NoisePsd:
    """Evaluate the model PSD on a log-spaced grid."""
    grid = np.logspace(np.log10(f_min), np.log10(f_max), n_points)
    return NoisePsd(grid=grid, density=input_referred_psd(grid, budget, cell))


def synthesize_noise(psd: NoisePsd, n: int, dt: float, seed) -> Trace:
    """Time-domain realization whose expected periodogram matches `psd`.

    White Gaussian spectral coefficients are shaped by the target density
    (linearly interpolated onto the FFT grid; held at the lowest grid
    value below it, zero above it) and inverse-transformed.  The result
    is zero-mean and deterministic for a fixed seed.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    fs = 1.0 / dt
    if fs / 2.0 < psd.grid[-1] * (1.0 - 1e-12):
        raise ValueError(
            f"PSD is undersampled: Nyquist {fs / 2.0:g} Hz < grid max {psd.grid[-1]:g} Hz"
        )
    rng = np.random.default_rng(seed)
    freqs = np.fft.rfftfreq(n, dt)
    s = np.interp(freqs, psd.grid, psd.density, left=float(psd.density[0]), right=0.0)
    s[0] = 0.0  # zero-mean realization
    scale = np.sqrt(s * fs * n / 2.0)
    re = rng.standard_normal(len(freqs))
    im = rng.standard_normal(len(freqs))
    spec = scale * (re + 1j * im) / np.sqrt(2.0)
    spec[0] = 0.0
    if n % 2 == 0:
        spec[-1] = scale[-1] * re[-1]  # Nyquist bin is real
    x = np.fft.irfft(spec, n)
    return Trace(t0=0.0, dt=dt, samples=x)
