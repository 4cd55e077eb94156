"""Excitation protocols and their ideal (front-end-free) responses.

Chronoamperometry pulses the electrode potential between two levels and
records the decaying current after each edge.  The ideal step response is
the sum of the reporter decay, a capacitive charging remnant through the
switch/electrolyte path, and the constant leakage.

Square-wave voltammetry rides a small square wave on a staircase sweep
and reports the difference current at each step.  The difference current
is modeled as the reporter decay sampled one half-cycle after each edge,
weighted by a unit-peak Nernstian window centered on the reporter
midpoint potential: sech^2((E - e_redox) / w) with w = 2RT/F.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import AptamerAssay, ElectrochemicalCell, tau_of_concentration, total_charge
from .constants import NERNST_WIDTH
from .trace import Trace, Voltammogram

__all__ = [
    "CAProtocol",
    "SWVProtocol",
    "default_ca_protocol",
    "default_swv_protocol",
    "generate_ca_potential",
    "simulate_ca_transient",
    "simulate_swv_voltammogram",
    "swv_scan_time",
]

# Residual series resistance of the switch + electrolyte path during
# recording; the charge-pump phase removes most of the capacitive
# transient, this keeps a small remnant in the analysis window.
R_EFF_DEFAULT = 500.0


@dataclass(frozen=True)
class CAProtocol:
    """Chronoamperometry pulse train.

    v1, v2 : V, the two potential levels (|v1 - v2| > 0)
    half_period : s, dwell at each level
    roi : s, analysis window after each edge (roi <= half_period)
    sample_rate : Hz, with sample_rate * roi >= 8
    n_cycles : full v1/v2 cycles
    """

    v1: float = -0.2
    v2: float = -0.4
    half_period: float = 50e-3
    roi: float = 10e-3
    sample_rate: float = 2500.0
    n_cycles: int = 1

    def __post_init__(self):
        if abs(self.v1 - self.v2) == 0:
            raise ValueError("v1 and v2 must differ")
        if not 0 < self.roi <= self.half_period:
            raise ValueError(f"need 0 < roi <= half_period, got roi={self.roi}")
        if self.sample_rate * self.roi < 8:
            raise ValueError("sample_rate * roi must be >= 8 (too few points to fit)")
        if self.n_cycles < 0:
            raise ValueError("n_cycles must be >= 0")

    @property
    def step_amplitude(self) -> float:
        return abs(self.v1 - self.v2)

    @property
    def period(self) -> float:
        return 2.0 * self.half_period


@dataclass(frozen=True)
class SWVProtocol:
    """Square-wave voltammetry sweep parameters."""

    e_start: float = -0.5
    e_end: float = -0.1
    e_step: float = 1e-3
    amplitude: float = 25e-3
    frequency: float = 400.0

    def __post_init__(self):
        if self.e_step == 0:
            raise ValueError("e_step must be nonzero")
        if not self.frequency > 0:
            raise ValueError("frequency must be > 0")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be > 0")


def default_ca_protocol() -> CAProtocol:
    return CAProtocol()


def default_swv_protocol(frequency: float = 400.0) -> SWVProtocol:
    return SWVProtocol(frequency=frequency)


def generate_ca_potential(p: CAProtocol) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-constant pulse waveform as (edge times, levels).

    Levels alternate v1, v2, v1, ... every half_period, first edge at
    t = 0; n_cycles = 0 gives empty arrays.
    """
    n_seg = 2 * p.n_cycles
    t = np.arange(n_seg) * p.half_period
    v = np.where(np.arange(n_seg) % 2 == 0, p.v1, p.v2)
    return t, v.astype(float)


def simulate_ca_transient(
    cell: ElectrochemicalCell,
    assay: AptamerAssay,
    p: CAProtocol,
    c: float,
    r_eff: float = R_EFF_DEFAULT,
    include_leak: bool = True,
) -> Trace:
    """Ideal single-step current response over the analysis window.

    i(t) = reporter decay at tau(c)
         + (step amplitude / r_eff) * exp(-t / (r_eff * c_dl))
         + i_leak (when include_leak)

    with t measured from the step edge; the window is [0, roi] at the
    protocol sample rate.  r_eff -> 0 removes the capacitive term.
    """
    tau0 = tau_of_concentration(c, assay)
    q_t = total_charge(assay)
    n = int(round(p.roi * p.sample_rate))
    t = np.arange(n) / p.sample_rate
    i = (assay.alpha * q_t / tau0) * np.exp(-t / tau0)
    if r_eff > 0:
        tau_c = r_eff * cell.c_dl
        i = i + (p.step_amplitude / r_eff) * np.exp(-t / tau_c)
    if include_leak:
        i = i + cell.i_leak
    return Trace(t0=0.0, dt=1.0 / p.sample_rate, samples=i)


def swv_peak_current(assay: AptamerAssay, frequency: float, c: float) -> float:
    """Peak difference current: reporter decay sampled at t_s = 1/(2 f)."""
    tau = tau_of_concentration(c, assay)
    t_s = 1.0 / (2.0 * frequency)
    return assay.alpha * total_charge(assay) / tau * np.exp(-t_s / tau)


def simulate_swv_voltammogram(
    cell: ElectrochemicalCell,
    assay: AptamerAssay,
    p: SWVProtocol,
    c: float,
) -> Voltammogram:
    """Difference-current voltammogram across the staircase sweep.

    Delta I(E) = sech^2((E - e_redox)/w) * peak current at the protocol
    frequency, so the maximum sits at the reporter midpoint potential.
    """
    step = abs(p.e_step) * np.sign(p.e_end - p.e_start)
    if step == 0:
        raise ValueError("e_start and e_end must differ")
    n = int(round((p.e_end - p.e_start) / step)) + 1
    potentials = p.e_start + step * np.arange(n)
    window = 1.0 / np.cosh((potentials - assay.e_redox) / NERNST_WIDTH) ** 2
    di = window * swv_peak_current(assay, p.frequency, c)
    return Voltammogram(potentials=potentials, delta_currents=di)


def swv_scan_time(p: SWVProtocol) -> float:
    """Sweep duration: one square-wave cycle per staircase step."""
    n_steps = abs(p.e_end - p.e_start) / abs(p.e_step)
    return n_steps / p.frequency
