"""Behavioral model of the sample-and-hold readout chain.

Per acquisition cycle the chain: draws the realized held-potential error
(bounded, uniform over the peak-to-peak spread), rescales the reporter
time constant through the exponential potential sensitivity of the ET
kinetics, adds the droop ramp current and the leakage, adds a noise
realization synthesized from the configured PSD, applies a single-pass
correction for the finite recording-phase input impedance (the decaying
current drags the working-electrode potential, modulating the kinetics
once more), then boxcar-integrates over the converter window and
quantizes.  Everything is deterministic for a fixed seed; cycles use
independently derived child seeds so they can be generated concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cell import AptamerAssay, ElectrochemicalCell, tau_of_concentration, total_charge
from .noise import NoiseBudget, psd_on_grid, synthesize_noise
from .protocol import CAProtocol, R_EFF_DEFAULT
from .trace import Trace

__all__ = [
    "ShTiming",
    "FrontendConfig",
    "RecordedCycle",
    "default_timing",
    "default_frontend",
    "duty_cycle",
    "droop_rate",
    "we_potential_shift",
    "apply_frontend",
    "record_cycles",
    "power_energy",
    "write_cycles_csv",
]


@dataclass(frozen=True)
class ShTiming:
    """Phase schedule of one acquisition cycle (seconds).

    t_track : amplifiers on, switches closed, potentials re-established
    t_pump : charge-pump switches closed after the potential step
    t_settle : linear settling before the hold opens
    period : full cycle duration
    """

    t_track: float = 1e-3
    t_pump: float = 0.4e-3
    t_settle: float = 0.1e-3
    period: float = 100e-3

    def __post_init__(self):
        for name in ("t_track", "t_pump", "t_settle", "period"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.t_track + self.t_pump + self.t_settle >= self.period:
            raise ValueError("active phases must sum to less than the period")

    @property
    def recording_start(self) -> float:
        """Time after the potential edge at which the hold phase begins."""
        return self.t_pump + self.t_settle


@dataclass(frozen=True)
class FrontendConfig:
    """Recording-chain parameters.

    z_in : ohms, open-loop input impedance during recording
    i_bias : A, conveyor bias current
    c1, c2 : F, hold capacitors at the reference and working electrodes
    emi_vpp : V, peak-to-peak held-potential error per cycle (>= 0)
    bv_slope : 1/V, kinetics sensitivity to potential error
    adc_t_int : s, converter integration window
    adc_full_scale : A, converter full scale (after mirror gain)
    adc_bits : resolution; None disables quantization
    mirror_ratio : current-mirror gain ahead of the converter
    p_active, p_sh : W, power in feedback and sample-hold operation
    """

    z_in: float = 16e3
    i_bias: float = 2e-6
    c1: float = 1e-6
    c2: float = 40e-12
    emi_vpp: float = 3e-3
    bv_slope: float = 19.46
    adc_t_int: float = 50e-6
    adc_full_scale: float = 2e-6
    adc_bits: int | None = 10
    mirror_ratio: int = 8
    p_active: float = 5.25e-3
    p_sh: float = 0.22e-3

    def __post_init__(self):
        for name in (
            "i_bias",
            "c1",
            "c2",
            "bv_slope",
            "adc_t_int",
            "adc_full_scale",
            "p_active",
            "p_sh",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.z_in < 0 or self.emi_vpp < 0:
            raise ValueError("z_in and emi_vpp must be >= 0")
        if self.adc_bits is not None and self.adc_bits < 1:
            raise ValueError("adc_bits must be >= 1 or None")
        if self.mirror_ratio < 1:
            raise ValueError("mirror_ratio must be >= 1")

    @property
    def quantization_step(self) -> float:
        """Converter step in amperes at the converter input."""
        if self.adc_bits is None:
            return 0.0
        return self.adc_full_scale / 2**self.adc_bits


@dataclass(frozen=True)
class RecordedCycle:
    """One digitized acquisition with its realized sampling error."""

    trace: Trace
    dv_held: float
    droop_slope: float
    clipped: bool = False


def default_timing() -> ShTiming:
    return ShTiming()


def default_frontend() -> FrontendConfig:
    return FrontendConfig()


def duty_cycle(t: ShTiming) -> float:
    """Fraction of the period the amplifiers are powered."""
    return (t.t_track + t.t_pump + t.t_settle) / t.period


def droop_rate(i_leak: float, c_dl: float) -> float:
    """Held-potential droop i_leak / c_dl in V/s."""
    if not c_dl > 0:
        raise ValueError("c_dl must be > 0")
    return i_leak / c_dl


def we_potential_shift(delta_i: float, z_in: float) -> float:
    """Working-electrode potential shift delta_i * z_in (volts)."""
    return delta_i * z_in


def _adc_digitize(t0: float, dt: float, samples: np.ndarray, cfg: FrontendConfig):
    """Boxcar-integrate over converter windows, then quantize.

    Window values are means over consecutive blocks; timestamps are the
    window starts, so a block of one sample is a pass-through.  Returns
    (trace, clipped).
    """
    k = int(round(cfg.adc_t_int / dt))
    if k < 1 or abs(k * dt - cfg.adc_t_int) > 1e-9 * cfg.adc_t_int:
        raise ValueError(
            f"adc_t_int {cfg.adc_t_int:g} s must be an integer multiple of the sample step {dt:g} s"
        )
    n_win = len(samples) // k
    if n_win < 1:
        raise ValueError("trace shorter than one converter window")
    means = samples[: n_win * k].reshape(n_win, k).mean(axis=1)
    clipped = False
    if cfg.adc_bits is not None:
        lsb = cfg.quantization_step
        codes = np.rint(means * cfg.mirror_ratio / lsb)
        code_max = 2**cfg.adc_bits
        clipped = bool(np.any(np.abs(codes) > code_max))
        codes = np.clip(codes, -code_max, code_max)
        means = codes * lsb / cfg.mirror_ratio
    return Trace(t0=t0, dt=k * dt, samples=means), clipped


def apply_frontend(
    ideal: Sequence[Trace],
    cfg: FrontendConfig,
    timing: ShTiming,
    budget: NoiseBudget | None,
    cell: ElectrochemicalCell,
    assay: AptamerAssay,
    concentration: float,
    seed,
) -> list[RecordedCycle]:
    """Run ideal per-cycle transients through the recording chain.

    `ideal` traces share one time base (times measured from the
    potential edge) and contain the reporter and capacitive terms only;
    the chain itself adds the droop ramp current and the leakage.  The
    target concentration sets the nominal reporter time constant that
    the held-potential error perturbs each cycle.
    """
    if not ideal:
        return []
    t0, dt, n = ideal[0].t0, ideal[0].dt, len(ideal[0])
    for tr in ideal:
        if tr.t0 != t0 or tr.dt != dt or len(tr) != n:
            raise ValueError("ideal cycles must share one time base")
    if cfg.adc_t_int > timing.period:
        raise ValueError("adc_t_int must not exceed the acquisition period")

    t = ideal[0].times()
    tau0 = tau_of_concentration(concentration, assay)
    amp0 = assay.alpha * total_charge(assay) / tau0
    redox0 = amp0 * np.exp(-t / tau0)
    droop_slope = droop_rate(cell.i_leak, cell.c_dl)
    droop_current = cell.c_dl * droop_slope

    psd = None
    if budget is not None:
        f_max = min(2500.0, 0.5 / dt)
        psd = psd_on_grid(budget, cell, f_min=1.0, f_max=f_max, n_points=256)

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(len(ideal))
    cycles: list[RecordedCycle] = []
    for tr, child in zip(ideal, children):
        rng = np.random.default_rng(child)
        dv_held = float(rng.uniform(-cfg.emi_vpp / 2.0, cfg.emi_vpp / 2.0))
        tau_c = tau0 * float(np.exp(-cfg.bv_slope * dv_held))
        redox_c = assay.alpha * total_charge(assay) / tau_c * np.exp(-t / tau_c)
        i = tr.samples - redox0 + redox_c + droop_current + cell.i_leak
        if psd is not None:
            i = i + synthesize_noise(psd, n, dt, rng).samples
        if cfg.z_in > 0:
            dv_drift = we_potential_shift(i - i[0], cfg.z_in)
            i = i - redox_c + redox_c * np.exp(-cfg.bv_slope * dv_drift)
        digitized, clipped = _adc_digitize(t0, dt, i, cfg)
        cycles.append(
            RecordedCycle(trace=digitized, dv_held=dv_held, droop_slope=droop_slope, clipped=clipped)
        )
    return cycles


def record_cycles(
    cell: ElectrochemicalCell,
    assay: AptamerAssay,
    protocol: CAProtocol,
    timing: ShTiming,
    cfg: FrontendConfig,
    budget: NoiseBudget | None,
    concentration: float,
    n_cycles: int,
    seed,
    sim_rate: float = 200e3,
    r_eff: float = R_EFF_DEFAULT,
) -> list[RecordedCycle]:
    """Simulate n_cycles digitized acquisitions at one concentration.

    The ideal transient is generated on a fine grid over the recording
    window [recording_start, roi] and pushed through `apply_frontend`.
    """
    start = timing.recording_start
    if start >= protocol.roi:
        raise ValueError("recording starts after the analysis window ends")
    n = int(round((protocol.roi - start) * sim_rate))
    t = start + np.arange(n) / sim_rate
    tau0 = tau_of_concentration(concentration, assay)
    ideal = assay.alpha * total_charge(assay) / tau0 * np.exp(-t / tau0)
    if r_eff > 0:
        ideal = ideal + protocol.step_amplitude / r_eff * np.exp(-t / (r_eff * cell.c_dl))
    base = Trace(t0=float(t[0]), dt=1.0 / sim_rate, samples=ideal)
    return apply_frontend(
        [base] * n_cycles, cfg, timing, budget, cell, assay, concentration, seed
    )


def power_energy(mode: str, acquisition_time: float, cfg: FrontendConfig) -> tuple[float, float]:
    """(power, energy) for an acquisition in the given operating mode."""
    if not acquisition_time > 0:
        raise ValueError("acquisition_time must be > 0")
    if mode == "feedback":
        p = cfg.p_active
    elif mode == "sample_hold":
        p = cfg.p_sh
    else:
        raise ValueError(f"mode must be 'feedback' or 'sample_hold', got {mode!r}")
    return p, p * acquisition_time


def write_cycles_csv(cycles: Sequence[RecordedCycle], path) -> None:
    """Write the `cycle,t_s,i_A,dv_held_V,clipped` schema."""
    from pathlib import Path

    lines = ["cycle,t_s,i_A,dv_held_V,clipped"]
    for k, cyc in enumerate(cycles):
        flag = int(cyc.clipped)
        dv = float(cyc.dv_held)
        for tt, ii in zip(cyc.trace.times(), cyc.trace.samples):
            lines.append(f"{k},{float(tt)!r},{float(ii)!r},{dv!r},{flag}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
