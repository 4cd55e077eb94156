import numpy as np
import pytest

from aptasense.cell import ElectrochemicalCell, default_assay, default_cell
from aptasense.fitting import fit_double_exp
from aptasense.frontend import (
    FrontendConfig,
    ShTiming,
    _adc_digitize,
    apply_frontend,
    default_frontend,
    default_timing,
    droop_rate,
    duty_cycle,
    power_energy,
    record_cycles,
    we_potential_shift,
)
from aptasense.noise import NoiseBudget
from aptasense.protocol import CAProtocol, default_ca_protocol
from aptasense.trace import Trace

CELL = default_cell()
ASSAY = default_assay()
PROTO = default_ca_protocol()
TIMING = default_timing()


def quiet_frontend(**kw):
    """Config with error sources off and quantization disabled."""
    base = dict(emi_vpp=0.0, z_in=0.0, adc_bits=None)
    base.update(kw)
    return FrontendConfig(**base)


class TestDutyCycle:
    def test_default_schedule(self):
        assert duty_cycle(ShTiming(1e-3, 0.4e-3, 0.1e-3, 100e-3)) == pytest.approx(
            0.015, rel=1e-12
        )

    def test_long_period_limit(self):
        assert duty_cycle(ShTiming(period=1e6)) == pytest.approx(1.5e-3 / 1e6, rel=1e-12)

    def test_full_period_phases_rejected(self):
        with pytest.raises(ValueError):
            ShTiming(t_track=1.0 / 3, t_pump=1.0 / 3, t_settle=1.0 / 3, period=1.0)


class TestDroopAndShift:
    def test_droop_quoted_value(self):
        assert droop_rate(2e-9, 10e-9) == pytest.approx(0.2, rel=1e-12)

    def test_zero_leakage(self):
        assert droop_rate(0.0, 10e-9) == 0.0

    def test_droop_scales_inverse_capacitance(self):
        assert droop_rate(2e-9, 100e-9) == pytest.approx(0.02, rel=1e-12)

    def test_shift_near_quoted(self):
        shift = we_potential_shift(200e-9, 16e3)
        assert shift == pytest.approx(3.2e-3, rel=1e-12)
        assert abs(shift - 3.3e-3) / 3.3e-3 < 0.05

    def test_shift_sign_symmetry(self):
        assert we_potential_shift(-200e-9, 16e3) == -we_potential_shift(200e-9, 16e3)
        assert we_potential_shift(0.0, 16e3) == 0.0


class TestAdc:
    def test_quantization_step(self):
        cfg = FrontendConfig(adc_full_scale=2e-6, adc_bits=10)
        assert cfg.quantization_step == pytest.approx(1.953125e-9, rel=1e-12)

    def test_dc_code_independent_of_window_phase(self):
        cfg = FrontendConfig(adc_t_int=50e-6, adc_bits=10, mirror_ratio=1, adc_full_scale=2e-6)
        dt = 5e-6
        dc = 123.4e-9 * np.ones(400)
        codes = []
        for phase in range(5):
            tr, _ = _adc_digitize(phase * dt, dt, dc[phase : phase + 300], cfg)
            codes.append(tr.samples.copy())
        for c in codes[1:]:
            assert np.array_equal(codes[0][:50], c[:50])

    def test_clipping_flagged(self):
        cfg = FrontendConfig(adc_full_scale=2e-6, adc_bits=10, mirror_ratio=8)
        tr, clipped = _adc_digitize(0.0, 5e-6, 5e-6 * np.ones(10), cfg)
        assert clipped
        assert np.all(np.abs(tr.samples) <= cfg.adc_full_scale / cfg.mirror_ratio * 1.001)

    def test_window_must_align_with_grid(self):
        cfg = FrontendConfig(adc_t_int=50e-6)
        with pytest.raises(ValueError):
            _adc_digitize(0.0, 7e-6, np.ones(100), cfg)


class TestApplyFrontend:
    def test_degenerate_pass_through(self):
        # no sampling error, no noise, no impedance drift, no quantization:
        # output is ideal + droop ramp current + leakage, exactly
        cfg = quiet_frontend(adc_t_int=5e-6)
        t = 0.5e-3 + np.arange(1900) * 5e-6
        ideal = 200e-9 * np.exp(-t / 3e-3)
        base = Trace(t0=float(t[0]), dt=5e-6, samples=ideal)
        out = apply_frontend([base], cfg, TIMING, None, CELL, ASSAY, 0.0, seed=0)
        assert len(out) == 1
        droop_current = CELL.c_dl * droop_rate(CELL.i_leak, CELL.c_dl)
        expected = ideal + droop_current + CELL.i_leak
        assert np.max(np.abs(out[0].trace.samples - expected)) == 0.0
        assert out[0].dv_held == 0.0
        assert not out[0].clipped

    def test_tau_multiplier_bounds(self):
        # 3 mVpp error with the Butler-Volmer slope bounds the per-cycle
        # time-constant multiplier to exp(+-19.46 * 0.0015)
        cfg = quiet_frontend(emi_vpp=3e-3)
        cycles = record_cycles(
            CELL, ASSAY, PROTO, TIMING, cfg, None, 0.0, 100, seed=3, sim_rate=200e3, r_eff=0.0
        )
        taus = []
        for cyc in cycles:
            fit = fit_double_exp(cyc.trace)
            taus.append(min(fit.tau1, fit.tau2) if not fit.degenerate else fit.tau1)
        mult = np.asarray(taus) / 3e-3
        lo, hi = np.exp(-19.46 * 1.5e-3), np.exp(19.46 * 1.5e-3)
        assert np.all(mult >= lo * 0.999)
        assert np.all(mult <= hi * 1.001)
        assert lo == pytest.approx(0.971, abs=5e-4)
        assert hi == pytest.approx(1.030, abs=5e-4)

    def test_deterministic_per_seed(self):
        cfg = default_frontend()
        budget = NoiseBudget(mode="sample_hold")
        a = record_cycles(CELL, ASSAY, PROTO, TIMING, cfg, budget, 0.5e-3, 5, seed=11)
        b = record_cycles(CELL, ASSAY, PROTO, TIMING, cfg, budget, 0.5e-3, 5, seed=11)
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.trace.samples, cb.trace.samples)
            assert ca.dv_held == cb.dv_held
        c = record_cycles(CELL, ASSAY, PROTO, TIMING, cfg, budget, 0.5e-3, 5, seed=12)
        assert not np.array_equal(a[0].trace.samples, c[0].trace.samples)

    def test_zero_error_zero_noise_has_zero_tau_variance(self):
        cfg = quiet_frontend()
        cycles = record_cycles(
            CELL, ASSAY, PROTO, TIMING, cfg, None, 0.0, 20, seed=5, r_eff=0.0
        )
        taus = []
        for cyc in cycles:
            fit = fit_double_exp(cyc.trace)
            taus.append(min(fit.tau1, fit.tau2))
        assert np.std(taus) <= 1e-9 * np.mean(taus)

    def test_tau_variance_nondecreasing_in_emi(self):
        stds = []
        for emi in (0.0, 1e-3, 3e-3, 6e-3):
            cfg = quiet_frontend(emi_vpp=emi)
            cycles = record_cycles(
                CELL, ASSAY, PROTO, TIMING, cfg, None, 0.0, 40, seed=9, r_eff=0.0
            )
            taus = []
            for c in cycles:
                fit = fit_double_exp(c.trace)
                taus.append(min(fit.tau1, fit.tau2))
            stds.append(np.std(taus))
        assert all(b >= a for a, b in zip(stds, stds[1:]))

    def test_dv_held_within_bounds(self):
        cfg = FrontendConfig(emi_vpp=3e-3)
        cycles = record_cycles(CELL, ASSAY, PROTO, TIMING, cfg, None, 0.0, 50, seed=21)
        dv = np.array([c.dv_held for c in cycles])
        assert np.all(np.abs(dv) <= 1.5e-3)
        assert np.ptp(dv) > 1e-3  # actually spread out

    def test_mismatched_time_bases_rejected(self):
        cfg = default_frontend()
        a = Trace(t0=0.0, dt=5e-6, samples=np.ones(100))
        b = Trace(t0=1e-3, dt=5e-6, samples=np.ones(100))
        with pytest.raises(ValueError):
            apply_frontend([a, b], cfg, TIMING, None, CELL, ASSAY, 0.0, seed=0)


class TestPowerEnergy:
    def test_sample_hold_acquisition(self):
        p, e = power_energy("sample_hold", 0.1, default_frontend())
        assert p == pytest.approx(0.22e-3, rel=1e-12)
        assert e == pytest.approx(22e-6, rel=1e-12)

    def test_one_second_average(self):
        _, e = power_energy("sample_hold", 1.0, default_frontend())
        assert e == pytest.approx(0.22e-3, rel=1e-12)

    def test_feedback_long_scan(self):
        cfg = FrontendConfig(p_active=6.64e-3)
        _, e = power_energy("feedback", 8.0, cfg)
        assert e == pytest.approx(53.1e-3, rel=1e-3)
        assert abs(e - 50e-3) / 50e-3 < 0.1

    def test_power_ratio(self):
        cfg = default_frontend()
        assert cfg.p_active / cfg.p_sh == pytest.approx(23.9, abs=0.05)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            power_energy("standby", 1.0, default_frontend())
