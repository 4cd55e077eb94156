"""Behavioral simulator and estimation toolkit for aptamer-based
electrochemical drug sensing: cell and binding model, excitation
protocols, readout-chain noise and sample-and-hold behavioral models,
exponential fitters, and the compensated detection-limit pipeline.
"""

from .cell import (
    AptamerAssay,
    ConcentrationPoint,
    ElectrochemicalCell,
    cell_impedance,
    default_assay,
    default_cell,
    langmuir_occupancy,
    redox_transient,
    tau_of_concentration,
    total_charge,
)
from .trace import Trace, Voltammogram, read_trace_csv, read_voltammogram_csv
from .protocol import (
    CAProtocol,
    SWVProtocol,
    default_ca_protocol,
    default_swv_protocol,
    generate_ca_potential,
    simulate_ca_transient,
    simulate_swv_voltammogram,
    swv_scan_time,
)
from .noise import (
    NoiseBudget,
    NoisePsd,
    default_budget,
    input_referred_psd,
    integrated_rms,
    psd_on_grid,
    required_gm1,
    synthesize_noise,
)
from .frontend import (
    FrontendConfig,
    RecordedCycle,
    ShTiming,
    apply_frontend,
    default_frontend,
    default_timing,
    droop_rate,
    duty_cycle,
    power_energy,
    record_cycles,
    we_potential_shift,
)
from .fitting import DoubleExpFit, SingleExpFit, fit_double_exp, fit_single_exp
from .analysis import (
    FeatureSeries,
    LangmuirFit,
    PcaModel,
    boxcar,
    detrend_linear,
    fit_langmuir,
    kdm,
    lod,
    pca_apply,
    pca_fit,
)

__version__ = "0.1.0"
