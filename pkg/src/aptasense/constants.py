"""Physical constants used across the models (SI units)."""

from scipy.constants import Boltzmann as BOLTZMANN          # J/K
from scipy.constants import elementary_charge as ELEMENTARY_CHARGE  # C
from scipy.constants import gas_constant as GAS_CONSTANT    # J/(mol K)
from scipy.constants import physical_constants as _pc

FARADAY = _pc["Faraday constant"][0]  # C/mol

# Reference temperature for thermal-noise and Nernstian-width defaults.
T_REF = 298.0  # K

# Full width of the surface-couple voltammetric window at T_REF: 2RT/F.
NERNST_WIDTH = 2.0 * GAS_CONSTANT * T_REF / FARADAY  # V, ~51.4 mV
