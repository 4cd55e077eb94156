"""Electrochemical cell and aptamer population model.

The cell is a series resistance plus interfacial double-layer capacitance
with a constant leakage current through the passivation layer.  The
aptamer population maps target concentration to electron-transfer
kinetics: binding follows a Langmuir isotherm, and the ensemble time
constant interpolates between the unbound and bound values weighted by
occupancy.  The ideal reporter current is a charge-conserving exponential
decay: i(t) = (alpha * Q_T / tau0) * exp(-t / tau0), whose integral is
always alpha * Q_T regardless of tau0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import ELEMENTARY_CHARGE
from .trace import Trace

__all__ = [
    "ElectrochemicalCell",
    "AptamerAssay",
    "ConcentrationPoint",
    "default_cell",
    "default_assay",
    "langmuir_occupancy",
    "tau_of_concentration",
    "total_charge",
    "cell_impedance",
    "redox_transient",
]

CM2_PER_M2 = 1e4


@dataclass(frozen=True)
class ElectrochemicalCell:
    """Series resistance, double-layer capacitance, and leakage.

    r_s : ohms, >= 0
    c_dl : farads, > 0
    i_leak : amperes, constant background through the passivation pinholes
    """

    r_s: float = 100.0
    c_dl: float = 100e-9
    i_leak: float = 2e-9

    def __post_init__(self):
        if self.r_s < 0:
            raise ValueError(f"r_s must be >= 0, got {self.r_s}")
        if not self.c_dl > 0:
            raise ValueError(f"c_dl must be > 0, got {self.c_dl}")
        if not np.isfinite(self.i_leak):
            raise ValueError("i_leak must be finite")


@dataclass(frozen=True)
class AptamerAssay:
    """Aptamer/reporter population parameters.

    k_d : mol/L, dissociation constant (half-occupancy concentration)
    tau_unbound, tau_bound : s, ensemble ET time constants at zero and
        saturating target concentration; 0 < tau_bound < tau_unbound
    alpha : fraction of reporters that participate in electron transfer
    area : m^2, electrode sensing area
    probe_density : probes per cm^2
    electrons_per_probe : electrons transferred per reporter (2 for
        methylene blue)
    e_redox : V vs RE, reporter midpoint potential
    """

    k_d: float = 0.5e-3
    tau_unbound: float = 3.0e-3
    tau_bound: float = 1.2e-3
    alpha: float = 1.0
    area: float = 0.25e-6
    probe_density: float = 1e12
    electrons_per_probe: int = 2
    e_redox: float = -0.35

    def __post_init__(self):
        if not self.k_d > 0:
            raise ValueError(f"k_d must be > 0, got {self.k_d}")
        if not 0 < self.tau_bound < self.tau_unbound:
            raise ValueError(
                f"need 0 < tau_bound < tau_unbound, got {self.tau_bound}, {self.tau_unbound}"
            )
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.area < 0 or self.probe_density < 0:
            raise ValueError("area and probe_density must be >= 0")
        if self.electrons_per_probe < 1:
            raise ValueError("electrons_per_probe must be >= 1")


@dataclass(frozen=True)
class ConcentrationPoint:
    """A target concentration and its equilibrium occupancy."""

    concentration: float
    occupancy: float

    def __post_init__(self):
        if not 0 <= self.occupancy <= 1:
            raise ValueError(f"occupancy must be in [0, 1], got {self.occupancy}")


def default_cell() -> ElectrochemicalCell:
    return ElectrochemicalCell()


def default_assay() -> AptamerAssay:
    return AptamerAssay()


def langmuir_occupancy(c, k_d: float):
    """Equilibrium bound fraction c / (c + k_d).

    Monotone nondecreasing in c, in [0, 1).  Scalar in, scalar out;
    array in, array out.
    """
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("concentration must be >= 0")
    if not k_d > 0:
        raise ValueError(f"k_d must be > 0, got {k_d}")
    theta = c / (c + k_d)
    return float(theta) if theta.ndim == 0 else theta


def concentration_point(c: float, k_d: float) -> ConcentrationPoint:
    return ConcentrationPoint(concentration=float(c), occupancy=langmuir_occupancy(c, k_d))


def tau_of_concentration(c, assay: AptamerAssay):
    """Ensemble ET time constant at concentration c.

    Occupancy-weighted mixture of the bound and unbound populations:
    tau(c) = tau_unbound - (tau_unbound - tau_bound) * occupancy(c).
    Strictly decreasing in c.
    """
    theta = langmuir_occupancy(c, assay.k_d)
    return assay.tau_unbound - (assay.tau_unbound - assay.tau_bound) * theta


def total_charge(assay: AptamerAssay) -> float:
    """Charge delivered when every reporter transfers all its electrons.

    Q_T = area * probe_density * electrons_per_probe * elementary charge,
    with the density given per cm^2.
    """
    area_cm2 = assay.area * CM2_PER_M2
    return area_cm2 * assay.probe_density * assay.electrons_per_probe * ELEMENTARY_CHARGE


def cell_impedance(f, cell: ElectrochemicalCell):
    """Series R-C impedance r_s + 1 / (j 2 pi f c_dl) at frequency f (Hz)."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be > 0")
    z = cell.r_s + 1.0 / (1j * 2.0 * np.pi * f * cell.c_dl)
    return complex(z) if z.ndim == 0 else z


def redox_transient(t_grid, q_t: float, alpha: float, tau0: float) -> Trace:
    """Ideal reporter current (alpha * q_t / tau0) * exp(-t / tau0).

    The 1/tau0 weighting conserves the transferred charge: the integral
    over t >= 0 equals alpha * q_t for any tau0.  t_grid must be a
    nonnegative, strictly increasing, uniform grid.
    """
    if not tau0 > 0:
        raise ValueError(f"tau0 must be > 0, got {tau0}")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 2:
        raise ValueError("t_grid must be a 1-D grid with >= 2 points")
    if t[0] < 0:
        raise ValueError("t_grid must be nonnegative")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
        raise ValueError("t_grid must be uniform")
    i = (alpha * q_t / tau0) * np.exp(-t / tau0)
    return Trace(t0=float(t[0]), dt=float(dt[0]), samples=i)
