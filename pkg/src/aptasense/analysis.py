"""Signal analysis: drift-canceling differencing, binding-curve
calibration, correlation-based error compensation, averaging, and the
detection-limit figure.

The two-frequency differencing normalizes each series to its own
baseline mean and subtracts, so a common multiplicative drift applied to
both inputs cancels exactly.  The compensation step z-scores the
per-cycle (time constant, amplitude) features, diagonalizes their 2x2
covariance, and keeps the rotated coordinate orthogonal to the dominant
common-mode direction; held-potential error moves both features along
that dominant direction while leaving the orthogonal score nearly
untouched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

__all__ = [
    "FeatureSeries",
    "PcaModel",
    "LangmuirFit",
    "kdm",
    "fit_langmuir",
    "pca_fit",
    "pca_apply",
    "boxcar",
    "lod",
    "detrend_linear",
]


@dataclass(frozen=True)
class FeatureSeries:
    """Per-cycle fitted features on a strictly increasing time base."""

    timestamps: np.ndarray = field(repr=False)
    tau1: np.ndarray = field(repr=False)
    i1: np.ndarray = field(repr=False)
    tau2: np.ndarray = field(repr=False)
    i2: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = len(self.timestamps)
        for name in ("tau1", "i1", "tau2", "i2"):
            if len(getattr(self, name)) != n:
                raise ValueError("all feature columns must share one length")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        for name in ("timestamps", "tau1", "i1", "tau2", "i2"):
            a = np.asarray(getattr(self, name), dtype=float).copy()
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return len(self.timestamps)

    def pairs(self) -> np.ndarray:
        """(tau1, i1) feature pairs, shape (n, 2)."""
        return np.column_stack([self.tau1, self.i1])

    def kinetics_pairs(self) -> np.ndarray:
        """Per-cycle (tau, amplitude) of the dominant-amplitude component.

        On recorded cycles the reporter decay carries nearly all of the
        amplitude; the other term parks either the capacitive residue or
        the leakage pseudo-constant, depending on which the fit chose.
        Selecting by amplitude keeps the kinetics feature stable across
        cycles either way.
        """
        take_second = np.abs(self.i2) > np.abs(self.i1)
        tau = np.where(take_second, self.tau2, self.tau1)
        amp = np.where(take_second, self.i2, self.i1)
        return np.column_stack([tau, amp])

    def to_csv(self, path) -> None:
        """Write the `cycle,tau1_s,i1_A,tau2_s,i2_A` schema."""
        lines = ["cycle,tau1_s,i1_A,tau2_s,i2_A"]
        for k in range(len(self)):
            lines.append(
                f"{k},{float(self.tau1[k])!r},{float(self.i1[k])!r},"
                f"{float(self.tau2[k])!r},{float(self.i2[k])!r}"
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def kdm(
    series_hi: Sequence[float],
    series_lo: Sequence[float],
    baseline_points: int | None = None,
):
    """Difference of baseline-normalized signal series.

    Each series x becomes (x - m0) / m0 with m0 the mean over the
    baseline window (first 10 percent of the points unless
    `baseline_points` is given); the output is hi - lo.  Scaling both
    inputs by a common factor leaves the output unchanged.
    """
    hi = np.asarray(series_hi, dtype=float)
    lo = np.asarray(series_lo, dtype=float)
    if hi.shape != lo.shape or hi.ndim != 1:
        raise ValueError("series must be 1-D with aligned time bases")
    if baseline_points is None:
        baseline_points = max(1, int(round(0.1 * len(hi))))
    if not 1 <= baseline_points <= len(hi):
        raise ValueError("baseline window must fit inside the series")
    m_hi = hi[:baseline_points].mean()
    m_lo = lo[:baseline_points].mean()
    if m_hi == 0.0 or m_lo == 0.0:
        raise ValueError("baseline mean is zero; cannot normalize")
    return (hi - m_hi) / m_hi - (lo - m_lo) / m_lo


@dataclass(frozen=True)
class LangmuirFit:
    """Saturating binding-curve fit s_max * c / (c + k_d)."""

    s_max: float
    k_d: float
    residual_rms: float
    identifiable: bool

    @property
    def slope_at_zero(self) -> float:
        """Analytic low-concentration sensitivity s_max / k_d."""
        return self.s_max / self.k_d


def fit_langmuir(points: Sequence[tuple[float, float]]) -> LangmuirFit:
    """Least-squares fit of a saturating binding curve.

    Needs at least 3 distinct concentrations.  A flat (all-equal) signal
    carries no binding information and is returned flagged rather than
    raising.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(np.unique(pts[:, 0])) < 3:
        raise ValueError("need (c, signal) pairs at >= 3 distinct concentrations")
    c, s = pts[:, 0], pts[:, 1]
    if np.ptp(s) == 0.0:
        return LangmuirFit(0.0, float("nan"), 0.0, False)

    def model(cc, s_max, k_d):
        return s_max * cc / (cc + k_d)

    smax0 = float(np.max(np.abs(s)) * 1.2) or 1.0
    half = np.abs(s) >= 0.5 * np.max(np.abs(s))
    kd0 = float(np.min(c[half][c[half] > 0], initial=np.max(c) / 2) or np.max(c) / 2)
    sgn = 1.0 if s[np.argmax(c)] >= 0 else -1.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            popt, _ = curve_fit(
                model,
                c,
                sgn * s,
                p0=[smax0, kd0],
                bounds=([0.0, 1e-30], [np.inf, np.inf]),
                maxfev=20000,
            )
    except RuntimeError:
        return LangmuirFit(float("nan"), float("nan"), float("inf"), False)
    s_max, k_d = float(sgn * popt[0]), float(popt[1])
    resid = s - model(c, s_max, k_d)
    return LangmuirFit(s_max, k_d, float(np.sqrt(resid @ resid / len(s))), True)


@dataclass(frozen=True)
class PcaModel:
    """Two-feature whitening rotation.

    means, scales : per-coordinate z-scoring parameters
    rotation : 2x2 orthonormal, columns are the principal axes
    signal_component : index of the compensated (signal) coordinate
    variances : eigenvalues in component order
    """

    means: np.ndarray = field(repr=False)
    scales: np.ndarray = field(repr=False)
    rotation: np.ndarray = field(repr=False)
    signal_component: int
    variances: np.ndarray = field(repr=False)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if np.max(np.abs(r.T @ r - np.eye(2))) > 1e-12:
            raise ValueError("rotation must be orthonormal")
        for name in ("means", "scales", "rotation", "variances"):
            a = np.asarray(getattr(self, name), dtype=float).copy()
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def pca_fit(features) -> PcaModel:
    """Diagonalize the covariance of z-scored (tau, amplitude) pairs.

    Needs >= 10 pairs.  A zero-variance coordinate gets its scale
    clamped to 1 with a warning.  The signal component is the axis with
    the larger absolute loading on the time-constant coordinate; after
    z-scoring the two loadings are equal in magnitude, and the tie goes
    to the smaller-eigenvalue axis, the direction the common-mode
    potential error does not excite.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError("features must have shape (n, 2)")
    if len(x) < 10:
        raise ValueError("need at least 10 feature pairs")
    means = x.mean(axis=0)
    scales = x.std(axis=0, ddof=1)
    degenerate = scales <= 1e-12 * np.maximum(np.abs(means), 1e-300)
    if np.any(degenerate):
        warnings.warn("zero variance in a feature coordinate; scale clamped to 1")
        scales = np.where(degenerate, 1.0, scales)
    z = (x - means) / scales
    cov = np.cov(z, rowvar=False)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending eigenvalues
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    # Sign convention: nonnegative loading on the time-constant axis.
    for k in range(2):
        if eigvecs[0, k] < 0:
            eigvecs[:, k] = -eigvecs[:, k]
    loadings = np.abs(eigvecs[0, :])
    if loadings[0] > loadings[1] * (1.0 + 1e-9):
        signal = 0
    elif loadings[1] > loadings[0] * (1.0 + 1e-9):
        signal = 1
    else:
        signal = int(np.argmin(eigvals))
    return PcaModel(
        means=means,
        scales=scales,
        rotation=eigvecs,
        signal_component=signal,
        variances=eigvals,
    )


def pca_apply(model: PcaModel, features) -> np.ndarray:
    """Scores of feature pairs in model coordinates, shape (n, 2)."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    z = (x - model.means) / model.scales
    return z @ model.rotation


def boxcar(series, n: int):
    """Trailing mean over n points; output length len(series) - n + 1."""
    x = np.asarray(series, dtype=float)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > len(x):
        raise ValueError(f"boxcar window {n} exceeds series length {len(x)}")
    kernel = np.ones(n) / n
    return np.convolve(x, kernel, mode="valid")


def detrend_linear(series):
    """Remove the least-squares line from a series."""
    x = np.asarray(series, dtype=float)
    t = np.arange(len(x), dtype=float)
    coef = np.polyfit(t, x, 1)
    return x - np.polyval(coef, t)


def lod(blank_std: float, slope_at_blank: float) -> float:
    """Detection limit at unit signal-to-noise: blank_std / |slope|.

    A zero slope means no sensitivity; the result is infinite and a
    warning is emitted rather than raising.
    """
    if blank_std < 0:
        raise ValueError("blank_std must be >= 0")
    if slope_at_blank == 0.0:
        if blank_std == 0.0:
            return 0.0
        warnings.warn("no sensitivity: slope at blank is zero, detection limit is infinite")
        return float("inf")
    return blank_std / abs(slope_at_blank)
