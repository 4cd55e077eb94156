"""Exponential-decay fitters for recorded transients.

Both fitters use variable projection: for any trial set of time
constants the amplitudes are a linear least-squares solve, so the
nonlinear search runs only over log time constants (positivity for
free).  The two-term fitter is a damped Gauss-Newton loop restarted
from a grid of time-constant pairs; the best residual wins.  Closely
spaced pairs are collapsed to a single-term fit and flagged degenerate
rather than reported as two meaningless components.

Amplitudes are referred to the first sample of the trace time base.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import minimize_scalar

from .trace import Trace

__all__ = ["SingleExpFit", "DoubleExpFit", "fit_single_exp", "fit_double_exp"]

# Multi-start grid for the two-term fitter (seconds).
TAU_START_GRID = (0.5e-3, 1e-3, 2e-3, 4e-3, 8e-3)
DEGENERATE_RATIO = 1.05
MAX_ITER = 40


@dataclass(frozen=True)
class SingleExpFit:
    """Result of fitting amplitude * exp(-t / tau) + known baseline."""

    amplitude: float
    tau: float
    residual_rms: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class DoubleExpFit:
    """Result of fitting i1 exp(-t/tau1) + i2 exp(-t/tau2), tau1 <= tau2."""

    i1: float
    tau1: float
    i2: float
    tau2: float
    residual_rms: float
    converged: bool
    iterations: int
    degenerate: bool = False

    def __post_init__(self):
        if np.isfinite(self.tau1) and np.isfinite(self.tau2) and self.tau1 > self.tau2:
            raise ValueError("component ordering violated: tau1 must be <= tau2")

    def to_record(self) -> dict:
        """JSON-ready record with unit-suffixed keys."""
        return {
            "i1_A": self.i1,
            "tau1_s": self.tau1,
            "i2_A": self.i2,
            "tau2_s": self.tau2,
            "residual_rms_A": self.residual_rms,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _tau_bounds(t: np.ndarray) -> tuple[float, float]:
    dt = t[1] - t[0]
    span = t[-1] - t[0]
    return dt / 20.0, 100.0 * span


def fit_single_exp(trace: Trace, baseline: float = 0.0) -> SingleExpFit:
    """Least-squares fit of A exp(-t/tau) + baseline with baseline known.

    The amplitude is solved analytically for every trial tau, so the
    search is one-dimensional in log tau.  An all-zero (or constant)
    trace is unidentifiable and returned flagged instead of raising.
    """
    t = trace.times()
    if len(t) < 8:
        raise ValueError("need at least 8 samples to fit")
    y = trace.samples - baseline
    if np.max(np.abs(y)) == 0.0:
        return SingleExpFit(0.0, float("nan"), 0.0, False, 0)

    t_rel = t - t[0]
    lo, hi = _tau_bounds(t)

    def rss_of_logtau(logtau: float) -> float:
        e = np.exp(-t_rel / np.exp(logtau))
        a = (y @ e) / (e @ e)
        r = y - a * e
        return float(r @ r)

    res = minimize_scalar(
        rss_of_logtau,
        bounds=(np.log(lo), np.log(hi)),
        method="bounded",
        options={"xatol": 1e-10, "maxiter": 500},
    )
    logtau = _polish_logtau(float(res.x), t_rel, y, np.log(lo), np.log(hi))
    tau = float(np.exp(logtau))
    e = np.exp(-t_rel / tau)
    amplitude = float((y @ e) / (e @ e))
    r = y - amplitude * e
    residual_rms = float(np.sqrt(r @ r / len(y)))
    # Pinned at a search bound means the decay is not resolvable in-window.
    at_bound = min(logtau - np.log(lo), np.log(hi) - logtau) < 1e-6
    converged = bool(res.success) and not at_bound
    return SingleExpFit(amplitude, tau, residual_rms, converged, int(res.nfev))


def _polish_logtau(logtau: float, t_rel: np.ndarray, y: np.ndarray, lo_l: float, hi_l: float):
    """Newton-polish the 1-D projected objective to machine precision.

    Derivative-free minimization bottoms out near sqrt(eps); a few Newton
    steps on the analytic gradient of the projected sum of squares push
    the root to full precision.
    """
    theta = logtau

    def grad(th: float) -> float:
        tau = np.exp(th)
        e = np.exp(-t_rel / tau)
        w = (t_rel / tau) * e
        u, v = y @ e, e @ e
        du, dv = y @ w, 2.0 * (e @ w)
        return -(2.0 * u * du * v - u * u * dv) / (v * v)

    h = 1e-7
    for _ in range(60):
        g = grad(theta)
        gp = (grad(theta + h) - grad(theta - h)) / (2.0 * h)
        if gp == 0.0 or not np.isfinite(gp):
            break
        step = g / gp
        new = float(np.clip(theta - step, lo_l, hi_l))
        if abs(new - theta) < 1e-15:
            theta = new
            break
        theta = new
    return theta


def _project_residual(t_rel: np.ndarray, y: np.ndarray, taus: np.ndarray):
    """QR-based variable projection: amplitudes, residual, and RSS."""
    basis = np.exp(-t_rel[:, None] / taus[None, :])
    q, rmat = np.linalg.qr(basis)
    qty = q.T @ y
    try:
        a = np.linalg.solve(rmat, qty)
    except np.linalg.LinAlgError:
        a, *_ = np.linalg.lstsq(basis, y, rcond=None)
    r = y - basis @ a
    return a, basis, q, rmat, r, float(r @ r)


def _vp_jacobian(t_rel, taus, a, basis, q, rmat, r):
    """Full variable-projection Jacobian (both Golub-Pereyra terms)."""
    d = a[None, :] * (t_rel[:, None] / taus[None, :]) * basis
    jac = d - q @ (q.T @ d)
    # second term: Q R^-T diag(D_k^T r); each column derivative touches
    # only its own basis column
    dtr = np.array([(t_rel / taus[k]) * basis[:, k] @ r for k in range(len(taus))])
    try:
        w = np.linalg.solve(rmat.T, np.diag(dtr))
        jac = jac + q @ w
    except np.linalg.LinAlgError:
        pass
    return jac


def _polish_pair(t_rel, y, theta, lo_l, hi_l):
    """Refine each log time constant by a bounded 1-D search in turn.

    Robust finisher for valleys where the joint step stalls (one
    component pinned at a bound, strongly correlated pairs).  Returns
    the polished parameters and the largest coordinate movement.
    """
    theta = theta.copy()
    moved = 0.0
    for k in (0, 1):
        other = theta[1 - k]

        def rss_k(th):
            pair = np.array([th, other]) if k == 0 else np.array([other, th])
            return _project_residual(t_rel, y, np.exp(pair))[-1]

        lo_b = max(lo_l, theta[k] - 0.7)
        hi_b = min(hi_l, theta[k] + 0.7)
        res = minimize_scalar(
            rss_k, bounds=(lo_b, hi_b), method="bounded", options={"xatol": 1e-12}
        )
        moved = max(moved, abs(float(res.x) - theta[k]))
        theta[k] = float(res.x)
    return theta, moved


def _lm_refine(t_rel: np.ndarray, y: np.ndarray, logtau0: np.ndarray, lo: float, hi: float):
    """Damped Gauss-Newton on log time constants, amplitudes projected out.

    Uses the projected (Kaufman) Jacobian: the part of each sensitivity
    column already spanned by the basis is removed, since the amplitude
    re-solve absorbs it.
    """
    lo_l, hi_l = np.log(lo), np.log(hi)
    theta = np.clip(logtau0, lo_l, hi_l)
    taus = np.exp(theta)
    a, basis, q, rmat, r, rss = _project_residual(t_rel, y, taus)
    yty = float(y @ y)
    lam = 1e-3
    iterations = 0
    converged = False
    for iterations in range(1, MAX_ITER + 1):
        if rss <= 1e-28 * yty:
            converged = True
            break
        jac = _vp_jacobian(t_rel, taus, a, basis, q, rmat, r)
        g = jac.T @ r
        h = jac.T @ jac
        accepted = False
        for _ in range(20):
            try:
                step = np.linalg.solve(h + lam * np.diag(np.diag(h)) + 1e-300 * np.eye(2), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = np.clip(theta + step, lo_l, hi_l)
            step_size = float(np.max(np.abs(trial - theta)))
            taus_t = np.exp(trial)
            a_t, basis_t, q_t, rmat_t, r_t, rss_t = _project_residual(t_rel, y, taus_t)
            if rss_t <= rss:
                theta, taus, a, basis, q, rmat, r, rss = (
                    trial,
                    taus_t,
                    a_t,
                    basis_t,
                    q_t,
                    rmat_t,
                    r_t,
                    rss_t,
                )
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                if step_size < 3e-14:
                    converged = True
                break
            lam *= 10.0
        if not accepted or converged:
            converged = converged or accepted
            break
    return theta, a, rss, iterations, converged


def fit_double_exp(trace: Trace) -> DoubleExpFit:
    """Two-term exponential fit with multi-start and honest flags.

    Starts from all pairs of the fixed time-constant grid plus a pair
    bracketing the single-term estimate; the lowest-residual solution is
    kept.  If the two recovered time constants differ by less than
    5 percent the model is not identifiable as two terms: the fit
    collapses to the single-term solution with i2 = 0 and the result is
    flagged degenerate.
    """
    t = trace.times()
    if len(t) < 12:
        raise ValueError("need at least 12 samples to fit two terms")
    y = np.asarray(trace.samples, dtype=float)
    t_rel = t - t[0]
    lo, hi = _tau_bounds(t)

    single = fit_single_exp(trace, baseline=0.0)
    if np.max(np.abs(y)) == 0.0:
        return DoubleExpFit(0.0, float("nan"), 0.0, float("nan"), 0.0, False, 0, True)

    starts = [np.log(np.array(pair)) for pair in combinations(TAU_START_GRID, 2)]
    if np.isfinite(single.tau):
        ts = float(np.clip(single.tau, lo * 2, hi / 2))
        starts.append(np.log(np.array([ts / 3.0, ts * 3.0])))

    best = None
    total_iter = 0
    yty = float(y @ y)
    consensus = 0
    for theta0 in starts:
        theta, a, rss, iters, conv = _lm_refine(t_rel, y, theta0, lo, hi)
        total_iter += iters
        if best is not None and abs(rss - best[2]) <= 1e-4 * max(rss, best[2]):
            consensus += 1
        else:
            consensus = 0
        if best is None or rss < best[2]:
            best = (theta, a, rss, conv)
        if best[2] <= 1e-24 * yty:
            break  # at the floating-point floor; later starts cannot beat it
        if consensus >= 3:
            break  # repeated starts agree on the optimum
    theta, a, rss, conv = best

    # Coordinate polish certifies (and, for pinned or strongly correlated
    # pairs, completes) convergence; a large final movement means the
    # joint loop stalled short of the optimum.
    lo_l, hi_l = np.log(lo), np.log(hi)
    if rss > 1e-24 * yty:
        moved = np.inf
        for _ in range(3):
            theta, moved = _polish_pair(t_rel, y, theta, lo_l, hi_l)
            if moved < 1e-9:
                break
        a, _, _, _, _, rss = _project_residual(t_rel, y, np.exp(theta))
        conv = bool(moved < 1e-6)
    taus = np.exp(theta)
    residual_rms = float(np.sqrt(rss / len(y)))

    ratio = float(max(taus) / min(taus))
    # A vanishing amplitude on one term means the data cannot support a
    # second component any more than overlapping time constants can.
    amp_floor = 1e-6 * float(np.max(np.abs(a))) if np.any(a != 0.0) else 0.0
    if ratio < DEGENERATE_RATIO or float(np.min(np.abs(a))) <= amp_floor:
        tau = single.tau if np.isfinite(single.tau) else float(min(taus))
        return DoubleExpFit(
            single.amplitude,
            tau,
            0.0,
            tau,
            single.residual_rms,
            single.converged,
            total_iter,
            True,
        )

    order = np.argsort(taus)
    taus, a = taus[order], a[order]
    return DoubleExpFit(
        float(a[0]),
        float(taus[0]),
        float(a[1]),
        float(taus[1]),
        residual_rms,
        bool(conv),
        total_iter,
        False,
    )
