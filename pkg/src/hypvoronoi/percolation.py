"""Voronoi percolation estimators and audits.

Monte-Carlo estimators run each trial on its own lazily sampled plane
(``LocalTessellation`` over a ``SectorField``), so no truncation window is
needed and every event is evaluated exactly.  All parameters ``p`` of one
trial share the same marks, which makes estimates monotone in ``p`` sample
by sample.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .events import (
    AlwaysTrue,
    OneArm,
    OwnerBlack,
    arm_holds,
    arm_thresholds,
    one_arm_window,
    pivotal_count,
)
from .local import LocalTessellation
from .parallel import trial_map
from .sampling import BASE, ColoredConfig, RngStream, SectorField, default_epsilon
from .tessellation import EmptyConfigError, Tessellation, build_delaunay_d2

Z95 = 1.959963984540054


class BracketError(ValueError):
    """The crossing criterion is not bracketed by the search interval."""


class InsufficientDataError(ValueError):
    pass


class UnstableEstimateWarning(UserWarning):
    pass


class DataQualityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EstimateResult:
    """Monte-Carlo mean with ``std_error = sample std / sqrt(trials)``."""

    mean: float
    std_error: float
    trials: int
    ci95: tuple
    seed: int

    @classmethod
    def from_samples(cls, values, seed):
        v = np.asarray(values, dtype=float)
        n = len(v)
        if n == 0:
            raise InsufficientDataError("no samples")
        mean = float(math.fsum(v) / n)
        sd = float(np.std(v, ddof=1)) if n > 1 else 0.0
        se = sd / math.sqrt(n)
        return cls(mean, se, n, (mean - Z95 * se, mean + Z95 * se), int(seed))

    def as_dict(self):
        return {"mean": self.mean, "std_error": self.std_error, "trials": self.trials,
                "ci95": list(self.ci95), "seed": self.seed}


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    slope_ci95: tuple
    points: tuple = ()


@dataclass
class SharpnessCheck:
    """Grid values ``f[n][i] = f_n(grid[i])`` and ``sigma[n][i] = sum_{k<n} f[k][i]``."""

    grid: list
    f: np.ndarray
    violations: list = field(default_factory=list)
    sigma: np.ndarray = None
    std_error: np.ndarray = None

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.sigma is None:
            s = np.zeros_like(self.f)
            s[1:] = np.cumsum(self.f[:-1], axis=0)
            self.sigma = s


# --- single configurations ----------------------------------------------------

def _tess(config_or_tess):
    if isinstance(config_or_tess, Tessellation):
        return config_or_tess
    if len(config_or_tess) == 0:
        raise EmptyConfigError("configuration has no nuclei")
    return build_delaunay_d2(config_or_tess)


def one_arm_event(config, p, n):
    """Whether the black cluster of the origin's cell reaches distance ``n`` in a window.

    ``config`` is a ``ColoredConfig`` (d = 2) or its ``Tessellation``.
    Raises ``TruncationError`` when the window does not determine the answer.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    return one_arm_window(_tess(config), p, n)


def black_clusters(tess, p):
    """Connected components of the black nuclei (sorted lists, sorted by first member)."""
    tess = _tess(tess)
    black = np.asarray(tess.config.marks) <= p
    idx = np.flatnonzero(black)
    if not len(idx):
        return []
    pos = {int(z): i for i, z in enumerate(idx)}
    rows, cols = [], []
    for z in idx:
        for nb in tess.adjacency[z]:
            if nb in pos:
                rows.append(pos[int(z)])
                cols.append(pos[nb])
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(idx), len(idx)))
    _, labels = connected_components(g, directed=False)
    groups = {}
    for z, lab in zip(idx, labels):
        groups.setdefault(int(lab), []).append(int(z))
    return sorted(groups.values(), key=lambda g: g[0])


def pivotal_set(config, p, event):
    """Nuclei whose colour flip changes ``event`` at ``p`` (window, by re-evaluation)."""
    tess = _tess(config)
    marks = tess.config.marks
    base = event.holds_window(tess, p)
    out = set()
    for z in range(len(marks)):
        if event.holds_window(tess, p, {z: not bool(marks[z] <= p)}) != base:
            out.add(z)
    return out


# --- Monte-Carlo machinery ------------------------------------------------------

def trial_engine(lam, epsilon, seed, trial):
    """Lazily sampled plane of one trial."""
    return LocalTessellation(SectorField(lam, epsilon, RngStream(int(seed)).child(BASE, trial)))


def _eps(lam, epsilon):
    return default_epsilon(lam) if epsilon is None else float(epsilon)


def _holds_trial(t, lam, eps, seed, p, ns):
    L = trial_engine(lam, eps, seed, t)
    return [bool(arm_holds(L, p, n)) for n in ns]


def _grid_holds_trial(t, lam, eps, seed, ps, ns):
    L = trial_engine(lam, eps, seed, t)
    return [[bool(arm_holds(L, p, n)) for n in ns] for p in ps]


def _threshold_trial(t, lam, eps, seed, ns, p_cap):
    L = trial_engine(lam, eps, seed, t)
    o = L.owner(np.array([1.0, 0.0, 0.0]))
    return L.mark(o), arm_thresholds(L, ns, p_cap=p_cap)


def estimate_theta(lam, p, n, trials, seed, epsilon=None, workers=None):
    """Monte-Carlo estimate of the one-arm probability ``theta_n(p)``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    res = trial_map(_holds_trial, trials, (lam, _eps(lam, epsilon), seed, p, [n]), workers)
    return EstimateResult.from_samples([r[0] for r in res], seed)


def theta_curve(lam, p, ns, trials, seed, epsilon=None, workers=None):
    """``theta_n(p)`` for several ``n`` from the same trials."""
    res = np.array(trial_map(_holds_trial, trials, (lam, _eps(lam, epsilon), seed, p, list(ns)), workers))
    return [(n, EstimateResult.from_samples(res[:, i], seed)) for i, n in enumerate(ns)]


def arm_threshold_samples(lam, ns, trials, seed, p_cap=1.0, epsilon=None, workers=None):
    """Per-trial owner marks and arm thresholds ``p*_n`` (``inf`` above ``p_cap``)."""
    res = trial_map(_threshold_trial, trials, (lam, _eps(lam, epsilon), seed, list(ns), p_cap), workers)
    marks = np.array([r[0] for r in res])
    thr = np.array([r[1] for r in res]).reshape(trials, len(ns))
    return marks, thr


def theta_grid(lam, ps, ns, trials, seed, epsilon=None, workers=None):
    """``{(n, p): EstimateResult}`` from one coupled set of trials."""
    _, thr = arm_threshold_samples(lam, ns, trials, seed, max(ps), epsilon, workers)
    return {(n, p): EstimateResult.from_samples(thr[:, i] <= p, seed)
            for i, n in enumerate(ns) for p in ps}


# --- p_c proxy ---------------------------------------------------------------------

@dataclass(frozen=True)
class PcEstimate:
    """Bracketing interval of the finite-size crossing ``p_c(n)`` proxy."""

    lo: float
    hi: float
    n: float
    criterion: str
    at_midpoint: EstimateResult
    trials: int
    seed: int

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    def as_dict(self):
        return {"lo": self.lo, "hi": self.hi, "midpoint": self.midpoint, "n": self.n,
                "criterion": self.criterion, "at_midpoint": self.at_midpoint.as_dict(),
                "trials": self.trials, "seed": self.seed}


def _crossing_value(marks, thr, p, criterion, seed):
    arm = thr <= p
    if criterion == "unconditional":
        return EstimateResult.from_samples(arm, seed)
    black = marks <= p
    nb = int(np.count_nonzero(black))
    if nb == 0:
        return EstimateResult(0.0, 0.0, 0, (0.0, 0.0), int(seed))
    return EstimateResult.from_samples(arm[black], seed)


def estimate_pc(lam, n, trials, p_tolerance=0.01, seed=0, criterion="conditional",
                epsilon=None, workers=None, samples=None):
    """Bisection for the crossing of the proxy criterion at ``1/2``.

    ``criterion="conditional"`` uses ``P(0 <-> S(0, n) | owner of 0 black)``,
    ``"unconditional"`` uses ``theta_n(p)`` itself (which never exceeds
    ``p``, so its crossing lies above ``1/2``).  All bisection levels reuse
    the same coupled trials.  The result is a finite-size proxy, not ``p_c``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if trials < 100:
        raise ValueError("trials must be >= 100")
    if criterion not in ("conditional", "unconditional"):
        raise ValueError(f"unknown criterion {criterion!r}")
    if samples is None:
        marks, thr = arm_threshold_samples(lam, [n], trials, seed, 0.99, epsilon, workers)
    else:
        marks, thr = samples
    thr = thr[:, 0]
    lo, hi = 0.01, 0.99
    if not (_crossing_value(marks, thr, lo, criterion, seed).mean < 0.5
            <= _crossing_value(marks, thr, hi, criterion, seed).mean):
        raise BracketError("criterion not bracketed in [0.01, 0.99]")
    while hi - lo > p_tolerance:
        mid = 0.5 * (lo + hi)
        if _crossing_value(marks, thr, mid, criterion, seed).mean < 0.5:
            lo = mid
        else:
            hi = mid
    est = _crossing_value(marks, thr, 0.5 * (lo + hi), criterion, seed)
    return PcEstimate(lo, hi, float(n), criterion, est, trials, int(seed))


# --- decay and mean-field -----------------------------------------------------------

def fit_decay(theta_estimates):
    """Weighted least squares of ``log theta_n`` on ``n``.

    Weights are inverse delta-method variances ``(se / mean)^2``; points with
    zero mean are dropped.  The slope CI uses the known variances, inflated
    by the reduced chi-square when the fit is worse than the error bars.
    """
    pts = [(float(n), r) for n, r in theta_estimates if r.mean > 0]
    if len(pts) < 4:
        raise InsufficientDataError("need at least 4 estimates with positive mean")
    x = np.array([n for n, _ in pts])
    y = np.log([r.mean for _, r in pts])
    var = np.array([(r.std_error / r.mean) ** 2 for _, r in pts])
    known = bool(np.any(var > 0))
    if known:
        var = np.where(var > 0, var, np.min(var[var > 0]))
        w = 1.0 / var
    else:
        w = np.ones_like(x)
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    slope = float((w * (x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float((w * resid ** 2).sum())
    ss_tot = float((w * (y - ym) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = len(x) - 2
    if known:
        se = math.sqrt(max(1.0, ss_res / dof) / sxx)
    else:
        se = math.sqrt(ss_res / dof / sxx)
    return DecayFit(slope, intercept, float(r2), (slope - Z95 * se, slope + Z95 * se),
                    tuple((float(a), float(b)) for a, b in zip(x, y)))


def mean_field_check(lam, p_grid, n_large, trials, seed, pc, epsilon=None, workers=None):
    """Lower-bound fit ``theta_{n_large}(p) >= c (p - pc)`` over ``p_grid``.

    Returns ``(c_hat, report)``.  ``c_hat`` is the largest ``c`` below every
    grid estimate; ``report["c_lower95"]`` is the same bound using the lower
    CI ends.  If ``theta`` has not stabilised in ``n`` (the ratio of
    ``theta_{n_large}`` to ``theta_{n_large / 2}`` falls below 0.9 at some
    grid point) the fit is refused and ``c_hat`` is ``None``.
    """
    grid = sorted(float(p) for p in p_grid)
    if not grid or grid[0] <= pc or grid[-1] > 1:
        raise ValueError("p_grid must lie in (pc, 1]")
    half = n_large / 2.0
    res = np.array(trial_map(_grid_holds_trial, trials,
                             (lam, _eps(lam, epsilon), seed, grid, [half, n_large]), workers))
    rows = []
    stable = True
    for i, p in enumerate(grid):
        big = EstimateResult.from_samples(res[:, i, 1], seed)
        small = EstimateResult.from_samples(res[:, i, 0], seed)
        ratio = big.mean / small.mean if small.mean > 0 else 0.0
        stable &= ratio >= 0.9
        rows.append({"p": p, "theta": big.as_dict(), "theta_half": small.mean, "ratio": ratio,
                     "c_point": big.mean / (p - pc), "c_point_lower95": big.ci95[0] / (p - pc)})
    report = {"lambda": lam, "n_large": n_large, "pc": pc, "trials": trials, "seed": seed,
              "grid": rows, "stable": bool(stable)}
    if not stable:
        warnings.warn("theta_n has not stabilised in n; refusing the mean-field fit",
                      UnstableEstimateWarning, stacklevel=2)
        report.update(c_hat=None, c_lower95=None, passed=False)
        return None, report
    c_hat = min(r["c_point"] for r in rows)
    c_lo = min(r["c_point_lower95"] for r in rows)
    report.update(c_hat=c_hat, c_lower95=c_lo, passed=bool(c_lo > 0))
    return c_hat, report


# --- audits -------------------------------------------------------------------------

def _russo_trial(t, lam, eps, seed, event, p, dp):
    L = trial_engine(lam, eps, seed, t)
    thr = event.threshold(L, p_cap=p + dp)
    return thr, pivotal_count(L, p, event)


def russo_audit(lam, event, p, dp=0.02, trials=1000, seed=0, epsilon=None, workers=None):
    """Finite-difference derivative of ``P_p(A)`` against the mean pivotal count.

    Both sides come from the same coupled trials.  Passes iff the two 95%
    intervals overlap.
    """
    if not dp > 0:
        raise ValueError("dp must be > 0")
    if p - dp < 0 or p + dp > 1:
        raise ValueError("p +/- dp must stay in [0, 1]")
    res = trial_map(_russo_trial, trials, (lam, _eps(lam, epsilon), seed, event, p, dp), workers)
    thr = np.array([r[0] for r in res])
    piv = np.array([r[1] for r in res], dtype=float)
    dsamp = ((thr <= p + dp).astype(float) - (thr <= p - dp).astype(float)) / (2.0 * dp)
    deriv = EstimateResult.from_samples(dsamp, seed)
    pv = EstimateResult.from_samples(piv, seed)
    overlap = deriv.ci95[0] <= pv.ci95[1] and pv.ci95[0] <= deriv.ci95[1]
    report = {"event": repr(event), "lambda": lam, "p": p, "dp": dp, "trials": trials,
              "seed": seed, "derivative": deriv.as_dict(), "pivotal": pv.as_dict(),
              "pivotal_min": float(piv.min()), "pivotal_max": float(piv.max()),
              "passed": bool(overlap)}
    exact = getattr(event, "exact_probability", None)
    if exact is not None:
        report["exact_derivative"] = (exact(p + dp) - exact(p - dp)) / (2.0 * dp)
    return report


def _fkg_trial(t, lam, eps, seed, a, b, p):
    L = trial_engine(lam, eps, seed, t)
    return bool(a.holds(L, p)), bool(b.holds(L, p))


def fkg_audit(lam, p, event_a, event_b, trials, seed, epsilon=None, workers=None):
    """Estimate ``P(A and B) - P(A) P(B)``; passes iff it is ``>= -3`` standard errors."""
    res = np.array(trial_map(_fkg_trial, trials, (lam, _eps(lam, epsilon), seed, event_a, event_b, p),
                             workers), dtype=float).reshape(trials, 2)
    a, b = res[:, 0], res[:, 1]
    ma, mb = a.mean(), b.mean()
    gap = float((a * b).mean() - ma * mb)
    # delta-method influence function of the covariance estimator
    phi = a * b - a * mb - b * ma
    se = float(np.std(phi, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return {"lambda": lam, "p": p, "event_a": repr(event_a), "event_b": repr(event_b),
            "trials": trials, "seed": seed, "p_a": float(ma), "p_b": float(mb),
            "p_ab": float((a * b).mean()), "gap": gap, "std_error": se,
            "ci95": [gap - Z95 * se, gap + Z95 * se], "passed": bool(gap >= -3.0 * se)}


# --- sharpness differential inequality ------------------------------------------------

def sharpness_grid(lam, grid, n_max, trials, seed, epsilon=None, workers=None):
    """Coupled Monte-Carlo ``theta_n(p)`` for ``n = 0..n_max`` on ``grid``."""
    grid = [float(p) for p in grid]
    ns = list(range(n_max + 1))
    _, thr = arm_threshold_samples(lam, ns, trials, seed, max(grid), epsilon, workers)
    f = np.array([[np.mean(thr[:, n] <= p) for p in grid] for n in ns])
    se = np.sqrt(f * (1 - f) / max(trials - 1, 1))
    return SharpnessCheck(grid, f, std_error=se)


def sharpness_ode_check(check, c, tolerance=None):
    """Flag grid cells where ``f_n' < c n / Sigma_n f_n`` beyond tolerance.

    ``f_n'`` is the central difference at interior grid points.  With
    ``tolerance=None`` and Monte-Carlo input the tolerance is the 95%
    half-width propagated from ``check.std_error``.  The report also gives
    the largest ``c`` without violations and an ``x1`` proxy (largest grid
    ``p`` with ``f_N <= f_{ceil(N/2)} / 2``).
    """
    grid = np.asarray(check.grid, dtype=float)
    h = np.diff(grid)
    if len(grid) < 3:
        raise ValueError("need at least 3 grid points")
    if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
        raise ValueError("grid spacing must be uniform")
    h = float(h[0])
    f, sig = check.f, check.sigma
    nmax = f.shape[0] - 1
    se = check.std_error if check.std_error is not None else np.zeros_like(f)
    fd = (f[:, 2:] - f[:, :-2]) / (2.0 * h)
    fd_se = np.sqrt(se[:, 2:] ** 2 + se[:, :-2] ** 2) / (2.0 * h)
    fi, si, sei = f[:, 1:-1], sig[:, 1:-1], se[:, 1:-1]

    def slack(cc):
        a = np.zeros_like(fi)
        for n in range(1, nmax + 1):
            a[n] = np.where(si[n] > 0, n / np.where(si[n] > 0, si[n], 1.0), 0.0)
        if tolerance is None:
            tol = Z95 * np.sqrt(fd_se ** 2 + (cc * a * sei) ** 2)
        else:
            tol = np.full_like(fi, float(tolerance))
        s = fd - cc * a * fi + tol
        s[0] = np.inf
        return s

    viol = [(n, float(grid[i + 1])) for n, i in zip(*np.nonzero(slack(c) < 0))]
    # largest c with no violations (slack is decreasing in c)
    if np.any(slack(0.0) < 0):
        c_max = 0.0
    else:
        lo, hi = 0.0, 1.0
        while hi < 1e9 and not np.any(slack(hi) < 0):
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.any(slack(mid) < 0):
                hi = mid
            else:
                lo = mid
        c_max = lo
    warn = []
    mono_tol = Z95 * np.sqrt(se[:, 1:] ** 2 + se[:, :-1] ** 2) if tolerance is None else float(tolerance)
    if np.any(np.diff(f, axis=1) < -mono_tol - 1e-12):
        warn.append("f_n is not monotone in p beyond tolerance")
        warnings.warn(warn[-1], DataQualityWarning, stacklevel=2)
    x1 = None
    if nmax >= 2:
        half = math.ceil(nmax / 2)
        decayed = f[nmax] <= 0.5 * f[half]
        if np.any(decayed):
            x1 = float(grid[np.nonzero(decayed)[0][-1]])
    check.violations = viol
    return {"c": c, "violations": [[int(n), p] for n, p in viol], "n_violations": len(viol),
            "c_max": c_max, "x1_proxy": x1, "warnings": warn,
            "grid": grid.tolist(), "f": f.tolist(), "sigma": sig.tolist()}


__all__ = [
    "EstimateResult", "DecayFit", "SharpnessCheck", "PcEstimate", "BracketError",
    "InsufficientDataError", "UnstableEstimateWarning", "DataQualityWarning",
    "one_arm_event", "black_clusters", "pivotal_set", "estimate_theta", "theta_curve",
    "theta_grid", "arm_threshold_samples", "estimate_pc", "fit_decay", "mean_field_check",
    "russo_audit", "fkg_audit", "sharpness_grid", "sharpness_ode_check", "trial_engine",
    "OwnerBlack", "OneArm", "AlwaysTrue", "ColoredConfig",
]
