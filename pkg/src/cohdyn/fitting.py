"""Relaxation-law fitting: power laws, exponential tails, crossovers, peaks.

All fitters are least squares on transformed axes (log-log or semi-log),
optionally weighted by per-point standard errors.  Every fit reports the
window it used; automatic window selection is a separate, logged heuristic
(longest window maximizing R^2 subject to at least MIN_POINTS points).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_POINTS = 8


@dataclass(frozen=True)
class FitResult:
    """Power-law or exponential fit on transformed axes.

    For form="power": y = amplitude * t**(-exponent), exponent > 0 decays.
    For form="exponential": y = amplitude * exp(-t / timescale).
    """

    form: str
    amplitude: float
    exponent: float | None
    timescale: float | None
    window: tuple[float, float]
    r2: float
    amplitude_err: float
    exponent_err: float | None = None
    timescale_err: float | None = None

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == "power":
            return self.amplitude * t ** (-self.exponent)
        return self.amplitude * np.exp(-t / self.timescale)

    def as_dict(self) -> dict:
        return {
            "form": self.form,
            "amplitude": self.amplitude,
            "exponent": self.exponent,
            "timescale": self.timescale,
            "window": list(self.window),
            "r2": self.r2,
            "amplitude_err": self.amplitude_err,
            "exponent_err": self.exponent_err,
            "timescale_err": self.timescale_err,
        }


@dataclass(frozen=True)
class ScalingResult:
    """Log-log slope of a timescale against a size: tau ~ size**exponent."""

    exponent: float
    exponent_err: float
    amplitude: float
    r2: float


def _wls_line(x, y, w):
    """Weighted least squares y = a + b x; returns a, b, var_a, var_b, r2."""
    w = np.asarray(w, dtype=float)
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    sxy = (w * (x - xm) * (y - ym)).sum()
    if sxx == 0:
        raise ValueError("degenerate abscissa in fit window")
    b = sxy / sxx
    a = ym - b * xm
    resid = y - (a + b * x)
    ss_res = (w * resid**2).sum()
    ss_tot = (w * (y - ym) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    # error estimate from residual scatter (independent of weight scale)
    dof = max(len(x) - 2, 1)
    s2 = ss_res / dof
    var_b = s2 / sxx
    var_a = s2 * (1.0 / sw + xm**2 / sxx)
    return a, b, var_a, var_b, r2


def _select(t, y, sigma, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if sigma is None:
        sigma = np.zeros_like(y)
    sigma = np.asarray(sigma, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, y, sigma = t[keep], y[keep], sigma[keep]
    if len(t) < 2:
        raise ValueError("fit window contains fewer than two points")
    return t, y, sigma


def fit_power_law(t, y, sigma=None, window=None, weighted=True) -> FitResult:
    """Least squares on (log t, log y); exponent > 0 means decay."""
    t, y, sigma = _select(t, y, sigma, window)
    if np.any(y <= 0) or np.any(t <= 0):
        raise ValueError("power-law fit requires positive times and values")
    x = np.log(t)
    z = np.log(y)
    if weighted and np.all(sigma > 0):
        w = (y / sigma) ** 2
    else:
        w = np.ones_like(z)
    a, b, var_a, var_b, r2 = _wls_line(x, z, w)
    return FitResult(
        form="power",
        amplitude=math.exp(a),
        exponent=-b,
        timescale=None,
        window=(float(t[0]), float(t[-1])),
        r2=r2,
        amplitude_err=math.exp(a) * math.sqrt(var_a),
        exponent_err=math.sqrt(var_b),
    )


def fit_exponential_tail(t, y, sigma=None, window=None, weighted=True) -> FitResult:
    """Least squares on (t, log y); returns A and tau of A exp(-t/tau)."""
    t, y, sigma = _select(t, y, sigma, window)
    if np.any(y <= 0):
        raise ValueError("exponential fit requires positive values")
    z = np.log(y)
    if weighted and np.all(sigma > 0):
        w = (y / sigma) ** 2
    else:
        w = np.ones_like(z)
    a, b, var_a, var_b, r2 = _wls_line(t, z, w)
    tau = math.inf if b >= 0 else -1.0 / b
    tau_err = math.nan if b >= 0 else math.sqrt(var_b) / b**2
    return FitResult(
        form="exponential",
        amplitude=math.exp(a),
        exponent=None,
        timescale=tau,
        window=(float(t[0]), float(t[-1])),
        r2=r2,
        amplitude_err=math.exp(a) * math.sqrt(var_a),
        timescale_err=tau_err,
    )


def crossover_time(t, y, expfit: FitResult, threshold: float = 0.10):
    """Latest time before the exponential window where the data deviates
    from the fitted exponential by more than ``threshold`` relative error.

    Returns None when no such time exists (pure exponential series).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    before = t < expfit.window[0]
    if not np.any(before):
        return None
    tt, yy = t[before], y[before]
    f = expfit.evaluate(tt)
    dev = np.abs(yy - f) / f
    hits = np.flatnonzero(dev > threshold)
    if hits.size == 0:
        return None
    return float(tt[hits[-1]])


def threshold_time(t, y, eps: float):
    """First grid time with y <= eps; linear interpolation between points.

    Returns None when the series never reaches eps.
    """
    if eps <= 0:
        raise ValueError("threshold must be positive")
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    below = np.flatnonzero(y <= eps)
    if below.size == 0:
        return None
    i = below[0]
    if i == 0:
        return float(t[0])
    t0, t1 = t[i - 1], t[i]
    y0, y1 = y[i - 1], y[i]
    if y0 == y1:
        return float(t1)
    return float(t0 + (y0 - eps) * (t1 - t0) / (y0 - y1))


def moving_average(y, window: int = 3):
    if window <= 1:
        return np.asarray(y, dtype=float)
    kernel = np.ones(window) / window
    pad = window // 2
    yp = np.pad(np.asarray(y, dtype=float), pad, mode="edge")
    return np.convolve(yp, kernel, mode="valid")


def peak_time(t, y, smooth_window: int = 3, plateau_frac: float = 0.05):
    """Interior-maximum time, quadratically refined around the argmax.

    Returns None (sentinel) for plateau-like series: argmax on the
    boundary, or a final value within ``plateau_frac`` of the full rise,
    which is how saturating curves that never fall present themselves.
    """
    t = np.asarray(t, dtype=float)
    ys = moving_average(y, smooth_window)
    i = int(np.argmax(ys))
    if i == 0 or i == len(ys) - 1:
        return None
    rise = ys[i] - ys.min()
    if rise > 0 and (ys[i] - ys[-1]) <= plateau_frac * rise:
        return None
    # quadratic vertex through the three points around the maximum
    y0, y1, y2 = ys[i - 1], ys[i], ys[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return float(t[i])
    shift = 0.5 * (y0 - y2) / denom
    shift = float(np.clip(shift, -1.0, 1.0))
    if shift >= 0:
        return float(t[i] + shift * (t[min(i + 1, len(t) - 1)] - t[i]))
    return float(t[i] + shift * (t[i] - t[i - 1]))


def size_scaling(sizes, timescales, sigma=None) -> ScalingResult:
    """Log-log slope of timescale vs size, with standard error."""
    sizes = np.asarray(sizes, dtype=float)
    taus = np.asarray(timescales, dtype=float)
    if len(sizes) < 3:
        raise ValueError("size scaling needs at least 3 points")
    if np.any(sizes <= 0) or np.any(taus <= 0):
        raise ValueError("size scaling needs positive sizes and timescales")
    x = np.log(sizes)
    z = np.log(taus)
    if sigma is not None and np.all(np.asarray(sigma) > 0):
        w = (taus / np.asarray(sigma, dtype=float)) ** 2
    else:
        w = np.ones_like(z)
    a, b, _, var_b, r2 = _wls_line(x, z, w)
    return ScalingResult(
        exponent=b, exponent_err=math.sqrt(var_b), amplitude=math.exp(a), r2=r2
    )


def auto_window(t, y, sigma, form: str, end: float | None = None,
                n_candidates: int = 30):
    """Longest window maximizing R^2, subject to >= MIN_POINTS points.

    ``end`` caps the window (e.g. at a detected crossover).  Windows whose
    R^2 is within 0.005 of the best are considered ties and the widest one
    wins.  Returns (t_lo, t_hi).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    valid = y > 0
    if form == "power":
        valid &= t > 0
    if end is not None:
        valid &= t <= end
    tv, yv = t[valid], y[valid]
    sv = None if sigma is None else np.asarray(sigma, dtype=float)[valid]
    n = len(tv)
    if n < MIN_POINTS:
        raise ValueError("not enough positive points for window selection")
    fit = fit_power_law if form == "power" else fit_exponential_tail
    lo_cands = np.unique(np.linspace(0, n - MIN_POINTS, n_candidates, dtype=int))
    hi_cands = np.unique(np.linspace(MIN_POINTS - 1, n - 1, n_candidates, dtype=int))
    best = []
    for i in lo_cands:
        for j in hi_cands:
            if j - i + 1 < MIN_POINTS:
                continue
            try:
                r = fit(tv[i:j + 1], yv[i:j + 1],
                        None if sv is None else sv[i:j + 1])
            except ValueError:
                continue
            best.append((r.r2, j - i, (float(tv[i]), float(tv[j]))))
    if not best:
        raise ValueError("no admissible fit window found")
    top = max(r2 for r2, _, _ in best)
    widest = max((item for item in best if item[0] >= top - 0.005),
                 key=lambda item: item[1])
    return widest[2]


def exponential_tail_window(t, y, sigma, noise_factor: float = 10.0):
    """Spec default for the late-time fit: the last decade of times whose
    values still exceed ``noise_factor`` times their standard error."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    ok = (y > noise_factor * sigma) & (y > 0) & (t > 0)
    if not np.any(ok):
        raise ValueError("series is entirely below the noise floor")
    t_last = t[ok].max()
    return (t_last / 10.0, float(t_last))
