"""Post-processing: arc fits, finite-size-scaling collapse, spectra, record statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, FitError
from .records import X_KIND, ZZ_KIND, EntropySeries, MeasurementRecord
from .schedule import PHI, fibonacci_times

CUTOFF = 4


# ------------------------------------------------------------------ entanglement arcs


@dataclass(frozen=True)
class Arc:
    """Ensemble-averaged entropies S(l) (nats) at cuts ``l`` of a periodic chain."""

    L: int
    l: np.ndarray
    S: np.ndarray
    err: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "l", np.asarray(self.l, dtype=float))
        object.__setattr__(self, "S", np.asarray(self.S, dtype=float))
        if self.err is not None:
            object.__setattr__(self, "err", np.asarray(self.err, dtype=float))
        if self.l.shape != self.S.shape:
            raise ConfigError("cut and entropy arrays differ in shape")

    @classmethod
    def from_samples(cls, L: int, cuts, samples: np.ndarray) -> Arc:
        """Mean and standard error over rows of ``samples`` (trajectories x cuts)."""
        samples = np.atleast_2d(np.asarray(samples, float))
        n = samples.shape[0]
        err = samples.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else None
        return cls(L, np.asarray(cuts), samples.mean(axis=0), err)

    @property
    def chord(self) -> np.ndarray:
        """ln[(L/pi) sin(pi l / L)]."""
        return np.log(self.L / np.pi * np.sin(np.pi * self.l / self.L))

    def trimmed(self, cutoff: int = CUTOFF) -> Arc:
        keep = (self.l >= cutoff) & (self.l <= self.L - cutoff)
        return Arc(self.L, self.l[keep], self.S[keep], None if self.err is None else self.err[keep])


def _linear_fit(x: np.ndarray, y: np.ndarray, sigma: np.ndarray | None, design: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted least squares; returns (coefficients, covariance)."""
    if sigma is not None and np.all(sigma > 0):
        w = 1.0 / sigma
        coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
        cov = np.linalg.inv((design * w[:, None] ** 2).T @ design)
        dof = len(y) - design.shape[1]
        chi2 = float(np.sum(((y - design @ coef) * w) ** 2))
        if dof > 0 and chi2 / dof > 1:
            cov = cov * chi2 / dof
        return coef, cov
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    dof = len(y) - design.shape[1]
    resid = y - design @ coef
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    return coef, s2 * np.linalg.inv(design.T @ design)


def fit_cent(arc: Arc | list[Arc], cutoff: int = CUTOFF) -> tuple[float, float]:
    """c_ent from S = (c/3) ln[(L/pi) sin(pi l/L)] + b, cuts l in [cutoff, L - cutoff].

    A list of arcs is fitted jointly with one c and one intercept.
    """
    arcs = [arc] if isinstance(arc, Arc) else list(arc)
    parts = [a.trimmed(cutoff) for a in arcs]
    x = np.concatenate([p.chord for p in parts])
    y = np.concatenate([p.S for p in parts])
    if len(np.unique(np.round(x, 12))) < 2 or sum(len(np.unique(p.l)) for p in parts) < 6:
        raise FitError("arc fit needs at least 6 distinct cuts inside the cutoff window")
    errs = None
    if all(p.err is not None for p in parts):
        errs = np.concatenate([p.err for p in parts])
    design = np.stack([x, np.ones_like(x)], axis=1)
    coef, cov = _linear_fit(x, y, errs, design)
    return 3.0 * float(coef[0]), 3.0 * math.sqrt(max(cov[0, 0], 0.0))


def zero_freq_scaling(amplitudes: dict[int, tuple[float, float]] | dict[int, float]) -> tuple[float, float]:
    """3 x slope of the omega = 0 amplitude (window mean of S) against ln L.

    ``amplitudes`` maps L to the amplitude or to (amplitude, standard error).
    """
    if len(amplitudes) < 3:
        raise FitError("zero_freq_scaling needs at least three system sizes")
    Ls = np.array(sorted(amplitudes), float)
    vals = [amplitudes[int(L)] for L in Ls]
    y = np.array([v[0] if isinstance(v, tuple) else v for v in vals], float)
    e = np.array([v[1] if isinstance(v, tuple) else 0.0 for v in vals], float)
    x = np.log(Ls)
    coef, cov = _linear_fit(x, y, e if np.all(e > 0) else None, np.stack([x, np.ones_like(x)], axis=1))
    return 3.0 * float(coef[0]), 3.0 * math.sqrt(max(cov[0, 0], 0.0))


# ------------------------------------------------------------------ finite-size scaling


@dataclass(frozen=True)
class Curve:
    L: int
    x: np.ndarray
    y: np.ndarray
    err: np.ndarray

    def __post_init__(self):
        order = np.argsort(np.asarray(self.x, float))
        object.__setattr__(self, "x", np.asarray(self.x, float)[order])
        object.__setattr__(self, "y", np.asarray(self.y, float)[order])
        e = np.zeros_like(self.y) if self.err is None else np.asarray(self.err, float)[order]
        object.__setattr__(self, "err", e)


@dataclass(frozen=True)
class CollapseResult:
    tau_c: float
    nu: float
    cost: float
    tau_c_ci: tuple[float, float] = (math.nan, math.nan)
    nu_ci: tuple[float, float] = (math.nan, math.nan)
    n_overlap: int = 0
    bootstrap: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)), repr=False)

    @property
    def tau_c_err(self) -> float:
        return 0.5 * (self.tau_c_ci[1] - self.tau_c_ci[0])

    @property
    def nu_err(self) -> float:
        return 0.5 * (self.nu_ci[1] - self.nu_ci[0])


def collapse_cost(curves: list[Curve], tau_c: float, nu: float, min_overlap: int = 4) -> tuple[float, int]:
    """Houdayer-Hartmann cost of the collapse (x - tau_c) L^{1/nu}.

    Every point is compared with the value interpolated from each other curve whose
    rescaled range brackets it; the residual is weighted by the combined error.
    Returns (cost, number of compared pairs); cost is inf below ``min_overlap``.
    """
    if nu <= 0:
        return math.inf, 0
    scaled = [(c.x - tau_c) * c.L ** (1.0 / nu) for c in curves]
    floor = 1e-12 + 1e-3 * max(float(np.abs(np.concatenate([c.y for c in curves])).max()), 1e-12)
    total, count = 0.0, 0
    for a, (ca, xa) in enumerate(zip(curves, scaled)):
        for b, (cb, xb) in enumerate(zip(curves, scaled)):
            if a == b:
                continue
            inside = (xa >= xb[0]) & (xa <= xb[-1])
            if not inside.any():
                continue
            xi = xa[inside]
            j = np.clip(np.searchsorted(xb, xi) - 1, 0, len(xb) - 2)
            span = xb[j + 1] - xb[j]
            f = np.where(span > 0, (xi - xb[j]) / np.where(span > 0, span, 1.0), 0.0)
            yi = cb.y[j] * (1 - f) + cb.y[j + 1] * f
            ei2 = (cb.err[j] * (1 - f)) ** 2 + (cb.err[j + 1] * f) ** 2
            var = ca.err[inside] ** 2 + ei2 + floor ** 2
            total += float(np.sum((ca.y[inside] - yi) ** 2 / var))
            count += int(inside.sum())
    if count < min_overlap:
        return math.inf, count
    return total / count, count


def _optimize(curves, tau_range, nu_range, grid: int, start=None):
    if start is None:
        taus = np.linspace(*tau_range, grid)
        nus = np.linspace(*nu_range, grid)
        costs = np.array([[collapse_cost(curves, t, n)[0] for n in nus] for t in taus])
        if not np.isfinite(costs).any():
            raise FitError("curves do not overlap after rescaling anywhere in the search box")
        i, j = np.unravel_index(np.nanargmin(np.where(np.isfinite(costs), costs, np.nan)), costs.shape)
        start = (taus[i], nus[j])

    def fun(p):
        t, n = p
        if not (tau_range[0] <= t <= tau_range[1] and nu_range[0] <= n <= nu_range[1]):
            return 1e300
        c = collapse_cost(curves, t, n)[0]
        return c if math.isfinite(c) else 1e300

    res = minimize(fun, np.asarray(start, float), method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 2000})
    best = res.x if res.fun <= fun(start) else np.asarray(start, float)
    return float(best[0]), float(best[1])


def fss_collapse(curves: list[Curve] | dict, tau_range: tuple[float, float], nu_range: tuple[float, float] = (0.3, 4.0),
                 grid: int = 41, n_bootstrap: int = 200, seed: int = 0) -> CollapseResult:
    """Best (tau_c, nu) for y(x, L) = F((x - tau_c) L^{1/nu}) with parametric bootstrap errors.

    ``curves`` is a list of :class:`Curve` or a dict L -> (x, y, err).
    """
    if isinstance(curves, dict):
        curves = [Curve(int(L), *v) for L, v in sorted(curves.items())]
    if len({c.L for c in curves}) < 3:
        raise FitError("finite-size scaling needs at least three system sizes")
    tau_c, nu = _optimize(curves, tau_range, nu_range, grid)
    cost, n = collapse_cost(curves, tau_c, nu)
    if not math.isfinite(cost):
        raise FitError("no overlap at the optimum")
    rng = np.random.default_rng(seed)
    boot = []
    for _ in range(n_bootstrap):
        resampled = [Curve(c.L, c.x, c.y + rng.standard_normal(c.y.size) * c.err, c.err) for c in curves]
        try:
            boot.append(_optimize(resampled, tau_range, nu_range, grid, start=(tau_c, nu)))
        except FitError:
            continue
    boot = np.asarray(boot).reshape(-1, 2)
    if len(boot) >= 10:
        tci = tuple(np.percentile(boot[:, 0], [16, 84]))
        nci = tuple(np.percentile(boot[:, 1], [16, 84]))
    else:
        tci = nci = (math.nan, math.nan)
    return CollapseResult(tau_c, nu, cost, tci, nci, n, boot)


# ------------------------------------------------------------------ Fourier spectra


@dataclass(frozen=True)
class FourierSpectrum:
    """Discrete transform of S(t) on the window; ``amplitude`` is sum_t S(t) e^{-i w t} / N."""

    times: np.ndarray
    signal: np.ndarray
    omega: np.ndarray
    amplitude: np.ndarray

    @property
    def N(self) -> int:
        return int(self.times.size)

    def at(self, omega, taper: str = "rect") -> np.ndarray:
        """Amplitudes at arbitrary frequencies (Hann taper normalized by its sum)."""
        w = np.atleast_1d(np.asarray(omega, float))
        if taper == "rect":
            weights = np.full(self.N, 1.0 / self.N)
        elif taper == "hann":
            h = np.hanning(self.N + 2)[1:-1]
            weights = h / h.sum()
        else:
            raise ConfigError(f"unknown taper {taper!r}")
        phase = np.exp(-1j * np.outer(w, self.times))
        return phase @ (weights * self.signal)

    def parseval_error(self) -> float:
        lhs = float(np.sum(np.abs(self.amplitude) ** 2)) * self.N
        rhs = float(np.sum(self.signal ** 2))
        return abs(lhs - rhs) / max(rhs, 1e-300)


def fourier_spectrum(series: EntropySeries | np.ndarray, window: tuple[int, int], cut: int | None = None,
                     times: np.ndarray | None = None) -> FourierSpectrum:
    """Spectrum of the entropy over t in [t_a, t_b] with frequencies folded into [-pi, pi)."""
    if isinstance(series, EntropySeries):
        times = series.times
        col = series.values[:, 0] if cut is None else series.cut(cut)
    else:
        col = np.asarray(series, float)
        times = np.arange(1, col.size + 1) if times is None else np.asarray(times)
    ta, tb = window
    keep = (times >= ta) & (times <= tb)
    t = np.asarray(times[keep], np.int64)
    if t.size < 64:
        raise ConfigError("Fourier window needs at least 64 samples")
    if t.size != tb - ta + 1 or np.any(np.diff(t) != 1):
        raise ConfigError("Fourier window must be sampled at every integer time")
    x = col[keep]
    N = t.size
    k = np.arange(N)
    amp = np.fft.fft(x) * np.exp(-2j * np.pi * k * ta / N) / N  # phase referenced to absolute time
    omega = 2 * np.pi * k / N
    omega = np.where(omega >= np.pi, omega - 2 * np.pi, omega)
    order = np.argsort(omega)
    return FourierSpectrum(t, x, omega[order], amp[order])


def golden_peaks(spectrum: FourierSpectrum, ns, taper: str = "hann") -> np.ndarray:
    """|amplitude| at omega_n = 2 pi n / phi for each n."""
    ns = np.asarray(ns, float)
    return np.abs(spectrum.at(2 * np.pi * ns / PHI, taper))


def envelope_peaks(ns, amps, bins_per_decade: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Upper envelope: the largest amplitude in each logarithmic bin of n."""
    ns = np.asarray(ns, float)
    amps = np.asarray(amps, float)
    edges = np.logspace(0, math.log10(ns.max()) + 1e-9, int(bins_per_decade * math.log10(ns.max())) + 2)
    idx = np.digitize(ns, edges)
    out_n, out_a = [], []
    for b in np.unique(idx):
        sel = idx == b
        i = np.argmax(amps[sel])
        out_n.append(ns[sel][i])
        out_a.append(amps[sel][i])
    return np.array(out_n), np.array(out_a)


def peak_powerlaw(ns, amps, subset: str = "all") -> tuple[float, float]:
    """alpha and its standard error from |F_n| ~ n^{-alpha} (log-log least squares).

    ``subset``: "all", "fibonacci" (n a Fibonacci number) or "envelope" (log-bin maxima).
    """
    ns = np.asarray(ns, float)
    amps = np.asarray(amps, float)
    if subset == "fibonacci":
        fib = set(fibonacci_times(int(ns.max())))
        keep = np.array([int(n) in fib for n in ns])
        ns, amps = ns[keep], amps[keep]
    elif subset == "envelope":
        ns, amps = envelope_peaks(ns, amps)
    elif subset != "all":
        raise ConfigError(f"unknown subset {subset!r}")
    if ns.size < 4:
        raise FitError("power-law fit needs at least 4 peaks")
    if np.any(amps <= 0):
        raise FitError("non-positive peak amplitude")
    x, y = np.log(ns), np.log(amps)
    coef, cov = _linear_fit(x, y, None, np.stack([x, np.ones_like(x)], axis=1))
    return -float(coef[0]), math.sqrt(max(cov[0, 0], 0.0))


# ------------------------------------------------------------------ measurement records


@dataclass(frozen=True)
class Rate:
    value: float
    err: float
    n: int


def _rate(hits: int, n: int) -> Rate:
    if n == 0:
        return Rate(math.nan, math.nan, 0)
    p = hits / n
    return Rate(p, math.sqrt(max(p * (1 - p), 1.0 / n) / n), n)


def record_pairs(rec: MeasurementRecord, kind: int, pairing: str = "next-of-kind") -> tuple[np.ndarray, np.ndarray]:
    """Outcome pairs (s_t, s_t') per site for the chosen pairing rule.

    ``next-of-kind``: each measurement with the next measurement of the same kind on the
    same slot, whatever lies in between. ``adjacent``: only when the two layers are
    consecutive (t' = t + 1).
    """
    if pairing not in ("next-of-kind", "adjacent"):
        raise ConfigError(f"unknown pairing {pairing!r}")
    sel = rec.kind == kind
    layer, site, s = rec.layer[sel], rec.site[sel], rec.outcome[sel]
    order = np.lexsort((layer, site))
    layer, site, s = layer[order], site[order], s[order]
    same = site[1:] == site[:-1]
    if pairing == "adjacent":
        same &= layer[1:] == layer[:-1] + 1
    return s[:-1][same], s[1:][same]


@dataclass(frozen=True)
class RecordStats:
    p_plus: dict
    p_repeat: dict
    p_repeat_alternative: dict


def record_stats(records, pairing: str = "next-of-kind") -> RecordStats:
    """P(s=+1) and P(s_t = s_t') per kind ("X", "ZZ"), pooled over ``records``."""
    records = [records] if isinstance(records, MeasurementRecord) else list(records)
    if not records:
        raise ConfigError("record_stats needs at least one record")
    p_plus, rep, rep_adj = {}, {}, {}
    for kind, name in ((X_KIND, "X"), (ZZ_KIND, "ZZ")):
        plus = total = 0
        same = {"next-of-kind": [0, 0], "adjacent": [0, 0]}
        for rec in records:
            sel = rec.kind == kind
            plus += int(np.sum(rec.outcome[sel] == 1))
            total += int(sel.sum())
            for rule in same:
                a, b = record_pairs(rec, kind, rule)
                same[rule][0] += int(np.sum(a == b))
                same[rule][1] += int(a.size)
        p_plus[name] = _rate(plus, total)
        rep[name] = _rate(*same[pairing])
        other = "adjacent" if pairing == "next-of-kind" else "next-of-kind"
        rep_adj[name] = _rate(*same[other])
    return RecordStats(p_plus, rep, rep_adj)


def projective_repeat_probability() -> float:
    """1 - 1/phi + 1/(2 phi): X repeats are certain across "11" and random across a ZZ layer."""
    return 1.0 - 1.0 / PHI + 1.0 / (2.0 * PHI)
