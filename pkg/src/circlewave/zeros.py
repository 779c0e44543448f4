"""Zero number Z(u) = card{x in S^1 : u(x) = 0} of grid profiles.

Zeros are located on the trigonometric interpolant, not on the raw samples:
the interpolant is oversampled, its critical points are found first, and
sign changes are searched between consecutive critical/sample points (the
interpolant is monotone in between, so no crossing is missed).
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .field import GridField, derivative_array, interpolate_fine, wavenumbers

__all__ = [
    "ZeroReport",
    "ZeroSeries",
    "DropEvent",
    "TrivialFieldError",
    "zero_number",
    "zero_track",
    "zero_track_states",
    "drop_events",
    "localize_drops",
]

VALUE_TOL = 1e-9
SLOPE_TOL = 1e-6
OVERSAMPLE = 16
X_TOL = 1e-10
# values this close to zero (relative to the scale) are exact zeros up to rounding
ROUNDOFF = 1e3 * np.finfo(float).eps

SIMPLE, MULTIPLE, UNCERTAIN = "simple", "multiple", "uncertain"


class TrivialFieldError(ValueError):
    """Z is undefined for the (numerically) zero function."""

    def __init__(self, message="trivial field: zero number undefined", t=None):
        self.t = t
        if t is not None:
            message = f"{message} (t = {t:.6g})"
        super().__init__(message)


@dataclass(frozen=True)
class ZeroReport:
    count: int
    zeros: tuple[tuple[float, str], ...]
    tol_value: float
    tol_slope: float

    @property
    def locations(self) -> np.ndarray:
        return np.array([x for x, _ in self.zeros])

    @property
    def n_multiple(self) -> int:
        return sum(1 for _, k in self.zeros if k == MULTIPLE)

    @property
    def n_uncertain(self) -> int:
        return sum(1 for _, k in self.zeros if k == UNCERTAIN)

    @property
    def all_simple(self) -> bool:
        return all(k == SIMPLE for _, k in self.zeros)

    @property
    def degenerate(self) -> bool:
        return not self.all_simple


class _Interpolant:
    """Vectorised evaluation of a trigonometric interpolant and its slope."""

    def __init__(self, values: np.ndarray):
        n = values.size
        c = np.fft.rfft(values) / n
        w = np.full(c.size, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self.c = c * w
        self.k = wavenumbers(n)
        self.dc = self.c * 1j * self.k
        self.dc[-1] = 0.0

    def __call__(self, x):
        return np.real(np.exp(1j * np.multiply.outer(x, self.k)) @ self.c)

    def slope(self, x):
        return np.real(np.exp(1j * np.multiply.outer(x, self.k)) @ self.dc)


def _bisect(fn, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    """Vectorised bisection; fn(lo) and fn(hi) have opposite signs."""
    if lo.size == 0:
        return lo
    flo = np.sign(fn(lo))
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        fm = np.sign(fn(mid))
        left = fm == flo
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
        if np.all(fm == 0):
            return mid
    return 0.5 * (lo + hi)


def _sign_change_brackets(x: np.ndarray, y: np.ndarray):
    """Brackets (x_i, x_{i+1}) with y_i * y_{i+1} < 0 on a cyclic sampling."""
    xn = np.append(x[1:], x[0] + 2.0 * np.pi)
    yn = np.roll(y, -1)
    idx = np.nonzero(y * yn < 0)[0]
    return idx, x[idx], xn[idx]


def zero_number(
    u,
    scale: float | None = None,
    value_tol: float = VALUE_TOL,
    slope_tol: float = SLOPE_TOL,
    oversample: int = OVERSAMPLE,
) -> ZeroReport:
    """Count and classify the zeros of ``u`` on S^1.

    ``scale`` sets the reference magnitude for the value threshold
    (default: ``max|u|``); fields with ``max|u| <= 10 * value_tol * scale``
    are rejected as trivial.
    """
    values = np.asarray(u.values if isinstance(u, GridField) else u, dtype=float)
    n = values.size
    umax = float(np.max(np.abs(values)))
    scale = umax if scale is None else float(scale)
    tol_value = value_tol * scale
    if umax == 0.0 or umax <= 10.0 * tol_value:
        raise TrivialFieldError()
    interp = _Interpolant(values)
    slope_vals = derivative_array(values, 1)
    m = n * oversample
    xf = 2.0 * np.pi * np.arange(m) / m
    uxf = interpolate_fine(slope_vals, oversample)
    tol_slope = slope_tol * float(np.max(np.abs(uxf)))

    # critical points of the interpolant
    _, lo, hi = _sign_change_brackets(xf, uxf)
    crit = _bisect(interp.slope, lo, hi, 1e-13) % (2.0 * np.pi)
    crit = np.union1d(crit, xf[uxf == 0.0])

    pts = np.concatenate([xf, crit])
    is_crit = np.concatenate([np.zeros(m, bool), np.ones(crit.size, bool)])
    # fine-grid values come from one FFT; only the critical points need the sum
    vals = np.concatenate([interpolate_fine(values, oversample), interp(crit)])
    order = np.argsort(pts, kind="stable")
    pts, is_crit, vals = pts[order], is_crit[order], vals[order]
    floor = ROUNDOFF * scale
    vals = np.where(np.abs(vals) <= floor, 0.0, vals)

    found: list[tuple[float, str]] = []
    # exact zeros sitting on sample or critical points
    for i in np.nonzero(vals == 0.0)[0]:
        x0 = pts[i]
        kind = MULTIPLE if is_crit[i] or abs(interp.slope(x0)) < tol_slope else SIMPLE
        found.append((float(x0), kind))
    # strict sign changes
    idx, lo, hi = _sign_change_brackets(pts, vals)
    roots = _bisect(interp, lo, hi, X_TOL) % (2.0 * np.pi)
    slopes = np.abs(interp.slope(roots)) if roots.size else np.zeros(0)
    for r, s in zip(roots, slopes):
        found.append((float(r), MULTIPLE if s < tol_slope else SIMPLE))
    # shallow dips towards zero without a crossing
    crossing = np.zeros(pts.size, bool)
    crossing[idx] = True
    crossing[(idx + 1) % pts.size] = True
    for i in np.nonzero(is_crit & (vals != 0.0) & (np.abs(vals) < tol_value) & ~crossing)[0]:
        found.append((float(pts[i]), UNCERTAIN))

    found.sort()
    zeros = _dedupe(found)
    return ZeroReport(len(zeros), tuple(zeros), tol_value, tol_slope)


def _dedupe(found, eps=1e-12):
    out = []
    for x, kind in found:
        if out and abs(x - out[-1][0]) < eps:
            if kind != SIMPLE:
                out[-1] = (out[-1][0], kind)
            continue
        out.append((x, kind))
    if len(out) > 1 and (out[0][0] + 2.0 * np.pi - out[-1][0]) < eps:
        out.pop()
    return out


# --------------------------------------------------------------------------
# tracking along trajectories

@dataclass
class ZeroSeries:
    times: np.ndarray
    reports: list

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.count for r in self.reports])

    @property
    def increases(self) -> list[int]:
        """Indices i where count[i] > count[i-1] (monotonicity violations)."""
        c = self.counts
        return [i for i in range(1, c.size) if c[i] > c[i - 1]]

    @property
    def drops(self) -> list[int]:
        c = self.counts
        return [i for i in range(1, c.size) if c[i] < c[i - 1]]

    def inconclusive(self, i: int) -> bool:
        """Interval (i-1, i) touches an uncertain zero."""
        return self.reports[i - 1].n_uncertain > 0 or self.reports[i].n_uncertain > 0

    @property
    def violations(self) -> list[int]:
        return [i for i in self.increases if not self.inconclusive(i)]

    def settle_index(self) -> int | None:
        """First index after which the count is constant and all zeros simple."""
        c = self.counts
        good = None
        for i in range(c.size - 1, -1, -1):
            if c[i] != c[-1] or not self.reports[i].all_simple:
                break
            good = i
        return good

    def to_csv(self, stream: io.TextIOBase) -> None:
        stream.write("t,count,n_multiple,n_uncertain\n")
        for t, r in zip(self.times, self.reports):
            stream.write(f"{format(float(t), '.17g')},{r.count},{r.n_multiple},{r.n_uncertain}\n")


def zero_track_states(times: Sequence[float], states: np.ndarray, **kw) -> ZeroSeries:
    reports = []
    for t, row in zip(times, states):
        try:
            reports.append(zero_number(row, **kw))
        except TrivialFieldError:
            raise TrivialFieldError(t=float(t)) from None
    return ZeroSeries(np.asarray(times, dtype=float), reports)


def zero_track(traj, **kw) -> ZeroSeries:
    """Zero reports for every recorded snapshot of a trajectory."""
    return zero_track_states(traj.times, traj.states, **kw)


@dataclass(frozen=True)
class DropEvent:
    t_before: float
    t_after: float
    count_before: int
    count_after: int
    multiple_zero_seen: bool


def drop_events(series: ZeroSeries) -> list[DropEvent]:
    """Intervals between consecutive snapshots where the count fell."""
    out = []
    for i in series.drops:
        a, b = series.reports[i - 1], series.reports[i]
        out.append(DropEvent(float(series.times[i - 1]), float(series.times[i]),
                             a.count, b.count, a.degenerate or b.degenerate))
    return out


def localize_drops(
    series: ZeroSeries,
    states: list,
    advance: Callable,
    observe: Callable = lambda s: s,
    t_tol: float = 1e-11,
    max_iter: int = 80,
    **kw,
) -> ZeroSeries:
    """Refine every drop interval by bisection in time.

    ``states[i]`` is the full dynamical state at ``series.times[i]`` and
    ``advance(state, t0, t1)`` evolves it; ``observe(state)`` gives the
    profile whose zeros are counted.  Bisection stops when the bracket is
    shorter than ``t_tol`` or an endpoint exhibits a multiple/uncertain zero;
    the bracketing snapshots are inserted into the returned series.
    """
    times = list(series.times)
    reports = list(series.reports)
    states = list(states)
    i = 1
    while i < len(times):
        if reports[i].count >= reports[i - 1].count or reports[i - 1].degenerate or reports[i].degenerate:
            i += 1
            continue
        t_lo, s_lo, r_lo = times[i - 1], states[i - 1], reports[i - 1]
        t_hi, r_hi = times[i], reports[i]
        inserted = []
        for _ in range(max_iter):
            if t_hi - t_lo <= t_tol * max(1.0, abs(t_hi)):
                break
            t_mid = 0.5 * (t_lo + t_hi)
            s_mid = advance(s_lo, t_lo, t_mid)
            r_mid = zero_number(observe(s_mid), **kw)
            if r_mid.count < r_lo.count:
                t_hi, r_hi = t_mid, r_mid
                inserted.append((t_mid, s_mid, r_mid))
            else:
                t_lo, s_lo, r_lo = t_mid, s_mid, r_mid
                inserted.append((t_mid, s_mid, r_mid))
            if r_lo.degenerate or r_hi.degenerate:
                break
        # keep only the final bracket, in time order
        keep = {t_lo, t_hi}
        new = sorted((x for x in inserted if x[0] in keep), key=lambda x: x[0])
        for t_new, s_new, r_new in new:
            j = int(np.searchsorted(times, t_new))
            times.insert(j, t_new)
            states.insert(j, s_new)
            reports.insert(j, r_new)
        i += 1
    return ZeroSeries(np.array(times), reports)
