"""Linear equations v_t = v_xx + a(t,x) v_x + b(t,x) v.

Covers the linearization along computed trajectories, linear evolution with
the same ETDRK4 stepping as the nonlinear solver, the explicit spectrum at a
constant state, and finite-time growth exponents (QR method) standing in for
the dichotomy spectrum.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import ExpressionAst, differentiate
from .field import GridField, derivative_array, grid, wavenumbers
from .solver import BlowUpError, EtdRk4, NumericalFailure, SolverConfig, Trajectory, dealias_mask
from .zeros import TrivialFieldError, zero_number

__all__ = [
    "LinearCoefficients",
    "SpectrumEstimate",
    "linearize_along",
    "evolve_linear",
    "constant_state_spectrum",
    "finite_time_spectrum",
    "fourier_basis",
    "eigenspace_basis",
    "zero_bound_check",
    "ZeroBoundReport",
]

GAP_THRESHOLD = 0.2


class LinearCoefficients:
    """Coefficients a(t, x), b(t, x) on the grid of size N.

    Either sampled on a time grid (linear interpolation in t, constant
    extrapolation is refused) or given as callables ``t -> array(N)``.
    """

    def __init__(self, n: int, a, b, times=None, support=(-np.inf, np.inf)):
        self.n = n
        self.times = None if times is None else np.asarray(times, dtype=float)
        if self.times is not None:
            self.a = np.asarray(a, dtype=float)
            self.b = np.asarray(b, dtype=float)
            if self.a.shape != (self.times.size, n) or self.b.shape != self.a.shape:
                raise ValueError("sampled coefficients must have shape (len(times), N)")
            if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
                raise ValueError("coefficients must be finite")
            self.support = (float(self.times[0]), float(self.times[-1]))
        else:
            self.a, self.b = a, b
            self.support = support

    @classmethod
    def constant(cls, a: float, b: float, n: int = 128) -> "LinearCoefficients":
        av, bv = np.full(n, float(a)), np.full(n, float(b))
        return cls(n, lambda t: av, lambda t: bv)

    @classmethod
    def from_functions(cls, fa: Callable, fb: Callable, n: int = 128) -> "LinearCoefficients":
        """From functions of (t, x) evaluated on the grid."""
        x = grid(n)
        return cls(n, lambda t: np.broadcast_to(fa(t, x), (n,)), lambda t: np.broadcast_to(fb(t, x), (n,)))

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if self.times is None:
            return self.a(t), self.b(t)
        ts = self.times
        eps = 1e-9 * max(1.0, abs(t))
        if t < ts[0] - eps or t > ts[-1] + eps:
            raise ValueError(f"t = {t} outside coefficient support [{ts[0]}, {ts[-1]}]")
        j = int(np.clip(np.searchsorted(ts, t) - 1, 0, ts.size - 2))
        w = (t - ts[j]) / (ts[j + 1] - ts[j])
        w = min(max(w, 0.0), 1.0)
        return (1 - w) * self.a[j] + w * self.a[j + 1], (1 - w) * self.b[j] + w * self.b[j + 1]


def linearize_along(traj: Trajectory, f: ExpressionAst) -> LinearCoefficients:
    """a = df/dp and b = df/du evaluated along each recorded state."""
    fp, fu = differentiate(f, "p"), differentiate(f, "u")
    states = traj.states
    ux = derivative_array(states, 1)
    t = traj.times[:, None]
    a = fp(np.broadcast_to(t, states.shape), states, ux)
    b = fu(np.broadcast_to(t, states.shape), states, ux)
    return LinearCoefficients(states.shape[1], a, b, times=traj.times)


def _linear_term(coeffs: LinearCoefficients, dealias: bool):
    n = coeffs.n
    ik = 1j * wavenumbers(n)
    ik = ik.copy()
    ik[-1] = 0.0
    mask = dealias_mask(n) if dealias else None

    def term(t, v):
        a, b = coeffs.at(t)
        vv = np.fft.irfft(v, n=n, axis=-1)
        vx = np.fft.irfft(ik * v, n=n, axis=-1)
        out = np.fft.rfft(a * vx + b * vv, axis=-1)
        if mask is not None:
            out *= mask
        return out

    return term


def evolve_linear(
    v0,
    coeffs: LinearCoefficients,
    t_span: tuple[float, float],
    dt: float = 1e-3,
    record_stride: int = 10,
    blowup_threshold: float = 1e12,
    dealias: bool = False,
) -> Trajectory:
    """Solve the linear equation from ``v0`` at t_span[0] to t_span[1]."""
    t0, t1 = map(float, t_span)
    lo, hi = coeffs.support
    eps = 1e-9 * max(1.0, abs(t1))
    if t0 < lo - eps or t1 > hi + eps:
        raise ValueError("t_span outside coefficient support")
    values = np.asarray(v0.values if isinstance(v0, GridField) else v0, dtype=float)
    n = coeffs.n
    stepper = EtdRk4(n, dt, _linear_term(coeffs, dealias))
    steps = max(1, round((t1 - t0) / dt))
    v = np.fft.rfft(values)
    times, states = [t0], [values.copy()]
    for i in range(steps):
        t = t0 + i * dt
        v = stepper.step(v, t)
        bound = np.abs(v).sum() * 2.0 / n
        if not math.isfinite(bound):
            raise NumericalFailure(t)
        if bound > blowup_threshold:
            raise BlowUpError(t, bound, blowup_threshold)
        if (i + 1) % record_stride == 0:
            times.append(t0 + (i + 1) * dt)
            states.append(np.fft.irfft(v, n=n))
    cfg = SolverConfig(N=n, dt=dt, t_end=t1 - t0, record_stride=record_stride, dealias=dealias)
    return Trajectory(np.array(times), np.array(states), cfg)


def linear_advance(coeffs: LinearCoefficients, dt: float = 1e-3, dealias: bool = False) -> Callable:
    """``advance(values, t0, t1)`` for use with zero-drop localisation."""
    stepper = EtdRk4(coeffs.n, dt, _linear_term(coeffs, dealias))

    def advance(values, t0, t1):
        v = stepper.advance(np.fft.rfft(values), t0, t1)
        return np.fft.irfft(v, n=coeffs.n)

    return advance


# --------------------------------------------------------------------------
# spectra

@dataclass
class SpectrumEstimate:
    """Growth exponents sorted descending, one entry per dimension.

    ``clusters`` groups exponents separated by gaps <= ``gap`` and gives the
    multiplicity of each group.
    """

    exponents: np.ndarray
    window: tuple[float, float] = (0.0, 0.0)
    galerkin_dim: int = 0
    gap: float = GAP_THRESHOLD

    def __post_init__(self):
        self.exponents = np.sort(np.asarray(self.exponents, dtype=float))[::-1]
        if not self.galerkin_dim:
            self.galerkin_dim = self.exponents.size

    def clusters(self) -> list[tuple[float, int]]:
        out = []
        group = [self.exponents[0]] if self.exponents.size else []
        for e in self.exponents[1:]:
            if group[-1] - e > self.gap:
                out.append((float(np.mean(group)), len(group)))
                group = [e]
            else:
                group.append(e)
        if group:
            out.append((float(np.mean(group)), len(group)))
        return out

    @property
    def multiplicities(self) -> list[int]:
        return [m for _, m in self.clusters()]

    @property
    def distinct(self) -> np.ndarray:
        return np.array([v for v, _ in self.clusters()])

    def dichotomy_gaps(self) -> list[tuple[float, float]]:
        """Intervals (lower, upper) between consecutive exponents wider than the gap threshold."""
        e = self.exponents
        return [(float(e[i + 1]), float(e[i])) for i in range(e.size - 1) if e[i] - e[i + 1] > self.gap]

    def to_csv(self, stream: io.TextIOBase) -> None:
        stream.write("rank,exponent,multiplicity_hint\n")
        hints = []
        for _, m in self.clusters():
            hints.extend([m] * m)
        for i, (e, m) in enumerate(zip(self.exponents, hints)):
            stream.write(f"{i},{format(float(e), '.17g')},{m}\n")


def constant_state_spectrum(a: float, b: float, k_max: int) -> SpectrumEstimate:
    """Exponents b - k^2, k = 0..k_max, with eigenspaces span{sin kx, cos kx}.

    The advection a only rotates each eigenspace and leaves the rates alone.
    """
    ex = [b]
    for k in range(1, k_max + 1):
        ex += [b - k * k, b - k * k]
    return SpectrumEstimate(np.array(ex), galerkin_dim=2 * k_max + 1, gap=0.5)


def fourier_basis(m: int, n: int) -> np.ndarray:
    """Rows: the m lowest Fourier modes 1, cos x, sin x, cos 2x, ... (L2-orthonormal)."""
    x = grid(n)
    rows = [np.ones(n) / math.sqrt(2 * math.pi)]
    k = 1
    while len(rows) < m:
        rows.append(np.cos(k * x) / math.sqrt(math.pi))
        if len(rows) < m:
            rows.append(np.sin(k * x) / math.sqrt(math.pi))
        k += 1
    return np.array(rows)


def finite_time_spectrum(
    coeffs: LinearCoefficients,
    window: tuple[float, float],
    m: int = 11,
    t_qr: float = 0.1,
    dt: float = 1e-3,
    t_spinup: float = 5.0,
    seed: int | None = 0,
) -> SpectrumEstimate:
    """Finite-time growth exponents by repeated QR re-orthonormalisation.

    ``m`` orthonormal fields spanning the lowest Fourier modes are evolved
    together; every ``t_qr`` the block is QR-factored and log|R_ii|
    accumulated.  The first ``t_spinup`` time units only align the frame and
    are not averaged.

    With ``seed`` set, the starting frame is a random orthogonal rotation of
    the Fourier modes.  Pure modes can share a reflection symmetry with the
    coefficients (e.g. an even profile), which traps leading frame vectors in
    an invariant subspace; the rotation keeps the span but breaks that.
    """
    t0, t1 = map(float, window)
    n = coeffs.n
    if m % 2 == 0 or m > n // 3:
        raise ValueError("m must be odd and at most N/3")
    if t1 - t0 < 5.0:
        raise ValueError("window must be at least 5 time units")
    ts = t0 - t_spinup
    lo, hi = coeffs.support
    eps = 1e-9 * max(1.0, abs(t1))
    if ts < lo - eps or t1 > hi + eps:
        raise ValueError("window (with spin-up) exceeds coefficient support")
    h = 2.0 * math.pi / n
    stepper = EtdRk4(n, dt, _linear_term(coeffs, dealias=False))
    per_qr = max(1, round(t_qr / dt))
    spin = round(t_spinup / dt)
    total = spin + round((t1 - t0) / dt)
    basis = fourier_basis(m, n) * math.sqrt(h)  # Euclidean-orthonormal rows
    if seed is not None:
        rot, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((m, m)))
        basis = rot @ basis
    v = np.fft.rfft(basis, axis=-1)
    logs = np.zeros(m)
    averaged = 0.0
    step = 0
    while step < total:
        # QR epochs restart at the end of the spin-up so that nothing straddles t0
        chunk = min(per_qr, total - step, spin - step if step < spin else total)
        for i in range(chunk):
            v = stepper.step(v, ts + (step + i) * dt)
        step += chunk
        vals = np.fft.irfft(v, n=n, axis=-1)
        q, r = np.linalg.qr(vals.T)
        d = np.diag(r)
        q = q * np.where(d < 0, -1.0, 1.0)
        if step > spin:
            logs += np.log(np.abs(d))
            averaged += chunk * dt
        v = np.fft.rfft(q.T, axis=-1)
    exps = logs / averaged
    return SpectrumEstimate(exps, window=(t0, t1), galerkin_dim=m)


# --------------------------------------------------------------------------
# zero-number bounds on eigenspaces

def eigenspace_basis(modes, n: int = 128) -> np.ndarray:
    """Rows spanning the given wavenumbers (0 -> constant, k -> sin kx, cos kx)."""
    x = grid(n)
    rows = []
    for k in modes:
        if k == 0:
            rows.append(np.ones(n))
        else:
            rows += [np.sin(k * x), np.cos(k * x)]
    return np.array(rows)


@dataclass
class ZeroBoundReport:
    n1: int
    n2: int
    counts: list = field(default_factory=list)
    violations: list = field(default_factory=list)  # (coefficients, count)
    skipped: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def min_count(self) -> int:
        return min(self.counts) if self.counts else -1

    @property
    def max_count(self) -> int:
        return max(self.counts) if self.counts else -1


def zero_bound_check(basis, n1: int, n2: int, samples: int = 100, seed: int = 0) -> ZeroBoundReport:
    """Check n1 <= Z(v) <= n2 for random nonzero combinations v of the basis rows."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.shape[0] == 0:
        raise ValueError("basis must be nonempty")
    rng = np.random.default_rng(seed)
    report = ZeroBoundReport(n1, n2)
    for _ in range(samples):
        coef = rng.standard_normal(basis.shape[0])
        v = coef @ basis
        try:
            z = zero_number(v).count
        except TrivialFieldError:
            report.skipped += 1
            continue
        report.counts.append(z)
        if not n1 <= z <= n2:
            report.violations.append((coef.tolist(), z))
    return report
