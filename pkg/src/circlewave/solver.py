"""Time integration of u_t = u_xx + f(t, u, u_x) on the circle.

Exponential time differencing with fourth-order Runge-Kutta treatment of the
nonlinearity (Cox & Matthews).  The diffusion multiplier exp(-k^2 dt) is
applied exactly in Fourier space; the phi-function coefficients are computed
with the contour-integral trick of Kassam & Trefethen so that k = 0 needs no
special casing.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .expr import Const, ExpressionAst, is_autonomous
from .field import GridField, wavenumbers, write_csv

__all__ = [
    "SolverConfig",
    "Trajectory",
    "SolverError",
    "BlowUpError",
    "NumericalFailure",
    "EtdRk4",
    "integrate",
    "poincare_map",
    "snap_dt",
    "dissipativity_check",
    "DissipativityReport",
]

CONTOUR_POINTS = 32


class SolverError(RuntimeError):
    pass


class BlowUpError(SolverError):
    """Max-norm exceeded the blow-up threshold."""

    def __init__(self, t_last: float, max_norm: float, threshold: float):
        self.t_last = t_last
        self.max_norm = max_norm
        super().__init__(
            f"max-norm {max_norm:.3g} exceeded threshold {threshold:.3g}; last valid time {t_last:.6g}"
        )


class NumericalFailure(SolverError):
    """NaN or Inf appeared in the state."""

    def __init__(self, t_last: float):
        self.t_last = t_last
        super().__init__(f"non-finite state after t = {t_last:.6g}")


@dataclass(frozen=True)
class SolverConfig:
    N: int = 128
    dt: float = 1e-3
    t_end: float = 1.0
    record_stride: int = 10
    dealias: bool = True
    blowup_threshold: float = 1e6

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0 or self.blowup_threshold <= 0:
            raise ValueError("dt, t_end and blowup_threshold must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if self.N < 16 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two >= 16")

    @property
    def n_steps(self) -> int:
        return max(1, round(self.t_end / self.dt))

    def replace(self, **changes) -> "SolverConfig":
        return SolverConfig(**{**asdict(self), **changes})


@dataclass
class Trajectory:
    """Recorded states; ``states[i]`` is the profile at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray
    config: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[0] != self.times.size:
            raise ValueError("times and states disagree in length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def __getitem__(self, i) -> GridField:
        return GridField(self.states[i])

    @property
    def final(self) -> GridField:
        return GridField(self.states[-1])

    @property
    def interval(self) -> float:
        return self.config.record_stride * self.config.dt

    def index_at(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def window(self, t_min: float = -np.inf, t_max: float = np.inf) -> "Trajectory":
        eps = 1e-9 * max(1.0, self.interval)
        keep = (self.times >= t_min - eps) & (self.times <= t_max + eps)
        return Trajectory(self.times[keep], self.states[keep], self.config)

    def to_csv(self, stream) -> None:
        write_csv(stream, self.times, self.states)


def _phi_coefficients(lin: np.ndarray, h: float):
    """ETDRK4 coefficient arrays for a diagonal linear operator ``lin``."""
    lh = lin * h
    r = np.exp(1j * np.pi * (np.arange(1, CONTOUR_POINTS + 1) - 0.5) / CONTOUR_POINTS)
    z = lh[:, None] + r[None, :]
    ez = np.exp(z)
    q = h * np.real(np.mean((np.exp(z / 2) - 1.0) / z, axis=1))
    f1 = h * np.real(np.mean((-4.0 - z + ez * (4.0 - 3.0 * z + z**2)) / z**3, axis=1))
    f2 = h * np.real(np.mean((2.0 + z + ez * (z - 2.0)) / z**3, axis=1))
    f3 = h * np.real(np.mean((-4.0 - 3.0 * z - z**2 + ez * (4.0 - z)) / z**3, axis=1))
    return np.exp(lh), np.exp(lh / 2), q, f1, f2, f3


class EtdRk4:
    """ETDRK4 stepper for v_t = v_xx + F(t, v) acting on rfft coefficients.

    ``nonlinear(t, v_hat) -> F_hat`` must return the transformed explicit
    term.  Arrays may carry leading batch axes.
    """

    def __init__(self, n: int, dt: float, nonlinear: Callable):
        self.n = n
        self.dt = dt
        self.nonlinear = nonlinear
        self.lin = -wavenumbers(n) ** 2
        self._coeffs = {}
        self._coefficients(dt)

    def _coefficients(self, h: float):
        key = float(h)
        if key not in self._coeffs:
            self._coeffs[key] = _phi_coefficients(self.lin, key)
        return self._coeffs[key]

    def step(self, v: np.ndarray, t: float, h: float | None = None) -> np.ndarray:
        h = self.dt if h is None else h
        E, E2, Q, f1, f2, f3 = self._coefficients(h)
        N = self.nonlinear
        Nv = N(t, v)
        a = E2 * v + Q * Nv
        Na = N(t + h / 2, a)
        b = E2 * v + Q * Na
        Nb = N(t + h / 2, b)
        c = E2 * a + Q * (2.0 * Nb - Nv)
        Nc = N(t + h, c)
        return E * v + Nv * f1 + 2.0 * (Na + Nb) * f2 + Nc * f3

    def advance(self, v: np.ndarray, t0: float, t1: float) -> np.ndarray:
        """Step from t0 to t1 with full steps and one shorter final step."""
        span = t1 - t0
        n_full = int(math.floor(span / self.dt + 1e-9))
        for i in range(n_full):
            v = self.step(v, t0 + i * self.dt)
        rest = span - n_full * self.dt
        if rest > 1e-14 * max(1.0, abs(t1)):
            v = self.step(v, t0 + n_full * self.dt, rest)
        return v


def dealias_mask(n: int) -> np.ndarray:
    """2/3 rule: keep |k| < N/3."""
    return (wavenumbers(n) < n / 3.0).astype(float)


def nonlinear_term(f: ExpressionAst, n: int, dealias: bool = True) -> Callable:
    """Transformed f(t, u, u_x) as a function of the state's rfft coefficients."""
    ik = 1j * wavenumbers(n)
    ik = ik.copy()
    ik[-1] = 0.0
    mask = dealias_mask(n) if dealias else None
    fn = f._fn
    if isinstance(f.root, Const) and f.root.value == 0.0:
        return lambda t, v: np.zeros_like(v)

    def term(t, v):
        u = np.fft.irfft(v, n=n, axis=-1)
        ux = np.fft.irfft(ik * v, n=n, axis=-1)
        out = np.fft.rfft(fn(t, u, ux), axis=-1)
        if mask is not None:
            out *= mask
        return out

    return term


def _max_norm_check(v_hat, n, t_last, threshold):
    # cheap upper bound first; the exact max only when it could exceed
    bound = (np.abs(v_hat).sum() * 2.0) / n
    if not math.isfinite(bound):
        raise NumericalFailure(t_last)
    if bound > threshold:
        m = float(np.max(np.abs(np.fft.irfft(v_hat, n=n))))
        if m > threshold:
            raise BlowUpError(t_last, m, threshold)


def integrate(u0, f: ExpressionAst, cfg: SolverConfig, t0: float = 0.0) -> Trajectory:
    """Solve on [t0, t0 + t_end] and record every ``record_stride`` steps."""
    values = np.asarray(u0.values if isinstance(u0, GridField) else u0, dtype=float)
    if values.size != cfg.N:
        raise ValueError(f"initial data has {values.size} points, config says N = {cfg.N}")
    if not np.all(np.isfinite(values)):
        raise NumericalFailure(t0)
    n, dt = cfg.N, cfg.dt
    stepper = EtdRk4(n, dt, nonlinear_term(f, n, cfg.dealias))
    v = np.fft.rfft(values)
    steps = cfg.n_steps
    times = [t0]
    states = [values.copy()]
    # overflow is detected explicitly by the norm check
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(steps):
            t = t0 + i * dt
            v = stepper.step(v, t)
            _max_norm_check(v, n, t, cfg.blowup_threshold)
            if (i + 1) % cfg.record_stride == 0:
                times.append(t0 + (i + 1) * dt)
                states.append(np.fft.irfft(v, n=n))
    return Trajectory(np.array(times), np.array(states), cfg)


def snap_dt(T: float, dt: float) -> float:
    """Largest step <= dt that divides T exactly."""
    return T / math.ceil(T / dt - 1e-9)


def poincare_map(u0, f: ExpressionAst, T: float, cfg: SolverConfig, t0: float = 0.0) -> GridField:
    """P u0 = u(T, .; u0) for a T-periodic nonlinearity."""
    dt = snap_dt(T, cfg.dt)
    run = cfg.replace(dt=dt, t_end=T, record_stride=max(1, round(T / dt)))
    return integrate(u0, f, run, t0).final


def poincare_iterates(u0, f: ExpressionAst, T: float, cfg: SolverConfig, n_iter: int) -> np.ndarray:
    """Rows P^0 u0, P^1 u0, ..., P^n_iter u0 (time origin restarts at 0 each period)."""
    out = [np.asarray(u0.values if isinstance(u0, GridField) else u0, dtype=float)]
    u = GridField(out[0])
    for _ in range(n_iter):
        u = poincare_map(u, f, T, cfg)
        out.append(u.values.copy())
    return np.array(out)


# --------------------------------------------------------------------------
# dissipativity

@dataclass
class DissipativityReport:
    violations: list = field(default_factory=list)  # (t, u, u*f(t,u,0))
    max_growth_ratio: float = 0.0  # max |f| / (1 + |p|^(2 - eps)) on the sample box
    samples: int = 0

    @property
    def sign_condition_holds(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "sign_condition_holds": self.sign_condition_holds,
            "violations": [list(v) for v in self.violations[:20]],
            "n_violations": len(self.violations),
            "max_growth_ratio": self.max_growth_ratio,
            "samples": self.samples,
        }


def dissipativity_check(
    f: ExpressionAst,
    l: float,
    delta: float,
    samples: int = 200,
    period: float | None = None,
    eps: float = 0.1,
    p_box: float | None = None,
) -> DissipativityReport:
    """Sample the sign condition u f(t, u, 0) <= 0 for delta <= |u| <= l.

    Also reports the largest |f| / (1 + |p|^(2 - eps)) over the box
    |u| <= l, |p| <= p_box (default l), which should stay bounded for
    sub-quadratic gradient growth.
    """
    if not l > delta > 0:
        raise ValueError("need l > delta > 0")
    span = period if period else 1.0
    ts = np.linspace(0.0, span, max(2, int(math.sqrt(samples))), endpoint=period is None)
    pos = np.linspace(delta, l, samples)
    us = np.concatenate([-pos[::-1], pos])
    T, U = np.meshgrid(ts, us, indexing="ij")
    prod = U * f(T, U, np.zeros_like(U))
    report = DissipativityReport(samples=prod.size)
    bad = np.argwhere(prod > 0)
    report.violations = [(float(T[i, j]), float(U[i, j]), float(prod[i, j])) for i, j in bad]

    p_box = l if p_box is None else p_box
    m = max(8, int(round(samples ** (1 / 3))))
    tb, ub, pb = np.meshgrid(np.linspace(0.0, span, m), np.linspace(-l, l, m),
                             np.linspace(-p_box, p_box, m), indexing="ij")
    ratio = np.abs(f(tb, ub, pb)) / (1.0 + np.abs(pb) ** (2.0 - eps))
    report.max_growth_ratio = float(np.max(ratio))
    return report


def metadata(cfg: SolverConfig, f: ExpressionAst, **extra) -> str:
    """JSON sidecar describing a run."""
    doc = {
        "solver": asdict(cfg),
        "scheme": "ETDRK4",
        "f": f.source or str(f),
        "params": f.param_table,
        "autonomous": is_autonomous(f),
        "grid": "x_j = 2 pi j / N",
    }
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)


__all__ += ["metadata", "poincare_iterates", "nonlinear_term", "dealias_mask"]
