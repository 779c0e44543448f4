"""Circle-group alignment, distance to a group orbit, rotating-wave speed."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .field import GridField, distance, is_constant, shift_array, wavenumbers

__all__ = ["AlignmentResult", "WaveSpeed", "align", "orbit_distance", "estimate_wave_speed"]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class AlignmentResult:
    a_star: float
    residual: float
    curvature: float
    degenerate: bool = False


def _values(u):
    return np.asarray(u.values if isinstance(u, GridField) else u, dtype=float)


def _correlation_series(u: np.ndarray, v: np.ndarray):
    """Coefficients of C(a) = <sigma_a u, v> as a real trig polynomial in a.

    C(a) = sum_k Re(g_k exp(i k a)) with g_k = w_k 2pi/N^2 U_k conj(V_k).
    """
    n = u.size
    g = np.fft.rfft(u) * np.conj(np.fft.rfft(v)) * (TWO_PI / n**2)
    g[1:] *= 2.0
    if n % 2 == 0:
        g[-1] = np.real(g[-1]) / 2.0  # Nyquist pairs with itself and stays a cosine
    return g, wavenumbers(n)


def align(u, v, newton_steps: int = 8) -> AlignmentResult:
    """a* = argmin_a ||sigma_a u - v||_2 over the circle.

    The objective is scanned on all N lattice shifts via one FFT
    cross-correlation, refined by a parabola through the three lattice values
    around the minimum, then polished by Newton's method on the exact
    trigonometric correlation.
    """
    uu, vv = _values(u), _values(v)
    if uu.size != vv.size:
        raise ValueError("grid size mismatch")
    n = uu.size
    h = TWO_PI / n
    base = float(np.dot(uu, uu) + np.dot(vv, vv)) * h
    if is_constant(uu):
        return AlignmentResult(0.0, distance(uu, vv), 0.0, True)

    # lattice[m] = h * sum_j u_{j+m} v_j = <sigma_{m h} u, v>
    lattice = np.real(np.fft.ifft(np.fft.fft(uu) * np.conj(np.fft.fft(vv)))) * h
    objective = base - 2.0 * lattice
    m = int(np.argmin(objective))
    jm, j0, jp = objective[(m - 1) % n], objective[m], objective[(m + 1) % n]
    denom = jm - 2.0 * j0 + jp
    offset = 0.5 * (jm - jp) / denom if denom > 0 else 0.0
    a = (m + float(np.clip(offset, -0.5, 0.5))) * h

    g, k = _correlation_series(uu, vv)
    for _ in range(newton_steps):
        # J(a) = base - 2 C(a)
        e = np.exp(1j * k * a)
        dj = -2.0 * np.sum(np.real(1j * k * g * e))
        d2j = 2.0 * np.sum(np.real(k**2 * g * e))
        if d2j <= 0:
            break
        step = dj / d2j
        a -= step
        if abs(step) < 1e-15:
            break
    e = np.exp(1j * k * a)
    curvature = float(2.0 * np.sum(np.real((k**2) * g * e)))
    a = float(a % TWO_PI)
    residual = distance(shift_array(uu, a), vv)
    direct = distance(uu, vv)
    if residual > direct:
        a, residual = 0.0, direct
    if a >= TWO_PI:
        a = 0.0
    return AlignmentResult(a, residual, curvature, False)


def orbit_distance(u, v) -> float:
    """Distance from v to the group orbit {sigma_a u : a in S^1}."""
    return align(u, v).residual


def wrap_angle(a):
    """Map to (-pi, pi]."""
    return -((-np.asarray(a) + np.pi) % TWO_PI - np.pi)


@dataclass
class WaveSpeed:
    c: float
    fit_residual: float
    degenerate: bool
    times: np.ndarray
    phases: np.ndarray
    residuals: np.ndarray

    def to_csv(self, stream: io.TextIOBase) -> None:
        stream.write("t,a_unwrapped,residual\n")
        for t, a, r in zip(self.times, self.phases, self.residuals):
            stream.write(f"{format(float(t), '.17g')},{format(float(a), '.17g')},{format(float(r), '.17g')}\n")


def estimate_wave_speed(traj, t_min: float = 0.0) -> WaveSpeed:
    """Least-squares speed c of a(t) ~ c (t - t_min).

    a(t) aligns u(t) back onto u(t_min); for u(t, x) = u0(x - c t) this gives
    a = c (t - t_min).  Phase unwrapping needs |c| * record interval < pi.
    """
    win = traj.window(t_min)
    times, states = win.times, win.states
    ref = states[0]
    if times.size < 2 or any(is_constant(s) for s in states):
        return WaveSpeed(float("nan"), float("nan"), True, times, np.zeros(times.size), np.zeros(times.size))
    phases = np.empty(times.size)
    residuals = np.empty(times.size)
    for i, s in enumerate(states):
        r = align(s, ref)
        phases[i] = r.a_star
        residuals[i] = r.residual
    phases = np.unwrap(wrap_angle(phases))
    phases -= phases[0]
    tau = times - times[0]
    c = float(np.dot(tau, phases) / np.dot(tau, tau))
    fit = float(np.sqrt(np.mean((phases - c * tau) ** 2)))
    return WaveSpeed(c, fit, False, times, phases, residuals)
