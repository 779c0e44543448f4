"""Profiles on the circle S^1 = R/2piZ sampled on an equispaced grid.

All spectral operations use real-to-complex FFTs.  Wavenumbers follow
``numpy.fft.rfftfreq(N, 1/N)``.  The Nyquist mode (k = N/2) is zeroed for
odd-order derivatives; under a shift it keeps only its cosine part, which is
the only part representable on the grid.
"""
from __future__ import annotations

import io
from functools import lru_cache

import numpy as np

__all__ = [
    "GridField",
    "FieldError",
    "grid",
    "wavenumbers",
    "from_function",
    "spectral_derivative",
    "shift",
    "distance",
    "c1_distance",
    "evaluate_at",
    "interpolate_fine",
    "spatial_variance",
    "format_csv_row",
    "parse_csv_row",
]

DEFAULT_N = 128


class FieldError(ValueError):
    pass


@lru_cache(maxsize=None)
def grid(n: int) -> np.ndarray:
    x = 2.0 * np.pi * np.arange(n) / n
    x.flags.writeable = False
    return x


@lru_cache(maxsize=None)
def wavenumbers(n: int) -> np.ndarray:
    k = np.fft.rfftfreq(n, 1.0 / n)
    k.flags.writeable = False
    return k


def _check_size(n: int) -> None:
    if n < 16 or n & (n - 1):
        raise FieldError(f"grid size must be a power of two >= 16, got {n}")


class GridField:
    """Real profile at the nodes x_j = 2 pi j / N.

    Value semantics: the stored array is a read-only copy.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.array(values, dtype=float)
        if arr.ndim != 1:
            raise FieldError("GridField values must be one-dimensional")
        _check_size(arr.size)
        if not np.all(np.isfinite(arr)):
            raise FieldError("GridField values must be finite")
        arr.flags.writeable = False
        self.values = arr

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return grid(self.N)

    def spectrum(self) -> np.ndarray:
        return np.fft.rfft(self.values)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @classmethod
    def constant(cls, c: float, n: int = DEFAULT_N) -> "GridField":
        return cls(np.full(n, float(c)))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.N

    def __add__(self, other):
        return GridField(self.values + _values(other, self.N))

    def __sub__(self, other):
        return GridField(self.values - _values(other, self.N))

    def __mul__(self, scalar):
        return GridField(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return GridField(-self.values)

    def __eq__(self, other):
        return isinstance(other, GridField) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"GridField(N={self.N}, max={self.max_norm():.3g})"


def _values(u, n: int | None = None) -> np.ndarray:
    if isinstance(u, GridField):
        arr = u.values
    elif np.isscalar(u):
        if n is None:
            raise FieldError("scalar operand needs a grid size")
        return np.full(n, float(u))
    else:
        arr = np.asarray(u, dtype=float)
    if n is not None and arr.shape[-1] != n:
        raise FieldError(f"grid size mismatch: {arr.shape[-1]} vs {n}")
    return arr


def from_function(fn, n: int = DEFAULT_N) -> GridField:
    """Sample ``fn(x)`` on the grid."""
    return GridField(np.broadcast_to(fn(grid(n)), (n,)))


def derivative_array(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral derivative along the last axis of a raw array."""
    n = values.shape[-1]
    k = wavenumbers(n)
    mult = (1j * k) ** order
    if order % 2:
        mult = mult.copy()
        mult[-1] = 0.0
    return np.fft.irfft(mult * np.fft.rfft(values, axis=-1), n=n, axis=-1)


def spectral_derivative(u: GridField, order: int = 1) -> GridField:
    if order not in (1, 2):
        raise FieldError("order must be 1 or 2")
    if order == 2:
        return GridField(derivative_array(u.values, 2))
    return GridField(derivative_array(u.values, 1))


def shift_array(values: np.ndarray, a) -> np.ndarray:
    """(sigma_a u)(x) = u(x + a) along the last axis; ``a`` may be an array
    broadcasting against the leading axes."""
    n = values.shape[-1]
    k = wavenumbers(n)
    a = np.asarray(a, dtype=float)[..., None]
    phase = np.exp(1j * k * a)
    phase[..., -1] = np.cos(k[-1] * a[..., 0]) if n % 2 == 0 else phase[..., -1]
    return np.fft.irfft(phase * np.fft.rfft(values, axis=-1), n=n, axis=-1)


def shift(u: GridField, a: float) -> GridField:
    """Circle-group action (sigma_a u)(x) = u(x + a)."""
    a = float(a) % (2.0 * np.pi)
    if a == 0.0:
        return u
    return GridField(shift_array(u.values, a))


def distance(u, v) -> float:
    """Discrete L2 distance sqrt((2 pi / N) sum (u_j - v_j)^2)."""
    uu = _values(u)
    vv = _values(v, uu.size)
    d = uu - vv
    return float(np.sqrt(2.0 * np.pi / uu.size * np.dot(d, d)))


def c1_distance(u, v) -> float:
    """||u - v||_2 + ||u_x - v_x||_2."""
    uu = _values(u)
    d = uu - _values(v, uu.size)
    dx = derivative_array(d, 1)
    h = 2.0 * np.pi / uu.size
    return float(np.sqrt(h * np.dot(d, d)) + np.sqrt(h * np.dot(dx, dx)))


def spectral_l2(u) -> float:
    """The L2 norm computed from Fourier coefficients (Parseval)."""
    uu = _values(u)
    n = uu.size
    c = np.fft.rfft(uu) / n
    w = np.full(c.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return float(np.sqrt(2.0 * np.pi * np.sum(w * np.abs(c) ** 2)))


def _interp_coefficients(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = values.shape[-1]
    c = np.fft.rfft(values, axis=-1) / n
    w = np.full(c.shape[-1], 2.0)
    w[0] = 1.0
    w[-1] = 1.0  # Nyquist coefficient is real: enters as c cos(N x / 2)
    return c * w, wavenumbers(n)


def evaluate_at(u, x):
    """Trigonometric interpolant at arbitrary x (scalar or array)."""
    c, k = _interp_coefficients(_values(u))
    xs = np.asarray(x, dtype=float)
    out = np.real(np.exp(1j * np.multiply.outer(xs, k)) @ c)
    return float(out) if out.ndim == 0 else out


def interpolate_fine(values: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited upsampling by zero padding, on the grid of size factor*N."""
    n = values.shape[-1]
    c = np.fft.rfft(values, axis=-1)
    c = c.copy()
    c[..., -1] *= 0.5  # split Nyquist symmetrically
    m = n * factor
    pad = np.zeros(c.shape[:-1] + (m // 2 + 1,), dtype=complex)
    pad[..., : c.shape[-1]] = c
    return np.fft.irfft(pad, n=m, axis=-1) * factor


def spatial_variance(u) -> float:
    uu = _values(u)
    return float(np.var(uu))


def is_constant(u, threshold: float | None = None) -> bool:
    uu = _values(u)
    if threshold is None:
        threshold = 1e-12 * uu.size
    return spatial_variance(uu) < threshold


def format_csv_row(t: float, values) -> str:
    vals = _values(values)
    return ",".join([format(float(t), ".17g")] + [format(float(v), ".17g") for v in vals])


def parse_csv_row(line: str) -> tuple[float, np.ndarray]:
    parts = line.strip().split(",")
    return float(parts[0]), np.array([float(p) for p in parts[1:]])


def write_csv(stream: io.TextIOBase, times, states, header: bool = True) -> None:
    """Rows ``t, u_0, ..., u_{N-1}`` with 17 significant digits."""
    states = np.asarray(states, dtype=float)
    if header:
        n = states.shape[-1]
        stream.write(",".join(["t"] + [f"u_{j}" for j in range(n)]) + "\n")
    for t, row in zip(times, states):
        stream.write(format_csv_row(t, row) + "\n")


def read_csv(stream) -> tuple[np.ndarray, np.ndarray]:
    times, states = [], []
    for line in stream:
        line = line.strip()
        if not line or line[0].isalpha():
            continue
        t, row = parse_csv_row(line)
        times.append(t)
        states.append(row)
    return np.array(times), np.array(states)
