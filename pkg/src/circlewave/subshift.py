"""The subshift X0 of {0,1}^Z defined by the forbidden words 1 0^m 1^n 0.

Every point of X0 is eventually constant in both directions, so a point is
stored exactly as (left tail symbol, finite core word, right tail symbol,
origin).  All distances are exact powers of two (``fractions.Fraction``).

Metric convention: d(x, y) = 2^-k where k is the largest integer with
x_i = y_i for all -k <= i <= k - 1, and d(x, x) = 0.  Sequences that differ
at index 0 or -1 are at distance 1.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "BiSequence",
    "membership",
    "shift_by",
    "metric",
    "uniform",
    "x_zero",
    "x_n",
    "canonical_families",
    "limit_points",
    "nonwandering_demo",
    "NonwanderingCertificate",
    "nonwandering_certificate",
    "parse_bisequence",
]

_FORBIDDEN = re.compile(r"10+1+0")
_SERIAL = re.compile(r"^\s*L:([01])\s+core:([01]*)\s+R:([01])\s+origin:(-?\d+)\s*$")


@dataclass(frozen=True)
class BiSequence:
    """x_i = left for i + origin < 0, core[i + origin] inside the core,
    right for i + origin >= len(core)."""

    left: int
    core: str
    right: int
    origin: int = 0

    def __post_init__(self):
        if self.left not in (0, 1) or self.right not in (0, 1):
            raise ValueError("tail symbols must be 0 or 1")
        if set(self.core) - {"0", "1"}:
            raise ValueError("core must be a word over {0,1}")
        # canonical form: strip symbols that merely repeat a tail
        core, origin = self.core, int(self.origin)
        lead = len(core) - len(core.lstrip(str(self.left)))
        core, origin = core[lead:], origin - lead
        core = core.rstrip(str(self.right))
        if not core and self.left == self.right:
            origin = 0
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "origin", origin)

    def __getitem__(self, i: int) -> int:
        j = i + self.origin
        if j < 0:
            return self.left
        if j >= len(self.core):
            return self.right
        return int(self.core[j])

    def span(self) -> tuple[int, int]:
        """Index range [lo, hi) covered by the core."""
        return -self.origin, len(self.core) - self.origin

    def window(self, lo: int, hi: int) -> str:
        """x_lo ... x_{hi-1} as a string."""
        if hi <= lo:
            return ""
        a, b = lo + self.origin, hi + self.origin
        n = len(self.core)
        head = str(self.left) * max(0, min(b, 0) - a)
        tail = str(self.right) * max(0, b - max(a, n))
        return head + self.core[max(a, 0):max(min(b, n), 0)] + tail

    def __str__(self) -> str:
        return f"L:{self.left} core:{self.core} R:{self.right} origin:{self.origin}"

    def pretty(self, pad: int = 3) -> str:
        """Dotted notation with the radix point before index 0, e.g. ...000.111..."""
        lo, hi = self.span()
        lo, hi = min(lo, 0) - pad, max(hi, 0) + pad
        return "..." + self.window(lo, 0) + "." + self.window(0, hi) + "..."


def parse_bisequence(text: str) -> BiSequence:
    m = _SERIAL.match(text)
    if not m:
        raise ValueError(f"malformed sequence {text!r}; expected 'L:0 core:0110 R:1 origin:2'")
    return BiSequence(int(m.group(1)), m.group(2), int(m.group(3)), int(m.group(4)))


def uniform(symbol: int) -> BiSequence:
    return BiSequence(symbol, "", symbol, 0)


def x_zero() -> BiSequence:
    """...000.111..."""
    return BiSequence(0, "", 1, 0)


def x_n(n: int) -> BiSequence:
    """...000.1^n 0^n 111..."""
    return BiSequence(0, "1" * n + "0" * n, 1, 0)


def membership(x: BiSequence) -> bool:
    """No factor 1 0^m 1^n 0 (m, n >= 1).  Two tail symbols on each side cover
    every factor that could reach into a tail."""
    word = str(x.left) * 2 + x.core + str(x.right) * 2
    return _FORBIDDEN.search(word) is None


def shift_by(x: BiSequence, n: int) -> BiSequence:
    """sigma^n x with (sigma x)_i = x_{i+1}."""
    return BiSequence(x.left, x.core, x.right, x.origin + int(n))


def _first_mismatch(a: str, b: str) -> int | None:
    for i, (p, q) in enumerate(zip(a, b)):
        if p != q:
            return i
    return None


def _first_disagreement_radius(x: BiSequence, y: BiSequence) -> int | None:
    """min over i with x_i != y_i of (i if i >= 0 else -i - 1); None if x == y."""
    lo = min(x.span()[0], y.span()[0], 0)
    hi = max(x.span()[1], y.span()[1], 0)
    best = None
    # nonnegative indices in increasing order, negative ones by increasing -i-1
    right = _first_mismatch(x.window(0, hi), y.window(0, hi))
    if right is not None:
        best = right
    left = _first_mismatch(x.window(lo, 0)[::-1], y.window(lo, 0)[::-1])
    if left is not None:
        best = left if best is None else min(best, left)
    # beyond [lo, hi) both sequences sit on their tails
    if x.left != y.left:
        r = -(lo - 1) - 1
        best = r if best is None else min(best, r)
    if x.right != y.right:
        best = hi if best is None else min(best, hi)
    return best


def metric(x: BiSequence, y: BiSequence, k_max: int | None = None) -> Fraction:
    """Exact distance 2^-k (see module docstring); ``k_max`` caps the
    reported agreement radius."""
    k = _first_disagreement_radius(x, y)
    if k is None:
        return Fraction(0)
    if k_max is not None:
        if k_max < 1:
            raise ValueError("k_max must be >= 1")
        k = min(k, k_max)
    return Fraction(1, 2**k)


def canonical_families(n_cap: int) -> list[BiSequence]:
    """All points of X0 up to shift with block lengths <= n_cap:
    0^inf 1^n 0^inf, 1^inf 0^n 1^inf, 0^inf 1^n 0^m 1^inf, 1^inf 0^inf and
    the two uniform points."""
    out = [uniform(0), uniform(1), BiSequence(0, "", 1), BiSequence(1, "", 0)]
    for n in range(1, n_cap + 1):
        out.append(BiSequence(0, "1" * n, 0))
        out.append(BiSequence(1, "0" * n, 1))
        for m in range(1, n_cap + 1):
            out.append(BiSequence(0, "1" * n + "0" * m, 1))
    return out


def _tail_limit(x: BiSequence, forward: bool, depth: int) -> BiSequence | None:
    """The uniform sequence that sigma^{+-k} x approaches, verified to be within
    2^-depth after enough shifts and monotone thereafter."""
    target = uniform(x.right if forward else x.left)
    lo, hi = x.span()
    start = (hi if forward else -lo) + depth + 1
    sign = 1 if forward else -1
    for k in range(start, start + depth):
        if metric(shift_by(x, sign * k), target) > Fraction(1, 2**depth):
            return None
    return target


def limit_points(n_cap: int = 20, depth: int = 20) -> list[BiSequence]:
    """omega- and alpha-limit points of all canonical families with block
    lengths <= n_cap, each convergence checked to 2^-depth."""
    found = {}
    for x in canonical_families(n_cap):
        for forward in (True, False):
            lim = _tail_limit(x, forward, depth)
            if lim is None:
                raise RuntimeError(f"shift orbit of {x} did not converge")
            found[str(lim)] = lim
    return [found[k] for k in sorted(found)]


@dataclass(frozen=True)
class NonwanderingCertificate:
    """For eps = 2^-k, y = x^k is eps-close to x0 and so is sigma^{2k} y."""

    k: int
    d_start: Fraction
    d_return: Fraction

    @property
    def ok(self) -> bool:
        eps = Fraction(1, 2**self.k)
        return self.d_start < 2 * eps and self.d_return < 2 * eps


def nonwandering_certificate(k_max: int) -> list[NonwanderingCertificate]:
    x0 = x_zero()
    out = []
    for k in range(1, k_max + 1):
        y = x_n(k)
        out.append(NonwanderingCertificate(k, metric(x0, y), metric(x0, shift_by(y, 2 * k))))
    return out


def nonwandering_demo(n_max: int) -> tuple[list[tuple[int, Fraction, Fraction]], bool]:
    """Rows (n, d(x0, x^n), d(x0, sigma^{2n} x^n)), each equal to 2^-n, and
    whether x0 is a limit point (it is not)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    x0 = x_zero()
    rows = []
    for n in range(1, n_max + 1):
        xn = x_n(n)
        if not membership(xn):
            raise AssertionError(f"x^{n} is not in X0")
        rows.append((n, metric(x0, xn), metric(x0, shift_by(xn, 2 * n))))
        expected = Fraction(1, 2**n)
        if rows[-1][1] != expected or rows[-1][2] != expected:
            raise AssertionError(f"row {n} deviates from 2^-{n}: {rows[-1]}")
    is_limit = any(metric(x0, p) == 0 for p in limit_points(min(n_max, 20)))
    return rows, is_limit


def demo_csv(rows) -> str:
    lines = ["n,d_x0_xn,d_x0_shifted_xn,d_float"]
    for n, a, b in rows:
        lines.append(f"{n},{a},{b},{format(float(a), '.17g')}")
    return "\n".join(lines) + "\n"
