"""Acceptance criteria 1-9.

Each ``criterion_*`` function runs one experiment and returns a CriterionResult
holding the checks, a one-line summary and the CSV artifacts it produced.  The
tests print one PASS/FAIL line per criterion (also repeated in the terminal
summary) and criterion 9 reruns 1-8 and compares the artifacts byte for byte.
"""
import io
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES
from circlewave.classify import (
    HOMOGENEOUS,
    INHOMOGENEOUS,
    ROTATING_WAVE,
    classify_ensemble,
    classify_periodic,
    zero_constancy_check,
)
from circlewave.cli import random_profile
from circlewave.expr import parse_nonlinearity
from circlewave.field import GridField, from_function
from circlewave.linear import LinearCoefficients, evolve_linear, finite_time_spectrum, linear_advance, linearize_along
from circlewave.solver import SolverConfig, integrate, poincare_iterates
from circlewave.subshift import demo_csv, limit_points, membership, nonwandering_demo, uniform, x_n
from circlewave.symmetry import estimate_wave_speed, orbit_distance
from circlewave.zeros import localize_drops, zero_track

# errors below this are roundoff, so their ratio carries no convergence information
ROUNDOFF_FLOOR = 1e-13


@dataclass
class CriterionResult:
    number: int
    checks: dict = field(default_factory=dict)
    summary: str = ""
    artifacts: dict = field(default_factory=dict)
    runtime: float = 0.0
    limit: float | None = None

    @property
    def ok(self) -> bool:
        in_time = self.limit is None or self.runtime < self.limit
        return all(self.checks.values()) and in_time

    def line(self) -> str:
        failed = [k for k, v in self.checks.items() if not v]
        if self.limit is not None and self.runtime >= self.limit:
            failed.append("runtime")
        status = "PASS" if self.ok else "FAIL"
        tail = f" [failed: {', '.join(failed)}]" if failed else ""
        limit = f" (limit {self.limit:g} s)" if self.limit is not None else ""
        return f"{status} criterion {self.number}: {self.summary}; {self.runtime:.2f} s{limit}{tail}"


def _g(v) -> str:
    return format(float(v), ".17g")


def _to_csv(writer) -> str:
    buf = io.StringIO()
    writer(buf)
    return buf.getvalue()


def _timed(fn):
    def run():
        t0 = time.perf_counter()
        res = fn()
        res.runtime = time.perf_counter() - t0
        return res

    run.__name__ = fn.__name__
    return run


# --------------------------------------------------------------------------
# criteria

@_timed
def criterion_1() -> CriterionResult:
    res = CriterionResult(1, limit=5.0)
    u0 = from_function(np.sin)
    errs = {}
    for dt in (1e-3, 5e-4):
        cfg = SolverConfig(t_end=1.0, dt=dt, record_stride=round(1.0 / dt))
        final = integrate(u0, parse_nonlinearity("0"), cfg).final.values
        errs[dt] = float(np.max(np.abs(final - oracles.heat_sine(1.0))))
    e1, e2 = errs[1e-3], errs[5e-4]
    ratio = e1 / e2 if e2 > 0 else math.inf
    # the time-step order is also measured on a reaction term, where the
    # integrator is not exact
    f = parse_nonlinearity("u - u^3")
    v0 = GridField(0.5 + 0.3 * np.sin(u0.x))
    ref = integrate(v0, f, SolverConfig(t_end=2.0, dt=1e-3, record_stride=2000)).final.values
    rerr = []
    for dt in (0.1, 0.05):
        out = integrate(v0, f, SolverConfig(t_end=2.0, dt=dt, record_stride=round(2.0 / dt))).final.values
        rerr.append(float(np.max(np.abs(out - ref))))
    rratio = rerr[0] / rerr[1]
    res.checks["heat error <= 1e-6"] = e1 <= 1e-6
    res.checks["halving dt improves >= 4x"] = ratio >= 4.0 or max(e1, e2) <= ROUNDOFF_FLOOR
    res.checks["reaction-term ratio >= 4"] = rratio >= 4.0
    res.summary = (f"heat error {e1:.2e} (dt=1e-3), {e2:.2e} (dt=5e-4), ratio {ratio:.2f}"
                   f"{' (both at roundoff)' if max(e1, e2) <= ROUNDOFF_FLOOR else ''}; "
                   f"reaction-term halving ratio {rratio:.2f}")
    res.artifacts["c1_errors.csv"] = (
        "case,dt,error\n" + f"heat,0.001,{_g(e1)}\nheat,0.0005,{_g(e2)}\n"
        + f"reaction,0.1,{_g(rerr[0])}\nreaction,0.05,{_g(rerr[1])}\n")
    return res


@_timed
def criterion_2() -> CriterionResult:
    res = CriterionResult(2, limit=120.0)
    lines = ["seed,initial_count,final_count,increases,drops,unlocalised_drops,settle_t"]
    increases = unlocalised = unsettled = drops = 0
    for seed in range(50):
        a, b, v0 = oracles.random_linear_problem(seed)
        coeffs = LinearCoefficients(64, a, b)
        traj = evolve_linear(v0, coeffs, (0.0, 4.0), dt=2e-3, record_stride=10)
        series = zero_track(traj)
        refined = localize_drops(series, list(traj.states), linear_advance(coeffs, 2e-3))
        bad = [i for i in refined.drops if not (refined.reports[i - 1].degenerate or refined.reports[i].degenerate)]
        k = refined.settle_index()
        increases += len(series.increases) + len(refined.increases)
        unlocalised += len(bad)
        drops += len(refined.drops)
        unsettled += k is None
        lines.append(f"{seed},{series.counts[0]},{series.counts[-1]},{len(series.increases)},"
                     f"{len(refined.drops)},{len(bad)},{'' if k is None else _g(refined.times[k])}")
    res.checks["no increases"] = increases == 0
    res.checks["every drop brackets a degenerate zero"] = unlocalised == 0
    res.checks["counts settle with simple zeros"] = unsettled == 0
    res.summary = (f"50 problems, {increases} increases, {drops} drops, {unlocalised} unlocalised, "
                   f"{unsettled} unsettled")
    res.artifacts["c2_zero_tracks.csv"] = "\n".join(lines) + "\n"
    return res


@_timed
def criterion_3() -> CriterionResult:
    res = CriterionResult(3, limit=30.0)
    est = finite_time_spectrum(LinearCoefficients.constant(0.0, 0.5), (0.0, 20.0), m=5)
    expected = np.array([0.5, -0.5, -0.5, -3.5, -3.5])
    err = float(np.max(np.abs(est.exponents - expected)))
    res.checks["exponents within 0.05"] = err <= 0.05
    res.summary = f"exponents {np.array2string(est.exponents, precision=4)}, max error {err:.1e}"
    res.artifacts["c3_spectrum.csv"] = _to_csv(est.to_csv)
    return res


WAVE_F = "2*u - u^3 + 0.4*p"


def _wave_run(t_end: float, record_stride: int):
    return integrate(GridField(oracles.wave_profile()), parse_nonlinearity(WAVE_F),
                     SolverConfig(t_end=t_end, record_stride=record_stride))


@_timed
def criterion_4() -> CriterionResult:
    res = CriterionResult(4, limit=60.0)
    phi = GridField(oracles.wave_profile())
    traj = _wave_run(35.0, 10)
    early = traj.window(0.0, 20.0)
    dists = np.array([orbit_distance(s, phi) for s in early.states])
    ws = estimate_wave_speed(early)
    est = finite_time_spectrum(linearize_along(traj, parse_nonlinearity(WAVE_F)), (15.0, 35.0),
                               m=5, t_spinup=15.0)
    near_zero = float(np.min(np.abs(est.exponents)))
    res.checks["orbit distance <= 1e-3 for t <= 20"] = float(dists.max()) <= 1e-3
    res.checks["speed within 1% of -0.4"] = abs(ws.c - oracles.WAVE_SPEED) <= 0.01 * abs(oracles.WAVE_SPEED)
    res.checks["exponent within 0.05 of 0"] = near_zero <= 0.05
    res.summary = (f"max orbit distance {dists.max():.1e}, c = {ws.c:.6f}, "
                   f"exponents {np.array2string(est.exponents, precision=4)} (closest to 0: {near_zero:.1e})")
    res.artifacts["c4_orbit_distance.csv"] = "t,orbit_distance\n" + "".join(
        f"{_g(t)},{_g(d)}\n" for t, d in zip(early.times, dists))
    res.artifacts["c4_speed.csv"] = _to_csv(ws.to_csv)
    res.artifacts["c4_spectrum.csv"] = _to_csv(est.to_csv)
    return res


@_timed
def criterion_5() -> CriterionResult:
    res = CriterionResult(5, limit=120.0)
    initial = [random_profile(seed, 1.0, 6, 128) for seed in range(20)]
    cfg = SolverConfig(t_end=10.0, dt=0.01, record_stride=10)
    reports = classify_ensemble(initial, parse_nonlinearity("u - u^3"), cfg, t_transient=40.0, jobs=4)
    speeds = [0.0 if r.speed is None else abs(r.speed) for r in reports]
    verdicts = [r.verdict for r in reports]
    res.checks["all equilibria"] = all(v in (HOMOGENEOUS, INHOMOGENEOUS) for v in verdicts)
    res.checks["|c| <= 1e-4"] = all(r.speed is not None for r in reports) and max(speeds) <= 1e-4
    res.checks["no rotating wave"] = ROTATING_WAVE not in verdicts
    tally = {v: verdicts.count(v) for v in sorted(set(verdicts))}
    res.summary = f"20 runs, verdicts {tally}, max |c| {max(speeds):.1e}"
    res.artifacts["c5_verdicts.csv"] = "seed,verdict,speed,fixed_point\n" + "".join(
        f"{i},{r.verdict},{'' if r.speed is None else _g(r.speed)},{_g(r.residuals['fixed_point'])}\n"
        for i, r in enumerate(reports))
    return res


@_timed
def criterion_6() -> CriterionResult:
    res = CriterionResult(6, limit=60.0)
    f = parse_nonlinearity("(1 + 0.2*sin(t))*u - u^3")
    T = 2.0 * math.pi
    rep = classify_periodic(GridField.constant(1.0), f, T, SolverConfig())
    iterates = poincare_iterates(GridField.constant(1.0), f, T, SolverConfig(), 5)
    ode = oracles.forced_cubic_iterates(1.0, 5)
    err = float(np.max(np.abs(iterates - ode[:, None])))
    res.checks["periodic_point"] = rep.verdict == "periodic_point"
    res.checks["fixed-point residual <= 1e-6"] = rep.residuals["fixed_point"] <= 1e-6
    res.checks["iterates match ODE within 1e-6"] = err <= 1e-6
    res.summary = (f"verdict {rep.verdict}, residual {rep.residuals['fixed_point']:.1e}, "
                   f"iterate error vs ODE {err:.1e}")
    res.artifacts["c6_iterates.csv"] = "n,pde_mean,ode\n" + "".join(
        f"{n},{_g(row.mean())},{_g(o)}\n" for n, (row, o) in enumerate(zip(iterates, ode)))
    return res


@_timed
def criterion_7() -> CriterionResult:
    res = CriterionResult(7, limit=60.0)
    traj = _wave_run(30.0, 100)
    zc = zero_constancy_check(traj, 1.0, 16, t_min=10.0)
    res.checks["no excluded pairs"] = zc.n_excluded == 0
    res.checks["one constant integer"] = zc.constant
    res.summary = (f"{zc.counts.shape[0]} times x 16 shifts over t in [10, 29], values {zc.values}, "
                   f"N = {zc.N}")
    res.artifacts["c7_zero_constancy.csv"] = _to_csv(zc.to_csv)
    return res


@_timed
def criterion_8() -> CriterionResult:
    res = CriterionResult(8, limit=1.0)
    rows, is_limit = nonwandering_demo(32)
    exact = all(a == b == Fraction(1, 2**n) and isinstance(a, Fraction) for n, a, b in rows)
    members = all(membership(x_n(n)) for n in range(1, 33))
    pts = limit_points()
    res.checks["32 rows of (2^-n, 2^-n)"] = len(rows) == 32 and exact
    res.checks["x^n in X0"] = members
    res.checks["limit points are the uniform sequences"] = (
        len(pts) == 2 and set(map(str, pts)) == {str(uniform(0)), str(uniform(1))})
    res.checks["x0 not a limit point"] = not is_limit
    res.summary = f"rows exact: {exact}, last row {rows[-1][1]}, limit points {[p.pretty(1) for p in pts]}"
    res.artifacts["c8_subshift.csv"] = demo_csv(rows)
    return res


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]
_FIRST_RUN: dict[int, CriterionResult] = {}


def _report(res: CriterionResult) -> None:
    line = res.line()
    print(line)
    ACCEPTANCE_LINES.append(line)


@pytest.mark.parametrize("fn", CRITERIA, ids=lambda fn: fn.__name__)
def test_criterion(fn):
    res = fn()
    _FIRST_RUN[res.number] = res
    _report(res)
    assert res.ok, res.line()


def test_criterion_9_determinism():
    t0 = time.perf_counter()
    mismatched, compared = [], 0
    for fn in CRITERIA:
        number = int(fn.__name__.split("_")[1])
        first = _FIRST_RUN.get(number) or fn()
        second = fn()
        for name, text in first.artifacts.items():
            compared += 1
            if second.artifacts.get(name, "").encode() != text.encode():
                mismatched.append(name)
    res = CriterionResult(9)
    res.checks["byte-identical artifacts"] = not mismatched and compared > 0
    res.runtime = time.perf_counter() - t0
    res.summary = f"{compared} CSV artifacts compared across two runs, mismatches: {mismatched or 'none'}"
    _report(res)
    assert res.ok, res.line()
