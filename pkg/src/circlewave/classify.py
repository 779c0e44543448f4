"""Omega-limit sets, recurrence and classification of recurrent states.

Autonomous problems: a recurrent state is either an equilibrium or lies on a
rotating wave u(t, x) = phi(x - c t).  Time-periodic problems: either a fixed
point of the period map P or a torus rotating wave with P w = sigma_{-r} w
(equivalently r = c T when the wave comes from an autonomous flow).
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .expr import ExpressionAst, is_autonomous, is_reflection_symmetric
from .field import GridField, distance, shift_array, spatial_variance
from .solver import SolverConfig, Trajectory, integrate, poincare_map
from .symmetry import align, estimate_wave_speed, orbit_distance, wrap_angle
from .zeros import TrivialFieldError, zero_number

__all__ = [
    "Tolerances",
    "ClassificationReport",
    "ZeroConstancyReport",
    "DegenerateLagError",
    "omega_limit",
    "recurrence_diagnostic",
    "classify_autonomous",
    "classify_periodic",
    "classify_ensemble",
    "zero_constancy_check",
]

HOMOGENEOUS = "homogeneous_equilibrium"
INHOMOGENEOUS = "inhomogeneous_equilibrium"
ROTATING_WAVE = "rotating_wave"
PERIODIC_POINT = "periodic_point"
TORUS_WAVE = "torus_rotating_wave"
UNDECIDED = "undecided"
VERDICTS = (HOMOGENEOUS, INHOMOGENEOUS, ROTATING_WAVE, PERIODIC_POINT, TORUS_WAVE, UNDECIDED)


@dataclass(frozen=True)
class Tolerances:
    fix: float = 1e-6  # direct distance for a fixed point
    var: float = 1e-10  # spatial variance of a homogeneous state
    orb: float = 1e-4  # distance to the group orbit
    c: float = 1e-4  # speed (or rotation) below which the wave is standing
    fit: float = 1e-3  # rms residual of the linear phase fit
    merge: float = 1e-6  # omega-limit representatives closer than this are merged


@dataclass
class ClassificationReport:
    verdict: str
    speed: float | None = None  # c, autonomous case
    rotation: float | None = None  # r, periodic case
    residuals: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def is_equilibrium(self) -> bool:
        return self.verdict in (HOMOGENEOUS, INHOMOGENEOUS)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "speed": self.speed,
            "rotation": self.rotation,
            "residuals": self.residuals,
            "tolerances": asdict(self.tolerances),
            "evidence": self.evidence,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _values(u) -> np.ndarray:
    return np.asarray(u.values if isinstance(u, GridField) else u, dtype=float)


# --------------------------------------------------------------------------
# omega-limit and recurrence

def omega_limit(u0, f: ExpressionAst, cfg: SolverConfig, t_transient: float,
                merge_tol: float = Tolerances.merge) -> list[GridField]:
    """Representatives of the snapshots with t >= t_transient, merged up to
    ``merge_tol`` in orbit distance."""
    if t_transient >= cfg.t_end:
        raise ValueError("t_transient must lie inside the integration interval")
    traj = integrate(u0, f, cfg).window(t_transient)
    reps: list[np.ndarray] = []
    for s in traj.states:
        if not any(orbit_distance(r, s) < merge_tol for r in reps):
            reps.append(s)
    return [GridField(r) for r in reps]


def _min_return(traj: Trajectory, ref: np.ndarray, t_min: float) -> tuple[float, float]:
    win = traj.window(t_min)
    times = win.times[win.times > t_min]
    states = win.states[win.times > t_min]
    if times.size == 0:
        return float("nan"), float("inf")
    h = 2.0 * np.pi / ref.size
    d = np.sqrt(h * np.sum((states - ref) ** 2, axis=1))
    i = int(np.argmin(d))
    return float(times[i]), float(d[i])


def recurrence_diagnostic(u0, f: ExpressionAst, cfg: SolverConfig, t_min: float) -> tuple[float, float]:
    """(t_return, gap): closest recorded return of u(t) to u0 for t > t_min."""
    traj = integrate(u0, f, cfg)
    return _min_return(traj, _values(u0), t_min)


# --------------------------------------------------------------------------
# zero constancy

class DegenerateLagError(ValueError):
    """Every sampled difference was numerically trivial."""


@dataclass
class ZeroConstancyReport:
    times: np.ndarray
    shifts: np.ndarray
    counts: np.ndarray  # (len(times), len(shifts)); -1 marks excluded pairs
    n_uncertain: int = 0

    @property
    def n_excluded(self) -> int:
        return int(np.sum(self.counts < 0))

    @property
    def values(self) -> list[int]:
        return sorted({int(c) for c in self.counts.ravel() if c >= 0})

    @property
    def constant(self) -> bool:
        return len(self.values) == 1

    @property
    def N(self) -> int | None:
        return self.values[0] if self.constant else None

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "N": self.N,
            "values": self.values,
            "n_samples": int(self.counts.size),
            "n_excluded": self.n_excluded,
            "n_uncertain": self.n_uncertain,
        }

    def to_csv(self, stream) -> None:
        stream.write("t,a,count\n")
        for i, t in enumerate(self.times):
            for j, a in enumerate(self.shifts):
                stream.write(f"{format(float(t), '.17g')},{format(float(a), '.17g')},{int(self.counts[i, j])}\n")


def zero_constancy_check(
    traj: Trajectory,
    T_lag: float,
    n_shifts: int = 16,
    t_min: float | None = None,
    reference=None,
    trivial_tol: float = 1e-9,
    max_times: int | None = None,
) -> ZeroConstancyReport:
    """Z(u(t + T_lag) - sigma_a u(t)) over a uniform a-grid and recorded t >= t_min.

    With ``reference`` given, Z(sigma_a u(t) - reference) is sampled instead
    and ``T_lag`` is ignored.  Differences with max-norm below
    ``trivial_tol * max|u(t)|`` are excluded; if every pair is excluded the
    lag resonates with the dynamics and DegenerateLagError is raised.
    """
    win = traj if t_min is None else traj.window(t_min)
    times, states = win.times, win.states
    if reference is None:
        lag = int(round(T_lag / traj.interval))
        if lag < 1 or abs(lag * traj.interval - T_lag) > 1e-9 * max(1.0, T_lag):
            raise ValueError("T_lag must be a positive multiple of the record interval")
        pairs = [(i, i + lag) for i in range(times.size - lag)]
    else:
        ref = _values(reference)
        pairs = [(i, None) for i in range(times.size)]
    if not pairs:
        raise ValueError("trajectory window shorter than the lag")
    if max_times and len(pairs) > max_times:
        pick = np.unique(np.linspace(0, len(pairs) - 1, max_times).round().astype(int))
        pairs = [pairs[k] for k in pick]
    shifts = 2.0 * np.pi * np.arange(n_shifts) / n_shifts
    counts = np.full((len(pairs), n_shifts), -1, dtype=int)
    uncertain = 0
    for row, (i, j) in enumerate(pairs):
        moved = shift_array(states[i], shifts)  # (n_shifts, N)
        target = states[j] if j is not None else ref
        diff = (target - moved) if j is not None else (moved - target)
        scale = max(float(np.max(np.abs(states[i]))), float(np.max(np.abs(target))))
        for col in range(n_shifts):
            if np.max(np.abs(diff[col])) <= trivial_tol * scale:
                continue
            try:
                rep = zero_number(diff[col], scale=scale)
            except TrivialFieldError:
                continue
            counts[row, col] = rep.count
            uncertain += rep.n_uncertain
    if np.all(counts < 0):
        raise DegenerateLagError("all sampled differences are trivial: degenerate lag")
    out_times = np.array([times[i] for i, _ in pairs])
    return ZeroConstancyReport(out_times, shifts, counts, uncertain)


# --------------------------------------------------------------------------
# classification

def classify_autonomous(
    u0,
    f: ExpressionAst,
    cfg: SolverConfig,
    t_transient: float = 0.0,
    tol: Tolerances = Tolerances(),
    zero_lag: float | None = 1.0,
    zero_times: int = 20,
) -> ClassificationReport:
    """Classify the state reached after ``t_transient`` by observing it for
    ``cfg.t_end`` more time units.

    Decision tree: fixed (direct distance to the starting state stays below
    ``tol.fix``), else on one group orbit (orbit distance below ``tol.orb``)
    with fitted speed deciding between rotating wave and inhomogeneous
    equilibrium, else undecided.
    """
    if not is_autonomous(f):
        raise ValueError("classify_autonomous needs an autonomous nonlinearity")
    w = _values(u0)
    if t_transient > 0:
        w = integrate(w, f, cfg.replace(t_end=t_transient, record_stride=max(1, round(t_transient / cfg.dt)))).states[-1]
    traj = integrate(w, f, cfg)
    states = traj.states
    h = 2.0 * np.pi / cfg.N
    fix = float(np.max(np.sqrt(h * np.sum((states - w) ** 2, axis=1))))
    var = spatial_variance(w)
    t_ret, gap = _min_return(traj, w, traj.times[0] + 0.5 * cfg.t_end)
    evidence = {
        "t_start": float(t_transient),
        "t_observed": float(cfg.t_end),
        "spatial_variance": var,
        "amplitude": 0.5 * float(np.ptp(states[-1])),
        "reflection_symmetric": is_reflection_symmetric(f),
        "recurrence": {"t_return": t_ret, "gap": gap},
    }
    residuals = {"fixed_point": fix}
    if fix <= tol.fix:
        verdict = HOMOGENEOUS if var <= tol.var else INHOMOGENEOUS
        return ClassificationReport(verdict, speed=0.0, residuals=residuals, evidence=evidence, tolerances=tol)

    orb = max(orbit_distance(w, s) for s in states)
    residuals["orbit"] = orb
    if orb > tol.orb:
        return ClassificationReport(UNDECIDED, residuals=residuals, evidence=evidence, tolerances=tol)
    ws = estimate_wave_speed(traj)
    residuals["speed_fit"] = ws.fit_residual
    if ws.degenerate or not ws.fit_residual < tol.fit:
        return ClassificationReport(UNDECIDED, speed=None if ws.degenerate else ws.c,
                                    residuals=residuals, evidence=evidence, tolerances=tol)
    if abs(ws.c) <= tol.c:
        return ClassificationReport(INHOMOGENEOUS, speed=ws.c, residuals=residuals, evidence=evidence, tolerances=tol)
    if zero_lag is not None and zero_lag < cfg.t_end:
        try:
            zc = zero_constancy_check(traj, zero_lag, 16, max_times=zero_times)
            evidence["zero_constancy"] = zc.to_dict()
        except (DegenerateLagError, ValueError) as exc:
            evidence["zero_constancy"] = {"error": str(exc)}
    return ClassificationReport(ROTATING_WAVE, speed=ws.c, residuals=residuals, evidence=evidence, tolerances=tol)


def classify_periodic(
    u0,
    f: ExpressionAst,
    T: float,
    cfg: SolverConfig,
    n_max: int = 50,
    n_transient: int = 0,
    tol: Tolerances = Tolerances(),
    r_tol: float = 1e-6,
) -> ClassificationReport:
    """Classify via iterates of the period map P.

    The rotation r is ``align(P^{n+1} u, P^n u).a_star`` wrapped to (-pi, pi],
    so that P w = sigma_{-r} w on a torus rotating wave.
    """
    u = GridField(_values(u0))
    for _ in range(n_transient):
        u = poincare_map(u, f, T, cfg)
    history = []
    prev_r = None
    residuals: dict = {}
    for n in range(n_max):
        nxt = poincare_map(u, f, T, cfg)
        d = distance(nxt, u)
        al = align(nxt, u)
        r = float(wrap_angle(al.a_star))
        history.append({"n": n_transient + n, "fixed_point": d, "orbit": al.residual, "r": r})
        residuals = {"fixed_point": d, "orbit": al.residual}
        evidence = {"iterations": len(history), "history": history[-5:],
                    "reflection_symmetric": is_reflection_symmetric(f, period=T)}
        if d <= tol.fix:
            return ClassificationReport(PERIODIC_POINT, rotation=0.0, residuals=residuals,
                                        evidence=evidence, tolerances=tol)
        if (al.residual <= tol.orb and prev_r is not None
                and abs(float(wrap_angle(r - prev_r))) <= r_tol and abs(r) > tol.c):
            residuals["rotation_drift"] = abs(float(wrap_angle(r - prev_r)))
            return ClassificationReport(TORUS_WAVE, rotation=r, residuals=residuals,
                                        evidence=evidence, tolerances=tol)
        prev_r = r
        u = nxt
    evidence = {"iterations": len(history), "history": history[-5:],
                "reflection_symmetric": is_reflection_symmetric(f, period=T)}
    return ClassificationReport(UNDECIDED, residuals=residuals, evidence=evidence, tolerances=tol)


def _classify_one(args):
    u0, f, cfg, t_transient, T = args
    if T is None:
        return classify_autonomous(u0, f, cfg, t_transient)
    return classify_periodic(u0, f, T, cfg)


def classify_ensemble(initial, f: ExpressionAst, cfg: SolverConfig, t_transient: float = 0.0,
                      T: float | None = None, jobs: int | None = 1) -> list[ClassificationReport]:
    """Classify each initial profile; ``jobs > 1`` fans out to worker processes.

    Reports come back in input order, so the result does not depend on the
    number of workers.
    """
    tasks = [(_values(u), f, cfg, t_transient, T) for u in initial]
    if jobs == 1 or len(tasks) < 2:
        return [_classify_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_classify_one, tasks))
