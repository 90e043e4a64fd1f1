"""Mean-field LQ problem definitions.

The controlled dynamics carry two channels per coefficient: one multiplying
the state/control itself and one multiplying its expectation (the ``_mean``
coefficients).  The cost weights follow the same split.  A variance-penalized
classical LQ problem maps onto this structure with indefinite mean-channel
weights; :func:`build_modified_lq` performs that construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, StructuralError
from .grid import TimeGrid

# Tolerances (scale-relative): inputs failing symmetry are rejected, never
# silently symmetrized; eigenvalues above -TAU_PSD count as nonnegative.
SYM_RTOL = 1e-12
PSD_RTOL = 1e-9
DEFAULT_DELTA = 1e-6

LEVEL_BASE = "H2"
LEVEL_PSD = "H2'"
LEVEL_COERCIVE = "H2''"


def _sym_defect(M: np.ndarray) -> float:
    return float(np.max(np.abs(M - M.T)))


def sym_tol(M: np.ndarray) -> float:
    return SYM_RTOL * (1.0 + float(np.max(np.abs(M))))


def psd_tol(spectral_radius: float) -> float:
    return PSD_RTOL * (1.0 + spectral_radius)


def min_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


@dataclass(frozen=True)
class CoefficientSchedule:
    """Matrix-valued function of time: a constant or a piecewise-linear table.

    Sampled schedules interpolate linearly between strictly increasing sample
    times and clamp outside the sampled span.
    """

    values: np.ndarray          # (k, rows, cols); k == 1 for constants
    times: np.ndarray | None    # None for constants, else (k,)

    @staticmethod
    def constant(M) -> "CoefficientSchedule":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return CoefficientSchedule(values=M[None, :, :].copy(), times=None)

    @staticmethod
    def sampled(times, values) -> "CoefficientSchedule":
        t = np.asarray(times, dtype=float)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None, None]
        if t.ndim != 1 or vals.ndim != 3 or vals.shape[0] != t.shape[0]:
            raise StructuralError("sampled schedule needs times (k,) and values (k, rows, cols)")
        if t.shape[0] < 2:
            raise StructuralError("sampled schedule needs at least two sample times")
        if np.any(np.diff(t) <= 0.0):
            raise StructuralError("sample times must be strictly increasing")
        return CoefficientSchedule(values=vals.copy(), times=t.copy())

    @staticmethod
    def coerce(obj) -> "CoefficientSchedule":
        """Accept a schedule, a scalar, or a matrix; scalars become 1x1 constants."""
        if isinstance(obj, CoefficientSchedule):
            return obj
        if np.isscalar(obj):
            return CoefficientSchedule.constant([[float(obj)]])
        return CoefficientSchedule.constant(obj)

    @property
    def is_constant(self) -> bool:
        return self.times is None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[2]

    def _check_span(self, t: float) -> float:
        t0, t1 = float(self.times[0]), float(self.times[-1])
        tol = 1e-9 * (1.0 + t1 - t0)
        if t < t0 - tol or t > t1 + tol:
            raise DomainError(f"time {t} outside schedule span [{t0}, {t1}]")
        return min(max(t, t0), t1)

    def at(self, t: float) -> np.ndarray:
        if self.times is None:
            return self.values[0]
        t = self._check_span(float(t))
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        idx = min(max(idx, 0), self.times.shape[0] - 2)
        t0, t1 = self.times[idx], self.times[idx + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.values[idx] + w * self.values[idx + 1]

    def at_many(self, ts: np.ndarray) -> np.ndarray:
        """Vectorized evaluation, shape (len(ts), rows, cols)."""
        ts = np.asarray(ts, dtype=float)
        if self.times is None:
            return np.broadcast_to(self.values[0], (ts.shape[0],) + self.shape).copy()
        for t in (float(ts.min()), float(ts.max())):
            self._check_span(t)
        ts = np.clip(ts, self.times[0], self.times[-1])
        idx = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, self.times.shape[0] - 2)
        t0, t1 = self.times[idx], self.times[idx + 1]
        w = ((ts - t0) / (t1 - t0))[:, None, None]
        return (1.0 - w) * self.values[idx] + w * self.values[idx + 1]

    def map(self, fn) -> "CoefficientSchedule":
        return CoefficientSchedule(
            values=np.stack([fn(v) for v in self.values]), times=self.times
        )


def eval_schedule(sched: CoefficientSchedule, t: float) -> np.ndarray:
    """Evaluate a coefficient schedule at time t (exact at sample nodes)."""
    return sched.at(t)


def _merge_times(a: CoefficientSchedule, b: CoefficientSchedule) -> np.ndarray | None:
    ts = []
    if a.times is not None:
        ts.append(a.times)
    if b.times is not None:
        ts.append(b.times)
    if not ts:
        return None
    return np.unique(np.concatenate(ts))


def schedule_add(a: CoefficientSchedule, b: CoefficientSchedule, sign: float = 1.0) -> CoefficientSchedule:
    """a + sign*b as a schedule; piecewise-linear sums stay exact on merged knots."""
    if a.shape != b.shape:
        raise StructuralError(f"schedule shapes differ: {a.shape} vs {b.shape}")
    times = _merge_times(a, b)
    if times is None:
        return CoefficientSchedule.constant(a.values[0] + sign * b.values[0])
    vals = a.at_many(times) + sign * b.at_many(times)
    return CoefficientSchedule.sampled(times, vals)


def scalar_times_identity(q, n: int) -> CoefficientSchedule:
    """Lift a scalar weight (constant or sampled 1x1) to q(t) * I_n."""
    qs = CoefficientSchedule.coerce(q)
    if qs.shape != (1, 1):
        raise StructuralError(f"scalar schedule expected, got shape {qs.shape}")
    eye = np.eye(n)
    return CoefficientSchedule(values=qs.values[:, 0, 0][:, None, None] * eye, times=qs.times)


_SCHEDULE_FIELDS = (
    "A", "A_mean", "A1", "A1_mean",
    "B", "B_mean", "B1", "B1_mean",
    "Q", "Q_mean", "R", "R_mean",
)
_SYMMETRIC_FIELDS = ("Q", "Q_mean", "R", "R_mean")


@dataclass(frozen=True)
class ProblemDef:
    """A full mean-field LQ problem instance.

    Drift:      A X + B u + A_mean E[X] + B_mean E[u]
    Diffusion:  A1 X + B1 u + A1_mean E[X] + B1_mean E[u]   (scalar Brownian motion)
    Running cost weights Q, R act on X and u; Q_mean, R_mean on their means.
    Terminal weights G on X(T), G_mean on E[X(T)].  X(0) = x0 deterministic.
    """

    n: int
    m: int
    T: float
    x0: np.ndarray
    A: CoefficientSchedule
    A_mean: CoefficientSchedule
    A1: CoefficientSchedule
    A1_mean: CoefficientSchedule
    B: CoefficientSchedule
    B_mean: CoefficientSchedule
    B1: CoefficientSchedule
    B1_mean: CoefficientSchedule
    Q: CoefficientSchedule
    Q_mean: CoefficientSchedule
    R: CoefficientSchedule
    R_mean: CoefficientSchedule
    G: np.ndarray
    G_mean: np.ndarray

    def __post_init__(self):
        n, m = self.n, self.m
        if n < 1 or m < 1:
            raise StructuralError(f"dimensions must be positive, got n={n}, m={m}")
        if self.T <= 0.0:
            raise StructuralError(f"horizon must be positive, got T={self.T}")
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))
        if self.x0.shape != (n,):
            raise StructuralError(f"x0 must have shape ({n},), got {self.x0.shape}")
        for name in _SCHEDULE_FIELDS:
            val = getattr(self, name)
            if not isinstance(val, CoefficientSchedule):
                object.__setattr__(self, name, CoefficientSchedule.constant(val))
        expected = {
            "A": (n, n), "A_mean": (n, n), "A1": (n, n), "A1_mean": (n, n),
            "B": (n, m), "B_mean": (n, m), "B1": (n, m), "B1_mean": (n, m),
            "Q": (n, n), "Q_mean": (n, n), "R": (m, m), "R_mean": (m, m),
        }
        for name, shp in expected.items():
            sched: CoefficientSchedule = getattr(self, name)
            if sched.shape != shp:
                raise StructuralError(f"{name} has shape {sched.shape}, expected {shp}")
            if sched.times is not None:
                tol = 1e-9 * (1.0 + self.T)
                if sched.times[0] > tol or sched.times[-1] < self.T - tol:
                    raise StructuralError(
                        f"{name} samples span [{sched.times[0]}, {sched.times[-1]}], "
                        f"must cover [0, {self.T}]"
                    )
        for name in _SYMMETRIC_FIELDS:
            sched = getattr(self, name)
            for k, M in enumerate(sched.values):
                if _sym_defect(M) > sym_tol(M):
                    raise StructuralError(f"{name} sample {k} is not symmetric")
        for name in ("G", "G_mean"):
            M = np.asarray(getattr(self, name), dtype=float)
            if M.shape != (n, n):
                raise StructuralError(f"{name} must be {n}x{n}, got {M.shape}")
            if _sym_defect(M) > sym_tol(M):
                raise StructuralError(f"{name} is not symmetric")
            object.__setattr__(self, name, M)

    def has_mean_dynamics(self) -> bool:
        return any(
            float(np.max(np.abs(getattr(self, f).values))) > 0.0
            for f in ("A_mean", "A1_mean", "B_mean", "B1_mean")
        )

    def with_x0(self, x0) -> "ProblemDef":
        return replace(self, x0=np.asarray(x0, dtype=float))


@dataclass(frozen=True)
class ConditionRecord:
    name: str
    worst_time: float
    min_eigenvalue: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    """Per-condition semidefiniteness records and the assumption level reached."""

    conditions: tuple[ConditionRecord, ...]
    level: str
    delta: float

    def condition(self, name: str) -> ConditionRecord:
        for rec in self.conditions:
            if rec.name == name:
                return rec
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return self.level == LEVEL_COERCIVE


def _scan_min_eig(sched: CoefficientSchedule, grid: TimeGrid) -> tuple[float, float, float]:
    """(worst time, smallest eigenvalue, spectral radius) over all grid nodes."""
    vals = sched.at_many(grid.times)
    sym = 0.5 * (vals + np.transpose(vals, (0, 2, 1)))
    eigs = np.linalg.eigvalsh(sym)
    k = int(np.argmin(eigs[:, 0]))
    return float(grid.times[k]), float(eigs[k, 0]), float(np.max(np.abs(eigs)))


def validate(prob: ProblemDef, delta: float = DEFAULT_DELTA,
             grid: TimeGrid | None = None) -> ValidationReport:
    """Check the standing positivity assumptions at every grid node.

    Levels: symmetric weights only (base), all weight pairs positive
    semidefinite (middle), control weights coercive by delta (top).
    Failing a semidefiniteness check is a report entry, not an exception.
    """
    if delta <= 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    if grid is None:
        grid = TimeGrid(prob.T, 256)
    q_tot = schedule_add(prob.Q, prob.Q_mean)
    r_tot = schedule_add(prob.R, prob.R_mean)
    recs = []

    def add(name, sched, floor):
        t, ev, rad = _scan_min_eig(sched, grid)
        recs.append(ConditionRecord(name, t, ev, ev >= floor - psd_tol(rad)))

    add("Q_psd", prob.Q, 0.0)
    add("Q_total_psd", q_tot, 0.0)
    add("R_psd", prob.R, 0.0)
    add("R_total_psd", r_tot, 0.0)
    add("R_coercive", prob.R, delta)
    add("R_total_coercive", r_tot, delta)
    for name, M in (("G_psd", prob.G), ("G_total_psd", prob.G + prob.G_mean)):
        eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
        ev, rad = float(eigs[0]), float(np.max(np.abs(eigs)))
        recs.append(ConditionRecord(name, prob.T, ev, ev >= -psd_tol(rad)))

    by = {r.name: r.passed for r in recs}
    psd_ok = all(by[k] for k in ("Q_psd", "Q_total_psd", "R_psd", "R_total_psd",
                                 "G_psd", "G_total_psd"))
    coercive_ok = psd_ok and by["R_coercive"] and by["R_total_coercive"]
    level = LEVEL_COERCIVE if coercive_ok else (LEVEL_PSD if psd_ok else LEVEL_BASE)
    return ValidationReport(conditions=tuple(recs), level=level, delta=delta)


def build_modified_lq(base: ProblemDef, Q0, R0, G0, q=0.0, rho=0.0, g=0.0) -> ProblemDef:
    """Variance-penalized LQ as a mean-field problem.

    Starting from classical weights (Q0, R0, G0) on `base`'s dynamics and
    nonnegative penalty weights q(t) on var[X], rho(t) on var[u], g on
    var[X(T)], the equivalent mean-field weights are

        Q = Q0 + q I,  Q_mean = -q I,   R = R0 + rho I,  R_mean = -rho I,
        G = G0 + g I,  G_mean = -g I.

    The mean-channel weights are indefinite by construction; the pair sums
    recover the classical weights exactly.
    """
    if base.has_mean_dynamics():
        raise DomainError("modified LQ needs mean-free base dynamics")
    if float(g) < 0.0:
        raise DomainError(f"terminal variance weight must be >= 0, got {g}")
    for name, w in (("q", q), ("rho", rho)):
        ws = CoefficientSchedule.coerce(w)
        if float(ws.values.min()) < 0.0:
            raise DomainError(f"penalty weight {name} must be >= 0 everywhere")
    n, m = base.n, base.m
    qI = scalar_times_identity(q, n)
    rhoI = scalar_times_identity(rho, m)
    Q0 = CoefficientSchedule.coerce(Q0)
    R0 = CoefficientSchedule.coerce(R0)
    G0 = np.atleast_2d(np.asarray(G0, dtype=float))
    zero_nn = CoefficientSchedule.constant(np.zeros((n, n)))
    zero_nm = CoefficientSchedule.constant(np.zeros((n, m)))
    return replace(
        base,
        A_mean=zero_nn, A1_mean=zero_nn, B_mean=zero_nm, B1_mean=zero_nm,
        Q=schedule_add(Q0, qI),
        Q_mean=schedule_add(CoefficientSchedule.constant(np.zeros((n, n))), qI, sign=-1.0),
        R=schedule_add(R0, rhoI),
        R_mean=schedule_add(CoefficientSchedule.constant(np.zeros((m, m))), rhoI, sign=-1.0),
        G=G0 + float(g) * np.eye(n),
        G_mean=-float(g) * np.eye(n),
    )


def classical_problem(base: ProblemDef, Q0, R0, G0) -> ProblemDef:
    """The plain LQ problem on `base`'s dynamics: all mean channels zero."""
    return build_modified_lq(base, Q0, R0, G0, q=0.0, rho=0.0, g=0.0)


# ---------------------------------------------------------------------------
# Problem files (JSON).  Each coefficient is {"constant": [[...]]} or
# {"sampled": {"times": [...], "values": [[[...]], ...]}}; G, G_mean are
# plain nested arrays.  Numbers are finite doubles, matrices row-major.
# ---------------------------------------------------------------------------

def _schedule_to_json(s: CoefficientSchedule):
    if s.is_constant:
        return {"constant": s.values[0].tolist()}
    return {"sampled": {"times": s.times.tolist(), "values": s.values.tolist()}}


def _schedule_from_json(obj, name: str) -> CoefficientSchedule:
    if not isinstance(obj, dict):
        raise StructuralError(f"{name}: expected object with 'constant' or 'sampled'")
    if "constant" in obj:
        return CoefficientSchedule.constant(obj["constant"])
    if "sampled" in obj:
        body = obj["sampled"]
        return CoefficientSchedule.sampled(body["times"], body["values"])
    raise StructuralError(f"{name}: expected 'constant' or 'sampled' key")


def problem_to_dict(prob: ProblemDef) -> dict:
    out = {
        "n": prob.n, "m": prob.m, "T": prob.T,
        "x0": prob.x0.tolist(),
        "G": prob.G.tolist(), "G_mean": prob.G_mean.tolist(),
    }
    for name in _SCHEDULE_FIELDS:
        out[name] = _schedule_to_json(getattr(prob, name))
    return out


def problem_from_dict(data: dict) -> ProblemDef:
    try:
        kwargs = {
            "n": int(data["n"]), "m": int(data["m"]), "T": float(data["T"]),
            "x0": np.asarray(data["x0"], dtype=float),
            "G": np.asarray(data["G"], dtype=float),
            "G_mean": np.asarray(data["G_mean"], dtype=float),
        }
    except KeyError as exc:
        raise StructuralError(f"problem file missing field {exc}") from exc
    for name in _SCHEDULE_FIELDS:
        if name not in data:
            raise StructuralError(f"problem file missing field '{name}'")
        kwargs[name] = _schedule_from_json(data[name], name)
    arrays = [kwargs["x0"], kwargs["G"], kwargs["G_mean"]] + [
        kwargs[name].values for name in _SCHEDULE_FIELDS
    ]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise StructuralError("problem file contains non-finite numbers")
    return ProblemDef(**kwargs)


def save_problem(prob: ProblemDef, path) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(prob), fh, indent=1)
        fh.write("\n")


def load_problem(path) -> ProblemDef:
    with open(path) as fh:
        data = json.load(fh)
    return problem_from_dict(data)
