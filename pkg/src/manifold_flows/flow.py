"""Integration of flows on a fundamental domain with side-pairing continuation.

A trajectory is integrated with an adaptive Dormand-Prince 5(4) pair.  When
a step leaves the domain the crossing is located by bisection on the step
length; the point is then carried back into the domain by the inverse of
the pairing of the face it crossed, and integration resumes there.  In the
quotient manifold this is one continuous orbit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .group import EuclideanIsometry, FundamentalDomain, HalfSpace, Side
from .moebius import PoleError

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
# continuous extension of order 4 (Shampine's coefficients)
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


class InitialPointOutsideDomain(ValueError):
    pass


class BudgetExceededError(RuntimeError):
    pass


class PoleHitError(ArithmeticError):
    pass


@dataclass
class Segment:
    word: tuple[str, ...]
    times: list[float] = field(default_factory=list)
    points: list[np.ndarray] = field(default_factory=list)

    def append(self, t: float, x: np.ndarray):
        self.times.append(float(t))
        self.points.append(np.array(x, dtype=float))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.times), np.array(self.points)


@dataclass
class Event:
    t: float
    side: str
    entry_side: str
    exit_point: np.ndarray
    entry_point: np.ndarray
    pairing: object


@dataclass
class Trajectory:
    segments: list[Segment]
    events: list[Event]
    status: str = "completed"
    message: str = ""
    stop_point: Optional[np.ndarray] = None
    steps: int = 0
    rejected: int = 0

    @property
    def t_final(self) -> float:
        return self.segments[-1].times[-1]

    @property
    def final_point(self) -> np.ndarray:
        return self.segments[-1].points[-1]

    def samples(self):
        """Yield ``(t, x, segment_index, word)`` in order."""
        for k, seg in enumerate(self.segments):
            for t, x in zip(seg.times, seg.points):
                yield t, x, k, seg.word

    def raise_for_status(self):
        if self.status == "pole":
            raise PoleHitError(f"pole hit at {self.stop_point}: {self.message}")
        if self.status == "budget":
            raise BudgetExceededError(self.message)

    def link_residual(self) -> float:
        """Largest mismatch between a mapped exit point and the next segment start."""
        worst = 0.0
        for k, ev in enumerate(self.events):
            mapped = ev.pairing.apply_point(ev.exit_point)
            worst = max(worst, float(np.max(np.abs(mapped - self.segments[k + 1].points[0]))))
        return worst


def _rk_step(f: Callable, x: np.ndarray, fx: np.ndarray, h: float):
    k = [fx]
    for i in range(1, 7):
        xi = x + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(np.asarray(f(xi), dtype=float))
    K = np.array(k)
    x5 = x + h * (_B5 @ K)
    err = h * (_E @ K)
    return x5, err, K


def _dense(x: np.ndarray, K: np.ndarray, h: float, theta: float) -> np.ndarray:
    """Interpolated solution at ``t + theta h`` within a step."""
    powers = np.array([theta, theta ** 2, theta ** 3, theta ** 4])
    return x + h * ((_P @ powers) @ K)


def _outward_rate(constraint, x: np.ndarray, fx: np.ndarray) -> float:
    """Sign-carrying rate at which ``fx`` moves ``x`` out through ``constraint``."""
    speed = float(np.linalg.norm(fx))
    if speed == 0.0:
        return 0.0
    s = 1e-7 * (1.0 + float(np.linalg.norm(x))) / speed
    return float(constraint.value(x + s * fx) - constraint.value(x)) / s


def _crossed_constraint(domain: FundamentalDomain, x: np.ndarray):
    best, best_val = None, -math.inf
    for label, side in domain.sides.items():
        v = float(side.constraint.value(x))
        if v > best_val:
            best, best_val = label, v
    for c in domain.bounds:
        v = float(c.value(x))
        if v > best_val:
            best, best_val = c, v
    return best, best_val


def integrate_wrapped(field_fn: Callable, p0, t_end: float, domain: FundamentalDomain,
                      rtol: float = 1e-9, atol: float = 1e-12, face_tol: float = 1e-10,
                      eq_threshold: float = 1e-12, max_steps: int = 200_000,
                      h0: Optional[float] = None, max_step: float = math.inf) -> Trajectory:
    """Integrate ``x' = field_fn(x)`` on ``domain`` until ``t_end``.

    Exits through a paired side continue from the image under the inverse
    pairing; exits through a truncation bound stop with status
    ``"escaped"``.  Other terminal statuses: ``"equilibrium"`` (field below
    ``eq_threshold``), ``"pole"`` (the field raised :class:`PoleError`),
    ``"budget"`` (``max_steps`` reached) and ``"mismatch"``: the field at
    the entry point immediately leaves through the face just entered, so
    the field does not descend to the quotient there and the orbit cannot
    be continued.
    """
    x = np.array(p0, dtype=float)
    if not domain.contains(x, face_tol):
        raise InitialPointOutsideDomain(f"initial point {x} is not in the closed domain")
    seg = Segment(())
    seg.append(0.0, x)
    traj = Trajectory([seg], [])

    def stop(status, message, point):
        traj.status, traj.message, traj.stop_point = status, message, np.array(point)
        return traj

    try:
        fx = np.asarray(field_fn(x), dtype=float)
    except PoleError as exc:
        return stop("pole", str(exc), x)
    if np.linalg.norm(fx) < eq_threshold:
        return stop("equilibrium", "initial point is an equilibrium", x)

    t = 0.0
    scale0 = atol + rtol * np.abs(x)
    h = h0 if h0 else min(max_step, 0.01 * float(np.linalg.norm(scale0 / rtol)) /
                          max(float(np.linalg.norm(fx)), 1e-300) + 1e-6, t_end)
    h = max(h, 1e-12)
    steps = 0
    while t < t_end:
        if steps >= max_steps:
            return stop("budget", f"step budget {max_steps} exhausted at t={t:.6g}", x)
        steps += 1
        traj.steps = steps
        h = min(h, t_end - t, max_step)
        try:
            x_new, err, K = _rk_step(field_fn, x, fx, h)
        except PoleError as exc:
            # shrink towards the pole; give up once the step is negligible
            if h < 1e-14 * max(1.0, abs(t)):
                return stop("pole", str(exc), x)
            h *= 0.25
            traj.rejected += 1
            continue
        sc = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
        err_norm = float(np.sqrt(np.mean((err / sc) ** 2)))
        if not np.isfinite(err_norm) or err_norm > 1.0:
            fac = 0.2 if not np.isfinite(err_norm) else max(0.2, 0.9 * err_norm ** -0.2)
            h *= fac
            traj.rejected += 1
            if h < 1e-15 * max(1.0, abs(t)):
                return stop("budget", f"step size underflow at t={t:.6g}", x)
            continue

        if domain.max_violation(x_new) > face_tol:
            # bisect the dense output of the step for the first crossing
            lo, hi = 0.0, 1.0
            x_cross, h_cross = x_new, h
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                xm = _dense(x, K, h, mid)
                v = float(domain.max_violation(xm))
                if v > face_tol:
                    hi, x_cross, h_cross = mid, xm, mid * h
                elif v >= -face_tol:
                    x_cross, h_cross = xm, mid * h
                    break
                else:
                    lo = mid
                if hi - lo <= 1e-16:
                    break
            t += h_cross
            seg.append(t, x_cross)
            x = x_cross
            # a corner crossing may need more than one pairing
            for _ in range(4):
                which, val = _crossed_constraint(domain, x)
                if val < -face_tol:
                    break
                if not isinstance(which, str):
                    return stop("escaped", "left the truncated domain", x)
                entry_side = domain.sides[which].partner
                pairing = domain.exit_map(which)
                x_in = pairing.apply_point(x)
                traj.events.append(Event(t, which, entry_side, x.copy(), x_in.copy(), pairing))
                seg = Segment(seg.word + (which,))
                seg.append(t, x_in)
                traj.segments.append(seg)
                x = x_in
                if domain.max_violation(x) <= face_tol:
                    break
            try:
                fx = np.asarray(field_fn(x), dtype=float)
            except PoleError as exc:
                return stop("pole", str(exc), x)
            if traj.events and traj.events[-1].t == t:
                entered = domain.sides[traj.events[-1].entry_side].constraint
                if _outward_rate(entered, x, fx) > 0.0:
                    return stop("mismatch", f"field leaves through {traj.events[-1].entry_side!r} "
                                f"right after entering it at t={t:.6g}", x)
        else:
            t += h
            x, fx = x_new, K[6]
            seg.append(t, x)
            fac = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
            h *= fac
        if np.linalg.norm(fx) < eq_threshold:
            return stop("equilibrium", f"reached an equilibrium at t={t:.6g}", x)
    return traj


def continuity_residual(traj: Trajectory, field_fn: Callable) -> float:
    """Largest relative mismatch at pairing events between the carried field
    vector ``D tau(q) f(q)`` and the field ``f(tau(q))`` where the orbit resumes."""
    if not traj.events:
        raise ValueError("trajectory has no pairing events")
    worst = 0.0
    for ev in traj.events:
        v = np.asarray(field_fn(ev.exit_point), dtype=float)
        carried = ev.pairing.jacobian(ev.exit_point) @ v
        w = np.asarray(field_fn(ev.entry_point), dtype=float)
        worst = max(worst, float(np.linalg.norm(carried - w) / (1.0 + np.linalg.norm(v))))
    return worst


# --- reduced spherical pendulum ---------------------------------------------


@dataclass(frozen=True)
class PendulumParams:
    g_over_l: float = 9.8
    k: float = 0.0

    def __post_init__(self):
        if not self.g_over_l > 0:
            raise ValueError("g/l must be positive")


def pendulum_field(x, params: PendulumParams) -> np.ndarray:
    """Velocity of the pendulum with fixed azimuthal rate, state ``(x1..x4)``."""
    x1, x2, x3, x4 = (float(v) for v in x)
    s, c = math.sin(x1), math.cos(x1)
    return np.array([x2, x4 * x4 * s * c - params.g_over_l * s, params.k, 0.0])


def pendulum_vector_field(params: PendulumParams) -> Callable:
    """Three-dimensional field on ``(x1, x2, x3)`` with ``x4 = k``."""
    g, k = params.g_over_l, params.k
    k2 = k * k

    def f(x):
        s, c = math.sin(x[0]), math.cos(x[0])
        return np.array([x[1], k2 * s * c - g * s, k])

    return f


def pendulum_energy(x, params: PendulumParams) -> float:
    """Planar energy ``x2^2/2 - (g/l) cos x1`` (conserved when ``k = 0``)."""
    return 0.5 * x[1] * x[1] - params.g_over_l * math.cos(x[0])


def klein_bottle_domain(x2_max: float = 10.0) -> FundamentalDomain:
    """The cube ``[-pi, pi] x [-x2_max, x2_max] x [-pi, pi]``.

    The ``x1`` faces are identified by translation.  The ``x3`` faces are
    identified by ``(x1, x2, pi) ~ (-x1, -x2, -pi)``.  The ``x2`` faces are
    a truncation, not sides.
    """
    pi = math.pi
    e1, e2, e3 = np.eye(3)
    shift1 = EuclideanIsometry.translation(2 * pi * e1)
    flip = np.diag([-1.0, -1.0, 1.0])
    up = EuclideanIsometry(tuple(map(tuple, flip)), (0.0, 0.0, 2 * pi))
    down = up.inverse()
    sides = {
        "x1+": Side("x1+", HalfSpace(tuple(e1), pi), "x1-", shift1),
        "x1-": Side("x1-", HalfSpace(tuple(-e1), pi), "x1+", shift1.inverse()),
        "x3+": Side("x3+", HalfSpace(tuple(e3), pi), "x3-", up),
        "x3-": Side("x3-", HalfSpace(tuple(-e3), pi), "x3+", down),
    }
    bounds = [HalfSpace(tuple(e2), x2_max), HalfSpace(tuple(-e2), x2_max)]
    box = ((-pi, pi), (-x2_max, x2_max), (-pi, pi))
    return FundamentalDomain(sides, bounds, sample_box=box, name="solid-klein-bottle")


def torus_cube_domain(half: float = math.pi) -> FundamentalDomain:
    """Cube ``[-half, half]^3`` with opposite faces paired by translation."""
    from .group import box_domain

    return box_domain((half, half, half), name="3-torus")


# --- export -----------------------------------------------------------------


def write_trajectory_csv(traj: Trajectory, path, coords=("x", "y", "r"), extra=None,
                         word_column: str = "word"):
    """Write samples as CSV with columns ``t, coords..., segment, word``.

    ``extra`` appends constant columns, e.g. ``{"x4": k}``.
    """
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *coords, *extra.keys(), "segment", word_column])
        for t, x, k, word in traj.samples():
            w.writerow([repr(float(t)), *(repr(float(v)) for v in x), *(repr(float(v)) for v in extra.values()),
                        k, ".".join(word)])


def write_events_csv(traj: Trajectory, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        n = len(traj.events[0].exit_point) if traj.events else 3
        w.writerow(["t", "side", "entry_side", *(f"exit{i}" for i in range(n)),
                    *(f"entry{i}" for i in range(n))])
        for ev in traj.events:
            w.writerow([repr(ev.t), ev.side, ev.entry_side, *(repr(float(v)) for v in ev.exit_point),
                        *(repr(float(v)) for v in ev.entry_point)])
