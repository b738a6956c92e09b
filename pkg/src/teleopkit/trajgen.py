"""Online jerk-limited trajectory generation: 30 Hz targets to a 1 kHz stream.

Each axis plans a time-optimal third-order profile (phases of constant jerk
in {-j_max, 0, +j_max}) from an arbitrary (q, v, a) to rest at the target,
honoring |v| <= v_max, |a| <= a_max, |jerk| <= j_max. A new target replans
from the currently sampled state, so position, velocity, and acceleration are
continuous across re-targets.

Profile construction: a velocity ramp A takes (v0, a0) to a cruise velocity
with zero acceleration, ramp C takes the cruise velocity to rest, and an
optional constant-velocity phase between them absorbs the remaining
displacement. The cruise velocity solves a monotone displacement equation by
bisection (tolerance ~1e-12); degenerate zero-length phases collapse exactly.

States generated by these profiles always satisfy v + a*|a|/(2*j_max) within
[-v_max, v_max], which is what makes re-planning from any sampled state free
of transient velocity overshoot. Arbitrary externally supplied states that
violate that margin can force a transient above v_max (physics, not a bug);
`plan` only rejects states beyond the v/a limits themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_BISECT_TOL = 1e-12
_REST_EPS = 1e-12


class TrajInfeasibleError(ValueError):
    """Initial state violates the velocity or acceleration limit."""


@dataclass(frozen=True)
class Limits:
    v_max: float
    a_max: float
    j_max: float

    def __post_init__(self):
        if not (self.v_max > 0 and self.a_max > 0 and self.j_max > 0):
            raise ValueError("limits must be strictly positive")


@dataclass
class TrajectoryState:
    q: float
    v: float
    a: float
    t: float = 0.0


@dataclass
class Profile:
    """Piecewise-constant-jerk profile; samples analytically, holds at the end."""

    starts: np.ndarray  # (K+1,) phase boundary times, starts[0] == 0
    q: np.ndarray       # state at each boundary
    v: np.ndarray
    a: np.ndarray
    jerks: np.ndarray   # (K,)
    target: float

    @property
    def duration(self) -> float:
        return float(self.starts[-1])

    @property
    def end_q(self) -> float:
        return float(self.q[-1])

    def sample(self, t: float) -> TrajectoryState:
        if t >= self.duration:
            return TrajectoryState(self.end_q, 0.0, 0.0, t)
        if t <= 0.0:
            return TrajectoryState(float(self.q[0]), float(self.v[0]), float(self.a[0]), t)
        k = int(np.searchsorted(self.starts, t, side="right")) - 1
        k = min(max(k, 0), len(self.jerks) - 1)
        tau = t - self.starts[k]
        j = self.jerks[k]
        a = self.a[k] + j * tau
        v = self.v[k] + self.a[k] * tau + 0.5 * j * tau * tau
        q = self.q[k] + self.v[k] * tau + 0.5 * self.a[k] * tau * tau + j * tau**3 / 6.0
        return TrajectoryState(float(q), float(v), float(a), t)

    def sample_many(self, ts: np.ndarray):
        """Vectorized (q, v, a) arrays for an array of times."""
        ts = np.asarray(ts, dtype=float)
        if len(self.jerks) == 0:
            q = np.full_like(ts, self.end_q)
            return q, np.zeros_like(ts), np.zeros_like(ts)
        k = np.clip(np.searchsorted(self.starts, ts, side="right") - 1, 0, len(self.jerks) - 1)
        tau = ts - self.starts[k]
        j = self.jerks[k]
        a = self.a[k] + j * tau
        v = self.v[k] + self.a[k] * tau + 0.5 * j * tau * tau
        q = self.q[k] + self.v[k] * tau + 0.5 * self.a[k] * tau**2 + j * tau**3 / 6.0
        done = ts >= self.duration
        q[done] = self.end_q
        v[done] = 0.0
        a[done] = 0.0
        return q, v, a


def _integrate_phases(q0, v0, a0, phases):
    """Boundary states for a list of (duration, jerk) segments."""
    starts = [0.0]
    qs, vs, accs = [q0], [v0], [a0]
    for dt, j in phases:
        q, v, a = qs[-1], vs[-1], accs[-1]
        qs.append(q + v * dt + 0.5 * a * dt * dt + j * dt**3 / 6.0)
        vs.append(v + a * dt + 0.5 * j * dt * dt)
        accs.append(a + j * dt)
        starts.append(starts[-1] + dt)
    return (np.array(starts), np.array(qs), np.array(vs), np.array(accs))


def _ramp_phases(v0: float, a0: float, v1: float, limits: Limits):
    """Time-optimal phases taking (v0, a0) to (v1, accel 0).

    Shape: jerk to a peak acceleration, optionally hold it, jerk back to zero.
    The peak solves a monotone velocity-change equation.
    """
    j = limits.j_max
    a_max = limits.a_max
    dv = v1 - v0

    def dv_no_hold(apk):
        return ((a0 + apk) * abs(apk - a0) + apk * abs(apk)) / (2.0 * j)

    hold = 0.0
    if dv >= dv_no_hold(a_max):
        apk = a_max
        hold = (dv - dv_no_hold(a_max)) / a_max
    elif dv <= dv_no_hold(-a_max):
        apk = -a_max
        hold = (dv - dv_no_hold(-a_max)) / (-a_max)
    else:
        lo, hi = -a_max, a_max
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if dv_no_hold(mid) < dv:
                lo = mid
            else:
                hi = mid
            if hi - lo <= _BISECT_TOL * max(1.0, a_max):
                break
        apk = 0.5 * (lo + hi)

    phases = []
    t1 = abs(apk - a0) / j
    if t1 > 0.0:
        phases.append((t1, j if apk > a0 else -j))
    if hold > 0.0:
        phases.append((hold, 0.0))
    t3 = abs(apk) / j
    if t3 > 0.0:
        phases.append((t3, -j if apk > 0 else j))
    return phases


def _ramp_displacement(v0, a0, v1, limits):
    phases = _ramp_phases(v0, a0, v1, limits)
    starts, qs, vs, accs = _integrate_phases(0.0, v0, a0, phases)
    return float(qs[-1]), phases


def plan(state: TrajectoryState, target_q: float, limits: Limits,
         tol: float = 1e-9) -> Profile:
    """Profile from the given state to rest at target_q.

    Raises TrajInfeasibleError if the initial velocity or acceleration is
    already beyond its limit (callers clamp first).
    """
    if not np.isfinite([state.q, state.v, state.a, target_q]).all():
        raise TrajInfeasibleError("non-finite state or target")
    if abs(state.v) > limits.v_max + tol:
        raise TrajInfeasibleError(f"|v|={abs(state.v):.6g} exceeds v_max={limits.v_max}")
    if abs(state.a) > limits.a_max + tol:
        raise TrajInfeasibleError(f"|a|={abs(state.a):.6g} exceeds a_max={limits.a_max}")

    q0, v0, a0 = state.q, state.v, state.a
    dq = target_q - q0
    if abs(dq) <= _REST_EPS and abs(v0) <= _REST_EPS and abs(a0) <= _REST_EPS:
        return Profile(np.array([0.0]), np.array([target_q]), np.zeros(1),
                       np.zeros(1), np.zeros(0), target_q)

    v0 = float(np.clip(v0, -limits.v_max, limits.v_max))
    a0 = float(np.clip(a0, -limits.a_max, limits.a_max))

    d_stop, stop_phases = _ramp_displacement(v0, a0, 0.0, limits)
    if abs(dq - d_stop) <= _REST_EPS:
        starts, qs, vs, accs = _integrate_phases(q0, v0, a0, stop_phases)
        return Profile(starts, qs, vs, accs,
                       np.array([j for _, j in stop_phases]), target_q)

    s = 1.0 if dq > d_stop else -1.0

    def total_displacement(vc):
        da, pa = _ramp_displacement(v0, a0, s * vc, limits)
        dc, pc = _ramp_displacement(s * vc, 0.0, 0.0, limits)
        return da + dc, pa, pc

    d_full, pa_full, pc_full = total_displacement(limits.v_max)
    if s * (dq - d_full) >= 0.0:
        cruise = (dq - d_full) / (s * limits.v_max)
        phases = pa_full + ([(cruise, 0.0)] if cruise > 0.0 else []) + pc_full
    else:
        lo, hi = 0.0, limits.v_max
        pa, pc = pa_full, pc_full
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            d_mid, pa_mid, pc_mid = total_displacement(mid)
            if s * (d_mid - dq) < 0.0:
                lo = mid
            else:
                hi = mid
                pa, pc = pa_mid, pc_mid
            if hi - lo <= _BISECT_TOL * max(1.0, limits.v_max):
                break
        d_fin, pa, pc = total_displacement(0.5 * (lo + hi))
        phases = pa + pc

    phases = [(dt, j) for dt, j in phases if dt > 0.0]
    starts, qs, vs, accs = _integrate_phases(q0, v0, a0, phases)
    return Profile(starts, qs, vs, accs, np.array([j for _, j in phases]), target_q)


# The spec-facing name: each incoming action re-targets the generator.
retarget = plan


class OnlineAxis:
    """Single-joint online generator driven by an integer-microsecond clock."""

    def __init__(self, q0: float, limits: Limits):
        self.limits = limits
        self.profile = plan(TrajectoryState(q0, 0.0, 0.0), q0, limits)
        self.profile_start_us = 0

    def state_at(self, t_us: int) -> TrajectoryState:
        st = self.profile.sample((t_us - self.profile_start_us) * 1e-6)
        st.t = t_us * 1e-6
        return st

    def set_target(self, t_us: int, target_q: float):
        st = self.state_at(t_us)
        st.v = float(np.clip(st.v, -self.limits.v_max, self.limits.v_max))
        st.a = float(np.clip(st.a, -self.limits.a_max, self.limits.a_max))
        self.profile = plan(st, target_q, self.limits)
        self.profile_start_us = t_us


@dataclass
class BridgeTelemetry:
    commands: int = 0
    ticks: int = 0
    timeouts: int = 0
    timed_out: bool = False


class Bridge:
    """Multi-axis 30 Hz command to 1 kHz state bridge on a virtual us clock.

    `command` re-plans every axis from its currently sampled state; `tick`
    advances one control period and returns the sampled (q, v, a) arrays.
    If no command arrives for longer than `stale_after_us`, the bridge keeps
    tracking the last target and raises the TIMEOUT telemetry flag.
    """

    TICK_US = 1000
    STALE_AFTER_US = 500_000

    def __init__(self, q0, limits, position_lo=None, position_hi=None):
        q0 = np.asarray(q0, dtype=float)
        self.n = len(q0)
        if isinstance(limits, Limits):
            limits = [limits] * self.n
        self.axes = [OnlineAxis(float(q0[i]), limits[i]) for i in range(self.n)]
        self.position_lo = position_lo
        self.position_hi = position_hi
        self.now_us = 0
        self.last_cmd_us: int | None = None
        self.telemetry = BridgeTelemetry()

    def command(self, t_us: int, targets):
        targets = np.asarray(targets, dtype=float)
        if self.position_lo is not None:
            targets = np.clip(targets, self.position_lo, self.position_hi)
        for ax, tq in zip(self.axes, targets):
            ax.set_target(t_us, float(tq))
        self.last_cmd_us = t_us
        self.telemetry.commands += 1
        self.telemetry.timed_out = False

    def tick(self):
        """Advance exactly one control period; returns (t_us, q, v, a)."""
        self.now_us += self.TICK_US
        q = np.empty(self.n)
        v = np.empty(self.n)
        a = np.empty(self.n)
        for i, ax in enumerate(self.axes):
            st = ax.state_at(self.now_us)
            q[i], v[i], a[i] = st.q, st.v, st.a
        if (self.last_cmd_us is not None
                and self.now_us - self.last_cmd_us > self.STALE_AFTER_US):
            if not self.telemetry.timed_out:
                self.telemetry.timeouts += 1
            self.telemetry.timed_out = True
        self.telemetry.ticks += 1
        return self.now_us, q, v, a


def bridge_stream(actions, q0, limits, duration_s: float):
    """Deterministic offline form: replay timestamped actions through a Bridge.

    `actions` is an iterable of (t_seconds, targets). Yields one
    (t_us, q, v, a) tuple per 1 ms tick of the virtual clock. A command with
    timestamp strictly before a tick is applied before that tick; a command
    stamped exactly on a tick takes effect after it (the tick reports the
    pre-command state, matching the server's lockstep reply convention).
    """
    bridge = Bridge(q0, limits)
    pending = [(int(round(t * 1e6)), np.asarray(tg, dtype=float)) for t, tg in actions]
    pending.sort(key=lambda x: x[0])
    i = 0
    n_ticks = int(round(duration_s * 1000))
    for _ in range(n_ticks):
        next_t = bridge.now_us + Bridge.TICK_US
        while i < len(pending) and pending[i][0] < next_t:
            bridge.command(pending[i][0], pending[i][1])
            i += 1
        yield bridge.tick()
