"""Response-time matrices and the per-joint mode timelines they induce.

A matrix row lists the instants at which that joint toggles between Active
and Passive; zeros are empty slots.  The largest entry defines the horizon
t_f, and entries equal to t_f act as horizon markers rather than toggles
(every joint's timeline ends there anyway).  A Transition interval of
nominal width ``blend`` is centered on each toggle, clipped at 0 and t_f and
shrunk to half the gap between neighboring toggles so windows never overlap.
"""

from __future__ import annotations

import enum
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import ScheduleError


class JointMode(enum.Enum):
    ACTIVE = "A"
    PASSIVE = "P"
    TRANSITION = "T"

    @property
    def letter(self) -> str:
        return self.value

    @staticmethod
    def from_name(name) -> "JointMode":
        if isinstance(name, JointMode):
            return name
        key = str(name).strip().lower()
        table = {"a": JointMode.ACTIVE, "active": JointMode.ACTIVE,
                 "p": JointMode.PASSIVE, "passive": JointMode.PASSIVE,
                 "t": JointMode.TRANSITION, "transition": JointMode.TRANSITION}
        if key not in table:
            raise ValueError(f"unknown joint mode {name!r}")
        return table[key]


def _flip(mode: JointMode) -> JointMode:
    return JointMode.PASSIVE if mode is JointMode.ACTIVE else JointMode.ACTIVE


@dataclass(frozen=True, eq=False)
class ResponseTimeMatrix:
    """N x M matrix of per-joint transition times plus initial modes."""

    times: np.ndarray
    initial_modes: tuple
    horizon: float | None = None

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.times, dtype=float))
        if t.size == 0:
            raise ValueError("response-time matrix must be nonempty")
        object.__setattr__(self, "times", t)
        modes = self.initial_modes
        if isinstance(modes, (str, JointMode)):
            modes = (modes,) * t.shape[0]
        modes = tuple(JointMode.from_name(m) for m in modes)
        if len(modes) != t.shape[0]:
            raise ValueError("need one initial mode per joint row")
        if any(m is JointMode.TRANSITION for m in modes):
            raise ValueError("initial mode must be Active or Passive")
        object.__setattr__(self, "initial_modes", modes)
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def n_joints(self) -> int:
        return self.times.shape[0]

    @property
    def t_f(self) -> float:
        tmax = float(np.max(self.times))
        if self.horizon is not None:
            tmax = max(tmax, self.horizon)
        return tmax

    def row_toggles(self, i: int) -> np.ndarray:
        """Nonzero entries of row i that are true toggles (not t_f markers)."""
        row = self.times[i]
        nz = row[row != 0.0]
        return nz[nz < self.t_f - 1e-12]


@dataclass(frozen=True)
class Interval:
    start: float
    stop: float
    mode: JointMode
    # modes the window blends between (Transition intervals only)
    from_mode: JointMode | None = None
    to_mode: JointMode | None = None

    @property
    def length(self) -> float:
        return self.stop - self.start


@dataclass(frozen=True, eq=False)
class ModeSchedule:
    """Per-joint partition of [0, t_f) into Active/Passive/Transition spans."""

    intervals: tuple          # tuple over joints of tuples of Interval
    t_f: float
    blend: float
    initial_modes: tuple
    matrix: ResponseTimeMatrix

    @property
    def n_joints(self) -> int:
        return len(self.intervals)

    def mode_at(self, joint: int, t: float) -> JointMode:
        """Mode of the right-open interval containing t."""
        if not 0.0 <= t < self.t_f:
            raise ValueError(f"t={t} outside [0, {self.t_f})")
        return self._lookup(joint, t).mode

    def _lookup(self, joint: int, t: float) -> Interval:
        spans = self.intervals[joint]
        starts = [s.start for s in spans]
        idx = bisect_right(starts, t) - 1
        return spans[max(idx, 0)]

    def mode_letter(self, joint: int, t: float) -> str:
        """Like mode_at but tolerant of t == t_f (closing grid point)."""
        if t >= self.t_f:
            return self.intervals[joint][-1].mode.letter
        return self._lookup(joint, t).mode.letter

    def toggle_times(self, joint: int) -> tuple:
        return tuple(self.matrix.row_toggles(joint))

    def first_activation(self, joint: int) -> float:
        """First instant at which the joint is commanded Active."""
        if self.initial_modes[joint] is JointMode.ACTIVE:
            return 0.0
        mode = self.initial_modes[joint]
        for s in self.matrix.row_toggles(joint):
            mode = _flip(mode)
            if mode is JointMode.ACTIVE:
                return float(s)
        return np.inf

    def event_times(self) -> np.ndarray:
        """All toggle instants and blend-window edges in (0, t_f), sorted."""
        pts = []
        for i in range(self.n_joints):
            pts.extend(self.matrix.row_toggles(i))
            for s in self.intervals[i]:
                pts.extend((s.start, s.stop))
        pts = np.array(sorted(p for p in pts if 1e-12 < p < self.t_f - 1e-12))
        if pts.size == 0:
            return pts
        keep = np.concatenate([[True], np.diff(pts) > 1e-12])
        return pts[keep]


def _windows(toggles, blend, t_f):
    """Blend window [a, b) per toggle; shrunk at collisions, clipped at edges."""
    half = blend / 2.0
    out = []
    for j, s in enumerate(toggles):
        h = half
        if j > 0:
            h = min(h, (s - toggles[j - 1]) / 2.0)
        if j + 1 < len(toggles):
            h = min(h, (toggles[j + 1] - s) / 2.0)
        out.append((max(0.0, s - h), min(t_f, s + h)))
    return out


def validate(T: ResponseTimeMatrix, blend: float = 0.05) -> ModeSchedule:
    """Check a response-time matrix and decode its mode timeline.

    Raises ValueError for negative/non-finite entries and ScheduleError for
    a row whose nonzero entries do not strictly increase.
    """
    times = T.times
    if not np.all(np.isfinite(times)):
        raise ValueError("response-time matrix entries must be finite")
    if np.any(times < 0.0):
        raise ValueError("response-time matrix entries must be non-negative")
    if blend < 0:
        raise ValueError("blend width must be non-negative")
    n, m = times.shape
    for i in range(n):
        prev = 0.0
        for j in range(m):
            v = times[i, j]
            if v == 0.0:
                continue
            if v <= prev:
                raise ScheduleError(
                    f"joint {i} column {j}: entry {v} does not increase "
                    f"past {prev}", joint=i, column=j)
            prev = v
    t_f = T.t_f
    if not t_f > 0.0:
        raise ValueError("schedule horizon is zero; give a nonzero entry or horizon")

    all_intervals = []
    for i in range(n):
        toggles = list(T.row_toggles(i))
        mode = T.initial_modes[i]
        spans = []
        cur = 0.0
        for (a, b), s in zip(_windows(toggles, blend, t_f), toggles):
            nxt = _flip(mode)
            if b > a:
                if a - cur > 1e-15:
                    spans.append(Interval(cur, a, mode))
                spans.append(Interval(a, b, JointMode.TRANSITION, mode, nxt))
                cur = b
            else:
                if s - cur > 1e-15:
                    spans.append(Interval(cur, s, mode))
                    cur = s
            mode = nxt
        if t_f - cur > 1e-15:
            spans.append(Interval(cur, t_f, mode))
        # collapse touching windows left by fully-shrunk gaps
        merged = []
        for s in spans:
            if merged and merged[-1].mode is s.mode is JointMode.TRANSITION:
                prev = merged.pop()
                merged.append(Interval(prev.start, s.stop, JointMode.TRANSITION,
                                       prev.from_mode, s.to_mode))
            else:
                merged.append(s)
        all_intervals.append(tuple(merged))

    return ModeSchedule(tuple(all_intervals), t_f, blend, T.initial_modes, T)


def mode_at(schedule: ModeSchedule, joint: int, t: float) -> JointMode:
    return schedule.mode_at(joint, t)


# ---------------------------------------------------------------------------
# unconstrained parameterization for the outer search


class TimeMatrixCodec:
    """Bijection between a matrix's free entries and an unconstrained vector.

    Row entries are cumulative sums of exponentials of the z components, so
    any finite z decodes to a strictly increasing row.  When every row's last
    nonzero entry equals t_f (the shared release/horizon column of the
    built-in scenarios), that column is encoded once as a shared gap past the
    largest row partial sum.
    """

    def __init__(self, template: ResponseTimeMatrix):
        self.template = template
        times = template.times
        n, m = times.shape
        t_f = template.t_f
        self.shared_horizon = template.horizon is None and all(
            times[i][times[i] != 0.0].size > 0
            and abs(times[i][times[i] != 0.0][-1] - t_f) <= 1e-12
            for i in range(n)
        )
        self.slots = []           # (row, col) of gap-encoded entries, row-major
        self.marker_cols = {}     # row -> column holding the shared horizon
        for i in range(n):
            nz_cols = [j for j in range(m) if times[i, j] != 0.0]
            if self.shared_horizon:
                self.marker_cols[i] = nz_cols[-1]
                nz_cols = nz_cols[:-1]
            self.slots.extend((i, j) for j in nz_cols)
        self.n_z = len(self.slots) + (1 if self.shared_horizon else 0)

    def encode(self, T: ResponseTimeMatrix) -> np.ndarray:
        times = T.times
        z = []
        prev_by_row = {}
        for (i, j) in self.slots:
            prev = prev_by_row.get(i, 0.0)
            gap = times[i, j] - prev
            if gap <= 0:
                raise ValueError("matrix does not match the template's slot order")
            z.append(np.log(gap))
            prev_by_row[i] = times[i, j]
        if self.shared_horizon:
            t_f = T.t_f
            top = max((prev_by_row.get(i, 0.0) for i in range(T.n_joints)), default=0.0)
            gap = t_f - top
            if gap <= 0:
                raise ValueError("horizon column must exceed every partial sum")
            z.append(np.log(gap))
        return np.array(z)

    def decode(self, z) -> ResponseTimeMatrix:
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != self.n_z:
            raise ValueError(f"expected z of length {self.n_z}, got {z.size}")
        if not np.all(np.isfinite(z)):
            raise ValueError("z must be finite")
        times = np.zeros_like(self.template.times)
        prev_by_row = {}
        for val, (i, j) in zip(z, self.slots):
            prev = prev_by_row.get(i, 0.0)
            times[i, j] = prev + np.exp(val)
            prev_by_row[i] = times[i, j]
        if self.shared_horizon:
            top = max((prev_by_row.get(i, 0.0) for i in range(times.shape[0])), default=0.0)
            t_f = top + np.exp(z[-1])
            for i, j in self.marker_cols.items():
                times[i, j] = t_f
        return ResponseTimeMatrix(times, self.template.initial_modes, self.template.horizon)


def parameterize(z, template: ResponseTimeMatrix) -> ResponseTimeMatrix:
    """Decode an unconstrained vector into a matrix with the template's layout."""
    return TimeMatrixCodec(template).decode(z)


def unparameterize(T: ResponseTimeMatrix) -> np.ndarray:
    """Encode a matrix into the unconstrained gap-log vector."""
    return TimeMatrixCodec(T).encode(T)
