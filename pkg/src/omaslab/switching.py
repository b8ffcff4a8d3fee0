"""Switching signals, activation ratios and piecewise average dwell time.

A signal is a cadlag, piecewise-constant mode map on [t0, tf] with a
migration event at every interior boundary. Certification constrains every
suffix [t_j, tf] (j = 0 is t0, j = k is the k-th switching instant):

  ratio condition   T_s(t_j,tf) (g_s - g) + T_u(t_j,tf) (g_u - g) <= 0
  dwell condition   adt(t_j,tf) >= -ln(jump_gain) / g

with g the common (negative) comparison rate, g_s / g_u the worst stable /
unstable mode rates, T_s / T_u the stable / unstable activation times, and
adt the piecewise average dwell time. Switches are counted strictly after
t_j: each suffix is treated as a fresh run whose jump at t_j was billed to
the previous suffix.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .seeding import STREAM_SIGNAL, stream_rng
from .transition import MigrationEvent

_TIME_EPS = 1e-12


@dataclass(frozen=True)
class Segment:
    start: float
    mode: int


@dataclass(frozen=True, eq=False)
class SwitchingSignal:
    """Piecewise-constant mode signal with per-boundary migration events."""

    t0: float
    tf: float
    segments: tuple[Segment, ...]
    events: tuple[MigrationEvent, ...] = ()

    def __post_init__(self) -> None:
        if not self.segments:
            raise ConfigError("a signal needs at least one segment")
        if self.tf <= self.t0:
            raise ConfigError(f"empty horizon [{self.t0}, {self.tf}]")
        if abs(self.segments[0].start - self.t0) > _TIME_EPS:
            raise ConfigError("first segment must start at t0")
        starts = [s.start for s in self.segments]
        if any(b - a <= _TIME_EPS for a, b in zip(starts, starts[1:])):
            raise ConfigError("segment start times must be strictly increasing")
        if starts[-1] >= self.tf - _TIME_EPS:
            raise ConfigError("last segment starts at or after tf")
        if any(a.mode == b.mode for a, b in zip(self.segments, self.segments[1:])):
            raise ConfigError("consecutive segments must switch to a different mode")
        if len(self.events) != len(self.segments) - 1:
            raise ConfigError(
                f"{len(self.segments) - 1} boundaries but {len(self.events)} events"
            )
        for k, ev in enumerate(self.events, start=1):
            if ev.mode_before != self.segments[k - 1].mode or ev.mode_after != self.segments[k].mode:
                raise ConfigError(
                    f"event {k} maps modes {ev.mode_before}->{ev.mode_after} but the "
                    f"boundary switches {self.segments[k - 1].mode}->{self.segments[k].mode}"
                )

    @property
    def switch_times(self) -> tuple[float, ...]:
        return tuple(s.start for s in self.segments[1:])

    @property
    def n_switches(self) -> int:
        return len(self.segments) - 1

    def mode_at(self, t: float) -> int:
        """Cadlag evaluation: the mode active on [start, next_start)."""
        if t < self.t0 - _TIME_EPS or t > self.tf + _TIME_EPS:
            raise ConfigError(f"time {t} outside [{self.t0}, {self.tf}]")
        starts = [s.start for s in self.segments]
        idx = bisect_right(starts, t) - 1
        return self.segments[max(idx, 0)].mode

    def segment_bounds(self, i: int) -> tuple[float, float]:
        end = self.segments[i + 1].start if i + 1 < len(self.segments) else self.tf
        return self.segments[i].start, end

    def suffix_start(self, j: int) -> float:
        """t_0 for j = 0, the j-th switching instant for j >= 1."""
        if j < 0 or j > self.n_switches:
            raise ConfigError(f"suffix index {j} outside 0..{self.n_switches}")
        return self.t0 if j == 0 else self.switch_times[j - 1]


def activation_times(
    sig: SwitchingSignal, stable_set: set[int], from_time: float | None = None
) -> tuple[float, float]:
    """Stable and unstable activation time over [from_time, tf]."""
    start = sig.t0 if from_time is None else float(from_time)
    if start < sig.t0 - _TIME_EPS or start > sig.tf + _TIME_EPS:
        raise ConfigError(f"from_time {start} outside [{sig.t0}, {sig.tf}]")
    t_s = 0.0
    t_u = 0.0
    for i in range(len(sig.segments)):
        a, b = sig.segment_bounds(i)
        lo, hi = max(a, start), min(b, sig.tf)
        if hi <= lo:
            continue
        if sig.segments[i].mode in stable_set:
            t_s += hi - lo
        else:
            t_u += hi - lo
    return t_s, t_u


def count_switches_after(sig: SwitchingSignal, t: float) -> int:
    """Switching instants strictly inside (t, tf]."""
    return sum(1 for tk in sig.switch_times if tk > t + _TIME_EPS)


def piecewise_adt(sig: SwitchingSignal, chatter_bound: float, j: int) -> float:
    """Average dwell time of the suffix starting at index j.

    Returns (tf - t_j) / (N - chatter_bound) where N counts switches strictly
    after t_j, or +inf when N <= chatter_bound (the suffix is unconstrained).
    """
    if chatter_bound < 0:
        raise ConfigError(f"chatter_bound must be >= 0, got {chatter_bound}")
    t_j = sig.suffix_start(j)
    n = count_switches_after(sig, t_j)
    if n <= chatter_bound:
        return math.inf
    return (sig.tf - t_j) / (n - chatter_bound)


@dataclass(frozen=True)
class SwitchingBudget:
    """Certified rates and gains a signal must respect.

    gamma_common in (gamma_stable_max, 0); gamma_unstable_max is None when no
    unstable mode exists (the ratio condition is then vacuous); jump_gain is
    the worst-case energy growth across one switching instant (>= 1).
    """

    chatter_bound: float
    gamma_common: float
    gamma_stable_max: float
    gamma_unstable_max: float | None
    jump_gain: float

    def __post_init__(self) -> None:
        if self.chatter_bound < 0:
            raise ConfigError(f"chatter_bound must be >= 0, got {self.chatter_bound}")
        if not (self.gamma_stable_max < self.gamma_common < 0.0):
            raise ConfigError(
                f"gamma_common {self.gamma_common} must lie in "
                f"({self.gamma_stable_max}, 0)"
            )
        if self.gamma_unstable_max is not None and self.gamma_unstable_max < 0.0:
            raise ConfigError(
                f"gamma_unstable_max {self.gamma_unstable_max} must be >= 0"
            )
        if self.jump_gain < 1.0:
            raise ConfigError(f"jump_gain must be >= 1, got {self.jump_gain}")

    @property
    def ratio_floor(self) -> float:
        """Minimum admissible T_s / T_u over any constrained suffix."""
        if self.gamma_unstable_max is None:
            return 0.0
        return (self.gamma_unstable_max - self.gamma_common) / (
            self.gamma_common - self.gamma_stable_max
        )

    @property
    def dwell_floor(self) -> float:
        """Minimum admissible piecewise average dwell time."""
        return -math.log(self.jump_gain) / self.gamma_common


@dataclass(frozen=True)
class SuffixCheck:
    j: int
    start: float
    t_stable: float
    t_unstable: float
    ratio_slack: float
    adt: float
    adt_slack: float


@dataclass(frozen=True)
class ValidationReport:
    """Per-suffix outcome of the two switching conditions."""

    ok: bool
    ratio_ok: bool
    adt_ok: bool
    worst_ratio_j: int
    worst_adt_j: int
    ratio_slack_min: float
    adt_slack_min: float
    suffixes: tuple[SuffixCheck, ...] = field(repr=False, default=())


def validate_switching(
    sig: SwitchingSignal,
    budget: SwitchingBudget,
    stable_set: set[int],
    suffixes: str = "all",
) -> ValidationReport:
    """Check the ratio and dwell conditions on suffixes of the signal.

    suffixes = "all" checks every j in {0..n_switches}; "first" checks only
    j = 0, the weaker variant appropriate for the vanishing-perturbation
    (asymptotic) setting. Slacks are signed so that >= 0 means satisfied.
    """
    if suffixes not in ("all", "first"):
        raise ConfigError(f"suffixes must be 'all' or 'first', got {suffixes!r}")
    g = budget.gamma_common
    g_s = budget.gamma_stable_max
    g_u = budget.gamma_unstable_max
    dwell_floor = budget.dwell_floor
    indices = range(sig.n_switches + 1) if suffixes == "all" else (0,)
    checks = []
    for j in indices:
        start = sig.suffix_start(j)
        t_s, t_u = activation_times(sig, stable_set, start)
        lhs = t_s * (g_s - g) + (0.0 if g_u is None else t_u * (g_u - g))
        adt = piecewise_adt(sig, budget.chatter_bound, j)
        checks.append(
            SuffixCheck(
                j=j,
                start=start,
                t_stable=t_s,
                t_unstable=t_u,
                ratio_slack=-lhs,
                adt=adt,
                adt_slack=adt - dwell_floor,
            )
        )
    worst_ratio = min(checks, key=lambda c: c.ratio_slack)
    worst_adt = min(checks, key=lambda c: c.adt_slack)
    ratio_ok = worst_ratio.ratio_slack >= 0.0
    adt_ok = worst_adt.adt_slack >= 0.0
    return ValidationReport(
        ok=ratio_ok and adt_ok,
        ratio_ok=ratio_ok,
        adt_ok=adt_ok,
        worst_ratio_j=worst_ratio.j,
        worst_adt_j=worst_adt.j,
        ratio_slack_min=worst_ratio.ratio_slack,
        adt_slack_min=worst_adt.adt_slack,
        suffixes=tuple(checks),
    )


@dataclass(frozen=True)
class SignalGenSpec:
    """Recipe for a compliant signal.

    ratio_floor / dwell_floor are the certified minimums the emitted signal
    must clear; margin is the relative headroom above both (default 5%).
    """

    horizon: float
    stable_modes: tuple[int, ...]
    unstable_modes: tuple[int, ...]
    ratio_floor: float
    dwell_floor: float
    seed: int = 0
    margin: float = 0.05
    t0: float = 0.0

    def __post_init__(self) -> None:
        if self.horizon <= 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if not self.stable_modes:
            raise ConfigError("at least one stable mode is required")
        if self.ratio_floor < 0 or self.dwell_floor < 0:
            raise ConfigError("ratio_floor and dwell_floor must be >= 0")
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")


def generate_signal(
    spec: SignalGenSpec,
    event_builder=None,
) -> SwitchingSignal:
    """Emit a signal satisfying both suffix conditions with margin.

    Layout: stable lead-in, then alternating (unstable, stable) blocks, the
    stable tail absorbing the slack. Every unstable block of length u is
    preceded and followed by at least ratio * u of stable time, so every
    suffix [t_j, tf] and every prefix window [t0, t] satisfies both
    conditions (the prefix windows are what make the energy envelope valid
    pointwise rather than only at tf). Unstable modes are used round-robin,
    shuffled once by the seed.

    event_builder(k, mode_before, mode_after) -> MigrationEvent supplies the
    boundary events; with None the caller must attach events afterwards (only
    valid when rebuilding, so a builder is effectively required here).
    """
    r = spec.ratio_floor * (1.0 + spec.margin)
    dwell = spec.dwell_floor * (1.0 + spec.margin)
    rng = stream_rng(spec.seed, STREAM_SIGNAL)

    if not spec.unstable_modes:
        segments = [Segment(start=spec.t0, mode=spec.stable_modes[0])]
        return SwitchingSignal(
            t0=spec.t0, tf=spec.t0 + spec.horizon, segments=tuple(segments), events=()
        )

    # block sizing: unstable length u, stable companions r*u, pair >= 2*dwell
    u = max(2.0 * dwell / (1.0 + r), 1e-3 * spec.horizon)
    s = max(r * u, dwell)  # a lone stable block must itself clear the dwell floor
    pair = u + s
    n_pairs = int(math.floor((spec.horizon - s) / pair))
    if n_pairs < 1:
        raise ConfigError(
            f"horizon {spec.horizon} too short for one compliant block "
            f"(needs at least {pair + s:.3f})"
        )
    tail = spec.horizon - n_pairs * pair  # >= s by the floor above

    stable_seq = [spec.stable_modes[i % len(spec.stable_modes)] for i in range(n_pairs + 1)]
    unstable_seq = [spec.unstable_modes[i % len(spec.unstable_modes)] for i in range(n_pairs)]
    rng.shuffle(unstable_seq)

    times_modes: list[tuple[float, int]] = []
    t = spec.t0
    for i in range(n_pairs):
        times_modes.append((t, stable_seq[i]))
        t += s
        times_modes.append((t, unstable_seq[i]))
        t += u
    times_modes.append((t, stable_seq[n_pairs]))

    # merge accidental repeats (same stable mode back to back cannot happen
    # with alternation, but a 1-element stable pool plus 1-element unstable
    # pool stays legal since stable != unstable)
    segments = tuple(Segment(start=tm[0], mode=tm[1]) for tm in times_modes)
    events = []
    if event_builder is not None:
        for k in range(1, len(segments)):
            events.append(event_builder(k, segments[k - 1].mode, segments[k].mode))
    sig = SwitchingSignal(
        t0=spec.t0, tf=spec.t0 + spec.horizon, segments=segments, events=tuple(events)
    )
    return sig


def brute_force_suffix_scan(
    sig: SwitchingSignal,
    budget: SwitchingBudget,
    stable_set: set[int],
) -> bool:
    """Reference implementation of validate_switching's verdict.

    Recounts everything from scratch by direct interval arithmetic; used by
    tests as an independent oracle and kept here so the CLI can expose it for
    debugging mismatches.
    """
    starts = [sig.t0, *sig.switch_times]
    boundaries = [*starts[1:], sig.tf]
    for j, tj in enumerate(starts):
        n = 0
        for tk in starts[1:]:
            if tk > tj + _TIME_EPS:
                n += 1
        if n <= budget.chatter_bound:
            adt = math.inf
        else:
            adt = (sig.tf - tj) / (n - budget.chatter_bound)
        if adt < budget.dwell_floor - 1e-12:
            return False
        t_s = t_u = 0.0
        for i, seg in enumerate(sig.segments):
            a = seg.start
            b = boundaries[i]
            lo = max(a, tj)
            if b <= lo:
                continue
            if seg.mode in stable_set:
                t_s += b - lo
            else:
                t_u += b - lo
        g_u = budget.gamma_unstable_max
        lhs = t_s * (budget.gamma_stable_max - budget.gamma_common)
        if g_u is not None:
            lhs += t_u * (g_u - budget.gamma_common)
        if lhs > 1e-12:
            return False
    return True
