"""Jump maps for agents joining and leaving at switching instants.

A migration event replaces the agent set of the outgoing mode (N- agents)
with that of the incoming mode (N+ agents). Surviving agents keep their
states, leavers are dropped, joiners enter relative to the leader. The
bookkeeping is carried by a 0/1 migration matrix built from the identity by
deleting the rows of leavers and inserting zero rows at join positions
(leaves are applied first when both occur at once).

On top of pure relabelling, events may inject impulses: a state-independent
vector, plus a state-dependent term produced by an arbitrary gain matrix
acting on the pre-jump tracking errors. The central algebraic property of
this module is that jumping the full stacked state and then forming errors
gives the same result as jumping the errors directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class MigrationEvent:
    """One join/leave event at a switching boundary.

    joins are positions in the incoming mode's agent numbering, leaves are
    positions in the outgoing mode's numbering, both 1-based and sorted.
    ``impulse`` is a state-independent additive vector of dimension
    p * n_after; ``dep_gain`` maps pre-jump stacked errors (p * n_before) to
    an additive state-dependent impulse (p * n_after). Either may be None.
    """

    time_index: int
    mode_before: int
    mode_after: int
    n_before: int
    n_after: int
    joins: tuple[int, ...] = ()
    leaves: tuple[int, ...] = ()
    impulse: np.ndarray | None = None
    dep_gain: np.ndarray | None = None

    def __post_init__(self) -> None:
        joins = tuple(sorted(int(j) for j in self.joins))
        leaves = tuple(sorted(int(v) for v in self.leaves))
        object.__setattr__(self, "joins", joins)
        object.__setattr__(self, "leaves", leaves)
        if len(set(joins)) != len(joins) or len(set(leaves)) != len(leaves):
            raise ConfigError("joins and leaves must not repeat positions")
        if any(j < 1 or j > self.n_after for j in joins):
            raise ConfigError(f"join positions {joins} outside 1..{self.n_after}")
        if any(v < 1 or v > self.n_before for v in leaves):
            raise ConfigError(f"leave positions {leaves} outside 1..{self.n_before}")
        if self.n_after != self.n_before + len(joins) - len(leaves):
            raise ConfigError(
                f"size bookkeeping broken: {self.n_before} agents "
                f"+ {len(joins)} joins - {len(leaves)} leaves != {self.n_after}"
            )
        if self.impulse is not None:
            object.__setattr__(self, "impulse", np.asarray(self.impulse, dtype=float))
        if self.dep_gain is not None:
            object.__setattr__(self, "dep_gain", np.asarray(self.dep_gain, dtype=float))


def build_migration_matrix(ev: MigrationEvent) -> np.ndarray:
    """0/1 matrix of shape (n_after, n_before).

    Row r is the unit vector of the surviving agent that lands at position r,
    or all zero when position r is a joiner. Columns of leavers are zero.
    """
    keep = [i for i in range(ev.n_before) if (i + 1) not in set(ev.leaves)]
    core = np.eye(ev.n_before)[keep]
    xi = np.zeros((ev.n_after, ev.n_before))
    join_set = set(ev.joins)
    r = 0
    for pos in range(1, ev.n_after + 1):
        if pos not in join_set:
            xi[pos - 1] = core[r]
            r += 1
    return xi


def error_projector(n: int, p: int) -> np.ndarray:
    """Maps the leader-included stack to tracking errors: e_i = x_i - x_0."""
    return np.kron(np.hstack([-np.ones((n, 1)), np.eye(n)]), np.eye(p))


@lru_cache(maxsize=None)
def _cached_error_projector(n: int, p: int) -> np.ndarray:
    return error_projector(n, p)


def _leader_tile_from_full(n_rows: int, n_cols: int, p: int) -> np.ndarray:
    """Maps a full stack of n_cols agents to -1 tensor leader, n_rows copies."""
    return np.kron(np.hstack([-np.ones((n_rows, 1)), np.zeros((n_rows, n_cols))]), np.eye(p))


@dataclass(frozen=True, eq=False)
class TransitionMap:
    """All matrices needed to execute one migration event.

    migration            0/1 agent relabelling (n_after x n_before)
    migration_stacked    same, expanded blockwise to states (p n+ x p n-)
    augmented            jump matrix on the leader-included stack
    err_jump             jump matrix on stacked errors (migration + dep gain)
    state_impulse        produces the state-dependent impulse from the full
                         pre-jump stack, so that the full-state jump and the
                         error jump agree
    impulse              concrete state-independent impulse (p * n_after)
    """

    p: int
    n_before: int
    n_after: int
    mode_before: int
    mode_after: int
    migration: np.ndarray
    migration_stacked: np.ndarray
    augmented: np.ndarray
    err_jump: np.ndarray
    state_impulse: np.ndarray
    impulse: np.ndarray

    @property
    def impulse_norm(self) -> float:
        return float(np.linalg.norm(self.impulse))

    def consistency_residual(self, full_state: np.ndarray) -> float:
        """Norm gap between errors-after-state-jump and error-jump-of-errors."""
        post = apply_state_jump(self, full_state)
        err_after = _cached_error_projector(self.n_after, self.p) @ post
        err_before = _cached_error_projector(self.n_before, self.p) @ full_state
        direct = self.err_jump @ err_before + self.impulse
        return float(np.linalg.norm(err_after - direct))


def build_transition_map(ev: MigrationEvent, p: int) -> TransitionMap:
    """Assemble the jump matrices for one event.

    The state-dependent impulse on the full stack is
        dep_gain * errors  +  leader copies for joiners,
    expressed as a single matrix so the full-state jump reads
        x+ = augmented x- + [0_p; impulse + state_impulse x-].
    The induced error jump is err_jump = migration_stacked + dep_gain.
    """
    if p < 1:
        raise ConfigError(f"state dimension p must be >= 1, got {p}")
    xi = build_migration_matrix(ev)
    xi_stacked = np.kron(xi, np.eye(p))
    augmented = np.zeros((p * (ev.n_after + 1), p * (ev.n_before + 1)))
    augmented[:p, :p] = np.eye(p)
    augmented[p:, p:] = xi_stacked

    if ev.dep_gain is None:
        dep = np.zeros((p * ev.n_after, p * ev.n_before))
    else:
        dep = np.asarray(ev.dep_gain, dtype=float)
        if dep.shape != (p * ev.n_after, p * ev.n_before):
            raise ConfigError(
                f"dep_gain shape {dep.shape} does not match "
                f"({p * ev.n_after}, {p * ev.n_before})"
            )
    if ev.impulse is None:
        impulse = np.zeros(p * ev.n_after)
    else:
        impulse = np.asarray(ev.impulse, dtype=float)
        if impulse.shape != (p * ev.n_after,):
            raise ConfigError(
                f"impulse shape {impulse.shape} does not match ({p * ev.n_after},)"
            )

    # dep acts on errors of the outgoing stack; the remaining two terms place
    # joiners at the leader and cancel the leader offset the relabelling drops.
    state_impulse = (
        dep @ error_projector(ev.n_before, p)
        - _leader_tile_from_full(ev.n_after, ev.n_before, p)
        + xi_stacked @ _leader_tile_from_full(ev.n_before, ev.n_before, p)
    )
    err_jump = xi_stacked + dep
    return TransitionMap(
        p=p,
        n_before=ev.n_before,
        n_after=ev.n_after,
        mode_before=ev.mode_before,
        mode_after=ev.mode_after,
        migration=xi,
        migration_stacked=xi_stacked,
        augmented=augmented,
        err_jump=err_jump,
        state_impulse=state_impulse,
        impulse=impulse,
    )


def apply_state_jump(
    tm: TransitionMap, full_state: np.ndarray, impulse: np.ndarray | None = None
) -> np.ndarray:
    """Execute the jump on the leader-included stacked state."""
    x = np.asarray(full_state, dtype=float)
    if x.shape != (tm.p * (tm.n_before + 1),):
        raise ConfigError(
            f"pre-jump state has shape {x.shape}, expected ({tm.p * (tm.n_before + 1)},)"
        )
    phi = tm.impulse if impulse is None else np.asarray(impulse, dtype=float)
    out = tm.augmented @ x
    out[tm.p:] += phi + tm.state_impulse @ x
    return out


def apply_error_jump(tm: TransitionMap, err: np.ndarray) -> np.ndarray:
    """Execute the jump directly on stacked tracking errors."""
    e = np.asarray(err, dtype=float)
    if e.shape != (tm.p * tm.n_before,):
        raise ConfigError(
            f"pre-jump error has shape {e.shape}, expected ({tm.p * tm.n_before},)"
        )
    return tm.err_jump @ e + tm.impulse


@dataclass(frozen=True)
class ImpulseBounds:
    """Worst-case event magnitudes feeding the certificate."""

    impulse_norm_max: float
    err_jump_norm_max: float


def impulse_bounds(events: list[MigrationEvent], p: int) -> ImpulseBounds:
    """Max impulse norm and max induced 2-norm of the error jump matrix
    over the given events (zeros/unit defaults when the list is empty)."""
    phi = 0.0
    gain = 0.0
    for ev in events:
        tm = build_transition_map(ev, p)
        phi = max(phi, tm.impulse_norm)
        gain = max(gain, float(np.linalg.norm(tm.err_jump, 2)))
    return ImpulseBounds(impulse_norm_max=phi, err_jump_norm_max=gain)
