"""Shared oracles and random generators for the test-suite.

Everything here is deliberately independent of the package internals: the
characteristic polynomial comes from the trace recursion, the ultimate
bound is re-derived from scratch, and the random mode/signal factories
construct objects through the public constructors only.
"""

from __future__ import annotations

import math

import numpy as np

from omaslab import (
    Edge,
    MigrationEvent,
    AugmentedMode,
    Segment,
    SignedDigraph,
    SwitchingBudget,
    SwitchingSignal,
)


def char_poly_coeffs(M: np.ndarray) -> list[float]:
    """Characteristic polynomial of M by the Faddeev-LeVerrier recursion.

    Returns [1, c1, ..., cn] with det(lambda I - M) = lambda^n + c1
    lambda^(n-1) + ... + cn. Uses only matrix products and traces, so it is
    an independent check on any eigenvalue claim.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(M)
    for k in range(1, n + 1):
        Mk = M @ Mk + coeffs[-1] * np.eye(n)
        coeffs.append(float(-np.trace(M @ Mk) / k))
    return coeffs


def poly_from_roots(roots) -> list[float]:
    """Monic coefficients [1, c1, ..., cn] from a root multiset."""
    out = np.array([1.0])
    for r in roots:
        out = np.convolve(out, np.array([1.0, -float(r)]))
    return [float(c) for c in out]


def ultimate_bound_reference(
    p_under: float,
    settled_flow: float,
    jump_offset: float,
    mu: float,
    chatter: float,
    contraction: float,
) -> float:
    """Re-derivation of the ultimate tracking bound used as a cross-check.

    Sum of the settled flow drive over the last K+1 inter-switch windows plus
    its geometric tail, and likewise for the impulse drive over K windows;
    both tails are driven by the worst suffix contraction.
    """

    def geom(q: float, k: float) -> float:
        if k <= 0:
            return 0.0
        if abs(q - 1.0) < 1e-12:
            return k
        return (1.0 - q**k) / (1.0 - q)

    if settled_flow == 0.0 and jump_offset == 0.0:
        return 0.0
    if contraction >= 0.0:
        return math.inf
    tail = math.exp(contraction)
    return (1.0 / math.sqrt(p_under)) * (
        settled_flow * (geom(mu, chatter + 1.0) + mu ** (chatter + 1.0) / (1.0 - tail))
        + jump_offset * (geom(mu, chatter) + mu**chatter / (1.0 - tail))
    )


def random_negative_majority_mode(rng: np.random.Generator, max_agents: int = 8) -> AugmentedMode:
    """Unit-weight augmented mode whose negative interactions outnumber the
    positive ones (leader links included in the count)."""
    n = int(rng.integers(2, max_agents + 1))
    edges: list[tuple[int, int, float]] = []
    for src in range(1, n + 1):
        for dst in range(1, n + 1):
            if src == dst or rng.random() > 0.4:
                continue
            w = -1.0 if rng.random() < 0.7 else 1.0
            edges.append((src, dst, w))
    links = [(-1.0 if rng.random() < 0.3 else 0.0) for _ in range(n)]
    pos = sum(1 for e in edges if e[2] > 0)
    neg = sum(1 for e in edges if e[2] < 0) + sum(1 for d in links if d < 0)
    if neg <= pos:
        # flip positive edges until negatives dominate
        flipped = []
        for src, dst, w in edges:
            if w > 0 and neg <= pos:
                flipped.append((src, dst, -1.0))
                pos -= 1
                neg += 1
            else:
                flipped.append((src, dst, w))
        edges = flipped
    if neg == 0:
        edges.append((1, 2, -1.0))
        neg = 1
    g = SignedDigraph(n_agents=n, edges=tuple(Edge(*e) for e in edges))
    return AugmentedMode(graph=g, leader_links=tuple(links))


def pure_relabel_event(k: int, mode_before: int, mode_after: int, n: int) -> MigrationEvent:
    """Population-preserving event with no impulses (sizes both n)."""
    return MigrationEvent(
        time_index=k,
        mode_before=mode_before,
        mode_after=mode_after,
        n_before=n,
        n_after=n,
    )


def random_signal_and_budget(
    rng: np.random.Generator,
) -> tuple[SwitchingSignal, SwitchingBudget, set[int]]:
    """Random piecewise-constant signal plus a random consistent budget.

    Mode ids 1..4 with a random stable subset; segments alternate between the
    two classes often enough to exercise both suffix conditions. Events are
    pure relabellings so the signal constructor's consistency checks pass.
    """
    stable = {1, 2} if rng.random() < 0.5 else {1}
    unstable = {3, 4}
    tf = float(rng.uniform(5.0, 30.0))
    n_switch = int(rng.integers(0, 13))
    times = np.sort(rng.uniform(0.05, tf - 0.05, size=n_switch))
    # enforce strictly increasing with a minimal gap
    for i in range(1, len(times)):
        if times[i] - times[i - 1] < 1e-3:
            times[i] = times[i - 1] + 1e-3
    times = times[times < tf - 1e-3]

    modes = []
    prev = None
    for _ in range(len(times) + 1):
        pool = [m for m in (stable | unstable) if m != prev]
        m = int(rng.choice(pool))
        modes.append(m)
        prev = m
    segments = [Segment(start=0.0, mode=modes[0])]
    for t, m in zip(times, modes[1:]):
        segments.append(Segment(start=float(t), mode=m))
    events = tuple(
        pure_relabel_event(k, segments[k - 1].mode, segments[k].mode, n=2)
        for k in range(1, len(segments))
    )
    sig = SwitchingSignal(t0=0.0, tf=tf, segments=tuple(segments), events=events)

    g_s = -float(rng.uniform(0.5, 3.0))
    g = float(rng.uniform(0.9 * g_s, 0.05 * g_s))  # strictly inside (g_s, 0)
    g_u = None if rng.random() < 0.2 else float(rng.uniform(0.0, 5.0))
    mu = float(rng.uniform(1.0, 5.0))
    chatter = float(rng.choice([0.0, 1.0, 2.5]))
    budget = SwitchingBudget(
        chatter_bound=chatter,
        gamma_common=g,
        gamma_stable_max=g_s,
        gamma_unstable_max=g_u,
        jump_gain=mu,
    )
    return sig, budget, stable
