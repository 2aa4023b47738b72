"""Batch scheduling policies as pure decision functions.

Three policies see full feedback (batch IDs plus per-slot connectivity of
every receiver):

* ``lr``  — least-received: the useful batch with the minimum ID.
* ``rs``  — random selection: a useful batch drawn with probability
  proportional to its number of connected, unfinished receivers.
* ``mg``  — maximum gain: the batch beneficial to the most connected
  receivers this slot, ties toward the smaller batch ID.

``lr-ack`` sees batch IDs only (receivers ACK per decoded batch, so the base
station never learns who is connected): it transmits the minimum batch ID
over all unfinished receivers, which may be useless in a given slot.  It is
deliberately not "feasible" in the no-needless-idling sense.

All functions are pure; ``decide_rs`` draws exactly one uniform variate per
call from the generator handed to it, so replaying a recorded stream replays
the decisions.
"""
from __future__ import annotations

from collections import Counter

import numpy as np

from .model import (
    IDLE,
    Connectivity,
    PolicyDecision,
    ScenarioConfig,
    SystemState,
)

POLICY_NAMES = ("lr", "rs", "mg", "lr-ack")

# Feedback each policy requires; "batch-only" policies ignore connectivity.
FEEDBACK = {"lr": "full", "rs": "full", "mg": "full", "lr-ack": "batch-only"}


def decide_lr(
    state: SystemState, conn: Connectivity, config: ScenarioConfig
) -> PolicyDecision:
    """Useful batch with the minimum ID; idle only if none is useful."""
    best: int | None = None
    for i, x in enumerate(state.received):
        if conn[i] and x < config.file_size:
            b = x // config.window + 1
            if best is None or b < best:
                best = b
    return IDLE if best is None else PolicyDecision(best)


def decide_mg(
    state: SystemState, conn: Connectivity, config: ScenarioConfig
) -> PolicyDecision:
    """Batch with the most connected, unfinished receivers; ties to smallest ID."""
    counts = _beneficiary_counts(state, conn, config)
    if not counts:
        return IDLE
    best = min(counts, key=lambda b: (-counts[b], b))
    return PolicyDecision(best)


def decide_rs(
    state: SystemState,
    conn: Connectivity,
    config: ScenarioConfig,
    rng: np.random.Generator,
) -> PolicyDecision:
    """Sample a useful batch with probability N_i / N_c.

    Realized by picking a connected, unfinished receiver uniformly at random
    and transmitting its batch, which induces exactly the N_i / N_c law.
    Consumes one uniform variate per call even when idling.
    """
    u = float(rng.random())
    candidates = [
        i
        for i, x in enumerate(state.received)
        if conn[i] and x < config.file_size
    ]
    if not candidates:
        return IDLE
    pick = candidates[min(int(u * len(candidates)), len(candidates) - 1)]
    return PolicyDecision(state.received[pick] // config.window + 1)


def decide_lr_ack(state: SystemState, config: ScenarioConfig) -> PolicyDecision:
    """Minimum batch ID over all unfinished receivers, connectivity unseen."""
    best: int | None = None
    for x in state.received:
        if x < config.file_size:
            b = x // config.window + 1
            if best is None or b < best:
                best = b
    return IDLE if best is None else PolicyDecision(best)


def rs_distribution(
    state: SystemState, conn: Connectivity, config: ScenarioConfig
) -> dict[int, float]:
    """Exact batch-selection law of ``rs``: {batch: N_i / N_c}.

    Empty when no receiver is connected and unfinished (the policy idles).
    Finished receivers are excluded from both N_i and N_c.
    """
    counts = _beneficiary_counts(state, conn, config)
    total = sum(counts.values())
    return {b: n / total for b, n in counts.items()}


def _beneficiary_counts(
    state: SystemState, conn: Connectivity, config: ScenarioConfig
) -> Counter:
    counts: Counter = Counter()
    for i, x in enumerate(state.received):
        if conn[i] and x < config.file_size:
            counts[x // config.window + 1] += 1
    return counts
