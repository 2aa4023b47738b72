"""Exact expected-completion-time computation by backward induction.

States are canonicalized to sorted received-count vectors: channels are
i.i.d. and every implemented policy is symmetric under receiver relabeling,
so exchangeability shrinks the state space by up to N!.  Transitions never
decrease the total received count, so a single sweep over states ordered by
descending total computes exact values; connectivity outcomes that leave the
state unchanged (including all-OFF slots) form a self-loop folded in closed
form:

    V(s) = (1 + sum_{C with progress} P(C) * V(next)) / (1 - P(no progress))

``optimal_value`` takes, per connectivity realization, the best useful batch
(idling is allowed only when no batch is useful, i.e. the optimum is sought
over feasible schedules); ``policy_value`` substitutes a policy's decision
law, with the random-selection policy's batch distribution averaged exactly.
``certify_lr_optimality`` reports the largest pointwise value gap between a
policy and the optimum, the numerical certificate that least-received
scheduling attains the minimum expected completion time.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from . import policies
from .model import ConfigError, ScenarioConfig, SystemState

DEFAULT_CAP = 10_000_000
CERTIFY_TOL = 1e-9

CanonicalState = tuple[int, ...]
ValueTable = dict[CanonicalState, float]


class OracleCapError(RuntimeError):
    """State-connectivity space exceeds the configured cap."""


@dataclass(frozen=True)
class CertificationReport:
    policy: str
    v_star: float
    v_policy: float
    max_gap: float
    states: int
    passed: bool


def state_space_size(config: ScenarioConfig) -> int:
    """Number of canonical states: multisets of size N over 0..F."""
    return math.comb(config.file_size + config.n_receivers, config.n_receivers)


def _check_cap(config: ScenarioConfig, cap: int) -> None:
    pairs = state_space_size(config) * 2**config.n_receivers
    if pairs > cap:
        raise OracleCapError(
            f"{pairs} state-connectivity pairs exceed cap {cap}; "
            "shrink N or F, or raise the cap"
        )


def _states_descending(config: ScenarioConfig) -> list[CanonicalState]:
    all_states = itertools.combinations_with_replacement(
        range(config.file_size + 1), config.n_receivers
    )
    return sorted(all_states, key=lambda s: -sum(s))


def _advance(
    s: CanonicalState, conn: tuple[bool, ...], batch: int, config: ScenarioConfig
) -> CanonicalState:
    k, f = config.window, config.file_size
    return tuple(
        sorted(
            x + 1 if (c and x < f and x // k + 1 == batch) else x
            for x, c in zip(s, conn)
        )
    )


def _conn_outcomes(config: ScenarioConfig):
    """All 2^N connectivity vectors with their exact probabilities."""
    n, p = config.n_receivers, config.conn_prob
    out = []
    for bits in itertools.product((False, True), repeat=n):
        k = sum(bits)
        out.append((bits, p**k * (1.0 - p) ** (n - k)))
    return out


def optimal_value(config: ScenarioConfig, cap: int = DEFAULT_CAP) -> ValueTable:
    """V*(s): minimum expected remaining slots over feasible schedules."""
    _check_cap(config, cap)
    f, k = config.file_size, config.window
    outcomes = _conn_outcomes(config)
    values: ValueTable = {}
    for s in _states_descending(config):
        if all(x >= f for x in s):
            values[s] = 0.0
            continue
        acc = 0.0
        p_stay = 0.0
        for conn, prob in outcomes:
            if prob == 0.0:
                continue
            useful = {x // k + 1 for x, c in zip(s, conn) if c and x < f}
            if not useful:
                p_stay += prob
                continue
            acc += prob * min(
                values[_advance(s, conn, beta, config)] for beta in useful
            )
        values[s] = (1.0 + acc) / (1.0 - p_stay)
    return values


def _decision_distribution(
    policy: str, s: CanonicalState, conn: tuple[bool, ...], config: ScenarioConfig
) -> dict[int | None, float]:
    """Law of the policy's decision at (state, connectivity); None = idle."""
    state = SystemState(received=s)
    if policy == "rs":
        dist = policies.rs_distribution(state, conn, config)
        return dict(dist) if dist else {None: 1.0}
    if policy == "lr":
        d = policies.decide_lr(state, conn, config)
    elif policy == "mg":
        d = policies.decide_mg(state, conn, config)
    elif policy == "lr-ack":
        d = policies.decide_lr_ack(state, config)
    else:
        raise ConfigError(f"unknown policy {policy!r}")
    return {d.batch: 1.0}


def policy_value(
    config: ScenarioConfig, policy: str, cap: int = DEFAULT_CAP
) -> ValueTable:
    """V^pi(s): exact expected remaining slots under the named policy."""
    if policy not in policies.POLICY_NAMES:
        raise ConfigError(f"unknown policy {policy!r}")
    _check_cap(config, cap)
    f = config.file_size
    outcomes = _conn_outcomes(config)
    values: ValueTable = {}
    for s in _states_descending(config):
        if all(x >= f for x in s):
            values[s] = 0.0
            continue
        acc = 0.0
        p_stay = 0.0
        for conn, prob in outcomes:
            if prob == 0.0:
                continue
            for beta, w in _decision_distribution(policy, s, conn, config).items():
                if beta is None:
                    p_stay += prob * w
                    continue
                nxt = _advance(s, conn, beta, config)
                if nxt == s:
                    # the chosen batch reached nobody (possible under lr-ack)
                    p_stay += prob * w
                else:
                    acc += prob * w * values[nxt]
        if p_stay >= 1.0:
            raise ConfigError(
                f"policy {policy} makes no progress from state {s}"
            )
        values[s] = (1.0 + acc) / (1.0 - p_stay)
    return values


def certify_lr_optimality(
    config: ScenarioConfig,
    policy: str = "lr",
    cap: int = DEFAULT_CAP,
    tolerance: float = CERTIFY_TOL,
) -> CertificationReport:
    """Largest pointwise gap V^pi(s) - V*(s) over every state.

    Every canonical state is reachable under some feasible policy (serve
    receivers one at a time through single-connected slots), so the maximum
    runs over the full enumeration.
    """
    v_star = optimal_value(config, cap)
    v_pol = policy_value(config, policy, cap)
    gap = max(v_pol[s] - v_star[s] for s in v_star)
    start = (0,) * config.n_receivers
    return CertificationReport(
        policy=policy,
        v_star=v_star[start],
        v_policy=v_pol[start],
        max_gap=gap,
        states=len(v_star),
        passed=gap <= tolerance,
    )
