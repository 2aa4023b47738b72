"""Seeded replication runner for broadcast scheduling experiments.

Randomness design
-----------------
Every replication owns counter-based Philox substreams keyed by
``(base_seed, replication index, tag)`` with separate tags for channel bits,
policy randomness, and coding coefficients.  Consequences:

* replications are independent and individually reproducible, regardless of
  how many run together or in what order;
* two policies simulated from the same ``(base_seed, index)`` consume
  identical channel realizations slot for slot (common random numbers), the
  computational form of a coupling argument, which is what
  ``paired_comparison`` exploits;
* the random-selection policy draws exactly one uniform per slot from its
  own substream, so its channel stream stays aligned with other policies'.

The ideal-coding engine advances all replications of a batch in lockstep on
numpy arrays; channel bits are pre-drawn in windows per replication, which
consumes each substream in exactly the same order as a slot-by-slot scalar
run.  ``run_replication_reference`` is that scalar run, kept as a slow
cross-check of the vectorized engine.

In coded mode (GF(256)) a receiver's count advances only on innovative
packets, so completion times pick up the small redundancy penalty of random
coefficients instead of the ideal-coding assumption.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import policies
from .codec import DecoderState, EncodedPacket
from .model import ConfigError, ScenarioConfig, SystemState, step

CHANNEL_TAG = 0
POLICY_TAG = 1
CODING_TAG = 2

_MASK64 = (1 << 64) - 1
_BIG = 1 << 30  # sentinel batch id meaning "idle"

HORIZON = 10**9  # hard per-replication slot cap; p >= 0.01 never gets close

CODING_MODES = ("ideal", "gf256")


class SimulationError(RuntimeError):
    """A replication exceeded the slot horizon or hit an internal fault."""


def substream(base_seed: int, index: int, tag: int) -> np.random.Generator:
    """Philox generator keyed by (seed, replication, purpose)."""
    key = np.array(
        [base_seed & _MASK64, ((index << 2) | tag) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class ReplicationPlan:
    """A scenario bound to a policy, seed, and replication count."""

    scenario: ScenarioConfig
    policy: str
    replications: int
    base_seed: int
    coding: str = "ideal"

    def __post_init__(self) -> None:
        if self.policy not in policies.POLICY_NAMES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.coding not in CODING_MODES:
            raise ConfigError(f"coding must be one of {CODING_MODES}")
        if not 0 <= self.base_seed <= _MASK64:
            raise ConfigError("base_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class RunMetrics:
    """Exact per-replication outcomes.

    ``throughput_norm`` counts packets delivered across all receivers up to
    the first individual completion, normalized by N*p per slot.
    """

    t_max: int
    t_mean: float
    t_var: float
    per_receiver_t: tuple[int, ...]
    throughput_norm: float


@dataclass(frozen=True)
class AggregateMetrics:
    """Across-replication means and uncertainty (normal-approx 95% CI)."""

    replications: int
    t_max_mean: float
    t_max_var: float
    t_max_se: float
    t_max_ci95: float
    t_mean_mean: float
    t_mean_se: float
    t_var_mean: float
    throughput_mean: float
    throughput_se: float


@dataclass(frozen=True)
class PairedComparison:
    """Common-random-number comparison of two policies."""

    mean_diff: float
    p_value_a_less: float
    wins_a: int
    wins_b: int
    ties: int


# ---------------------------------------------------------------------------
# vectorized ideal-coding engine
# ---------------------------------------------------------------------------

def _decide_lr(useful: np.ndarray, bid: np.ndarray, unfin: np.ndarray, u=None) -> np.ndarray:
    return np.where(useful, bid, _BIG).min(axis=1)


def _decide_lr_ack(useful: np.ndarray, bid: np.ndarray, unfin: np.ndarray, u=None) -> np.ndarray:
    return np.where(unfin, bid, _BIG).min(axis=1)


def _decide_mg(useful: np.ndarray, bid: np.ndarray, unfin: np.ndarray, u=None) -> np.ndarray:
    rows, n = useful.shape
    width = int(bid.max()) + 1 if rows else 1
    hist = np.zeros((rows, width + 1), dtype=np.int32)
    flat_rows = np.repeat(np.arange(rows), n)
    mask = useful.ravel()
    np.add.at(hist, (flat_rows[mask], bid.ravel()[mask]), 1)
    dec = hist[:, 1:].argmax(axis=1) + 1  # argmax takes the smallest batch on ties
    dec[~useful.any(axis=1)] = _BIG
    return dec


def _decide_rs(useful: np.ndarray, bid: np.ndarray, unfin: np.ndarray, u=None) -> np.ndarray:
    nc = useful.sum(axis=1)
    target = np.minimum((u * nc).astype(np.int64), nc - 1) + 1
    cum = np.cumsum(useful, axis=1)
    sel = (cum == target[:, None]) & useful
    recv = sel.argmax(axis=1)
    dec = bid[np.arange(useful.shape[0]), recv]
    dec[nc == 0] = _BIG
    return dec


_VECTOR_POLICIES = {
    "lr": _decide_lr,
    "rs": _decide_rs,
    "mg": _decide_mg,
    "lr-ack": _decide_lr_ack,
}


def _scalar_decision(policy: str, state: SystemState, conn, config, u: float | None):
    if policy == "lr":
        return policies.decide_lr(state, conn, config)
    if policy == "mg":
        return policies.decide_mg(state, conn, config)
    if policy == "lr-ack":
        return policies.decide_lr_ack(state, config)
    dist = policies.rs_distribution(state, conn, config)
    if not dist:
        return policies.IDLE
    candidates = [
        i for i, x in enumerate(state.received) if conn[i] and x < config.file_size
    ]
    pick = candidates[min(int(u * len(candidates)), len(candidates) - 1)]
    return policies.PolicyDecision(state.received[pick] // config.window + 1)


def _run_ideal(
    scenario: ScenarioConfig,
    policy: str,
    base_seed: int,
    indices: list[int],
    validate: bool = False,
) -> list[RunMetrics]:
    n, f, k, p = (
        scenario.n_receivers,
        scenario.file_size,
        scenario.window,
        scenario.conn_prob,
    )
    reps = len(indices)
    decide = _VECTOR_POLICIES[policy]
    chan = [substream(base_seed, i, CHANNEL_TAG) for i in indices]
    pol = [substream(base_seed, i, POLICY_TAG) for i in indices] if policy == "rs" else None

    counts = np.zeros((reps, n), dtype=np.int64)
    done_slot = np.zeros((reps, n), dtype=np.int64)
    tau = np.zeros(reps, dtype=np.int64)
    delivered = np.zeros(reps, dtype=np.int64)
    alive = np.ones(reps, dtype=bool)

    window = max(64, min(4096, 4_000_000 // max(1, reps * n)))
    t = 0
    while alive.any():
        act = np.nonzero(alive)[0]
        rows = act.size
        conn_win = np.empty((rows, window, n), dtype=bool)
        for a, r in enumerate(act):
            conn_win[a] = chan[r].random((window, n)) < p
        u_win = None
        if pol is not None:
            u_win = np.empty((rows, window))
            for a, r in enumerate(act):
                u_win[a] = pol[r].random(window)

        c = counts[act]
        d = done_slot[act]
        sub_tau = tau[act]
        sub_del = delivered[act]
        for off in range(window):
            t += 1
            if t > HORIZON:
                raise SimulationError(f"replication exceeded {HORIZON} slots")
            conn = conn_win[:, off, :]
            unfin = c < f
            useful = conn & unfin
            bid = c // k + 1
            dec = decide(useful, bid, unfin, None if u_win is None else u_win[:, off])
            if validate:
                _validate_slot(scenario, policy, c, conn, dec,
                               None if u_win is None else u_win[:, off])
            hit = useful & (bid == dec[:, None])
            c += hit
            crossed = hit & (c == f)
            d[crossed] = t
            first = (sub_tau == 0) & (c == f).any(axis=1)
            sub_tau[first] = t
            sub_del[first] = c[first].sum(axis=1)
            if (c == f).all():
                break
        counts[act] = c
        done_slot[act] = d
        tau[act] = sub_tau
        delivered[act] = sub_del
        alive[act] = ~(c == f).all(axis=1)

    out = []
    for r in range(reps):
        row = done_slot[r]
        out.append(
            RunMetrics(
                t_max=int(row.max()),
                t_mean=float(row.mean()),
                t_var=float(row.var()),
                per_receiver_t=tuple(int(x) for x in row),
                throughput_norm=float(delivered[r] / (n * p * tau[r])),
            )
        )
    return out


def _validate_slot(scenario, policy, counts, conn, dec, u) -> None:
    """Cross-check each vectorized decision against the scalar policy."""
    for row in range(counts.shape[0]):
        state = SystemState(received=tuple(int(x) for x in counts[row]))
        ref = _scalar_decision(
            policy, state, [bool(b) for b in conn[row]], scenario,
            None if u is None else float(u[row]),
        )
        got = None if dec[row] == _BIG else int(dec[row])
        if ref.batch != got:
            raise SimulationError(
                f"engine decision {got} != policy decision {ref.batch} "
                f"(policy={policy}, state={state.received})"
            )


# ---------------------------------------------------------------------------
# coded mode: scalar per replication, counts advance on innovative packets
# ---------------------------------------------------------------------------

def _run_gf256_one(
    scenario: ScenarioConfig, policy: str, base_seed: int, index: int
) -> RunMetrics:
    n, f, k, p = (
        scenario.n_receivers,
        scenario.file_size,
        scenario.window,
        scenario.conn_prob,
    )
    chan = substream(base_seed, index, CHANNEL_TAG)
    pol = substream(base_seed, index, POLICY_TAG) if policy == "rs" else None
    cod = substream(base_seed, index, CODING_TAG)

    counts = [0] * n
    decoders = [DecoderState(batch=1, size=scenario.batch_size(1)) for _ in range(n)]
    done = [0] * n
    tau = 0
    delivered = 0
    t = 0
    while any(x < f for x in counts):
        t += 1
        if t > HORIZON:
            raise SimulationError(f"replication exceeded {HORIZON} slots")
        conn = chan.random(n) < p
        u = float(pol.random()) if pol is not None else None
        state = SystemState(received=tuple(counts), slot=t - 1)
        decision = _scalar_decision(policy, state, conn, scenario, u)
        if not decision.is_idle:
            beta = decision.batch
            size = scenario.batch_size(beta)
            pkt = EncodedPacket(
                batch=beta,
                coefficients=cod.integers(0, 256, size=size, dtype=np.uint8),
            )
            for i in range(n):
                if conn[i] and counts[i] < f and counts[i] // k + 1 == beta:
                    if decoders[i].absorb(pkt):
                        counts[i] += 1
                        if decoders[i].decodable:
                            nxt = counts[i] // k + 1
                            if counts[i] < f:
                                decoders[i] = DecoderState(
                                    batch=nxt, size=scenario.batch_size(nxt)
                                )
                        if counts[i] == f:
                            done[i] = t
                            if tau == 0:
                                tau = t
                                delivered = sum(counts)
    arr = np.array(done)
    return RunMetrics(
        t_max=int(arr.max()),
        t_mean=float(arr.mean()),
        t_var=float(arr.var()),
        per_receiver_t=tuple(done),
        throughput_norm=float(delivered / (n * p * tau)),
    )


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def run_replication(plan: ReplicationPlan, index: int) -> RunMetrics:
    """Simulate replication ``index`` of the plan to completion."""
    if not 0 <= index < plan.replications:
        raise ConfigError(f"replication index {index} outside 0..{plan.replications - 1}")
    if plan.coding == "gf256":
        return _run_gf256_one(plan.scenario, plan.policy, plan.base_seed, index)
    return _run_ideal(plan.scenario, plan.policy, plan.base_seed, [index])[0]


def run_replications(plan: ReplicationPlan, validate: bool = False) -> list[RunMetrics]:
    """All replications of the plan, in index order."""
    indices = list(range(plan.replications))
    if plan.coding == "gf256":
        return [
            _run_gf256_one(plan.scenario, plan.policy, plan.base_seed, i)
            for i in indices
        ]
    return _run_ideal(plan.scenario, plan.policy, plan.base_seed, indices, validate)


def aggregate(metrics: list[RunMetrics]) -> AggregateMetrics:
    reps = len(metrics)
    t_max = np.array([m.t_max for m in metrics], dtype=float)
    t_mean = np.array([m.t_mean for m in metrics])
    t_var = np.array([m.t_var for m in metrics])
    thr = np.array([m.throughput_norm for m in metrics])
    ddof = 1 if reps > 1 else 0
    t_max_var = float(t_max.var(ddof=ddof))
    t_max_se = math.sqrt(t_max_var / reps)
    t_mean_se = math.sqrt(float(t_mean.var(ddof=ddof)) / reps)
    thr_se = math.sqrt(float(thr.var(ddof=ddof)) / reps)
    return AggregateMetrics(
        replications=reps,
        t_max_mean=float(t_max.mean()),
        t_max_var=t_max_var,
        t_max_se=t_max_se,
        t_max_ci95=1.96 * t_max_se,
        t_mean_mean=float(t_mean.mean()),
        t_mean_se=t_mean_se,
        t_var_mean=float(t_var.mean()),
        throughput_mean=float(thr.mean()),
        throughput_se=thr_se,
    )


def run_batch(plan: ReplicationPlan, validate: bool = False) -> AggregateMetrics:
    """Run every replication and aggregate in index order."""
    return aggregate(run_replications(plan, validate=validate))


def measure_throughput(plan: ReplicationPlan) -> float:
    """Mean normalized throughput up to the first per-receiver completion."""
    return run_batch(plan).throughput_mean


def sign_test_p_one_sided(wins: int, losses: int) -> float:
    """P(Binomial(wins+losses, 1/2) >= wins); 1.0 when there are no untied pairs."""
    m = wins + losses
    if m == 0:
        return 1.0
    total = sum(math.comb(m, j) for j in range(wins, m + 1))
    return total / 2.0**m


def paired_comparison(
    scenario: ScenarioConfig,
    policy_a: str,
    policy_b: str,
    replications: int,
    base_seed: int,
    coding: str = "ideal",
) -> PairedComparison:
    """Compare two policies on identical channel realizations.

    Returns the mean completion-time difference T^A - T^B and a one-sided
    sign-test p-value for the hypothesis that A completes earlier.
    """
    plan_a = ReplicationPlan(scenario, policy_a, replications, base_seed, coding)
    plan_b = ReplicationPlan(scenario, policy_b, replications, base_seed, coding)
    ta = np.array([m.t_max for m in run_replications(plan_a)], dtype=float)
    tb = np.array([m.t_max for m in run_replications(plan_b)], dtype=float)
    wins_a = int((ta < tb).sum())
    wins_b = int((ta > tb).sum())
    ties = replications - wins_a - wins_b
    return PairedComparison(
        mean_diff=float((ta - tb).mean()),
        p_value_a_less=sign_test_p_one_sided(wins_a, wins_b),
        wins_a=wins_a,
        wins_b=wins_b,
        ties=ties,
    )


# ---------------------------------------------------------------------------
# slow scalar reference (ideal coding), for cross-checking the engine
# ---------------------------------------------------------------------------

def run_replication_reference(plan: ReplicationPlan, index: int) -> RunMetrics:
    """Slot-by-slot scalar simulation through the domain-model types.

    Consumes the same substreams in the same order as the vectorized engine
    and must produce bit-identical metrics; tests hold the two together.
    """
    if plan.coding != "ideal":
        raise ConfigError("reference runner covers ideal coding only")
    scenario = plan.scenario
    n, f, p = scenario.n_receivers, scenario.file_size, scenario.conn_prob
    chan = substream(plan.base_seed, index, CHANNEL_TAG)
    pol = substream(plan.base_seed, index, POLICY_TAG) if plan.policy == "rs" else None

    state = SystemState.empty(scenario)
    done = [0] * n
    tau = 0
    delivered = 0
    while not state.all_finished(scenario):
        conn = [bool(b) for b in chan.random(n) < p]
        u = float(pol.random()) if pol is not None else None
        decision = _scalar_decision(plan.policy, state, conn, scenario, u)
        nxt = step(state, conn, decision, scenario)
        if nxt.slot > HORIZON:
            raise SimulationError(f"replication exceeded {HORIZON} slots")
        for i in range(n):
            if nxt.received[i] == f and state.received[i] < f:
                done[i] = nxt.slot
                if tau == 0:
                    tau = nxt.slot
                    delivered = sum(nxt.received)
        state = nxt
    arr = np.array(done)
    return RunMetrics(
        t_max=int(arr.max()),
        t_mean=float(arr.mean()),
        t_var=float(arr.var()),
        per_receiver_t=tuple(done),
        throughput_norm=float(delivered / (n * p * tau)),
    )
