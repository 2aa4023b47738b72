"""Core domain model for chunked-RLNC broadcast scheduling.

A base station broadcasts a file of ``file_size`` packets, virtually split
into consecutive batches of ``window`` packets, to ``n_receivers`` receivers
over independent slotted ON/OFF channels.  Each receiver is characterized by
how many packets it has received so far; the batch it currently accepts is
derived from that count.  Everything here is an immutable value and ``step``
is a pure function, so simulator and oracle can share it freely across
workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


class ConfigError(ValueError):
    """A scenario parameter violates a model invariant."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Broadcast scenario parameters.

    ``ragged_allowed`` opts into file sizes that are not a multiple of the
    window; the final batch then holds ``file_size mod window`` packets.
    The closed-form analytics refuse ragged scenarios.
    """

    n_receivers: int
    file_size: int
    window: int
    conn_prob: float
    ragged_allowed: bool = False

    def __post_init__(self) -> None:
        if self.n_receivers < 1:
            raise ConfigError("n_receivers must be a positive integer")
        if self.file_size < 1:
            raise ConfigError("file_size must be a positive integer")
        if self.window < 1:
            raise ConfigError("window must be a positive integer")
        if self.window > self.file_size:
            raise ConfigError("window must not exceed file_size")
        if not 0.0 < self.conn_prob <= 1.0:
            raise ConfigError("conn_prob must lie in (0, 1]")
        if not self.ragged_allowed and self.file_size % self.window != 0:
            raise ConfigError(
                "file_size must be a multiple of window unless ragged_allowed"
            )

    @property
    def num_batches(self) -> int:
        return -(-self.file_size // self.window)

    def batch_size(self, batch: int) -> int:
        """Number of source packets in ``batch`` (1-based)."""
        if not 1 <= batch <= self.num_batches:
            raise ConfigError(f"batch {batch} out of range 1..{self.num_batches}")
        if batch < self.num_batches:
            return self.window
        return self.file_size - (self.num_batches - 1) * self.window


@dataclass(frozen=True)
class SystemState:
    """Per-receiver received-packet counts at the start of a slot."""

    received: tuple[int, ...]
    slot: int = 0

    def all_finished(self, config: ScenarioConfig) -> bool:
        return all(x >= config.file_size for x in self.received)

    @staticmethod
    def empty(config: ScenarioConfig) -> "SystemState":
        return SystemState(received=(0,) * config.n_receivers, slot=0)


# One boolean per receiver: True means the receiver's channel is ON this slot.
Connectivity = Sequence[bool]


@dataclass(frozen=True)
class PolicyDecision:
    """The batch scheduled for encoding this slot, or an explicit idle."""

    batch: int | None

    @property
    def is_idle(self) -> bool:
        return self.batch is None


IDLE = PolicyDecision(batch=None)


def batch_id(state: SystemState, receiver: int, config: ScenarioConfig) -> int | None:
    """Batch the receiver currently accepts, or None once it holds the file.

    A receiver with ``x`` packets expects batch ``x // window + 1``; the
    formula also covers a ragged final batch.
    """
    x = state.received[receiver]
    if x >= config.file_size:
        return None
    return x // config.window + 1


def useful_batches(
    state: SystemState, conn: Connectivity, config: ScenarioConfig
) -> set[int]:
    """Batches that at least one connected, unfinished receiver accepts."""
    _check_conn(conn, config)
    out: set[int] = set()
    for i, x in enumerate(state.received):
        if conn[i] and x < config.file_size:
            out.add(x // config.window + 1)
    return out


def step(
    state: SystemState,
    conn: Connectivity,
    decision: PolicyDecision,
    config: ScenarioConfig,
) -> SystemState:
    """Advance one slot: deliver the chosen batch to matching ON receivers.

    A receiver's count grows by one exactly when its channel is ON, it is
    not finished, and the decision equals its current batch ID.  Out-of-batch
    packets are discarded, so every other receiver is unchanged.
    """
    _check_conn(conn, config)
    if not decision.is_idle and not 1 <= decision.batch <= config.num_batches:
        raise ConfigError(
            f"decision batch {decision.batch} exceeds num_batches={config.num_batches}"
        )
    received = list(state.received)
    if not decision.is_idle:
        for i, x in enumerate(received):
            if conn[i] and x < config.file_size and x // config.window + 1 == decision.batch:
                received[i] = x + 1
    return SystemState(received=tuple(received), slot=state.slot + 1)


def _check_conn(conn: Connectivity, config: ScenarioConfig) -> None:
    if len(conn) != config.n_receivers:
        raise ConfigError(
            f"connectivity length {len(conn)} != n_receivers {config.n_receivers}"
        )
