"""Chunked RLNC broadcast scheduling workbench.

Simulate a base station broadcasting a file to N receivers over unreliable
slotted channels under pluggable batch-scheduling policies, evaluate
closed-form completion-time approximations and minimum coding-window sizes,
and certify scheduling optimality against an exact dynamic-programming
oracle on small instances.
"""
from .analytics import (
    AnalyticResult,
    NormalParams,
    QuadratureError,
    a_approx,
    a_exact,
    b_n,
    expected_completion,
    min_window,
    n_tilde,
    phi,
    phi_inv,
    q,
    q_power_integral,
)
from .codec import DecoderState, EncodedPacket, encode
from .model import (
    IDLE,
    ConfigError,
    PolicyDecision,
    ScenarioConfig,
    SystemState,
    batch_id,
    step,
    useful_batches,
)
from .oracle import (
    CertificationReport,
    OracleCapError,
    certify_lr_optimality,
    optimal_value,
    policy_value,
)
from .policies import (
    POLICY_NAMES,
    decide_lr,
    decide_lr_ack,
    decide_mg,
    decide_rs,
    rs_distribution,
)
from .simulator import (
    AggregateMetrics,
    PairedComparison,
    ReplicationPlan,
    RunMetrics,
    SimulationError,
    measure_throughput,
    paired_comparison,
    run_batch,
    run_replication,
    run_replications,
)

__version__ = "0.1.0"
