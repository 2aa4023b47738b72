"""Command-line front end: experiment orchestration and CSV/JSON emission.

Subcommands
-----------
simulate          run a scenario grid under one or more policies
sweep             simulate over a window grid (figure-style curves), with an
                  optional gnuplot script
analyze           closed-form completion-time estimates over a window grid
min-k             minimum window meeting a relative-delay constraint
table1            minimum-window percentage grid (two constraint levels,
                  three file sizes, both formulas)
oracle            exact value certification of a policy on a small instance
compare-feedback  full-feedback vs batch-ACK-only scheduling gaps
codec-selftest    field tables, round-trip, and full-rank frequency checks

Exit codes: 0 success, 2 configuration error, 3 oracle cap exceeded,
4 internal numerical failure.  Every output embeds the resolved
configuration and seed in a ``#``-prefixed header line (CSV) or a
``config`` key (JSON) so results are reproducible from the file alone.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import analytics, codec
from .model import ConfigError, ScenarioConfig
from .oracle import OracleCapError, certify_lr_optimality
from .policies import POLICY_NAMES
from .simulator import (
    CODING_MODES,
    ReplicationPlan,
    SimulationError,
    paired_comparison,
    run_batch,
)

SIM_COLUMNS = [
    "policy", "n", "f", "k", "p", "seed", "reps",
    "t_max_mean", "t_max_ci95", "t_mean_mean", "t_var_mean",
    "throughput_norm", "t_max_norm",
]

ANALYZE_COLUMNS = [
    "n", "f", "k", "p", "n_tilde", "a_n", "b_n",
    "e_t_integral", "e_t_3sigma", "e_t_orderstat",
    "e_t_integral_norm", "e_t_orderstat_norm",
]

TABLE1_COLUMNS = ["epsilon", "f", "p", "n", "formula", "k_min", "pct_of_f"]

FEEDBACK_COLUMNS = [
    "n", "f", "k", "p", "seed", "reps",
    "t_lr_mean", "t_lr_ack_mean", "gap_pct",
]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _emit(args, columns: list[str], rows: list[dict], config: dict) -> None:
    """Write rows as CSV or JSON to --out (or stdout), then echo the path."""
    fmt = args.format or "csv"
    if fmt == "csv":
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps({"config": config, "rows": rows}, indent=2, sort_keys=True) + "\n"
    else:
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill unset options from the JSON file given via --config."""
    if not getattr(args, "config", None):
        return
    with open(args.config, encoding="utf-8") as fh:
        overrides = json.load(fh)
    if not isinstance(overrides, dict):
        raise ConfigError("--config file must hold a JSON object")
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)


def _fill_defaults(args: argparse.Namespace, defaults: dict) -> None:
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _scenario(n: int, f: int, k: int, p: float, ragged: bool) -> ScenarioConfig:
    return ScenarioConfig(
        n_receivers=n, file_size=f, window=k, conn_prob=p,
        ragged_allowed=bool(ragged),
    )


def _sim_rows(args) -> tuple[list[dict], dict]:
    rows = []
    for pol in args.policy:
        if pol not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {pol!r}; choose from {POLICY_NAMES}")
        for n in args.n:
            for f in args.f:
                for k in args.k:
                    for p in args.p:
                        scenario = _scenario(n, f, k, p, args.ragged)
                        plan = ReplicationPlan(
                            scenario, pol, args.reps, args.seed, args.coding
                        )
                        agg = run_batch(plan)
                        rows.append({
                            "policy": pol, "n": n, "f": f, "k": k, "p": p,
                            "seed": args.seed, "reps": args.reps,
                            "t_max_mean": agg.t_max_mean,
                            "t_max_ci95": agg.t_max_ci95,
                            "t_mean_mean": agg.t_mean_mean,
                            "t_var_mean": agg.t_var_mean,
                            "throughput_norm": agg.throughput_mean,
                            "t_max_norm": agg.t_max_mean / (f / p),
                        })
    config = {
        "command": "simulate", "n": args.n, "f": args.f, "k": args.k,
        "p": args.p, "policy": args.policy, "reps": args.reps,
        "seed": args.seed, "coding": args.coding, "ragged": bool(args.ragged),
    }
    return rows, config


def cmd_simulate(args) -> int:
    _fill_defaults(args, {"policy": ["lr"], "reps": 200, "seed": 1,
                          "coding": "ideal", "ragged": False})
    rows, config = _sim_rows(args)
    _emit(args, SIM_COLUMNS, rows, config)
    return 0


_GNUPLOT_TEMPLATE = """\
set datafile separator ','
set key autotitle columnhead
set xlabel 'coding window size K'
set ylabel 'normalized completion time'
plot {plots}
"""


def cmd_sweep(args) -> int:
    _fill_defaults(args, {"policy": ["lr", "rs", "mg"], "reps": 200, "seed": 1,
                          "coding": "ideal", "ragged": False})
    rows, config = _sim_rows(args)
    config["command"] = "sweep"
    _emit(args, SIM_COLUMNS, rows, config)
    if args.gnuplot:
        if not args.out:
            raise ConfigError("--gnuplot requires --out so the script can reference the CSV")
        plots = ", ".join(
            f"'{args.out}' using (stringcolumn(1) eq '{pol}' ? $4 : NaN):13 "
            f"with linespoints title '{pol}'"
            for pol in args.policy
        )
        with open(args.gnuplot, "w", encoding="utf-8") as fh:
            fh.write(_GNUPLOT_TEMPLATE.format(plots=plots))
        print(args.gnuplot)
    return 0


def cmd_analyze(args) -> int:
    _fill_defaults(args, {"ragged": False})
    rows = []
    for k in args.k:
        scenario = _scenario(args.n, args.f, k, args.p, False)
        result = analytics.expected_completion(scenario)
        ideal = args.f / args.p
        rows.append({
            "n": args.n, "f": args.f, "k": k, "p": args.p,
            "n_tilde": result.n_tilde, "a_n": result.a_n, "b_n": result.b_n,
            "e_t_integral": result.e_t_integral,
            "e_t_3sigma": "" if result.e_t_3sigma is None else result.e_t_3sigma,
            "e_t_orderstat": result.e_t_orderstat,
            "e_t_integral_norm": result.e_t_integral / ideal,
            "e_t_orderstat_norm": result.e_t_orderstat / ideal,
        })
    config = {"command": "analyze", "n": args.n, "f": args.f, "k": args.k,
              "p": args.p}
    _emit(args, ANALYZE_COLUMNS, rows, config)
    return 0


def cmd_min_k(args) -> int:
    k = analytics.min_window(
        args.f, args.n, args.p, args.epsilon,
        formula=args.formula, divisor_only=args.divisor_only,
    )
    print(
        f"min_k f={args.f} n={args.n} p={args.p} epsilon={args.epsilon} "
        f"formula={args.formula} divisor_only={args.divisor_only} "
        f"k={k} pct_of_f={100.0 * k / args.f:.2f}"
    )
    return 0


def cmd_table1(args) -> int:
    _fill_defaults(args, {"f": [2000, 5000, 10000], "epsilon": [0.10, 0.01],
                          "p": 0.8, "n": 50})
    rows = []
    for eps in args.epsilon:
        for f in args.f:
            for formula in ("exact", "simplified"):
                k = analytics.min_window(f, args.n, args.p, eps, formula=formula)
                rows.append({
                    "epsilon": eps, "f": f, "p": args.p, "n": args.n,
                    "formula": formula, "k_min": k,
                    "pct_of_f": f"{100.0 * k / f:.2f}",
                })
    config = {"command": "table1", "f": args.f, "epsilon": args.epsilon,
              "p": args.p, "n": args.n}
    _emit(args, TABLE1_COLUMNS, rows, config)
    return 0


def cmd_oracle(args) -> int:
    _fill_defaults(args, {"policy": ["lr"], "cap": None})
    for pol in args.policy:
        for n in args.n:
            for f in args.f:
                for k in args.k:
                    for p in args.p:
                        scenario = _scenario(n, f, k, p, False)
                        kwargs = {} if args.cap is None else {"cap": args.cap}
                        report = certify_lr_optimality(scenario, policy=pol, **kwargs)
                        verdict = "PASS" if report.passed else "FAIL"
                        print(
                            f"oracle policy={pol} n={n} f={f} k={k} p={p} "
                            f"v_star={report.v_star:.9f} "
                            f"v_policy={report.v_policy:.9f} "
                            f"max_gap={report.max_gap:.3e} "
                            f"states={report.states} {verdict}"
                        )
    return 0


def cmd_compare_feedback(args) -> int:
    _fill_defaults(args, {"reps": 200, "seed": 1})
    rows = []
    for n in args.n:
        for k in args.k:
            scenario = _scenario(n, args.f, k, args.p, False)
            plan_lr = ReplicationPlan(scenario, "lr", args.reps, args.seed)
            plan_ack = ReplicationPlan(scenario, "lr-ack", args.reps, args.seed)
            t_lr = run_batch(plan_lr).t_max_mean
            t_ack = run_batch(plan_ack).t_max_mean
            rows.append({
                "n": n, "f": args.f, "k": k, "p": args.p,
                "seed": args.seed, "reps": args.reps,
                "t_lr_mean": t_lr, "t_lr_ack_mean": t_ack,
                "gap_pct": 100.0 * (t_ack - t_lr) / t_lr,
            })
    config = {"command": "compare-feedback", "n": args.n, "f": args.f,
              "k": args.k, "p": args.p, "reps": args.reps, "seed": args.seed}
    _emit(args, FEEDBACK_COLUMNS, rows, config)
    return 0


def cmd_codec_selftest(args) -> int:
    _fill_defaults(args, {"trials": 20000, "seed": 7})
    rng = np.random.default_rng(args.seed)
    failures = 0

    # multiplication and inversion against the bit-serial reference
    ok = all(
        codec.gf_mul(a, b) == codec.gf_mul_slow(a, b)
        for a in range(256) for b in range(256)
    )
    ok = ok and all(codec.gf_mul(a, codec.gf_inv(a)) == 1 for a in range(1, 256))
    print(f"codec-selftest field-tables {'PASS' if ok else 'FAIL'}")
    failures += not ok

    # encode/decode round trip over random batches
    ok = True
    for _ in range(200):
        size = int(rng.integers(1, 9))
        length = int(rng.integers(1, 65))
        payloads = [rng.integers(0, 256, length, dtype=np.uint8).tobytes()
                    for _ in range(size)]
        dec = codec.DecoderState(batch=1, size=size)
        guard = 0
        while not dec.decodable:
            dec.absorb(codec.encode(payloads, rng))
            guard += 1
            if guard > 100 * size:
                ok = False
                break
        ok = ok and dec.decodable and dec.decode() == payloads
        if not ok:
            break
    print(f"codec-selftest round-trip {'PASS' if ok else 'FAIL'}")
    failures += not ok

    # full-rank frequency of size random packets vs the closed form
    size = 4
    expected = math.prod(1.0 - 256.0**-i for i in range(1, size + 1))
    full = 0
    for _ in range(args.trials):
        dec = codec.DecoderState(batch=1, size=size)
        for _ in range(size):
            dec.absorb(codec.EncodedPacket(
                batch=1, coefficients=rng.integers(0, 256, size, dtype=np.uint8)))
        full += dec.decodable
    freq = full / args.trials
    ok = abs(freq - expected) <= 0.004
    print(
        f"codec-selftest full-rank freq={freq:.5f} expected={expected:.5f} "
        f"{'PASS' if ok else 'FAIL'}"
    )
    failures += not ok

    if failures:
        raise SimulationError(f"{failures} codec self-test(s) failed")
    return 0


def _add_output_args(sub) -> None:
    sub.add_argument("--out", help="output file path (default: stdout)")
    sub.add_argument("--format", choices=["csv", "json"],
                     help="output format (default csv)")
    sub.add_argument("--config", help="JSON file with default option values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chunkcast",
        description="Chunked RLNC broadcast scheduling workbench",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="run a scenario grid")
    sim.add_argument("--n", type=_int_list, required=True, help="receiver counts, comma separated")
    sim.add_argument("--f", type=_int_list, required=True, help="file sizes in packets")
    sim.add_argument("--k", type=_int_list, required=True, help="coding window sizes")
    sim.add_argument("--p", type=_float_list, required=True, help="connection probabilities in (0,1]")
    sim.add_argument("--policy", type=lambda s: s.split(","),
                     help="policies: lr,rs,mg,lr-ack (default lr)")
    sim.add_argument("--reps", type=int, help="replications per scenario (default 200)")
    sim.add_argument("--seed", type=int, help="base seed (default 1)")
    sim.add_argument("--coding", choices=list(CODING_MODES), help="ideal or gf256 (default ideal)")
    sim.add_argument("--ragged", action="store_const", const=True,
                     help="allow file sizes not divisible by the window")
    _add_output_args(sim)
    sim.set_defaults(func=cmd_simulate)

    sweep = subs.add_parser("sweep", help="completion-time-vs-window curves")
    sweep.add_argument("--n", type=_int_list, required=True)
    sweep.add_argument("--f", type=_int_list, required=True)
    sweep.add_argument("--k", type=_int_list, required=True, help="window grid")
    sweep.add_argument("--p", type=_float_list, required=True)
    sweep.add_argument("--policy", type=lambda s: s.split(","),
                       help="default lr,rs,mg")
    sweep.add_argument("--reps", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--coding", choices=list(CODING_MODES))
    sweep.add_argument("--ragged", action="store_const", const=True)
    sweep.add_argument("--gnuplot", help="also write a gnuplot script here")
    _add_output_args(sweep)
    sweep.set_defaults(func=cmd_sweep)

    ana = subs.add_parser("analyze", help="closed-form delay estimates")
    ana.add_argument("--n", type=int, required=True)
    ana.add_argument("--f", type=int, required=True)
    ana.add_argument("--k", type=_int_list, required=True, help="window grid")
    ana.add_argument("--p", type=float, required=True)
    _add_output_args(ana)
    ana.set_defaults(func=cmd_analyze)

    mink = subs.add_parser("min-k", help="minimum window for a delay constraint")
    mink.add_argument("--f", type=int, required=True)
    mink.add_argument("--n", type=int, required=True)
    mink.add_argument("--p", type=float, required=True)
    mink.add_argument("--epsilon", type=float, required=True,
                      help="relative delay bound, e.g. 0.1 for 10%%")
    mink.add_argument("--formula", choices=["exact", "simplified"],
                      default="simplified")
    mink.add_argument("--divisor-only", action="store_true",
                      help="restrict to divisors of the file size")
    mink.set_defaults(func=cmd_min_k)

    t1 = subs.add_parser("table1", help="minimum-window percentage grid")
    t1.add_argument("--f", type=_int_list, help="default 2000,5000,10000")
    t1.add_argument("--epsilon", type=_float_list, help="default 0.1,0.01")
    t1.add_argument("--p", type=float, help="default 0.8")
    t1.add_argument("--n", type=int, help="default 50")
    _add_output_args(t1)
    t1.set_defaults(func=cmd_table1)

    orc = subs.add_parser("oracle", help="exact optimality certification")
    orc.add_argument("--n", type=_int_list, required=True)
    orc.add_argument("--f", type=_int_list, required=True)
    orc.add_argument("--k", type=_int_list, required=True)
    orc.add_argument("--p", type=_float_list, required=True)
    orc.add_argument("--policy", type=lambda s: s.split(","), help="default lr")
    orc.add_argument("--cap", type=int, help="state-connectivity pair cap")
    orc.set_defaults(func=cmd_oracle)

    cf = subs.add_parser("compare-feedback", help="full feedback vs batch-ACK only")
    cf.add_argument("--n", type=_int_list, required=True)
    cf.add_argument("--f", type=int, required=True)
    cf.add_argument("--k", type=_int_list, required=True)
    cf.add_argument("--p", type=float, required=True)
    cf.add_argument("--reps", type=int)
    cf.add_argument("--seed", type=int)
    _add_output_args(cf)
    cf.set_defaults(func=cmd_compare_feedback)

    selftest = subs.add_parser("codec-selftest", help="GF(256) codec checks")
    selftest.add_argument("--trials", type=int, help="full-rank trials (default 20000)")
    selftest.add_argument("--seed", type=int)
    selftest.set_defaults(func=cmd_codec_selftest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OracleCapError as exc:
        print(f"oracle cap exceeded: {exc}", file=sys.stderr)
        return 3
    except (analytics.QuadratureError, SimulationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
