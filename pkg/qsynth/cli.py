"""
Command-line interface.

Commands::

    qsynth train CONFIG             train an agent, writing a run directory
    qsynth eval CHECKPOINT          greedy evaluation on fresh targets
    qsynth prepare CHECKPOINT TARGET
                                    circuit preparing a target
    qsynth compare CHECKPOINT       agent against layered circuits
    qsynth oracle TARGET            brute-force best fidelity per CNOT count
    qsynth ladder N                 fitted W-state ladder on N qubits

TARGET is a json file holding a list of amplitudes, each a number or a
[real, imag] pair, or one of the named states w:N, ghz:N and zero:N.

Exit status is 0 on success, 1 for invalid input (bad config, target or
checkpoint, refused budgets) and 2 for any other error.
"""

import argparse
import json
import logging
import os
import re
import sys
import time

import numpy as np

from qsynth.agent import load_agent
from qsynth.baseline import KINDS, LOCAL_GATES, evaluate_layered, layered_spec
from qsynth.circuit import PRESET_NAMES, preset_graph
from qsynth.config import (
    default_output_root,
    default_threads,
    load_config,
    write_config,
)
from qsynth.format import circuit_sequence, export, format_sequence, parse_sequence
from qsynth.metrics import EVAL_COLUMNS, eval_row, write_rows
from qsynth.qcore import RY, U3, basis_state, ghz_state, pure_state, w_state
from qsynth.synth import (
    brute_force_oracle,
    evaluate,
    generate_circuit,
    score_sequence,
    structured_targets,
    train,
    wstate_ladder,
)

logger = logging.getLogger(__name__)

#: Tolerance on the squared norm of target files.
TARGET_ATOL = 1e-6

_NAMED_TARGET = re.compile(r"\A(?P<name>w|ghz|zero):(?P<n>\d+)\Z")

_NAMED_STATES = {
    "w": w_state,
    "ghz": ghz_state,
    "zero": lambda n: basis_state(n, 0),
}

_LOG_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]


def load_target(spec):
    """
    PureState from a named state or a json amplitude file.
    """
    match = _NAMED_TARGET.match(spec)
    if match is not None:
        return _NAMED_STATES[match.group("name")](int(match.group("n")))
    with open(spec, encoding="utf-8") as f:
        entries = json.load(f)
    if not isinstance(entries, list):
        raise ValueError(f"target file must hold a list of amplitudes; got {spec}")
    amps = []
    for entry in entries:
        if isinstance(entry, list) and len(entry) == 2:
            amps.append(complex(float(entry[0]), float(entry[1])))
        else:
            amps.append(complex(entry))
    return pure_state(np.array(amps, dtype=complex), atol=TARGET_ATOL)


def _run_dir(root, seed):
    base = os.path.join(root, time.strftime("%Y%m%d-%H%M%S") + f"-seed{seed}")
    path, suffix = base, 0
    while os.path.exists(path):
        suffix += 1
        path = f"{base}-{suffix}"
    os.makedirs(path)
    return path


def _write_circuit(prefix, circuit, params):
    for format in ("text", "json"):
        path = f"{prefix}.{'txt' if format == 'text' else 'json'}"
        with open(path, "wb") as f:
            f.write(export(circuit, params, format))
        logger.info("wrote %s", path)


def _emit_rows(path, rows):
    if path is None:
        write_rows(sys.stdout, rows, EVAL_COLUMNS)
        return
    with open(path, "w", newline="", encoding="utf-8") as f:
        write_rows(f, rows, EVAL_COLUMNS)
    logger.info("wrote %s", path)


# Commands ---------------------------------------------------------------------


def cmd_train(args):
    config = load_config(args.config)
    root = args.output_root or config.output_dir or default_output_root()
    run_dir = _run_dir(root, config.seed)
    write_config(config, os.path.join(run_dir, "config.ini"))
    with open(os.path.join(run_dir, "seed.txt"), "w", encoding="utf-8") as f:
        f.write(f"{config.seed}\n")
    report = train(config, run_dir)
    logger.info("trained %d episodes in %.1f s", len(report.rows), report.wall_clock)
    print(run_dir)


def cmd_eval(args):
    agent = load_agent(args.checkpoint)
    rows = []
    for budget in args.budget or [None]:
        metrics = evaluate(
            agent,
            args.n_states,
            args.structure,
            budget=budget,
            seed=args.seed,
            threads=args.threads,
        )
        rows.append(eval_row("agent", metrics, budget=budget))
        low, high = metrics.interval
        print(
            f"budget {budget}: mean fidelity {metrics.mean_fidelity:.4f} "
            f"[{low:.4f}, {high:.4f}], mean CNOTs {metrics.mean_cnots:.2f}",
            file=sys.stderr,
        )
    _emit_rows(args.output, rows)


def cmd_prepare(args):
    agent = load_agent(args.checkpoint)
    psi = load_target(args.target)
    result = generate_circuit(psi, agent, budget=args.budget)
    _write_circuit(args.output, result.circuit, result.params)
    print(
        f"fidelity {result.fidelity:.6f}, {len(result.sequence)} CNOTs: "
        f"{circuit_sequence(result.circuit)}"
    )


def cmd_compare(args):
    agent = load_agent(args.checkpoint)
    n = agent.encoder.n_qubits
    rows = []
    for layers in args.layers:
        spec = layered_spec(args.kind, n, layers, args.local_gate)
        budget = layers * (n - 1)
        metrics = evaluate(
            agent,
            args.n_states,
            args.structure,
            budget=budget,
            seed=args.seed,
            threads=args.threads,
        )
        rows.append(eval_row("agent", metrics, budget=budget, layers=layers))
        rng = np.random.default_rng(args.seed)
        targets = structured_targets(args.structure, n, args.n_states, rng)
        baseline = evaluate_layered(
            spec, targets, agent.optimizer, seed=args.seed, threads=args.threads
        )
        rows.append(eval_row("layered", baseline, budget=budget, layers=layers))
    _emit_rows(args.output, rows)


def cmd_oracle(args):
    psi = load_target(args.target)
    n = psi.n_qubits
    if args.graph == "unrestricted" or n < 2:
        graph = None
    else:
        graph = preset_graph(args.graph, n)
    if args.sequence is not None:
        result = score_sequence(psi, parse_sequence(args.sequence))
        print(
            f"{result.max_cnots}, {result.fidelity:.3f}, "
            f"{format_sequence(result.sequence)}"
        )
        return
    for k in args.max_cnots:
        result = brute_force_oracle(psi, k, graph, threads=args.threads)
        print(f"{k}, {result.fidelity:.3f}, {format_sequence(result.sequence)}")


def cmd_ladder(args):
    result = wstate_ladder(args.n, local=args.local)
    if args.output is not None:
        _write_circuit(args.output, result.circuit, result.params)
    print(
        f"fidelity {result.fidelity:.6f}, {len(result.sequence)} CNOTs: "
        f"{circuit_sequence(result.circuit)}"
    )


# Parser -----------------------------------------------------------------------


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer; got {text}")
    return value


def _non_negative(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer; got {text}")
    return value


def _add_eval_options(parser):
    parser.add_argument("--structure", default="entangled")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=_positive, default=None)
    parser.add_argument("--output", help="CSV file; standard output by default")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qsynth",
        description="Reinforcement-learning synthesis of state preparation circuits.",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="-v for progress messages, -vv for debugging output",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train_parser = commands.add_parser("train", help="train an agent")
    train_parser.add_argument("config", help="INI config file")
    train_parser.add_argument("--output-root", default=None)
    train_parser.set_defaults(func=cmd_train)

    eval_parser = commands.add_parser("eval", help="evaluate a trained agent")
    eval_parser.add_argument("checkpoint")
    eval_parser.add_argument("--n-states", type=_positive, default=1000)
    eval_parser.add_argument(
        "--budget", type=_non_negative, nargs="*", help="CNOT budgets to sweep"
    )
    _add_eval_options(eval_parser)
    eval_parser.set_defaults(func=cmd_eval)

    prepare_parser = commands.add_parser("prepare", help="synthesize a circuit")
    prepare_parser.add_argument("checkpoint")
    prepare_parser.add_argument("target")
    prepare_parser.add_argument("--budget", type=_non_negative, default=None)
    prepare_parser.add_argument(
        "--output", default="circuit", help="writes OUTPUT.txt and OUTPUT.json"
    )
    prepare_parser.set_defaults(func=cmd_prepare)

    compare_parser = commands.add_parser(
        "compare", help="compare an agent with layered circuits"
    )
    compare_parser.add_argument("checkpoint")
    compare_parser.add_argument("--kind", choices=KINDS, default="pairwise")
    compare_parser.add_argument("--local-gate", choices=LOCAL_GATES, default="rzry")
    compare_parser.add_argument(
        "--layers", type=_non_negative, nargs="+", default=[1, 2]
    )
    compare_parser.add_argument("--n-states", type=_positive, default=50)
    _add_eval_options(compare_parser)
    compare_parser.set_defaults(func=cmd_compare)

    oracle_parser = commands.add_parser("oracle", help="brute-force reference")
    oracle_parser.add_argument("target")
    oracle_parser.add_argument(
        "--max-cnots", type=_non_negative, nargs="+", default=[3]
    )
    oracle_parser.add_argument("--graph", choices=PRESET_NAMES, default="unrestricted")
    oracle_parser.add_argument("--threads", type=_positive, default=None)
    oracle_parser.add_argument(
        "--sequence",
        default=None,
        help='score one CNOT sequence such as "0-1, 1-2" instead of searching',
    )
    oracle_parser.set_defaults(func=cmd_oracle)

    ladder_parser = commands.add_parser("ladder", help="W-state ladder circuit")
    ladder_parser.add_argument("n", type=int)
    ladder_parser.add_argument("--local", choices=(RY, U3), default=RY)
    ladder_parser.add_argument("--output", default=None)
    ladder_parser.set_defaults(func=cmd_ladder)
    return parser


def main(argv=None):
    """
    Run the command line; returns the exit status.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    level = _LOG_LEVELS[min(args.verbose, len(_LOG_LEVELS) - 1)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "threads", 0) is None:
            args.threads = default_threads()
        args.func(args)
    except ValueError as exc:
        print(f"qsynth: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.debug("unexpected failure", exc_info=True)
        print(f"qsynth: error: {exc}", file=sys.stderr)
        return 2
    return 0
