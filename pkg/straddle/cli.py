"""Command-line entry point: prep, synth, analyze, certify, simulate and count"""

import argparse
import logging
import sys
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from . import __version__
from .certifier import certify_min_straddle
from .circuit import PartitionSpec, PureState, apply_circuit, count_straddling, fidelity
from .config import Settings, get_settings
from .errors import InvalidInputError, ResourceLimitError, StraddleError, VerificationError
from .formats import (
    canonical_json, inputs_digest, load_circuit, load_partition, load_state, load_unitary,
    parse_partition_label, save_circuit, save_state, write_text,
)
from .qsd import QsdConfig, synth_unitary_qsd
from .schmidt import entanglement_entropy, is_schmidt_decomposable, iterated_decompose, level_ranks, schmidt_decompose
from .stateprep import METHODS, prepare

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VERIFICATION = 2
EXIT_NOT_FOUND = 3


class RunReport(BaseModel):
    """Everything one invocation produced, serialized with canonical_json"""

    model_config = ConfigDict(frozen=True)

    command: str
    inputs_digest: str
    payload: Dict[str, Any]
    tool_version: str = __version__
    seed: Optional[int] = None
    wall_time: Optional[float] = None

    def to_json(self) -> str:
        return canonical_json(self.model_dump(exclude_none=True))


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Reports parse failures by exception so dispatch can return exit code 1"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--report", help="Write the JSON run report here (default: stdout)")
    sub.add_argument("--seed", type=int, help="Seed for every randomized step")
    sub.add_argument("--tolerance", type=float, help="Fidelity / reconstruction tolerance")
    sub.add_argument("--max-qubits", type=int, help="Cap for dense unitary and QSD work")
    sub.add_argument("--timing", action="store_true", help="Record wall time in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="straddle",
        description="Synthesize circuits that use few gates across a qubit partition",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  straddle prep --state bell.json --partition p2.json --method schmidt-path --out c.sqc --report r.json
  straddle synth --unitary u.json --partition p2.json --method smaller-first --out c.sqc
  straddle certify --state w3.json --partition p3.json --budget 2 --restarts 50 --seed 7
        """
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    prep = subparsers.add_parser("prep", help="Prepare a state from |0...0>")
    prep.add_argument("--state", required=True, help="State JSON file")
    prep.add_argument("--partition", required=True, help="Partition JSON file")
    prep.add_argument("--method", default="auto", choices=list(METHODS))
    prep.add_argument("--out", help="Write the circuit (.sqc) here")
    _add_common(prep)

    synth = subparsers.add_parser("synth", help="Synthesize a unitary over a two-party partition")
    synth.add_argument("--unitary", required=True, help="Unitary JSON file")
    synth.add_argument("--partition", required=True, help="Partition JSON file")
    synth.add_argument("--method", default="smaller-first", choices=["smaller-first", "larger-first"])
    synth.add_argument("--out", help="Write the circuit (.sqc) here")
    _add_common(synth)

    analyze = subparsers.add_parser("analyze", help="Entropies, Schmidt ranks and decomposability")
    analyze.add_argument("--state", required=True, help="State JSON file")
    analyze.add_argument("--partition", help="Partition JSON file (default: one party per qubit)")
    analyze.add_argument("--cut", help="Extra bipartition to report in full, e.g. 0,1|2")
    _add_common(analyze)

    certify = subparsers.add_parser("certify", help="Search for a circuit with a fixed straddle budget")
    certify.add_argument("--state", required=True, help="State JSON file")
    certify.add_argument("--partition", required=True, help="Partition JSON file")
    certify.add_argument("--budget", type=int, required=True, help="Number of straddling slots")
    certify.add_argument("--restarts", type=int, default=20, help="Random restarts per template")
    certify.add_argument("--slot-gate", default="cnot", choices=["cnot", "su4"])
    certify.add_argument("--out", help="Write the found circuit (.sqc) here")
    _add_common(certify)

    simulate = subparsers.add_parser("simulate", help="Run a circuit on a state")
    simulate.add_argument("--circuit", required=True, help="Circuit (.sqc) file")
    simulate.add_argument("--state", help="Initial state JSON file (default |0...0>)")
    simulate.add_argument("--check-against", help="Expected final state JSON file")
    simulate.add_argument("--out", help="Write the final state JSON here")
    _add_common(simulate)

    count = subparsers.add_parser("count", help="Count straddling gates of a lowered circuit")
    count.add_argument("--circuit", required=True, help="Circuit (.sqc) file")
    count.add_argument("--partition", help="Partition JSON file (default: the circuit header)")
    _add_common(count)

    return parser


def _settings_for(args: argparse.Namespace) -> Settings:
    update: Dict[str, Any] = {}
    if args.tolerance is not None:
        if args.tolerance <= 0:
            raise InvalidInputError("--tolerance must be positive")
        update.update(fidelity_tol=args.tolerance, operator_tol=args.tolerance)
    if args.max_qubits is not None:
        if args.max_qubits < 1:
            raise InvalidInputError("--max-qubits must be at least 1")
        update.update(max_unitary_qubits=args.max_qubits, max_qsd_qubits=args.max_qubits)
    if args.seed is not None:
        update.update(default_seed=args.seed)
    return get_settings().model_copy(update=update)


def _check_partition(p: PartitionSpec, n: int, what: str):
    if p.n != n:
        raise InvalidInputError(f"Partition covers {p.n} qubits, {what} has {n}")


# ---------------------------------------------------------------------------
# Subcommands; each returns (exit code, payload, input files)
# ---------------------------------------------------------------------------

Outcome = Tuple[int, Dict[str, Any], Dict[str, Optional[str]]]


def _cmd_prep(args: argparse.Namespace, cfg: Settings) -> Outcome:
    target, p = load_state(args.state), load_partition(args.partition)
    _check_partition(p, target.n, "state")
    circuit, report = prepare(target, p, method=args.method, settings=cfg)
    if args.out:
        save_circuit(args.out, circuit, p)
    print(f"{report.method}: straddling_total={report.straddling_total} fidelity={report.fidelity:.12f}",
          file=sys.stderr)
    return EXIT_OK, report.model_dump(), {"state": args.state, "partition": args.partition}


def _cmd_synth(args: argparse.Namespace, cfg: Settings) -> Outcome:
    U, p = load_unitary(args.unitary), load_partition(args.partition)
    circuit, report = synth_unitary_qsd(U, p, QsdConfig(strategy=args.method), settings=cfg)
    if args.out:
        save_circuit(args.out, circuit, p)
    print(f"{report.method}: straddling_total={report.straddling_total} "
          f"operator_distance={report.operator_distance:.3e}", file=sys.stderr)
    return EXIT_OK, report.model_dump(), {"unitary": args.unitary, "partition": args.partition}


def _cmd_analyze(args: argparse.Namespace, cfg: Settings) -> Outcome:
    s = load_state(args.state)
    p = load_partition(args.partition) if args.partition else PartitionSpec.singletons(s.n)
    _check_partition(p, s.n, "state")
    payload: Dict[str, Any] = {"n": s.n, "partition": p.label(), "cuts": []}

    if p.m >= 2:
        for j, party in enumerate(p.parties):
            cut = PartitionSpec.of([party, [q for q in range(s.n) if q not in party]])
            payload["cuts"].append({
                "party": j,
                "entropy": entanglement_entropy(s, cut, cfg),
                "schmidt_rank": schmidt_decompose(s, cut, cfg).rank,
            })
        payload["level_ranks"] = list(level_ranks(iterated_decompose(s, p, cfg)))
        verdict = is_schmidt_decomposable(s, p, settings=cfg)
        payload["decomposable"] = {
            "verdict": verdict.verdict,
            "check": verdict.check,
            "reason": verdict.reason,
            "rank": verdict.form.rank if verdict.form is not None else None,
        }
    if args.cut:
        cut = parse_partition_label(args.cut)
        _check_partition(cut, s.n, "state")
        dec = schmidt_decompose(s, cut, cfg)
        payload["cut"] = {
            "label": cut.label(),
            "weights": [float(w) for w in dec.weights],
            "schmidt_rank": dec.rank,
            "entropy": entanglement_entropy(s, cut, cfg),
        }
    print(f"analyzed {s.n} qubits over {p.label()}", file=sys.stderr)
    return EXIT_OK, payload, {"state": args.state, "partition": args.partition}


def _cmd_certify(args: argparse.Namespace, cfg: Settings) -> Outcome:
    target, p = load_state(args.state), load_partition(args.partition)
    _check_partition(p, target.n, "state")
    result = certify_min_straddle(target, p, args.budget, restarts=args.restarts, seed=args.seed,
                                  slot_gate=args.slot_gate, settings=cfg)
    if result.circuit is not None and args.out:
        save_circuit(args.out, result.circuit, p)
    payload = result.model_dump(exclude={"circuit"})
    payload["budget"] = args.budget
    print(f"{result.verdict}: best fidelity {result.best_fidelity:.12f}", file=sys.stderr)
    code = EXIT_OK if result.verdict == "achievable" else EXIT_NOT_FOUND
    return code, payload, {"state": args.state, "partition": args.partition}


def _cmd_simulate(args: argparse.Namespace, cfg: Settings) -> Outcome:
    circuit, _ = load_circuit(args.circuit)
    start = load_state(args.state) if args.state else PureState.zero(circuit.n)
    final = apply_circuit(circuit, start, cfg)
    if args.out:
        save_state(args.out, final)
    payload: Dict[str, Any] = {"n": final.n, "gates": len(circuit)}
    code = EXIT_OK
    if args.check_against:
        expected = load_state(args.check_against)
        fid = fidelity(expected, final)
        payload["fidelity"] = fid
        if fid < 1 - cfg.fidelity_tol:
            logger.error(f"Simulated state misses the expected state: fidelity {fid:.12f}")
            code = EXIT_VERIFICATION
        print(f"fidelity against {args.check_against}: {fid:.12f}", file=sys.stderr)
    files = {"circuit": args.circuit, "state": args.state, "check_against": args.check_against}
    return code, payload, files


def _cmd_count(args: argparse.Namespace, cfg: Settings) -> Outcome:
    circuit, header = load_circuit(args.circuit)
    p = load_partition(args.partition) if args.partition else header
    if p is None:
        raise InvalidInputError("No partition given and the circuit file has no partition header")
    total, per_pair = count_straddling(circuit, p)
    print(f"straddling_total={total}", file=sys.stderr)
    payload = {"straddling_total": total, "per_pair": {f"{i}-{j}": c for (i, j), c in per_pair.items()}}
    return EXIT_OK, payload, {"circuit": args.circuit, "partition": args.partition}


COMMANDS: Dict[str, Callable[[argparse.Namespace, Settings], Outcome]] = {
    "prep": _cmd_prep,
    "synth": _cmd_synth,
    "analyze": _cmd_analyze,
    "certify": _cmd_certify,
    "simulate": _cmd_simulate,
    "count": _cmd_count,
}


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its exit code

    0 success, 1 invalid input or resource limit, 2 verification failure,
    3 certify found nothing within the budget.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"straddle: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:
        return int(e.code or 0)

    cfg = get_settings()
    logging.basicConfig(level=getattr(logging, cfg.log_level.upper(), logging.WARNING), format=LOG_FORMAT)

    try:
        cfg = _settings_for(args)
        started = time.perf_counter()
        code, payload, files = COMMANDS[args.command](args, cfg)
        elapsed = time.perf_counter() - started
        report = RunReport(
            command=args.command,
            inputs_digest=inputs_digest(files),
            payload=payload,
            seed=args.seed,
            wall_time=elapsed if args.timing else None,
        )
        if args.report:
            write_text(args.report, report.to_json())
        else:
            sys.stdout.write(report.to_json())
        return code
    except VerificationError as e:
        logger.error(f"Verification failed: {e}")
        print(f"straddle: verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFICATION
    except (InvalidInputError, ResourceLimitError) as e:
        logger.error(f"{args.command} rejected its input: {e}")
        print(f"straddle: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except StraddleError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"straddle: error: {e}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(dispatch(sys.argv[1:]))

