"""Command line entry point: ``dcverify {cut,verify,compare,oracle,demo}``.

Exit codes: 0 success, 2 invalid input, 3 shot budget refused, 4 internal error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .circuit import Circuit, linear_graph_state_circuit, load_circuit
from .estimate import EstimatorConfig, algorithm1, direct_fidelity_estimate, is_clifford, required_shots
from .oracle import OracleReport, exact_fidelity, verify_budget_shape
from .partition import decompose_circuit, find_min_cut
from .report import format_table, make_report, write_run
from .sim import NoiseModel, prepare_state
from ._validation import BudgetExceeded, CircuitError, DenseCapError, PartitionError, dense_cap
from .sim import SimulationError

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_INTERNAL = 0, 2, 3, 4

DEMO_STATE_NOISE = {"state_p1": 0.005, "state_p2": 0.02}


class UsageError(ValueError):
    pass


def _add_circuit(p):
    p.add_argument("--circuit", required=True, help="circuit JSON file")
    p.add_argument("--cut-mode", choices=("exact", "heuristic"), default="exact")


def _add_run_flags(p, demo: bool = False):
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--t1", type=int, default=0)
    p.add_argument("--t2", type=int, default=0)
    p.add_argument("--t3", type=int, default=1024)
    p.add_argument("--mode", choices=("sampled", "enumerated", "analytic"), default="enumerated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p1", type=float, default=0.0, help="device depolarizing, single-qubit gates")
    p.add_argument("--p2", type=float, default=0.0, help="device depolarizing, multi-qubit gates")
    p.add_argument("--gamma", type=float, default=0.0, help="device amplitude damping")
    p.add_argument("--readout", type=float, default=0.0, help="readout bit-flip probability")
    p.add_argument("--state-p1", type=float, default=DEMO_STATE_NOISE["state_p1"] if demo else 0.0)
    p.add_argument("--state-p2", type=float, default=DEMO_STATE_NOISE["state_p2"] if demo else 0.0)
    p.add_argument("--reduce", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--oracle", action="store_true", help="compare against the exact fidelity")
    p.add_argument("--out", default=None, help="directory for report files")
    p.add_argument("--name", default=None, help="run name used for output files")
    p.add_argument("--force", action="store_true", help="run even above the shot budget cap")
    p.add_argument("--max-shots", type=int, default=10**8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcverify", description="Divide-and-conquer fidelity estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cut", help="minimum balanced cut of a circuit")
    _add_circuit(p)

    p = sub.add_parser("verify", help="estimate the fidelity of rho_out")
    _add_circuit(p)
    _add_run_flags(p)

    p = sub.add_parser("compare", help="split estimator vs direct Pauli estimator vs exact value")
    _add_circuit(p)
    _add_run_flags(p)

    p = sub.add_parser("oracle", help="exact fidelity and shot-budget checks")
    _add_circuit(p)
    p.add_argument("--state-p1", type=float, default=0.0)
    p.add_argument("--state-p2", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)

    p = sub.add_parser("demo", help="linear graph state, split vs direct vs exact")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--cut-mode", choices=("exact", "heuristic"), default="exact")
    _add_run_flags(p, demo=True)
    return parser


def _config(args, force: bool = False) -> EstimatorConfig:
    return EstimatorConfig(
        epsilon=args.epsilon,
        delta=args.delta,
        t1=args.t1,
        t2=args.t2,
        t3=args.t3,
        mode=args.mode,
        seed=args.seed,
        noise=NoiseModel(p1=args.p1, p2=args.p2, gamma=args.gamma, readout_flip=args.readout),
        state_noise=NoiseModel(p1=args.state_p1, p2=args.state_p2),
        cut_mode=args.cut_mode,
        reduce=args.reduce,
        max_shots=2**62 if force else args.max_shots,
        max_terms=2**62 if force else 2**16,
        record_shots=args.mode != "analytic",
    )


def _load(args) -> Circuit:
    try:
        return load_circuit(args.circuit)
    except OSError as exc:
        raise UsageError(f"cannot read circuit file: {exc}") from exc


def _run_name(args, target: Circuit) -> str:
    if getattr(args, "name", None):
        return args.name
    if getattr(args, "circuit", None):
        return os.path.splitext(os.path.basename(args.circuit))[0]
    return target.name or "run"


def _oracle_value(args, target: Circuit, config: EstimatorConfig):
    if not args.oracle:
        return None
    if target.n_qubits > dense_cap():
        raise UsageError(f"--oracle needs n <= {dense_cap()} (set DCVERIFY_DENSE_CAP to raise it)")
    return exact_fidelity(prepare_state(target, config.state_noise), target)


def _refusal(exc: BudgetExceeded, config: EstimatorConfig, D: int) -> str:
    _, t, total = required_shots(config.epsilon, config.delta, D)
    return (f"refusing to run: {exc}\n"
            f"the guaranteed budget at epsilon={config.epsilon}, delta={config.delta}, D={D} is "
            f"T={t} per level, 8T^3 = {total} copies; pass --force, set --t1/--t2/--t3, "
            f"or use --mode analytic")


def _estimate(args, target: Circuit):
    config = _config(args, args.force)
    decomposition = decompose_circuit(target, config.cut_mode)
    try:
        est = algorithm1(target, config, decomposition=decomposition)
    except BudgetExceeded as exc:
        print(_refusal(exc, config, decomposition[1].D), file=sys.stderr)
        return None, config
    return est, config


def cmd_cut(args) -> int:
    target = _load(args)
    print(json.dumps(find_min_cut(target, args.cut_mode).to_dict(), indent=1))
    return EXIT_OK


def cmd_verify(args) -> int:
    target = _load(args)
    est, config = _estimate(args, target)
    if est is None:
        return EXIT_BUDGET
    oracle = _oracle_value(args, target, config)
    run = make_report(est, oracle)
    print(f"F_est = {est.f_est:.6f}  (+/- {est.hoeffding_half_width:.4f} at {1 - config.delta:.2f})")
    if est.out_of_range:
        print("note: F_est lies outside [0, 1]; estimates are not clamped")
    if oracle is not None:
        print(f"exact = {oracle:.6f}  |F_est - exact| = {run.abs_error:.3e}")
    if args.out:
        paths = write_run(run, args.out, _run_name(args, target))
        print("wrote " + ", ".join(paths.values()))
    return EXIT_OK


def _compare(args, target: Circuit) -> int:
    est, config = _estimate(args, target)
    if est is None:
        return EXIT_BUDGET
    rows = [["split", est.f_est, est.hoeffding_half_width]]
    direct = None
    if is_clifford(target):
        shots = args.t3 if args.mode != "analytic" else 0
        value, width = direct_fidelity_estimate(target, max(shots, 1), config, analytic=args.mode == "analytic")
        direct = {"f_est": value, "half_width": width, "shots_per_k": shots}
        rows.append(["direct", value, width])
    else:
        print("note: target is not Clifford; direct Pauli column omitted")
    oracle = None
    if target.n_qubits <= dense_cap():
        oracle = exact_fidelity(prepare_state(target, config.state_noise), target)
        rows.append(["exact", oracle, 0.0])
    print(format_table(["method", "estimate", "half_width"], rows))
    if args.out:
        write_run(make_report(est, oracle, direct), args.out, _run_name(args, target))
    return EXIT_OK


def cmd_compare(args) -> int:
    return _compare(args, _load(args))


def cmd_oracle(args) -> int:
    target = _load(args)
    if target.n_qubits > dense_cap():
        raise UsageError(f"oracle needs n <= {dense_cap()}")
    noise = NoiseModel(p1=args.state_p1, p2=args.state_p2)
    value = exact_fidelity(prepare_state(target, noise), target)
    _, L = decompose_circuit(target, args.cut_mode)
    report = OracleReport("fidelity", value, "exact-channel-expectation", None,
                          {"circuit": args.circuit, "state_p1": args.state_p1, "state_p2": args.state_p2})
    doc = report.to_dict()
    doc["budget"] = verify_budget_shape(args.epsilon, args.delta, L.D)
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def cmd_demo(args) -> int:
    if args.n % 2 or not 2 <= args.n <= 10:
        raise UsageError("demo needs an even n between 2 and 10")
    target = linear_graph_state_circuit(args.n)
    args.circuit = None
    if args.name is None:
        args.name = f"demo-{args.n}"
    return _compare(args, target)


COMMANDS = {"cut": cmd_cut, "verify": cmd_verify, "compare": cmd_compare, "oracle": cmd_oracle, "demo": cmd_demo}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, CircuitError, PartitionError, DenseCapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AssertionError, SimulationError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
