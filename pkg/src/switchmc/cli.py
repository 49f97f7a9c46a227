"""Command-line front end.

Exit codes: 0 success, 1 refuted/unstabilizable verdict under ``--strict``,
2 input error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys

from . import graph as G
from .analysis import GoalError, check_stabilizable
from .model import ModelError, SwitchedChain, load_model
from .policy import (
    NotAbsorbingError,
    absorption_probabilities,
    expected_absorption_time,
    format_policy,
    induced_chain,
    parse_policy,
    synthesize_policy,
    validate_policy,
)
from .report import Verdict, analyze, dist_json, policy_to_dict, report_to_dict, report_to_text, stats_to_dict
from .simulate import (
    DEFAULT_MAX_STATES,
    ExplicitSequence,
    FixedMode,
    PeriodicSchedule,
    SearchLimitError,
    SimConfig,
    StatePolicy,
    UniformRandom,
    estimate_absorption,
    find_trap_policy,
    trapped_states,
)


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def _load(args) -> SwitchedChain:
    _read(args.model)
    try:
        return load_model(args.model, args.format)
    except ModelError as e:
        raise InputError(f"{args.model}: {e}") from None


def _labels(chain: SwitchedChain, spec: str | None) -> frozenset[int] | None:
    if spec is None:
        return None
    names = [s for s in spec.split(",") if s]
    try:
        return chain.states.indices(names)
    except KeyError as e:
        raise InputError(e.args[0]) from None


def _mode_list(text: str, k: int, what: str) -> tuple[int, ...]:
    modes = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.isdigit() or not 1 <= int(line) <= k:
            raise InputError(f"{what} line {lineno}: expected a mode index in 1..{k}")
        modes.append(int(line) - 1)
    if not modes:
        raise InputError(f"{what} is empty")
    return tuple(modes)


def _policy(chain: SwitchedChain, path: str):
    try:
        return parse_policy(_read(path), chain.states, chain.k)
    except ModelError as e:
        raise InputError(f"{path}: {e}") from None


def _signal(chain: SwitchedChain, spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "random" and not arg:
        return UniformRandom()
    if kind == "mode":
        if not arg.isdigit() or not 1 <= int(arg) <= chain.k:
            raise InputError(f"--signal mode:<i> needs i in 1..{chain.k}")
        return FixedMode(int(arg) - 1)
    if kind == "policy" and arg:
        return StatePolicy(_policy(chain, arg))
    if kind == "schedule" and arg:
        return PeriodicSchedule(_mode_list(_read(arg), chain.k, arg))
    if kind == "sequence" and arg:
        return ExplicitSequence(_mode_list(_read(arg), chain.k, arg))
    raise InputError(f"malformed --signal {spec!r}")


def _concretize(chain: SwitchedChain, strategy: str):
    try:
        return chain.concretize(strategy)
    except (ValueError, ModelError) as e:
        raise InputError(str(e)) from None


def run_config(args) -> dict:
    keys = ("command", "model", "format", "goal", "policy", "signal", "init", "trials", "horizon",
            "seed", "concretize", "tie_break", "max_states", "output", "strict")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _emit(args, payload: dict, text: str) -> None:
    if args.output == "json":
        sys.stdout.write(json.dumps({"config": run_config(args), **payload}, indent=2) + "\n")
    else:
        cfg = " ".join(f"{k}={v}" for k, v in run_config(args).items())
        sys.stdout.write(f"# {cfg}\n{text}")


def cmd_analyze(args) -> int:
    chain = _load(args)
    goal = _labels(chain, args.goal)
    if goal is None:
        inter = frozenset.intersection(*(m.absorbing for m in chain.modes))
        goal = inter or None
    try:
        rep = analyze(chain, goal, max_states=args.max_states)
    except GoalError as e:
        raise InputError(str(e)) from None
    _emit(args, {"report": report_to_dict(rep)}, report_to_text(rep))
    bad = rep.arbitrary_switching is Verdict.REFUTED or rep.stabilizable is False
    return 1 if args.strict and bad else 0


def cmd_synthesize(args) -> int:
    chain = _load(args)
    goal = _labels(chain, args.goal)
    try:
        ok, dist = check_stabilizable(chain, goal)
    except GoalError as e:
        raise InputError(str(e)) from None
    labels = chain.states.labels
    payload = {"goal": chain.states.names(goal), "stabilizable": ok,
               "d_union": {labels[i]: dist_json(d) for i, d in enumerate(dist)}}
    if not ok:
        payload["unreachable"] = [labels[i] for i, d in enumerate(dist) if d == G.INF]
        _emit(args, payload, "# not stabilizable; unreachable: " + " ".join(payload["unreachable"]) + "\n")
        return 1 if args.strict else 0
    try:
        policy = synthesize_policy(chain, goal, tie_break=args.tie_break)
    except ValueError as e:
        raise InputError(str(e)) from None
    payload["policy"] = policy_to_dict(chain, policy)
    payload["targets"] = {labels[i]: None if t is None else labels[t] for i, t in enumerate(policy.targets)}
    text = format_policy(policy, chain.states)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    _emit(args, payload, text)
    return 0


def cmd_expected_time(args) -> int:
    chain = _load(args)
    goal = _labels(chain, args.goal)
    policy = _policy(chain, args.policy)
    if not validate_policy(chain, policy, goal):
        raise InputError("policy does not drive every state into the goal")
    conc = _concretize(chain, args.concretize)
    q = induced_chain(conc, policy)
    try:
        times = expected_absorption_time(q, goal)
        probs = absorption_probabilities(q, goal)
    except NotAbsorbingError as e:
        raise InputError(str(e)) from None
    labels = chain.states.labels
    gl = sorted(goal)
    payload = {
        "goal": [labels[g] for g in gl],
        "policy": policy_to_dict(chain, policy),
        "expected_time": {labels[i]: float(t) for i, t in enumerate(times)},
        "absorption_probabilities": {
            labels[i]: {labels[g]: float(probs[i, c]) for c, g in enumerate(gl)} for i in range(chain.n)
        },
    }
    text = "".join(f"{labels[i]} {float(t)!r}\n" for i, t in enumerate(times))
    _emit(args, payload, "# state expected-steps\n" + text)
    return 0


def cmd_simulate(args) -> int:
    chain = _load(args)
    signal = _signal(chain, args.signal)
    if args.init == "all":
        inits = list(range(chain.n))
    else:
        inits = sorted(_labels(chain, args.init))
    goal = _labels(chain, args.goal)
    if args.trials < 1 or args.horizon < 0:
        raise InputError("--trials must be >= 1 and --horizon >= 0")
    conc = _concretize(chain, args.concretize)
    cfg = SimConfig(trials=args.trials, horizon=args.horizon, seed=args.seed, goal=goal)
    results = [stats_to_dict(chain, estimate_absorption(conc, signal, i, cfg)) for i in inits]
    lines = []
    for r in results:
        absorbed = " ".join(f"{k}={v!r}" for k, v in r["absorbed"].items())
        lines.append(
            f"init {r['init']}: absorbed {r['absorbed_fraction']!r} ({absorbed}) "
            f"not_absorbed {r['not_absorbed']!r} mean_time {r['mean_hitting_time']!r} "
            f"stderr {r['stderr_hitting_time']!r}"
        )
    _emit(args, {"results": results}, "\n".join(lines) + "\n")
    return 0


def cmd_find_trap(args) -> int:
    chain = _load(args)
    target = _labels(chain, args.goal)
    if target is None:
        target = frozenset.intersection(*(m.absorbing for m in chain.modes))
    try:
        pol = find_trap_policy(chain, target, max_states=args.max_states)
    except SearchLimitError as e:
        raise InputError(str(e)) from None
    labels = chain.states.labels
    payload = {"target": chain.states.names(target), "trap_policy": None, "trapped_states": []}
    if pol is None:
        text = "no trap policy: every state policy reaches the target set\n"
    else:
        trapped = trapped_states(chain, pol, target)
        payload["trap_policy"] = policy_to_dict(chain, pol)
        payload["trapped_states"] = chain.states.names(trapped)
        text = format_policy(pol, chain.states) + "# trapped: " + " ".join(labels[i] for i in sorted(trapped)) + "\n"
    _emit(args, payload, text)
    return 1 if args.strict and pol is not None else 0


def cmd_graph(args) -> int:
    chain = _load(args)
    graphs = G.mode_graphs(chain)
    if args.which == "union":
        g = G.union_graph(graphs)
    elif args.which == "intersection":
        g = G.intersection_graph(graphs)
    else:
        name = args.which.removeprefix("mode:")
        if name not in chain.mode_names:
            raise InputError(f"unknown graph {args.which!r}")
        g = graphs[chain.mode_names.index(name)]
    labels = chain.states.labels
    if args.dot:
        sys.stdout.write(G.to_dot(g, labels, name=args.which))
    else:
        sys.stdout.write(G.to_edgelist(g, labels))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="switchmc", description="Absorption analysis for switched Markov chains.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="model file")
    common.add_argument("--format", choices=["text", "json"], default="text", help="model file format")
    common.add_argument("--output", choices=["text", "json"], default="text", help="report format")
    common.add_argument("--concretize", default="uniform", help="uniform | random:<seed>")
    common.add_argument("--strict", action="store_true", help="exit 1 on refuted/unstabilizable verdicts")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="run every check")
    a.add_argument("--goal", help="comma-separated goal labels (default: common absorbing states)")
    a.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synthesize", parents=[common], help="build a stabilizing policy")
    s.add_argument("--goal", required=True)
    s.add_argument("--tie-break", default="lowest", help="lowest | seeded:<seed>")
    s.add_argument("--out", help="also write the policy file here")
    s.set_defaults(func=cmd_synthesize)

    e = sub.add_parser("expected-time", parents=[common], help="closed-form absorption quantities")
    e.add_argument("--policy", required=True)
    e.add_argument("--goal", required=True)
    e.set_defaults(func=cmd_expected_time)

    m = sub.add_parser("simulate", parents=[common], help="Monte Carlo absorption estimates")
    m.add_argument("--signal", required=True,
                   help="policy:<file> | mode:<i> | random | schedule:<file> | sequence:<file>")
    m.add_argument("--init", required=True, help="state label(s) or 'all'")
    m.add_argument("--trials", type=int, default=10_000)
    m.add_argument("--horizon", type=int, default=1_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--goal", help="count entry into these states as absorption")
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("find-trap", parents=[common], help="search for a trapping state policy")
    t.add_argument("--goal", help="target set (default: common absorbing states)")
    t.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    t.set_defaults(func=cmd_find_trap)

    g = sub.add_parser("graph", parents=[common], help="export a simplified transition graph")
    g.add_argument("--which", default="union", help="union | intersection | mode:<name>")
    g.add_argument("--dot", action="store_true")
    g.set_defaults(func=cmd_graph)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        if not re.fullmatch(r"uniform|random:\d+", args.concretize):
            raise InputError(f"unknown concretization strategy {args.concretize!r}")
        return args.func(args)
    except InputError as e:
        print(f"switchmc: error: {e}", file=sys.stderr)
        return 2


def run(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
