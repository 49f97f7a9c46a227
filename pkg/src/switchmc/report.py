"""Verdict aggregation and report rendering."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

from .analysis import (
    ConditionVerdict,
    check_condition1,
    check_condition2,
    check_condition3,
    check_equal_absorbing_sets,
    check_stabilizable,
)
from .graph import INF, max_distances_to_set, mode_graphs
from .model import SwitchedChain, absorbing_sets
from .policy import SwitchingPolicy, synthesize_policy
from .simulate import DEFAULT_MAX_STATES, SearchLimitError, SimStats, find_trap_policy, trapped_states


class Verdict(str, enum.Enum):
    GUARANTEED = "GUARANTEED"
    REFUTED = "REFUTED"
    UNKNOWN = "UNKNOWN"


@dataclass
class AnalysisReport:
    chain: SwitchedChain
    absorbing_per_mode: tuple[frozenset[int], ...]
    absorbing_union: frozenset[int]
    absorbing_intersection: frozenset[int]
    equal_absorbing_sets: bool
    cond1: ConditionVerdict | None = None
    cond2: ConditionVerdict | None = None
    cond3: ConditionVerdict | None = None
    max_distance: tuple[float, ...] | None = None
    arbitrary_switching: Verdict = Verdict.UNKNOWN
    guaranteed_by: tuple[int, ...] = ()
    trap_policy: SwitchingPolicy | None = None
    trapped: frozenset[int] = frozenset()
    notes: list[str] = field(default_factory=list)
    goal: frozenset[int] | None = None
    d_union: tuple[float, ...] | None = None
    m: float | None = None
    stabilizable: bool | None = None
    policy: SwitchingPolicy | None = None


def analyze(chain: SwitchedChain, goal: Iterable[int] | None = None,
            max_states: int = DEFAULT_MAX_STATES) -> AnalysisReport:
    """Run every check and combine the verdicts.

    Absorption under arbitrary switching is GUARANTEED when a sufficient
    condition holds, REFUTED only with a trap policy in hand (unequal
    absorbing sets give one directly), and UNKNOWN otherwise.
    """
    per_mode, union, inter = absorbing_sets(chain)
    rep = AnalysisReport(chain, per_mode, union, inter, check_equal_absorbing_sets(chain))
    if rep.equal_absorbing_sets:
        rep.cond1 = check_condition1(chain)
        rep.cond2 = check_condition2(chain)
        rep.cond3 = check_condition3(chain)
        rep.max_distance = max_distances_to_set(mode_graphs(chain), inter)
        rep.guaranteed_by = tuple(i for i, c in enumerate((rep.cond1, rep.cond2, rep.cond3), 1) if c.holds)
    if rep.guaranteed_by:
        rep.arbitrary_switching = Verdict.GUARANTEED
    elif not rep.equal_absorbing_sets:
        # stay forever in a mode that owns a non-common absorbing state
        mode, state = min((i, a) for i, s in enumerate(per_mode) for a in s - inter)
        rep.trap_policy = SwitchingPolicy((mode,) * chain.n)
        rep.notes.append(
            f"state {chain.states.labels[state]} is absorbing in mode {chain.mode_names[mode]} only"
        )
    else:
        try:
            rep.trap_policy = find_trap_policy(chain, inter, max_states=max_states)
        except SearchLimitError as e:
            rep.notes.append(f"trap search skipped: {e}")
    if rep.trap_policy is not None:
        rep.trapped = trapped_states(chain, rep.trap_policy, inter)
        rep.arbitrary_switching = Verdict.REFUTED

    if goal is not None:
        rep.goal = frozenset(goal)
        rep.stabilizable, rep.d_union = check_stabilizable(chain, rep.goal)
        rep.m = max(rep.d_union)
        if rep.stabilizable:
            rep.policy = synthesize_policy(chain, rep.goal)
    return rep


# --- rendering ------------------------------------------------------------

def dist_json(d: float):
    return "inf" if d == INF else int(d)


def _names(chain: SwitchedChain, idx) -> list[str]:
    return chain.states.names(idx)


def policy_to_dict(chain: SwitchedChain, policy: SwitchingPolicy) -> dict:
    return dict(zip(chain.states.labels, policy.one_based()))


def verdict_to_dict(chain: SwitchedChain, v: ConditionVerdict | None):
    if v is None:
        return None
    labels = chain.states.labels
    cert = {}
    for key, val in v.certificate.items():
        if key == "state":
            cert[key] = None if val is None else labels[val]
        elif key == "mode":
            cert[key] = chain.mode_names[val]
        elif key == "cycle":
            cert[key] = [labels[i] for i in val]
        elif key == "paths":
            cert[key] = {labels[s]: [labels[i] for i in p] for s, p in sorted(val.items())}
        elif key == "max_distance":
            cert[key] = {labels[i]: dist_json(d) for i, d in enumerate(val)}
        else:
            cert[key] = val
    return {"holds": v.holds, "certificate": cert}


def report_to_dict(rep: AnalysisReport) -> dict:
    c = rep.chain
    labels = c.states.labels
    out = {
        "states": list(labels),
        "modes": list(c.mode_names),
        "absorbing": {
            "per_mode": {name: _names(c, s) for name, s in zip(c.mode_names, rep.absorbing_per_mode)},
            "union": _names(c, rep.absorbing_union),
            "intersection": _names(c, rep.absorbing_intersection),
        },
        "equal_absorbing_sets": rep.equal_absorbing_sets,
        "max_distance": None if rep.max_distance is None
        else {labels[i]: dist_json(d) for i, d in enumerate(rep.max_distance)},
        "conditions": {
            "cond1": verdict_to_dict(c, rep.cond1),
            "cond2": verdict_to_dict(c, rep.cond2),
            "cond3": verdict_to_dict(c, rep.cond3),
        },
        "arbitrary_switching": {
            "verdict": rep.arbitrary_switching.value,
            "guaranteed_by": [f"cond{i}" for i in rep.guaranteed_by],
            "trap_policy": None if rep.trap_policy is None else policy_to_dict(c, rep.trap_policy),
            "trapped_states": _names(c, rep.trapped),
            "notes": list(rep.notes),
        },
    }
    if rep.goal is not None:
        out["stabilizability"] = {
            "goal": _names(c, rep.goal),
            "stabilizable": rep.stabilizable,
            "d_union": {labels[i]: dist_json(d) for i, d in enumerate(rep.d_union)},
            "m": dist_json(rep.m),
            "policy": None if rep.policy is None else policy_to_dict(c, rep.policy),
            "unreachable": [labels[i] for i, d in enumerate(rep.d_union) if d == INF],
        }
    return out


def _fmt_dist(d) -> str:
    return "inf" if d in ("inf", INF) else str(d)


def report_to_text(rep: AnalysisReport) -> str:
    d = report_to_dict(rep)
    lines = [f"states: {' '.join(d['states'])}", f"modes: {' '.join(d['modes'])}", ""]
    lines.append("absorbing sets:")
    for name, s in d["absorbing"]["per_mode"].items():
        lines.append(f"  mode {name}: {{{', '.join(s)}}}")
    lines.append(f"  union: {{{', '.join(d['absorbing']['union'])}}}")
    lines.append(f"  intersection: {{{', '.join(d['absorbing']['intersection'])}}}")
    lines.append(f"  equal across modes: {'yes' if d['equal_absorbing_sets'] else 'no'}")
    if d["max_distance"] is not None:
        lines.append("max distance to absorbing set: "
                     + " ".join(f"{k}={_fmt_dist(v)}" for k, v in d["max_distance"].items()))
    lines.append("")
    lines.append("sufficient conditions:")
    for key, v in d["conditions"].items():
        if v is None:
            lines.append(f"  {key}: not applicable (absorbing sets differ)")
            continue
        cert = v["certificate"]
        detail = ""
        if not v["holds"]:
            detail = " (" + cert["reason"]
            if "cycle" in cert:
                detail += ": " + " -> ".join(cert["cycle"] + cert["cycle"][:1])
            if cert.get("mode") is not None:
                detail += f", mode {cert['mode']}"
            if cert.get("state") is not None:
                detail += f", state {cert['state']}"
            detail += ")"
        lines.append(f"  {key}: {'holds' if v['holds'] else 'fails'}{detail}")
    a = d["arbitrary_switching"]
    lines.append("")
    via = f" via {', '.join(a['guaranteed_by'])}" if a["guaranteed_by"] else ""
    lines.append(f"absorption under arbitrary switching: {a['verdict']}{via}")
    if a["trap_policy"] is not None:
        lines.append("  trap policy: " + " ".join(f"{k}:{m}" for k, m in a["trap_policy"].items()))
        lines.append(f"  trapped states: {{{', '.join(a['trapped_states'])}}}")
    for note in a["notes"]:
        lines.append(f"  note: {note}")
    if "stabilizability" in d:
        s = d["stabilizability"]
        lines.append("")
        lines.append(f"goal {{{', '.join(s['goal'])}}}: {'stabilizable' if s['stabilizable'] else 'not stabilizable'}")
        lines.append("  union-graph distance: " + " ".join(f"{k}={_fmt_dist(v)}" for k, v in s["d_union"].items()))
        lines.append(f"  m = {_fmt_dist(s['m'])}")
        if s["policy"] is not None:
            lines.append("  policy: " + " ".join(f"{k}:{m}" for k, m in s["policy"].items()))
        if s["unreachable"]:
            lines.append(f"  unreachable: {{{', '.join(s['unreachable'])}}}")
    return "\n".join(lines) + "\n"


def stats_to_dict(chain: SwitchedChain, st: SimStats) -> dict:
    labels = chain.states.labels
    return {
        "init": labels[st.init],
        "trials": st.trials,
        "horizon": st.horizon,
        "seed": st.seed,
        "absorbed": {labels[a]: f for a, f in st.absorbed.items()},
        "absorbed_fraction": st.absorbed_fraction,
        "not_absorbed": st.not_absorbed,
        "mean_hitting_time": None if math.isnan(st.mean_hitting_time) else st.mean_hitting_time,
        "stderr_hitting_time": None if math.isnan(st.stderr_hitting_time) else st.stderr_hitting_time,
    }
