"""Scenario loading, bound checking, verification suites, and the CLI.

A scenario pins everything an adversarial run needs: graph family and
size, the walk-length bound N, the id assignment, which agents are
faulty and how they behave, the wake policy, and the protocol variant
(NS: non-simultaneous termination, SIM: simultaneous).  The harness
certifies an exploration sequence for the scenario's N, runs the round
engine, and checks the trace against the gathering contract, the two
round-count bounds, and a battery of structural invariants.
"""

from __future__ import annotations

import argparse
import multiprocessing
import os
import random
import sys
from dataclasses import dataclass, field

from .adversary import STRATEGY_NAMES, WAKE_POLICIES, make_strategy, wake_schedule
from .exploration import ExplorationSequence, build_sequence, save_sequence, x_n
from .gathering import GatheringAgent
from .portgraph import FAMILY_KINDS, GraphFamily, PortGraph, generate
from .simcore import AgentSpec, Engine, Trace
from .simgather import SimGatheringAgent


class ParseError(ValueError):
    pass


class InvalidScenario(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("invalid scenario: " + "; ".join(violations))
        self.violations = violations


# -- bounds ----------------------------------------------------------------

def theorem1_bound(x_n: int, f: int, lambda_good: int) -> int:
    """Round bound for the non-simultaneous variant."""
    if x_n < 0 or f < 0 or lambda_good < 1:
        raise ValueError("bound arguments out of range")
    return x_n + 3 * (2 * (lambda_good.bit_length() - 1) + f + 7) * (3 * x_n + 1)


def theorem2_bound(x_n: int, f: int, lambda_all: int) -> int:
    """Round bound for the simultaneous variant."""
    if x_n < 0 or f < 0 or lambda_all < 1:
        raise ValueError("bound arguments out of range")
    return 3 * x_n + 3 * (2 * (lambda_all.bit_length() - 1) + f + 7) * (3 * x_n + 1) + 1


def strict_team_size(f: int) -> int:
    return 4 * f * f + 9 * f + 4


def hypothesis_team_size(f: int) -> int:
    return (4 * f + 4) * (f + 1)


# -- scenario configuration --------------------------------------------------

@dataclass
class ScenarioConfig:
    scenario_id: str
    variant: str                      # "NS" or "SIM"
    family: str
    n: int
    graph_seed: int
    N: int
    ids: tuple[int, ...]
    byzantine_ids: tuple[int, ...]
    strategy: str
    wake_policy: str
    seed: int
    exploration_seed: int = 0
    round_cap: int | None = None
    team_rule: str = "strict"         # "strict" or "hypothesis"

    @property
    def k(self) -> int:
        return len(self.ids)

    @property
    def f(self) -> int:
        return len(self.byzantine_ids)

    @property
    def good_ids(self) -> tuple[int, ...]:
        byz = set(self.byzantine_ids)
        return tuple(sorted(a for a in self.ids if a not in byz))

    @property
    def lambda_good(self) -> int:
        return max(self.good_ids)

    @property
    def lambda_all(self) -> int:
        return max(self.ids)

    def violations(self) -> list[str]:
        out = []
        if self.variant not in ("NS", "SIM"):
            out.append(f"unknown variant {self.variant!r}")
        if self.family not in FAMILY_KINDS:
            out.append(f"unknown graph family {self.family!r}")
        if self.n < 1:
            out.append("n must be >= 1")
        if self.family == "ring" and self.n < 3:
            out.append("ring needs n >= 3")
        if self.n > self.N:
            out.append(f"n={self.n} exceeds the walk bound N={self.N}")
        if len(set(self.ids)) != len(self.ids):
            out.append("agent ids must be distinct")
        if any(a < 1 for a in self.ids):
            out.append("agent ids must be positive integers")
        if not set(self.byzantine_ids) <= set(self.ids):
            out.append("byzantine_ids must be a subset of ids")
        if self.team_rule not in ("strict", "hypothesis"):
            out.append(f"unknown team_rule {self.team_rule!r}")
        else:
            need = strict_team_size(self.f) if self.team_rule == "strict" else hypothesis_team_size(self.f)
            if self.k < need:
                out.append(f"k={self.k} below the required team size {need} for f={self.f}")
        if self.f > 0 and self.strategy not in STRATEGY_NAMES:
            out.append(f"unknown Byzantine strategy {self.strategy!r}")
        if self.wake_policy not in WAKE_POLICIES:
            out.append(f"unknown wake policy {self.wake_policy!r}")
        if self.round_cap is not None and self.round_cap < 1:
            out.append("round_cap must be positive")
        if len(self.ids) == len(self.byzantine_ids):
            out.append("at least one good agent is required")
        return out

    def validated(self) -> "ScenarioConfig":
        bad = self.violations()
        if bad:
            raise InvalidScenario(bad)
        return self


def default_agent_ids(k: int, f: int, seed: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Deterministic id assignment: distinct ids in [1, 64].

    Byzantine ids straddle the good range: ids below the good minimum
    exercise the hunt-the-impostor path, ids above the good maximum
    exercise the trusted-maximum vote.  For f=1 the side alternates with
    the seed.
    """
    if not 0 <= f < k:
        raise InvalidScenario([f"need 0 <= f < k, got f={f}, k={k}"])
    if f == 0:
        lows, highs = [], []
    elif f == 1:
        lows, highs = ([1], []) if seed % 2 == 0 else ([], [63])
    else:
        n_low = (f + 1) // 2
        lows = list(range(1, n_low + 1))
        highs = [64 - i for i in range(f - n_low)]
    n_good = k - f
    lo = len(lows) + 2
    hi = lo + max(n_good + 6, 16)
    if highs and hi > min(highs):
        raise InvalidScenario([f"cannot place {n_good} good ids between the byzantine ids"])
    rng = random.Random(f"ids:{seed}")
    good = rng.sample(range(lo, hi), n_good)
    ids = tuple(sorted(good + lows + highs))
    return ids, tuple(sorted(lows + highs))


# -- scenario files -----------------------------------------------------------

_LIST_KEYS = {"ids", "byzantine_ids"}
_INT_KEYS = {"n", "graph_seed", "N", "seed", "exploration_seed", "round_cap", "k", "f"}


def parse_scenario_text(text: str) -> ScenarioConfig:
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key in _LIST_KEYS:
                raw[key] = tuple(int(tok) for tok in value.replace(",", " ").split()) if value else ()
            elif key in _INT_KEYS:
                raw[key] = int(value)
            else:
                raw[key] = value
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad value for {key}: {value!r}") from exc

    seed = int(raw.get("seed", 0))
    if "ids" in raw:
        ids = tuple(raw["ids"])
        byz = tuple(raw.get("byzantine_ids", ()))
    elif "k" in raw:
        ids, byz = default_agent_ids(int(raw["k"]), int(raw.get("f", 0)), seed)
    else:
        raise ParseError("scenario needs either 'ids' or 'k' (optionally with 'f')")
    try:
        n = int(raw["n"])
        family = str(raw["family"])
    except KeyError as exc:
        raise ParseError(f"missing required field {exc.args[0]!r}") from exc
    cfg = ScenarioConfig(
        scenario_id=str(raw.get("scenario_id", "scenario")),
        variant=str(raw.get("variant", "NS")),
        family=family,
        n=n,
        graph_seed=int(raw.get("graph_seed", seed % 3)),
        N=int(raw.get("N", n)),
        ids=ids,
        byzantine_ids=byz,
        strategy=str(raw.get("strategy", "crash")),
        wake_policy=str(raw.get("wake_policy", "all_at_once")),
        seed=seed,
        exploration_seed=int(raw.get("exploration_seed", 0)),
        round_cap=int(raw["round_cap"]) if "round_cap" in raw else None,
        team_rule=str(raw.get("team_rule", "strict")),
    )
    return cfg.validated()


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_text(fh.read())


# -- benchmark graphs and certified sequences --------------------------------

BENCHMARK_SEEDS = (0, 1, 2)

_BENCH_CACHE: dict[int, list[tuple[GraphFamily, PortGraph]]] = {}
_SEQ_CACHE: dict[tuple, ExplorationSequence] = {}


def benchmark_families(N: int) -> list[GraphFamily]:
    fams: list[GraphFamily] = []
    if N == 1:
        return [GraphFamily("path", 1, 0)]
    if N == 2:
        kinds = ("path", "complete", "random-tree", "random-connected")
        return [GraphFamily(kind, 2, s) for kind in kinds for s in BENCHMARK_SEEDS]
    for n in range(3, N + 1):
        for kind in FAMILY_KINDS:
            for s in BENCHMARK_SEEDS:
                fams.append(GraphFamily(kind, n, s))
    return fams


def benchmark_graphs(N: int) -> list[tuple[GraphFamily, PortGraph]]:
    """Registered corpus for bound N, deduplicated by labeled-graph identity."""
    cached = _BENCH_CACHE.get(N)
    if cached is None:
        seen = set()
        cached = []
        for fam in benchmark_families(N):
            g = generate(fam)
            fp = g.fingerprint()
            if fp not in seen:
                seen.add(fp)
                cached.append((fam, g))
        _BENCH_CACHE[N] = cached
    return cached


def certified_sequence(N: int, seed: int, extra_graphs: tuple[PortGraph, ...] = ()) -> ExplorationSequence:
    registered = benchmark_graphs(N)
    fps = {g.fingerprint() for _, g in registered}
    extras = tuple(g for g in extra_graphs if g.fingerprint() not in fps)
    key = (N, seed, tuple(g.fingerprint() for g in extras))
    seq = _SEQ_CACHE.get(key)
    if seq is None:
        seq = build_sequence(N, seed, [g for _, g in registered] + list(extras))
        _SEQ_CACHE[key] = seq
    return seq


# -- running one scenario -----------------------------------------------------

def run_scenario(config: ScenarioConfig) -> tuple["Verdict", Trace]:
    config.validated()
    graph = generate(GraphFamily(config.family, config.n, config.graph_seed))
    seq = certified_sequence(config.N, config.exploration_seed, (graph,))
    X = seq.length
    P = 3 * X + 1
    byz = set(config.byzantine_ids)
    schedule = wake_schedule(config.wake_policy, list(config.ids), byz, config.seed, X)
    rng = random.Random(f"place:{config.seed}")
    specs = []
    for aid in sorted(config.ids):
        start = rng.randrange(graph.node_count)
        if aid in byz:
            stepper = make_strategy(config.strategy, aid, config.seed, config.f,
                                    variant=config.variant, seq=seq, x_n=X, p_n=P)
        else:
            cls = SimGatheringAgent if config.variant == "SIM" else GatheringAgent
            stepper = cls(aid, seq)
        specs.append(AgentSpec(aid, aid in byz, stepper, start, schedule[aid]))
    cap = config.round_cap or 4 * theorem2_bound(X, config.f, config.lambda_all)
    engine = Engine(graph, specs, cap, scenario_id=config.scenario_id,
                    variant=config.variant, x_n=X, p_n=P)
    trace = engine.run()
    return check(trace, config), trace


# -- verdicts -----------------------------------------------------------------

@dataclass
class Verdict:
    scenario_id: str
    variant: str
    n: int
    N: int
    k: int
    f: int
    strategy: str
    wake_policy: str
    x_n: int
    gathered: bool
    same_node: bool
    same_round: bool | None
    capped: bool
    first_wake: int | None
    last_termination: int | None
    measured_rounds: int | None
    bound: int
    bound_satisfied: bool
    lemma_checks: dict[str, bool] = field(default_factory=dict)
    notes: tuple[str, ...] = ()
    metrics: dict[str, object] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        if not (self.gathered and self.same_node and self.bound_satisfied):
            return False
        if self.variant == "SIM" and self.same_round is not True:
            return False
        return all(self.lemma_checks.values())

    def csv_row(self) -> str:
        rounds = self.measured_rounds if self.measured_rounds is not None else -1
        return (f"{self.scenario_id},{self.variant},{self.n},{self.N},{self.k},{self.f},"
                f"{self.strategy},{self.wake_policy},{self.x_n},{rounds},{self.bound},"
                f"{'pass' if self.ok else 'FAIL'}")


CSV_HEADER = "scenario_id,variant,n,N,k,f,strategy,wake_policy,x_n,rounds,bound,pass"


def check(trace: Trace, config: ScenarioConfig) -> Verdict:
    """Evaluate one trace against the gathering contract, bound, and invariants."""
    good = trace.good_ids
    f = config.f
    X, P = trace.x_n, trace.p_n

    term = {aid: rn for aid, (rn, _) in trace.termination.items() if aid in good}
    all_term = set(term) == set(good)
    final_nodes = {trace.termination[aid][1] for aid in term}
    same_node = all_term and len(final_nodes) == 1
    gathered = all_term and same_node
    same_round: bool | None = None
    if config.variant == "SIM":
        same_round = all_term and len(set(term.values())) == 1

    first_wake = trace.first_good_wake()
    last_term = max(term.values()) if all_term else None
    measured = (last_term - first_wake) if (all_term and first_wake is not None) else None
    if config.variant == "NS":
        bound = theorem1_bound(X, f, config.lambda_good)
    else:
        bound = theorem2_bound(X, f, config.lambda_all)
    bound_satisfied = bool(gathered and measured is not None and measured <= bound)

    end_ci = {}
    for r, aid, payload in trace.events_of("end_ci"):
        end_ci[aid] = (r, payload[0], payload[1])
    roles = {aid: payload for _, aid, payload in trace.events_of("mgst_role")}
    bl_adds = [(r, aid, payload) for r, aid, payload in trace.events_of("bl_add")]
    gid_sets = [(r, aid, payload) for r, aid, payload in trace.events_of("gid_set")]
    idm_events = [(r, aid, payload) for r, aid, payload in trace.events_of("idm")]

    good_set = set(good)
    checks: dict[str, bool] = {}

    # Meeting completeness: every finished id list holds every good id.
    checks["collect_all_good_ids"] = all(good_set <= il for _, il, _ in end_ci.values())

    # Fault estimate: at least f, and consistent with the team size.
    checks["estf_at_least_f"] = all(
        estf >= f and (4 * estf + 4) * (estf + 1) <= config.k
        for _, _, estf in end_ci.values()
    )

    estfs = [estf for _, _, estf in end_ci.values()]
    checks["estf_spread_at_most_1"] = (max(estfs) - min(estfs) <= 1) if estfs else True
    efm = max(estfs) if estfs else f

    a_min = min(good)
    target_roles = [aid for aid, sta in roles.items() if sta == "S_MG_TA"]
    ok_min = roles.get(a_min, "S_MG_TA") == "S_MG_TA"
    checks["smallest_good_is_target"] = ok_min and len(target_roles) <= efm + 1

    checks["blacklists_stay_good_free"] = all(tar not in good_set for _, _, tar in bl_adds)

    checks["group_formation_agreement"] = _check_group_agreement(trace, gid_sets)

    checks["group_within_f_plus_1_phases"] = _check_group_deadline(
        trace, end_ci, gid_sets, f, P)

    wakes = [trace.wake_round[aid] for aid in good if aid in trace.wake_round]
    checks["wake_spread_within_x"] = (max(wakes) - min(wakes) <= X) if wakes else True

    if config.variant == "SIM":
        true_max = max(config.ids)
        checks["trusted_max_id_bounded"] = all(v <= true_max for _, _, v in idm_events)

    notes = [f"team_rule={config.team_rule}"]
    if trace.capped:
        notes.append("RoundCapExceeded")
    if measured is not None:
        notes.append(f"slack={bound - measured}")

    first_gid = min((r for r, _, _ in gid_sets), default=None)
    per_agent_bl: dict[int, int] = {}
    for _, aid, _ in bl_adds:
        per_agent_bl[aid] = per_agent_bl.get(aid, 0) + 1
    if first_gid is not None and end_ci:
        last_collect = max(r for r, _, _ in end_ci.values())
        hunt_phases = max(0, -(-(first_gid - last_collect) // (3 * P)))
    else:
        hunt_phases = None
    metrics = {
        "group_round": first_gid,
        "mgst_phases_to_group": hunt_phases,
        "bl_insertions": len(bl_adds),
        "bl_max_per_agent": max(per_agent_bl.values(), default=0),
        "max_idm": max((v for _, _, v in idm_events), default=None),
        "wake_spread": (max(wakes) - min(wakes)) if wakes else None,
    }

    return Verdict(
        scenario_id=config.scenario_id, variant=config.variant, n=config.n,
        N=config.N, k=config.k, f=f, strategy=config.strategy,
        wake_policy=config.wake_policy, x_n=X, gathered=gathered,
        same_node=same_node, same_round=same_round, capped=trace.capped,
        first_wake=first_wake, last_termination=last_term,
        measured_rounds=measured, bound=bound, bound_satisfied=bound_satisfied,
        lemma_checks=checks, notes=tuple(notes), metrics=metrics,
    )


def _check_group_agreement(trace: Trace, gid_sets) -> bool:
    """Simultaneous setters on one node must agree, with a real quorum present."""
    by_site: dict[tuple[int, int], list] = {}
    for r, aid, (gid, gef, _members) in gid_sets:
        node = trace.node_at(aid, r)
        by_site.setdefault((r, node), []).append((gid, gef))
    agent_ids = trace.agent_ids
    for (r, node), entries in by_site.items():
        if len({e for e in entries}) != 1:
            return False
        gef = entries[0][1]
        occupancy = sum(1 for aid in agent_ids if trace.node_at(aid, r) == node)
        if occupancy < 4 * gef + 4:
            return False
    return True


def _check_group_deadline(trace: Trace, end_ci, gid_sets, f: int, P: int) -> bool:
    """A group must exist before the last finisher ends its (f+1)-th hunt phase."""
    if not end_ci:
        return True
    last_end = max((r, aid) for aid, (r, _, _) in end_ci.items())
    deadline = last_end[0] + 3 * P * (f + 1)
    first_gid = min((r for r, _, _ in gid_sets), default=None)
    if first_gid is not None:
        return first_gid <= deadline
    return trace.rounds < deadline


# -- suites -------------------------------------------------------------------

def _suite_worker(config: ScenarioConfig) -> Verdict:
    return run_scenario(config)[0]


@dataclass
class SuiteResult:
    verdicts: list[Verdict]

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts)

    def failures(self) -> list[Verdict]:
        return [v for v in self.verdicts if not v.ok]

    def csv(self) -> str:
        lines = [CSV_HEADER]
        lines.extend(v.csv_row() for v in self.verdicts)
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        total = len(self.verdicts)
        bad = self.failures()
        lines = [f"{total - len(bad)}/{total} scenarios passed"]
        for v in bad[:20]:
            why = []
            if not v.gathered:
                why.append("not gathered")
            if v.gathered and not v.bound_satisfied:
                why.append(f"rounds {v.measured_rounds} > bound {v.bound}")
            if v.variant == "SIM" and v.same_round is False:
                why.append("termination rounds differ")
            why.extend(name for name, okc in v.lemma_checks.items() if not okc)
            lines.append(f"  FAIL {v.scenario_id}: {', '.join(why)}")
        if len(bad) > 20:
            lines.append(f"  ... and {len(bad) - 20} more failures")
        return "\n".join(lines)


def run_suite(configs: list[ScenarioConfig], workers: int | None = None) -> SuiteResult:
    """Run a scenario matrix; results are sorted, so reports are order-stable."""
    for cfg in configs:
        cfg.validated()
    if workers is None:
        workers = min(os.cpu_count() or 1, len(configs)) or 1
    if workers > 1 and len(configs) > 1:
        with multiprocessing.Pool(workers) as pool:
            verdicts = list(pool.imap_unordered(_suite_worker, configs, chunksize=4))
    else:
        verdicts = [_suite_worker(cfg) for cfg in configs]
    verdicts.sort(key=lambda v: v.scenario_id)
    return SuiteResult(verdicts)


# -- default matrices ---------------------------------------------------------

MATRIX_N = 5
MATRIX_SEEDS = (0, 1, 2)
MATRIX_F = (0, 1, 2)


def acceptance_matrix(variant: str) -> list[ScenarioConfig]:
    """Family x fault-count x team-size x strategy x wake-policy x seed grid.

    Every graph seed used here is one of the registered benchmark seeds,
    so one certified sequence per N covers the whole grid.  With f=0 all
    strategies coincide, so that axis collapses to a single entry.
    """
    configs = []
    n = MATRIX_N
    for family in FAMILY_KINDS:
        for f in MATRIX_F:
            # Both team sizes coincide at f=0; the strict label wins the collision.
            k_rules = {hypothesis_team_size(f): "hypothesis", strict_team_size(f): "strict"}
            for k, rule in sorted(k_rules.items(), reverse=True):
                strategies = STRATEGY_NAMES if f else ("crash",)
                for strategy in strategies:
                    for wake_policy in WAKE_POLICIES:
                        for seed in MATRIX_SEEDS:
                            ids, byz = default_agent_ids(k, f, seed)
                            sid = (f"{variant}-{family}-n{n}-f{f}-k{k:02d}-"
                                   f"{strategy}-{wake_policy}-s{seed}")
                            configs.append(ScenarioConfig(
                                scenario_id=sid, variant=variant, family=family,
                                n=n, graph_seed=seed % 3, N=n, ids=ids,
                                byzantine_ids=byz, strategy=strategy,
                                wake_policy=wake_policy, seed=seed,
                                team_rule=rule,
                            ))
    return configs


def baseline_matrix() -> list[ScenarioConfig]:
    """f=0, k=4 honest runs over the full benchmark corpus at n in 3..10."""
    configs = []
    seen_graphs = set()
    for n in range(3, 11):
        for family in FAMILY_KINDS:
            for seed in BENCHMARK_SEEDS:
                g = generate(GraphFamily(family, n, seed))
                fp = g.fingerprint()
                if fp in seen_graphs:
                    continue
                seen_graphs.add(fp)
                ids, byz = default_agent_ids(4, 0, seed)
                sid = f"NS-{family}-n{n}-f0-k04-baseline-all_at_once-s{seed}"
                configs.append(ScenarioConfig(
                    scenario_id=sid, variant="NS", family=family, n=n,
                    graph_seed=seed, N=n, ids=ids, byzantine_ids=byz,
                    strategy="crash", wake_policy="all_at_once", seed=seed,
                ))
    return configs


def parse_matrix_text(text: str) -> list[ScenarioConfig]:
    """Cross-product matrix file: list-valued keys expand combinatorially."""
    raw: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        raw[key.strip()] = [tok.strip() for tok in value.split(",") if tok.strip()]

    def one(key: str, default: str | None = None) -> str:
        vals = raw.get(key)
        if not vals:
            if default is None:
                raise ParseError(f"matrix needs field {key!r}")
            return default
        if len(vals) != 1:
            raise ParseError(f"matrix field {key!r} must be single-valued")
        return vals[0]

    variant = one("variant", "NS")
    n = int(one("n", str(MATRIX_N)))
    N = int(one("N", str(n)))
    families = raw.get("families", list(FAMILY_KINDS))
    fs = [int(v) for v in raw.get("f", ["0"])]
    rules = raw.get("k_rules", ["strict"])
    strategies = raw.get("strategies", ["crash"])
    policies = raw.get("wake_policies", ["all_at_once"])
    seeds = [int(v) for v in raw.get("seeds", ["0"])]
    configs = []
    for family in families:
        for f in fs:
            for rule in rules:
                k = strict_team_size(f) if rule == "strict" else hypothesis_team_size(f)
                for strategy in (strategies if f else strategies[:1]):
                    for policy in policies:
                        for seed in seeds:
                            ids, byz = default_agent_ids(k, f, seed)
                            sid = f"{variant}-{family}-n{n}-f{f}-k{k:02d}-{strategy}-{policy}-s{seed}"
                            configs.append(ScenarioConfig(
                                scenario_id=sid, variant=variant, family=family,
                                n=n, graph_seed=seed % 3, N=N, ids=ids,
                                byzantine_ids=byz, strategy=strategy,
                                wake_policy=policy, seed=seed, team_rule=rule,
                            ))
    return configs


# -- trace export and replay ---------------------------------------------------

_CFG_FIELDS = ("scenario_id", "variant", "family", "n", "graph_seed", "N",
               "strategy", "wake_policy", "seed", "exploration_seed", "team_rule")


def export_trace_text(trace: Trace, config: ScenarioConfig) -> str:
    lines = []
    for name in _CFG_FIELDS:
        lines.append(f"#cfg {name} = {getattr(config, name)}")
    lines.append(f"#cfg ids = {' '.join(map(str, config.ids))}")
    lines.append(f"#cfg byzantine_ids = {' '.join(map(str, config.byzantine_ids))}")
    if config.round_cap is not None:
        lines.append(f"#cfg round_cap = {config.round_cap}")
    lines.extend(trace.export_lines())
    return "\n".join(lines) + "\n"


def config_from_trace_text(text: str) -> ScenarioConfig:
    kv = {}
    for line in text.splitlines():
        if not line.startswith("#cfg "):
            continue
        key, _, value = line[5:].partition("=")
        kv[key.strip()] = value.strip()
    if not kv:
        raise ParseError("trace file carries no embedded scenario")
    return ScenarioConfig(
        scenario_id=kv["scenario_id"], variant=kv["variant"], family=kv["family"],
        n=int(kv["n"]), graph_seed=int(kv["graph_seed"]), N=int(kv["N"]),
        ids=tuple(int(t) for t in kv["ids"].split()) if kv["ids"] else (),
        byzantine_ids=tuple(int(t) for t in kv["byzantine_ids"].split()) if kv["byzantine_ids"] else (),
        strategy=kv["strategy"], wake_policy=kv["wake_policy"], seed=int(kv["seed"]),
        exploration_seed=int(kv.get("exploration_seed", "0")),
        round_cap=int(kv["round_cap"]) if "round_cap" in kv else None,
        team_rule=kv.get("team_rule", "strict"),
    ).validated()


def replay_trace_file(path: str) -> tuple[bool, str]:
    with open(path, "r", encoding="utf-8") as fh:
        original = fh.read()
    config = config_from_trace_text(original)
    _, trace = run_scenario(config)
    fresh = export_trace_text(trace, config)
    if fresh == original:
        return True, f"replay of {config.scenario_id} is byte-identical"
    return False, f"replay of {config.scenario_id} DIVERGED"


# -- CLI ------------------------------------------------------------------------

def _cmd_run(args) -> int:
    config = load_scenario(args.scenario)
    if args.cap:
        config.round_cap = args.cap
    verdict, trace = run_scenario(config)
    print(f"{config.scenario_id}: {'PASS' if verdict.ok else 'FAIL'}")
    print(f"  gathered={verdict.gathered} same_node={verdict.same_node}"
          + (f" same_round={verdict.same_round}" if config.variant == "SIM" else ""))
    print(f"  rounds={verdict.measured_rounds} bound={verdict.bound} x_n={verdict.x_n}")
    for name, okc in sorted(verdict.lemma_checks.items()):
        print(f"  {name}: {'pass' if okc else 'FAIL'}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out = os.path.join(args.out, f"{config.scenario_id}.trace")
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(export_trace_text(trace, config))
        print(f"  trace written to {out}")
    if args.csv:
        print(CSV_HEADER)
        print(verdict.csv_row())
    return 0 if verdict.ok else 1


def _cmd_suite(args) -> int:
    name = args.matrix
    if name == "acceptance-ns":
        configs = acceptance_matrix("NS")
    elif name == "acceptance-sim":
        configs = acceptance_matrix("SIM")
    elif name == "baseline-f0":
        configs = baseline_matrix()
    else:
        with open(name, "r", encoding="utf-8") as fh:
            configs = parse_matrix_text(fh.read())
    if args.cap:
        for cfg in configs:
            cfg.round_cap = args.cap
    result = run_suite(configs, workers=args.workers)
    print(result.summary())
    if args.csv or args.out:
        outdir = args.out or "."
        os.makedirs(outdir, exist_ok=True)
        path = os.path.join(outdir, "suite.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(result.csv())
        print(f"csv written to {path}")
    return 0 if result.ok else 1


def _cmd_certify(args) -> int:
    seq = certified_sequence(args.n, args.seed)
    print(f"certified sequence for N={args.n}, seed={args.seed}: X_N={x_n(seq)}")
    if args.out:
        save_sequence(seq, args.out)
        print(f"cached to {args.out}")
    return 0


def _cmd_replay(args) -> int:
    ok, message = replay_trace_file(args.trace)
    print(message)
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="byzgather",
        description="Simulate and verify Byzantine-tolerant mobile-agent gathering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario file and check it")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None, help="directory for the trace export")
    p_run.add_argument("--cap", type=int, default=None, help="round cap override")
    p_run.add_argument("--csv", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_suite = sub.add_parser("suite", help="run a scenario matrix")
    p_suite.add_argument("matrix",
                         help="matrix file, or acceptance-ns | acceptance-sim | baseline-f0")
    p_suite.add_argument("--out", default=None)
    p_suite.add_argument("--cap", type=int, default=None)
    p_suite.add_argument("--csv", action="store_true")
    p_suite.add_argument("--workers", type=int, default=None)
    p_suite.set_defaults(fn=_cmd_suite)

    p_cert = sub.add_parser("certify", help="build and certify an exploration sequence")
    p_cert.add_argument("--n", type=int, required=True, dest="n")
    p_cert.add_argument("--seed", type=int, default=0)
    p_cert.add_argument("--out", default=None)
    p_cert.set_defaults(fn=_cmd_certify)

    p_replay = sub.add_parser("replay", help="re-run an exported trace and compare")
    p_replay.add_argument("trace")
    p_replay.set_defaults(fn=_cmd_replay)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
