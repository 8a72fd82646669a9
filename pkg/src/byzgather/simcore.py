"""Synchronous round engine: wake-up, observation, transition, movement.

Each round proceeds in lockstep: dormant agents wake (by schedule, or one
round after an active agent shares their start node), every active agent
reads an observation of its node as of the end of the previous round,
all transitions run, and all moves apply simultaneously.  Two agents
crossing one edge in opposite directions never observe each other.

The engine is protocol-agnostic: good agents are driven by stepper
objects fed only observations, Byzantine agents by strategy objects fed
the full world state.  Presented states are paired with engine-held true
ids, so a faulty agent can forge every field except its identity.
"""

from __future__ import annotations

from bisect import bisect_right, insort
from typing import Iterable, NamedTuple

from .portgraph import PortGraph

DORMANT, ACTIVE, TERMINATED = 0, 1, 2

STA_CI = "S_CI"
STA_MG_SA = "S_MG_SA"
STA_MG_TA = "S_MG_TA"
STA_G_EG = "S_G_EG"
STA_G_WG = "S_G_WG"


class _Terminate:
    __slots__ = ()

    def __repr__(self) -> str:
        return "TERMINATE"


#: Action sentinel: the agent halts on its node with its final state.
TERMINATE = _Terminate()


class PresentedState(NamedTuple):
    """What one agent shows the agents sharing its node.

    Byzantine agents may fabricate any of these fields; the true id is
    attached by the engine and is not part of the presented tuple.
    """

    sta: str
    end_ci: bool
    in_mgst: bool
    estf: int | None
    tar: int | None
    gid: int | None
    il: frozenset[int]
    flag_t: bool
    terminated: bool


def initial_presented(agent_id: int) -> PresentedState:
    return PresentedState(STA_CI, False, False, None, None, None, frozenset((agent_id,)), False, False)


class ViewEntry(NamedTuple):
    id: int
    presented: PresentedState


class ObservationView:
    """Shared per-node observation: degree plus all co-located agents.

    ``entries`` lists every visible agent on the node (observer included,
    terminated agents included, dormant agents not yet visible), sorted
    by true id.  ``ids`` is the set of true ids.  ``version`` changes
    whenever the node's composition or any occupant's presented state
    changes; steppers may use it to skip idempotent re-reads.  The entry
    port is per-agent and passed to steppers separately.
    """

    __slots__ = ("degree", "entries", "ids", "version", "memo")

    def __init__(self, degree: int, entries: tuple[ViewEntry, ...], ids: frozenset[int], version: int):
        self.degree = degree
        self.entries = entries
        self.ids = ids
        self.version = version
        self.memo: dict = {}  # scratch for derived values shared by co-located observers


class AgentSpec(NamedTuple):
    agent_id: int
    is_byzantine: bool
    stepper: object
    start_node: int
    wake_round: int | None  # None: woken only by visits


class Trace:
    """Deterministic record of one run: wakes, moves, events, terminations."""

    def __init__(self, scenario_id: str, variant: str, x_n: int, p_n: int,
                 graph: PortGraph, good_ids: frozenset[int], byz_ids: frozenset[int]):
        self.scenario_id = scenario_id
        self.variant = variant
        self.x_n = x_n
        self.p_n = p_n
        self.graph = graph
        self.good_ids = good_ids
        self.byz_ids = byz_ids
        self.wake_round: dict[int, int] = {}
        self.position_log: dict[int, list[tuple[int, int]]] = {}
        self.termination: dict[int, tuple[int, int]] = {}
        self.events: list[tuple[int, int, str, object]] = []
        self.rounds = 0
        self.capped = False

    @property
    def agent_ids(self) -> list[int]:
        return sorted(self.good_ids | self.byz_ids)

    def first_good_wake(self) -> int | None:
        rounds = [r for aid, r in self.wake_round.items() if aid in self.good_ids]
        return min(rounds) if rounds else None

    def last_good_termination(self) -> int | None:
        rounds = [rn for aid, (rn, _) in self.termination.items() if aid in self.good_ids]
        return max(rounds) if len(rounds) == len(self.good_ids) else None

    def node_at(self, agent_id: int, round_no: int) -> int | None:
        """Node occupied at the start of ``round_no``; None while dormant."""
        log = self.position_log.get(agent_id)
        if not log or round_no < log[0][0]:
            return None
        i = bisect_right(log, (round_no, self.graph.node_count)) - 1
        return log[i][1]

    def events_of(self, kind: str) -> list[tuple[int, int, object]]:
        return [(r, aid, payload) for r, aid, k, payload in self.events if k == kind]

    def export_lines(self) -> Iterable[str]:
        """Debug export, one "round,agent,node,status,stage" line per pair.

        Node indices appear only here, never in observations.
        """
        end_ci_round = {aid: r for r, aid, k, _ in self.events if k == "end_ci"}
        sim_round = {aid: r for r, aid, k, _ in self.events if k == "sim_mode"}
        yield f"# scenario {self.scenario_id} variant {self.variant} x_n {self.x_n} rounds {self.rounds}"
        for r in range(1, self.rounds + 1):
            for aid in self.agent_ids:
                wake = self.wake_round.get(aid)
                if wake is None or r < wake:
                    yield f"{r},{aid},-,dormant,-"
                    continue
                node = self.node_at(aid, r)
                term = self.termination.get(aid)
                if term is not None and r > term[0]:
                    yield f"{r},{aid},{node},terminated,done"
                    continue
                yield f"{r},{aid},{node},active,{self._stage(aid, r, wake, end_ci_round, sim_round)}"

    def _stage(self, aid: int, r: int, wake: int, end_ci_round: dict, sim_round: dict) -> str:
        if aid in self.byz_ids:
            return "byz"
        if aid in sim_round and r >= sim_round[aid]:
            return "simterm"
        count = r - wake + 1
        if count <= self.x_n:
            return "explo"
        q = (count - self.x_n - 1) // self.p_n
        slot = q % 3
        if slot == 0:
            done = aid in end_ci_round and r > end_ci_round[aid]
            return "mgst" if done else "cist"
        return "gst1" if slot == 1 else "gst2"


class WorldView:
    """Full-knowledge facade handed to Byzantine strategies."""

    def __init__(self, engine: "Engine"):
        self._e = engine

    @property
    def round(self) -> int:
        return self._e.round

    @property
    def graph(self) -> PortGraph:
        return self._e.graph

    @property
    def x_n(self) -> int:
        return self._e.trace.x_n

    @property
    def p_n(self) -> int:
        return self._e.trace.p_n

    def ids(self) -> list[int]:
        return list(self._e.ids)

    def good_ids(self) -> list[int]:
        e = self._e
        return [aid for i, aid in enumerate(e.ids) if not e.is_byz[i]]

    def status(self, agent_id: int) -> int:
        e = self._e
        return e.status[e.index_of[agent_id]]

    def position(self, agent_id: int) -> int:
        e = self._e
        return e.pos[e.index_of[agent_id]]

    def stepper(self, agent_id: int):
        e = self._e
        return e.steppers[e.index_of[agent_id]]

    def presented(self, agent_id: int) -> PresentedState:
        e = self._e
        return e.presented[e.index_of[agent_id]]

    def degree(self, node: int) -> int:
        return self._e.graph.degree(node)

    def view_of(self, agent_id: int):
        """(ObservationView, entry_port) exactly as a good agent would see."""
        e = self._e
        idx = e.index_of[agent_id]
        return e.node_view(e.pos[idx]), e.entry[idx]


class Engine:
    """Runs one scenario round-by-round, producing a deterministic Trace."""

    def __init__(self, graph: PortGraph, specs: list[AgentSpec], round_cap: int,
                 scenario_id: str = "adhoc", variant: str = "NS",
                 x_n: int = 0, p_n: int = 1):
        specs = sorted(specs, key=lambda s: s.agent_id)
        ids = [s.agent_id for s in specs]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        self.graph = graph
        self.round_cap = round_cap
        self.ids = ids
        self.index_of = {aid: i for i, aid in enumerate(ids)}
        self.is_byz = [s.is_byzantine for s in specs]
        self.steppers = [s.stepper for s in specs]
        self.pos = [s.start_node for s in specs]
        self.schedule = [s.wake_round for s in specs]
        self.status = [DORMANT] * len(specs)
        self.entry: list[int | None] = [None] * len(specs)
        self.presented: list[PresentedState | None] = [None] * len(specs)
        self.occupants: list[list[int]] = [[] for _ in range(graph.node_count)]
        # Versions are drawn from one clock so a version value never repeats
        # across nodes; steppers rely on that to skip unchanged views.
        self._vclock = 0
        self.node_version = [0] * graph.node_count
        self._view_cache: list[ObservationView | None] = [None] * graph.node_count
        self.round = 0
        good = frozenset(aid for aid, b in zip(ids, self.is_byz) if not b)
        byz = frozenset(aid for aid, b in zip(ids, self.is_byz) if b)
        self.trace = Trace(scenario_id, variant, x_n, p_n, graph, good, byz)
        self.world = WorldView(self)
        self._active: list[int] = []
        self._dormant = list(range(len(specs)))
        self._good_left = len(good)

    def node_view(self, node: int) -> ObservationView:
        ver = self.node_version[node]
        cached = self._view_cache[node]
        if cached is not None and cached.version == ver:
            return cached
        occ = self.occupants[node]
        entries = tuple(ViewEntry(self.ids[j], self.presented[j]) for j in occ)
        view = ObservationView(self.graph.degree(node), entries,
                               frozenset(self.ids[j] for j in occ), ver)
        self._view_cache[node] = view
        return view

    def _bump(self, node: int) -> None:
        self._vclock += 1
        self.node_version[node] = self._vclock

    def _activate(self, idx: int, r: int) -> None:
        self.status[idx] = ACTIVE
        aid = self.ids[idx]
        self.trace.wake_round[aid] = r
        self.trace.position_log[aid] = [(r, self.pos[idx])]
        self.presented[idx] = initial_presented(aid)
        insort(self.occupants[self.pos[idx]], idx)
        self._bump(self.pos[idx])
        insort(self._active, idx)
        self._dormant.remove(idx)

    def run(self) -> Trace:
        trace = self.trace
        ids = self.ids
        steppers = self.steppers
        status = self.status
        pos = self.pos
        entry = self.entry
        pending_visit: list[int] = []
        neighbor = self.graph.neighbor
        while True:
            self.round += 1
            r = self.round
            if r > self.round_cap:
                trace.capped = True
                trace.rounds = r - 1
                return trace

            for idx in list(self._dormant):
                if self.schedule[idx] == r:
                    self._activate(idx, r)
            for idx in pending_visit:
                if status[idx] == DORMANT:
                    self._activate(idx, r)
            pending_visit = []

            terminations: list[int] = []
            moves: list[tuple[int, int]] = []
            pres_updates: list[tuple[int, PresentedState]] = []
            for idx in self._active:
                stepper = steppers[idx]
                if self.is_byz[idx]:
                    new_presented, action = stepper.step(self.world, ids[idx])
                    if new_presented is not None:
                        pres_updates.append((idx, new_presented))
                    if action is TERMINATE:
                        action = None
                else:
                    action = stepper.step(self.node_view(pos[idx]), entry[idx])
                    ev = stepper.events
                    if ev:
                        aid = ids[idx]
                        for kind, payload in ev:
                            trace.events.append((r, aid, kind, payload))
                        ev.clear()
                    if stepper.presented_dirty:
                        stepper.presented_dirty = False
                        pres_updates.append((idx, stepper.build_presented()))
                if action is None:
                    entry[idx] = None
                elif action is TERMINATE:
                    terminations.append(idx)
                    entry[idx] = None
                else:
                    moves.append((idx, action))

            for idx in terminations:
                status[idx] = TERMINATED
                self._active.remove(idx)
                aid = ids[idx]
                trace.termination[aid] = (r, pos[idx])
                if not self.is_byz[idx]:
                    self._good_left -= 1
                stepper = steppers[idx]
                stepper.terminated = True
                pres_updates.append((idx, stepper.build_presented()))

            for idx, port in moves:
                old = pos[idx]
                u, q = neighbor(old, port)
                self.occupants[old].remove(idx)
                insort(self.occupants[u], idx)
                self._bump(old)
                self._bump(u)
                pos[idx] = u
                entry[idx] = q
                trace.position_log[ids[idx]].append((r + 1, u))

            for idx, p in pres_updates:
                self.presented[idx] = p
                self._bump(pos[idx])

            if self._good_left == 0:
                trace.rounds = r
                return trace

            if self._dormant:
                for idx in self._dormant:
                    for j in self.occupants[pos[idx]]:
                        if status[j] == ACTIVE:
                            pending_visit.append(idx)
                            break


def run(graph: PortGraph, specs: list[AgentSpec], round_cap: int, **meta) -> Trace:
    """Build an engine and run it; the round cap yields a capped trace, not an error."""
    return Engine(graph, specs, round_cap, **meta).run()
