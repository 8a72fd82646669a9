import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import entry, seq_of, view

from byzgather.gathering import (
    AgentState,
    GatheringAgent,
    TooFewIdsCollected,
    cist_length,
    estimate_f,
    extended_label_bit,
    extended_label_block,
    most_frequent_smallest,
    reliable_gids,
)
from byzgather.simcore import TERMINATE


# -- label and formula units --------------------------------------------------

def test_extended_label_block_examples():
    assert extended_label_block(1) == "1011"
    assert extended_label_block(2) == "101100"


def test_extended_label_bits_of_id_1():
    assert [extended_label_bit(1, x) for x in range(1, 9)] == [1, 0, 1, 1, 1, 0, 1, 1]


def test_extended_label_bit_of_id_2_position_5():
    assert extended_label_bit(2, 5) == 0


def test_extended_labels_of_1_and_2_first_differ_at_5():
    diff = next(x for x in range(1, 20)
                if extended_label_bit(1, x) != extended_label_bit(2, x))
    assert diff == 5
    assert diff <= 2 * 0 + 6


@given(st.integers(min_value=1, max_value=200), st.integers(min_value=1, max_value=200))
def test_distinct_labels_differ_within_the_promised_window(a, b):
    if a == b:
        return
    window = 2 * (min(a, b).bit_length() - 1) + 6
    assert any(extended_label_bit(a, x) != extended_label_bit(b, x)
               for x in range(1, window + 1))


def test_cist_length_examples():
    assert cist_length(1) == 6
    assert cist_length(8) == 12
    assert cist_length(5) == 10


def test_estimate_f_examples():
    assert estimate_f(16) == 1
    assert estimate_f(36) == 2
    assert estimate_f(17) == 1


def test_estimate_f_requires_four_ids():
    with pytest.raises(TooFewIdsCollected):
        estimate_f(3)


def test_estimate_f_against_enumeration_oracle():
    for size in range(4, 300):
        expect = max(y for y in range(size) if (4 * y + 4) * (y + 1) <= size)
        assert estimate_f(size) == expect


def test_reliable_gids_examples():
    assert reliable_gids(set(), 3) == set()
    assert reliable_gids({(5, 1), (5, 2), (5, 3), (9, 4)}, 2) == {5}
    assert reliable_gids({(5, 1)}, 1) == set()  # duplicates collapse in a set


def test_most_frequent_smallest():
    assert most_frequent_smallest([1] * 5 + [2] * 3) == 1
    assert most_frequent_smallest([1] * 4 + [2] * 4) == 1
    assert most_frequent_smallest([7]) == 7


# -- driving the stepper directly ----------------------------------------------

def fresh_agent(agent_id=5, offsets=(2, 0, 1, 0), bound=5):
    return GatheringAgent(agent_id, seq_of(offsets, bound))


def test_first_step_after_wake_is_a_walk_move():
    agent = fresh_agent(offsets=(2, 0, 1, 0))
    action = agent.step(view([entry(5)], degree=5), None)
    assert action == 3  # virtual entry port 1 shifted by the first offset


def test_walk_follows_entry_ports():
    agent = fresh_agent(offsets=(0, 1))
    assert agent.step(view([entry(5)], degree=2), None) == 1
    assert agent.step(view([entry(5)], degree=3), 2) == 3


def test_zero_degree_node_never_moves():
    agent = fresh_agent(offsets=(1, 1))
    assert agent.step(view([entry(5)], degree=0), None) is None


def advance_to_phases(agent):
    # Burn the initial walk so the next step is phase round 1.
    for _ in range(agent.X):
        agent.step(view([entry(agent.state.id)], degree=1), 1)


def test_waiting_collection_phase_records_and_stays():
    agent = fresh_agent(agent_id=5, offsets=(0,) * 4)  # bit 1 of ID* is 1... use x bit
    # id 5 -> block "10" + "11 00 11"; bit 1 = 1 (walk phase), so force a
    # waiting phase by checking a 0 bit instead: bit 2 of every label is 0.
    advance_to_phases(agent)
    agent.state.x = 2
    X, P = agent.X, agent.P
    actions = []
    for rp in range(1, P + 1):
        others = [entry(9), entry(4)] if rp == 2 else []
        actions.append(agent.step(view([entry(5)] + others, degree=3), None))
    assert all(a is None for a in actions)
    assert {9, 4} <= agent.state.il
    assert agent.state.x == 3


def test_exploring_collection_phase_walks_and_records_mid_walk_only():
    agent = fresh_agent(agent_id=5, offsets=(0,) * 4)
    advance_to_phases(agent)
    assert extended_label_bit(5, 1) == 1
    X, P = agent.X, agent.P
    seen_actions = []
    for rp in range(1, P + 1):
        others = [entry(30)] if rp == 1 else ([entry(31)] if rp == X + 1 else [])
        seen_actions.append(agent.step(view([entry(5)] + others, degree=2), 1))
    moves = [a for a in seen_actions if a is not None]
    assert len(moves) == X
    assert 30 not in agent.state.il  # met while waiting in a walking phase
    assert 31 in agent.state.il      # met during the walk


def test_collection_finishes_with_estimate_and_reset():
    agent = fresh_agent(agent_id=1, offsets=(0,))  # shortest schedule: 6 phases
    advance_to_phases(agent)
    others = [entry(i) for i in range(40, 55)]  # 15 peers + self = 16 ids
    rounds = 0
    while not agent.state.end_ci:
        agent.step(view([entry(1)] + others, degree=2), 1)
        rounds += 1
        assert rounds < 20 * agent.P
    assert agent.state.estf == 1  # (4*1+4)*(1+1) = 16 <= 16
    assert agent.state.x == 1
    assert ("end_ci", (frozenset(agent.state.il), 1)) in agent.events


def make_mgst_agent(agent_id, il, estf, offsets=(0, 0, 0, 0)):
    agent = GatheringAgent(agent_id, seq_of(offsets, 5))
    st = agent.state
    st.end_ci = True
    st.estf = estf
    st.il = set(il)
    st.x = 1
    st.count = agent.X  # next step is phase round 1 of the first main phase
    return agent


def test_role_assignment_small_id_becomes_target():
    agent = make_mgst_agent(5, {3, 5, 8, 11, 13, 17, 19, 23}, estf=1)
    agent.step(view([entry(5)], degree=2), None)
    assert agent.state.sta == "S_MG_TA"
    assert agent.state.tar == 5


def test_role_assignment_large_id_becomes_searcher():
    agent = make_mgst_agent(8, {3, 5, 8, 11, 13, 17, 19, 23}, estf=1)
    agent.step(view([entry(8)], degree=2), None)
    assert agent.state.sta == "S_MG_SA"
    assert agent.state.tar == 3  # smallest non-blacklisted id


def test_searcher_blacklists_unfound_target():
    agent = make_mgst_agent(8, {3, 8, 30, 40}, estf=0)
    X, P = agent.X, agent.P
    for _ in range(P):
        agent.step(view([entry(8)], degree=2), 1)
    assert 3 in agent.state.bl
    assert ("bl_add", 3) in agent.events


def test_searcher_stops_with_found_target_and_keeps_it():
    agent = make_mgst_agent(8, {3, 8, 30, 40}, estf=0)
    X, P = agent.X, agent.P
    actions = []
    for rp in range(1, P + 1):
        entries = [entry(8)]
        if rp >= X + 1:
            entries.append(entry(3, sta="S_MG_TA", end_ci=True, in_mgst=True, estf=0, tar=3))
        actions.append(agent.step(view(entries, degree=2), 1))
    assert all(a is None for a in actions)  # found at the first walk round
    assert 3 not in agent.state.bl


def test_watcher_blacklists_target_that_walks_away():
    agent = make_mgst_agent(8, {3, 8, 30, 40}, estf=0)
    X, P = agent.X, agent.P
    for rp in range(1, P + 1):
        entries = [entry(8)]
        if rp == X + 1:  # present at the find, gone the next round
            entries.append(entry(3, sta="S_MG_TA", end_ci=True, in_mgst=True, estf=0, tar=3))
        agent.step(view(entries, degree=2), 1)
    assert 3 in agent.state.bl


def test_watcher_blacklists_target_with_flipped_claim():
    agent = make_mgst_agent(8, {3, 8, 30, 40}, estf=0)
    X, P = agent.X, agent.P
    for rp in range(1, P + 1):
        tar_claim = 3 if rp == X + 1 else 0
        agent.step(view([entry(8), entry(3, sta="S_MG_TA", in_mgst=True, tar=tar_claim)],
                        degree=2), 1)
    assert 3 in agent.state.bl


def consensus_entries(estf_values, tar, target_id):
    out = []
    for i, ef in enumerate(estf_values):
        aid = target_id if i == 0 else 50 + i
        out.append(entry(aid, sta="S_MG_TA" if aid == target_id else "S_MG_SA",
                         end_ci=True, in_mgst=True, estf=ef, tar=tar))
    return out


def test_consensus_votes_most_frequent_estimate():
    agent = make_mgst_agent(3, {3, 8, 30, 40}, estf=1)
    agent.state.sta = "S_MG_TA"
    agent.state.tar = 3
    agent.state.x = 2
    peers = consensus_entries([1] * 5 + [2] * 3, tar=3, target_id=3)
    agent.step(view(peers, degree=2), None)
    assert agent.state.gef == 1
    assert agent.state.gid == 3  # 8 same-target agents reach 4*1+4


def test_consensus_tie_breaks_to_smaller_estimate():
    agent = make_mgst_agent(3, {3, 8, 30, 40}, estf=1)
    agent.state.sta = "S_MG_TA"
    agent.state.tar = 3
    agent.state.x = 2
    peers = consensus_entries([1] * 4 + [2] * 4, tar=3, target_id=3)
    agent.step(view(peers, degree=2), None)
    assert agent.state.gef == 1


def test_consensus_needs_full_quorum():
    agent = make_mgst_agent(3, {3, 8, 30, 40}, estf=1)
    agent.state.sta = "S_MG_TA"
    agent.state.tar = 3
    agent.state.x = 2
    peers = consensus_entries([1] * 7, tar=3, target_id=3)  # |GC| = 7 < 8
    agent.step(view(peers, degree=2), None)
    assert agent.state.gid is None


def test_consensus_needs_the_target_itself():
    agent = make_mgst_agent(3, {3, 8, 30, 40}, estf=1)
    agent.state.sta = "S_MG_SA"
    agent.state.tar = 9  # hunting a ghost: nobody presents tar equal to its own id 9
    peers = consensus_entries([1] * 8, tar=9, target_id=77)
    agent._consensus(view(peers, degree=2))
    assert agent.state.gid is None


def test_consensus_splits_group_by_smallest_ids():
    agent = make_mgst_agent(3, {3, 8, 30, 40}, estf=1)
    agent.state.sta = "S_MG_TA"
    agent.state.tar = 3
    agent.state.x = 2
    peers = consensus_entries([1] * 8, tar=3, target_id=3)
    agent.step(view(peers, degree=2), None)
    # Members are 3 and 51..57; the 2*1+2 = 4 smallest contain id 3.
    assert agent.state.sta == "S_G_EG"
    gid, gef, members = [p for k, p in agent.events if k == "gid_set"][0]
    assert (gid, gef) == (3, 1)
    assert members == (3, 51, 52, 53, 54, 55, 56, 57)


def test_gathering_stage_waits_before_collection_finishes():
    agent = fresh_agent(agent_id=5, offsets=(0,) * 4)
    advance_to_phases(agent)
    agent.state.count += agent.P  # skip the first main phase entirely
    for _ in range(2 * agent.P):
        assert agent.step(view([entry(5)], degree=3), None) is None


def test_gathering_stage_records_group_evidence_while_walking():
    agent = make_mgst_agent(8, {3, 8, 30, 40}, estf=1)
    agent.state.sta = "S_MG_SA"
    agent.state.count += agent.P  # into the first rendezvous phase
    X, P = agent.X, agent.P
    for rp in range(1, P + 1):
        entries = [entry(8)]
        if rp == X + 1:
            entries.append(entry(51, sta="S_G_WG", gid=3))
        if rp == 1:
            entries.append(entry(52, sta="S_G_WG", gid=4))  # met while waiting
        agent.step(view(entries, degree=2), 1)
    assert (3, 51) in agent.state.gl
    assert (4, 52) not in agent.state.gl


def test_second_gathering_phase_terminates_waiting_group_member():
    agent = make_mgst_agent(9, {3, 9, 30, 40}, estf=1)
    st = agent.state
    st.sta = "S_G_WG"
    st.gid = 3
    st.gl = {(3, 51), (3, 52)}
    st.count += 2 * agent.P  # jump to the second rendezvous phase
    actions = [agent.step(view([entry(9)], degree=2), None) for _ in range(agent.P)]
    assert actions[-1] is TERMINATE
    assert all(a is None for a in actions[:-1])


def test_second_gathering_phase_searches_for_smallest_reliable_group():
    agent = make_mgst_agent(9, {3, 9, 30, 40}, estf=1)
    st = agent.state
    st.sta = "S_MG_SA"
    st.gl = {(3, 51), (3, 52), (7, 53), (7, 54)}
    st.count += 2 * agent.P
    X, P = agent.X, agent.P
    actions = []
    for rp in range(1, P + 1):
        entries = [entry(9)]
        if rp >= X + 2:
            entries += [entry(51, sta="S_G_WG", gid=3), entry(52, sta="S_G_WG", gid=3)]
        actions.append(agent.step(view(entries, degree=2), 1))
    assert actions[X] is not None      # still hunting at walk round 1
    assert actions[X + 1] is None      # two vouching members: found, stop
    assert actions[-1] is TERMINATE


def test_second_gathering_phase_ignores_underwitnessed_group():
    agent = make_mgst_agent(9, {3, 9, 30, 40}, estf=1)
    st = agent.state
    st.sta = "S_MG_SA"
    st.gl = {(3, 51)}  # one witness is not enough at estf 1
    st.count += 2 * agent.P
    actions = [agent.step(view([entry(9)], degree=2), 1) for _ in range(agent.P)]
    assert all(a is None for a in actions)  # sat the phase out, no terminate


def test_searcher_target_never_decreases_across_phases():
    agent = make_mgst_agent(8, {3, 5, 8, 30, 40}, estf=1)
    targets = []
    # Three full main+rendezvous blocks with nobody ever found: the hunt
    # target climbs as the blacklist grows, never revisiting a smaller id.
    for _ in range(3):
        for _ in range(agent.P):
            agent.step(view([entry(8)], degree=2), 1)
            if agent.state.sta == "S_MG_SA" and agent.state.tar is not None:
                targets.append(agent.state.tar)
        for _ in range(2 * agent.P):
            agent.step(view([entry(8)], degree=2), 1)
    assert targets == sorted(targets)
    assert agent.state.bl == {3, 5}


def test_main_phase_variables_frozen_during_gathering_phases():
    agent = make_mgst_agent(8, {3, 8, 30, 40}, estf=1)
    agent.state.sta = "S_MG_SA"
    agent.state.count += agent.P
    before = (agent.state.x, set(agent.state.il), set(agent.state.bl), agent.state.tar)
    for _ in range(2 * agent.P):
        agent.step(view([entry(8), entry(2)], degree=2), 1)
    after = (agent.state.x, set(agent.state.il), set(agent.state.bl), agent.state.tar)
    assert before == after
