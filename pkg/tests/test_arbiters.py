import itertools

import pytest
from hypothesis import given, strategies as st

from nocqos.arbiters import (BranchView, EpochArbiterState, FixedWeightState, TdmaWheel,
                             epoch_advance, epoch_pick, fixed_priority_pick, fixed_weight_pick,
                             leveled_epoch_pick, round_robin_pick, tdma_pick)
from nocqos.fabric import insert_marker
from nocqos.model import ConfigurationError, QosLevel

ORDER = ["CPU", "MPEG", "VID", "GEN"]


def views(pending, ids=ORDER, marked=()):
    return [BranchView(b, b in pending, b in marked and b in pending) for b in ids]


# -- fixed priority ---------------------------------------------------------

def test_fixed_priority_picks_highest_pending():
    assert fixed_priority_pick(views({"CPU", "VID"}), ORDER) == "CPU"
    assert fixed_priority_pick(views(set()), ORDER) is None
    assert fixed_priority_pick(views({"GEN"}), list(reversed(ORDER))) == "GEN"


def test_fixed_priority_unknown_branch_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        fixed_priority_pick(views({"X"}, ids=["X"]), ORDER)


@given(st.lists(st.sets(st.sampled_from(ORDER[1:])), max_size=200))
def test_fixed_priority_starves_lower_branches_under_saturation(pending_seq):
    # CPU always pending: no other branch is ever granted
    for others in pending_seq:
        assert fixed_priority_pick(views(others | {"CPU"}), ORDER) == "CPU"


# -- round robin --------------------------------------------------------------

def test_round_robin_examples():
    ids = [0, 1, 2, 3]
    assert round_robin_pick(views(set(ids), ids), 1) == (2, 2)
    assert round_robin_pick(views({0}, ids), 0) == (0, 0)
    # no grant leaves the state alone
    assert round_robin_pick(views(set(), ids), 3) == (None, 3)


@pytest.mark.parametrize("k", [1, 5, 25])
def test_round_robin_serves_each_in_turn(k):
    ids = [0, 1, 2, 3]
    last, counts = None, dict.fromkeys(ids, 0)
    for _ in range(4 * k):
        w, last = round_robin_pick(views(set(ids), ids), last)
        counts[w] += 1
    assert set(counts.values()) == {k}


@given(st.integers(2, 6), st.integers(1, 400), st.integers(0, 5))
def test_round_robin_window_fairness(k, window, start):
    ids = list(range(k))
    last = start % k
    counts = dict.fromkeys(ids, 0)
    for _ in range(window):
        w, last = round_robin_pick(views(set(ids), ids), last)
        counts[w] += 1
    assert max(counts.values()) - min(counts.values()) <= 1


# -- TDMA ---------------------------------------------------------------------

WHEEL = ("MPEG", "CPU", "MPEG", "VID", "MPEG", "CPU", "MPEG", "GEN")


def test_tdma_slot_owner_wins():
    winner, wheel = tdma_pick(views({"MPEG"}), TdmaWheel(WHEEL, 0))
    assert winner == "MPEG" and wheel.index == 1


def test_tdma_idle_slot_is_wasted():
    winner, wheel = tdma_pick(views({"CPU", "VID", "GEN"}), TdmaWheel(WHEEL, 0))
    assert winner is None and wheel.index == 1


def test_tdma_empty_pending_still_turns():
    winner, wheel = tdma_pick(views(set()), TdmaWheel(WHEEL, 7))
    assert winner is None and wheel.index == 0


@pytest.mark.parametrize("revolutions", [1, 3, 40])
def test_tdma_exact_shares_under_saturation(revolutions):
    wheel = TdmaWheel(WHEEL, 0)
    counts = dict.fromkeys(ORDER, 0)
    for _ in range(revolutions * len(WHEEL)):
        w, wheel = tdma_pick(views(set(ORDER)), wheel)
        counts[w] += 1
    assert counts == {"MPEG": 4 * revolutions, "CPU": 2 * revolutions,
                      "VID": revolutions, "GEN": revolutions}


# -- fixed weight -------------------------------------------------------------

def _brute_force_weighted(weights, cycles):
    """Independent restatement of the rule: serve the holder while it has
    budget, else rotate to the next pending branch in id order."""
    ids = sorted(weights)
    holder, budget, counts = None, 0, dict.fromkeys(ids, 0)
    for _ in range(cycles):
        if holder is not None and budget > 0:
            counts[holder] += 1
            budget -= 1
            continue
        start = 0 if holder is None else ids.index(holder) + 1
        holder = ids[start % len(ids)]
        budget = weights[holder] - 1
        counts[holder] += 1
    return counts


def test_fixed_weight_long_run_ratio_matches_brute_force():
    weights = {"A": 3, "B": 1}
    state = FixedWeightState(weights)
    counts = {"A": 0, "B": 0}
    for _ in range(1000):
        w, state = fixed_weight_pick(views({"A", "B"}, ["A", "B"]), state)
        counts[w] += 1
    assert counts == _brute_force_weighted(weights, 1000)
    assert counts["A"] / counts["B"] == pytest.approx(3.0, rel=0.01)


def test_fixed_weight_sole_contender_rotates_back_to_itself():
    state = FixedWeightState({"A": 2, "B": 5}, grants_remaining=0, current_holder="A")
    w, state = fixed_weight_pick(views({"A"}, ["A", "B"]), state)
    assert w == "A" and state.grants_remaining == 1


@given(st.lists(st.sets(st.integers(0, 3)), min_size=1, max_size=300), st.integers(0, 3))
def test_unit_weights_behave_like_round_robin(pending_seq, first):
    ids = [0, 1, 2, 3]
    fw = FixedWeightState(dict.fromkeys(ids, 1), 0, first)
    rr_last = first
    for pending in pending_seq:
        v = views(pending, ids)
        w_fw, fw = fixed_weight_pick(v, fw)
        w_rr, rr_last = round_robin_pick(v, rr_last)
        assert w_fw == w_rr


# -- epoch / LRS ----------------------------------------------------------------

def test_least_recently_served_breaks_ties():
    state = EpochArbiterState(0, frozenset(), ("B", "A"))
    winner, state = epoch_pick(views({"A", "B"}, ["A", "B"]), state)
    assert winner == "B" and state.lrs_order == ("A", "B")


def test_advance_when_others_are_empty():
    state = EpochArbiterState.initial(["A", "B"])
    new = epoch_advance(views({"A"}, ["A", "B"], marked={"A"}), state)
    assert new.current_epoch == 1 and "A" in new.admitted


def test_no_advance_while_a_branch_is_inside_the_epoch():
    state = EpochArbiterState.initial(["A", "B"])
    assert epoch_advance(views({"A", "B"}, ["A", "B"], marked={"A"}), state) == state


def test_advance_with_zero_branches_is_a_no_op():
    state = EpochArbiterState.initial([])
    assert epoch_advance([], state) == state


def test_marked_head_cannot_win_while_epoch_open():
    state = EpochArbiterState(0, frozenset(), ("A", "B"))
    winner, state = epoch_pick(views({"A", "B"}, ["A", "B"], marked={"A"}), state)
    assert winner == "B"
    assert "A" in state.closed


def test_lone_branch_always_wins():
    state = EpochArbiterState.initial(["A"])
    for seq in range(50):
        marked = {"A"} if insert_marker(seq, 3) else set()
        winner, state = epoch_pick(views({"A"}, ["A"], marked=marked), state)
        assert winner == "A"
        state = epoch_advance(views({"A"}, ["A"]), state)


def run_greedy_epochs(sizes, grants):
    """Greedy branches with boundary markers; returns grant counts and the
    per-epoch grant tallies seen between successive advances."""
    ids = sorted(sizes)
    seq = dict.fromkeys(ids, 0)
    state = EpochArbiterState.initial(ids)
    counts = dict.fromkeys(ids, 0)
    epochs, current = [], dict.fromkeys(ids, 0)
    for _ in range(grants):
        v = [BranchView(b, True, insert_marker(seq[b], sizes[b])) for b in ids]
        before = state.current_epoch
        winner, state = epoch_pick(v, state)
        if state.current_epoch != before:
            epochs.append(current)
            current = dict.fromkeys(ids, 0)
        counts[winner] += 1
        current[winner] += 1
        seq[winner] += 1
        v = [BranchView(b, True, insert_marker(seq[b], sizes[b])) for b in ids]
        before = state.current_epoch
        state = epoch_advance(v, state)
        if state.current_epoch != before:
            epochs.append(current)
            current = dict.fromkeys(ids, 0)
    return counts, epochs


def test_two_to_one_epochs_give_two_to_one_grants():
    counts, epochs = run_greedy_epochs({"A": 2, "B": 1}, 3000)
    assert counts == {"A": 2000, "B": 1000}
    assert all(e == {"A": 2, "B": 1} for e in epochs)


@given(st.dictionaries(st.sampled_from("ABCD"), st.sampled_from([1, 2, 3, 5, 8]),
                       min_size=2, max_size=4))
def test_each_global_epoch_holds_one_local_epoch_per_greedy_branch(sizes):
    _, epochs = run_greedy_epochs(sizes, 400)
    assert epochs, "greedy branches must drive epochs forward"
    for e in epochs:
        assert e == sizes


@given(st.lists(st.tuples(st.sets(st.sampled_from("ABC")), st.sets(st.sampled_from("ABC"))),
                max_size=100))
def test_current_epoch_never_decreases(steps):
    state = EpochArbiterState.initial("ABC")
    for pending, marked in steps:
        v = views(pending, list("ABC"), marked)
        before = state.current_epoch
        _, state = epoch_pick(v, state)
        state = epoch_advance(v, state)
        assert state.current_epoch >= before


@given(st.lists(st.tuples(st.sets(st.sampled_from("ABC")), st.sets(st.sampled_from("ABC"))),
                min_size=1, max_size=30))
def test_picks_are_pure(steps):
    state = EpochArbiterState.initial("ABC")
    for pending, marked in steps:
        v = views(pending, list("ABC"), marked)
        first = epoch_pick(v, state)
        assert epoch_pick(v, state) == first
        state = first[1]


# -- level-aware pick -----------------------------------------------------------

def _lv(bid, level, pending=True, marked=False):
    return BranchView(bid, pending, marked, level)


def _states(ids):
    return {lvl: EpochArbiterState.initial(ids) for lvl in QosLevel}


def test_higher_level_wins_regardless_of_lrs():
    ids = ["CPU", "MPEG"]
    v = [_lv("CPU", QosLevel.PRIORITY), _lv("MPEG", QosLevel.BANDWIDTH)]
    states = _states(ids)
    states[QosLevel.PRIORITY] = EpochArbiterState(0, frozenset(), ("MPEG", "CPU"))
    winner, _ = leveled_epoch_pick(v, states)
    assert winner == "CPU"


def test_same_level_uses_lrs():
    ids = ["GEN", "MPEG"]
    v = [_lv("GEN", QosLevel.BEST_EFFORT), _lv("MPEG", QosLevel.BEST_EFFORT)]
    states = _states(ids)
    states[QosLevel.BEST_EFFORT] = EpochArbiterState(0, frozenset(), ("GEN", "MPEG"))
    winner, _ = leveled_epoch_pick(v, states)
    assert winner == "GEN"


@given(st.lists(st.tuples(st.sampled_from(list(QosLevel)), st.booleans()), min_size=1, max_size=6))
def test_winner_always_sits_at_the_top_pending_level(spec):
    ids = list(range(len(spec)))
    v = [_lv(i, lvl, pending) for i, (lvl, pending) in zip(ids, spec)]
    winner, _ = leveled_epoch_pick(v, _states(ids))
    pending_levels = [lvl for lvl, p in spec if p]
    if not pending_levels:
        assert winner is None
    else:
        assert spec[winner][0] == max(pending_levels)


def test_round_robin_order_is_list_order():
    ids = ["z", "a", "m"]
    last, seen = None, []
    for _ in range(6):
        w, last = round_robin_pick(views(set(ids), ids), last)
        seen.append(w)
    assert seen == list(itertools.islice(itertools.cycle(ids), 6))
