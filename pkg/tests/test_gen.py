import json

import pytest
from hypothesis import given, settings, strategies as st

from flowsched.core import InstanceError, dumps, instance_to_dict, response_metrics, validate_schedule
from flowsched.gen import (
    RttInstance,
    enumerate_rtt,
    gadget_avg_lower,
    gadget_max_lower,
    load_rtt,
    random_instance,
    random_tcfs,
    rtt_reduce,
    rtt_satisfiable,
)
from flowsched.online import ALL_POLICIES, Policy, run_online
from oracles import min_total_response, schedulable_within


def test_random_empty_and_deterministic():
    assert random_instance(3, 3, 0).n == 0
    a = random_instance(4, 5, 20, d_max=3, horizon=6, seed=9, max_capacity=3)
    b = random_instance(4, 5, 20, d_max=3, horizon=6, seed=9, max_capacity=3)
    assert dumps(instance_to_dict(a)) == dumps(instance_to_dict(b))
    assert dumps(instance_to_dict(a)) != dumps(instance_to_dict(random_instance(4, 5, 20, 3, 6, 10, 3)))


@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4))
def test_random_demands_within_kappa(seed, d, cap):
    inst = random_instance(3, 4, 15, d_max=d, horizon=5, seed=seed, max_capacity=cap)
    for f in inst.flows:
        assert 1 <= f.demand <= min(d, inst.kappa(f))
        assert 0 <= f.release < 5


def test_random_tcfs_shape():
    inst = random_tcfs(3, 10, 2, 5, seed=3)
    for f in inst.flows:
        assert f.active and set(f.active) <= set(range(5)) and f.release == min(f.active)
        assert f.demand <= inst.d_max <= min(inst.switch.capacity(p) for p in f.ports)


@pytest.mark.parametrize("policy", ALL_POLICIES)
@pytest.mark.parametrize("T", [1, 2, 3])
def test_avg_adversary_traces_are_valid(policy, T):
    run = run_online(gadget_avg_lower(T, 4 * T), policy)
    inst = run.instance
    assert inst.n == 2 * T + 3 * T
    assert validate_schedule(inst, run.schedule).valid
    late = [f for f in inst.flows if f.release >= T]
    assert len({f.dst for f in late}) == 1 and all(f.src == 1 for f in late)


def test_avg_adversary_rejects_short_tail():
    with pytest.raises(ValueError):
        gadget_avg_lower(3, 11)


def test_avg_adversary_small_trace_against_opt():
    # T=2, M=8: 2T solid flows plus one flow per round in [T, M)
    for policy in ALL_POLICIES:
        run = run_online(gadget_avg_lower(2, 8), policy)
        inst = run.instance
        assert inst.n == 10
        opt = min_total_response(inst)
        assert opt == 14
        assert response_metrics(inst, run.schedule).total >= opt


@pytest.mark.parametrize("policy", ALL_POLICIES)
def test_max_adversary_trace(policy):
    run = run_online(gadget_max_lower(), policy)
    inst = run.instance
    assert inst.n == 6 and inst.switch.m == 3 and inst.switch.m_prime == 4
    assert validate_schedule(inst, run.schedule).valid
    # round-1 flows from input 2 hit the outputs input 0 and input 1 still owe
    late = sorted(f.dst for f in inst.flows if f.release == 1)
    assert len(set(late)) == 2


def test_rtt_validation():
    with pytest.raises(InstanceError):
        RttInstance(((1,),), ((0,),), 1)
    with pytest.raises(InstanceError):
        RttInstance(((1, 2),), ((0,),), 2)
    with pytest.raises(InstanceError):
        RttInstance(((1, 4),), ((0, 1),), 2)
    with pytest.raises(InstanceError):
        RttInstance(((1, 2),), ((0, 5),), 2)
    with pytest.raises(InstanceError):
        RttInstance.from_dict({"T": [[1, 2]]})


def test_rtt_json_round_trip(tmp_path):
    rtt = RttInstance(((1, 2), (1, 2, 3)), ((0, 1), (0, 1, 2)), 3)
    path = tmp_path / "rtt.json"
    path.write_text(json.dumps(rtt.to_dict()))
    assert load_rtt(path) == rtt
    assert RttInstance.from_dict({"T": [[1, 2]], "g": [[0, 1]]}).m_prime == 2


@pytest.mark.parametrize("T,expected_gadgets", [((1, 2), 1), ((1, 3), 1), ((2, 3), 0), ((1, 2, 3), 0)])
def test_rtt_port_counts(T, expected_gadgets):
    rtt = RttInstance((T,), (tuple(range(len(T))),), 3)
    inst, rho = rtt_reduce(rtt)
    assert rho == 3
    assert inst.switch.m == 1 + 3 * 3 + 3 * expected_gadgets
    assert inst.switch.m_prime == 3 + expected_gadgets
    assert inst.n == len(T) + 3 * 3 + 4 * expected_gadgets


def test_rtt_satisfiable_example():
    rtt = RttInstance(((1, 2),), ((0, 1),), 2)
    assert rtt_satisfiable(rtt)
    inst, rho = rtt_reduce(rtt)
    assert schedulable_within(inst, rho) is not None


def test_rtt_unsatisfiable_example():
    # three teachers share classes 0 and 1 but only hours 1 and 2 exist for two of them
    rtt = RttInstance(((1, 2), (1, 2), (1, 2)), ((0, 1), (0, 1), (0, 1)), 2)
    assert not rtt_satisfiable(rtt)
    inst, rho = rtt_reduce(rtt)
    assert schedulable_within(inst, rho) is None


def test_rtt_reduction_exhaustive_small():
    for rtt in enumerate_rtt(2, 3):
        inst, rho = rtt_reduce(rtt)
        assert rtt_satisfiable(rtt) == (schedulable_within(inst, rho) is not None), rtt


@settings(max_examples=60)
@given(st.data())
def test_rtt_reduction_random_three_teachers(data):
    hours = st.sampled_from([(1, 2), (1, 3), (2, 3), (1, 2, 3)])
    T = tuple(data.draw(hours) for _ in range(3))
    g = tuple(tuple(sorted(data.draw(st.sets(st.integers(0, 2), min_size=len(h), max_size=len(h))))) for h in T)
    rtt = RttInstance(T, g, 3)
    inst, rho = rtt_reduce(rtt)
    assert rtt_satisfiable(rtt) == (schedulable_within(inst, rho) is not None)
