import io

import pytest
from hypothesis import given, settings, strategies as st

from flowsched.core import FlowRequest, Instance, SwitchSpec, response_metrics, validate_schedule
from flowsched.gen import random_instance
from flowsched.mrt import min_feasible_rho
from flowsched.online import (
    ALL_POLICIES,
    BacklogGraph,
    Policy,
    a_mrt_run,
    amrt_capacity_bonus,
    policy_step,
    run_online,
    write_decision_log,
)


def state_with(switch, flows, t):
    st_ = BacklogGraph(switch, round=t)
    st_.add(flows)
    return st_


@pytest.mark.parametrize("policy", ALL_POLICIES)
def test_single_flow_runs_immediately(policy):
    s = state_with(SwitchSpec.uniform(1), [FlowRequest("a", 0, 0)], 0)
    assert policy_step(s, policy) == ["a"] and not s.pending


def test_min_rtime_prefers_longest_wait():
    flows = [FlowRequest("old", 0, 0, release=0), FlowRequest("new", 0, 1, release=2)]
    s = state_with(SwitchSpec.uniform(1, 2), flows, 3)
    assert policy_step(s, Policy.MIN_RTIME) == ["old"]


def test_min_rtime_still_uses_idle_ports():
    # a just-released flow has weight zero but must not be left idle
    s = state_with(SwitchSpec.uniform(1), [FlowRequest("a", 0, 0, release=4)], 4)
    assert policy_step(s, Policy.MIN_RTIME) == ["a"]


def test_max_weight_queue_rule():
    # x sits between queues of size 4 and 2, y between 1 and 2 on the same output
    flows = [FlowRequest("x", 0, 0)] + [FlowRequest(f"q{k}", 0, 1 + k) for k in range(3)]
    flows += [FlowRequest("y", 1, 0)]
    s = state_with(SwitchSpec.uniform(2, 4), flows, 0)
    qi, qo = s.queue_sizes()
    assert qi[0] + qo[0] == 6 and qi[1] + qo[0] == 3


def test_max_weight_heavier_edge_wins_a_shared_port():
    # both flows need output 0 and nothing else is pending
    flows = [FlowRequest("x", 0, 0), FlowRequest("x2", 0, 0), FlowRequest("y", 1, 0)]
    s = state_with(SwitchSpec.uniform(2, 1), flows, 0)
    assert policy_step(s, Policy.MAX_WEIGHT) == ["x"]


@settings(max_examples=40)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=8))
def test_max_weight_is_optimal_for_queue_weights(pairs):
    flows = [FlowRequest(f"e{k}", u, v) for k, (u, v) in enumerate(pairs)]
    s = state_with(SwitchSpec.uniform(3), flows, 0)
    qi, qo = s.queue_sizes()
    w = {f.id: qi[f.src] + qo[f.dst] for f in flows}
    best = 0
    for mask in range(1 << len(flows)):
        pick = [f for k, f in enumerate(flows) if mask >> k & 1]
        if len({f.src for f in pick}) == len(pick) == len({f.dst for f in pick}):
            best = max(best, sum(w[f.id] for f in pick))
    chosen = policy_step(s, Policy.MAX_WEIGHT)
    assert sum(w[i] for i in chosen) == best


def test_capacity_two_lets_two_flows_share_a_port():
    sw = SwitchSpec(1, 2, (2,), (1, 1))
    s = state_with(sw, [FlowRequest("a", 0, 0), FlowRequest("b", 0, 1)], 0)
    assert policy_step(s, Policy.MAX_CARD) == ["a", "b"]


def test_future_flow_rejected():
    with pytest.raises(ValueError):
        state_with(SwitchSpec.uniform(1), [FlowRequest("a", 0, 0, release=3)], 1)


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from(ALL_POLICIES), st.integers(1, 2))
def test_online_runs_are_valid_and_deterministic(seed, policy, cap):
    inst = random_instance(4, 4, 25, horizon=6, seed=seed, max_capacity=cap)
    a, b = run_online(inst, policy), run_online(inst, policy)
    assert a.schedule == b.schedule
    assert validate_schedule(inst, a.schedule).valid
    assert len(a.schedule) == inst.n


def test_decision_log_csv():
    inst = random_instance(2, 2, 5, horizon=3, seed=1)
    run = run_online(inst, Policy.MAX_CARD)
    buf = io.StringIO()
    write_decision_log(run, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "round,policy,flows"
    assert len(lines) == len(run.decisions) + 1
    assert sum(len(line.split(",")[2].split()) for line in lines[1:]) == inst.n


def test_amrt_single_flow():
    inst = Instance(SwitchSpec.uniform(1), [FlowRequest("a", 0, 0, release=3)])
    r = a_mrt_run(inst)
    assert r.rho == 1
    assert response_metrics(inst, r.schedule).maximum <= 2


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.integers(1, 2), st.booleans())
def test_amrt_contract(seed, d, doubling):
    inst = random_instance(3, 3, 18, d_max=d, horizon=8, seed=seed, max_capacity=d + 1)
    r = a_mrt_run(inst, doubling=doubling)
    assert validate_schedule(inst, r.schedule, amrt_capacity_bonus(inst)).valid
    assert r.max_overlap <= 2
    assert response_metrics(inst, r.schedule).maximum <= 2 * r.rho
    assert r.rho_history == sorted(r.rho_history)
    for b in r.batches:
        assert b.overload <= 2 * inst.d_max - 1


def test_amrt_against_offline_optimum():
    # constant moderate load: within twice the offline window bound on the whole trace
    for seed in range(10):
        inst = random_instance(4, 4, 24, horizon=12, seed=seed)
        r = a_mrt_run(inst)
        rho_star = min_feasible_rho(inst)
        assert response_metrics(inst, r.schedule).maximum <= 2 * max(r.rho, rho_star)
        assert r.rho <= max(rho_star, 1) * 2
