import json

import pytest
from hypothesis import given, strategies as st

from flowsched.core import (
    INPUT,
    OUTPUT,
    FlowRequest,
    Instance,
    InstanceError,
    IntegralSchedule,
    PortId,
    SwitchSpec,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    max_overload,
    response_metrics,
    save_instance,
    schedule_from_dict,
    schedule_to_dict,
    validate_schedule,
)
from flowsched.gen import random_instance
from flowsched.mrt import fifo_schedule

ONE = SwitchSpec.uniform(1)


def two_flows():
    return Instance(ONE, [FlowRequest("a", 0, 0), FlowRequest("b", 0, 0)])


def test_single_flow_valid():
    inst = Instance(ONE, [FlowRequest("a", 0, 0)])
    assert validate_schedule(inst, IntegralSchedule({"a": 0})).valid


def test_capacity_violation_names_port_and_round():
    v = validate_schedule(two_flows(), IntegralSchedule({"a": 0, "b": 0}))
    assert not v.valid
    assert any("in0 round 0" in s for s in v.violations)


def test_bonus_absorbs_overload():
    assert validate_schedule(two_flows(), IntegralSchedule({"a": 0, "b": 0}), 1).valid


def test_callable_bonus():
    inst = Instance(SwitchSpec(1, 1, (2,), (1,)), [FlowRequest("a", 0, 0), FlowRequest("b", 0, 0)])
    sched = IntegralSchedule({"a": 0, "b": 0})
    assert not validate_schedule(inst, sched).valid
    assert validate_schedule(inst, sched, lambda p: 1 if p.side == OUTPUT else 0).valid


def test_release_and_active_checked():
    inst = Instance(ONE, [FlowRequest("a", 0, 0, release=2, active=(3, 5))])
    assert not validate_schedule(inst, IntegralSchedule({"a": 1})).valid
    assert not validate_schedule(inst, IntegralSchedule({"a": 4})).valid
    assert validate_schedule(inst, IntegralSchedule({"a": 5})).valid


def test_unknown_and_negative_rounds_raise():
    inst = Instance(ONE, [FlowRequest("a", 0, 0)])
    with pytest.raises(InstanceError):
        validate_schedule(inst, IntegralSchedule({"a": 0, "zz": 1}))
    with pytest.raises(InstanceError):
        validate_schedule(inst, IntegralSchedule({"a": -1}))
    with pytest.raises(InstanceError):
        validate_schedule(inst, IntegralSchedule({}))


def test_response_examples():
    inst = Instance(ONE, [FlowRequest("a", 0, 0)])
    assert response_metrics(inst, IntegralSchedule({"a": 0})).response["a"] == 1
    inst = Instance(ONE, [FlowRequest("a", 0, 0, release=2)])
    assert response_metrics(inst, IntegralSchedule({"a": 4})).response["a"] == 3
    rep = response_metrics(two_flows(), IntegralSchedule({"a": 0, "b": 1}))
    assert (rep.total, rep.average, rep.maximum) == (3, 1.5, 2)


def test_negative_response_is_an_error():
    inst = Instance(ONE, [FlowRequest("a", 0, 0, release=3)])
    with pytest.raises(InstanceError):
        response_metrics(inst, IntegralSchedule({"a": 1}))


@pytest.mark.parametrize("bad", [
    lambda: FlowRequest("a", 0, 0, demand=0),
    lambda: FlowRequest("a", 0, 0, release=-1),
    lambda: FlowRequest("a", 0, 0, release=2, active=(1,)),
    lambda: FlowRequest("a", 0, 0, active=()),
    lambda: Instance(ONE, [FlowRequest("a", 0, 0), FlowRequest("a", 0, 0)]),
    lambda: Instance(ONE, [FlowRequest("a", 1, 0)]),
    lambda: Instance(ONE, [FlowRequest("a", 0, 0, demand=2)]),
    lambda: SwitchSpec(1, 1, (0,), (1,)),
    lambda: PortId("sideways", 0),
])
def test_invalid_inputs_rejected(bad):
    with pytest.raises(InstanceError):
        bad()


def test_json_round_trip(tmp_path):
    inst = Instance(SwitchSpec(2, 3, (1, 2), (2, 1, 1)), [
        FlowRequest("x", 1, 0, 2, 3), FlowRequest("y", 0, 2, 1, 0, active=(0, 4)),
    ])
    path = tmp_path / "i.json"
    save_instance(inst, path)
    data = json.loads(path.read_text())
    assert set(data) == {"m", "m_prime", "capacities_in", "capacities_out", "flows"}
    assert "active" not in data["flows"][0] and data["flows"][1]["active"] == [0, 4]
    assert load_instance(path) == inst
    sched = IntegralSchedule({"x": 3, "y": 4})
    assert schedule_from_dict(json.loads(json.dumps(schedule_to_dict(sched)))) == sched


def test_malformed_json_raises():
    with pytest.raises(InstanceError):
        instance_from_dict({"m": 1})
    with pytest.raises(InstanceError):
        schedule_from_dict({"assignments": [{"id": "a"}]})


@given(st.integers(0, 10_000), st.integers(0, 3))
def test_bonus_monotone_and_response_floor(seed, k):
    inst = random_instance(3, 3, 8, d_max=2, horizon=4, seed=seed, max_capacity=2)
    sched = fifo_schedule(inst)
    assert validate_schedule(inst, sched).valid
    assert validate_schedule(inst, sched, k).valid
    rep = response_metrics(inst, sched)
    assert all(r >= 1 for r in rep.response.values())
    assert max_overload(inst, sched) == 0


@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_metrics_invariant_under_reordering(seed, rnd):
    inst = random_instance(3, 2, 7, horizon=5, seed=seed)
    sched = fifo_schedule(inst)
    flows = list(inst.flows)
    rnd.shuffle(flows)
    a = response_metrics(inst, sched)
    b = response_metrics(inst.with_flows(flows), sched)
    assert (a.total, a.maximum, a.response) == (b.total, b.maximum, b.response)


def test_port_helpers():
    s = SwitchSpec(2, 1, (3, 1), (2,))
    assert s.capacity(PortId(INPUT, 0)) == 3 and s.capacity(PortId(OUTPUT, 0)) == 2
    assert len(s.ports()) == 3
    inst = Instance(s, [FlowRequest("a", 0, 0, 2, 1), FlowRequest("b", 1, 0)])
    assert inst.kappa(inst.flow("a")) == 2
    assert [f.id for f in inst.flows_at(PortId(OUTPUT, 0))] == ["a", "b"]
    assert inst.d_max == 2 and inst.max_release == 1
    assert inst.default_horizon() == 1 + 1 + 1 + 1
