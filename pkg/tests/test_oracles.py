import itertools

from hypothesis import given, settings, strategies as st

from flowsched.core import IntegralSchedule, response_metrics, validate_schedule
from flowsched.gen import random_instance
from oracles import min_max_response, min_total_response


def _enumerate(inst):
    H = inst.max_release + inst.n + 1
    ids = [f.id for f in inst.flows]
    for rounds in itertools.product(range(H), repeat=inst.n):
        s = IntegralSchedule(dict(zip(ids, rounds)))
        if validate_schedule(inst, s).valid:
            yield response_metrics(inst, s)


@settings(max_examples=60)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 3), st.integers(1, 2))
def test_pruned_search_matches_plain_enumeration(seed, n, m, cap):
    inst = random_instance(m, m, n, horizon=3, seed=seed, max_capacity=cap)
    reps = list(_enumerate(inst))
    assert min_total_response(inst) == min(r.total for r in reps)
    assert min_max_response(inst) == min(r.maximum for r in reps)
