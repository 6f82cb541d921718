import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from prunesched.machines import MachineState, Scenario
from prunesched.pet import PetMatrix
from prunesched.pmf import Pmf
from prunesched.pruner import (
    PrunerState,
    adjusted_drop_threshold,
    drop_pass,
    should_defer,
    update_oversubscription,
)
from prunesched.workload import Task, TaskState


class TestOversubscriptionLevel:
    def test_full_weight_forgets_history(self):
        s = PrunerState(ewma_weight=1.0, level=7.3)
        update_oversubscription(s, 3)
        assert s.level == 3.0

    def test_ewma_step(self):
        s = PrunerState(ewma_weight=0.9, level=2.0)
        update_oversubscription(s, 0)
        assert s.level == pytest.approx(0.2)

    def test_schmitt_trace(self):
        # weight 1 makes the level track the input exactly
        s = PrunerState(ewma_weight=1.0, trigger_on=1.0, trigger_off=0.8)
        update_oversubscription(s, 2)  # 2.0: crosses on-threshold
        assert s.dropping_engaged
        update_oversubscription(s, 0.9)  # inside the gap: stays engaged
        assert s.dropping_engaged
        update_oversubscription(s, 0.8)  # hits off-threshold
        assert not s.dropping_engaged
        update_oversubscription(s, 0.9)  # inside the gap: stays off
        assert not s.dropping_engaged
        update_oversubscription(s, 1.0)  # on-threshold is inclusive
        assert s.dropping_engaged

    def test_negative_missed_rejected(self):
        with pytest.raises(ValueError):
            update_oversubscription(PrunerState(), -1)

    @given(st.lists(st.floats(0.81, 0.99), min_size=1, max_size=200))
    def test_no_toggle_strictly_inside_gap(self, levels):
        s = PrunerState(ewma_weight=1.0, trigger_on=1.0, trigger_off=0.8)
        engaged0 = s.dropping_engaged
        for lv in levels:
            update_oversubscription(s, lv)  # weight 1: level == lv
            assert s.dropping_engaged == engaged0


class TestAdjustedThreshold:
    def test_zero_skew_is_base(self):
        s = PrunerState()
        for pos in range(5):
            assert adjusted_drop_threshold(s, 0.0, pos) == s.base_drop_threshold

    def test_negative_skew_head(self):
        s = PrunerState(position_scale=0.1)
        assert adjusted_drop_threshold(s, -1.0, 0) == pytest.approx(0.60)

    def test_positive_skew_second_position(self):
        s = PrunerState(position_scale=0.1)
        assert adjusted_drop_threshold(s, 1.0, 1) == pytest.approx(0.45)

    def test_zero_scale_is_always_base(self):
        s = PrunerState(position_scale=0.0)
        for skew in (-1.0, -0.3, 0.4, 1.0):
            for pos in range(4):
                assert adjusted_drop_threshold(s, skew, pos) == s.base_drop_threshold

    @given(st.floats(-1.0, 1.0), st.integers(0, 10))
    def test_adjustment_strongest_at_head(self, skew, pos):
        s = PrunerState(position_scale=0.1)
        head = abs(adjusted_drop_threshold(s, skew, 0) - s.base_drop_threshold)
        here = abs(adjusted_drop_threshold(s, skew, pos) - s.base_drop_threshold)
        assert here <= head + 1e-12


class TestShouldDefer:
    def test_above_threshold_maps(self):
        assert not should_defer(0.95, 0.90)

    def test_boundary_maps(self):
        assert not should_defer(0.90, 0.90)

    def test_below_threshold_defers(self):
        assert should_defer(0.10, 0.90)


def _point_pet(times_grid):
    """PET of point masses: times_grid[type][machine]."""
    entries = tuple(
        tuple(Pmf.from_dict({t: 1.0}) for t in row) for row in times_grid
    )
    means = np.array([[float(t) for t in row] for row in times_grid])
    return PetMatrix(entries=entries, mean_table=means, rng_seed=0)


class TestDropPass:
    def test_hopeless_head_dropped_successor_gains(self):
        pet = _point_pet([[5]])
        m = MachineState(0)
        dead = Task(0, 0, arrival=0, deadline=2)  # cannot finish by 2
        alive = Task(1, 0, arrival=0, deadline=20)
        m.queue = [dead, alive]
        m.exec_start = 0
        state = PrunerState(dropping_engaged=True)
        chain_before = m.chain_pcts(pet, Scenario.EVICT, now=0)
        rob_alive_before = chain_before[1].success.mass_at_or_before(20)
        dropped = drop_pass([m], pet, state, now=0, scenario=Scenario.EVICT)
        assert dropped == [0]
        assert dead.state is TaskState.DROPPED
        chain_after = m.chain_pcts(pet, Scenario.EVICT, now=0)
        assert chain_after[0].success.mass_at_or_before(20) >= rob_alive_before

    def test_nothing_dropped_when_all_robust(self):
        pet = _point_pet([[2]])
        m = MachineState(0)
        m.queue = [Task(i, 0, arrival=0, deadline=100 + i) for i in range(3)]
        m.exec_start = 0
        state = PrunerState(dropping_engaged=True)
        assert drop_pass([m], pet, state, now=0) == []
        assert len(m.queue) == 3

    def test_boundary_robustness_is_dropped(self):
        # success probability exactly at the threshold: still removed
        pet = PetMatrix(
            entries=((Pmf.from_dict({1: 0.5, 9: 0.5}),),),
            mean_table=np.array([[5.0]]),
            rng_seed=0,
        )
        m = MachineState(0)
        m.queue = [Task(0, 0, arrival=0, deadline=5)]
        m.exec_start = 0
        state = PrunerState(dropping_engaged=True, base_drop_threshold=0.5,
                            position_scale=0.0)
        assert drop_pass([m], pet, state, now=0) == [0]

    def test_pending_regime_spares_executing_head(self):
        pet = _point_pet([[5]])
        m = MachineState(0)
        doomed = Task(0, 0, arrival=0, deadline=2)
        m.queue = [doomed]
        m.exec_start = 0
        state = PrunerState(dropping_engaged=True)
        assert drop_pass([m], pet, state, now=0, scenario=Scenario.PENDING) == []
        assert doomed.state is not TaskState.DROPPED

    def test_drop_never_hurts_downstream(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            times = [[int(rng.integers(1, 9))] for _ in range(3)]
            pet = _point_pet(times)
            m = MachineState(0)
            m.queue = [
                Task(i, i, arrival=0, deadline=int(rng.integers(2, 25)))
                for i in range(3)
            ]
            m.exec_start = 0
            before = {
                t.id: pct.success.mass_at_or_before(t.deadline)
                for t, pct in zip(m.queue, m.chain_pcts(pet, Scenario.EVICT, 0))
            }
            drop_pass([m], pet, PrunerState(dropping_engaged=True), now=0)
            after = {
                t.id: pct.success.mass_at_or_before(t.deadline)
                for t, pct in zip(m.queue, m.chain_pcts(pet, Scenario.EVICT, 0))
            }
            for tid, rob in after.items():
                assert rob >= before[tid] - 1e-12
