from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from scheduling.adversary import CrashSchedule, ScheduleAdversary
from scheduling.core import Delivered, Message, total_work
from scheduling.exceptions import PackingError, ProtocolViolation
from scheduling.tapebb import (
    LONGJOB,
    Segment,
    epoch_steps,
    pack_longjob,
    pack_nonpreemptive,
    pack_preemptive,
    run_epoch,
)


def segments(plan):
    return [list(column.segments) for column in plan.columns]


def unit_jobs(count):
    return {job: 1 for job in range(1, count + 1)}


class PreemptivePackingTests(SimpleTestCase):

    def test_jobs_that_fit_stay_in_their_column(self):
        plan = pack_preemptive({1: 1, 2: 2, 3: 4}, [1, 2, 3], d=3)
        self.assertEqual(segments(plan), [
            [Segment(1, 1, 1)],
            [Segment(2, 1, 2)],
            [Segment(3, 1, 3)],
        ])
        self.assertEqual(plan.assigned, 6)
        self.assertEqual(plan.rounds, 3)

    def test_truncated_base_job_moves_to_the_top(self):
        plan = pack_preemptive({1: 5, 2: 5}, [1, 2, 3], d=3)
        # k=2 base jobs, neither fits column 1, so they take columns 2 and 3.
        self.assertEqual(segments(plan), [
            [],
            [Segment(1, 1, 2)],
            [Segment(2, 1, 3)],
        ])

    def test_unit_jobs_fill_the_triangle(self):
        plan = pack_preemptive(unit_jobs(6), [1, 2, 3], d=3)
        self.assertEqual([column.load for column in plan.columns], [1, 2, 3])
        self.assertEqual(plan.assigned, plan.capacity)

    def test_fewer_jobs_than_columns_leaves_columns_idle(self):
        plan = pack_preemptive({1: 1}, [1, 2], d=2)
        self.assertEqual(segments(plan), [[Segment(1, 1, 1)], []])
        self.assertEqual(list(plan.slots()), [1])

    def test_segments_resume_where_the_chain_stopped(self):
        plan = pack_preemptive([(7, 3, 2)], [4], d=1, phi=2)
        self.assertEqual(segments(plan), [[Segment(7, 3, 4)]])

    def test_columns_belong_to_the_machines_in_order(self):
        plan = pack_preemptive(unit_jobs(3), [5, 2, 9], d=2)
        self.assertEqual([column.machine for column in plan.columns], [5, 2])
        self.assertIn('column 1: machine=5 capacity=1 slot=1', plan.dump())

    def test_geometry_is_checked(self):
        with self.assertRaises(PackingError):
            pack_preemptive(unit_jobs(3), [1, 2], d=3)
        with self.assertRaises(PackingError):
            pack_preemptive(unit_jobs(3), [1, 2], d=0)
        with self.assertRaises(PackingError):
            pack_preemptive(unit_jobs(3), [1, 2], d=1, phi=0)

    @settings(max_examples=100, deadline=None)
    @given(
        lengths=st.lists(st.integers(min_value=1, max_value=12), max_size=12),
        d=st.integers(min_value=1, max_value=6),
        phi=st.integers(min_value=1, max_value=3),
    )
    def test_packing_respects_capacity_and_chains(self, lengths, d, phi):
        remaining = dict(enumerate(lengths, start=1))
        plan = pack_preemptive(remaining, list(range(1, d + 1)), d, phi)
        self.assertEqual(plan, pack_preemptive(remaining, list(range(1, d + 1)), d, phi))
        placed = {}
        for column in plan.columns:
            self.assertLessEqual(column.load, column.capacity)
            for segment in column.segments:
                self.assertNotIn(segment.job, placed)
                self.assertEqual(segment.first, 1)
                self.assertLessEqual(segment.size, remaining[segment.job])
                placed[segment.job] = segment.size


class NonPreemptivePackingTests(SimpleTestCase):

    def test_whole_jobs_only(self):
        plan = pack_nonpreemptive({1: 1, 2: 3}, [1, 2], d=2, phi=2)
        self.assertEqual(segments(plan), [[Segment(1, 1, 1)], [Segment(2, 1, 3)]])

    def test_job_too_long_for_any_column_is_left_out(self):
        plan = pack_nonpreemptive({1: 5}, [1, 2], d=2, phi=2)
        self.assertEqual(plan.assigned, 0)
        self.assertEqual(plan.slots(), {})

    def test_equal_jobs_give_column_j_exactly_j_jobs(self):
        plan = pack_nonpreemptive({job: 2 for job in range(1, 7)}, [1, 2, 3], d=3, phi=2)
        self.assertEqual([len(column.segments) for column in plan.columns], [1, 2, 3])
        self.assertEqual(plan.assigned, 12)

    @settings(max_examples=100, deadline=None)
    @given(
        lengths=st.lists(st.integers(min_value=1, max_value=8), max_size=12),
        d=st.integers(min_value=1, max_value=5),
        phi=st.integers(min_value=1, max_value=4),
    )
    def test_jobs_are_never_split(self, lengths, d, phi):
        remaining = dict(enumerate(lengths, start=1))
        plan = pack_nonpreemptive(remaining, list(range(1, d + 1)), d, phi)
        jobs = [segment.job for column in plan.columns for segment in column.segments]
        self.assertEqual(len(jobs), len(set(jobs)))
        for column in plan.columns:
            self.assertLessEqual(column.load, column.capacity)
            for segment in column.segments:
                self.assertEqual(segment.size, remaining[segment.job])


class LongJobPackingTests(SimpleTestCase):

    def test_single_long_job(self):
        plan = pack_longjob({1: 8}, [1, 2, 3, 4], d=1)
        self.assertEqual(plan.mode, LONGJOB)
        self.assertEqual(plan.rounds, 8)
        self.assertEqual(plan.columns[0].broadcast_round, 8)

    def test_slots_are_distinct_modulo_d(self):
        plan = pack_longjob({1: 2, 2: 2}, [1, 2], d=2)
        self.assertEqual([column.broadcast_round for column in plan.columns], [3, 2])
        self.assertEqual(plan.rounds, 3)

    def test_unit_job_on_one_machine(self):
        self.assertEqual(pack_longjob({1: 1}, [1], d=1).rounds, 1)

    def test_needs_enough_jobs(self):
        with self.assertRaises(PackingError):
            pack_longjob({}, [1, 2], d=1)
        with self.assertRaises(PackingError):
            pack_longjob({1: 3}, [1, 2], d=2)


class EpochTests(SimpleTestCase):

    def test_failure_free_epoch_confirms_the_plan(self):
        plan = pack_preemptive(unit_jobs(6), [1, 2, 3], d=3)
        outcome, trace = run_epoch(plan, 3)
        self.assertEqual(len(outcome.confirmed_tasks), 6)
        self.assertEqual(outcome.broadcasts_heard, 3)
        self.assertEqual(outcome.detected_crashes, frozenset())
        self.assertEqual(total_work(trace), 9)

    def test_silent_slot_reveals_the_crash(self):
        plan = pack_preemptive(unit_jobs(6), [1, 2, 3], d=3)
        adversary = ScheduleAdversary(CrashSchedule(((2, 1),)), budget=1)
        outcome, trace = run_epoch(plan, 3, adversary)
        self.assertEqual(outcome.detected_crashes, frozenset({2}))
        self.assertEqual(len(outcome.confirmed_tasks), 4)
        self.assertTrue(outcome.confirmed_tasks.isdisjoint(plan.columns[1].segments[0].tasks()))
        self.assertEqual(total_work(trace), 3 + 0 + 3)

    def test_empty_plan_still_lasts_the_whole_epoch(self):
        plan = pack_preemptive({}, [1, 2], d=2)
        outcome, trace = run_epoch(plan, 2)
        self.assertEqual(outcome.confirmed, frozenset())
        self.assertEqual(outcome.rounds_elapsed, 2)
        self.assertEqual(total_work(trace), 4)

    def test_nonpreemptive_epoch_confirms_whole_jobs(self):
        plan = pack_nonpreemptive({1: 1, 2: 3}, [1, 2], d=2, phi=2)
        outcome, _ = run_epoch(plan, 2)
        self.assertEqual(outcome.confirmed_jobs, frozenset({1, 2}))

    def test_broadcast_outside_a_slot_is_a_protocol_violation(self):
        plan = pack_preemptive({1: 1}, [1, 2], d=2)
        steps = epoch_steps(1, plan)
        next(steps)
        with self.assertRaises(ProtocolViolation):
            steps.send(Delivered(5, Message(5)))

    def test_work_and_confirmations_per_geometry(self):
        for d in range(1, 9):
            for phi in range(1, 5):
                with self.subTest(d=d, phi=phi):
                    capacity = phi * d * (d + 1) // 2
                    plan = pack_preemptive(unit_jobs(capacity + 3), list(range(1, d + 1)), d, phi)
                    outcome, trace = run_epoch(plan, d)
                    self.assertEqual(len(outcome.confirmed_tasks), capacity)
                    self.assertEqual(total_work(trace), d * d * phi)
