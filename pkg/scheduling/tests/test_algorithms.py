from unittest import mock

from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from scheduling import algorithms
from scheduling.adversary import AdversarySpec, NoAdversary
from scheduling.algorithms import (
    LocalView,
    RunContext,
    confirm_work,
    deftri,
    machine_rng,
    mix_and_test,
    ranscatri,
    scatri,
    silent_branch,
    triangle_size,
)
from scheduling.core import Delivered, JobSet, SimEnv, Simulation, ceil_div_pow2, total_work, verify_reliability
from scheduling.exceptions import ConfigurationError
from scheduling.oracle import mc_mix_and_test
from scheduling.tapebb import Segment, EpochOutcome


def env_for(m, lengths, kind='none', f=0, seed=0, algorithm='scatri'):
    return SimEnv(m, JobSet.from_lengths(lengths), AdversarySpec(budget=f, kind=kind), seed, algorithm)


def assert_reliable(test, env, trace):
    test.assertTrue(verify_reliability(trace, env.jobset, env.mode).reliable)


class ScatriTests(SimpleTestCase):

    def test_full_triangle_in_one_epoch(self):
        env = env_for(3, [1] * 6)
        trace = scatri(env)
        assert_reliable(self, env, trace)
        self.assertEqual(trace.length, 3)
        self.assertEqual(total_work(trace), 9)

    def test_epoch_shrinks_until_the_work_fills_it(self):
        env = env_for(4, [1, 1, 1])
        trace = scatri(env)
        assert_reliable(self, env, trace)
        self.assertEqual(trace.length, 2)
        self.assertEqual(total_work(trace), 8)

    def test_failure_free_work_on_a_larger_instance(self):
        env = env_for(32, [1] * 64)
        self.assertEqual(total_work(scatri(env)), 704)

    def test_silencer_costs_work(self):
        env = env_for(32, [1] * 64, kind='silencer', f=8)
        trace = scatri(env)
        assert_reliable(self, env, trace)
        self.assertEqual(len(trace.crashed()), 8)
        self.assertEqual(total_work(trace), 748)

    def test_survives_every_adversary_kind(self):
        for kind in ('silencer', 'leader_hunter', 'random'):
            with self.subTest(kind=kind):
                env = SimEnv(5, JobSet.from_lengths([3, 1, 2, 1, 4, 1]),
                             AdversarySpec(budget=4, kind=kind, p=0.2, seed=3))
                assert_reliable(self, env, scatri(env, check_views=True))


class DeftriTests(SimpleTestCase):

    def test_phase_stretches_to_the_average_length(self):
        env = env_for(2, [2, 2, 2], algorithm='deftri')
        trace = deftri(env)
        assert_reliable(self, env, trace)
        self.assertEqual(total_work(trace), 8)

    def test_single_long_job_runs_without_layering(self):
        env = env_for(4, [8], algorithm='deftri')
        trace = deftri(env)
        assert_reliable(self, env, trace)
        self.assertEqual(trace.length, 8)
        self.assertEqual(total_work(trace), 32)

    def test_silencer_on_long_jobs(self):
        env = env_for(32, [16] * 16, kind='silencer', f=16, algorithm='deftri')
        trace = deftri(env)
        assert_reliable(self, env, trace)
        self.assertEqual(total_work(trace), 1352)

    def test_survives_adaptive_crashes(self):
        env = env_for(4, [1, 3, 2, 2, 1], kind='silencer', f=3, algorithm='deftri')
        assert_reliable(self, env, deftri(env, check_views=True))


class RanscatriTests(SimpleTestCase):

    def test_small_machine_count_delegates_to_scatri(self):
        env = env_for(2, [1] * 9, algorithm='ranscatri')
        self.assertEqual(ranscatri(env).export_lines(), scatri(env).export_lines())

    def test_silent_branch_performs_everything_everywhere(self):
        self.assertTrue(silent_branch(16, 4))
        env = env_for(16, [1] * 4, algorithm='ranscatri')
        trace = ranscatri(env)
        assert_reliable(self, env, trace)
        silent = trace.rounds[:4]
        self.assertTrue(all(not record.intents for record in silent))
        self.assertEqual(sum(record.worked for record in silent), 16 * 4)

    def test_main_branch_elects_leaders_then_runs_epochs(self):
        self.assertFalse(silent_branch(64, 3600))
        env = env_for(64, [1] * 3600, seed=11, algorithm='ranscatri')
        trace = ranscatri(env)
        assert_reliable(self, env, trace)
        self.assertLessEqual(total_work(trace), 6 * (3600 + 64 * 60 + 64))

    def test_refuses_adaptive_adversaries(self):
        env = env_for(4, [1] * 4, kind='silencer', f=1, algorithm='ranscatri')
        with self.assertRaises(ConfigurationError):
            ranscatri(env)

    def test_same_seed_same_run(self):
        env = env_for(12, [1] * 20, seed=5, algorithm='ranscatri')
        self.assertEqual(ranscatri(env).export_lines(), ranscatri(env).export_lines())


class SubroutineTests(SimpleTestCase):

    def test_confirm_work_with_a_single_machine(self):
        jobset = JobSet.from_lengths([2])
        ctx = RunContext(1, jobset)
        view = LocalView.initial(1, jobset)
        steps = confirm_work(1, view, ctx, machine_rng(0, 1))
        intent = next(steps)
        self.assertEqual(intent.tasks, jobset.all_tasks())
        with self.assertRaises(StopIteration) as caught:
            steps.send(Delivered(1, intent))
        self.assertEqual(caught.exception.value, 1)
        self.assertEqual(view.tasks, {})

    def test_election_cannot_succeed_with_too_few_machines(self):
        self.assertEqual(mc_mix_and_test(i=2, L=4, m=4, M=1, trials=5, seed=0).estimate, 0.0)

    def test_fold_removes_confirmed_work_and_detected_machines(self):
        view = LocalView.initial(3, JobSet.from_lengths([3, 1]))
        view.fold(EpochOutcome(
            confirmed_segments=(Segment(1, 1, 2), Segment(2, 1, 1)),
            detected_crashes=frozenset({2}),
            rounds_elapsed=3,
        ))
        self.assertEqual(view.machines, [1, 3])
        self.assertEqual(view.task_count, 1)
        self.assertEqual(view.outstanding()[0].next_task, 3)
        self.assertEqual(view.clock, 3)

    def test_per_machine_coins_differ(self):
        self.assertNotEqual(machine_rng(7, 1).random(), machine_rng(7, 2).random())


def record_epochs(run, env):
    """Runs a scheduler and notes (machine, d, before, after, heard) for every epoch a machine completes."""
    epochs = []
    original = algorithms.run_plan

    def recording(machine, view, ctx, mode, d, phi=1):
        before = (view.task_count, len(view.machines))
        outcome = yield from original(machine, view, ctx, mode, d, phi)
        epochs.append((machine, d, before, (view.task_count, len(view.machines)), outcome.broadcasts_heard))
        return outcome

    with mock.patch.object(algorithms, 'run_plan', recording):
        trace = run(env)
    return trace, epochs


class ProgressTests(SimpleTestCase):

    def test_heard_epochs_shrink_the_work_or_the_machine_list(self):
        cases = [
            (scatri, env_for(8, [1] * 20, kind='silencer', f=4)),
            (scatri, env_for(6, [3, 1, 2, 1, 4, 1, 2], kind='leader_hunter', f=3)),
            (deftri, env_for(6, [3, 1, 2, 2, 4, 1, 2], kind='silencer', f=3, algorithm='deftri')),
            (deftri, env_for(2, [3, 1], kind='silencer', f=1, algorithm='deftri')),
        ]
        for run, env in cases:
            with self.subTest(algorithm=env.algorithm.value, m=env.m):
                trace, epochs = record_epochs(run, env)
                assert_reliable(self, env, trace)
                self.assertTrue(epochs)
                for machine, d, (tasks, machines), (tasks_after, machines_after), heard in epochs:
                    self.assertLessEqual(tasks_after, tasks)
                    self.assertLessEqual(machines_after, machines)
                    if heard:
                        self.assertTrue(tasks_after < tasks or machines_after < machines)

    def test_failure_free_epochs_never_grow(self):
        for m, lengths in ((32, [1] * 64), (16, [1] * 100), (7, [2, 1] * 9)):
            with self.subTest(m=m, L=sum(lengths)):
                _, epochs = record_epochs(scatri, env_for(m, lengths))
                sizes = [d for machine, d, *_ in epochs if machine == 1]
                self.assertEqual(sizes, sorted(sizes, reverse=True))

    @settings(max_examples=200, deadline=None)
    @given(m=st.integers(min_value=1, max_value=4096), i=st.integers(min_value=0, max_value=12))
    def test_halving_the_epoch_keeps_a_quarter_of_the_capacity(self, m, i):
        self.assertGreaterEqual(4 * triangle_size(ceil_div_pow2(m, i + 1)), triangle_size(ceil_div_pow2(m, i)))


class ElectionTests(SimpleTestCase):

    def elect(self, m, total_length, seed, i=0):
        ctx = RunContext(m, JobSet())
        views, results = {}, {}

        def program(machine):
            view = views[machine] = LocalView.initial(m, JobSet())
            results[machine] = yield from mix_and_test(
                machine, view, ctx, i, total_length, machine_rng(seed, machine)
            )

        trace = Simulation({v: program(v) for v in range(1, m + 1)}, NoAdversary(), 10_000).run()
        return trace, views, results

    def test_successful_election_puts_the_leaders_first(self):
        successes = 0
        for seed in range(4):
            with self.subTest(seed=seed):
                trace, views, results = self.elect(64, 3600, seed)
                heard = [record.outcome.sender for record in trace.rounds if isinstance(record.outcome, Delivered)]
                for machine, view in views.items():
                    self.assertEqual(view.machines, views[1].machines)
                    self.assertEqual(results[machine], results[1])
                    if results[machine]:
                        self.assertGreaterEqual(len(view.leaders), 60)
                        self.assertEqual(view.leaders, heard[::-1])
                        self.assertEqual(view.machines[:len(view.leaders)], view.leaders)
                        self.assertEqual(sorted(view.machines), list(range(1, 65)))
                successes += results[1]
        self.assertGreater(successes, 0)
