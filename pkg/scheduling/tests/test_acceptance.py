"""
End-to-end checks over whole sweeps: exhaustive and sampled reliability,
stability of the fitted work constants and the statistical claims behind the
randomized scheduler.
"""
import math
from collections import defaultdict

import numpy as np
from django.test import SimpleTestCase

from scheduling.adversary import AdversarySpec
from scheduling.algorithms import deftri, ranscatri, scatri
from scheduling.core import JobSet, SimEnv, total_work, verify_reliability
from scheduling.harness import ScenarioConfig, SweepConfig, rows_to_csv, simulate, sweep
from scheduling.oracle import (
    NONPREEMPTIVE,
    PREEMPTIVE,
    RANDOMIZED,
    BoundParams,
    bound_eval,
    long_jobs_bounded,
    fitted_constants,
    mc_hypergeometric_tail,
    mc_mix_and_test,
    spread,
    verify_tiny_instances,
)


class TinyInstanceReliabilityTests(SimpleTestCase):

    def assert_all_reliable(self, verdicts):
        failures = [
            (verdict.algorithm, verdict.machines, verdict.lengths, verdict.f)
            for verdict in verdicts if not verdict.result.all_reliable
        ]
        self.assertEqual(failures, [])

    def test_deterministic_schedulers_against_every_adaptive_adversary(self):
        verdicts = list(verify_tiny_instances(['scatri', 'deftri']))
        self.assertEqual(len(verdicts), 2 * 18 * (1 + 2 + 3))
        self.assert_all_reliable(verdicts)

    def test_randomized_scheduler_against_every_schedule(self):
        self.assert_all_reliable(verify_tiny_instances(['ranscatri'], seeds=range(20)))


class SampledReliabilityTests(SimpleTestCase):
    scenarios = 1000

    def draw(self, rng):
        algorithm = str(rng.choice(['scatri', 'deftri', 'ranscatri']))
        machines = int(rng.integers(1, 33))
        n = int(rng.integers(1, 65))
        longest = int(rng.integers(1, min(16, 512 // n) + 1))
        jobs = f"uniform:{n},1,{longest}"
        f = int(rng.integers(0, machines))
        if algorithm == 'ranscatri':
            adversary = str(rng.choice(['none', 'random_schedule:64']))
        else:
            adversary = str(rng.choice(['none', 'random_schedule:64', 'silencer', 'leader_hunter', 'random:0.05']))
        return ScenarioConfig(algorithm, machines, jobs, adversary=adversary, f=f, seeds=(int(rng.integers(0, 2 ** 32)),))

    def test_random_scenarios_are_reliable(self):
        rng = np.random.default_rng(2024)
        failures = []
        for _ in range(self.scenarios):
            config = self.draw(rng)
            row, _ = simulate(config)
            self.assertLessEqual(row.L, 512)
            if not row.reliable:
                failures.append(config)
        self.assertEqual(failures, [])


class ScatriBoundStabilityTests(SimpleTestCase):
    lengths = (64, 256, 1024, 4096)

    def constants(self, adversary, f):
        grid = SweepConfig(
            algorithm=('scatri',), machines=(32,), jobs=tuple(f"unit:{L}" for L in self.lengths),
            adversary=(adversary,), f=(f,),
        )
        rows = sweep(grid, backend='inline')
        self.assertTrue(all(row.reliable for row in rows))
        return rows, fitted_constants((row.work, row.bound_params(), PREEMPTIVE) for row in rows)

    def test_failure_free_work(self):
        rows, constants = self.constants('none', 0)
        self.assertEqual([row.work for row in rows], [704, 1472, 3328, 9216])
        self.assertLessEqual(spread(constants), 4)

    def test_silencer_with_a_moderate_budget(self):
        _, constants = self.constants('silencer', 8)
        self.assertLessEqual(spread(constants), 4)

    def test_silencer_with_the_largest_budget(self):
        _, constants = self.constants('silencer', 31)
        self.assertLessEqual(spread(constants), 4)


class DeftriBoundStabilityTests(SimpleTestCase):

    def test_constant_is_stable_per_length_and_budget(self):
        """
        Each (job length, budget) series keeps its fitted constants within a
        factor of 4. Pooled over the whole grid they are not: while there are
        fewer jobs than a full triangle but enough tasks to fill one, DefTri
        runs long-job epochs, whose failure-free overhead grows with n times m
        rather than with m times the square root of n.
        """
        grid = SweepConfig(
            algorithm=('deftri',), machines=(32,),
            jobs=tuple(f"equal:{n},{length}" for length in (4, 16) for n in (16, 64, 256)),
            adversary=('silencer',), f=(0, 16),
        )
        series = defaultdict(list)
        for row in sweep(grid, backend='inline'):
            self.assertTrue(row.reliable)
            series[(row.alpha, row.f)].append((row.work, row.bound_params(), NONPREEMPTIVE))
        self.assertEqual(len(series), 4)
        for key, runs in series.items():
            with self.subTest(length=key[0], f=key[1]):
                self.assertLessEqual(spread(fitted_constants(runs)), 4)
        pooled = fitted_constants(run for runs in series.values() for run in runs)
        self.assertGreater(spread(pooled), 4)


class PreemptionSeparationTests(SimpleTestCase):

    def test_preemptive_scheduler_keeps_crashed_progress(self):
        jobs = JobSet.from_lengths([1] * 15 + [64])
        spec = AdversarySpec(budget=16, kind='silencer')
        preemptive = scatri(SimEnv(32, jobs, spec, algorithm='scatri'))
        whole_jobs = deftri(SimEnv(32, jobs, spec, algorithm='deftri'))
        self.assertLessEqual(total_work(preemptive), 1.05 * total_work(whole_jobs))


class RanscatriBranchTests(SimpleTestCase):

    def test_expected_work_within_the_bound(self):
        jobs = JobSet.from_lengths([1] * 3600)
        works = []
        for seed in range(100):
            env = SimEnv(64, jobs, AdversarySpec(), seed, 'ranscatri')
            trace = ranscatri(env)
            self.assertTrue(verify_reliability(trace, jobs, env.mode).reliable)
            works.append(total_work(trace))
        bound = bound_eval(RANDOMIZED, BoundParams.for_jobs(jobs, 64, C=6))
        self.assertLessEqual(np.mean(works), bound)


class StatisticalClaimTests(SimpleTestCase):

    def test_election_succeeds_with_a_full_system(self):
        self.assertGreaterEqual(mc_mix_and_test(i=0, L=256, m=64, M=64, trials=200, seed=0).estimate, 0.95)

    def test_crashes_rarely_hit_many_leaders(self):
        estimate = mc_hypergeometric_tail(M=2048, leaders=64, crashed=1024, threshold=48, samples=100_000, seed=0)
        self.assertLessEqual(estimate.estimate, 1e-2)
        self.assertLessEqual(estimate.bound, math.exp(-8))

    def test_long_jobs_are_at_most_half(self):
        rng = np.random.default_rng(31)
        for _ in range(10_000):
            n = int(rng.integers(1, 65))
            lengths = rng.integers(1, 65, size=n).tolist()
            self.assertTrue(long_jobs_bounded(JobSet.from_lengths(lengths)))


class DeterminismTests(SimpleTestCase):

    def test_equal_configs_give_identical_exports_and_rows(self):
        for algorithm, adversary in (('scatri', 'leader_hunter'), ('deftri', 'random:0.1'), ('ranscatri', 'random_schedule:16')):
            with self.subTest(algorithm=algorithm):
                config = ScenarioConfig(algorithm, 9, 'uniform:20,1,6', adversary=adversary, f=4, seeds=(17,))
                first_row, first_trace = simulate(config)
                second_row, second_trace = simulate(config)
                self.assertEqual(first_trace.export_lines(), second_trace.export_lines())
                self.assertEqual(rows_to_csv([first_row]), rows_to_csv([second_row]))
