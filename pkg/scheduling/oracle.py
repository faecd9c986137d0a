"""
Independent checks of the schedulers: brute-force adversary search on tiny
instances, Monte Carlo estimates of the probabilistic claims the randomized
scheduler relies on, the work-bound formulas and empirical constant fitting.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import beta, hypergeom

from .adversary import AdversarySpec, CrashSchedule, NoAdversary, ScheduleAdversary, ScriptedAdversary
from .algorithms import LocalView, RunContext, execute, mix_and_test, machine_rng
from .core import (
    Algorithm,
    JobSet,
    SimEnv,
    Simulation,
    ceil_div_pow2,
    total_work,
    verify_reliability,
)
from .exceptions import ConfigurationError, InstanceTooLarge, RoundLimitExceeded

logger = logging.getLogger(__name__)

DEFAULT_NODE_CAP = 200_000

PREEMPTIVE = 'preemptive'
NONPREEMPTIVE = 'nonpreemptive'
RANDOMIZED = 'randomized'
NONPREEMPTIVE_LOWER = 'nonpreemptive_lower'
FAILURE_FREE_LOWER = 'failure_free_lower'
BOUND_KINDS = (PREEMPTIVE, NONPREEMPTIVE, RANDOMIZED, NONPREEMPTIVE_LOWER, FAILURE_FREE_LOWER)


# --- Bounds ---

@dataclass(frozen=True)
class BoundParams:
    m: int
    n: int
    L: int
    alpha: int
    f: int = 0
    C: float | Fraction = 1

    def __post_init__(self):
        if self.m < 1:
            raise ConfigurationError("bounds need at least one machine")
        if self.n < 0 or self.L < self.n:
            raise ConfigurationError(f"expected L >= n >= 0, got L={self.L}, n={self.n}")
        if self.alpha > self.L:
            raise ConfigurationError(f"the longest job ({self.alpha}) cannot exceed L={self.L}")
        if not 0 <= self.f <= self.m - 1:
            raise ConfigurationError(f"f={self.f} must satisfy 0 <= f <= m-1 = {self.m - 1}")
        if self.C < 0:
            raise ConfigurationError("the fitting constant cannot be negative")

    @classmethod
    def for_jobs(cls, jobset: JobSet, m: int, f: int = 0, C=1) -> BoundParams:
        return cls(m=m, n=jobset.n, L=jobset.total_length, alpha=jobset.longest, f=f, C=C)

    def with_constant(self, C) -> BoundParams:
        return BoundParams(self.m, self.n, self.L, self.alpha, self.f, C)


def _terms(kind: str, p: BoundParams) -> tuple[float, float]:
    """(additive part, part scaled by C) of a bound."""
    m, n, L, alpha, f = p.m, p.n, p.L, p.alpha, p.f
    if kind == PREEMPTIVE:
        return L, m * math.sqrt(L) + m * min(f, L) + m * alpha
    if kind == RANDOMIZED:
        return 0, L + m * math.sqrt(L) + m * alpha
    if kind == FAILURE_FREE_LOWER:
        return L, m * math.sqrt(L) + m * alpha
    if kind in (NONPREEMPTIVE, NONPREEMPTIVE_LOWER):
        if n == 0:
            raise ConfigurationError("the non-preemptive bounds are undefined for n = 0")
        scaled = (L / n) * m * math.sqrt(n)
        if kind == NONPREEMPTIVE:
            return L, scaled + alpha * m * min(f, n)
        return L, scaled + (L / n) * m * min(f, n) + m * alpha
    raise ConfigurationError(f"unknown bound kind {kind!r}; expected one of {', '.join(BOUND_KINDS)}")


def bound_eval(kind: str, params: BoundParams) -> float:
    """A float: the square-root terms make most bounds irrational even for a rational C."""
    additive, scaled = _terms(kind, params)
    return additive + float(params.C) * scaled


# --- Constant fitting ---

def fitted_constants(runs: Iterable[tuple[int, BoundParams, str]]) -> list[float]:
    """Per-run witness constants: how much of the C-scaled term each run actually used."""
    constants = []
    for work, params, kind in runs:
        additive, scaled = _terms(kind, params)
        if scaled <= 0:
            raise ConfigurationError(f"the {kind} bound has no scaled term for {params}")
        constants.append((work - additive) / scaled)
    return constants


def fit_constant(runs: Iterable[tuple[int, BoundParams, str]]) -> float:
    runs = list(runs)
    if not runs:
        raise ConfigurationError("cannot fit a constant without runs")
    kinds = {kind for _, _, kind in runs}
    if len(kinds) > 1:
        raise ConfigurationError(f"runs mix bound kinds {sorted(kinds)}")
    return max(fitted_constants(runs))


def spread(constants: Sequence[float]) -> float:
    """max/min of positive constants; infinite when some run used none of its budget."""
    low = min(constants)
    return math.inf if low <= 0 else max(constants) / low


# --- Exhaustive search ---

@dataclass(frozen=True)
class ExhaustiveResult:
    max_work: int
    all_reliable: bool
    leaves: int
    worst_script: tuple = ()


def _judge(env: SimEnv, adversary) -> tuple[int, bool]:
    try:
        trace = execute(env, adversary=adversary)
    except RoundLimitExceeded as exc:
        logger.error("%s", exc)
        return exc.trace.ledger_work(), False
    verdict = verify_reliability(trace, env.jobset, env.mode)
    return total_work(trace), verdict.reliable


def exhaustive_worst_case(algorithm: Algorithm | str, machine_count: int, jobset: JobSet, f: int,
                          seed: int = 0, prune: bool = True, node_cap: int | None = None,
                          round_limit: int | None = None) -> ExhaustiveResult:
    """
    Tries every adaptive crash strategy with budget f against a deterministic
    scheduler. Each run replays a prefix of decisions, then lets nobody crash
    while noting which crash sets were open at every later round; each such
    first deviation becomes a new run. Every decision sequence is visited once.

    With prune on, only machines about to transmit are crash candidates.
    """
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.RANSCATRI:
        raise ConfigurationError("the adaptive search applies to deterministic schedulers; use exhaustive_schedules")
    env = SimEnv(machine_count, jobset, AdversarySpec(budget=f), seed, algorithm, round_limit=round_limit)
    node_cap = DEFAULT_NODE_CAP if node_cap is None else node_cap
    stack: list[tuple] = [()]
    leaves = 0
    max_work = -1
    worst: tuple = ()
    all_reliable = True
    while stack:
        script = stack.pop()
        leaves += 1
        if leaves > node_cap:
            raise InstanceTooLarge(f"exhaustive search exceeded {node_cap} runs")
        adversary = ScriptedAdversary(budget=f, script=script, prune=prune)
        work, reliable = _judge(env, adversary)
        if not reliable:
            all_reliable = False
            logger.error("Unreliable leaf for %s: crash script %s", algorithm.value, script)
        if work > max_work:
            max_work, worst = work, script
        for round_no in sorted(adversary.options, reverse=True):
            filler = (frozenset(),) * (round_no - 1 - len(script))
            for option in adversary.options[round_no]:
                stack.append(script + filler + (option,))
    logger.debug("Exhaustive search for %s visited %d runs; worst work %d", algorithm.value, leaves, max_work)
    return ExhaustiveResult(max_work=max_work, all_reliable=all_reliable, leaves=leaves, worst_script=worst)


def enumerate_schedules(machine_count: int, f: int, horizon: int):
    """Every schedule crashing at most f distinct machines in rounds 1..horizon."""
    machines = range(1, machine_count + 1)
    for size in range(0, f + 1):
        for chosen in combinations(machines, size):
            for rounds in product(range(1, horizon + 1), repeat=size):
                yield CrashSchedule(tuple(zip(chosen, rounds)))


def schedule_horizon(algorithm: Algorithm | str, machine_count: int, jobset: JobSet, seeds: Iterable[int],
                     round_limit: int | None = None) -> int:
    """Latest crash round worth enumerating: the longest failure-free run over the seeds, plus m."""
    longest = 0
    for seed in seeds:
        env = SimEnv(machine_count, jobset, AdversarySpec(), seed, algorithm, round_limit=round_limit)
        try:
            trace = execute(env)
        except RoundLimitExceeded as exc:
            trace = exc.trace
        longest = max(longest, trace.length)
    return longest + machine_count


def exhaustive_schedules(algorithm: Algorithm | str, machine_count: int, jobset: JobSet, f: int,
                         seeds: Iterable[int], horizon: int | None = None, node_cap: int | None = None,
                         round_limit: int | None = None) -> ExhaustiveResult:
    """
    Runs every non-adaptive schedule within budget and horizon with every seed.
    Without a horizon, crashes may land anywhere up to schedule_horizon.
    """
    algorithm = Algorithm(algorithm)
    seeds = list(seeds)
    if horizon is None:
        horizon = schedule_horizon(algorithm, machine_count, jobset, seeds, round_limit=round_limit)
    node_cap = DEFAULT_NODE_CAP if node_cap is None else node_cap
    max_work = -1
    all_reliable = True
    leaves = 0
    worst: tuple = ()
    for schedule in enumerate_schedules(machine_count, f, horizon):
        spec = AdversarySpec(budget=f, kind='schedule', schedule=schedule)
        for seed in seeds:
            leaves += 1
            if leaves > node_cap:
                raise InstanceTooLarge(f"schedule enumeration exceeded {node_cap} runs")
            env = SimEnv(machine_count, jobset, spec, seed, algorithm, round_limit=round_limit)
            work, reliable = _judge(env, ScheduleAdversary(schedule, f))
            if not reliable:
                all_reliable = False
                logger.error("Unreliable run for %s: schedule %s seed %d", algorithm.value, schedule.crashes, seed)
            if work > max_work:
                max_work, worst = work, (schedule.crashes, seed)
    return ExhaustiveResult(max_work=max_work, all_reliable=all_reliable, leaves=leaves, worst_script=worst)


# --- Monte Carlo ---

def clopper_pearson(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval."""
    tail = (1 - confidence) / 2
    low = 0.0 if successes == 0 else float(beta.ppf(tail, successes, trials - successes + 1))
    high = 1.0 if successes == trials else float(beta.ppf(1 - tail, successes + 1, trials - successes))
    return low, high


@dataclass(frozen=True)
class MonteCarloEstimate:
    experiment: str
    successes: int
    samples: int
    bound: float | None = None

    @property
    def estimate(self) -> float:
        return self.successes / self.samples if self.samples else 0.0

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.samples) if self.samples else 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return clopper_pearson(self.successes, self.samples)

    def as_row(self) -> dict:
        low, high = self.interval
        return {
            'experiment': self.experiment,
            'estimate': f"{self.estimate:.6f}",
            'stderr': f"{self.stderr:.6f}",
            'bound': '' if self.bound is None else f"{self.bound:.6g}",
            'samples': self.samples,
            'ci_low': f"{low:.6f}",
            'ci_high': f"{high:.6f}",
        }


MC_FIELDS = ('experiment', 'estimate', 'stderr', 'bound', 'samples', 'ci_low', 'ci_high')


def exact_hypergeometric_tail(M: int, leaders: int, crashed: int, threshold: int) -> float:
    """P[at least `threshold` leaders among `crashed` machines drawn without replacement]."""
    return float(hypergeom.sf(threshold - 1, M, leaders, crashed))


def mc_hypergeometric_tail(M: int, leaders: int, crashed: int, threshold: int,
                           samples: int, seed: int) -> MonteCarloEstimate:
    if not (0 <= leaders <= M and 0 <= crashed <= M):
        raise ConfigurationError(f"need leaders <= M and crashed <= M, got M={M}, leaders={leaders}, crashed={crashed}")
    rng = np.random.default_rng(seed)
    hits = rng.hypergeometric(ngood=leaders, nbad=M - leaders, nsample=crashed, size=samples)
    successes = int(np.count_nonzero(hits >= threshold))
    return MonteCarloEstimate(
        'hypergeometric', successes, samples,
        bound=exact_hypergeometric_tail(M, leaders, crashed, threshold),
    )


def lone_broadcast_probability(M: int, x: int) -> float:
    """Probability that exactly one of M machines transmits when each does with probability 1/x."""
    q = 1.0 / x
    return M * q * (1 - q) ** (M - 1)


def mc_lone_broadcast(M: int, x: int, samples: int, seed: int) -> MonteCarloEstimate:
    rng = np.random.default_rng(seed)
    transmitters = rng.binomial(M, 1.0 / x, size=samples)
    successes = int(np.count_nonzero(transmitters == 1))
    return MonteCarloEstimate('lone_broadcast', successes, samples, bound=lone_broadcast_probability(M, x))


def _isolated_mix(i: int, total_length: int, m: int, M: int, trial_seed, mix_rounds_factor: int) -> bool:
    ctx = RunContext(machine_count=m, jobset=JobSet(), mix_rounds_factor=mix_rounds_factor)
    results: dict[int, bool] = {}

    def program(machine: int):
        view = LocalView(machines=list(range(1, M + 1)), tasks={})
        results[machine] = yield from mix_and_test(
            machine, view, ctx, i, total_length, machine_rng(trial_seed, machine)
        )

    rounds = mix_rounds_factor * (total_length + m + 1)
    simulation = Simulation({v: program(v) for v in range(1, M + 1)}, NoAdversary(), rounds)
    simulation.run()
    return results[1]


def mc_mix_and_test(i: int, L: int, m: int, M: int, trials: int, seed: int,
                    mix_rounds_factor: int = 4) -> MonteCarloEstimate:
    """Success rate of an isolated election round with M live machines."""
    x = ceil_div_pow2(m, i)
    if not (x / 2 < M <= x):
        raise ConfigurationError(f"M={M} must lie in ({x / 2:g}, {x}] for m={m}, i={i}")
    successes = sum(
        _isolated_mix(i, L, m, M, (seed, trial), mix_rounds_factor) for trial in range(trials)
    )
    return MonteCarloEstimate('mix_and_test', successes, trials)


def long_jobs_bounded(jobset: JobSet) -> bool:
    """At most half of the jobs can be longer than twice the average."""
    if jobset.n < 1:
        raise ConfigurationError("the long-job count needs at least one job")
    threshold = Fraction(2 * jobset.total_length, jobset.n)
    long_jobs = sum(1 for job in jobset.jobs if job.length > threshold)
    return 2 * long_jobs <= jobset.n


# --- Tiny-instance verification ---

def job_multisets(max_length: int):
    """Every multiset of positive job lengths with total at most max_length, as non-increasing tuples."""
    def partitions(total, largest):
        if total == 0:
            yield ()
            return
        for part in range(min(total, largest), 0, -1):
            for rest in partitions(total - part, part):
                yield (part,) + rest

    for total in range(1, max_length + 1):
        yield from partitions(total, total)


@dataclass(frozen=True)
class InstanceVerdict:
    algorithm: str
    machines: int
    lengths: tuple[int, ...]
    f: int
    result: ExhaustiveResult


def verify_tiny_instances(algorithms: Iterable[Algorithm | str], max_machines: int = 3, max_length: int = 5,
                          max_f: int = 2, seeds: Iterable[int] = range(20), horizon: int | None = None,
                          prune: bool = True, node_cap: int | None = None):
    """
    Yields a verdict per (algorithm, m, job multiset, f) with f <= m-1.
    Deterministic schedulers face every adaptive strategy; the randomized one
    faces every schedule within `horizon` under each seed; by default the
    horizon covers the longest failure-free run of the instance plus m.
    """
    seeds = list(seeds)
    for algorithm in map(Algorithm, algorithms):
        for machines in range(1, max_machines + 1):
            for lengths in job_multisets(max_length):
                jobset = JobSet.from_lengths(lengths)
                for f in range(0, min(max_f, machines - 1) + 1):
                    if algorithm is Algorithm.RANSCATRI:
                        result = exhaustive_schedules(algorithm, machines, jobset, f, seeds, horizon, node_cap=node_cap)
                    else:
                        result = exhaustive_worst_case(algorithm, machines, jobset, f, prune=prune, node_cap=node_cap)
                    yield InstanceVerdict(algorithm.value, machines, lengths, f, result)
