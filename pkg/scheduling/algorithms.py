"""
The schedulers, written as per-machine programs over a replicated LocalView.

Every machine runs the same program on its own view. Views change only
through channel outcomes, which all running machines hear alike, so the views
of running machines stay equal at every round boundary. A program yields its
intent for the coming round, receives the round's outcome, and returns once
its view holds no outstanding job.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .adversary import build_adversary
from .core import (
    Algorithm,
    Delivered,
    ExecutionTrace,
    JobSet,
    Message,
    MessageKind,
    SimEnv,
    Simulation,
    TaskRef,
    ceil_div_pow2,
    ceil_log2,
    ceil_sqrt,
)
from .exceptions import ConfigurationError, ProtocolViolation
from .tapebb import (
    LONGJOB,
    NONPREEMPTIVE,
    PREEMPTIVE,
    EpochOutcome,
    Outstanding,
    TrianglePlan,
    epoch_steps,
    pack_longjob,
    pack_nonpreemptive,
    pack_preemptive,
)

logger = logging.getLogger(__name__)

DEFAULT_MIX_ROUNDS_FACTOR = 4


def triangle_size(d: int) -> int:
    return d * (d + 1) // 2


def machine_rng(seed, machine: int) -> np.random.Generator:
    """Independent coin stream of one machine, derived from the run seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(machine,)))


@dataclass
class LocalView:
    """One machine's copy of the replicated state."""
    machines: list[int]
    tasks: dict[int, Outstanding]
    d: int = 0
    i: int = 0
    phi: int = 1
    leaders: list[int] = field(default_factory=list)
    coin: int = 1
    clock: int = 0

    @classmethod
    def initial(cls, machine_count: int, jobset: JobSet) -> LocalView:
        return cls(
            machines=list(range(1, machine_count + 1)),
            tasks={job.id: Outstanding(job.id, 1, job.length) for job in jobset.jobs},
        )

    @property
    def jobs(self):
        return sorted(self.tasks)

    @property
    def task_count(self):
        return sum(entry.remaining for entry in self.tasks.values())

    def outstanding(self) -> tuple[Outstanding, ...]:
        return tuple(sorted(self.tasks.values(), key=lambda entry: entry.sort_key))

    def all_tasks(self) -> frozenset[TaskRef]:
        return frozenset(
            TaskRef(entry.job, index)
            for entry in self.tasks.values()
            for index in range(entry.next_task, entry.next_task + entry.remaining)
        )

    def fold(self, outcome: EpochOutcome) -> None:
        for segment in outcome.confirmed_segments:
            entry = self.tasks.get(segment.job)
            if entry is None or segment.first != entry.next_task:
                raise ProtocolViolation(f"confirmation of {segment} does not extend the chain of job {segment.job}")
            left = entry.remaining - segment.size
            if left > 0:
                self.tasks[segment.job] = Outstanding(segment.job, segment.last + 1, left)
            else:
                del self.tasks[segment.job]
        for job in outcome.confirmed_jobs:
            self.tasks.pop(job, None)
        if outcome.detected_crashes:
            self.machines = [v for v in self.machines if v not in outcome.detected_crashes]
        self.clock += outcome.rounds_elapsed

    def promote(self, machine: int) -> None:
        if machine in self.machines:
            self.machines.remove(machine)
        self.machines.insert(0, machine)
        self.leaders.insert(0, machine)


@dataclass
class RunContext:
    """Read-only facts every machine knows before round 1, plus memoized plans."""
    machine_count: int
    jobset: JobSet
    seed: int = 0
    mix_rounds_factor: int = DEFAULT_MIX_ROUNDS_FACTOR
    views: dict[int, LocalView] = field(default_factory=dict)
    plans: dict[tuple, TrianglePlan] = field(default_factory=dict)

    @property
    def m(self):
        return self.machine_count

    @property
    def root(self):
        return ceil_sqrt(self.jobset.total_length)

    def plan(self, view: LocalView, mode: str, d: int, phi: int = 1) -> TrianglePlan:
        # Views of running machines are equal at a given clock, so one packing serves them all.
        key = (view.clock, mode, d, phi)
        plan = self.plans.get(key)
        if plan is None:
            if mode == PREEMPTIVE:
                plan = pack_preemptive(view.outstanding(), view.machines, d, phi)
            elif mode == NONPREEMPTIVE:
                plan = pack_nonpreemptive(view.outstanding(), view.machines, d, phi)
            else:
                plan = pack_longjob(view.outstanding(), view.machines, d)
            self.plans[key] = plan
        return plan


def run_plan(machine, view, ctx, mode, d, phi=1):
    view.d, view.phi = d, phi
    plan = ctx.plan(view, mode, d, phi)
    outcome = yield from epoch_steps(machine, plan)
    view.fold(outcome)
    return outcome


# --- Deterministic schedulers ---

def scatri_steps(machine, view, ctx):
    """Scaling triangles: shrink the epoch until the outstanding tasks fill it."""
    view.i = 0
    while view.tasks:
        d = min(ceil_div_pow2(ctx.m, view.i), len(view.machines))
        if view.task_count >= triangle_size(d):
            yield from run_plan(machine, view, ctx, PREEMPTIVE, d)
        else:
            view.i += 1


def deftri_steps(machine, view, ctx):
    """Whole jobs only; phases stretch to the average outstanding job length."""
    view.i = 0
    while view.tasks:
        d = min(ceil_div_pow2(ctx.m, view.i), len(view.machines))
        jobs = len(view.tasks)
        if jobs >= triangle_size(d):
            phi = math.ceil(view.task_count / jobs)
            yield from run_plan(machine, view, ctx, NONPREEMPTIVE, d, phi)
        elif view.task_count < triangle_size(d):
            view.i += 1
        else:
            yield from run_plan(machine, view, ctx, LONGJOB, min(jobs, len(view.machines)))


# --- Randomized subroutines ---

def mix_and_test(machine, view, ctx, i, total_length, rng):
    """
    Elects leaders by lone broadcasts. Each machine not yet a leader transmits
    with probability 1/coin; every heard sender moves to the front of the list
    and the coin shrinks by one. Succeeds when at least ⌈√L⌉ broadcasts were heard.
    """
    root = ceil_sqrt(total_length)
    view.leaders = []
    view.coin = ceil_div_pow2(ctx.m, i)
    rounds = ctx.mix_rounds_factor * (root + ceil_log2(ctx.m))
    heard = 0
    for _ in range(rounds):
        intent = None
        if machine not in view.leaders and rng.random() < 1.0 / view.coin:
            intent = Message(sender=machine, kind=MessageKind.ELECT)
        outcome = yield intent
        view.clock += 1
        if isinstance(outcome, Delivered):
            view.promote(outcome.sender)
            view.coin = max(view.coin - 1, 1)
            heard += 1
    return heard >= root


def confirm_work(machine, view, ctx, rng):
    """Announces locally finished work with a cycling broadcast probability; returns the rounds used."""
    payload = Message(sender=machine, kind=MessageKind.CONFIRM, tasks=view.all_tasks())
    top = ceil_log2(ctx.m)
    i = 0
    rounds = 0
    while True:
        coin = ceil_div_pow2(ctx.m, i)
        outcome = yield payload if rng.random() < 1.0 / coin else None
        rounds += 1
        view.clock += 1
        if isinstance(outcome, Delivered):
            view.tasks.clear()
            return rounds
        i = 0 if i >= top else i + 1


def all_tasks_epoch(machine, view, ctx, rng):
    """Every machine performs every task silently, then the work is confirmed once."""
    for _ in range(view.task_count):
        yield None
        view.clock += 1
    return (yield from confirm_work(machine, view, ctx, rng))


def silent_branch(m: int, total_length: int) -> bool:
    return math.log2(m) > math.exp(math.sqrt(total_length) / 32)


def ranscatri_steps(machine, view, ctx, rng):
    total_length = ctx.jobset.total_length
    if not view.tasks:
        return
    if ctx.m * ctx.m <= total_length:
        yield from scatri_steps(machine, view, ctx)
        return
    if silent_branch(ctx.m, total_length):
        yield from all_tasks_epoch(machine, view, ctx, rng)
        return
    root = ctx.root
    view.i = 0
    while view.tasks:
        if ceil_div_pow2(ctx.m, view.i) <= root:
            yield from scatri_steps(machine, view, ctx)
            return
        elected = yield from mix_and_test(machine, view, ctx, view.i, total_length, rng)
        if not elected:
            view.i += 1
            continue
        while view.tasks and len(view.machines) >= root:
            plan_columns = ctx.plan(view, PREEMPTIVE, root).slots()
            outcome = yield from run_plan(machine, view, ctx, PREEMPTIVE, root)
            if 4 * outcome.broadcasts_heard < min(root, 4 * len(plan_columns)):
                break


# --- Entry points ---

PROGRAMS = {
    Algorithm.SCATRI: lambda machine, view, ctx: scatri_steps(machine, view, ctx),
    Algorithm.DEFTRI: lambda machine, view, ctx: deftri_steps(machine, view, ctx),
    Algorithm.RANSCATRI: lambda machine, view, ctx: ranscatri_steps(
        machine, view, ctx, machine_rng(ctx.seed, machine)
    ),
}


def build_programs(algorithm: Algorithm | str, ctx: RunContext) -> dict:
    program = PROGRAMS[Algorithm(algorithm)]
    programs = {}
    for machine in range(1, ctx.machine_count + 1):
        view = LocalView.initial(ctx.machine_count, ctx.jobset)
        ctx.views[machine] = view
        programs[machine] = program(machine, view, ctx)
    return programs


def execute(env: SimEnv, adversary=None, mix_rounds_factor: int = DEFAULT_MIX_ROUNDS_FACTOR,
            check_views: bool = False) -> ExecutionTrace:
    """Runs env.algorithm against the given adversary, or the one env.adversary describes."""
    if adversary is None:
        adversary = build_adversary(env.adversary, env.machine_count)
    if env.algorithm is Algorithm.RANSCATRI and getattr(adversary, 'adaptive', False):
        raise ConfigurationError("ranscatri is analysed against non-adaptive adversaries only")
    ctx = RunContext(env.machine_count, env.jobset, seed=env.seed, mix_rounds_factor=mix_rounds_factor)
    programs = build_programs(env.algorithm, ctx)
    simulation = Simulation(programs, adversary, env.round_limit, views=ctx.views if check_views else None)
    trace = simulation.run()
    logger.debug("%s finished on m=%d, L=%d after %d rounds", env.algorithm.value, env.m,
                 env.jobset.total_length, trace.length)
    return trace


def scatri(env: SimEnv, adversary=None, **options) -> ExecutionTrace:
    return execute(_with_algorithm(env, Algorithm.SCATRI), adversary, **options)


def deftri(env: SimEnv, adversary=None, **options) -> ExecutionTrace:
    return execute(_with_algorithm(env, Algorithm.DEFTRI), adversary, **options)


def ranscatri(env: SimEnv, adversary=None, **options) -> ExecutionTrace:
    return execute(_with_algorithm(env, Algorithm.RANSCATRI), adversary, **options)


def _with_algorithm(env: SimEnv, algorithm: Algorithm):
    if env.algorithm is algorithm:
        return env
    return SimEnv(env.machine_count, env.jobset, env.adversary, env.seed, algorithm,
                  round_limit=env.round_limit)
