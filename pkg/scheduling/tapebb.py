"""
Task-performing black box: packs outstanding work into a triangle of columns
and runs one epoch of it with broadcast-slot crash detection.

Column j (1-based) belongs to the j-th machine of the list and may hold up to
j·φ task units. Its machine works through its segments and announces them in
the last round of phase j. Every other running machine listens. Because the
schedule is common knowledge, silence in a slot that was expected to carry a
confirmation identifies a crashed machine.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .core import (
    Delivered,
    ExecutionTrace,
    JobSpec,
    Message,
    MessageKind,
    Simulation,
    TaskRef,
)
from .exceptions import PackingError, ProtocolViolation

logger = logging.getLogger(__name__)

PREEMPTIVE = 'preemptive'
NONPREEMPTIVE = 'nonpreemptive'
LONGJOB = 'longjob'
PLAN_MODES = (PREEMPTIVE, NONPREEMPTIVE, LONGJOB)


class Outstanding(NamedTuple):
    """The chain suffix of a job still waiting to be confirmed."""
    job: int
    next_task: int
    remaining: int

    @property
    def sort_key(self):
        return (self.remaining, self.job)


@dataclass(frozen=True)
class Segment:
    job: int
    first: int
    last: int

    @property
    def size(self):
        return self.last - self.first + 1

    def tasks(self) -> tuple[TaskRef, ...]:
        return tuple(TaskRef(self.job, index) for index in range(self.first, self.last + 1))

    def __str__(self):
        if self.first == self.last:
            return f"{self.job}.{self.first}"
        return f"{self.job}.{self.first}-{self.last}"


@dataclass(frozen=True)
class Column:
    index: int
    machine: int
    capacity: int
    segments: tuple[Segment, ...] = ()
    broadcast_round: int = 0

    @property
    def load(self):
        return sum(segment.size for segment in self.segments)

    @property
    def scheduled(self):
        return bool(self.segments)


@dataclass(frozen=True)
class TrianglePlan:
    d: int
    phi: int
    mode: str
    columns: tuple[Column, ...] = ()
    length: int = 0  # rounds; d·φ for triangles, max slot for long jobs

    def __post_init__(self):
        if self.mode not in PLAN_MODES:
            raise PackingError(f"unknown plan mode {self.mode!r}")

    @property
    def rounds(self):
        return self.length

    @property
    def capacity(self):
        return sum(column.capacity for column in self.columns)

    @property
    def assigned(self):
        return sum(column.load for column in self.columns)

    def slots(self) -> dict[int, Column]:
        """Broadcast round -> column, for columns that carry work."""
        return {column.broadcast_round: column for column in self.columns if column.scheduled}

    def column_of(self, machine: int) -> Column | None:
        for column in self.columns:
            if column.machine == machine:
                return column
        return None

    def payload(self, column: Column) -> Message:
        if self.mode == PREEMPTIVE:
            tasks = frozenset(task for segment in column.segments for task in segment.tasks())
            return Message(sender=column.machine, kind=MessageKind.CONFIRM, tasks=tasks)
        jobs = frozenset(segment.job for segment in column.segments)
        return Message(sender=column.machine, kind=MessageKind.CONFIRM, jobs=jobs)

    def dump(self) -> str:
        lines = [f"plan mode={self.mode} d={self.d} phi={self.phi} rounds={self.length}"]
        for column in self.columns:
            segments = ' '.join(str(segment) for segment in column.segments) or '-'
            lines.append(
                f"column {column.index}: machine={column.machine} capacity={column.capacity} "
                f"slot={column.broadcast_round} segments={segments}"
            )
        return '\n'.join(lines)


@dataclass(frozen=True)
class EpochOutcome:
    confirmed_segments: tuple[Segment, ...] = ()
    confirmed_jobs: frozenset[int] = frozenset()
    detected_crashes: frozenset[int] = frozenset()
    rounds_elapsed: int = 0
    broadcasts_heard: int = 0

    @property
    def confirmed_tasks(self):
        return frozenset(task for segment in self.confirmed_segments for task in segment.tasks())

    @property
    def confirmed(self):
        return self.confirmed_jobs or self.confirmed_tasks


# --- Packing ---

def as_outstanding(remaining: Mapping[int, int] | Iterable) -> tuple[Outstanding, ...]:
    """Accepts a job -> remaining-length mapping, JobSpecs or Outstanding entries."""
    if isinstance(remaining, Mapping):
        entries = [Outstanding(job, 1, length) for job, length in remaining.items()]
    else:
        entries = []
        for entry in remaining:
            if isinstance(entry, Outstanding):
                entries.append(entry)
            elif isinstance(entry, JobSpec):
                entries.append(Outstanding(entry.id, 1, entry.length))
            else:
                entries.append(Outstanding(*entry))
    entries = [entry for entry in entries if entry.remaining > 0]
    return tuple(sorted(entries, key=lambda entry: entry.sort_key))


def _check_geometry(machines: Sequence[int], d: int, phi: int):
    if d < 1:
        raise PackingError(f"epoch length must be at least 1, got d={d}")
    if phi < 1:
        raise PackingError(f"phase length must be at least 1, got phi={phi}")
    if d > len(machines):
        raise PackingError(f"cannot pack d={d} columns onto {len(machines)} machines")


def _largest_residual(residual: list[int]):
    """Index of the largest residual capacity; ties go to the lower column."""
    best = 0
    for index in range(1, len(residual)):
        if residual[index] > residual[best]:
            best = index
    return best


def _assemble(machines, d, phi, mode, assignments):
    columns = tuple(
        Column(
            index=j,
            machine=machines[j - 1],
            capacity=j * phi,
            segments=tuple(assignments[j - 1]),
            broadcast_round=j * phi,
        )
        for j in range(1, d + 1)
    )
    return TrianglePlan(d=d, phi=phi, mode=mode, columns=columns, length=d * phi)


def pack_preemptive(remaining, machines: Sequence[int], d: int, phi: int = 1) -> TrianglePlan:
    """
    Shortest jobs first. Base jobs that fit column r stay in column r; the base
    jobs that would be truncated move to the top columns where capacity is
    largest. Leftover capacity is then filled with chain prefixes of the next
    jobs, always topping up the column with the most room.
    """
    _check_geometry(machines, d, phi)
    jobs = as_outstanding(remaining)
    assignments: list[list[Segment]] = [[] for _ in range(d)]
    residual = [j * phi for j in range(1, d + 1)]

    def place(column, entry):
        size = min(entry.remaining, residual[column])
        assignments[column].append(Segment(entry.job, entry.next_task, entry.next_task + size - 1))
        residual[column] -= size

    k = min(d, len(jobs))
    fits = 0
    while fits < k and jobs[fits].remaining <= (fits + 1) * phi:
        fits += 1
    for position in range(k):
        column = position if position < fits else d - k + position
        place(column, jobs[position])

    for entry in jobs[k:]:
        column = _largest_residual(residual)
        if residual[column] == 0:
            break
        place(column, entry)

    return _assemble(machines, d, phi, PREEMPTIVE, assignments)


def pack_nonpreemptive(remaining, machines: Sequence[int], d: int, phi: int) -> TrianglePlan:
    """Like pack_preemptive, but a job is only ever placed whole."""
    _check_geometry(machines, d, phi)
    jobs = as_outstanding(remaining)
    assignments: list[list[Segment]] = [[] for _ in range(d)]
    residual = [j * phi for j in range(1, d + 1)]

    def place(column, entry):
        assignments[column].append(Segment(entry.job, entry.next_task, entry.next_task + entry.remaining - 1))
        residual[column] -= entry.remaining

    k = min(d, len(jobs))
    deferred = []
    for position in range(k):
        if jobs[position].remaining <= residual[position]:
            place(position, jobs[position])
        else:
            deferred.append(jobs[position])

    for entry in sorted(deferred + list(jobs[k:]), key=lambda entry: entry.sort_key):
        column = _largest_residual(residual)
        if entry.remaining > residual[column]:
            break
        place(column, entry)

    return _assemble(machines, d, phi, NONPREEMPTIVE, assignments)


def pack_longjob(remaining, machines: Sequence[int], d: int) -> TrianglePlan:
    """
    One job per machine, no layering. Machine k announces its job in round
    b_k, the first round at or after the job's length with b_k ≡ k (mod d), so
    slots never collide.
    """
    jobs = as_outstanding(remaining)
    if not jobs:
        raise PackingError("the long-job branch needs at least one outstanding job")
    _check_geometry(machines, d, 1)
    if d > len(jobs):
        raise PackingError(f"d={d} exceeds the {len(jobs)} outstanding jobs")
    columns = []
    for k in range(1, d + 1):
        entry = jobs[k - 1]
        slot = entry.remaining + (k - entry.remaining) % d
        columns.append(Column(
            index=k,
            machine=machines[k - 1],
            capacity=entry.remaining,
            segments=(Segment(entry.job, entry.next_task, entry.next_task + entry.remaining - 1),),
            broadcast_round=slot,
        ))
    length = max(column.broadcast_round for column in columns)
    return TrianglePlan(d=d, phi=1, mode=LONGJOB, columns=tuple(columns), length=length)


# --- Execution ---

def epoch_steps(machine, plan):
    """
    One machine's side of an epoch. Every running machine executes this with
    the same plan; the returned outcome is therefore the same everywhere.
    """
    slots = plan.slots()
    confirmed: list[Segment] = []
    confirmed_jobs: set[int] = set()
    detected: set[int] = set()
    heard = 0
    for round_no in range(1, plan.length + 1):
        column = slots.get(round_no)
        intent = plan.payload(column) if column is not None and column.machine == machine else None
        outcome = yield intent
        if isinstance(outcome, Delivered):
            if column is None or outcome.sender != column.machine:
                raise ProtocolViolation(
                    f"machine {outcome.sender} was heard in epoch round {round_no}, "
                    f"which is not its broadcast slot"
                )
            heard += 1
            if plan.mode == PREEMPTIVE:
                confirmed.extend(column.segments)
            else:
                confirmed_jobs.update(segment.job for segment in column.segments)
        elif column is not None:
            detected.add(column.machine)
    return EpochOutcome(
        confirmed_segments=tuple(confirmed),
        confirmed_jobs=frozenset(confirmed_jobs),
        detected_crashes=frozenset(detected),
        rounds_elapsed=plan.length,
        broadcasts_heard=heard,
    )


class _NoCrashes:
    budget = 0

    def decide_crashes(self, observation):
        return frozenset()


@dataclass
class _EpochRunner:
    """Collects the outcome a machine's epoch program returns."""
    outcomes: dict[int, EpochOutcome] = field(default_factory=dict)

    def program(self, machine, plan):
        self.outcomes[machine] = yield from epoch_steps(machine, plan)


def run_epoch(plan: TrianglePlan, machine_count: int, adversary=None) -> tuple[EpochOutcome, ExecutionTrace]:
    """
    Runs a single epoch on machines 1..machine_count and returns the outcome
    agreed by the surviving machines together with the trace.
    """
    runner = _EpochRunner()
    programs = {v: runner.program(v, plan) for v in range(1, machine_count + 1)}
    simulation = Simulation(programs, adversary or _NoCrashes(), round_limit=plan.length)
    trace = simulation.run()
    survivors = sorted(runner.outcomes)
    if not survivors:
        return EpochOutcome(rounds_elapsed=plan.length), trace
    outcome = runner.outcomes[survivors[0]]
    if outcome.detected_crashes:
        logger.debug("Epoch detected crashed machines %s", sorted(outcome.detected_crashes))
    return outcome, trace
