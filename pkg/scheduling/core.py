"""
Round-synchronous execution engine for machines sharing a multiple-access
channel without collision detection.

Rounds are numbered from 1 and every run starts at r_0 = 0. A machine that
halts after hearing round r has r_v = r; a machine crashed in round r has
r_v = r as well, but its step in that round is destroyed, so it earned r - 1
units of work.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Generator, Iterable, Iterator, Mapping, Sequence, TextIO

from .exceptions import (
    AdversaryViolation,
    ConfigurationError,
    IncompleteTrace,
    RoundLimitExceeded,
    SimulationError,
)

logger = logging.getLogger(__name__)

SEED_BOUND = 2 ** 64


class Mode(str, Enum):
    PREEMPTIVE = 'preemptive'
    NONPREEMPTIVE = 'non-preemptive'


class Algorithm(str, Enum):
    SCATRI = 'scatri'
    DEFTRI = 'deftri'
    RANSCATRI = 'ranscatri'

    @property
    def mode(self):
        return Mode.NONPREEMPTIVE if self is Algorithm.DEFTRI else Mode.PREEMPTIVE


# --- Jobs and tasks ---

@dataclass(frozen=True, order=True)
class JobSpec:
    id: int
    length: int

    def __post_init__(self):
        if self.id < 1:
            raise ConfigurationError(f"job ids are positive integers, got {self.id}")
        if self.length < 1:
            raise ConfigurationError(f"job {self.id} has length {self.length}; the minimal length is 1")


@dataclass(frozen=True, order=True)
class TaskRef:
    """Task `index` (1-based) of the chain of job `job`."""
    job: int
    index: int

    def __str__(self):
        return f"{self.job}.{self.index}"


@dataclass(frozen=True)
class JobSet:
    jobs: tuple[JobSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'jobs', tuple(self.jobs))
        ids = [job.id for job in self.jobs]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("job ids must be unique within a job set")

    @classmethod
    def from_lengths(cls, lengths: Iterable[int]) -> JobSet:
        return cls(tuple(JobSpec(index, length) for index, length in enumerate(lengths, start=1)))

    @property
    def n(self):
        return len(self.jobs)

    @property
    def total_length(self):
        return sum(job.length for job in self.jobs)

    @property
    def longest(self):
        return max((job.length for job in self.jobs), default=0)

    # The usual symbols, for code that reads closer to the formulas.
    L = total_length
    alpha = longest

    @property
    def lengths(self):
        return {job.id: job.length for job in self.jobs}

    def ids(self) -> list[int]:
        return sorted(job.id for job in self.jobs)

    def chain(self, job_id: int) -> tuple[TaskRef, ...]:
        length = self.lengths[job_id]
        return tuple(TaskRef(job_id, index) for index in range(1, length + 1))

    def all_tasks(self) -> frozenset[TaskRef]:
        return frozenset(task for job in self.jobs for task in self.chain(job.id))


# --- Channel ---

class MessageKind(str, Enum):
    CONFIRM = 'confirm'
    ELECT = 'elect'


@dataclass(frozen=True)
class Message:
    """
    A channel payload. Confirmations carry the task refs (preemptive) or whole
    job ids (non-preemptive) newly done by the sender; election messages carry
    only the sender.
    """
    sender: int
    kind: MessageKind = MessageKind.CONFIRM
    tasks: frozenset[TaskRef] = frozenset()
    jobs: frozenset[int] = frozenset()

    def describe(self) -> str:
        if self.kind is MessageKind.ELECT:
            return 'elect'
        parts = ['confirm']
        if self.tasks:
            parts.append('tasks=' + ' '.join(str(task) for task in sorted(self.tasks)))
        if self.jobs:
            parts.append('jobs=' + ' '.join(str(job) for job in sorted(self.jobs)))
        return ' '.join(parts)


@dataclass(frozen=True)
class TransmissionIntent:
    sender: int
    payload: Message


@dataclass(frozen=True)
class Silence:
    pass


@dataclass(frozen=True)
class Delivered:
    sender: int
    payload: Message


ChannelOutcome = Silence | Delivered
SILENCE = Silence()

# A machine program yields its intent for the next round (or None to listen)
# and receives that round's channel outcome. Returning halts the machine.
Program = Generator[Message | None, ChannelOutcome | None, None]


def resolve_channel(intents: Iterable[TransmissionIntent]) -> ChannelOutcome:
    """Exactly one transmitter is heard; zero or several sound like background noise."""
    intents = list(intents)
    if len(intents) == 1:
        return Delivered(intents[0].sender, intents[0].payload)
    return SILENCE


# --- Traces ---

class TerminalKind(str, Enum):
    HALTED = 'halted'
    CRASHED = 'crashed'


@dataclass(frozen=True)
class Terminal:
    kind: TerminalKind
    round: int


@dataclass(frozen=True)
class RoundRecord:
    round: int
    intents: tuple[TransmissionIntent, ...]
    crashes: tuple[int, ...]
    outcome: ChannelOutcome
    worked: int  # machines credited with a unit of work this round


@dataclass
class ExecutionTrace:
    machine_count: int
    budget: int = 0
    rounds: list[RoundRecord] = field(default_factory=list)
    terminal: dict[int, Terminal] = field(default_factory=dict)
    aborted: bool = False
    start_round: int = 0

    @property
    def machines(self):
        return range(1, self.machine_count + 1)

    @property
    def is_complete(self):
        return all(machine in self.terminal for machine in self.machines)

    @property
    def finished(self):
        """Complete, or cut off by the round limit; either way nothing more will happen."""
        return self.is_complete or self.aborted

    @property
    def length(self):
        return len(self.rounds)

    def crashed(self) -> set[int]:
        return {v for v, end in self.terminal.items() if end.kind is TerminalKind.CRASHED}

    def halted(self) -> set[int]:
        return {v for v, end in self.terminal.items() if end.kind is TerminalKind.HALTED}

    def running(self) -> set[int]:
        return {v for v in self.machines if v not in self.terminal}

    def deliveries(self) -> Iterator[tuple[int, Delivered]]:
        for record in self.rounds:
            if isinstance(record.outcome, Delivered):
                yield record.round, record.outcome

    def ledger_work(self) -> int:
        return sum(record.worked for record in self.rounds)

    def events(self) -> Iterator[tuple[int, str, int | str, str]]:
        halts_by_round: dict[int, list[int]] = {}
        for machine, end in self.terminal.items():
            if end.kind is TerminalKind.HALTED:
                halts_by_round.setdefault(end.round, []).append(machine)
        for machine in sorted(halts_by_round.get(self.start_round, [])):
            yield self.start_round, 'halt', machine, ''
        for record in self.rounds:
            for intent in record.intents:
                yield record.round, 'intent', intent.sender, intent.payload.describe()
            for machine in record.crashes:
                yield record.round, 'crash', machine, ''
            if isinstance(record.outcome, Delivered):
                yield record.round, 'deliver', record.outcome.sender, record.outcome.payload.describe()
            else:
                yield record.round, 'silence', '', ''
            for machine in sorted(halts_by_round.get(record.round, [])):
                yield record.round, 'halt', machine, ''

    def export_lines(self) -> list[str]:
        return [f"{r},{kind},{machine},{detail}" for r, kind, machine, detail in self.events()]

    def export(self, stream: TextIO) -> None:
        for line in self.export_lines():
            stream.write(line + '\n')


def total_work(trace: ExecutionTrace) -> int:
    """Sum of r_v - r_0 over machines, with the crash round excluded."""
    if not trace.is_complete:
        raise IncompleteTrace(
            f"machines {sorted(trace.running())} have no terminal event"
        )
    work = 0
    for end in trace.terminal.values():
        rounds = end.round - trace.start_round
        if end.kind is TerminalKind.CRASHED:
            rounds = max(rounds - 1, 0)
        work += rounds
    return work


@dataclass(frozen=True)
class ReliabilityVerdict:
    unperformed_jobs: frozenset[int] = frozenset()
    non_halting_machines: frozenset[int] = frozenset()

    @property
    def reliable(self):
        return not self.unperformed_jobs and not self.non_halting_machines


def verify_reliability(trace: ExecutionTrace, jobset: JobSet, mode: Mode | str) -> ReliabilityVerdict:
    """
    Checks that every job is performed and every non-crashed machine halted.

    Preemptive jobs count as performed when their whole chain was confirmed on
    the channel in chain order. Non-preemptive jobs count when one machine
    announced the whole job; whatever happens to it afterwards does not matter.
    """
    if not trace.finished:
        raise IncompleteTrace("cannot judge a run that has not finished")
    mode = Mode(mode)
    lengths = jobset.lengths
    performed: set[int] = set()

    if mode is Mode.PREEMPTIVE:
        prefix = dict.fromkeys(lengths, 0)
        broken: set[int] = set()
        for _, delivery in trace.deliveries():
            for task in sorted(delivery.payload.tasks):
                if task.job not in prefix:
                    continue
                if task.index == prefix[task.job] + 1:
                    prefix[task.job] += 1
                elif task.index > prefix[task.job]:
                    broken.add(task.job)
        performed = {job for job, done in prefix.items() if done == lengths[job] and job not in broken}
    else:
        for _, delivery in trace.deliveries():
            performed.update(job for job in delivery.payload.jobs if job in lengths)

    verdict = ReliabilityVerdict(
        unperformed_jobs=frozenset(set(lengths) - performed),
        non_halting_machines=frozenset(trace.running()),
    )
    if not verdict.reliable:
        logger.error(
            "Unreliable run: unperformed jobs %s, machines still running %s",
            sorted(verdict.unperformed_jobs), sorted(verdict.non_halting_machines),
        )
    return verdict


# --- Environment ---

def default_round_limit(jobset: JobSet, machine_count: int, factor: int = 64) -> int:
    return factor * (jobset.total_length + machine_count * jobset.longest + machine_count + 1)


@dataclass(frozen=True)
class SimEnv:
    machine_count: int
    jobset: JobSet
    adversary: object  # adversary.AdversarySpec
    seed: int = 0
    algorithm: Algorithm | str = Algorithm.SCATRI
    mode: Mode | str | None = None
    round_limit: int | None = None

    def __post_init__(self):
        algorithm = Algorithm(self.algorithm)
        object.__setattr__(self, 'algorithm', algorithm)
        mode = algorithm.mode if self.mode is None else Mode(self.mode)
        object.__setattr__(self, 'mode', mode)
        if self.machine_count < 1:
            raise ConfigurationError("at least one machine is required")
        if mode is Mode.NONPREEMPTIVE and algorithm is not Algorithm.DEFTRI:
            raise ConfigurationError("the non-preemptive model is served by deftri only")
        if mode is Mode.PREEMPTIVE and algorithm is Algorithm.DEFTRI:
            raise ConfigurationError("deftri runs in the non-preemptive model")
        if not 0 <= self.seed < SEED_BOUND:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        budget = getattr(self.adversary, 'budget', 0)
        if not 0 <= budget <= self.machine_count - 1:
            raise ConfigurationError(
                f"crash budget f={budget} must satisfy 0 <= f <= m-1 = {self.machine_count - 1}"
            )
        if self.round_limit is None:
            object.__setattr__(self, 'round_limit', default_round_limit(self.jobset, self.machine_count))
        elif self.round_limit < 1:
            raise ConfigurationError("round_limit must be positive")

    @property
    def m(self):
        return self.machine_count

    @property
    def f(self):
        return getattr(self.adversary, 'budget', 0)


def ceil_div_pow2(m: int, i: int) -> int:
    """⌈m / 2^i⌉, never below 1."""
    return max(1, -(-m // (1 << i)))


def ceil_sqrt(value: int) -> int:
    return math.isqrt(value - 1) + 1 if value > 0 else 0


def ceil_log2(value: int) -> int:
    return (value - 1).bit_length() if value > 1 else 0


# --- Engine ---

@dataclass(frozen=True)
class Observation:
    """What an adaptive adversary sees before it picks this round's crashes."""
    round: int
    intents: Mapping[int, Message]
    running: frozenset[int]
    history: Sequence[RoundRecord]


class Simulation:
    """
    Drives one program per machine in lockstep. Within a round: running
    machines announce intents, the adversary crashes machines having seen
    those intents, surviving intents hit the channel, everybody still running
    hears the outcome and is credited one unit of work.
    """

    def __init__(self, programs: Mapping[int, Program], adversary, round_limit: int,
                 views: Mapping[int, object] | None = None):
        self.machine_count = len(programs)
        if sorted(programs) != list(range(1, self.machine_count + 1)):
            raise ConfigurationError("machine ids must be 1..m")
        self.adversary = adversary
        self.round_limit = round_limit
        self.views = views
        self.clock = 0
        self.trace = ExecutionTrace(machine_count=self.machine_count, budget=adversary.budget)
        self._running: dict[int, Program] = dict(sorted(programs.items()))
        self._last_outcome: ChannelOutcome | None = None

    @property
    def running(self):
        return frozenset(self._running)

    def _poll(self):
        intents: dict[int, Message] = {}
        for machine in list(self._running):
            program = self._running[machine]
            try:
                step = program.send(self._last_outcome)
            except StopIteration:
                del self._running[machine]
                self.trace.terminal[machine] = Terminal(TerminalKind.HALTED, self.clock)
                continue
            if step is not None:
                intents[machine] = step
        return intents

    def _check_views(self):
        if self.views is None or not self._running:
            return
        machines = list(self._running)
        reference = self.views[machines[0]]
        for machine in machines[1:]:
            if self.views[machine] != reference:
                raise SimulationError(
                    f"replicated views diverged at round {self.clock}: "
                    f"machine {machine} differs from machine {machines[0]}"
                )

    def advance_round(self) -> RoundRecord | None:
        """Plays one round; returns None once every machine has halted or crashed."""
        intents = self._poll()
        if not self._running:
            return None
        self._check_views()
        if self.clock >= self.round_limit:
            self.trace.aborted = True
            raise RoundLimitExceeded(
                f"run exceeded its limit of {self.round_limit} rounds with machines "
                f"{sorted(self._running)} still running",
                trace=self.trace,
            )
        round_no = self.clock + 1
        crashes = self.adversary.decide_crashes(
            Observation(round_no, dict(intents), frozenset(self._running), self.trace.rounds)
        )
        for machine in sorted(crashes):
            program = self._running.pop(machine, None)
            if program is None:
                raise AdversaryViolation(f"machine {machine} is not running in round {round_no}")
            program.close()
            self.trace.terminal[machine] = Terminal(TerminalKind.CRASHED, round_no)
        surviving = [TransmissionIntent(v, payload) for v, payload in intents.items() if v not in crashes]
        outcome = resolve_channel(surviving)
        record = RoundRecord(
            round=round_no,
            intents=tuple(TransmissionIntent(v, intents[v]) for v in sorted(intents)),
            crashes=tuple(sorted(crashes)),
            outcome=outcome,
            worked=len(self._running),
        )
        self.trace.rounds.append(record)
        self._last_outcome = outcome
        self.clock = round_no
        return record

    def run(self) -> ExecutionTrace:
        while self.advance_round() is not None:
            pass
        logger.debug(
            "Run finished after %d rounds: %d halted, %d crashed",
            self.clock, len(self.trace.halted()), len(self.trace.crashed()),
        )
        return self.trace


def advance_round(simulation: Simulation) -> RoundRecord | None:
    return simulation.advance_round()
