"""
Crash-failure adversaries.

A non-adaptive adversary fixes its (machine, round) crashes before the run
starts. An adaptive one decides online: each round it sees the history and
the current round's transmission intents before choosing whom to crash.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import MessageKind, Observation
from .exceptions import AdversaryViolation, ConfigurationError

logger = logging.getLogger(__name__)

NONE = 'none'
SCHEDULE = 'schedule'
SILENCER = 'silencer'
LEADER_HUNTER = 'leader_hunter'
RANDOM = 'random'

KINDS = (NONE, SCHEDULE, SILENCER, LEADER_HUNTER, RANDOM)
ADAPTIVE_KINDS = frozenset({SILENCER, LEADER_HUNTER, RANDOM})

__all__ = [
    'Adversary', 'AdversarySpec', 'CrashSchedule', 'LeaderHunter', 'NoAdversary', 'Observation',
    'RandomCrasher', 'ScheduleAdversary', 'ScriptedAdversary', 'Silencer', 'build_adversary',
    'decide_crashes', 'format_schedule', 'load_schedule', 'parse_schedule', 'random_schedule',
    'validate_schedule',
]


@dataclass(frozen=True)
class CrashSchedule:
    crashes: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'crashes', tuple(sorted((int(v), int(r)) for v, r in self.crashes)))

    def __len__(self):
        return len(self.crashes)

    def machines(self) -> list[int]:
        return [machine for machine, _ in self.crashes]

    def effective_round(self, machine: int) -> int | None:
        for crashed, round_no in self.crashes:
            if crashed == machine:
                return max(round_no, 1)
        return None


@dataclass(frozen=True)
class AdversarySpec:
    budget: int = 0
    kind: str = NONE
    schedule: CrashSchedule | None = None
    p: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown adversary kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.budget < 0:
            raise ConfigurationError("crash budget cannot be negative")
        if self.kind == SCHEDULE and self.schedule is None:
            raise ConfigurationError("a schedule adversary needs a crash schedule")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError(f"crash probability must lie in [0, 1], got {self.p}")

    @property
    def adaptive(self) -> bool:
        return self.kind in ADAPTIVE_KINDS

    @property
    def label(self) -> str:
        if self.kind == RANDOM:
            return f"random:{self.p:g}"
        return self.kind


def validate_schedule(schedule: CrashSchedule, f: int, m: int) -> None:
    """Raises ConfigurationError unless the schedule is legal for budget f on m machines."""
    if not 0 <= f <= m - 1:
        raise ConfigurationError(f"budget f={f} must satisfy 0 <= f <= m-1 = {m - 1}")
    machines = schedule.machines()
    duplicates = sorted({v for v in machines if machines.count(v) > 1})
    if duplicates:
        raise ConfigurationError(f"machines {duplicates} are scheduled to crash more than once")
    unknown = sorted(v for v in machines if not 1 <= v <= m)
    if unknown:
        raise ConfigurationError(f"machines {unknown} do not exist in a system of {m}")
    if any(round_no < 0 for _, round_no in schedule.crashes):
        raise ConfigurationError("crash rounds must be non-negative")
    if len(schedule) > f:
        raise ConfigurationError(f"schedule crashes {len(schedule)} machines but the budget is {f}")


def parse_schedule(text: str) -> CrashSchedule:
    """Parses `machine,round` lines; blank lines and `#` comments are ignored."""
    crashes = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        try:
            machine, round_no = (int(part) for part in line.split(','))
        except ValueError:
            raise ConfigurationError(f"schedule line {number}: expected 'machine,round', got {raw!r}")
        crashes.append((machine, round_no))
    return CrashSchedule(tuple(crashes))


def load_schedule(path: str | Path) -> CrashSchedule:
    try:
        return parse_schedule(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read schedule file {path}: {exc}")


def format_schedule(schedule: CrashSchedule) -> str:
    return ''.join(f"{machine},{round_no}\n" for machine, round_no in schedule.crashes)


def random_schedule(m: int, f: int, horizon: int, seed: int) -> CrashSchedule:
    """f distinct machines, each crashing in a uniformly drawn round of 1..horizon."""
    if not 0 <= f <= m - 1:
        raise ConfigurationError(f"budget f={f} must satisfy 0 <= f <= m-1 = {m - 1}")
    if horizon < 1:
        raise ConfigurationError("schedule horizon must be positive")
    rng = np.random.default_rng(seed)
    machines = rng.choice(np.arange(1, m + 1), size=f, replace=False)
    rounds = rng.integers(1, horizon + 1, size=f)
    return CrashSchedule(tuple(zip(machines.tolist(), rounds.tolist())))


# --- Strategies ---

class Adversary:
    """Base strategy: never crashes anything. Subclasses override `choose`."""
    kind = NONE
    adaptive = False

    def __init__(self, budget: int = 0):
        self.budget = budget
        self.used = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.used

    def choose(self, observation: Observation) -> Iterable[int]:
        return ()

    def decide_crashes(self, observation: Observation) -> frozenset[int]:
        chosen = frozenset(self.choose(observation))
        if not chosen <= observation.running:
            raise AdversaryViolation(
                f"{self.kind} adversary tried to crash {sorted(chosen - observation.running)} "
                f"in round {observation.round}, which are not running"
            )
        if len(chosen) > self.remaining:
            raise AdversaryViolation(
                f"{self.kind} adversary tried to crash {len(chosen)} machines with {self.remaining} left in its budget"
            )
        if chosen:
            logger.debug("Round %d: %s adversary crashes %s", observation.round, self.kind, sorted(chosen))
        self.used += len(chosen)
        return chosen


class NoAdversary(Adversary):
    pass


class ScheduleAdversary(Adversary):
    """Crashes as declared up front; the decision depends on the round number only."""
    kind = SCHEDULE

    def __init__(self, schedule: CrashSchedule, budget: int):
        super().__init__(budget)
        self.schedule = schedule

    def choose(self, observation):
        return [
            machine for machine, round_no in self.schedule.crashes
            if max(round_no, 1) == observation.round and machine in observation.running
        ]


class Silencer(Adversary):
    """Crashes any machine about to broadcast alone."""
    kind = SILENCER
    adaptive = True

    def choose(self, observation):
        if self.remaining > 0 and len(observation.intents) == 1:
            return list(observation.intents)
        return ()


class LeaderHunter(Adversary):
    """
    Tracks the replicated machine list from the channel alone: every election
    message heard moves its sender to the front. Crashes the head of that list
    whenever it is about to transmit.
    """
    kind = LEADER_HUNTER
    adaptive = True

    def __init__(self, budget: int, machine_count: int):
        super().__init__(budget)
        self.order = list(range(1, machine_count + 1))
        self._seen = 0

    def _catch_up(self, history):
        for record in history[self._seen:]:
            outcome = record.outcome
            if getattr(outcome, 'payload', None) is not None and outcome.payload.kind is MessageKind.ELECT:
                self.order.remove(outcome.sender)
                self.order.insert(0, outcome.sender)
        self._seen = len(history)

    def head(self, running) -> int | None:
        return next((machine for machine in self.order if machine in running), None)

    def choose(self, observation):
        self._catch_up(observation.history)
        if self.remaining <= 0:
            return ()
        head = self.head(observation.running)
        if head is not None and head in observation.intents:
            return [head]
        return ()


class RandomCrasher(Adversary):
    """Crashes each running machine with probability p per round until the budget runs out."""
    kind = RANDOM
    adaptive = True

    def __init__(self, budget: int, p: float, seed: int):
        super().__init__(budget)
        self.p = p
        self.rng = np.random.default_rng(seed)

    def choose(self, observation):
        chosen = []
        for machine in sorted(observation.running):
            if len(chosen) >= self.remaining:
                break
            if self.rng.random() < self.p:
                chosen.append(machine)
        return chosen


class ScriptedAdversary(Adversary):
    """
    Replays a fixed prefix of per-round decisions and crashes nobody after it,
    recording at every later round which crash sets were available. The
    exhaustive oracle explores those alternatives one run at a time.
    """
    kind = 'scripted'
    adaptive = True

    def __init__(self, budget: int, script: tuple[frozenset[int], ...] = (), prune: bool = True):
        super().__init__(budget)
        self.script = script
        self.prune = prune
        self.options: dict[int, list[frozenset[int]]] = {}

    def candidates(self, observation) -> list[int]:
        # Crashing a silent machine is never worse for the adversary than crashing it at its next broadcast.
        pool = observation.intents if self.prune else observation.running
        return sorted(pool)

    def choose(self, observation):
        index = observation.round - 1
        if index < len(self.script):
            return self.script[index]
        if self.remaining > 0:
            pool = self.candidates(observation)
            subsets = []
            for size in range(1, min(self.remaining, len(pool)) + 1):
                subsets.extend(_subsets(pool, size))
            if subsets:
                self.options[observation.round] = subsets
        return ()


def _subsets(pool, size):
    return [frozenset(subset) for subset in combinations(pool, size)]


def build_adversary(spec: AdversarySpec, machine_count: int) -> Adversary:
    if spec.budget > max(machine_count - 1, 0):
        raise ConfigurationError(
            f"crash budget f={spec.budget} must satisfy 0 <= f <= m-1 = {machine_count - 1}"
        )
    if spec.kind == NONE:
        return NoAdversary(spec.budget)
    if spec.kind == SCHEDULE:
        validate_schedule(spec.schedule, spec.budget, machine_count)
        return ScheduleAdversary(spec.schedule, spec.budget)
    if spec.kind == SILENCER:
        return Silencer(spec.budget)
    if spec.kind == LEADER_HUNTER:
        return LeaderHunter(spec.budget, machine_count)
    return RandomCrasher(spec.budget, spec.p, spec.seed)


def decide_crashes(adversary: Adversary, observation: Observation) -> frozenset[int]:
    return adversary.decide_crashes(observation)
