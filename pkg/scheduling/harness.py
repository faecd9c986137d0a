"""
Experiment plumbing: job-set generators, scenario configuration, single runs,
grid sweeps and the CSV result format.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, replace
from itertools import product
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
from django.conf import settings

from .adversary import (
    ADAPTIVE_KINDS,
    AdversarySpec,
    load_schedule,
    random_schedule,
)
from .algorithms import execute
from .core import Algorithm, JobSet, Mode, SimEnv, default_round_limit, total_work, verify_reliability
from .exceptions import ConfigurationError, RoundLimitExceeded
from .oracle import NONPREEMPTIVE, PREEMPTIVE, RANDOMIZED, BoundParams, bound_eval

logger = logging.getLogger(__name__)

DEFAULT_SIMULATION = {
    'ROUND_LIMIT_FACTOR': 64,
    'EXHAUSTIVE_NODE_CAP': 200_000,
    'MIX_AND_TEST_ROUNDS_FACTOR': 4,
    'CHECK_REPLICATED_VIEWS': False,
    'SWEEP_BACKEND': 'inline',
    'MC_DEFAULT_SAMPLES': 100_000,
}

CSV_HEADER = (
    'algo', 'm', 'n', 'L', 'alpha', 'f', 'adversary', 'seed', 'work', 'rounds', 'reliable',
    'bound_pre', 'bound_nonpre', 'bound_rand',
)

JOB_KINDS = ('unit', 'equal', 'one_long', 'uniform', 'lengths')


def simulation_setting(name: str):
    return getattr(settings, 'SIMULATION', {}).get(name, DEFAULT_SIMULATION[name])


# --- Job sets ---

def generate_jobs(kind: str, params: Iterable[int], seed: int = 0) -> JobSet:
    """
    unit(n), equal(n, length), one_long(n, alpha), uniform(n, lo, hi) or an
    explicit list of lengths. Job ids are 1..n in generation order.
    """
    params = [int(value) for value in params]
    expected = {'unit': 1, 'equal': 2, 'one_long': 2, 'uniform': 3}
    if kind not in JOB_KINDS:
        raise ConfigurationError(f"unknown job kind {kind!r}; expected one of {', '.join(JOB_KINDS)}")
    if kind != 'lengths' and len(params) != expected[kind]:
        raise ConfigurationError(f"job kind {kind} takes {expected[kind]} parameters, got {len(params)}")
    if kind == 'lengths':
        lengths = params
    else:
        n = params[0]
        if n < 1:
            raise ConfigurationError(f"a job set needs at least one job, got n={n}")
        if kind == 'unit':
            lengths = [1] * n
        elif kind == 'equal':
            lengths = [params[1]] * n
        elif kind == 'one_long':
            lengths = [1] * (n - 1) + [params[1]]
        else:
            lo, hi = params[1], params[2]
            if lo < 1 or lo > hi:
                raise ConfigurationError(f"uniform lengths need 1 <= lo <= hi, got lo={lo}, hi={hi}")
            lengths = np.random.default_rng(seed).integers(lo, hi + 1, size=n).tolist()
    if not lengths:
        raise ConfigurationError("a job set needs at least one job")
    if min(lengths) < 1:
        raise ConfigurationError(f"job lengths must be at least 1, got {lengths}")
    return JobSet.from_lengths(lengths)


def parse_jobs_spec(text: str) -> tuple[str, tuple[int, ...]]:
    """`kind:p1,p2,...`, e.g. `unit:16`, `one_long:16,64`, `lengths:1,1,5`."""
    kind, _, raw = text.partition(':')
    try:
        params = tuple(int(part) for part in raw.split(',') if part.strip())
    except ValueError:
        raise ConfigurationError(f"job spec {text!r} has non-integer parameters")
    if kind not in JOB_KINDS:
        raise ConfigurationError(f"unknown job kind {kind!r}; expected one of {', '.join(JOB_KINDS)}")
    return kind, params


def parse_adversary_argument(text: str):
    """Splits `kind:argument` and converts the argument; the value is None when the kind takes none."""
    kind, _, argument = text.partition(':')
    if kind == 'random':
        try:
            return kind, float(argument) if argument else 0.1
        except ValueError:
            raise ConfigurationError(f"random adversary needs a probability, got {argument!r}")
    if kind == 'schedule':
        if not argument:
            raise ConfigurationError("schedule adversary needs a file: schedule:<path>")
        return kind, argument
    if kind == 'random_schedule':
        try:
            horizon = int(argument) if argument else 32
        except ValueError:
            raise ConfigurationError(f"random_schedule needs an integer horizon, got {argument!r}")
        if horizon < 1:
            raise ConfigurationError(f"random_schedule horizon must be at least 1, got {horizon}")
        return kind, horizon
    return kind, None


def parse_adversary_spec(text: str, f: int, machine_count: int, seed: int = 0) -> AdversarySpec:
    """
    `none`, `silencer`, `leader_hunter`, `random:p`, `schedule:path` or
    `random_schedule:horizon` (a schedule drawn from the run seed).
    """
    kind, argument = parse_adversary_argument(text)
    if kind == 'random':
        return AdversarySpec(budget=f, kind='random', p=argument, seed=seed)
    if kind == 'schedule':
        return AdversarySpec(budget=f, kind='schedule', schedule=load_schedule(argument))
    if kind == 'random_schedule':
        return AdversarySpec(budget=f, kind='schedule', schedule=random_schedule(machine_count, f, argument, seed))
    return AdversarySpec(budget=f, kind=kind)


def normalize_mode(mode: str | None) -> Mode | None:
    if mode in (None, ''):
        return None
    aliases = {'nonpreemptive': Mode.NONPREEMPTIVE, 'non_preemptive': Mode.NONPREEMPTIVE}
    try:
        return aliases.get(mode) or Mode(mode)
    except ValueError:
        raise ConfigurationError(f"unknown mode {mode!r}; expected preemptive or non-preemptive")


# --- Scenarios ---

@dataclass(frozen=True)
class ScenarioConfig:
    algorithm: str
    machines: int
    jobs: str
    adversary: str = 'none'
    f: int = 0
    seeds: tuple[int, ...] = (0,)
    mode: str | None = None
    round_limit: int | None = None
    output: str | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("a scenario needs at least one seed")
        object.__setattr__(self, 'seeds', tuple(self.seeds))

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, seeds=(seed,))

    def to_dict(self) -> dict:
        data = asdict(self)
        data['seeds'] = list(self.seeds)
        return data


@dataclass(frozen=True)
class ResultRow:
    algo: str
    m: int
    n: int
    L: int
    alpha: int
    f: int
    adversary: str
    seed: int
    work: int
    rounds: int
    reliable: bool
    bound_pre: float
    bound_nonpre: float
    bound_rand: float

    def as_csv(self) -> list[str]:
        return [
            self.algo, str(self.m), str(self.n), str(self.L), str(self.alpha), str(self.f),
            self.adversary, str(self.seed), str(self.work), str(self.rounds),
            'true' if self.reliable else 'false',
            f"{self.bound_pre:.6f}", f"{self.bound_nonpre:.6f}", f"{self.bound_rand:.6f}",
        ]

    @classmethod
    def from_csv(cls, record: dict) -> ResultRow:
        return cls(
            algo=record['algo'], m=int(record['m']), n=int(record['n']), L=int(record['L']),
            alpha=int(record['alpha']), f=int(record['f']), adversary=record['adversary'],
            seed=int(record['seed']), work=int(record['work']), rounds=int(record['rounds']),
            reliable=record['reliable'].strip().lower() == 'true',
            bound_pre=float(record['bound_pre']), bound_nonpre=float(record['bound_nonpre']),
            bound_rand=float(record['bound_rand']),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def bound_params(self) -> BoundParams:
        return BoundParams(m=self.m, n=self.n, L=self.L, alpha=self.alpha, f=self.f)


def build_env(config: ScenarioConfig, seed: int) -> SimEnv:
    kind, params = parse_jobs_spec(config.jobs)
    jobset = generate_jobs(kind, params, seed)
    adversary = parse_adversary_spec(config.adversary, config.f, config.machines, seed)
    round_limit = config.round_limit or default_round_limit(
        jobset, config.machines, simulation_setting('ROUND_LIMIT_FACTOR')
    )
    return SimEnv(
        machine_count=config.machines,
        jobset=jobset,
        adversary=adversary,
        seed=seed,
        algorithm=config.algorithm,
        mode=normalize_mode(config.mode),
        round_limit=round_limit,
    )


def simulate(config: ScenarioConfig, seed: int | None = None):
    """Runs one seed of a scenario and returns (row, trace)."""
    seed = config.seeds[0] if seed is None else seed
    env = build_env(config, seed)
    try:
        trace = execute(
            env,
            mix_rounds_factor=simulation_setting('MIX_AND_TEST_ROUNDS_FACTOR'),
            check_views=simulation_setting('CHECK_REPLICATED_VIEWS'),
        )
    except RoundLimitExceeded as exc:
        logger.error("%s (algorithm %s, seed %d)", exc, env.algorithm.value, seed)
        trace = exc.trace
    verdict = verify_reliability(trace, env.jobset, env.mode)
    work = total_work(trace) if trace.is_complete else trace.ledger_work()
    params = BoundParams.for_jobs(env.jobset, env.m, env.f)
    row = ResultRow(
        algo=env.algorithm.value,
        m=env.m,
        n=env.jobset.n,
        L=env.jobset.total_length,
        alpha=env.jobset.longest,
        f=env.f,
        adversary=env.adversary.label,
        seed=seed,
        work=work,
        rounds=trace.length,
        reliable=verdict.reliable,
        bound_pre=bound_eval(PREEMPTIVE, params),
        bound_nonpre=bound_eval(NONPREEMPTIVE, params),
        bound_rand=bound_eval(RANDOMIZED, params),
    )
    return row, trace


def run_once(config: ScenarioConfig, seed: int | None = None) -> ResultRow:
    return simulate(config, seed)[0]


# --- Sweeps ---

@dataclass(frozen=True)
class SweepConfig:
    algorithm: tuple[str, ...]
    machines: tuple[int, ...]
    jobs: tuple[str, ...]
    adversary: tuple[str, ...] = ('none',)
    f: tuple[int, ...] = (0,)
    seeds: tuple[int, ...] = (0,)
    round_limit: int | None = None
    output: str | None = None

    def expand(self) -> list[tuple[ScenarioConfig, int]]:
        return expand_grid(self)


def cell_is_valid(algorithm: str, machines: int, adversary: str, f: int) -> bool:
    if not 0 <= f <= machines - 1:
        return False
    kind = adversary.partition(':')[0]
    return not (Algorithm(algorithm) is Algorithm.RANSCATRI and kind in ADAPTIVE_KINDS)


def expand_grid(grid: SweepConfig) -> list[tuple[ScenarioConfig, int]]:
    """Cartesian product of the axes in their given order, then seeds."""
    cells = []
    skipped = 0
    for algorithm, machines, jobs, adversary, f in product(
        grid.algorithm, grid.machines, grid.jobs, grid.adversary, grid.f
    ):
        if not cell_is_valid(algorithm, machines, adversary, f):
            skipped += 1
            continue
        config = ScenarioConfig(
            algorithm=algorithm, machines=machines, jobs=jobs, adversary=adversary, f=f,
            seeds=grid.seeds, round_limit=grid.round_limit,
        )
        cells.extend((config, seed) for seed in grid.seeds)
    if skipped:
        logger.warning("Skipped %d grid cells whose budget or adversary does not fit the algorithm", skipped)
    return cells


def sweep(grid: SweepConfig, backend: str | None = None) -> list[ResultRow]:
    """One row per cell, in grid order regardless of where cells ran."""
    backend = backend or simulation_setting('SWEEP_BACKEND')
    cells = expand_grid(grid)
    if backend == 'inline':
        return [run_once(config, seed) for config, seed in cells]
    if backend == 'celery':
        from .tasks import run_cell

        pending = [run_cell.delay(config.to_dict(), seed) for config, seed in cells]
        return [ResultRow(**result.get()) for result in pending]
    raise ConfigurationError(f"unknown sweep backend {backend!r}; expected inline or celery")


def write_csv(rows: Iterable[ResultRow], target: str | Path | TextIO) -> None:
    if isinstance(target, (str, Path)):
        with open(target, 'w', newline='') as stream:
            write_csv(rows, stream)
        return
    writer = csv.writer(target, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buffer = io.StringIO()
    write_csv(rows, buffer)
    return buffer.getvalue()


def read_csv(source: str | Path | TextIO) -> list[ResultRow]:
    if isinstance(source, (str, Path)):
        with open(source, newline='') as stream:
            return read_csv(stream)
    reader = csv.DictReader(source)
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ConfigurationError(f"unexpected CSV header {reader.fieldnames}")
    return [ResultRow.from_csv(record) for record in reader]
