from rest_framework import serializers

from .adversary import KINDS as ADVERSARY_KINDS
from .core import Algorithm
from .exceptions import ConfigurationError
from .harness import (
    JOB_KINDS,
    ScenarioConfig,
    SweepConfig,
    normalize_mode,
    parse_adversary_argument,
    parse_jobs_spec,
)
from .models import SimulationResult, Sweep

ALGORITHMS = [algorithm.value for algorithm in Algorithm]
ADVERSARY_PREFIXES = set(ADVERSARY_KINDS) | {'random_schedule'}


class StrictFieldsMixin:
    """Rejects keys the serializer does not declare, so typos in config files fail fast."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)


class SeedsField(serializers.Field):
    """Either an explicit list of seeds or {"count": k, "base": b} meaning b, b+1, ..., b+k-1."""

    default_error_messages = {
        'invalid': 'Seeds must be a list of integers or an object with "count" and "base".',
        'empty': 'At least one seed is required.',
        'range': 'Seeds must be 64-bit unsigned integers.',
    }

    def to_internal_value(self, data):
        if isinstance(data, dict):
            if set(data) - {'count', 'base'} or 'count' not in data:
                self.fail('invalid')
            try:
                count, base = int(data['count']), int(data.get('base', 0))
            except (TypeError, ValueError):
                self.fail('invalid')
            seeds = [base + k for k in range(count)]
        elif isinstance(data, list):
            try:
                seeds = [int(seed) for seed in data]
            except (TypeError, ValueError):
                self.fail('invalid')
        else:
            self.fail('invalid')
        if not seeds:
            self.fail('empty')
        if any(not 0 <= seed < 2 ** 64 for seed in seeds):
            self.fail('range')
        return tuple(seeds)

    def to_representation(self, value):
        return list(value)


def validate_jobs_text(value):
    try:
        parse_jobs_spec(value)
    except ConfigurationError as exc:
        raise serializers.ValidationError(str(exc))
    return value


def validate_adversary_text(value):
    if value.partition(':')[0] not in ADVERSARY_PREFIXES:
        raise serializers.ValidationError(
            f"Unknown adversary {value!r}; expected one of {', '.join(sorted(ADVERSARY_PREFIXES))}."
        )
    try:
        parse_adversary_argument(value)
    except ConfigurationError as exc:
        raise serializers.ValidationError(str(exc))
    return value


class ScenarioConfigSerializer(StrictFieldsMixin, serializers.Serializer):
    """Validates one scenario: a single algorithm, machine count, job spec and adversary."""
    algorithm = serializers.ChoiceField(choices=ALGORITHMS)
    mode = serializers.CharField(required=False, allow_null=True, default=None)
    machines = serializers.IntegerField(min_value=1)
    jobs = serializers.CharField(help_text=f"kind:params with kind in {', '.join(JOB_KINDS)}")
    adversary = serializers.CharField(default='none')
    f = serializers.IntegerField(min_value=0, default=0)
    seeds = SeedsField(default=(0,))
    round_limit = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    output = serializers.CharField(required=False, allow_null=True, default=None)

    def validate_jobs(self, value):
        return validate_jobs_text(value)

    def validate_adversary(self, value):
        return validate_adversary_text(value)

    def validate_mode(self, value):
        try:
            mode = normalize_mode(value)
        except ConfigurationError as exc:
            raise serializers.ValidationError(str(exc))
        return mode.value if mode else None

    def validate(self, attrs):
        if attrs['f'] > attrs['machines'] - 1:
            raise serializers.ValidationError({'f': 'The crash budget must satisfy 0 <= f <= machines - 1.'})
        algorithm = Algorithm(attrs['algorithm'])
        if attrs.get('mode') and attrs['mode'] != algorithm.mode.value:
            raise serializers.ValidationError({'mode': f"{algorithm.value} runs in the {algorithm.mode.value} model."})
        kind = attrs['adversary'].partition(':')[0]
        if algorithm is Algorithm.RANSCATRI and kind in ('silencer', 'leader_hunter', 'random'):
            raise serializers.ValidationError({'adversary': 'ranscatri only runs against non-adaptive adversaries.'})
        return attrs

    def create(self, validated_data):
        return ScenarioConfig(**validated_data)


class SweepConfigSerializer(StrictFieldsMixin, serializers.Serializer):
    """Validates a sweep grid: every axis is a list, crossed with the seeds."""
    name = serializers.CharField(required=False, default='sweep')
    algorithm = serializers.ListField(child=serializers.ChoiceField(choices=ALGORITHMS), min_length=1)
    machines = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)
    jobs = serializers.ListField(child=serializers.CharField(validators=[validate_jobs_text]), min_length=1)
    adversary = serializers.ListField(
        child=serializers.CharField(validators=[validate_adversary_text]), min_length=1, default=['none']
    )
    f = serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=1, default=[0])
    seeds = SeedsField(default=(0,))
    round_limit = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    output = serializers.CharField(required=False, allow_null=True, default=None)

    def create(self, validated_data):
        data = dict(validated_data)
        data.pop('name', None)
        for axis in ('algorithm', 'machines', 'jobs', 'adversary', 'f'):
            data[axis] = tuple(data[axis])
        return SweepConfig(**data)


class SimulationResultSerializer(serializers.ModelSerializer):
    sweep_name = serializers.CharField(source='sweep.name', read_only=True, default=None)
    seed = serializers.IntegerField(read_only=True)

    class Meta:
        model = SimulationResult
        fields = [
            'id', 'sweep', 'sweep_name', 'position', 'algorithm', 'machines', 'jobs', 'total_length',
            'longest_job', 'budget', 'adversary', 'seed', 'work', 'rounds', 'reliable',
            'bound_pre', 'bound_nonpre', 'bound_rand', 'created_at',
        ]
        read_only_fields = fields


class SweepSerializer(serializers.ModelSerializer):
    result_count = serializers.IntegerField(source='results.count', read_only=True)

    class Meta:
        model = Sweep
        fields = ['id', 'name', 'config', 'created_at', 'result_count']
        read_only_fields = fields
