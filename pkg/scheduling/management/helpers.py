"""Shared plumbing for the simulation management commands."""
import json
from pathlib import Path

from django.core.management.base import CommandError

CONFIG_ERROR = 2
RELIABILITY_ERROR = 1


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise CommandError(f"Cannot read config file {path}: {exc}", returncode=CONFIG_ERROR)
    except json.JSONDecodeError as exc:
        raise CommandError(f"Config file {path} is not valid JSON: {exc}", returncode=CONFIG_ERROR)


def validated(serializer_class, data):
    """Runs a config serializer and returns the harness object it builds."""
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        raise CommandError(f"Invalid configuration: {json.dumps(serializer.errors)}", returncode=CONFIG_ERROR)
    return serializer.save(), serializer.validated_data


def config_error(exc):
    return CommandError(str(exc), returncode=CONFIG_ERROR)


def unreliable(message):
    return CommandError(message, returncode=RELIABILITY_ERROR)


def parse_seeds(text):
    """`7` or `1,2,3` or `0..19`."""
    try:
        if '..' in text:
            low, high = (int(part) for part in text.split('..'))
            return list(range(low, high + 1))
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise CommandError(f"Cannot parse seeds {text!r}", returncode=CONFIG_ERROR)

