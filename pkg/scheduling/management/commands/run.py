from django.core.management.base import BaseCommand

from scheduling.core import Algorithm
from scheduling.exceptions import ConfigurationError
from scheduling.harness import CSV_HEADER, simulate, write_csv
from scheduling.serializers import ScenarioConfigSerializer

from ..helpers import config_error, load_json, parse_seeds, unreliable, validated


class Command(BaseCommand):
    help = 'Runs one scenario for each seed and prints its CSV result rows.'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON scenario file; command-line flags override its fields.')
        parser.add_argument('--algo', choices=[algorithm.value for algorithm in Algorithm])
        parser.add_argument('--mode', help='preemptive or non-preemptive (defaults to the algorithm\'s model).')
        parser.add_argument('--machines', type=int)
        parser.add_argument('--jobs', help='kind:params, e.g. unit:16 or one_long:16,64.')
        parser.add_argument('--adversary', help='none, silencer, leader_hunter, random:p, schedule:path, random_schedule:H.')
        parser.add_argument('--f', type=int, help='Crash budget.')
        parser.add_argument('--seed', '--seeds', dest='seeds', help='A seed, a list 1,2,3 or a range 0..9.')
        parser.add_argument('--round-limit', type=int, dest='round_limit')
        parser.add_argument('--out', help='Write the CSV here instead of stdout.')
        parser.add_argument('--trace', help='Export the trace of the first seed to this file.')

    def handle(self, *args, **options):
        data = load_json(options['config']) if options['config'] else {}
        overrides = {
            'algorithm': options['algo'],
            'mode': options['mode'],
            'machines': options['machines'],
            'jobs': options['jobs'],
            'adversary': options['adversary'],
            'f': options['f'],
            'round_limit': options['round_limit'],
            'output': options['out'],
        }
        data.update({key: value for key, value in overrides.items() if value is not None})
        if options['seeds']:
            data['seeds'] = parse_seeds(options['seeds'])
        config, _ = validated(ScenarioConfigSerializer, data)

        rows = []
        try:
            for index, seed in enumerate(config.seeds):
                row, trace = simulate(config, seed)
                rows.append(row)
                if index == 0 and options['trace']:
                    with open(options['trace'], 'w') as stream:
                        trace.export(stream)
        except ConfigurationError as exc:
            raise config_error(exc)

        if config.output:
            write_csv(rows, config.output)
            self.stdout.write(self.style.SUCCESS(f'Wrote {len(rows)} rows to {config.output}.'))
        else:
            self.stdout.write(','.join(CSV_HEADER))
            for row in rows:
                self.stdout.write(','.join(row.as_csv()))

        failed = [row.seed for row in rows if not row.reliable]
        if failed:
            raise unreliable(f'Unreliable runs for seeds {failed}.')
