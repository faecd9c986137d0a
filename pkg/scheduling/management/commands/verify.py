from django.core.management.base import BaseCommand

from scheduling.core import Algorithm
from scheduling.exceptions import InstanceTooLarge
from scheduling.harness import simulation_setting
from scheduling.oracle import verify_tiny_instances

from ..helpers import config_error, parse_seeds, unreliable


class Command(BaseCommand):
    help = 'Checks reliability on every tiny instance against every crash strategy within budget.'

    def add_arguments(self, parser):
        parser.add_argument('--algo', action='append', choices=[algorithm.value for algorithm in Algorithm],
                            help='Repeat to check several; defaults to all three.')
        parser.add_argument('--max-machines', type=int, default=3)
        parser.add_argument('--max-length', type=int, default=5, help='Largest total job length L.')
        parser.add_argument('--max-f', type=int, default=2)
        parser.add_argument('--seeds', default='0..19', help='Seeds for the randomized scheduler.')
        parser.add_argument('--horizon', type=int,
                            help='Latest crash round in enumerated schedules; defaults to the longest '
                                 'failure-free run of each instance plus m.')
        parser.add_argument('--no-prune', action='store_true', help='Also crash machines that are not transmitting.')

    def handle(self, *args, **options):
        algorithms = options['algo'] or [algorithm.value for algorithm in Algorithm]
        verdicts = verify_tiny_instances(
            algorithms,
            max_machines=options['max_machines'],
            max_length=options['max_length'],
            max_f=options['max_f'],
            seeds=parse_seeds(options['seeds']),
            horizon=options['horizon'],
            prune=not options['no_prune'],
            node_cap=simulation_setting('EXHAUSTIVE_NODE_CAP'),
        )
        checked = runs = 0
        failures = []
        try:
            for verdict in verdicts:
                checked += 1
                runs += verdict.result.leaves
                if not verdict.result.all_reliable:
                    failures.append(verdict)
                    self.stdout.write(self.style.ERROR(
                        f'{verdict.algorithm} m={verdict.machines} jobs={list(verdict.lengths)} f={verdict.f}: '
                        f'unreliable (worst script {verdict.result.worst_script})'
                    ))
        except InstanceTooLarge as exc:
            raise config_error(exc)

        summary = f'Checked {checked} instances over {runs} runs for {", ".join(algorithms)}.'
        if failures:
            raise unreliable(f'{summary} {len(failures)} instances had unreliable runs.')
        self.stdout.write(self.style.SUCCESS(f'{summary} Every run was reliable.'))
