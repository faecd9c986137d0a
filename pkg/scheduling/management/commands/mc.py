import csv

from django.core.management.base import BaseCommand

from scheduling.core import ceil_div_pow2
from scheduling.exceptions import ConfigurationError
from scheduling.harness import simulation_setting
from scheduling.oracle import MC_FIELDS, mc_hypergeometric_tail, mc_lone_broadcast, mc_mix_and_test

from ..helpers import config_error


class Command(BaseCommand):
    help = 'Monte Carlo checks of the election and crash-sampling probabilities; prints CSV rows.'

    def add_arguments(self, parser):
        parser.add_argument('--experiment', required=True, choices=['hypergeometric', 'mix_and_test', 'lone_broadcast'])
        parser.add_argument('--samples', type=int, help='Samples (or trials for mix_and_test).')
        parser.add_argument('--seed', type=int, default=0)
        # hypergeometric
        parser.add_argument('--M', type=int, dest='M', help='Live machines (defaults: 2048, ceil(m/2^i), x).')
        parser.add_argument('--leaders', type=int, default=64)
        parser.add_argument('--crashed', type=int, default=1024)
        parser.add_argument('--threshold', type=int, default=48)
        # mix_and_test
        parser.add_argument('--i', type=int, dest='i', default=0)
        parser.add_argument('--L', type=int, dest='L', default=256)
        parser.add_argument('--m', type=int, dest='m', default=64)
        # lone_broadcast
        parser.add_argument('--x', type=int, dest='x', default=64, help='Coin denominator.')

    def handle(self, *args, **options):
        experiment = options['experiment']
        samples = options['samples']
        machines = options['M']
        try:
            if experiment == 'hypergeometric':
                estimate = mc_hypergeometric_tail(
                    machines or 2048, options['leaders'], options['crashed'], options['threshold'],
                    samples or simulation_setting('MC_DEFAULT_SAMPLES'), options['seed'],
                )
            elif experiment == 'mix_and_test':
                estimate = mc_mix_and_test(
                    options['i'], options['L'], options['m'],
                    machines or ceil_div_pow2(options['m'], options['i']), samples or 200, options['seed'],
                    mix_rounds_factor=simulation_setting('MIX_AND_TEST_ROUNDS_FACTOR'),
                )
            else:
                estimate = mc_lone_broadcast(
                    machines or options['x'], options['x'],
                    samples or simulation_setting('MC_DEFAULT_SAMPLES'), options['seed'],
                )
        except ConfigurationError as exc:
            raise config_error(exc)

        writer = csv.DictWriter(self.stdout, fieldnames=MC_FIELDS, lineterminator='\n')
        writer.writeheader()
        writer.writerow(estimate.as_row())
