from django.core.management.base import BaseCommand, CommandError

from scheduling.exceptions import ConfigurationError
from scheduling.harness import read_csv
from scheduling.models import SimulationResult
from scheduling.oracle import BOUND_KINDS, fit_constant, fitted_constants, spread

from ..helpers import CONFIG_ERROR, config_error


class Command(BaseCommand):
    help = 'Fits the empirical constant of a work bound over reliable result rows.'

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--csv', help='Result CSV written by run or sweep.')
        source.add_argument('--from-db', action='store_true', dest='from_db', help='Use stored results.')
        parser.add_argument('--sweep', type=int, help='Restrict stored results to one sweep id.')
        parser.add_argument('--algo', help='Only rows of this algorithm.')
        parser.add_argument('--kind', required=True, choices=BOUND_KINDS)

    def handle(self, *args, **options):
        try:
            if options['csv']:
                rows = read_csv(options['csv'])
            else:
                queryset = SimulationResult.objects.all()
                if options['sweep']:
                    queryset = queryset.filter(sweep_id=options['sweep'])
                rows = [result.to_row() for result in queryset]
        except (OSError, ConfigurationError) as exc:
            raise config_error(exc)

        if options['algo']:
            rows = [row for row in rows if row.algo == options['algo']]
        dropped = sum(1 for row in rows if not row.reliable)
        if dropped:
            self.stdout.write(self.style.NOTICE(f'Ignoring {dropped} unreliable rows.'))
        runs = [(row.work, row.bound_params(), options['kind']) for row in rows if row.reliable]
        if not runs:
            raise CommandError('No reliable rows to fit.', returncode=CONFIG_ERROR)

        try:
            constant = fit_constant(runs)
            constants = fitted_constants(runs)
        except ConfigurationError as exc:
            raise config_error(exc)
        self.stdout.write(f'kind={options["kind"]} runs={len(runs)} C={constant:.6f} '
                          f'min={min(constants):.6f} spread={spread(constants):.6f}')
        self.stdout.write(self.style.SUCCESS('Fitted constant computed.'))
