from django.core.management.base import BaseCommand
from django.db import transaction

from scheduling.exceptions import ConfigurationError
from scheduling.harness import rows_to_csv, sweep
from scheduling.models import SimulationResult, Sweep
from scheduling.serializers import SweepConfigSerializer

from ..helpers import config_error, load_json, unreliable, validated


class Command(BaseCommand):
    help = 'Runs every cell of a configuration grid and writes one CSV row per (cell, seed).'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='JSON sweep file.')
        parser.add_argument('--out', help='CSV destination (defaults to the config\'s output, else stdout).')
        parser.add_argument('--store', action='store_true', help='Also save the rows to the database.')
        parser.add_argument('--backend', choices=['inline', 'celery'], help='Where cells run.')

    def handle(self, *args, **options):
        data = load_json(options['config'])
        grid, validated_data = validated(SweepConfigSerializer, data)
        try:
            rows = sweep(grid, backend=options['backend'])
        except ConfigurationError as exc:
            raise config_error(exc)

        text = rows_to_csv(rows)
        output = options['out'] or grid.output
        if output:
            with open(output, 'w', newline='') as stream:
                stream.write(text)
            self.stdout.write(self.style.SUCCESS(f'Wrote {len(rows)} rows to {output}.'))
        else:
            self.stdout.write(text, ending='')

        if options['store']:
            with transaction.atomic():
                stored = Sweep.objects.create(name=validated_data['name'], config=data)
                SimulationResult.objects.bulk_create(
                    SimulationResult.from_row(row, sweep=stored, position=index)
                    for index, row in enumerate(rows)
                )
            self.stdout.write(self.style.SUCCESS(f'Stored sweep #{stored.pk} with {len(rows)} rows.'))

        failed = sum(1 for row in rows if not row.reliable)
        if failed:
            raise unreliable(f'{failed} of {len(rows)} runs were unreliable.')
