import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Sweep',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=100)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='SimulationResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('position', models.PositiveIntegerField(default=0)),
                ('algorithm', models.CharField(choices=[('scatri', 'ScaTri'), ('deftri', 'DefTri'), ('ranscatri', 'RanScaTri')], max_length=16)),
                ('machines', models.PositiveIntegerField()),
                ('jobs', models.PositiveIntegerField()),
                ('total_length', models.PositiveIntegerField()),
                ('longest_job', models.PositiveIntegerField()),
                ('budget', models.PositiveIntegerField(default=0)),
                ('adversary', models.CharField(default='none', max_length=32)),
                ('seed', models.CharField(default='0', max_length=20)),
                ('work', models.PositiveBigIntegerField()),
                ('rounds', models.PositiveIntegerField()),
                ('reliable', models.BooleanField(default=True)),
                ('bound_pre', models.FloatField()),
                ('bound_nonpre', models.FloatField()),
                ('bound_rand', models.FloatField()),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('sweep', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.CASCADE, related_name='results', to='scheduling.sweep')),
            ],
            options={
                'ordering': ['sweep', 'position'],
            },
        ),
    ]
