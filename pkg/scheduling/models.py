from django.db import models

from .harness import ResultRow


class Sweep(models.Model):
    """A stored batch of simulation runs over a configuration grid."""
    name = models.CharField(max_length=100)
    config = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return self.name

    @property
    def all_reliable(self):
        return not self.results.filter(reliable=False).exists()

    def to_dict(self):
        """Returns the sweep with its result rows in grid order."""
        return {
            'id': self.pk,
            'name': self.name,
            'config': self.config,
            'created_at': self.created_at.isoformat() if self.created_at else None,
            'results': [result.to_dict() for result in self.results.order_by('position')],
        }


class SimulationResult(models.Model):
    """One scenario run: the CSV row of a single (config, seed) cell."""
    ALGORITHM_CHOICES = [
        ('scatri', 'ScaTri'),
        ('deftri', 'DefTri'),
        ('ranscatri', 'RanScaTri'),
    ]
    sweep = models.ForeignKey(Sweep, on_delete=models.CASCADE, related_name='results', null=True, blank=True)
    position = models.PositiveIntegerField(default=0)
    algorithm = models.CharField(max_length=16, choices=ALGORITHM_CHOICES)
    machines = models.PositiveIntegerField()
    jobs = models.PositiveIntegerField()
    total_length = models.PositiveIntegerField()
    longest_job = models.PositiveIntegerField()
    budget = models.PositiveIntegerField(default=0)
    adversary = models.CharField(max_length=32, default='none')
    # decimal text: seeds reach 2**64 - 1, past SQLite's signed 64-bit integers
    seed = models.CharField(max_length=20, default='0')
    work = models.PositiveBigIntegerField()
    rounds = models.PositiveIntegerField()
    reliable = models.BooleanField(default=True)
    bound_pre = models.FloatField()
    bound_nonpre = models.FloatField()
    bound_rand = models.FloatField()
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['sweep', 'position']

    def __str__(self):
        return f"{self.algorithm} m={self.machines} L={self.total_length} f={self.budget} seed={self.seed}: work {self.work}"

    @classmethod
    def from_row(cls, row, sweep=None, position=0):
        """Builds an unsaved result from a harness ResultRow."""
        return cls(
            sweep=sweep,
            position=position,
            algorithm=row.algo,
            machines=row.m,
            jobs=row.n,
            total_length=row.L,
            longest_job=row.alpha,
            budget=row.f,
            adversary=row.adversary,
            seed=str(row.seed),
            work=row.work,
            rounds=row.rounds,
            reliable=row.reliable,
            bound_pre=row.bound_pre,
            bound_nonpre=row.bound_nonpre,
            bound_rand=row.bound_rand,
        )

    def to_row(self):
        return ResultRow(
            algo=self.algorithm, m=self.machines, n=self.jobs, L=self.total_length,
            alpha=self.longest_job, f=self.budget, adversary=self.adversary, seed=int(self.seed),
            work=self.work, rounds=self.rounds, reliable=self.reliable,
            bound_pre=self.bound_pre, bound_nonpre=self.bound_nonpre, bound_rand=self.bound_rand,
        )

    def to_dict(self):
        return self.to_row().to_dict()
