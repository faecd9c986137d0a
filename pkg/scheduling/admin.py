from django.contrib import admin
from .models import Sweep, SimulationResult

# --- Custom ModelAdmin classes ---

class SimulationResultInline(admin.TabularInline):
    model = SimulationResult
    extra = 0
    fields = ('position', 'algorithm', 'machines', 'total_length', 'budget', 'adversary', 'seed', 'work', 'reliable')
    readonly_fields = fields
    can_delete = False


@admin.register(Sweep)
class SweepAdmin(admin.ModelAdmin):
    """Admin configuration for the Sweep model."""
    list_display = ('name', 'created_at', 'result_count')
    search_fields = ('name',)
    ordering = ('-created_at',)
    inlines = [SimulationResultInline]

    def result_count(self, obj):
        """Number of stored rows."""
        return obj.results.count()
    result_count.short_description = 'Rows'


@admin.register(SimulationResult)
class SimulationResultAdmin(admin.ModelAdmin):
    """Admin configuration for the SimulationResult model."""
    list_display = (
        'algorithm',
        'machines',
        'total_length',
        'budget',
        'adversary',
        'seed',
        'work',
        'rounds',
        'reliable',
    )
    list_filter = ('algorithm', 'adversary', 'reliable', 'sweep')
    search_fields = ('sweep__name', 'algorithm', 'adversary')
    readonly_fields = ('created_at',)
