from django.urls import path, include
from rest_framework.routers import DefaultRouter
from .views import (
    ScenarioRunAPIView,
    SimulationResultViewSet,
    SweepViewSet,
)

# basename is needed for the results viewset since its queryset is built per request
router = DefaultRouter()
router.register(r'results', SimulationResultViewSet, basename='result')
router.register(r'sweeps', SweepViewSet, basename='sweep')

app_name = 'api'

urlpatterns = [
    # Single-scenario execution
    path('run/', ScenarioRunAPIView.as_view(), name='run'),

    # Router URLs for stored results and sweeps
    path('', include(router.urls)),
]
