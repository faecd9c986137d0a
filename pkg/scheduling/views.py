import logging

from rest_framework import status, viewsets
from rest_framework.permissions import IsAuthenticated
from rest_framework.response import Response
from rest_framework.views import APIView

from .exceptions import ConfigurationError
from .harness import run_once
from .models import SimulationResult, Sweep
from .serializers import ScenarioConfigSerializer, SimulationResultSerializer, SweepSerializer

logger = logging.getLogger(__name__)

# --- API Views (Django REST Framework) ---

class SimulationResultViewSet(viewsets.ReadOnlyModelViewSet):
    """
    Stored result rows. Filter with ?algorithm=, ?sweep= and ?reliable=true|false.
    """
    serializer_class = SimulationResultSerializer

    def get_queryset(self):
        queryset = SimulationResult.objects.select_related('sweep')
        params = self.request.query_params
        if params.get('algorithm'):
            queryset = queryset.filter(algorithm=params['algorithm'])
        if params.get('sweep'):
            queryset = queryset.filter(sweep_id=params['sweep'])
        if params.get('reliable') in ('true', 'false'):
            queryset = queryset.filter(reliable=params['reliable'] == 'true')
        return queryset


class SweepViewSet(viewsets.ReadOnlyModelViewSet):
    """Stored sweeps with their row counts."""
    queryset = Sweep.objects.all()
    serializer_class = SweepSerializer


class ScenarioRunAPIView(APIView):
    """Runs every seed of one scenario config and returns the result rows."""
    permission_classes = [IsAuthenticated]

    def post(self, request):
        serializer = ScenarioConfigSerializer(data=request.data)
        if not serializer.is_valid():
            return Response(serializer.errors, status=status.HTTP_400_BAD_REQUEST)
        config = serializer.save()
        try:
            rows = [run_once(config, seed) for seed in config.seeds]
        except ConfigurationError as exc:
            return Response({"detail": str(exc)}, status=status.HTTP_400_BAD_REQUEST)
        if not all(row.reliable for row in rows):
            logger.error("API run of %s produced unreliable rows", config.algorithm)
        return Response({
            "reliable": all(row.reliable for row in rows),
            "results": [row.to_dict() for row in rows],
        })
