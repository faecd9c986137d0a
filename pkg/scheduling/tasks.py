import logging

from celery import shared_task

from .harness import ScenarioConfig, run_once

logger = logging.getLogger(__name__)


@shared_task(name='scheduling.run_cell')
def run_cell(config, seed):
    """Runs one sweep cell and returns its result row as a plain dict."""
    row = run_once(ScenarioConfig(**config), seed)
    if not row.reliable:
        logger.error("Cell %s seed %d produced an unreliable run", config, seed)
    return row.to_dict()
