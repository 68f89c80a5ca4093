"""
Celery tasks for long-running experiments and scenario runs.
"""
import logging
from pathlib import Path
from typing import Optional

from celery import shared_task

from .experiments import run_experiment, write_table
from .options import build_config
from .runner import ScenarioRunner

logger = logging.getLogger(__name__)


@shared_task
def run_experiment_task(name: str, params: Optional[dict] = None, out: Optional[str] = None) -> dict:
    """Run one experiment and write its table to `out/<name>.tsv` when an output directory is given."""
    logger.info(f"Starting experiment {name}")
    header, rows = run_experiment(name, params or {})
    path = None
    if out:
        path = str(write_table(header, rows, Path(out) / f"{name}.tsv"))
    return {'name': name, 'header': header, 'rows': rows, 'path': path}


@shared_task
def run_scenario_task(config_data: dict, base_dir: Optional[str] = None) -> dict:
    """Run a scenario from plain config data and return its summary."""
    config = build_config(config_data, base_dir=Path(base_dir) if base_dir else None)
    summary = ScenarioRunner(config).run()
    return summary.to_dict()
