"""
Celery configuration for long-running experiment and scenario tasks.
"""
import os
from celery import Celery

# Set the default Django settings module for the 'celery' program.
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'speakerid.settings')

app = Celery('speakerid')

# Using a string here means the worker doesn't have to serialize
# the configuration object to child processes.
app.config_from_object('django.conf:settings', namespace='CELERY')

# Load task modules from all registered Django apps.
app.autodiscover_tasks()

app.conf.task_routes = {
    'pipeline.tasks.run_experiment_task': {'queue': 'experiments'},
    'pipeline.tasks.run_scenario_task': {'queue': 'scenarios'},
}

app.conf.worker_prefetch_multiplier = 1
app.conf.task_acks_late = True
app.conf.result_expires = 3600  # 1 hour
