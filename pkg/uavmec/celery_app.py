"""
Celery Application Configuration
Sweep entries run as tasks; with CELERY_TASK_ALWAYS_EAGER they run in-process.
"""
from celery import Celery

from uavmec.config import settings

celery_app = Celery(
    'uavmec',
    broker=settings.REDIS_URL,
    backend=settings.REDIS_URL,
    include=[
        'uavmec.services.sweep_tasks',   # Parameter sweep entries
    ]
)

celery_app.conf.update(
    # Task settings
    task_serializer='json',
    accept_content=['json'],
    result_serializer='json',
    enable_utc=True,

    # Task routing
    task_routes={
        'uavmec.services.sweep_tasks.*': {'queue': 'sweeps'},
    },

    # Task execution settings
    task_always_eager=settings.CELERY_TASK_ALWAYS_EAGER,
    task_eager_propagates=True,  # Entry errors surface in the caller
    task_acks_late=True,
    task_reject_on_worker_lost=True,
    task_time_limit=settings.SWEEP_TASK_TIME_LIMIT,
    task_soft_time_limit=settings.SWEEP_TASK_TIME_LIMIT - 60,

    # Result backend settings
    result_expires=24 * 3600,

    # Worker settings
    worker_prefetch_multiplier=1,  # Entries are long; don't hoard them
    worker_max_tasks_per_child=50,
)
