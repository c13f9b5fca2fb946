"""
Services package: simulation physics, environments, learners and the experiment harness.

Naming convention:
  *_env.py     decision processes (reset / step)
  *_tasks.py   Celery task modules
"""
