"""Workers para processamento em threads."""

from .sweep_worker import SweepWorker

__all__ = ['SweepWorker']
