"""Módulo services - Ajuste, correlação, simulação e fusão."""

from .preset_manager import PresetManager
from .run_history import RunHistory

__all__ = ['PresetManager', 'RunHistory']
