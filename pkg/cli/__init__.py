"""Interface de linha de comando."""

from .main import main

__all__ = ['main']
