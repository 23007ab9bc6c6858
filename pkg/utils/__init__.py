"""Utilitários da aplicação."""

from .errors import RejectionLog, V2VError
from .logging_setup import configure_logging

__all__ = ['RejectionLog', 'V2VError', 'configure_logging']
