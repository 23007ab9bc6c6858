"""Configuração do loguru para a CLI."""

import sys

from loguru import logger

LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")

_FORMATO = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{line} - {message}"


def configure_logging(level: str = "INFO") -> None:
    """
    Substitui o sink padrão por um sink em stderr no nível pedido.

    Args:
        level: Nível mínimo (um de LOG_LEVELS)
    """
    level = level.upper()
    if level not in LOG_LEVELS:
        raise ValueError(f"Nível de log inválido: {level}")
    logger.remove()
    logger.add(sys.stderr, level=level, format=_FORMATO)
