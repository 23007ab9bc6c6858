"""Hierarquia de erros e registro de rejeições de linhas."""

import time
from dataclasses import dataclass, field
from typing import List, Optional


class V2VError(Exception):
    """Erro base do pipeline de desvanecimento em larga escala."""


class ValidationError(V2VError):
    """Entrada inválida ou pré-condição violada (código de saída 2)."""


class DomainError(ValidationError, ValueError):
    """Argumento fora do domínio da operação (ex.: distância <= 0)."""


class ClassRequiredError(ValidationError):
    """Modelo condicionado à classe de enlace recebeu UNKNOWN."""


class EmptyDatasetError(ValidationError):
    """Conjunto de dados vazio."""


class InsufficientDataError(ValidationError):
    """Dados insuficientes para o ajuste (ex.: classe sem amostras)."""


class SchemaError(ValidationError):
    """Arquivo ou configuração fora do esquema esperado."""


class MonotonicityError(ValidationError):
    """Série temporal não monótona."""


class UnitSanityError(ValidationError):
    """Valor fisicamente implausível (ex.: perda fora de [20, 200] dB)."""


class OutOfSpanError(ValidationError):
    """Consulta fora do intervalo coberto (sem extrapolação silenciosa)."""


class DegenerateFitError(ValidationError):
    """Autocorrelação sem informação para o ajuste de Gudmundson."""


class DomainMismatchError(ValidationError):
    """Domínios (tempo/distância) ou espaçamentos incompatíveis."""


class PresetNotFoundError(ValidationError):
    """Preset inexistente."""


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3


def exit_code_for(exc: BaseException) -> int:
    """
    Mapeia uma exceção para o código de saída da CLI.

    Não convergência não é exceção: vem de FitResult.converged e vira
    EXIT_CONVERGENCE no próprio comando.

    Args:
        exc: Exceção capturada

    Returns:
        2 para validação, 1 para o resto
    """
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    return 1


@dataclass
class RowRejection:
    """Linha rejeitada na ingestão."""

    line: int
    reason: str
    column: Optional[str] = None
    timestamp: float = field(default_factory=time.time)

    def __str__(self) -> str:
        if self.column:
            return f"linha {self.line} [{self.column}]: {self.reason}"
        return f"linha {self.line}: {self.reason}"


class RejectionLog:
    """
    Acumula rejeições de linhas durante a ingestão.

    A ingestão não aborta em linhas ruins: cada uma é registrada com o
    número da linha no arquivo (cabeçalho = linha 1).
    """

    def __init__(self, source: str = ""):
        self.source = source
        self._rejections: List[RowRejection] = []

    @property
    def rejections(self) -> List[RowRejection]:
        """Histórico de rejeições."""
        return self._rejections.copy()

    def __len__(self) -> int:
        return len(self._rejections)

    def registrar(self, line: int, reason: str, column: Optional[str] = None) -> None:
        """Registra uma rejeição."""
        self._rejections.append(RowRejection(line, reason, column))

    def linhas(self) -> List[int]:
        """Números das linhas rejeitadas, em ordem."""
        return sorted({r.line for r in self._rejections})

    def summary(self, limite: int = 20) -> str:
        """
        Texto resumido das rejeições.

        Args:
            limite: Máximo de linhas detalhadas

        Returns:
            Resumo legível
        """
        if not self._rejections:
            return f"{self.source}: nenhuma linha rejeitada"
        linhas = [f"{self.source}: {len(self.linhas())} linha(s) rejeitada(s)"]
        for rejeicao in self._rejections[:limite]:
            linhas.append(f"  - {rejeicao}")
        if len(self._rejections) > limite:
            linhas.append(f"  ... e mais {len(self._rejections) - limite}")
        return "\n".join(linhas)
