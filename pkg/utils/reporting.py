"""Escrita de relatórios JSON/CSV e bloco de proveniência."""

import hashlib
import json
import math
import os
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, Optional

import numpy as np
import pandas as pd

from version import __version__

FLOAT_FORMAT = "%.9g"


def format_float(valor: float) -> str:
    """Float com 9 dígitos significativos (sem perda no CSV)."""
    return FLOAT_FORMAT % valor


def sha256_file(caminho: str) -> str:
    """Hash SHA-256 do conteúdo de um arquivo."""
    h = hashlib.sha256()
    with open(caminho, 'rb') as f:
        for bloco in iter(lambda: f.read(1 << 20), b''):
            h.update(bloco)
    return h.hexdigest()


def provenance(command: str, inputs: Iterable[str] = (), seed: Optional[int] = None,
               extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Bloco de proveniência anexado a todo relatório.

    Args:
        command: Comando da CLI
        inputs: Arquivos de entrada (hash SHA-256 de cada um)
        seed: Semente usada
        extra: Chaves adicionais

    Returns:
        Dicionário serializável
    """
    bloco = {
        'command': command,
        'version': __version__,
        'seed': seed,
        'inputs': {os.path.basename(p): sha256_file(p) for p in inputs if p},
        'created_at': datetime.now(timezone.utc).isoformat(timespec='seconds'),
    }
    if extra:
        bloco.update(extra)
    return bloco


def _json_seguro(valor: Any) -> Any:
    """Converte tipos numpy e floats não finitos para JSON estrito."""
    if isinstance(valor, dict):
        return {str(k): _json_seguro(v) for k, v in valor.items()}
    if isinstance(valor, (list, tuple)):
        return [_json_seguro(v) for v in valor]
    if isinstance(valor, np.ndarray):
        return [_json_seguro(v) for v in valor.tolist()]
    if isinstance(valor, (np.bool_, bool)):
        return bool(valor)
    if isinstance(valor, np.integer):
        return int(valor)
    if isinstance(valor, (float, np.floating)):
        valor = float(valor)
        if math.isnan(valor):
            return None
        if math.isinf(valor):
            return "inf" if valor > 0 else "-inf"
        return valor
    if hasattr(valor, 'value') and isinstance(getattr(valor, 'value'), str):
        return valor.value
    return valor


def _garantir_diretorio(caminho: str) -> None:
    pasta = os.path.dirname(os.path.abspath(caminho))
    os.makedirs(pasta, exist_ok=True)


def write_json(caminho: str, dados: Dict[str, Any]) -> None:
    """Grava um relatório JSON (UTF-8, indentado, terminado em LF)."""
    _garantir_diretorio(caminho)
    with open(caminho, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(_json_seguro(dados), f, indent=2, ensure_ascii=False)
        f.write('\n')


def read_json(caminho: str) -> Dict[str, Any]:
    with open(caminho, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_csv(caminho: str, tabela: pd.DataFrame) -> None:
    """Grava uma tabela CSV com floats em 9 dígitos significativos."""
    _garantir_diretorio(caminho)
    tabela.to_csv(caminho, index=False, float_format=FLOAT_FORMAT, lineterminator='\n', encoding='utf-8')
