"""Histórico das execuções da CLI (blocos de proveniência)."""

import json
import os
from datetime import datetime
from typing import Any, Dict, List, Tuple

from loguru import logger


class RunHistory:
    """
    Mantém o histórico das execuções com tamanho máximo.

    A entrada mais recente fica no início da lista.
    """

    MAX_ENTRADAS = 100

    def __init__(self, data_dir: str = "data"):
        """
        Inicializa o histórico.

        Args:
            data_dir: Diretório do arquivo history.json
        """
        self._data_dir = data_dir
        self._arquivo_historico = os.path.join(data_dir, "history.json")
        self._historico: List[Dict[str, Any]] = []

        os.makedirs(data_dir, exist_ok=True)
        self._carregar_arquivo()

    def _carregar_arquivo(self) -> None:
        if not os.path.exists(self._arquivo_historico):
            self._historico = []
            return
        try:
            with open(self._arquivo_historico, 'r', encoding='utf-8') as f:
                self._historico = json.load(f).get('historico', [])
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Histórico ilegível em {self._arquivo_historico}, reiniciando: {e}")
            self._historico = []

    def _salvar_arquivo(self) -> bool:
        try:
            with open(self._arquivo_historico, 'w', encoding='utf-8', newline='\n') as f:
                json.dump({'historico': self._historico}, f, indent=2, ensure_ascii=False)
                f.write('\n')
            return True
        except OSError as e:
            logger.error(f"Erro ao salvar histórico: {e}")
            return False

    def adicionar(self, entrada: Dict[str, Any]) -> bool:
        """
        Adiciona uma execução ao histórico.

        Args:
            entrada: Bloco de proveniência (comando, entradas, semente...)

        Returns:
            True se salvo com sucesso
        """
        entrada = dict(entrada)
        entrada.setdefault('data_hora', datetime.now().isoformat(timespec='seconds'))
        self._historico.insert(0, entrada)
        del self._historico[self.MAX_ENTRADAS:]
        return self._salvar_arquivo()

    def listar(self, limite: int = 50, comando: str = "") -> List[Dict[str, Any]]:
        """
        Lista execuções, opcionalmente só de um comando.

        Args:
            limite: Número máximo de entradas
            comando: Filtra pelo nome do comando (vazio = todos)
        """
        entradas = self._historico
        if comando:
            entradas = [e for e in entradas if e.get('command') == comando]
        return entradas[:limite]

    def limpar(self) -> Tuple[bool, str]:
        """
        Limpa todo o histórico.

        Returns:
            Tupla (sucesso, mensagem)
        """
        self._historico.clear()
        if self._salvar_arquivo():
            return True, "Histórico limpo"
        return False, "Erro ao limpar histórico"

    @property
    def tamanho(self) -> int:
        return len(self._historico)
