"""Gerenciador de presets de parâmetros (modelos e sombreamento)."""

import json
import os
from datetime import datetime
from typing import Any, Dict, List, Tuple

from loguru import logger

from core.models import Domain, PathLossModel
from utils.errors import PresetNotFoundError, SchemaError

DEFAULT_DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")

TIPOS = ("modelo", "sombreamento")


class PresetManager:
    """
    Gerencia presets de parâmetros publicados ou salvos pelo usuário.

    Salva e carrega os presets em data/presets.json. Presets do tipo
    'modelo' guardam um documento de PathLossModel; os do tipo
    'sombreamento' guardam sigma, scale e domain.
    """

    def __init__(self, data_dir: str = DEFAULT_DATA_DIR):
        """
        Inicializa o gerenciador.

        Args:
            data_dir: Diretório do arquivo presets.json
        """
        self._data_dir = data_dir
        self._arquivo_presets = os.path.join(data_dir, "presets.json")
        self._presets: Dict[str, Dict[str, Any]] = {}

        os.makedirs(data_dir, exist_ok=True)
        self._carregar_arquivo()

    def _carregar_arquivo(self) -> None:
        """Carrega presets do arquivo JSON."""
        if not os.path.exists(self._arquivo_presets):
            self._presets = {}
            return
        try:
            with open(self._arquivo_presets, 'r', encoding='utf-8') as f:
                self._presets = json.load(f).get('presets', {})
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Erro ao carregar presets de {self._arquivo_presets}: {e}")
            self._presets = {}

    def _salvar_arquivo(self) -> bool:
        """Salva presets no arquivo JSON."""
        try:
            with open(self._arquivo_presets, 'w', encoding='utf-8', newline='\n') as f:
                json.dump({'presets': self._presets}, f, indent=2, ensure_ascii=False)
                f.write('\n')
            return True
        except OSError as e:
            logger.error(f"Erro ao salvar presets: {e}")
            return False

    @staticmethod
    def _validar(dados: Dict[str, Any]) -> None:
        tipo = dados.get('tipo')
        if tipo not in TIPOS:
            raise SchemaError(f"Tipo de preset inválido: {tipo!r}")
        if tipo == 'modelo':
            PathLossModel.from_dict(dados.get('modelo', {}))
        else:
            sombra = dados.get('sombreamento', {})
            if 'scale' not in sombra:
                raise SchemaError("Preset de sombreamento sem 'scale'")
            Domain.parse(sombra.get('domain', 'time'))

    def salvar(self, nome: str, dados: Dict[str, Any]) -> Tuple[bool, str]:
        """
        Salva um preset novo.

        Args:
            nome: Nome do preset
            dados: Dicionário com tipo, descricao e modelo/sombreamento

        Returns:
            Tupla (sucesso, mensagem)
        """
        nome = nome.strip()
        if not nome:
            return False, "Nome do preset não pode ser vazio"
        if nome in self._presets:
            return False, f"Preset '{nome}' já existe"
        try:
            self._validar(dados)
        except SchemaError as e:
            return False, str(e)

        dados = dict(dados)
        dados.setdefault('data_criacao', datetime.now().isoformat(timespec='seconds'))
        self._presets[nome] = dados

        if self._salvar_arquivo():
            return True, f"Preset '{nome}' salvo com sucesso"
        del self._presets[nome]
        return False, "Erro ao salvar preset"

    def salvar_modelo(self, nome: str, model: PathLossModel, descricao: str = "") -> Tuple[bool, str]:
        """Salva um modelo ajustado como preset."""
        return self.salvar(nome, {'tipo': 'modelo', 'descricao': descricao, 'modelo': model.to_dict()})

    def carregar(self, nome: str) -> Tuple[bool, Any]:
        """
        Carrega um preset.

        Returns:
            Tupla (sucesso, dados_preset ou mensagem)
        """
        if nome not in self._presets:
            return False, f"Preset '{nome}' não encontrado"
        return True, self._presets[nome]

    def _obter(self, nome: str, tipo: str) -> Dict[str, Any]:
        ok, dados = self.carregar(nome)
        if not ok:
            disponiveis = ", ".join(sorted(self._presets)) or "nenhum"
            raise PresetNotFoundError(f"{dados} (disponíveis: {disponiveis})")
        if dados.get('tipo') != tipo:
            raise SchemaError(f"Preset '{nome}' não é do tipo {tipo}")
        return dados

    def carregar_modelo(self, nome: str) -> PathLossModel:
        """
        Modelo de perda de um preset.

        Raises:
            PresetNotFoundError: Preset inexistente
            SchemaError: Preset de outro tipo ou malformado
        """
        return PathLossModel.from_dict(self._obter(nome, 'modelo')['modelo'])

    def carregar_sombreamento(self, nome: str) -> Dict[str, Any]:
        """Parâmetros (sigma, scale, domain) de um preset de sombreamento."""
        return dict(self._obter(nome, 'sombreamento')['sombreamento'])

    def deletar(self, nome: str) -> Tuple[bool, str]:
        """
        Deleta um preset.

        Returns:
            Tupla (sucesso, mensagem)
        """
        if nome not in self._presets:
            return False, f"Preset '{nome}' não encontrado"
        removido = self._presets.pop(nome)
        if self._salvar_arquivo():
            return True, f"Preset '{nome}' deletado"
        self._presets[nome] = removido
        return False, "Erro ao deletar preset"

    def listar_todos(self) -> List[Dict[str, Any]]:
        """
        Lista todos os presets.

        Returns:
            Lista ordenada por nome com nome, tipo, família e descrição
        """
        resultado = []
        for nome, dados in self._presets.items():
            resultado.append({
                'nome': nome,
                'tipo': dados.get('tipo', ''),
                'familia': dados.get('modelo', {}).get('family', ''),
                'descricao': dados.get('descricao', ''),
                'data_criacao': dados.get('data_criacao', ''),
            })
        return sorted(resultado, key=lambda x: x['nome'])

    def existe(self, nome: str) -> bool:
        """Verifica se um preset existe."""
        return nome in self._presets
