"""Testes do gerenciador de presets e do histórico de execuções."""

import json
import shutil

import pytest

from core.models import ModelFamily, PathLossModel
from services.preset_manager import DEFAULT_DATA_DIR, PresetManager
from services.run_history import RunHistory
from utils.errors import PresetNotFoundError, SchemaError


@pytest.fixture
def gerenciador(tmp_path):
    """Cópia dos presets publicados num diretório temporário."""
    shutil.copy(f"{DEFAULT_DATA_DIR}/presets.json", tmp_path / "presets.json")
    return PresetManager(str(tmp_path))


class TestPresetManager:
    """Presets de modelo e de sombreamento."""

    def test_published_presets_load(self, gerenciador):
        nomes = [p['nome'] for p in gerenciador.listar_todos()]
        assert nomes == sorted(nomes)
        for nome in ('ss_campaign1', 'per_class_campaign1', 'dsss_campaign1', 'dsds_campaign1', 'dsds_campaign2'):
            assert isinstance(gerenciador.carregar_modelo(nome), PathLossModel)

    def test_dsds_campaign1_values(self, gerenciador):
        model = gerenciador.carregar_modelo('dsds_campaign1')
        assert model.family is ModelFamily.DSDS
        assert model.params.gamma2 == 3.14
        assert model.d_break == 35.0

    def test_shadowing_preset(self, gerenciador):
        sombra = gerenciador.carregar_sombreamento('shadowing_distance_campaign1')
        assert sombra['scale'] == 159.0
        assert sombra['domain'] == 'distance'

    def test_unknown_preset(self, gerenciador):
        with pytest.raises(PresetNotFoundError):
            gerenciador.carregar_modelo('nao_existe')

    def test_wrong_type(self, gerenciador):
        with pytest.raises(SchemaError):
            gerenciador.carregar_modelo('shadowing_time_campaign1')

    def test_save_and_reload(self, gerenciador, tmp_path, dsds_model):
        ok, _ = gerenciador.salvar_modelo('meu_ajuste', dsds_model, "ajuste local")
        assert ok
        novo = PresetManager(str(tmp_path))
        assert novo.existe('meu_ajuste')
        assert novo.carregar_modelo('meu_ajuste').to_dict() == dsds_model.to_dict()

    def test_duplicate_name_rejected(self, gerenciador, dsds_model):
        ok, mensagem = gerenciador.salvar_modelo('dsds_campaign1', dsds_model)
        assert not ok
        assert "já existe" in mensagem

    def test_invalid_document_rejected(self, gerenciador):
        ok, _ = gerenciador.salvar('ruim', {'tipo': 'modelo', 'modelo': {'l_ref': 1.0}})
        assert not ok
        assert not gerenciador.existe('ruim')

    def test_delete(self, gerenciador, tmp_path):
        ok, _ = gerenciador.deletar('ss_campaign1')
        assert ok
        with open(tmp_path / "presets.json", encoding='utf-8') as f:
            assert 'ss_campaign1' not in json.load(f)['presets']
        assert gerenciador.deletar('ss_campaign1')[0] is False

    def test_corrupt_file_starts_empty(self, tmp_path):
        (tmp_path / "presets.json").write_text("{nao e json", encoding='utf-8')
        assert PresetManager(str(tmp_path)).listar_todos() == []


class TestRunHistory:
    """Histórico limitado de execuções."""

    def test_newest_first(self, tmp_path):
        historico = RunHistory(str(tmp_path))
        historico.adicionar({'command': 'fit'})
        historico.adicionar({'command': 'compare'})
        assert [e['command'] for e in historico.listar()] == ['compare', 'fit']
        assert 'data_hora' in historico.listar()[0]

    def test_filter_by_command(self, tmp_path):
        historico = RunHistory(str(tmp_path))
        for comando in ('fit', 'synth', 'fit'):
            historico.adicionar({'command': comando})
        assert len(historico.listar(comando='fit')) == 2

    def test_capped_size(self, tmp_path):
        historico = RunHistory(str(tmp_path))
        for i in range(RunHistory.MAX_ENTRADAS + 5):
            historico.adicionar({'command': 'fit', 'i': i})
        assert historico.tamanho == RunHistory.MAX_ENTRADAS
        assert historico.listar(limite=1)[0]['i'] == RunHistory.MAX_ENTRADAS + 4

    def test_persisted_and_cleared(self, tmp_path):
        RunHistory(str(tmp_path)).adicionar({'command': 'fit'})
        historico = RunHistory(str(tmp_path))
        assert historico.tamanho == 1
        ok, _ = historico.limpar()
        assert ok
        assert RunHistory(str(tmp_path)).tamanho == 0
