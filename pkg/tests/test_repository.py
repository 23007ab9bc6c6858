"""Testes de ingestão e exportação de campanhas."""

import os
import time

import numpy as np
import pytest

from conftest import campanha_iid
from core.models import LinkClass
from core.repository import (RAW_FILES, CampaignRepository, export_processed, export_raw,
                             ingest_links, ingest_processed, ingest_raw)
from services.channel_simulator import corrupt_distances
from utils.errors import (EmptyDatasetError, MonotonicityError, RejectionLog, SchemaError,
                          UnitSanityError)

CABECALHO = "run_id,t_s,d_m,path_loss_db,censored,link,v_tx_mps,v_rx_mps\n"


def _escrever(caminho, linhas, cabecalho=CABECALHO):
    with open(caminho, 'w', encoding='utf-8') as f:
        f.write(cabecalho)
        f.write("\n".join(linhas) + "\n")
    return str(caminho)


class TestIngestProcessed:
    """Leitura linha a linha com rejeições."""

    def test_valid_file(self, tmp_path):
        caminho = _escrever(tmp_path / "c.csv", [
            "r1,0.0,10.0,70.0,false,LOS,10,10",
            "r1,0.5,12.0,115.0,true,los,10,10",
        ])
        data = ingest_processed(caminho, 110.6)
        assert len(data) == 2
        assert data.n_censored == 1
        assert data.records[1].link is LinkClass.LOS

    def test_zero_distance_rejected_with_line_number(self, tmp_path):
        caminho = _escrever(tmp_path / "c.csv", [
            "r1,0.0,10.0,70.0,false,LOS,0,0",
            "r1,0.5,0,70.0,false,LOS,0,0",
            "r1,1.0,11.0,71.0,false,LOS,0,0",
        ])
        log = RejectionLog(caminho)
        data = ingest_processed(caminho, 110.6, log)
        assert len(data) == 2
        assert log.linhas() == [3]
        assert log.rejections[0].column == 'd_m'

    def test_out_of_range_path_loss_rejected(self, tmp_path):
        caminho = _escrever(tmp_path / "c.csv", [
            "r1,0.0,10.0,70.0,,,,",
            "r1,0.5,10.0,5.0,,,,",
            "r1,1.0,10.0,abc,,,,",
        ])
        log = RejectionLog(caminho)
        ingest_processed(caminho, 110.6, log)
        assert log.linhas() == [3, 4]

    def test_received_power_column_is_unit_error(self, tmp_path):
        """Potência recebida em dBm no lugar da perda: arquivo inteiro recusado."""
        caminho = _escrever(tmp_path / "c.csv", [
            "r1,0.0,10.0,-70.0,,,,",
            "r1,0.5,10.0,-95.5,,,,",
            "r1,1.0,10.0,abc,,,,",
        ])
        with pytest.raises(UnitSanityError, match="path_loss_db"):
            ingest_processed(caminho, 110.6)

    def test_duplicate_instant_rejected(self, tmp_path):
        caminho = _escrever(tmp_path / "c.csv", [
            "r1,0.0,10.0,70.0,,,,",
            "r1,0.0,10.0,71.0,,,,",
        ])
        log = RejectionLog(caminho)
        data = ingest_processed(caminho, 110.6, log)
        assert len(data) == 1
        assert log.linhas() == [3]

    def test_inconsistent_flag_recomputed(self, tmp_path):
        """A flag segue sempre o nível de censura pedido."""
        caminho = _escrever(tmp_path / "c.csv", [
            "r1,0.0,10.0,115.0,false,,,",
            "r1,1.0,10.0,70.0,true,,,",
        ])
        data = ingest_processed(caminho, 110.6)
        np.testing.assert_array_equal(data.arrays.censored, [True, False])

    def test_optional_columns_default(self, tmp_path):
        caminho = _escrever(tmp_path / "c.csv", ["r1,0.0,10.0,70.0"], "run_id,t_s,d_m,path_loss_db\n")
        registro = ingest_processed(caminho, 110.6).records[0]
        assert registro.link is LinkClass.UNKNOWN
        assert registro.v_rx == 0.0

    def test_rows_sorted_by_run_and_time(self, tmp_path):
        caminho = _escrever(tmp_path / "c.csv", [
            "r2,0.0,10.0,70.0,,,,",
            "r1,1.0,10.0,70.0,,,,",
            "r1,0.0,10.0,70.0,,,,",
        ])
        data = ingest_processed(caminho, 110.6)
        assert [(r.run_id, r.t) for r in data] == [("r1", 0.0), ("r1", 1.0), ("r2", 0.0)]

    def test_missing_column_raises(self, tmp_path):
        caminho = _escrever(tmp_path / "c.csv", ["r1,0.0,10.0"], "run_id,t_s,d_m\n")
        with pytest.raises(SchemaError):
            ingest_processed(caminho, 110.6)

    def test_all_rows_invalid_raises(self, tmp_path):
        caminho = _escrever(tmp_path / "c.csv", ["r1,0.0,-1,70.0,,,,"])
        with pytest.raises(EmptyDatasetError):
            ingest_processed(caminho, 110.6)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(SchemaError):
            ingest_processed(str(tmp_path / "nao_existe.csv"), 110.6)


class TestExportProcessed:
    """Exportação e releitura."""

    def test_csv_preserves_records(self, tmp_path, small_dsds_campaign):
        caminho = str(tmp_path / "saida.csv")
        export_processed(small_dsds_campaign, caminho)
        relido = ingest_processed(caminho, small_dsds_campaign.censor_level)
        assert len(relido) == len(small_dsds_campaign)
        np.testing.assert_allclose(relido.arrays.path_loss, small_dsds_campaign.arrays.path_loss, rtol=1e-8)
        np.testing.assert_array_equal(relido.arrays.censored, small_dsds_campaign.arrays.censored)

    def test_xlsx_by_extension(self, tmp_path, small_dsds_campaign):
        pequeno = small_dsds_campaign.subset(np.arange(len(small_dsds_campaign)) < 50)
        caminho = str(tmp_path / "saida.xlsx")
        export_processed(pequeno, caminho)
        assert len(ingest_processed(caminho, pequeno.censor_level)) == 50

    def test_extra_columns(self, tmp_path, small_dsds_campaign):
        pequeno = small_dsds_campaign.subset(np.arange(len(small_dsds_campaign)) < 3)
        caminho = str(tmp_path / "saida.csv")
        export_processed(pequeno, caminho, {'d_source': ['FUSED', 'GPS_ONLY', 'FUSED']})
        with open(caminho, encoding='utf-8') as f:
            cabecalho = f.readline().strip().split(',')
        assert cabecalho[-1] == 'd_source'

    def test_simulated_campaign_ingests_without_rejections(self, tmp_path, dsds_model):
        data = campanha_iid(dsds_model, 3000, seed=2)
        caminho = str(tmp_path / "sim.csv")
        export_processed(data, caminho)
        log = RejectionLog(caminho)
        ingest_processed(caminho, data.censor_level, log)
        assert len(log) == 0


class TestRawStreams:
    """Fluxos brutos e rótulos de enlace."""

    def test_export_and_ingest(self, tmp_path, dsds_model):
        data = campanha_iid(dsds_model, 2000, seed=1, v_rx=((0, 10.0),))
        raw = corrupt_distances(data, seed=2)
        caminhos = export_raw(raw, str(tmp_path))
        assert set(caminhos) == set(RAW_FILES)
        relido = ingest_raw(caminhos['gps_tx'], caminhos['gps_rx'], caminhos['uwb'], caminhos['rf'])
        assert len(relido.gps_tx) == len(raw.gps_tx)
        np.testing.assert_allclose(relido.gps_tx.lat, raw.gps_tx.lat, atol=1e-9)
        np.testing.assert_allclose(relido.rf.values, raw.rf.values, rtol=1e-8)

    def test_bad_rows_rejected(self, tmp_path):
        for nome, conteudo in {
            'tx.csv': "t,lat,lon\n0,52.0,16.0\n1,95.0,16.0\n2,52.0,16.0\n",
            'rx.csv': "t,lat,lon\n0,52.0,16.0\n1,52.0,16.0\n2,52.0,16.0\n",
            'uwb.csv': "t,range_m\n0.5,10.0\n",
            'rf.csv': "t,path_loss_db\n0.0,70.0\n0.5,x\n",
        }.items():
            (tmp_path / nome).write_text(conteudo, encoding='utf-8')
        log = RejectionLog("brutos")
        raw = ingest_raw(*(str(tmp_path / n) for n in ('tx.csv', 'rx.csv', 'uwb.csv', 'rf.csv')), rejeicoes=log)
        assert len(raw.gps_tx) == 2
        assert len(raw.rf) == 1
        assert len(log) == 2

    def test_time_going_backwards(self, tmp_path):
        (tmp_path / "rf.csv").write_text("t,path_loss_db\n1.0,70.0\n0.5,71.0\n", encoding='utf-8')
        (tmp_path / "gps.csv").write_text("t,lat,lon\n0,52.0,16.0\n", encoding='utf-8')
        (tmp_path / "uwb.csv").write_text("t,range_m\n", encoding='utf-8')
        gps = str(tmp_path / "gps.csv")
        with pytest.raises(MonotonicityError):
            ingest_raw(gps, gps, str(tmp_path / "uwb.csv"), str(tmp_path / "rf.csv"))

    def test_raw_rf_in_dbm_is_unit_error(self, tmp_path):
        (tmp_path / "rf.csv").write_text("t,path_loss_db\n0.0,-70.0\n0.5,-71.0\n", encoding='utf-8')
        (tmp_path / "gps.csv").write_text("t,lat,lon\n0,52.0,16.0\n", encoding='utf-8')
        (tmp_path / "uwb.csv").write_text("t,range_m\n", encoding='utf-8')
        gps = str(tmp_path / "gps.csv")
        with pytest.raises(UnitSanityError):
            ingest_raw(gps, gps, str(tmp_path / "uwb.csv"), str(tmp_path / "rf.csv"))

    def test_links(self, tmp_path):
        (tmp_path / "links.csv").write_text("t_s,link\n0,LOS\n10,nlos\n", encoding='utf-8')
        inicios, classes = ingest_links(str(tmp_path / "links.csv"))
        np.testing.assert_array_equal(inicios, [0.0, 10.0])
        assert list(classes) == ['LOS', 'NLOS']

    def test_invalid_link(self, tmp_path):
        (tmp_path / "links.csv").write_text("t_s,link\n0,XYZ\n", encoding='utf-8')
        with pytest.raises(SchemaError):
            ingest_links(str(tmp_path / "links.csv"))


class TestCampaignRepository:
    """Cache e estatísticas."""

    @pytest.fixture
    def arquivo(self, tmp_path):
        return _escrever(tmp_path / "c.csv", [
            "r1,0.0,10.0,70.0,,LOS,,",
            "r1,1.0,20.0,120.0,,LOS,,",
            "r2,0.0,30.0,80.0,,NLOS,,",
            "r2,2.0,0,80.0,,NLOS,,",
        ])

    def test_cache_returns_same_object(self, arquivo):
        repositorio = CampaignRepository(110.6)
        assert repositorio.carregar(arquivo) is repositorio.carregar(arquivo)

    def test_cache_invalidated_by_level(self, arquivo):
        repositorio = CampaignRepository(110.6)
        primeiro = repositorio.carregar(arquivo)
        repositorio.censor_level = 130.0
        segundo = repositorio.carregar(arquivo)
        assert primeiro is not segundo
        assert segundo.n_censored == 0

    def test_cache_invalidated_by_file_change(self, arquivo):
        repositorio = CampaignRepository(110.6)
        primeiro = repositorio.carregar(arquivo)
        novo_mtime = os.path.getmtime(arquivo) + 10
        os.utime(arquivo, (time.time(), novo_mtime))
        assert repositorio.carregar(arquivo) is not primeiro

    def test_rejections_kept_per_file(self, arquivo):
        repositorio = CampaignRepository(110.6)
        repositorio.carregar(arquivo)
        assert repositorio.rejeicoes(arquivo).linhas() == [5]

    def test_load_several_files(self, tmp_path, arquivo):
        outro = _escrever(tmp_path / "d.csv", ["r3,0.0,15.0,75.0,,OLOS,,", "r3,1.0,16.0,76.0,,OLOS,,"])
        repositorio = CampaignRepository(110.6)
        juntos = repositorio.carregar_varios([arquivo, outro])
        assert len(juntos) == 5
        assert juntos.runs() == ['r1', 'r2', 'r3']
        assert repositorio.rejeicoes(arquivo).linhas() == [5]

    def test_same_run_in_two_files_raises(self, tmp_path, arquivo):
        outro = _escrever(tmp_path / "d.csv", ["r2,5.0,15.0,75.0,,NLOS,,"])
        with pytest.raises(SchemaError, match="r2"):
            CampaignRepository(110.6).carregar_varios([arquivo, outro])

    def test_statistics(self, arquivo):
        repositorio = CampaignRepository(110.6)
        stats = repositorio.obter_estatisticas(repositorio.carregar(arquivo))
        assert stats['total'] == 3
        assert stats['corridas'] == 2
        assert stats['censurados'] == 1
        assert stats['por_classe'] == {'LOS': 2, 'NLOS': 1}
        assert stats['distancia'] == {'min': 10.0, 'max': 30.0}
        assert stats['duracao_s'] == pytest.approx(1.0)

    def test_save_reports_success(self, tmp_path, arquivo):
        repositorio = CampaignRepository(110.6)
        ok, mensagem = repositorio.salvar(repositorio.carregar(arquivo), str(tmp_path / "copia.csv"))
        assert ok
        assert "3 registros" in mensagem
