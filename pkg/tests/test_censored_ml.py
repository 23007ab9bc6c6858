"""Testes do ajuste ML censurado, do BIC e da varredura de quebra."""

import math

import numpy as np
import pytest

from conftest import campanha_iid
from core.models import Dataset, FailedFit, FitResult, ModelFamily, PathLossModel
from services.censored_ml import (best_by_bic, bic, censored_log_likelihood, compare_families,
                                  fit, parse_sweep, rmse, sweep_breakpoint)
from utils.errors import (ClassRequiredError, DomainError, EmptyDatasetError,
                          InsufficientDataError)


class TestBic:
    """Critério de informação bayesiano."""

    def test_formula(self):
        assert bic(-100.0, 100, 3) == pytest.approx(3 * math.log(100) + 200.0)

    def test_more_parameters_cost_more(self):
        assert bic(-50.0, 1000, 5) > bic(-50.0, 1000, 3)

    @pytest.mark.parametrize("n,k", [(0, 3), (10, 0)])
    def test_invalid_counts_raise(self, n, k):
        with pytest.raises(DomainError):
            bic(-1.0, n, k)


class TestLogLikelihood:
    """Log-verossimilhança censurada."""

    def test_uncensored_sample_at_mean(self):
        """Amostra exata na média contribui com -ln(sigma sqrt(2 pi))."""
        model = PathLossModel.single_slope(60.0, 2.0, 2.0)
        data = Dataset.from_arrays(t=[0.0], d=[10.0], path_loss=[60.0], censor_level=100.0)
        esperado = -math.log(2.0) - 0.5 * math.log(2 * math.pi)
        assert censored_log_likelihood(model, data) == pytest.approx(esperado)

    def test_censored_sample_at_mean_is_half(self):
        """Censura exatamente na média contribui com ln(1/2)."""
        model = PathLossModel.single_slope(60.0, 2.0, 2.0)
        data = Dataset.from_arrays(t=[0.0], d=[10.0], path_loss=[60.0], censor_level=60.0)
        assert data.n_censored == 1
        assert censored_log_likelihood(model, data) == pytest.approx(math.log(0.5))

    def test_rmse_ignores_censored(self):
        model = PathLossModel.single_slope(60.0, 2.0, 2.0)
        data = Dataset.from_arrays(t=[0.0, 1.0], d=[10.0, 10.0], path_loss=[61.0, 90.0], censor_level=80.0)
        assert rmse(model, data) == pytest.approx(1.0)


class TestFitSingleSlope:
    """Ajuste de inclinação única."""

    def test_uncensored_matches_least_squares(self, uncensored_ss_data):
        """Sem censura, o ML coincide com a regressão de mínimos quadrados."""
        arr = uncensored_ss_data.arrays
        gamma_ls, l_ref_ls = np.polyfit(10 * np.log10(arr.d / 10.0), arr.path_loss, 1)
        resultado = fit('ss', uncensored_ss_data, n_starts=3, seed=1)
        params = resultado.model.params
        assert params.l_ref == pytest.approx(l_ref_ls, rel=1e-4)
        assert params.gamma == pytest.approx(gamma_ls, rel=1e-4)
        assert resultado.converged
        assert resultado.n_censored == 0

    def test_uncensored_sigma_is_ml_estimate(self, uncensored_ss_data):
        resultado = fit('ss', uncensored_ss_data, n_starts=1)
        assert resultado.model.params.sigma == pytest.approx(resultado.rmse, rel=1e-3)

    def test_bic_uses_three_parameters(self, uncensored_ss_data):
        resultado = fit('ss', uncensored_ss_data, n_starts=1)
        assert resultado.bic == pytest.approx(bic(resultado.log_likelihood, len(uncensored_ss_data), 3))

    def test_empty_dataset_raises(self):
        with pytest.raises(EmptyDatasetError):
            fit('ss', Dataset((), 110.6))

    def test_all_censored_raises(self):
        data = Dataset.from_arrays(t=[0.0, 1.0, 2.0], d=[10.0, 20.0, 30.0],
                                   path_loss=[120.0, 121.0, 122.0], censor_level=110.6)
        with pytest.raises(InsufficientDataError):
            fit('ss', data)


class TestFitDoubleSlope:
    """Ajuste DSDS com censura."""

    def test_recovers_parameters(self, small_dsds_campaign):
        """Recupera os parâmetros publicados numa campanha de 8000 amostras."""
        resultado = fit('dsds', small_dsds_campaign, d_break=35.0, n_starts=2, seed=0)
        p = resultado.model.params
        assert resultado.family is ModelFamily.DSDS
        assert p.l_ref == pytest.approx(59.8, abs=0.5)
        assert p.gamma1 == pytest.approx(1.6, abs=0.1)
        assert p.gamma2 == pytest.approx(3.14, abs=0.1)
        assert p.sigma1 == pytest.approx(2.2, abs=0.2)
        assert p.sigma2 == pytest.approx(4.5, abs=0.2)
        assert resultado.converged

    def test_deterministic_for_fixed_seed(self, small_dsds_campaign):
        a = fit('dsds', small_dsds_campaign, d_break=35.0, n_starts=2, seed=3)
        b = fit('dsds', small_dsds_campaign, d_break=35.0, n_starts=2, seed=3)
        assert a.model.to_dict() == b.model.to_dict()
        assert a.log_likelihood == b.log_likelihood

    def test_missing_breakpoint_raises(self, small_dsds_campaign):
        with pytest.raises(DomainError):
            fit('dsds', small_dsds_campaign)

    def test_breakpoint_without_samples_on_one_side(self, small_dsds_campaign):
        """Quebra abaixo de todas as distâncias deixa um ramo vazio."""
        with pytest.raises(InsufficientDataError):
            fit('dsss', small_dsds_campaign, d_break=3.0)

    def test_censoring_handling_removes_slope_bias(self, dsds_model):
        """Tratar amostras saturadas como exatas achata gamma2; o ML censurado não."""
        data = campanha_iid(dsds_model, 20000, seed=21)
        assert 0.06 <= data.censored_fraction <= 0.12
        censurado = fit('dsds', data, d_break=35.0, n_starts=1)
        ingenuo = fit('dsds', data.sem_censura(), d_break=35.0, n_starts=1)
        assert abs(censurado.model.params.gamma2 - 3.14) < 0.05
        assert ingenuo.model.params.gamma2 < 3.14 - 0.05


class TestFitPerClass:
    """Modelo por classe de enlace."""

    def test_unknown_links_raise(self, uncensored_ss_data):
        with pytest.raises(ClassRequiredError):
            fit('per_class', uncensored_ss_data)

    def test_missing_class_raises(self, small_dsds_campaign):
        """A campanha sintética só tem LOS."""
        with pytest.raises(InsufficientDataError):
            fit('per_class', small_dsds_campaign)

    def test_fits_each_class(self):
        rng = np.random.default_rng(8)
        n = 1500
        d = rng.uniform(5.0, 300.0, 3 * n)
        links = np.repeat(['LOS', 'OLOS', 'NLOS'], n)
        l_ref = np.repeat([58.6, 56.2, 55.3], n)
        gamma = np.repeat([2.19, 2.6, 2.91], n)
        pl = l_ref + 10 * gamma * np.log10(d / 10.0) + rng.normal(0.0, 3.0, 3 * n)
        data = Dataset.from_arrays(t=np.arange(3 * n) * 0.1, d=d, path_loss=pl,
                                   censor_level=200.0, link=links)
        resultado = fit('per_class', data, n_starts=1)
        params = resultado.model.params
        assert params.los.gamma == pytest.approx(2.19, abs=0.1)
        assert params.olos.gamma == pytest.approx(2.6, abs=0.1)
        assert params.nlos.gamma == pytest.approx(2.91, abs=0.1)
        assert resultado.model.parameter_count() == 9


class TestBreakpointSweep:
    """Varredura da distância de quebra."""

    def test_parse_range_is_inclusive(self):
        candidatos = parse_sweep("15:5:100")
        assert candidatos[0] == 15.0
        assert candidatos[-1] == 100.0
        assert len(candidatos) == 18

    def test_parse_list(self):
        assert parse_sweep("30, 35,40") == [30.0, 35.0, 40.0]

    @pytest.mark.parametrize("texto", ["x", "10:0:20", "20:5:10"])
    def test_parse_invalid(self, texto):
        with pytest.raises(DomainError):
            parse_sweep(texto)

    def test_failed_candidate_does_not_abort(self, small_dsds_campaign):
        """Candidato sem amostras abaixo vira FailedFit, na ordem dos candidatos."""
        resultados = sweep_breakpoint('dsds', small_dsds_campaign, [3.0, 30.0, 35.0, 40.0],
                                      n_starts=1, max_workers=2)
        assert len(resultados) == 4
        assert isinstance(resultados[0], FailedFit)
        assert resultados[0].d_break == 3.0
        assert all(isinstance(r, FitResult) for r in resultados[1:])
        assert [r.d_break for r in resultados[1:]] == [30.0, 35.0, 40.0]
        assert best_by_bic(resultados).d_break in (30.0, 35.0, 40.0)

    def test_single_slope_family_rejected(self, small_dsds_campaign):
        with pytest.raises(DomainError):
            sweep_breakpoint('ss', small_dsds_campaign, [35.0])

    def test_best_by_bic_without_success_raises(self):
        with pytest.raises(InsufficientDataError):
            best_by_bic([FailedFit(ModelFamily.DSDS, 3.0, "vazio")])

    def test_progress_callback(self, small_dsds_campaign):
        chamadas = []
        sweep_breakpoint('dsss', small_dsds_campaign, [30.0, 40.0], n_starts=1,
                         progresso=lambda atual, total: chamadas.append((atual, total)))
        assert chamadas == [(1, 2), (2, 2)]

    def test_status_callback(self, small_dsds_campaign):
        mensagens = []
        sweep_breakpoint('dsss', small_dsds_campaign, [30.0, 40.0], n_starts=1, status=mensagens.append)
        assert "quebra dsss" in mensagens[0]
        assert mensagens[-1].startswith("Varredura concluída: 2 ok")


class TestCompareFamilies:
    """Seleção de modelo por BIC."""

    def test_dsds_data_selects_dsds(self, small_dsds_campaign):
        comparacao = compare_families(small_dsds_campaign, [30.0, 35.0, 40.0], n_starts=1)
        assert comparacao.best().family is ModelFamily.DSDS
        assert ModelFamily.PER_CLASS in comparacao.skipped
        bics = [r.bic for r in comparacao.ranking()]
        assert bics == sorted(bics)

    def test_ss_data_selects_ss(self, ss_model):
        data = campanha_iid(ss_model, 8000, seed=4)
        comparacao = compare_families(data, [30.0, 35.0, 40.0], n_starts=1)
        assert comparacao.best().family is ModelFamily.SS
