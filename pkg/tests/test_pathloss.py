"""Testes dos modelos de perda de percurso."""

import math

import numpy as np
import pytest

from core.models import (LinkClass, ModelFamily, PathLossModel, PerLinkClassParams,
                         SingleSlopeParams)
from core.pathloss import (design_columns, mean_path_loss, reference_sigma, shadowing_sigma,
                           theoretical_breakpoint)
from utils.errors import ClassRequiredError, DomainError, SchemaError


@pytest.fixture
def per_class_model():
    return PathLossModel.per_class(
        SingleSlopeParams(58.6, 2.19, 3.3),
        SingleSlopeParams(56.2, 2.6, 3.7),
        SingleSlopeParams(55.3, 2.91, 4.9),
    )


class TestSingleSlope:
    """Inclinação única."""

    def test_reference_distance_returns_l_ref(self, ss_model):
        """Em 10 m a perda é l_ref."""
        assert mean_path_loss(ss_model, 10.0) == pytest.approx(57.34, abs=1e-12)

    def test_decade_adds_ten_gamma(self, ss_model):
        """Uma década acima soma 10 gamma dB."""
        assert mean_path_loss(ss_model, 100.0) == pytest.approx(57.34 + 26.9, abs=1e-9)

    def test_scalar_and_array_inputs(self, ss_model):
        """Entrada escalar devolve float; array devolve array."""
        assert isinstance(mean_path_loss(ss_model, 50.0), float)
        valores = mean_path_loss(ss_model, np.array([10.0, 100.0]))
        assert valores.shape == (2,)

    def test_sigma_is_constant(self, ss_model):
        np.testing.assert_allclose(shadowing_sigma(ss_model, [5.0, 50.0, 500.0]), 4.5)

    @pytest.mark.parametrize("d", [0.0, -1.0, math.nan, math.inf])
    def test_invalid_distance_raises(self, ss_model, d):
        with pytest.raises(DomainError):
            mean_path_loss(ss_model, d)


class TestDoubleSlope:
    """Inclinação dupla com sombreamento duplo."""

    def test_value_at_breakpoint(self, dsds_model):
        """Em 35 m só o primeiro ramo contribui."""
        assert mean_path_loss(dsds_model, 35.0) == pytest.approx(68.505, abs=1e-3)

    def test_value_beyond_breakpoint(self, dsds_model):
        """Em 350 m: 59.8 + 1.6*10lg(3.5) + 3.14*10."""
        assert mean_path_loss(dsds_model, 350.0) == pytest.approx(99.905, abs=1e-3)

    def test_continuity_at_breakpoint(self, dsds_model):
        abaixo = mean_path_loss(dsds_model, 35.0 * (1 - 1e-12))
        acima = mean_path_loss(dsds_model, 35.0)
        assert abs(acima - abaixo) < 1e-9

    def test_sigma_switches_at_breakpoint(self, dsds_model):
        """sigma1 abaixo da quebra, sigma2 a partir dela."""
        assert shadowing_sigma(dsds_model, 34.9) == 2.2
        assert shadowing_sigma(dsds_model, 35.0) == 4.5
        assert shadowing_sigma(dsds_model, 1000.0) == 4.5
        assert reference_sigma(dsds_model) == 4.5

    def test_design_columns(self):
        """a satura na quebra; b é zero até ela."""
        a, b = design_columns(np.array([10.0, 35.0, 350.0]), 35.0)
        np.testing.assert_allclose(a, [0.0, 10 * math.log10(3.5), 10 * math.log10(3.5)])
        np.testing.assert_allclose(b, [0.0, 0.0, 10.0], atol=1e-12)

    def test_dsss_shares_sigma(self):
        model = PathLossModel.dsss(59.7, 1.65, 3.19, 40.0, 3.85)
        assert model.family is ModelFamily.DSSS
        np.testing.assert_allclose(shadowing_sigma(model, [10.0, 100.0]), 3.85)

    def test_monotonic_for_positive_exponents(self, dsds_model):
        d = np.logspace(0, 3.5, 400)
        assert np.all(np.diff(mean_path_loss(dsds_model, d)) > 0)


class TestPerLinkClass:
    """Modelo por classe de enlace."""

    def test_each_class_uses_its_params(self, per_class_model):
        valores = mean_path_loss(per_class_model, np.array([100.0, 100.0, 100.0]),
                                 np.array(['LOS', 'OLOS', 'NLOS']))
        np.testing.assert_allclose(valores, [58.6 + 21.9, 56.2 + 26.0, 55.3 + 29.1])

    def test_sigma_per_class(self, per_class_model):
        assert shadowing_sigma(per_class_model, 50.0, LinkClass.NLOS) == 4.9

    def test_reference_sigma_is_largest_class_sigma(self, per_class_model):
        assert reference_sigma(per_class_model) == 4.9

    def test_unknown_class_raises(self, per_class_model):
        with pytest.raises(ClassRequiredError):
            mean_path_loss(per_class_model, 100.0)

    def test_for_link_rejects_unknown(self, per_class_model):
        assert isinstance(per_class_model.params, PerLinkClassParams)
        with pytest.raises(ClassRequiredError):
            per_class_model.params.for_link(LinkClass.UNKNOWN)


class TestTheoreticalBreakpoint:
    """Quebra pela primeira zona de Fresnel."""

    def test_campaign_antennas_at_725_mhz(self):
        assert theoretical_breakpoint(1.75, 1.75, 725e6) == pytest.approx(29.6, abs=0.1)

    def test_scales_with_heights(self):
        base = theoretical_breakpoint(1.0, 1.0, 1e9)
        assert theoretical_breakpoint(2.0, 1.0, 1e9) == pytest.approx(2 * base)

    def test_invalid_height_raises(self):
        with pytest.raises(DomainError):
            theoretical_breakpoint(0.0, 1.75, 725e6)


class TestModelDocument:
    """Documento JSON com discriminador de família."""

    @pytest.mark.parametrize("model", [
        PathLossModel.single_slope(57.34, 2.69, 4.5),
        PathLossModel.dsss(59.7, 1.65, 3.19, 40.0, 3.85),
        PathLossModel.dsds(59.8, 1.6, 3.14, 35.0, 2.2, 4.5),
    ])
    def test_from_dict_restores_model(self, model):
        restaurado = PathLossModel.from_dict(model.to_dict())
        assert restaurado.family is model.family
        assert restaurado.d_break == model.d_break
        assert mean_path_loss(restaurado, 123.0) == pytest.approx(mean_path_loss(model, 123.0))

    def test_missing_family_raises(self):
        with pytest.raises(SchemaError):
            PathLossModel.from_dict({'l_ref': 1.0})

    def test_parameter_counts(self, ss_model, dsds_model):
        assert ss_model.parameter_count() == 3
        assert dsds_model.parameter_count() == 5
