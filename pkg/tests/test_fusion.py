"""Testes da fusão de distância GPS + UWB."""

import numpy as np
import pytest

from core.models import FusionSource, GpsTrack, RawCampaign, TimeSeries, TrajectorySpec
from services.channel_simulator import ShadowingProcess, corrupt_distances, simulate_campaign
from services.distance_fusion import (DistanceFuser, correct_uwb, fuse_distance, gps_speeds,
                                      interpolate_gps_distance, paired_gps_distances,
                                      triangular_weight)
from utils.errors import DomainError, EmptyDatasetError, OutOfSpanError
from utils.geodesy import destination

ORIGEM = (52.4064, 16.9252)


def _trilhas(t, d, passo_rx=0.0):
    """RX andando para o norte; TX a d metros ao norte do RX."""
    t = np.asarray(t, dtype=float)
    lat_rx, lon_rx = destination(ORIGEM[0], ORIGEM[1], 0.0, passo_rx * t)
    lat_tx, lon_tx = destination(lat_rx, lon_rx, 0.0, np.asarray(d, dtype=float))
    return GpsTrack(t, lat_tx, lon_tx), GpsTrack(t, lat_rx, lon_rx)


def _bruto(t_gps, d_gps, t_uwb=(), r_uwb=(), bias=5.0):
    tx, rx = _trilhas(t_gps, d_gps)
    return RawCampaign(
        rf=TimeSeries(t_gps, np.full(len(t_gps), 90.0)),
        gps_tx=tx, gps_rx=rx,
        uwb=TimeSeries(t_uwb, r_uwb),
        uwb_cable_bias=bias,
    )


class TestGpsDistance:
    """Distância GPS por pares de fixos."""

    def test_midpoint_interpolation(self):
        tx, rx = _trilhas([0.0, 1.0], [100.0, 110.0])
        assert interpolate_gps_distance(tx, rx, 0.5) == pytest.approx(105.0, abs=1e-3)

    def test_fix_instants_are_exact(self):
        tx, rx = _trilhas([0.0, 1.0, 2.0], [100.0, 110.0, 90.0])
        np.testing.assert_allclose(interpolate_gps_distance(tx, rx, [0.0, 1.0, 2.0]),
                                   [100.0, 110.0, 90.0], atol=1e-3)

    def test_out_of_span_raises(self):
        tx, rx = _trilhas([0.0, 1.0], [100.0, 110.0])
        with pytest.raises(OutOfSpanError):
            interpolate_gps_distance(tx, rx, 1.5)

    def test_unpaired_fixes_dropped(self):
        tx, rx = _trilhas([0.0, 1.0, 2.0], [100.0, 110.0, 90.0])
        rx_parcial = GpsTrack(rx.t[:2], rx.lat[:2], rx.lon[:2])
        t, d = paired_gps_distances(tx, rx_parcial)
        np.testing.assert_array_equal(t, [0.0, 1.0])

    def test_no_pairs_raises(self):
        tx, _ = _trilhas([0.0, 1.0], [10.0, 10.0])
        _, rx = _trilhas([5.0, 6.0], [10.0, 10.0])
        with pytest.raises(EmptyDatasetError):
            paired_gps_distances(tx, rx)

    def test_speeds_from_fixes(self):
        _, rx = _trilhas(np.arange(10.0), np.full(10, 20.0), passo_rx=10.0)
        np.testing.assert_allclose(gps_speeds(rx, [2.5, 5.0]), 10.0, rtol=1e-3)


class TestUwbCorrection:
    """Remoção do viés do cabo."""

    def test_subtracts_bias_and_drops_negative(self):
        uwb = TimeSeries([0.0, 1.0, 2.0, 3.0, 4.0], [49.0, 50.0, 3.0, 4.0, 4.9])
        corrigido = correct_uwb(uwb, 5.0)
        np.testing.assert_allclose(corrigido.values, [44.0, 45.0])
        np.testing.assert_allclose(corrigido.t, [0.0, 1.0])

    def test_zero_after_correction_kept(self):
        corrigido = correct_uwb(TimeSeries([0.0], [5.0]), 5.0)
        assert len(corrigido) == 1

    def test_negative_bias_raises(self):
        with pytest.raises(DomainError):
            correct_uwb(TimeSeries([0.0], [5.0]), -1.0)

    def test_triangular_weight(self):
        np.testing.assert_allclose(triangular_weight([0.0, 20.0, -40.0, 50.0], 40.0), [1.0, 0.5, 0.0, 0.0])


class TestFuse:
    """Combinação GPS + UWB."""

    def test_gps_only_without_uwb(self):
        raw = _bruto([0.0, 1.0, 2.0], [100.0, 110.0, 120.0])
        resultado = DistanceFuser(raw).fuse([0.5, 1.5])
        assert list(resultado.source) == [FusionSource.GPS_ONLY.value] * 2
        np.testing.assert_array_equal(resultado.d, resultado.d_gps)

    def test_gps_only_outside_window(self):
        raw = _bruto(np.arange(0.0, 101.0), np.full(101, 50.0), t_uwb=[0.0], r_uwb=[57.0])
        d, fonte = fuse_distance(raw, 90.0, window=40.0)
        assert fonte is FusionSource.GPS_ONLY
        assert d == pytest.approx(50.0, abs=1e-3)

    def test_uwb_at_query_dominates(self):
        """Com UWB no instante pedido a distância fundida fica a 2 sigma_uwb dele."""
        raw = _bruto(np.arange(0.0, 11.0), np.full(11, 50.0), t_uwb=[5.0], r_uwb=[47.0 + 5.0])
        d, fonte = fuse_distance(raw, 5.0)
        assert fonte is FusionSource.FUSED
        assert d == pytest.approx(47.0, abs=2 * 0.036)

    def test_scalar_and_array_queries(self):
        raw = _bruto(np.arange(0.0, 11.0), np.full(11, 50.0), t_uwb=[5.0], r_uwb=[52.0])
        d, fontes = fuse_distance(raw, [4.0, 5.0])
        assert d.shape == (2,)
        assert all(f == FusionSource.FUSED.value for f in fontes)

    def test_query_out_of_span(self):
        raw = _bruto([0.0, 1.0], [50.0, 50.0])
        with pytest.raises(OutOfSpanError):
            DistanceFuser(raw).fuse([2.0])

    def test_invalid_window(self):
        with pytest.raises(DomainError):
            DistanceFuser(_bruto([0.0, 1.0], [50.0, 50.0]), window=0.0)


class TestFusionQuality:
    """Erro da distância fundida contra a distância verdadeira."""

    @pytest.fixture
    def corrida(self, dsds_model):
        traj = TrajectorySpec(duration=1600.0, sample_period=0.165,
                              distance_waypoints=((0, 5), (200, 300), (400, 5)), v_rx=((0, 10.0),))
        return simulate_campaign(dsds_model, traj, ShadowingProcess(1.0, 1e-3), 110.6, seed=4)

    def test_fused_error_far_below_gps(self, corrida):
        raw = corrupt_distances(corrida, seed=8)
        fusor = DistanceFuser(raw)
        inicio, fim = fusor.span
        arr = corrida.arrays
        dentro = (arr.t >= inicio) & (arr.t <= fim) & (arr.d < 100.0)
        resultado = fusor.fuse(arr.t[dentro])
        verdadeira = arr.d[dentro]
        erro_fundido = np.sqrt(np.mean((resultado.d - verdadeira) ** 2))
        erro_gps = np.sqrt(np.mean((resultado.d_gps - verdadeira) ** 2))
        assert erro_fundido * 5 <= erro_gps

    def test_gps_only_records_equal_gps(self, corrida):
        raw = corrupt_distances(corrida, seed=8)
        fusor = DistanceFuser(raw, window=5.0)
        inicio, fim = fusor.span
        t = corrida.arrays.t
        resultado = fusor.fuse(t[(t >= inicio) & (t <= fim)])
        so_gps = resultado.source == FusionSource.GPS_ONLY.value
        assert np.any(so_gps)
        np.testing.assert_array_equal(resultado.d[so_gps], resultado.d_gps[so_gps])

    def test_exact_gps_gives_unbiased_fusion(self):
        """GPS sem erro e UWB com ruído de média nula: viés médio abaixo de 5 cm."""

        def verdadeira(t):
            return 40.0 + 0.005 * t

        rng = np.random.default_rng(31)
        t_gps = np.arange(0.0, 3001.0)
        t_uwb = np.arange(0.0, 3000.0, 1.0 / 3.5)
        r_uwb = verdadeira(t_uwb) + 5.0 + rng.normal(0.0, 0.036, len(t_uwb))
        raw = _bruto(t_gps, verdadeira(t_gps), t_uwb=t_uwb, r_uwb=r_uwb)
        consultas = np.sort(rng.uniform(0.0, 3000.0, 100_000))
        resultado = DistanceFuser(raw).fuse(consultas)
        assert np.all(resultado.source == FusionSource.FUSED.value)
        assert abs(np.mean(resultado.d - verdadeira(consultas))) < 0.05
