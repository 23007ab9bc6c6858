"""
Fusão de distância TX-RX: GPS a 1 Hz (pares de fixos no mesmo instante,
Vincenty, interpolação linear) corrigido por distâncias UWB próximas.
"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from loguru import logger

from core.models import FusionSource, GpsTrack, RawCampaign, TimeSeries
from utils.errors import DomainError, EmptyDatasetError, OutOfSpanError
from utils.geodesy import geodesic_distances

DEFAULT_WINDOW_S = 40.0
# Teto do termo de descorrelação do GPS (erros independentes: 2 sigma^2)
_TETO_DESCORRELACAO = 2.0


def paired_gps_distances(gps_tx: GpsTrack, gps_rx: GpsTrack) -> Tuple[np.ndarray, np.ndarray]:
    """
    Distâncias geodésicas entre fixos TX/RX do mesmo instante.

    Returns:
        Tupla (instantes, distâncias em m)
    """
    t, i_tx, i_rx = np.intersect1d(gps_tx.t, gps_rx.t, assume_unique=True, return_indices=True)
    if len(t) == 0:
        raise EmptyDatasetError("Nenhum par de fixos GPS com o mesmo instante")
    sem_par = len(gps_tx) + len(gps_rx) - 2 * len(t)
    if sem_par:
        logger.debug(f"{sem_par} fixo(s) GPS sem par descartado(s)")
    d = geodesic_distances(gps_tx.lat[i_tx], gps_tx.lon[i_tx], gps_rx.lat[i_rx], gps_rx.lon[i_rx])
    return t, d


def _interpolar(t_fix: np.ndarray, d_fix: np.ndarray, t_query) -> np.ndarray:
    t_query = np.asarray(t_query, dtype=float)
    if np.any(~np.isfinite(t_query)) or np.any(t_query < t_fix[0]) or np.any(t_query > t_fix[-1]):
        raise OutOfSpanError(
            f"Consulta fora do intervalo GPS [{t_fix[0]:g}, {t_fix[-1]:g}] s"
        )
    return np.interp(t_query, t_fix, d_fix)


def interpolate_gps_distance(gps_tx: GpsTrack, gps_rx: GpsTrack, t_query) -> Union[float, np.ndarray]:
    """
    Distância GPS interpolada linearmente entre segundos consecutivos.

    Args:
        gps_tx: Fixos do TX
        gps_rx: Fixos do RX
        t_query: Instante(s) dentro do intervalo dos pares

    Returns:
        Distância(s) em m

    Raises:
        OutOfSpanError: Consulta fora do intervalo (sem extrapolação)
    """
    t_fix, d_fix = paired_gps_distances(gps_tx, gps_rx)
    d = _interpolar(t_fix, d_fix, t_query)
    return float(d) if np.ndim(t_query) == 0 else d


def correct_uwb(uwb: TimeSeries, cable_bias: float) -> TimeSeries:
    """
    Remove o viés do cabo; distâncias negativas são descartadas.

    Args:
        uwb: Distâncias reportadas
        cable_bias: Viés (m, >= 0)

    Returns:
        Série corrigida
    """
    if not math.isfinite(cable_bias) or cable_bias < 0:
        raise DomainError(f"cable_bias deve ser >= 0 (recebido {cable_bias})")
    corrigido = uwb.values - cable_bias
    validos = corrigido >= 0
    descartados = int(np.count_nonzero(~validos))
    if descartados:
        logger.warning(f"{descartados} distância(s) UWB negativa(s) após a correção descartada(s)")
    return TimeSeries(uwb.t[validos], corrigido[validos])


def triangular_weight(delta_t, window: float) -> np.ndarray:
    """Peso triangular max(0, 1 - |dt|/window)."""
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(delta_t, dtype=float)) / window)


@dataclass
class FusedDistance:
    """Distâncias fundidas por instante de consulta."""
    t: np.ndarray
    d: np.ndarray
    d_gps: np.ndarray
    source: np.ndarray  # FusionSource.value por amostra

    @property
    def n_fused(self) -> int:
        return int(np.count_nonzero(self.source == FusionSource.FUSED.value))


class DistanceFuser:
    """
    Combina a distância GPS com correções UWB vizinhas.

    Para cada UWB corrigido em t_u, c_u = r_u - d_gps(t_u). Numa consulta
    em t as correções dentro de +-window recebem peso
        w = tri(t - t_u) / (sigma_uwb^2 + sigma_gps^2 min(((t - t_u)/tau)^2, 2)),
    com tri o peso triangular e tau a constante de tempo do erro GPS. A
    correção média c (variância 1/sum w) é combinada com o GPS por razão
    máxima: d = d_gps + c sigma_gps^2 / (sigma_gps^2 + 1/sum w).
    """

    def __init__(self, raw: RawCampaign, window: float = DEFAULT_WINDOW_S):
        """
        Args:
            raw: Observações brutas
            window: Meia largura da janela de validade (s)
        """
        if not math.isfinite(window) or window <= 0:
            raise DomainError(f"window deve ser > 0 (recebido {window})")
        self.raw = raw
        self.window = float(window)
        self._t_fix, self._d_fix = paired_gps_distances(raw.gps_tx, raw.gps_rx)

        uwb = correct_uwb(raw.uwb, raw.uwb_cable_bias)
        # UWB fora do intervalo GPS não tem referência para a correção
        dentro = (uwb.t >= self._t_fix[0]) & (uwb.t <= self._t_fix[-1])
        self._t_uwb = uwb.t[dentro]
        self._c_uwb = uwb.values[dentro] - np.interp(self._t_uwb, self._t_fix, self._d_fix)
        self._ativo = math.isfinite(raw.uwb_sigma) and len(self._t_uwb) > 0
        logger.debug(f"Fusão: {len(self._t_fix)} pares GPS, {len(self._t_uwb)} correções UWB")

    @property
    def span(self) -> Tuple[float, float]:
        return float(self._t_fix[0]), float(self._t_fix[-1])

    def gps(self, t_query) -> np.ndarray:
        return _interpolar(self._t_fix, self._d_fix, t_query)

    def _correcao(self, t: float) -> Tuple[float, float]:
        """Correção média e soma dos pesos em t."""
        lo = np.searchsorted(self._t_uwb, t - self.window, side='left')
        hi = np.searchsorted(self._t_uwb, t + self.window, side='right')
        if hi <= lo:
            return 0.0, 0.0
        dt = t - self._t_uwb[lo:hi]
        var_gps = self.raw.gps_sigma ** 2 * np.minimum((dt / self.raw.gps_corr_time) ** 2, _TETO_DESCORRELACAO)
        w = triangular_weight(dt, self.window) / (self.raw.uwb_sigma ** 2 + var_gps)
        soma = float(w.sum())
        if soma <= 0:
            return 0.0, 0.0
        return float(np.dot(w, self._c_uwb[lo:hi]) / soma), soma

    def fuse(self, t_query) -> FusedDistance:
        """
        Distância fundida nos instantes pedidos.

        Raises:
            OutOfSpanError: Consulta fora do intervalo GPS
        """
        t_query = np.atleast_1d(np.asarray(t_query, dtype=float))
        d_gps = self.gps(t_query)
        d = d_gps.copy()
        fonte = np.full(len(t_query), FusionSource.GPS_ONLY.value, dtype=object)
        if self._ativo:
            var_gps = self.raw.gps_sigma ** 2
            for k, t in enumerate(t_query):
                correcao, soma = self._correcao(float(t))
                if soma > 0:
                    d[k] = d_gps[k] + correcao * var_gps / (var_gps + 1.0 / soma)
                    fonte[k] = FusionSource.FUSED.value
        return FusedDistance(t_query, d, d_gps, fonte)


def fuse_distance(raw: RawCampaign, t_query, window: float = DEFAULT_WINDOW_S):
    """
    Distância fundida GPS+UWB.

    Args:
        raw: Observações brutas
        t_query: Instante(s) dentro do intervalo GPS
        window: Janela de validade do UWB (s)

    Returns:
        Tupla (d, FusionSource) para consulta escalar, ou (array d,
        array de fontes) para consultas em array
    """
    resultado = DistanceFuser(raw, window).fuse(t_query)
    if np.ndim(t_query) == 0:
        return float(resultado.d[0]), FusionSource(resultado.source[0])
    return resultado.d, resultado.source


def gps_speeds(track: GpsTrack, t_query) -> np.ndarray:
    """
    Velocidade escalar de um veículo a partir de fixos consecutivos.

    A velocidade de cada segmento é atribuída ao ponto médio e interpolada.
    """
    t_query = np.asarray(t_query, dtype=float)
    if len(track) < 2:
        return np.zeros(np.shape(t_query))
    passos = geodesic_distances(track.lat[:-1], track.lon[:-1], track.lat[1:], track.lon[1:])
    velocidades = passos / np.diff(track.t)
    meios = 0.5 * (track.t[:-1] + track.t[1:])
    return np.interp(t_query, meios, velocidades)
