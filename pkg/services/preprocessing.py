"""Pré-média de potência e montagem do dataset processado a partir dos fluxos brutos."""

import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from core.models import Dataset, LinkClass, RawCampaign
from services.distance_fusion import DEFAULT_WINDOW_S, DistanceFuser, gps_speeds
from utils.errors import DomainError, EmptyDatasetError


def _validar_janela(window: int) -> int:
    if int(window) != window or window < 1:
        raise DomainError(f"window deve ser inteiro >= 1 (recebido {window})")
    return int(window)


def preaverage_power(raw_powers: Sequence[float], window: int) -> np.ndarray:
    """
    Média de potência em janelas consecutivas sem sobreposição.

    Cada saída é 10 lg da média das potências lineares 10^(p/10); a janela
    final incompleta é descartada.

    Args:
        raw_powers: Potências (dB); -inf é aceito (potência nula)
        window: Amostras por janela (>= 1)

    Returns:
        Potências médias (dB)
    """
    window = _validar_janela(window)
    p = np.asarray(raw_powers, dtype=float)
    if p.size == 0:
        raise EmptyDatasetError("Nenhuma potência para a média")
    n = (len(p) // window) * window
    if n == 0:
        logger.warning(f"Menos de {window} amostras: nenhuma janela completa")
        return np.zeros(0)
    if window == 1:
        return p.copy()
    linear = np.power(10.0, p[:n] / 10.0).reshape(-1, window)
    with np.errstate(divide='ignore'):
        return 10.0 * np.log10(linear.mean(axis=1))


def preaverage_samples(t: Sequence[float], path_loss: Sequence[float],
                       window: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pré-média de amostras de perda de percurso.

    A média é feita na potência recebida (-perda) e o instante de cada
    saída é o ponto médio da janela.

    Returns:
        Tupla (instantes, perdas médias em dB)
    """
    window = _validar_janela(window)
    t = np.asarray(t, dtype=float)
    pl = np.asarray(path_loss, dtype=float)
    if len(t) != len(pl):
        raise DomainError("t e path_loss com tamanhos diferentes")
    media = -preaverage_power(-pl, window)
    n = len(media) * window
    blocos = t[:n].reshape(-1, window)
    return 0.5 * (blocos[:, 0] + blocos[:, -1]), media


def _classes_por_instante(t: np.ndarray, links: Optional[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Classes constantes por trechos; UNKNOWN antes do primeiro rótulo."""
    if links is None:
        return np.full(len(t), LinkClass.UNKNOWN.value, dtype=object)
    inicios, classes = links
    idx = np.searchsorted(inicios, t, side='right') - 1
    resultado = np.full(len(t), LinkClass.UNKNOWN.value, dtype=object)
    validos = idx >= 0
    resultado[validos] = classes[idx[validos]]
    return resultado


def build_processed_dataset(raw: RawCampaign, censor_level: float, averaging_window: int = 1,
                            fusion_window: float = DEFAULT_WINDOW_S,
                            links: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                            run_id: str = "run-1") -> Tuple[Dataset, Dict[str, np.ndarray]]:
    """
    Fluxos brutos -> dataset processado com distância fundida.

    Amostras RF fora do intervalo GPS ou com distância fundida não positiva
    são descartadas com aviso.

    Args:
        raw: Observações brutas de uma corrida
        censor_level: Nível de censura (dB)
        averaging_window: Amostras RF por média (1 = sem média)
        fusion_window: Janela de validade do UWB (s)
        links: (inícios, classes) de rótulos de enlace
        run_id: Identificador da corrida

    Returns:
        Tupla (Dataset, colunas extras d_gps_m e d_source alinhadas ao dataset)
    """
    if math.isnan(censor_level):
        raise DomainError("censor_level não pode ser NaN")
    if averaging_window > 1:
        t, pl = preaverage_samples(raw.rf.t, raw.rf.values, averaging_window)
    else:
        t, pl = raw.rf.t.copy(), raw.rf.values.copy()

    fusor = DistanceFuser(raw, fusion_window)
    inicio, fim = fusor.span
    dentro = (t >= inicio) & (t <= fim)
    if not np.all(dentro):
        logger.warning(f"{int(np.count_nonzero(~dentro))} amostra(s) RF fora do intervalo GPS descartada(s)")
    t, pl = t[dentro], pl[dentro]
    if len(t) == 0:
        raise EmptyDatasetError("Nenhuma amostra RF dentro do intervalo GPS")

    fundido = fusor.fuse(t)
    positivos = fundido.d > 0
    if not np.all(positivos):
        logger.warning(f"{int(np.count_nonzero(~positivos))} amostra(s) com distância fundida <= 0 descartada(s)")

    t, pl = t[positivos], pl[positivos]
    v_tx = gps_speeds(raw.gps_tx, t)
    v_rx = gps_speeds(raw.gps_rx, t)
    dataset = Dataset.from_arrays(
        t=t, d=fundido.d[positivos], path_loss=pl, censor_level=censor_level,
        v_tx=v_tx, v_rx=v_rx, link=_classes_por_instante(t, links), run_id=run_id,
    )
    extras = {
        'd_gps_m': fundido.d_gps[positivos],
        'd_source': fundido.source[positivos],
    }
    logger.info(
        f"Dataset processado: {len(dataset)} amostras, {int(np.count_nonzero(extras['d_source'] == 'FUSED'))} fundidas"
    )
    return dataset, extras
