"""Avaliação determinística dos modelos de perda de percurso."""

from typing import Tuple, Union

import numpy as np

from core.models import (REFERENCE_DISTANCE_M, SPEED_OF_LIGHT, DoubleSlopeParams,
                         LinkClass, PathLossModel, PerLinkClassParams, SingleSlopeParams)
from utils.errors import ClassRequiredError, DomainError

ArrayLike = Union[float, np.ndarray]


def _distancias(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise DomainError("Distância deve ser finita e > 0")
    return d


def _classes(link, forma) -> np.ndarray:
    """Classes de enlace como array de strings com a forma de d."""
    if np.ndim(link) == 0:
        valor = LinkClass.parse(link).value
        return np.full(forma, valor, dtype=object)
    valores = np.array([LinkClass.parse(l).value for l in np.ravel(link)], dtype=object)
    return np.broadcast_to(valores.reshape(np.shape(link)), forma)


def design_columns(d, d_break: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Colunas de regressão da inclinação dupla.

    mean = l_ref + gamma1 * a + gamma2 * b, com
    a = 10 lg(min(d, d_break) / 10) e b = 10 lg(max(d, d_break) / d_break).
    O ponto d == d_break pertence ao segundo ramo (b = 0 nele).

    Args:
        d: Distâncias (m)
        d_break: Distância de quebra (m)

    Returns:
        Tupla (a, b)
    """
    d = _distancias(d)
    a = 10.0 * np.log10(np.minimum(d, d_break) / REFERENCE_DISTANCE_M)
    b = 10.0 * np.log10(np.maximum(d, d_break) / d_break)
    return a, b


def _retorno(valor: np.ndarray, escalar: bool) -> ArrayLike:
    return float(valor) if escalar else valor


def mean_path_loss(model: PathLossModel, d, link=LinkClass.UNKNOWN) -> ArrayLike:
    """
    Perda de percurso média (sem sombreamento).

    Args:
        model: Modelo de perda
        d: Distância(s) em metros (> 0)
        link: Classe(s) de enlace; obrigatória para o modelo por classe

    Returns:
        Perda em dB (float para entrada escalar, array caso contrário)

    Raises:
        DomainError: d <= 0
        ClassRequiredError: Modelo por classe com enlace UNKNOWN
    """
    escalar = np.ndim(d) == 0 and np.ndim(link) == 0
    d = _distancias(d)
    params = model.params

    if isinstance(params, SingleSlopeParams):
        mu = params.l_ref + 10.0 * params.gamma * np.log10(d / REFERENCE_DISTANCE_M)
    elif isinstance(params, PerLinkClassParams):
        classes = _classes(link, np.shape(d))
        if np.any(classes == LinkClass.UNKNOWN.value):
            raise ClassRequiredError("Modelo por classe exige classe de enlace conhecida")
        mu = np.empty(np.shape(d), dtype=float)
        for classe in (LinkClass.LOS, LinkClass.OLOS, LinkClass.NLOS):
            sub = params.for_link(classe)
            mask = classes == classe.value
            mu[mask] = sub.l_ref + 10.0 * sub.gamma * np.log10(d[mask] / REFERENCE_DISTANCE_M)
    else:
        a, b = design_columns(d, params.d_break)
        mu = params.l_ref + params.gamma1 * a + params.gamma2 * b

    return _retorno(np.asarray(mu, dtype=float), escalar)


def shadowing_sigma(model: PathLossModel, d, link=LinkClass.UNKNOWN) -> ArrayLike:
    """
    Desvio padrão do sombreamento aplicável em (d, link).

    Para inclinação dupla, sigma1 abaixo de d_break e sigma2 a partir dele.

    Args:
        model: Modelo de perda
        d: Distância(s) em metros (> 0)
        link: Classe(s) de enlace

    Returns:
        Sigma em dB
    """
    escalar = np.ndim(d) == 0 and np.ndim(link) == 0
    d = _distancias(d)
    params = model.params

    if isinstance(params, SingleSlopeParams):
        sigma = np.full(np.shape(d), params.sigma)
    elif isinstance(params, PerLinkClassParams):
        classes = _classes(link, np.shape(d))
        if np.any(classes == LinkClass.UNKNOWN.value):
            raise ClassRequiredError("Modelo por classe exige classe de enlace conhecida")
        sigma = np.empty(np.shape(d), dtype=float)
        for classe in (LinkClass.LOS, LinkClass.OLOS, LinkClass.NLOS):
            sigma[classes == classe.value] = params.for_link(classe).sigma
    else:
        sigma = np.where(d >= params.d_break, params.sigma2, params.sigma1)

    return _retorno(np.asarray(sigma, dtype=float), escalar)


def reference_sigma(model: PathLossModel) -> float:
    """Maior sigma entre os regimes do modelo (dB)."""
    params = model.params
    if isinstance(params, SingleSlopeParams):
        return params.sigma
    if isinstance(params, PerLinkClassParams):
        return max(params.for_link(c).sigma for c in (LinkClass.LOS, LinkClass.OLOS, LinkClass.NLOS))
    return max(params.sigma1, params.sigma2)


def theoretical_breakpoint(h_tx: float, h_rx: float, carrier_hz: float) -> float:
    """
    Distância de quebra teórica 4 h_tx h_rx / lambda.

    Args:
        h_tx: Altura da antena TX (m)
        h_rx: Altura da antena RX (m)
        carrier_hz: Frequência da portadora (Hz)

    Returns:
        Distância em metros
    """
    for nome, valor in (('h_tx', h_tx), ('h_rx', h_rx), ('carrier_hz', carrier_hz)):
        if not np.isfinite(valor) or valor <= 0:
            raise DomainError(f"{nome} deve ser > 0 (recebido {valor})")
    comprimento_onda = SPEED_OF_LIGHT / carrier_hz
    return 4.0 * h_tx * h_rx / comprimento_onda
