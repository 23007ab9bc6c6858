"""
Simulador de campanhas V2V: perda média de qualquer modelo somada a um
sombreamento gaussiano com autocorrelação exponencial (AR(1)).

Gerador: numpy.random.Generator sobre Philox (contador, 64 bits), normais
pela transformação ziggurat de standard_normal.
"""

import math
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.signal import lfilter

from core.models import (Dataset, Domain, GpsTrack, PathLossModel, RawCampaign,
                         TimeSeries, TrajectorySpec)
from core.pathloss import mean_path_loss, reference_sigma, shadowing_sigma
from utils.errors import DomainError, DomainMismatchError, SchemaError
from utils.geodesy import destination

SIGMA_MODES = ("model", "process")

# Origem padrão das trajetórias sintéticas (lat, lon)
DEFAULT_ORIGIN = (52.4064, 16.9252)


def make_rng(seed: int) -> np.random.Generator:
    """Gerador determinístico usado por toda a simulação."""
    return np.random.Generator(np.random.Philox(int(seed)))


class ShadowingProcess:
    """
    Processo gaussiano de sombreamento com ACF sigma^2 exp(-delta/scale).

    O estado é guardado normalizado (variância unitária); o valor emitido é
    sigma vezes o estado. Trocar sigma (rescale) multiplica o valor por
    sigma_novo/sigma_antigo sem descontinuidade no estado.

    Attributes:
        sigma: Desvio padrão (dB, >= 0)
        scale: d_c (m) ou t_c (s)
        domain: DISTANCE ou TIME
        rng_seed: Semente do gerador
        coordinate: Coordenada acumulada (m ou s)
    """

    def __init__(self, sigma: float, scale: float, domain: Domain = Domain.TIME, rng_seed: int = 0):
        if not math.isfinite(sigma) or sigma < 0:
            raise DomainError(f"sigma deve ser >= 0 (recebido {sigma})")
        if not math.isfinite(scale) or scale <= 0:
            raise DomainError(f"scale deve ser > 0 (recebido {scale})")
        self.sigma = float(sigma)
        self.scale = float(scale)
        self.domain = Domain.parse(domain)
        self.reseed(rng_seed)

    def reseed(self, seed: int) -> None:
        """Reinicia o gerador e sorteia o estado da distribuição estacionária."""
        self.rng_seed = int(seed)
        self._rng = make_rng(self.rng_seed)
        self._u = float(self._rng.standard_normal())
        self.coordinate = 0.0

    @property
    def value(self) -> float:
        """Último valor emitido (dB)."""
        return self.sigma * self._u

    def rescale(self, sigma_novo: float) -> None:
        """Troca o desvio padrão mantendo o estado normalizado."""
        if not math.isfinite(sigma_novo) or sigma_novo < 0:
            raise DomainError(f"sigma deve ser >= 0 (recebido {sigma_novo})")
        self.sigma = float(sigma_novo)

    def step(self, delta: float) -> float:
        """
        Avança o processo de delta (m ou s).

        u' = rho u + sqrt(1 - rho^2) eps, rho = exp(-delta/scale).

        Returns:
            Novo valor (dB)
        """
        if not delta >= 0:
            raise DomainError(f"delta deve ser >= 0 (recebido {delta})")
        rho = math.exp(-delta / self.scale)
        eps = float(self._rng.standard_normal())
        self._u = rho * self._u + math.sqrt(1.0 - rho * rho) * eps
        self.coordinate += delta
        return self.value

    def step_many(self, deltas: Sequence[float], fatores: Optional[Sequence[float]] = None) -> np.ndarray:
        """
        Avança o processo por vários passos.

        O primeiro passo é feito à parte: nas trajetórias ele costuma ter
        incremento nulo, e o restante, quando uniforme, passa pelo filtro IIR.

        Args:
            deltas: Incrementos (>= 0)
            fatores: Multiplicador de sigma em cada passo (>= 0, padrão 1);
                o sigma do processo não é alterado

        Returns:
            Valores (dB), um por passo
        """
        deltas = np.asarray(deltas, dtype=float)
        if deltas.size == 0:
            return np.zeros(0)
        if np.any(~(deltas >= 0)):
            raise DomainError("deltas devem ser >= 0")
        if fatores is not None:
            fatores = np.asarray(fatores, dtype=float)
            if fatores.shape != deltas.shape:
                raise DomainError("fatores e deltas com tamanhos diferentes")
            if np.any(~(fatores >= 0)):
                raise DomainError("fatores devem ser >= 0")

        eps = self._rng.standard_normal(len(deltas))
        rho = np.exp(-deltas / self.scale)
        ganho = np.sqrt(1.0 - rho * rho)

        u = np.empty(len(deltas))
        u[0] = rho[0] * self._u + ganho[0] * eps[0]
        resto = deltas[1:]
        if resto.size and np.allclose(resto, resto[0], rtol=1e-12, atol=0.0):
            # passo constante a menos do arredondamento da grade: filtro IIR de primeira ordem
            u[1:], _ = lfilter([ganho[1]], [1.0, -rho[1]], eps[1:], zi=[rho[1] * u[0]])
        else:
            for k in range(1, len(deltas)):
                u[k] = rho[k] * u[k - 1] + ganho[k] * eps[k]

        self._u = float(u[-1])
        self.coordinate += float(deltas.sum())
        if fatores is None:
            return self.sigma * u
        return self.sigma * fatores * u


def step_shadowing(proc: ShadowingProcess, delta: float) -> float:
    """Avança o processo um passo (ver ShadowingProcess.step)."""
    return proc.step(delta)


def _incrementos(traj: TrajectorySpec, t: np.ndarray, domain: Domain) -> np.ndarray:
    dt = np.diff(t, prepend=t[0])
    if domain is Domain.TIME:
        return dt
    v_rx = np.abs(traj.v_rx_at(t))
    if not np.any(v_rx > 0):
        raise DomainMismatchError("Sombreamento no domínio da distância exige RX em movimento")
    # mesma convenção de d_cum: |v_rx,i| * (t_i - t_i-1)
    return v_rx * dt


def simulate_campaign_with_trace(model: PathLossModel, traj: TrajectorySpec, shadow: ShadowingProcess,
                                 censor_level: float, seed: int, run_id: str = "run-1",
                                 sigma_mode: str = "model") -> Tuple[Dataset, np.ndarray]:
    """
    Simula uma corrida e devolve também o sombreamento sorteado.

    Returns:
        Tupla (Dataset, sombreamento por amostra em dB)
    """
    if sigma_mode not in SIGMA_MODES:
        raise DomainError(f"sigma_mode inválido: {sigma_mode}")
    if math.isnan(censor_level):
        raise DomainError("censor_level não pode ser NaN")

    t = traj.times()
    if len(t) == 0:
        raise DomainError("Trajetória sem amostras (duration < sample_period)")
    d = traj.distance_at(t)
    links = traj.link_at(t)
    mu = mean_path_loss(model, d, links)

    shadow.reseed(seed)
    deltas = _incrementos(traj, t, shadow.domain)
    if sigma_mode == "model":
        # sigma do processo corresponde ao maior sigma do modelo; os regimes
        # escalam o estado pela razão entre os sigmas
        x = shadow.step_many(deltas, shadowing_sigma(model, d, links) / reference_sigma(model))
    else:
        x = shadow.step_many(deltas)

    pl = mu + x
    dataset = Dataset.from_arrays(
        t=t, d=d, path_loss=pl, censor_level=censor_level,
        v_tx=traj.v_tx_at(t), v_rx=traj.v_rx_at(t), link=links, run_id=run_id,
    )
    logger.info(
        f"Simulação {run_id}: {len(dataset)} amostras, {dataset.censored_fraction:.1%} censuradas"
    )
    return dataset, x


def simulate_campaign(model: PathLossModel, traj: TrajectorySpec, shadow: ShadowingProcess,
                      censor_level: float, seed: int, run_id: str = "run-1",
                      sigma_mode: str = "model") -> Dataset:
    """
    Simula uma campanha.

    Amostras com perda >= censor_level mantêm o valor verdadeiro, mas são
    marcadas como censuradas.

    Args:
        model: Modelo de perda
        traj: Trajetória
        shadow: Processo de sombreamento (reiniciado com seed)
        censor_level: Nível de censura (dB)
        seed: Semente da corrida
        run_id: Identificador da corrida
        sigma_mode: 'model' escala o sigma do processo pela razão entre o
            sigma do modelo na amostra e o maior sigma do modelo;
            'process' usa o sigma do processo em todas as amostras

    Returns:
        Dataset determinístico para sementes fixas
    """
    dataset, _ = simulate_campaign_with_trace(model, traj, shadow, censor_level, seed, run_id, sigma_mode)
    return dataset


def _ar1(rng: np.random.Generator, n: int, sigma: float, rho: float) -> np.ndarray:
    """Série AR(1) estacionária de desvio sigma."""
    if n == 0:
        return np.zeros(0)
    eps = rng.standard_normal(n)
    inicio = sigma * eps[0]
    if n == 1:
        return np.array([inicio])
    resto, _ = lfilter([sigma * math.sqrt(1 - rho * rho)], [1.0, -rho], eps[1:], zi=[rho * inicio])
    return np.concatenate([[inicio], resto])


def corrupt_distances(data: Dataset, gps_sigma: float = 5.4, gps_corr_time: float = 10.0,
                      uwb_sigma: float = 0.036, uwb_range: float = 100.0, uwb_rate: float = 3.5,
                      seed: int = 0, uwb_cable_bias: float = 5.0,
                      origin: Tuple[float, float] = DEFAULT_ORIGIN) -> RawCampaign:
    """
    Gera observações brutas ruidosas (GPS a 1 Hz e UWB) de uma corrida.

    O RX anda para o norte ao longo do meridiano da origem; o TX é posto a
    |d + e| metros do RX, com e o erro de distância GPS (AR(1), constante
    de tempo gps_corr_time). O UWB só reporta quando d <= uwb_range, com
    ruído gaussiano e o viés do cabo somado.

    Args:
        data: Dataset de uma única corrida
        gps_sigma: Desvio do erro de distância GPS (m)
        gps_corr_time: Constante de tempo do erro GPS (s)
        uwb_sigma: Desvio do erro UWB (m)
        uwb_range: Alcance do UWB (m, >= 0)
        uwb_rate: Taxa do UWB (Hz)
        seed: Semente
        uwb_cable_bias: Viés somado pelos cabos (m)
        origin: (lat, lon) inicial do RX

    Returns:
        RawCampaign
    """
    for nome, valor in (('gps_sigma', gps_sigma), ('gps_corr_time', gps_corr_time),
                        ('uwb_sigma', uwb_sigma), ('uwb_rate', uwb_rate)):
        if not math.isfinite(valor) or valor <= 0:
            raise DomainError(f"{nome} deve ser > 0 (recebido {valor})")
    if uwb_range < 0 or uwb_cable_bias < 0:
        raise DomainError("uwb_range e uwb_cable_bias devem ser >= 0")
    if len(data.runs()) != 1:
        raise DomainError("corrupt_distances processa uma corrida por vez")

    rng = make_rng(seed)
    arr = data.arrays
    t, d = arr.t, arr.d
    deslocamento = np.concatenate([[0.0], np.cumsum(np.abs(arr.v_rx[1:]) * np.diff(t))])

    t_gps = np.arange(math.ceil(t[0]), math.floor(t[-1]) + 1, dtype=float)
    if len(t_gps) < 2:
        raise DomainError("Corrida curta demais para fixos GPS a 1 Hz")
    d_gps = np.interp(t_gps, t, d)
    erro = _ar1(rng, len(t_gps), gps_sigma, math.exp(-1.0 / gps_corr_time))
    s_rx = np.interp(t_gps, t, deslocamento)

    lat_rx, lon_rx = destination(origin[0], origin[1], 0.0, s_rx)
    medida = d_gps + erro
    azimute = np.where(medida >= 0, 0.0, 180.0)
    lat_tx, lon_tx = destination(lat_rx, lon_rx, azimute, np.abs(medida))

    if uwb_range > 0:
        t_uwb = t[0] + np.arange(int(math.floor((t[-1] - t[0]) * uwb_rate)) + 1) / uwb_rate
        d_uwb = np.interp(t_uwb, t, d)
        dentro = d_uwb <= uwb_range
        t_uwb, d_uwb = t_uwb[dentro], d_uwb[dentro]
        reportado = d_uwb + uwb_sigma * rng.standard_normal(len(d_uwb)) + uwb_cable_bias
    else:
        t_uwb, reportado = np.zeros(0), np.zeros(0)

    logger.info(f"Sensores sintéticos: {len(t_gps)} fixos GPS, {len(t_uwb)} distâncias UWB")
    return RawCampaign(
        rf=TimeSeries(t, arr.path_loss),
        gps_tx=GpsTrack(t_gps, lat_tx, lon_tx),
        gps_rx=GpsTrack(t_gps, lat_rx, lon_rx),
        uwb=TimeSeries(t_uwb, reportado),
        uwb_cable_bias=uwb_cable_bias,
        gps_sigma=gps_sigma,
        uwb_sigma=uwb_sigma,
        gps_corr_time=gps_corr_time,
    )


# ============================================================================
# Configuração de simulação
# ============================================================================

_CHAVES_SYNTH = {'model', 'trajectory', 'shadowing', 'run_id', 'sigma_mode', 'sensors'}


def campaign_from_config(synth: Dict[str, Any], resolver_modelo) -> Tuple[PathLossModel, TrajectorySpec,
                                                                         ShadowingProcess, Dict[str, Any]]:
    """
    Monta os objetos de simulação a partir do bloco 'synth' da configuração.

    Args:
        synth: Bloco com model (nome de preset ou documento), trajectory,
            shadowing (sigma, scale, domain), run_id, sigma_mode e sensors
        resolver_modelo: Função nome -> PathLossModel (presets)

    Returns:
        Tupla (modelo, trajetória, processo, opções)
    """
    extras = set(synth) - _CHAVES_SYNTH
    if extras:
        raise SchemaError(f"Chaves desconhecidas em synth: {sorted(extras)}")
    for chave in ('model', 'trajectory', 'shadowing'):
        if chave not in synth:
            raise SchemaError(f"synth.{chave} ausente")

    modelo_cfg = synth['model']
    model = resolver_modelo(modelo_cfg) if isinstance(modelo_cfg, str) else PathLossModel.from_dict(modelo_cfg)
    traj = TrajectorySpec.from_dict(synth['trajectory'])

    sombra = dict(synth['shadowing'])
    try:
        proc = ShadowingProcess(
            sigma=float(sombra.get('sigma', 0.0)),
            scale=float(sombra['scale']),
            domain=Domain.parse(sombra.get('domain', 'time')),
        )
    except KeyError:
        raise SchemaError("synth.shadowing.scale ausente") from None

    opcoes = {
        'run_id': str(synth.get('run_id', 'run-1')),
        'sigma_mode': synth.get('sigma_mode', 'model'),
        'sensors': dict(synth.get('sensors', {})),
    }
    return model, traj, proc, opcoes
