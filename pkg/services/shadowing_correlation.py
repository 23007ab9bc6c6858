"""
Correlação do sombreamento: resíduos, autocorrelação empírica e ajuste
exponencial (Gudmundson) por mínimos quadrados ponderados.
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import minimize_scalar
from scipy.signal import correlate

from core.models import (AutocorrEstimate, Dataset, Domain, PathLossModel, RecordFilter,
                         ResidualSeries, SigmaBin, SpeedBin, SpeedBucketTable)
from core.pathloss import mean_path_loss
from utils.errors import (DegenerateFitError, DomainError, DomainMismatchError,
                          EmptyDatasetError)

PONTOS_POR_DECADA = 64
DEFAULT_SIGMA_BINS: Tuple[Tuple[float, float], ...] = (
    (0.0, 50.0), (50.0, 100.0), (100.0, 200.0), (200.0, 400.0), (400.0, math.inf),
)


def extract_residuals(model: PathLossModel, data: Dataset,
                      domain: Domain = Domain.DISTANCE) -> List[ResidualSeries]:
    """
    Resíduos de sombreamento em blocos contíguos não censurados.

    d_cum acumula |v_rx| * dt sobre todos os registros da corrida, inclusive
    os censurados, de modo que blocos posteriores mantêm a coordenada real.

    Args:
        model: Modelo ajustado
        data: Dataset ordenado
        domain: Eixo usado depois na reamostragem

    Returns:
        Um ResidualSeries por bloco, na ordem (corrida, tempo)
    """
    if not len(data):
        raise EmptyDatasetError("Dataset vazio")
    domain = Domain.parse(domain)
    arr = data.arrays
    mu = mean_path_loss(model, arr.d, arr.link)
    x = arr.path_loss - mu

    series: List[ResidualSeries] = []
    for run in data.runs():
        idx = np.flatnonzero(arr.run_id == run)
        t = arr.t[idx]
        passos = np.abs(arr.v_rx[idx[1:]]) * np.diff(t)
        d_cum = np.concatenate([[0.0], np.cumsum(passos)])
        livre = ~arr.censored[idx]

        # fronteiras de blocos: transições censurado <-> não censurado
        bordas = np.flatnonzero(np.diff(np.concatenate([[0], livre.astype(int), [0]])))
        for b, (ini, fim) in enumerate(zip(bordas[::2], bordas[1::2])):
            series.append(ResidualSeries(
                run_id=run, t=t[ini:fim], d_cum=d_cum[ini:fim], x=x[idx[ini:fim]],
                domain=domain, block_index=b,
            ))
    logger.debug(f"{len(series)} bloco(s) de resíduos extraído(s)")
    return series


def _media_por_coordenada(c: np.ndarray, *colunas: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Agrupa coordenadas repetidas pela média de cada coluna."""
    unicos, inverso, contagem = np.unique(c, return_inverse=True, return_counts=True)
    if len(unicos) == len(c):
        return (c,) + colunas
    medias = tuple(np.bincount(inverso, weights=col) / contagem for col in colunas)
    return (unicos,) + medias


def resample_uniform(series: ResidualSeries, spacing: float) -> ResidualSeries:
    """
    Interpola linearmente o bloco numa grade uniforme do seu domínio.

    A grade parte da primeira coordenada; a cauda menor que um passo é
    descartada.

    Args:
        series: Bloco de resíduos (>= 2 amostras)
        spacing: Passo da grade (m ou s)

    Returns:
        Bloco reamostrado com grid_spacing definido
    """
    if not math.isfinite(spacing) or spacing <= 0:
        raise DomainError(f"spacing deve ser > 0 (recebido {spacing})")
    if len(series) < 2:
        raise DomainError("Reamostragem exige ao menos 2 amostras no bloco")

    c, x, t, d_cum = _media_por_coordenada(series.coordinates, series.x, series.t, series.d_cum)
    if len(c) < 2:
        raise DomainMismatchError(
            f"Bloco {series.run_id}/{series.block_index} sem avanço no domínio {series.domain.value}"
        )
    n = int(math.floor((c[-1] - c[0]) / spacing + 1e-9)) + 1
    grade = c[0] + spacing * np.arange(n)
    return ResidualSeries(
        run_id=series.run_id,
        t=np.interp(grade, c, t),
        d_cum=np.interp(grade, c, d_cum),
        x=np.interp(grade, c, x),
        domain=series.domain,
        grid_spacing=float(spacing),
        block_index=series.block_index,
    )


def resample_all(series: Sequence[ResidualSeries], spacing: float) -> List[ResidualSeries]:
    """
    Reamostra todos os blocos, descartando os menores que um passo.

    Returns:
        Blocos reamostrados com ao menos 2 amostras
    """
    resultado = []
    descartados = 0
    for s in series:
        if len(s) < 2 or np.ptp(s.coordinates) < spacing:
            descartados += 1
            continue
        resultado.append(resample_uniform(s, spacing))
    if descartados:
        logger.debug(f"{descartados} bloco(s) menor(es) que {spacing:g} descartado(s)")
    return resultado


def _validar_grade(series: Sequence[ResidualSeries]) -> Tuple[Domain, float]:
    if not series:
        raise EmptyDatasetError("Nenhum bloco de resíduos")
    dominios = {s.domain for s in series}
    espacamentos = {s.grid_spacing for s in series}
    if len(dominios) != 1 or len(espacamentos) != 1 or None in espacamentos:
        raise DomainMismatchError(
            "Blocos devem compartilhar domínio e espaçamento (reamostre antes)"
        )
    return dominios.pop(), float(espacamentos.pop())


def autocorrelation(series: Sequence[ResidualSeries], lag_max: Optional[float] = None) -> AutocorrEstimate:
    """
    Autocorrelação empírica agrupada sobre blocos reamostrados.

    R(k) = soma de x_i x_(i+k) dentro de cada bloco / número de produtos.
    Pares nunca atravessam fronteiras de bloco.

    Args:
        series: Blocos com o mesmo domínio e espaçamento
        lag_max: Maior atraso (m ou s); sem limite quando None

    Returns:
        AutocorrEstimate sem ajuste
    """
    domain, spacing = _validar_grade(series)
    maior = max(len(s) for s in series) - 1
    k_max = maior if lag_max is None else min(maior, int(math.floor(lag_max / spacing + 1e-9)))
    if k_max < 0:
        raise EmptyDatasetError("Nenhuma amostra para a autocorrelação")

    somas = np.zeros(k_max + 1)
    contagens = np.zeros(k_max + 1, dtype=np.int64)
    for s in series:
        x = s.x
        n = len(x)
        if n == 0:
            continue
        k = min(k_max, n - 1)
        completa = correlate(x, x, mode='full', method='auto')
        somas[1:k + 1] += completa[n:n + k]
        somas[0] += float(np.dot(x, x))
        contagens[:k + 1] += n - np.arange(k + 1)

    if contagens[0] == 0:
        raise EmptyDatasetError("N(0) = 0: nenhuma amostra")
    ultimo = int(np.flatnonzero(contagens > 0)[-1])
    somas, contagens = somas[:ultimo + 1], contagens[:ultimo + 1]
    r = somas / contagens
    return AutocorrEstimate(
        lags=spacing * np.arange(len(r)),
        r=r,
        n_per_lag=contagens,
        sigma2=float(r[0]),
        domain=domain,
        grid_spacing=spacing,
    )


def weighted_sse(est: AutocorrEstimate, scale) -> np.ndarray:
    """Soma ponderada N(k) (R/sigma2 - exp(-lag/scale))^2 para cada escala."""
    escalas = np.atleast_1d(np.asarray(scale, dtype=float))
    modelo = np.exp(-est.lags[None, :] / escalas[:, None])
    erro = est.normalized[None, :] - modelo
    return (est.n_per_lag[None, :] * erro * erro).sum(axis=1)


def fit_gudmundson(est: AutocorrEstimate) -> AutocorrEstimate:
    """
    Ajusta a escala de decorrelação exponencial.

    Varre uma grade logarítmica (64 pontos por década) entre o espaçamento
    e 100 vezes o maior atraso e refina em escala log entre os vizinhos do
    melhor ponto.

    Returns:
        Cópia de est com fitted_scale e fit_weighted_sse

    Raises:
        DegenerateFitError: Menos de 3 atrasos, sigma2 <= 0 ou R normalizado
            todo >= 1 ou todo <= 0 fora da origem
    """
    if len(est.lags) < 3:
        raise DegenerateFitError("Ajuste exige ao menos 3 atrasos")
    if not est.sigma2 > 0:
        raise DegenerateFitError("sigma2 deve ser > 0")
    rn = est.normalized[1:]
    if np.all(rn >= 1.0) or np.all(rn <= 0.0):
        raise DegenerateFitError("Autocorrelação normalizada sem decaimento utilizável")

    inferior = est.grid_spacing
    superior = 100.0 * float(est.lags[-1])
    n_pontos = int(math.ceil(PONTOS_POR_DECADA * math.log10(superior / inferior))) + 1
    grade = np.logspace(math.log10(inferior), math.log10(superior), n_pontos)
    sse = weighted_sse(est, grade)
    i = int(np.argmin(sse))
    melhor_escala, melhor_sse = float(grade[i]), float(sse[i])

    a = math.log(grade[max(i - 1, 0)])
    b = math.log(grade[min(i + 1, n_pontos - 1)])
    if b > a:
        refino = minimize_scalar(
            lambda u: float(weighted_sse(est, math.exp(u))[0]),
            bounds=(a, b), method='bounded', options={'xatol': 1e-10},
        )
        if refino.fun <= melhor_sse:
            melhor_escala, melhor_sse = math.exp(refino.x), float(refino.fun)

    logger.debug(f"Gudmundson: escala={melhor_escala:.4g} ({est.domain.value}) SSE={melhor_sse:.4g}")
    return est.with_fit(melhor_escala, melhor_sse)


def estimate_decorrelation(model: PathLossModel, data: Dataset, domain: Domain,
                           spacing: float, lag_max: float) -> AutocorrEstimate:
    """Resíduos, reamostragem, autocorrelação e ajuste em sequência."""
    domain = Domain.parse(domain)
    blocos = resample_all(extract_residuals(model, data, domain), spacing)
    if not blocos:
        raise EmptyDatasetError(f"Nenhum bloco maior que {spacing:g} no domínio {domain.value}")
    return fit_gudmundson(autocorrelation(blocos, lag_max))


# ============================================================================
# Faixas de velocidade
# ============================================================================

def _indice_faixa(valores: np.ndarray, faixas: Sequence[SpeedBin]) -> np.ndarray:
    idx = np.full(len(valores), -1, dtype=int)
    for k, (lo, hi) in enumerate(faixas):
        idx[(valores >= lo) & (valores < hi) & (idx < 0)] = k
    return idx


def _velocidades(serie: ResidualSeries, data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """|v_rx| e |v_tx - v_rx| da corrida interpolados nos instantes do bloco."""
    arr = data.arrays
    mask = arr.run_id == serie.run_id
    if not np.any(mask):
        raise DomainError(f"Corrida {serie.run_id} ausente do dataset")
    t = arr.t[mask]
    v_rx = np.interp(serie.t, t, arr.v_rx[mask])
    v_tx = np.interp(serie.t, t, arr.v_tx[mask])
    return np.abs(v_rx), np.abs(v_tx - v_rx)


def _trechos(serie: ResidualSeries, celula: np.ndarray) -> Dict[int, List[ResidualSeries]]:
    """Divide o bloco em trechos contíguos de mesma célula."""
    resultado: Dict[int, List[ResidualSeries]] = {}
    if not len(celula):
        return resultado
    cortes = np.flatnonzero(np.diff(celula)) + 1
    inicios = np.concatenate([[0], cortes])
    fins = np.concatenate([cortes, [len(celula)]])
    for ini, fim in zip(inicios, fins):
        c = int(celula[ini])
        if c < 0:
            continue
        resultado.setdefault(c, []).append(ResidualSeries(
            run_id=serie.run_id, t=serie.t[ini:fim], d_cum=serie.d_cum[ini:fim], x=serie.x[ini:fim],
            domain=serie.domain, grid_spacing=serie.grid_spacing, block_index=serie.block_index,
        ))
    return resultado


def bucketed_decorrelation(series: Sequence[ResidualSeries], records: Dataset,
                           rx_speed_bins: Sequence[SpeedBin] = ((0, 10), (10, 20), (20, 30), (30, 40)),
                           rel_speed_bins: Sequence[SpeedBin] = ((0, 5), (5, 15)),
                           min_samples_rule: int = 100,
                           lag_max: Optional[float] = None) -> SpeedBucketTable:
    """
    Tempo de decorrelação por faixa de |v_rx| e |v_tx - v_rx|.

    Cada célula reúne os trechos contíguos de amostras na faixa e recebe
    autocorrelação e ajuste próprios. A célula fica ausente quando há menos
    de min_samples_rule produtos no atraso da escala ajustada.

    Args:
        series: Blocos reamostrados no domínio do tempo
        records: Dataset de onde vêm as velocidades
        rx_speed_bins: Faixas de |v_rx| (linhas)
        rel_speed_bins: Faixas de |v_tx - v_rx| (colunas)
        min_samples_rule: Mínimo de produtos no atraso da escala
        lag_max: Maior atraso (s)

    Returns:
        SpeedBucketTable
    """
    rx_bins = tuple((float(a), float(b)) for a, b in rx_speed_bins)
    rel_bins = tuple((float(a), float(b)) for a, b in rel_speed_bins)
    if series:
        domain, _ = _validar_grade(series)
        if domain is not Domain.TIME:
            raise DomainMismatchError("Tabela por velocidade exige blocos no domínio do tempo")

    n_rel = len(rel_bins)
    por_celula: Dict[int, List[ResidualSeries]] = {}
    for serie in series:
        abs_rx, rel = _velocidades(serie, records)
        i = _indice_faixa(abs_rx, rx_bins)
        j = _indice_faixa(rel, rel_bins)
        celula = np.where((i >= 0) & (j >= 0), i * n_rel + j, -1)
        for c, trechos in _trechos(serie, celula).items():
            por_celula.setdefault(c, []).extend(trechos)

    t_c: List[List[Optional[float]]] = [[None] * n_rel for _ in rx_bins]
    n_escala: List[List[int]] = [[0] * n_rel for _ in rx_bins]
    for c, trechos in sorted(por_celula.items()):
        i, j = divmod(c, n_rel)
        rotulo = f"|v_rx| {rx_bins[i]} x |dv| {rel_bins[j]}"
        try:
            est = fit_gudmundson(autocorrelation(trechos, lag_max))
        except (DegenerateFitError, EmptyDatasetError) as e:
            logger.warning(f"Célula {rotulo} ausente: {e}")
            continue
        k = int(round(est.fitted_scale / est.grid_spacing))
        n = int(est.n_per_lag[k]) if k < len(est.n_per_lag) else 0
        n_escala[i][j] = n
        if n < min_samples_rule:
            logger.warning(
                f"Célula {rotulo} suprimida: {n} amostra(s) no atraso {est.fitted_scale:.2f} s "
                f"(mínimo {min_samples_rule})"
            )
            continue
        t_c[i][j] = est.fitted_scale

    return SpeedBucketTable(
        rx_speed_bins=rx_bins,
        rel_speed_bins=rel_bins,
        t_c=tuple(tuple(linha) for linha in t_c),
        n_at_scale=tuple(tuple(linha) for linha in n_escala),
        min_samples_rule=min_samples_rule,
    )


def sigma_vs_distance(model: PathLossModel, data: Dataset,
                      bins: Sequence[Tuple[float, float]] = DEFAULT_SIGMA_BINS) -> List[SigmaBin]:
    """
    Desvio padrão dos resíduos por faixa de distância [lo, hi).

    Só entram amostras não censuradas. Faixas vazias ou com uma única
    amostra são marcadas, não estimadas.

    Args:
        model: Modelo ajustado
        data: Dataset
        bins: Faixas disjuntas de distância (m)

    Returns:
        Um SigmaBin por faixa, na ordem recebida
    """
    faixas = [(float(lo), float(hi)) for lo, hi in bins]
    if not faixas:
        raise DomainError("Nenhuma faixa de distância")
    for lo, hi in faixas:
        if not lo < hi:
            raise DomainError(f"Faixa inválida [{lo}, {hi})")
    ordenadas = sorted(faixas)
    for (_, hi), (lo, _) in zip(ordenadas, ordenadas[1:]):
        if lo < hi:
            raise DomainError("Faixas de distância se sobrepõem")

    livres = data.filtrar([RecordFilter('path_loss', 'menor', data.censor_level)]) if len(data) else data
    if not len(livres):
        raise EmptyDatasetError("Nenhuma amostra não censurada")
    arr = livres.arrays
    x = arr.path_loss - mean_path_loss(model, arr.d, arr.link)

    fora = np.ones(len(livres), dtype=bool)
    resultado = []
    for lo, hi in faixas:
        mask = RecordFilter('d', 'entre', lo, hi).mask(livres)
        fora &= ~mask
        n = int(np.count_nonzero(mask))
        if n == 0:
            resultado.append(SigmaBin(lo, hi, None, 0, 'empty'))
        elif n == 1:
            resultado.append(SigmaBin(lo, hi, None, 1, 'degenerate'))
        else:
            resultado.append(SigmaBin(lo, hi, float(np.std(x[mask], ddof=1)), n, 'ok'))
    if np.any(fora):
        logger.warning(f"{int(np.count_nonzero(fora))} amostra(s) fora das faixas de distância")
    return resultado
