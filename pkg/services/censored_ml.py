"""
Ajuste por máxima verossimilhança com amostras censuradas à direita.

Amostras não censuradas contribuem com a densidade normal dos resíduos;
amostras censuradas contribuem com a probabilidade de a perda exceder o
nível de censura. O desvio padrão é otimizado em escala logarítmica.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.optimize import minimize
from scipy.special import log_ndtr

from core.models import (REFERENCE_DISTANCE_M, Dataset, DoubleSlopeParams, FailedFit,
                         FitResult, LinkClass, ModelFamily, PathLossModel, PerLinkClassParams,
                         RecordFilter, SingleSlopeParams)
from core.pathloss import design_columns, mean_path_loss, shadowing_sigma
from utils.errors import (ClassRequiredError, DomainError, EmptyDatasetError,
                          InsufficientDataError)
from workers.sweep_worker import SweepWorker

_LOG_RAIZ_2PI = 0.5 * math.log(2.0 * math.pi)

# Critérios de parada do simplex
XATOL = 1e-6
FATOL = 1e-8
PERTURBACAO = 0.2

SweepEntry = Union[FitResult, FailedFit]


def _log_verossimilhanca(pl: np.ndarray, censored: np.ndarray, censor_level: float,
                         mu: np.ndarray, sigma: np.ndarray,
                         pesos: Optional[np.ndarray] = None) -> float:
    """Soma vetorizada das contribuições censuradas e não censuradas."""
    termos = np.empty(len(pl), dtype=float)
    livre = ~censored
    z = (pl[livre] - mu[livre]) / sigma[livre]
    termos[livre] = -0.5 * z * z - _LOG_RAIZ_2PI - np.log(sigma[livre])
    zc = (censor_level - mu[censored]) / sigma[censored]
    termos[censored] = log_ndtr(-zc)
    # ponto de entrada para ponderação por distância (não usada)
    if pesos is not None:
        termos *= pesos
    return float(np.sum(termos))


def bic(log_likelihood: float, n: int, k: int) -> float:
    """
    Critério de informação bayesiano k ln(n) - 2 LL.

    Args:
        log_likelihood: Log-verossimilhança (nats)
        n: Número de amostras (>= 1)
        k: Número de parâmetros livres (>= 1)

    Returns:
        BIC (menor é melhor)
    """
    if n < 1:
        raise DomainError(f"BIC exige n >= 1 (recebido {n})")
    if k < 1:
        raise DomainError(f"BIC exige k >= 1 (recebido {k})")
    return k * math.log(n) - 2.0 * log_likelihood


def censored_log_likelihood(model: PathLossModel, data: Dataset) -> float:
    """
    Log-verossimilhança censurada do modelo sobre o dataset.

    Args:
        model: Modelo avaliado
        data: Dataset (não vazio)

    Returns:
        Log-verossimilhança em nats
    """
    if not len(data):
        raise EmptyDatasetError("Dataset vazio")
    arr = data.arrays
    mu = mean_path_loss(model, arr.d, arr.link)
    sigma = shadowing_sigma(model, arr.d, arr.link)
    if np.any(sigma <= 0):
        raise DomainError("sigma do modelo deve ser > 0")
    return _log_verossimilhanca(arr.path_loss, arr.censored, data.censor_level, mu, sigma)


def rmse(model: PathLossModel, data: Dataset) -> float:
    """
    Raiz do erro quadrático médio sobre as amostras não censuradas.

    Raises:
        EmptyDatasetError: Nenhuma amostra não censurada
    """
    if not len(data):
        raise EmptyDatasetError("Dataset vazio")
    arr = data.arrays
    livre = ~arr.censored
    if not np.any(livre):
        raise EmptyDatasetError("Nenhuma amostra não censurada para o RMSE")
    mu = mean_path_loss(model, arr.d[livre], arr.link[livre])
    return float(np.sqrt(np.mean((arr.path_loss[livre] - mu) ** 2)))


# ============================================================================
# Otimização
# ============================================================================

@dataclass
class _Problema:
    """Regressão linear censurada com grupos de sigma."""
    pl: np.ndarray
    censored: np.ndarray
    censor_level: float
    desenho: np.ndarray          # n x p
    grupo_sigma: np.ndarray      # índice do sigma de cada amostra
    n_sigmas: int

    @property
    def n_beta(self) -> int:
        return self.desenho.shape[1]

    def custo(self, theta: np.ndarray) -> float:
        beta = theta[:self.n_beta]
        log_sigma = theta[self.n_beta:]
        if np.any(np.abs(log_sigma) > 50):
            return np.inf
        sigma = np.exp(log_sigma)[self.grupo_sigma]
        mu = self.desenho @ beta
        ll = _log_verossimilhanca(self.pl, self.censored, self.censor_level, mu, sigma)
        return -ll if math.isfinite(ll) else np.inf

    def ponto_inicial(self) -> np.ndarray:
        """Mínimos quadrados sobre as amostras não censuradas."""
        livre = ~self.censored
        beta, *_ = np.linalg.lstsq(self.desenho[livre], self.pl[livre], rcond=None)
        residuos = self.pl[livre] - self.desenho[livre] @ beta
        geral = float(np.sqrt(np.mean(residuos ** 2))) or 1.0
        sigmas = []
        for g in range(self.n_sigmas):
            r = residuos[self.grupo_sigma[livre] == g]
            s = float(np.sqrt(np.mean(r ** 2))) if len(r) >= 2 else geral
            sigmas.append(max(s, 1e-3))
        return np.concatenate([beta, np.log(sigmas)])


@dataclass
class _Otimo:
    theta: np.ndarray
    custo: float
    convergiu: bool
    avaliacoes: int
    inicios: List[float] = field(default_factory=list)


def _otimizar(problema: _Problema, n_starts: int, seed: int) -> _Otimo:
    """Nelder-Mead com múltiplos inícios; retorna o melhor."""
    if n_starts < 1:
        raise DomainError("n_starts deve ser >= 1")
    x0 = problema.ponto_inicial()
    rng = np.random.default_rng(seed)
    p = problema.n_beta

    inicios = [x0]
    for _ in range(n_starts - 1):
        fator = rng.uniform(1 - PERTURBACAO, 1 + PERTURBACAO, size=len(x0))
        beta = x0[:p] * fator[:p]
        log_sigma = x0[p:] + np.log(fator[p:])
        inicios.append(np.concatenate([beta, log_sigma]))

    melhor: Optional[_Otimo] = None
    avaliacoes = 0
    custos = []
    for k, inicio in enumerate(inicios):
        res = minimize(
            problema.custo, inicio, method='Nelder-Mead',
            options={'xatol': XATOL, 'fatol': FATOL, 'maxiter': 4000 * len(x0),
                     'maxfev': 8000 * len(x0), 'adaptive': len(x0) > 3},
        )
        avaliacoes += int(res.nfev)
        custos.append(float(res.fun))
        logger.debug(f"início {k}: -LL={res.fun:.6f} nfev={res.nfev} sucesso={res.success}")
        if melhor is None or res.fun < melhor.custo:
            melhor = _Otimo(np.asarray(res.x, dtype=float), float(res.fun), bool(res.success), 0)
    melhor.avaliacoes = avaliacoes
    melhor.inicios = custos
    return melhor


def _problema_ss(data: Dataset) -> _Problema:
    arr = data.arrays
    desenho = np.column_stack([np.ones(len(data)), 10.0 * np.log10(arr.d / REFERENCE_DISTANCE_M)])
    return _Problema(arr.path_loss, arr.censored, data.censor_level, desenho,
                     np.zeros(len(data), dtype=int), 1)


def _problema_dupla(data: Dataset, d_break: float, compartilhado: bool) -> _Problema:
    arr = data.arrays
    a, b = design_columns(arr.d, d_break)
    desenho = np.column_stack([np.ones(len(data)), a, b])
    grupo = np.zeros(len(data), dtype=int) if compartilhado else (arr.d >= d_break).astype(int)
    return _Problema(arr.path_loss, arr.censored, data.censor_level, desenho, grupo,
                     1 if compartilhado else 2)


def _montar_resultado(model: PathLossModel, data: Dataset, convergiu: bool, avaliacoes: int) -> FitResult:
    ll = censored_log_likelihood(model, data)
    return FitResult(
        model=model,
        log_likelihood=ll,
        bic=bic(ll, len(data), model.parameter_count()),
        rmse=rmse(model, data),
        n_total=len(data),
        n_censored=data.n_censored,
        converged=convergiu,
        n_evaluations=avaliacoes,
    )


def _ajustar_ss(data: Dataset, n_starts: int, seed: int) -> Tuple[SingleSlopeParams, bool, int]:
    otimo = _otimizar(_problema_ss(data), n_starts, seed)
    l_ref, gamma, log_sigma = otimo.theta
    return SingleSlopeParams(l_ref, gamma, math.exp(log_sigma)), otimo.convergiu, otimo.avaliacoes


def _exigir_nao_censuradas(data: Dataset, minimo: int = 2, contexto: str = "") -> None:
    livres = len(data) - data.n_censored
    if livres < minimo:
        raise InsufficientDataError(
            f"{contexto}{livres} amostra(s) não censurada(s); mínimo {minimo}"
        )


def fit(family, data: Dataset, d_break: Optional[float] = None,
        n_starts: int = 5, seed: int = 0) -> FitResult:
    """
    Ajusta uma família de modelos por ML censurada.

    Args:
        family: ss, per_class, dsss ou dsds
        data: Dataset não vazio
        d_break: Quebra fixa (obrigatória para dsss/dsds)
        n_starts: Inícios do simplex (o primeiro parte de mínimos quadrados)
        seed: Semente das perturbações dos inícios

    Returns:
        FitResult; converged=False quando o otimizador não atinge o critério

    Raises:
        EmptyDatasetError: Dataset vazio
        InsufficientDataError: Sem amostras não censuradas suficientes
        ClassRequiredError: Modelo por classe com registros UNKNOWN
    """
    family = ModelFamily.parse(family)
    if not len(data):
        raise EmptyDatasetError("Dataset vazio")
    _exigir_nao_censuradas(data, 2)

    if family is ModelFamily.SS:
        params, convergiu, avaliacoes = _ajustar_ss(data, n_starts, seed)
        model = PathLossModel(params)

    elif family is ModelFamily.PER_CLASS:
        if np.any(data.arrays.link == LinkClass.UNKNOWN.value):
            raise ClassRequiredError("Ajuste por classe exige todos os registros com classe conhecida")
        subs, convergiu, avaliacoes = {}, True, 0
        for classe in (LinkClass.LOS, LinkClass.OLOS, LinkClass.NLOS):
            subset = data.filtrar([RecordFilter('link', 'igual', classe)])
            if not len(subset):
                raise InsufficientDataError(f"Classe {classe.value} sem amostras")
            _exigir_nao_censuradas(subset, 2, f"Classe {classe.value}: ")
            params, ok, n = _ajustar_ss(subset, n_starts, seed)
            subs[classe] = params
            convergiu &= ok
            avaliacoes += n
        model = PathLossModel(PerLinkClassParams(subs[LinkClass.LOS], subs[LinkClass.OLOS], subs[LinkClass.NLOS]))

    else:
        if d_break is None:
            raise DomainError(f"Família {family.value} exige d_break")
        if not math.isfinite(d_break) or d_break <= 0:
            raise DomainError(f"d_break deve ser > 0 (recebido {d_break})")
        arr = data.arrays
        livre = ~arr.censored
        abaixo = int(np.count_nonzero(livre & (arr.d < d_break)))
        acima = int(np.count_nonzero(livre & (arr.d >= d_break)))
        if abaixo < 2 or acima < 2:
            raise InsufficientDataError(
                f"d_break={d_break:g} m: {abaixo} amostra(s) abaixo e {acima} acima; mínimo 2 de cada lado"
            )
        compartilhado = family is ModelFamily.DSSS
        otimo = _otimizar(_problema_dupla(data, d_break, compartilhado), n_starts, seed)
        l_ref, g1, g2, *log_sigmas = otimo.theta
        sigmas = [math.exp(s) for s in log_sigmas]
        if compartilhado:
            params = DoubleSlopeParams.dsss(l_ref, g1, g2, d_break, sigmas[0])
        else:
            params = DoubleSlopeParams(l_ref, g1, g2, d_break, sigmas[0], sigmas[1])
        model = PathLossModel(params)
        convergiu, avaliacoes = otimo.convergiu, otimo.avaliacoes

    resultado = _montar_resultado(model, data, convergiu, avaliacoes)
    if not resultado.converged:
        logger.warning(f"Ajuste {family.value} não convergiu (melhor -LL={-resultado.log_likelihood:.3f})")
    logger.info(
        f"Ajuste {family.value}"
        + (f" d_break={d_break:g}" if family.is_double_slope else "")
        + f": LL={resultado.log_likelihood:.3f} BIC={resultado.bic:.3f} RMSE={resultado.rmse:.3f} dB"
    )
    return resultado


def sweep_breakpoint(family, data: Dataset, candidates: Sequence[float], n_starts: int = 5,
                     seed: int = 0, max_workers: int = 1,
                     progresso: Optional[Callable[[int, int], None]] = None,
                     status: Optional[Callable[[str], None]] = None) -> List[SweepEntry]:
    """
    Ajusta a família de inclinação dupla em cada quebra candidata.

    Erros de um candidato viram FailedFit sem abortar a varredura.

    Args:
        family: dsss ou dsds
        data: Dataset
        candidates: Quebras candidatas (m, > 0)
        n_starts: Inícios por ajuste
        seed: Semente
        max_workers: Threads da varredura
        progresso: Callback (atual, total)
        status: Mensagens de início e fim da varredura

    Returns:
        Um resultado por candidato, na ordem dos candidatos
    """
    family = ModelFamily.parse(family)
    if not family.is_double_slope:
        raise DomainError(f"Varredura de quebra exige dsss ou dsds (recebido {family.value})")
    candidatos = [float(c) for c in candidates]
    if not candidatos:
        raise DomainError("Lista de candidatos vazia")
    if any(not math.isfinite(c) or c <= 0 for c in candidatos):
        raise DomainError("Candidatos devem ser > 0")

    worker = SweepWorker(max_workers=max_workers, progresso=progresso, status=status)
    worker.configurar(
        funcao=lambda c: fit(family, data, c, n_starts=n_starts, seed=seed),
        itens=candidatos,
        ao_falhar=lambda c, e: FailedFit(family, c, str(e)),
        rotulo=f"quebra {family.value}",
    )
    return worker.run()


def best_by_bic(results: Sequence[SweepEntry]) -> FitResult:
    """
    Resultado de menor BIC, ignorando falhas.

    Raises:
        InsufficientDataError: Nenhum ajuste bem-sucedido
    """
    validos = [r for r in results if isinstance(r, FitResult)]
    if not validos:
        raise InsufficientDataError("Nenhum ajuste bem-sucedido na varredura")
    return min(validos, key=lambda r: r.bic)


def parse_sweep(texto: str) -> List[float]:
    """
    Converte 'inicio:passo:fim' (fim inclusivo) ou 'a,b,c' em candidatos.

    Args:
        texto: Especificação da varredura

    Returns:
        Lista de quebras candidatas
    """
    texto = texto.strip()
    try:
        if ':' in texto:
            inicio, passo, fim = (float(p) for p in texto.split(':'))
            if passo <= 0 or fim < inicio:
                raise DomainError(f"Varredura inválida: {texto}")
            n = int(math.floor((fim - inicio) / passo + 1e-9)) + 1
            return [inicio + k * passo for k in range(n)]
        return [float(p) for p in texto.split(',') if p.strip()]
    except ValueError:
        raise DomainError(f"Varredura inválida: {texto}") from None


@dataclass
class ModelComparison:
    """Ajustes das quatro famílias e as varreduras de quebra."""
    fits: Dict[ModelFamily, FitResult]
    sweeps: Dict[ModelFamily, List[SweepEntry]]
    skipped: Dict[ModelFamily, str] = field(default_factory=dict)

    def ranking(self) -> List[FitResult]:
        """Ajustes ordenados por BIC crescente."""
        return sorted(self.fits.values(), key=lambda r: r.bic)

    def best(self) -> FitResult:
        return self.ranking()[0]


def compare_families(data: Dataset, candidates: Sequence[float], n_starts: int = 5, seed: int = 0,
                     max_workers: int = 1,
                     progresso: Optional[Callable[[int, int], None]] = None,
                     status: Optional[Callable[[str], None]] = None) -> ModelComparison:
    """
    Ajusta SS, por classe, DSSS e DSDS (com varredura) e ordena por BIC.

    O modelo por classe é pulado quando há registros UNKNOWN ou classe vazia.
    """
    fits: Dict[ModelFamily, FitResult] = {}
    sweeps: Dict[ModelFamily, List[SweepEntry]] = {}
    pulados: Dict[ModelFamily, str] = {}

    fits[ModelFamily.SS] = fit(ModelFamily.SS, data, n_starts=n_starts, seed=seed)
    try:
        fits[ModelFamily.PER_CLASS] = fit(ModelFamily.PER_CLASS, data, n_starts=n_starts, seed=seed)
    except (ClassRequiredError, InsufficientDataError) as e:
        logger.warning(f"Modelo por classe pulado: {e}")
        pulados[ModelFamily.PER_CLASS] = str(e)

    for family in (ModelFamily.DSSS, ModelFamily.DSDS):
        sweeps[family] = sweep_breakpoint(family, data, candidates, n_starts=n_starts, seed=seed,
                                          max_workers=max_workers, progresso=progresso, status=status)
        try:
            fits[family] = best_by_bic(sweeps[family])
        except InsufficientDataError as e:
            logger.warning(f"{family.value}: {e}")
            pulados[family] = str(e)

    return ModelComparison(fits, sweeps, pulados)
