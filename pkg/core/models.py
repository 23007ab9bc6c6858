"""Modelos de dados do pipeline de desvanecimento em larga escala V2V."""

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from utils.errors import (ClassRequiredError, DomainError, MonotonicityError,
                          SchemaError, ValidationError)

# Distância de referência de todas as famílias (lg(d/10))
REFERENCE_DISTANCE_M = 10.0
SPEED_OF_LIGHT = 299_792_458.0

CENSOR_LEVEL_CAMPAIGN1 = 110.6
CENSOR_LEVEL_CAMPAIGN2 = 123.5

PROCESSED_COLUMNS = ['run_id', 't_s', 'd_m', 'path_loss_db', 'censored', 'link', 'v_tx_mps', 'v_rx_mps']


def _exigir_finito(nome: str, valor: float) -> float:
    valor = float(valor)
    if not math.isfinite(valor):
        raise DomainError(f"{nome} deve ser finito (recebido {valor})")
    return valor


def _exigir_positivo(nome: str, valor: float) -> float:
    valor = _exigir_finito(nome, valor)
    if valor <= 0:
        raise DomainError(f"{nome} deve ser > 0 (recebido {valor})")
    return valor


class LinkClass(str, Enum):
    """Classe do enlace: visada direta, obstruída por veículo, sem visada."""

    LOS = "LOS"
    OLOS = "OLOS"
    NLOS = "NLOS"
    UNKNOWN = "UNKNOWN"

    @classmethod
    def parse(cls, valor: Any) -> 'LinkClass':
        """Converte texto (sem distinção de caixa) ou membro em LinkClass."""
        if isinstance(valor, cls):
            return valor
        texto = str(valor).strip().upper()
        if not texto or texto == "NAN":
            return cls.UNKNOWN
        try:
            return cls(texto)
        except ValueError:
            raise DomainError(f"Classe de enlace inválida: {valor!r}") from None


class ModelFamily(str, Enum):
    """Famílias de modelos de perda de percurso."""

    SS = "ss"
    PER_CLASS = "per_class"
    DSSS = "dsss"
    DSDS = "dsds"

    @classmethod
    def parse(cls, valor: Any) -> 'ModelFamily':
        if isinstance(valor, cls):
            return valor
        try:
            return cls(str(valor).strip().lower())
        except ValueError:
            raise DomainError(f"Família de modelo inválida: {valor!r}") from None

    @property
    def is_double_slope(self) -> bool:
        return self in (ModelFamily.DSSS, ModelFamily.DSDS)


class Domain(str, Enum):
    """Eixo da autocorrelação do sombreamento."""

    DISTANCE = "distance"
    TIME = "time"

    @classmethod
    def parse(cls, valor: Any) -> 'Domain':
        if isinstance(valor, cls):
            return valor
        try:
            return cls(str(valor).strip().lower())
        except ValueError:
            raise DomainError(f"Domínio inválido: {valor!r}") from None


class FusionSource(str, Enum):
    """Origem da distância fundida."""

    FUSED = "FUSED"
    GPS_ONLY = "GPS_ONLY"


# ============================================================================
# Parâmetros dos modelos
# ============================================================================

@dataclass(frozen=True)
class SingleSlopeParams:
    """
    Modelo de inclinação única com sombreamento lognormal.

    Attributes:
        l_ref: Perda de percurso a 10 m (dB)
        gamma: Expoente de perda de percurso
        sigma: Desvio padrão do sombreamento (dB, > 0)
    """
    l_ref: float
    gamma: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, 'l_ref', _exigir_finito('l_ref', self.l_ref))
        object.__setattr__(self, 'gamma', _exigir_finito('gamma', self.gamma))
        object.__setattr__(self, 'sigma', _exigir_positivo('sigma', self.sigma))

    def to_dict(self) -> Dict[str, float]:
        return {'l_ref': self.l_ref, 'gamma': self.gamma, 'sigma': self.sigma}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SingleSlopeParams':
        return cls(l_ref=data['l_ref'], gamma=data['gamma'], sigma=data['sigma'])


@dataclass(frozen=True)
class PerLinkClassParams:
    """Três modelos de inclinação única, um por classe de enlace."""
    los: SingleSlopeParams
    olos: SingleSlopeParams
    nlos: SingleSlopeParams

    def for_link(self, link: Union[LinkClass, str]) -> SingleSlopeParams:
        """
        Parâmetros da classe de enlace.

        Raises:
            ClassRequiredError: Se a classe for UNKNOWN
        """
        link = LinkClass.parse(link)
        if link is LinkClass.UNKNOWN:
            raise ClassRequiredError("Modelo por classe exige LOS, OLOS ou NLOS (recebido UNKNOWN)")
        return {LinkClass.LOS: self.los, LinkClass.OLOS: self.olos, LinkClass.NLOS: self.nlos}[link]

    def to_dict(self) -> Dict[str, Dict[str, float]]:
        return {'los': self.los.to_dict(), 'olos': self.olos.to_dict(), 'nlos': self.nlos.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PerLinkClassParams':
        return cls(
            los=SingleSlopeParams.from_dict(data['los']),
            olos=SingleSlopeParams.from_dict(data['olos']),
            nlos=SingleSlopeParams.from_dict(data['nlos']),
        )


@dataclass(frozen=True)
class DoubleSlopeParams:
    """
    Modelo de inclinação dupla (DSSS quando shared_sigma, DSDS caso contrário).

    Attributes:
        l_ref: Perda de percurso a 10 m (dB)
        gamma1: Expoente abaixo do ponto de quebra
        gamma2: Expoente a partir do ponto de quebra
        d_break: Distância de quebra (m, > 0)
        sigma1: Sombreamento abaixo do ponto de quebra (dB)
        sigma2: Sombreamento a partir do ponto de quebra (dB)
        shared_sigma: Sombreamento único (sigma1 == sigma2)
    """
    l_ref: float
    gamma1: float
    gamma2: float
    d_break: float
    sigma1: float
    sigma2: float
    shared_sigma: bool = False

    def __post_init__(self):
        for nome in ('l_ref', 'gamma1', 'gamma2'):
            object.__setattr__(self, nome, _exigir_finito(nome, getattr(self, nome)))
        for nome in ('d_break', 'sigma1', 'sigma2'):
            object.__setattr__(self, nome, _exigir_positivo(nome, getattr(self, nome)))
        object.__setattr__(self, 'shared_sigma', bool(self.shared_sigma))
        if self.shared_sigma and self.sigma1 != self.sigma2:
            raise DomainError("DSSS exige sigma1 == sigma2")

    @classmethod
    def dsss(cls, l_ref: float, gamma1: float, gamma2: float, d_break: float, sigma: float) -> 'DoubleSlopeParams':
        return cls(l_ref, gamma1, gamma2, d_break, sigma, sigma, shared_sigma=True)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'l_ref': self.l_ref, 'gamma1': self.gamma1, 'gamma2': self.gamma2,
            'd_break': self.d_break, 'sigma1': self.sigma1, 'sigma2': self.sigma2,
            'shared_sigma': self.shared_sigma,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], shared_sigma: Optional[bool] = None) -> 'DoubleSlopeParams':
        compartilhado = data.get('shared_sigma', False) if shared_sigma is None else shared_sigma
        sigma1 = data.get('sigma1', data.get('sigma'))
        sigma2 = sigma1 if compartilhado else data.get('sigma2')
        if sigma1 is None or sigma2 is None:
            raise SchemaError("Modelo de inclinação dupla sem sigma1/sigma2")
        return cls(
            l_ref=data['l_ref'], gamma1=data['gamma1'], gamma2=data['gamma2'],
            d_break=data['d_break'], sigma1=sigma1, sigma2=sigma2, shared_sigma=compartilhado,
        )


ModelParams = Union[SingleSlopeParams, PerLinkClassParams, DoubleSlopeParams]


@dataclass(frozen=True)
class PathLossModel:
    """União etiquetada das quatro famílias de modelos."""
    params: ModelParams

    def __post_init__(self):
        if not isinstance(self.params, (SingleSlopeParams, PerLinkClassParams, DoubleSlopeParams)):
            raise DomainError(f"Parâmetros de modelo inválidos: {type(self.params).__name__}")

    @property
    def family(self) -> ModelFamily:
        if isinstance(self.params, SingleSlopeParams):
            return ModelFamily.SS
        if isinstance(self.params, PerLinkClassParams):
            return ModelFamily.PER_CLASS
        return ModelFamily.DSSS if self.params.shared_sigma else ModelFamily.DSDS

    @property
    def d_break(self) -> Optional[float]:
        return self.params.d_break if isinstance(self.params, DoubleSlopeParams) else None

    @property
    def requires_link(self) -> bool:
        return self.family is ModelFamily.PER_CLASS

    def parameter_count(self) -> int:
        """Parâmetros livres do ML (a quebra é hiperparâmetro)."""
        return {ModelFamily.SS: 3, ModelFamily.PER_CLASS: 9, ModelFamily.DSSS: 4, ModelFamily.DSDS: 5}[self.family]

    # Construtores de conveniência
    @classmethod
    def single_slope(cls, l_ref: float, gamma: float, sigma: float) -> 'PathLossModel':
        return cls(SingleSlopeParams(l_ref, gamma, sigma))

    @classmethod
    def per_class(cls, los: SingleSlopeParams, olos: SingleSlopeParams, nlos: SingleSlopeParams) -> 'PathLossModel':
        return cls(PerLinkClassParams(los, olos, nlos))

    @classmethod
    def dsss(cls, l_ref: float, gamma1: float, gamma2: float, d_break: float, sigma: float) -> 'PathLossModel':
        return cls(DoubleSlopeParams.dsss(l_ref, gamma1, gamma2, d_break, sigma))

    @classmethod
    def dsds(cls, l_ref: float, gamma1: float, gamma2: float, d_break: float,
             sigma1: float, sigma2: float) -> 'PathLossModel':
        return cls(DoubleSlopeParams(l_ref, gamma1, gamma2, d_break, sigma1, sigma2))

    def to_dict(self) -> Dict[str, Any]:
        """Documento JSON com discriminador "family"."""
        return {'family': self.family.value, **self.params.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PathLossModel':
        if 'family' not in data:
            raise SchemaError("Documento de modelo sem chave 'family'")
        family = ModelFamily.parse(data['family'])
        try:
            if family is ModelFamily.SS:
                return cls(SingleSlopeParams.from_dict(data))
            if family is ModelFamily.PER_CLASS:
                return cls(PerLinkClassParams.from_dict(data))
            return cls(DoubleSlopeParams.from_dict(data, shared_sigma=family is ModelFamily.DSSS))
        except KeyError as e:
            raise SchemaError(f"Modelo {family.value}: chave ausente {e}") from None


# ============================================================================
# Medições
# ============================================================================

@dataclass(frozen=True)
class MeasurementRecord:
    """
    Uma amostra de perda de percurso com distância, velocidades e classe.

    Attributes:
        t: Instante (s), monótono dentro de uma corrida
        d: Distância TX-RX fundida (m, > 0)
        path_loss: Perda de percurso (dB)
        censored: Amostra acima do nível de censura
        v_tx: Velocidade do TX (m/s)
        v_rx: Velocidade do RX (m/s)
        link: Classe do enlace
        run_id: Identificador da corrida
    """
    t: float
    d: float
    path_loss: float
    censored: bool = False
    v_tx: float = 0.0
    v_rx: float = 0.0
    link: LinkClass = LinkClass.UNKNOWN
    run_id: str = "run-1"

    def __post_init__(self):
        object.__setattr__(self, 't', _exigir_finito('t', self.t))
        object.__setattr__(self, 'd', _exigir_positivo('d', self.d))
        object.__setattr__(self, 'path_loss', _exigir_finito('path_loss', self.path_loss))
        object.__setattr__(self, 'censored', bool(self.censored))
        object.__setattr__(self, 'v_tx', _exigir_finito('v_tx', self.v_tx))
        object.__setattr__(self, 'v_rx', _exigir_finito('v_rx', self.v_rx))
        object.__setattr__(self, 'link', LinkClass.parse(self.link))
        object.__setattr__(self, 'run_id', str(self.run_id).strip())

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['link'] = self.link.value
        return data


@dataclass(frozen=True)
class DatasetArrays:
    """Colunas de um Dataset como arrays numpy."""
    t: np.ndarray
    d: np.ndarray
    path_loss: np.ndarray
    censored: np.ndarray
    v_tx: np.ndarray
    v_rx: np.ndarray
    link: np.ndarray
    run_id: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """
    Sequência ordenada de medições com o nível de censura do instrumento.

    Attributes:
        records: Medições ordenadas por (run_id, t)
        censor_level: Maior perda medida de forma confiável (dB)
    """
    records: Tuple[MeasurementRecord, ...]
    censor_level: float = CENSOR_LEVEL_CAMPAIGN1

    def __post_init__(self):
        object.__setattr__(self, 'records', tuple(self.records))
        nivel = float(self.censor_level)
        if math.isnan(nivel):
            raise DomainError("censor_level não pode ser NaN")
        object.__setattr__(self, 'censor_level', nivel)

        if not self.records:
            return
        arr = self.arrays
        mesma_corrida = arr.run_id[1:] == arr.run_id[:-1]
        if np.any(arr.run_id[1:] < arr.run_id[:-1]) or np.any(mesma_corrida & (arr.t[1:] < arr.t[:-1])):
            raise MonotonicityError("Registros devem estar ordenados por (run_id, t)")
        inconsistentes = arr.censored != (arr.path_loss >= nivel)
        if np.any(inconsistentes):
            idx = int(np.flatnonzero(inconsistentes)[0])
            raise ValidationError(
                f"Flag de censura inconsistente com o nível {nivel} dB no registro {idx}"
            )

    @classmethod
    def from_arrays(cls, t, d, path_loss, censor_level: float, v_tx=None, v_rx=None,
                    link=None, run_id="run-1", censored=None) -> 'Dataset':
        """
        Monta um Dataset a partir de colunas.

        Args:
            t, d, path_loss: Colunas obrigatórias
            censor_level: Nível de censura (dB)
            v_tx, v_rx: Velocidades (padrão 0)
            link: Classe por amostra ou escalar (padrão UNKNOWN)
            run_id: Corrida por amostra ou escalar
            censored: Flags; derivadas do nível quando ausentes

        Returns:
            Dataset ordenado por (run_id, t)
        """
        t = np.asarray(t, dtype=float)
        n = len(t)

        def _coluna(valor, padrao):
            if valor is None:
                valor = padrao
            if np.ndim(valor) == 0:
                return [valor] * n
            return list(valor)

        d = np.asarray(d, dtype=float)
        path_loss = np.asarray(path_loss, dtype=float)
        if censored is None:
            censored = path_loss >= censor_level
        v_tx = np.asarray(_coluna(v_tx, 0.0), dtype=float)
        v_rx = np.asarray(_coluna(v_rx, 0.0), dtype=float)
        links = [LinkClass.parse(l) for l in _coluna(link, LinkClass.UNKNOWN)]
        runs = [str(r) for r in _coluna(run_id, "run-1")]
        censored = np.asarray(censored, dtype=bool)

        ordem = sorted(range(n), key=lambda i: (runs[i], t[i]))
        records = tuple(
            MeasurementRecord(
                t=t[i], d=d[i], path_loss=path_loss[i], censored=bool(censored[i]),
                v_tx=v_tx[i], v_rx=v_rx[i], link=links[i], run_id=runs[i],
            )
            for i in ordem
        )
        return cls(records, censor_level)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[MeasurementRecord]:
        return iter(self.records)

    @cached_property
    def arrays(self) -> DatasetArrays:
        """Colunas numpy (calculadas uma vez)."""
        recs = self.records
        return DatasetArrays(
            t=np.array([r.t for r in recs], dtype=float),
            d=np.array([r.d for r in recs], dtype=float),
            path_loss=np.array([r.path_loss for r in recs], dtype=float),
            censored=np.array([r.censored for r in recs], dtype=bool),
            v_tx=np.array([r.v_tx for r in recs], dtype=float),
            v_rx=np.array([r.v_rx for r in recs], dtype=float),
            link=np.array([r.link.value for r in recs], dtype=object),
            run_id=np.array([r.run_id for r in recs], dtype=object),
        )

    @property
    def n_censored(self) -> int:
        return int(np.count_nonzero(self.arrays.censored)) if self.records else 0

    @property
    def censored_fraction(self) -> float:
        return self.n_censored / len(self) if self.records else 0.0

    def runs(self) -> List[str]:
        """Identificadores das corridas, na ordem do dataset."""
        vistos: Dict[str, None] = {}
        for r in self.records:
            vistos.setdefault(r.run_id, None)
        return list(vistos)

    def links(self) -> List[LinkClass]:
        """Classes de enlace presentes."""
        return sorted({r.link for r in self.records}, key=lambda l: list(LinkClass).index(l))

    def subset(self, mask: Sequence[bool]) -> 'Dataset':
        """Dataset com os registros selecionados pela máscara."""
        mask = np.asarray(mask, dtype=bool)
        if len(mask) != len(self):
            raise DomainError("Máscara com tamanho diferente do dataset")
        return Dataset(tuple(r for r, m in zip(self.records, mask) if m), self.censor_level)

    def filtrar(self, filtros: Iterable['RecordFilter']) -> 'Dataset':
        """
        Aplica filtros em conjunção.

        Args:
            filtros: Filtros a aplicar

        Returns:
            Dataset filtrado
        """
        mask = np.ones(len(self), dtype=bool)
        for filtro in filtros:
            mask &= filtro.mask(self)
        return self.subset(mask)

    def sem_censura(self) -> 'Dataset':
        """
        Visão do dataset sem tratamento de censura.

        Valores acima do nível são cortados no nível e tratados como exatos,
        como um ajuste ingênuo veria as amostras saturadas do instrumento.
        """
        recs = tuple(
            replace(r, path_loss=min(r.path_loss, self.censor_level), censored=False)
            for r in self.records
        )
        return Dataset(recs, math.inf)

    @classmethod
    def concat(cls, datasets: Sequence['Dataset']) -> 'Dataset':
        """Concatena datasets com o mesmo nível de censura, reordenando."""
        if not datasets:
            raise DomainError("Nenhum dataset para concatenar")
        niveis = {ds.censor_level for ds in datasets}
        if len(niveis) != 1:
            raise DomainError(f"Níveis de censura diferentes: {sorted(niveis)}")
        recs = sorted((r for ds in datasets for r in ds.records), key=lambda r: (r.run_id, r.t))
        return cls(tuple(recs), niveis.pop())

    def to_frame(self) -> pd.DataFrame:
        """DataFrame no esquema do CSV processado."""
        arr = self.arrays if self.records else None
        if arr is None:
            return pd.DataFrame(columns=PROCESSED_COLUMNS)
        return pd.DataFrame({
            'run_id': arr.run_id.astype(str),
            't_s': arr.t,
            'd_m': arr.d,
            'path_loss_db': arr.path_loss,
            'censored': arr.censored,
            'link': arr.link.astype(str),
            'v_tx_mps': arr.v_tx,
            'v_rx_mps': arr.v_rx,
        })


@dataclass(frozen=True)
class RecordFilter:
    """
    Filtro vetorizado sobre um Dataset.

    Attributes:
        campo: t, d, path_loss, v_rx, v_tx, abs_v_rx, rel_speed, link ou run_id
        operador: igual, diferente, maior, menor, maior_igual, menor_igual, entre
        valor: Valor do filtro
        valor_secundario: Limite superior (exclusivo) para 'entre'
    """
    campo: str
    operador: str
    valor: Any
    valor_secundario: Optional[Any] = None

    CAMPOS = ('t', 'd', 'path_loss', 'v_rx', 'v_tx', 'abs_v_rx', 'rel_speed', 'link', 'run_id')
    OPERADORES = ('igual', 'diferente', 'maior', 'menor', 'maior_igual', 'menor_igual', 'entre')

    def __post_init__(self):
        if self.campo not in self.CAMPOS:
            raise DomainError(f"Campo de filtro inválido: {self.campo}")
        if self.operador not in self.OPERADORES:
            raise DomainError(f"Operador de filtro inválido: {self.operador}")
        if self.operador == 'entre' and self.valor_secundario is None:
            raise DomainError("Operador 'entre' exige valor_secundario")

    def _coluna(self, dataset: Dataset) -> np.ndarray:
        arr = dataset.arrays
        if self.campo == 'abs_v_rx':
            return np.abs(arr.v_rx)
        if self.campo == 'rel_speed':
            return np.abs(arr.v_tx - arr.v_rx)
        return getattr(arr, self.campo)

    def mask(self, dataset: Dataset) -> np.ndarray:
        """
        Máscara booleana dos registros que atendem ao filtro.

        'entre' é semiaberto: valor <= x < valor_secundario.
        """
        if not dataset.records:
            return np.zeros(0, dtype=bool)
        coluna = self._coluna(dataset)
        valor = self.valor
        if self.campo == 'link':
            valor = LinkClass.parse(valor).value
        if self.operador == 'igual':
            return coluna == valor
        if self.operador == 'diferente':
            return coluna != valor
        if self.campo in ('link', 'run_id'):
            raise DomainError(f"Operador {self.operador} não se aplica ao campo {self.campo}")
        valor = float(valor)
        if self.operador == 'maior':
            return coluna > valor
        if self.operador == 'menor':
            return coluna < valor
        if self.operador == 'maior_igual':
            return coluna >= valor
        if self.operador == 'menor_igual':
            return coluna <= valor
        return (coluna >= valor) & (coluna < float(self.valor_secundario))

    def __str__(self) -> str:
        if self.operador == 'entre':
            return f"{self.campo} entre [{self.valor}, {self.valor_secundario})"
        return f"{self.campo} {self.operador} {self.valor}"


# ============================================================================
# Resultados de ajuste
# ============================================================================

@dataclass(frozen=True)
class FitResult:
    """
    Resultado de um ajuste ML censurado.

    Attributes:
        model: Modelo ajustado
        log_likelihood: Log-verossimilhança máxima (nats)
        bic: Critério de informação bayesiano
        rmse: Erro quadrático médio nas amostras não censuradas (dB)
        n_total: Número de amostras
        n_censored: Número de amostras censuradas
        converged: Critério de parada do otimizador satisfeito
        n_evaluations: Avaliações da verossimilhança
    """
    model: PathLossModel
    log_likelihood: float
    bic: float
    rmse: float
    n_total: int
    n_censored: int
    converged: bool
    n_evaluations: int = 0

    def __post_init__(self):
        if not 0 <= self.n_censored <= self.n_total:
            raise DomainError("Requer 0 <= n_censored <= n_total")

    @property
    def family(self) -> ModelFamily:
        return self.model.family

    @property
    def d_break(self) -> Optional[float]:
        return self.model.d_break

    def to_dict(self) -> Dict[str, Any]:
        return {
            'family': self.family.value,
            'model': self.model.to_dict(),
            'log_likelihood': self.log_likelihood,
            'bic': self.bic,
            'rmse': self.rmse,
            'n_total': self.n_total,
            'n_censored': self.n_censored,
            'converged': self.converged,
            'n_evaluations': self.n_evaluations,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FitResult':
        return cls(
            model=PathLossModel.from_dict(data['model']),
            log_likelihood=float(data['log_likelihood']),
            bic=float(data['bic']),
            rmse=float(data['rmse']),
            n_total=int(data['n_total']),
            n_censored=int(data['n_censored']),
            converged=bool(data['converged']),
            n_evaluations=int(data.get('n_evaluations', 0)),
        )


@dataclass(frozen=True)
class FailedFit:
    """Candidato de varredura cujo ajuste falhou."""
    family: ModelFamily
    d_break: Optional[float]
    message: str
    converged: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {'family': self.family.value, 'd_break': self.d_break, 'error': self.message}


# ============================================================================
# Sombreamento
# ============================================================================

@dataclass(frozen=True, eq=False)
class ResidualSeries:
    """
    Bloco contíguo de resíduos de sombreamento de uma corrida.

    Attributes:
        run_id: Corrida de origem
        t: Instantes (s)
        d_cum: Distância acumulada percorrida pelo RX (m)
        x: Resíduos de sombreamento (dB)
        domain: Eixo usado pela reamostragem/autocorrelação
        grid_spacing: Espaçamento uniforme (None antes da reamostragem)
        block_index: Índice do bloco dentro da corrida
    """
    run_id: str
    t: np.ndarray
    d_cum: np.ndarray
    x: np.ndarray
    domain: Domain = Domain.DISTANCE
    grid_spacing: Optional[float] = None
    block_index: int = 0

    def __post_init__(self):
        for nome in ('t', 'd_cum', 'x'):
            object.__setattr__(self, nome, np.asarray(getattr(self, nome), dtype=float))
        if not (len(self.t) == len(self.d_cum) == len(self.x)):
            raise DomainError("t, d_cum e x devem ter o mesmo tamanho")
        object.__setattr__(self, 'domain', Domain.parse(self.domain))

    def __len__(self) -> int:
        return len(self.x)

    @property
    def coordinates(self) -> np.ndarray:
        """Coordenada do domínio (d_cum ou t)."""
        return self.d_cum if self.domain is Domain.DISTANCE else self.t

    @property
    def samples(self) -> List[Tuple[float, float, float]]:
        """Triplas (t, d_cum, x)."""
        return list(zip(self.t.tolist(), self.d_cum.tolist(), self.x.tolist()))


@dataclass(frozen=True, eq=False)
class AutocorrEstimate:
    """
    Autocorrelação empírica com contagem por atraso e ajuste de Gudmundson.

    Attributes:
        lags: Atrasos (m ou s), múltiplos de grid_spacing
        r: Autocorrelação (dB²)
        n_per_lag: Produtos somados por atraso
        sigma2: Valor no atraso zero (dB²)
        domain: Domínio dos atrasos
        grid_spacing: Espaçamento da grade
        fitted_scale: d_c ou t_c ajustado
        fit_weighted_sse: Soma ponderada dos quadrados no ótimo
    """
    lags: np.ndarray
    r: np.ndarray
    n_per_lag: np.ndarray
    sigma2: float
    domain: Domain
    grid_spacing: float
    fitted_scale: Optional[float] = None
    fit_weighted_sse: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'lags', np.asarray(self.lags, dtype=float))
        object.__setattr__(self, 'r', np.asarray(self.r, dtype=float))
        object.__setattr__(self, 'n_per_lag', np.asarray(self.n_per_lag, dtype=np.int64))
        if self.fitted_scale is not None and not self.fitted_scale > 0:
            raise DomainError("fitted_scale deve ser > 0")

    @property
    def normalized(self) -> np.ndarray:
        return self.r / self.sigma2

    def with_fit(self, scale: float, sse: float) -> 'AutocorrEstimate':
        return replace(self, fitted_scale=float(scale), fit_weighted_sse=float(sse))

    def to_frame(self) -> pd.DataFrame:
        """Tabela (lag, normalized_r, n) para regenerar as figuras."""
        return pd.DataFrame({'lag': self.lags, 'normalized_r': self.normalized, 'n': self.n_per_lag})


SpeedBin = Tuple[float, float]


def _rotulo_faixa(faixa: SpeedBin) -> str:
    return f"[{faixa[0]:g},{faixa[1]:g})"


@dataclass(frozen=True)
class SpeedBucketTable:
    """
    Tempos de decorrelação por faixa de |v_rx| (linhas) e |v_tx - v_rx| (colunas).

    Células ausentes (None) não atingiram min_samples_rule amostras no
    atraso em que R cai a sigma² e^-1.
    """
    rx_speed_bins: Tuple[SpeedBin, ...]
    rel_speed_bins: Tuple[SpeedBin, ...]
    t_c: Tuple[Tuple[Optional[float], ...], ...]
    n_at_scale: Tuple[Tuple[int, ...], ...]
    min_samples_rule: int = 100

    def cell(self, i: int, j: int) -> Optional[float]:
        return self.t_c[i][j]

    def to_frame(self) -> pd.DataFrame:
        """Tabela no layout das faixas de velocidade, com '-' para ausentes."""
        linhas = []
        for i, faixa in enumerate(self.rx_speed_bins):
            linha = {'abs_v_rx_mps': _rotulo_faixa(faixa)}
            for j, rel in enumerate(self.rel_speed_bins):
                valor = self.t_c[i][j]
                linha[_rotulo_faixa(rel)] = '-' if valor is None else f"{valor:.1f}"
            linhas.append(linha)
        return pd.DataFrame(linhas)


@dataclass(frozen=True)
class SigmaBin:
    """Desvio padrão do sombreamento em uma faixa de distância."""
    lower: float
    upper: float
    sigma: Optional[float]
    n: int
    status: str = "ok"  # ok | empty | degenerate

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# ============================================================================
# Simulação e fusão
# ============================================================================

def _pares(valores: Iterable, conversor=float) -> Tuple[Tuple[float, Any], ...]:
    return tuple((float(t), conversor(v)) for t, v in valores)


@dataclass(frozen=True)
class TrajectorySpec:
    """
    Trajetória sintética de uma campanha.

    Attributes:
        duration: Duração (s)
        sample_period: Período entre medições (s)
        distance_waypoints: Pontos (t, d) de um ciclo de separação TX-RX,
            interpolados linearmente e repetidos com período igual ao último t
        v_rx: Degraus (t_inicio, v) da velocidade do RX (m/s)
        v_tx: Degraus (t_inicio, v) da velocidade do TX (m/s)
        link_schedule: Degraus (t_inicio, classe) da classe de enlace
    """
    duration: float
    distance_waypoints: Tuple[Tuple[float, float], ...]
    sample_period: float = 0.0165
    v_rx: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    v_tx: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    link_schedule: Tuple[Tuple[float, LinkClass], ...] = ((0.0, LinkClass.LOS),)

    def __post_init__(self):
        _exigir_positivo('duration', self.duration)
        _exigir_positivo('sample_period', self.sample_period)
        object.__setattr__(self, 'distance_waypoints', _pares(self.distance_waypoints))
        object.__setattr__(self, 'v_rx', _pares(self.v_rx))
        object.__setattr__(self, 'v_tx', _pares(self.v_tx))
        object.__setattr__(self, 'link_schedule', _pares(self.link_schedule, LinkClass.parse))

        pontos = self.distance_waypoints
        if len(pontos) < 2:
            raise DomainError("distance_waypoints exige ao menos 2 pontos")
        if pontos[0][0] != 0.0:
            raise DomainError("O primeiro ponto de distância deve estar em t=0")
        tempos = [p[0] for p in pontos]
        if any(b <= a for a, b in zip(tempos, tempos[1:])):
            raise DomainError("Tempos dos pontos de distância devem ser crescentes")
        if min(p[1] for p in pontos) <= 0:
            raise DomainError("Distâncias da trajetória devem ser > 0")
        for nome in ('v_rx', 'v_tx', 'link_schedule'):
            degraus = getattr(self, nome)
            if not degraus or degraus[0][0] > 0.0:
                raise DomainError(f"{nome} deve começar em t=0")

    @classmethod
    def cycling(cls, duration: float, d_min: float, d_max: float, half_period: float, **kwargs) -> 'TrajectorySpec':
        """Ciclos triangulares d_min -> d_max -> d_min."""
        pontos = ((0.0, d_min), (half_period, d_max), (2 * half_period, d_min))
        return cls(duration=duration, distance_waypoints=pontos, **kwargs)

    @property
    def d_min(self) -> float:
        return min(p[1] for p in self.distance_waypoints)

    @property
    def cycle_period(self) -> float:
        return self.distance_waypoints[-1][0]

    def times(self) -> np.ndarray:
        n = int(math.floor(self.duration / self.sample_period + 1e-9))
        return np.arange(n) * self.sample_period

    def distance_at(self, t) -> np.ndarray:
        tempos = np.array([p[0] for p in self.distance_waypoints])
        dists = np.array([p[1] for p in self.distance_waypoints])
        tau = np.mod(np.asarray(t, dtype=float), self.cycle_period)
        return np.interp(tau, tempos, dists)

    @staticmethod
    def _degrau(degraus, t) -> np.ndarray:
        inicios = np.array([p[0] for p in degraus])
        idx = np.searchsorted(inicios, np.asarray(t, dtype=float), side='right') - 1
        return np.clip(idx, 0, len(degraus) - 1)

    def v_rx_at(self, t) -> np.ndarray:
        return np.array([p[1] for p in self.v_rx])[self._degrau(self.v_rx, t)]

    def v_tx_at(self, t) -> np.ndarray:
        return np.array([p[1] for p in self.v_tx])[self._degrau(self.v_tx, t)]

    def link_at(self, t) -> np.ndarray:
        classes = np.array([p[1].value for p in self.link_schedule], dtype=object)
        return classes[self._degrau(self.link_schedule, t)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'duration': self.duration,
            'sample_period': self.sample_period,
            'distance_waypoints': [list(p) for p in self.distance_waypoints],
            'v_rx': [list(p) for p in self.v_rx],
            'v_tx': [list(p) for p in self.v_tx],
            'link_schedule': [[t, l.value] for t, l in self.link_schedule],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrajectorySpec':
        conhecidas = {f.name for f in fields(cls)}
        extras = set(data) - conhecidas
        if extras:
            raise SchemaError(f"Chaves desconhecidas na trajetória: {sorted(extras)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise SchemaError(f"Trajetória inválida: {e}") from None


def _monotono(nome: str, t: np.ndarray, estrito: bool) -> None:
    if len(t) < 2:
        return
    passos = np.diff(t)
    if np.any(passos <= 0) if estrito else np.any(passos < 0):
        idx = int(np.flatnonzero(passos <= 0 if estrito else passos < 0)[0]) + 1
        raise MonotonicityError(f"{nome}: tempos não monótonos na amostra {idx}")


@dataclass(frozen=True, eq=False)
class GpsTrack:
    """Fixos GPS (t, lat, lon) a 1 Hz, marcados no início de cada segundo."""
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self):
        for nome in ('t', 'lat', 'lon'):
            object.__setattr__(self, nome, np.asarray(getattr(self, nome), dtype=float))
        if not (len(self.t) == len(self.lat) == len(self.lon)):
            raise DomainError("GPS: colunas com tamanhos diferentes")
        _monotono("GPS", self.t, estrito=True)

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Série (t, valor) genérica: amostras RF ou distâncias UWB."""
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 't', np.asarray(self.t, dtype=float))
        object.__setattr__(self, 'values', np.asarray(self.values, dtype=float))
        if len(self.t) != len(self.values):
            raise DomainError("Série: colunas com tamanhos diferentes")
        _monotono("Série", self.t, estrito=False)

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True, eq=False)
class RawCampaign:
    """
    Observações brutas por sensor de uma corrida.

    Attributes:
        rf: Amostras (t, perda de percurso em dB)
        gps_tx: Fixos GPS do TX
        gps_rx: Fixos GPS do RX
        uwb: Distâncias UWB reportadas (t, m), ainda com o viés do cabo
        uwb_cable_bias: Viés somado pelos cabos de RF (m)
        gps_sigma: Desvio padrão do erro de distância GPS (m)
        uwb_sigma: Desvio padrão do erro UWB (m)
        gps_corr_time: Constante de tempo do erro GPS (s)
    """
    rf: TimeSeries
    gps_tx: GpsTrack
    gps_rx: GpsTrack
    uwb: TimeSeries
    uwb_cable_bias: float = 5.0
    gps_sigma: float = 5.4
    uwb_sigma: float = 0.036
    gps_corr_time: float = 10.0

    def __post_init__(self):
        if self.uwb_cable_bias < 0:
            raise DomainError("uwb_cable_bias deve ser >= 0")
        _exigir_positivo('gps_sigma', self.gps_sigma)
        _exigir_positivo('gps_corr_time', self.gps_corr_time)
        if not self.uwb_sigma > 0:
            raise DomainError("uwb_sigma deve ser > 0")


# ============================================================================
# Configuração
# ============================================================================

@dataclass
class CampaignConfig:
    """
    Configuração de uma campanha (um único arquivo JSON).

    Flags da CLI sobrescrevem as chaves carregadas.
    """
    censor_level: float = CENSOR_LEVEL_CAMPAIGN1
    carrier_hz: float = 725e6
    h_tx: float = 1.75
    h_rx: float = 1.75
    averaging_window: int = 10
    breakpoint_candidates: List[float] = field(default_factory=lambda: [float(d) for d in range(15, 101, 5)])
    lag_max_distance: float = 600.0
    lag_max_time: float = 30.0
    grid_spacing_distance: float = 0.5
    grid_spacing_time: float = 0.0165
    rx_speed_bins: List[List[float]] = field(default_factory=lambda: [[0, 10], [10, 20], [20, 30], [30, 40]])
    rel_speed_bins: List[List[float]] = field(default_factory=lambda: [[0, 5], [5, 15]])
    min_samples_rule: int = 100
    seed: int = 0
    n_starts: int = 5
    max_workers: int = 1
    fusion_window: float = 40.0
    gps_sigma: float = 5.4
    uwb_sigma: float = 0.036
    uwb_cable_bias: float = 5.0
    gps_corr_time: float = 10.0
    synth: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(float(self.censor_level)):
            raise DomainError("censor_level deve ser finito")
        if int(self.averaging_window) < 1:
            raise DomainError("averaging_window deve ser >= 1")
        if int(self.n_starts) < 1:
            raise DomainError("n_starts deve ser >= 1")
        if not self.breakpoint_candidates or min(self.breakpoint_candidates) <= 0:
            raise DomainError("breakpoint_candidates deve ser não vazio e positivo")

    def lag_max(self, domain: Domain) -> float:
        return self.lag_max_distance if Domain.parse(domain) is Domain.DISTANCE else self.lag_max_time

    def grid_spacing(self, domain: Domain) -> float:
        return self.grid_spacing_distance if Domain.parse(domain) is Domain.DISTANCE else self.grid_spacing_time

    def speed_bins(self) -> Tuple[Tuple[SpeedBin, ...], Tuple[SpeedBin, ...]]:
        rx = tuple((float(a), float(b)) for a, b in self.rx_speed_bins)
        rel = tuple((float(a), float(b)) for a, b in self.rel_speed_bins)
        return rx, rel

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CampaignConfig':
        conhecidas = {f.name for f in fields(cls)}
        extras = set(data) - conhecidas
        if extras:
            raise SchemaError(f"Chaves desconhecidas na configuração: {sorted(extras)}")
        return cls(**data)

    @classmethod
    def carregar(cls, caminho: str) -> 'CampaignConfig':
        """
        Carrega a configuração de um arquivo JSON.

        Args:
            caminho: Caminho do arquivo

        Returns:
            CampaignConfig validada
        """
        try:
            with open(caminho, 'r', encoding='utf-8') as f:
                dados = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"JSON inválido em {caminho}: {e}") from None
        if not isinstance(dados, dict):
            raise SchemaError(f"{caminho}: esperado um objeto JSON")
        return cls.from_dict(dados)

    def com_sobrescritas(self, **valores: Any) -> 'CampaignConfig':
        """Nova configuração com as chaves não nulas sobrescritas."""
        alteracoes = {k: v for k, v in valores.items() if v is not None}
        return replace(self, **alteracoes)
