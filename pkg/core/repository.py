"""Repositório de campanhas: ingestão e exportação de CSV/XLSX."""

import math
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from core.models import (PROCESSED_COLUMNS, Dataset, GpsTrack, LinkClass, RawCampaign,
                         TimeSeries)
from utils.errors import (DomainError, EmptyDatasetError, MonotonicityError, RejectionLog,
                          SchemaError, UnitSanityError)
from utils.reporting import format_float

PATH_LOSS_MIN_DB = 20.0
PATH_LOSS_MAX_DB = 200.0

_COLUNAS_OBRIGATORIAS = ('run_id', 't_s', 'd_m', 'path_loss_db')
_VERDADEIRO = {'true', '1', 'yes', 'sim'}
_FALSO = {'false', '0', 'no', 'nao', 'não'}


def _ler_tabela(caminho: str) -> pd.DataFrame:
    """
    Lê CSV ou XLSX como texto (a validação é feita linha a linha).

    Args:
        caminho: Arquivo .csv ou .xlsx

    Returns:
        DataFrame de strings
    """
    if not os.path.exists(caminho):
        raise SchemaError(f"Arquivo não encontrado: {caminho}")
    extensao = os.path.splitext(caminho)[1].lower()
    try:
        if extensao in ('.xlsx', '.xlsm'):
            df = pd.read_excel(caminho, dtype=str, engine='openpyxl').fillna('')
        else:
            df = pd.read_csv(caminho, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as e:
        raise SchemaError(f"{caminho}: não foi possível ler a tabela ({e})") from None
    df.columns = [str(c).strip() for c in df.columns]
    return df


def _exigir_colunas(df: pd.DataFrame, colunas: Sequence[str], caminho: str) -> None:
    faltando = [c for c in colunas if c not in df.columns]
    if faltando:
        raise SchemaError(f"{caminho}: colunas obrigatórias ausentes {faltando}")


def _numerico(df: pd.DataFrame, coluna: str, padrao: float = math.nan) -> np.ndarray:
    if coluna not in df.columns:
        return np.full(len(df), padrao)
    texto = df[coluna].astype(str).str.strip()
    valores = pd.to_numeric(texto, errors='coerce').to_numpy(dtype=float)
    if not math.isnan(padrao):
        valores = np.where(texto == '', padrao, valores)
    return valores


def _flag_censura(texto: str) -> Optional[bool]:
    """True/False a partir do texto; None se vazio; ValueError se inválido."""
    texto = texto.strip().lower()
    if not texto:
        return None
    if texto in _VERDADEIRO:
        return True
    if texto in _FALSO:
        return False
    raise ValueError(texto)


def _verificar_unidade(pl: np.ndarray, caminho: str) -> None:
    """
    Recusa a coluna de perda quando nenhum valor numérico cai em [20, 200] dB.

    Raises:
        UnitSanityError: Coluna inteira fora da faixa (ex.: potência em dBm)
    """
    numericos = pl[np.isfinite(pl)]
    if numericos.size and not np.any((numericos >= PATH_LOSS_MIN_DB) & (numericos <= PATH_LOSS_MAX_DB)):
        raise UnitSanityError(
            f"{caminho}: nenhuma perda em [{PATH_LOSS_MIN_DB:g}, {PATH_LOSS_MAX_DB:g}] dB "
            f"(valores entre {numericos.min():g} e {numericos.max():g}); verifique a unidade da coluna path_loss_db"
        )


def ingest_processed(caminho: str, censor_level: float,
                     rejeicoes: Optional[RejectionLog] = None) -> Dataset:
    """
    Lê um CSV/XLSX de campanha processada.

    Linhas inválidas são rejeitadas com diagnóstico por número de linha
    (cabeçalho = linha 1) sem abortar a leitura. Flags de censura ausentes
    ou inconsistentes com o nível são derivadas de censor_level.

    Args:
        caminho: Arquivo de campanha
        censor_level: Nível de censura (dB)
        rejeicoes: Registro onde acumular rejeições (opcional)

    Returns:
        Dataset ordenado por (run_id, t)

    Raises:
        SchemaError: Colunas obrigatórias ausentes
        UnitSanityError: Nenhuma perda na faixa física
        EmptyDatasetError: Nenhuma linha válida
    """
    if not math.isfinite(censor_level):
        raise DomainError("censor_level deve ser finito")
    log = rejeicoes if rejeicoes is not None else RejectionLog(caminho)
    df = _ler_tabela(caminho)
    _exigir_colunas(df, _COLUNAS_OBRIGATORIAS, caminho)

    run_ids = df['run_id'].astype(str).str.strip().to_numpy()
    t = _numerico(df, 't_s')
    d = _numerico(df, 'd_m')
    pl = _numerico(df, 'path_loss_db')
    _verificar_unidade(pl, caminho)
    v_tx = _numerico(df, 'v_tx_mps', padrao=0.0)
    v_rx = _numerico(df, 'v_rx_mps', padrao=0.0)
    links_texto = df['link'].astype(str).to_numpy() if 'link' in df.columns else np.full(len(df), '')
    censura_texto = df['censored'].astype(str).to_numpy() if 'censored' in df.columns else np.full(len(df), '')

    validos: List[int] = []
    links: List[LinkClass] = []
    flags: List[Optional[bool]] = []
    vistos = set()
    for i in range(len(df)):
        linha = i + 2
        if not run_ids[i]:
            log.registrar(linha, "run_id vazio", 'run_id')
            continue
        if not math.isfinite(t[i]):
            log.registrar(linha, "tempo ausente ou não numérico", 't_s')
            continue
        if not math.isfinite(d[i]) or d[i] <= 0:
            log.registrar(linha, f"distância deve ser > 0 (valor '{df['d_m'].iloc[i]}')", 'd_m')
            continue
        if not math.isfinite(pl[i]) or not PATH_LOSS_MIN_DB <= pl[i] <= PATH_LOSS_MAX_DB:
            log.registrar(
                linha,
                f"perda fora de [{PATH_LOSS_MIN_DB:g}, {PATH_LOSS_MAX_DB:g}] dB (valor '{df['path_loss_db'].iloc[i]}')",
                'path_loss_db',
            )
            continue
        if not (math.isfinite(v_tx[i]) and math.isfinite(v_rx[i])):
            log.registrar(linha, "velocidade não numérica", 'v_tx_mps/v_rx_mps')
            continue
        try:
            link = LinkClass.parse(links_texto[i])
        except DomainError:
            log.registrar(linha, f"classe de enlace inválida '{links_texto[i]}'", 'link')
            continue
        try:
            flag = _flag_censura(censura_texto[i])
        except ValueError:
            log.registrar(linha, f"flag de censura inválida '{censura_texto[i]}'", 'censored')
            continue
        chave = (run_ids[i], t[i])
        if chave in vistos:
            log.registrar(linha, f"instante duplicado t={t[i]:g} na corrida {run_ids[i]}", 't_s')
            continue
        vistos.add(chave)
        validos.append(i)
        links.append(link)
        flags.append(flag)

    if len(log):
        logger.warning(log.summary())
    if not validos:
        raise EmptyDatasetError(f"{caminho}: nenhuma linha válida")

    idx = np.asarray(validos)
    derivadas = pl[idx] >= censor_level
    informadas = np.array([derivadas[k] if f is None else f for k, f in enumerate(flags)], dtype=bool)
    divergentes = int(np.count_nonzero(informadas != derivadas))
    if divergentes:
        logger.warning(
            f"{caminho}: {divergentes} flag(s) de censura recalculada(s) para o nível {censor_level:g} dB"
        )

    dataset = Dataset.from_arrays(
        t=t[idx], d=d[idx], path_loss=pl[idx], censor_level=censor_level,
        v_tx=v_tx[idx], v_rx=v_rx[idx], link=links, run_id=run_ids[idx].tolist(),
        censored=derivadas,
    )
    logger.info(f"{caminho}: {len(dataset)} registros, {dataset.n_censored} censurados")
    return dataset


def _formatar_tabela(dataset: Dataset, extras: Optional[Dict[str, Sequence[Any]]]) -> pd.DataFrame:
    df = dataset.to_frame()
    for coluna in ('t_s', 'd_m', 'path_loss_db', 'v_tx_mps', 'v_rx_mps'):
        df[coluna] = [format_float(v) for v in df[coluna]]
    df['censored'] = np.where(df['censored'].to_numpy(dtype=bool), 'true', 'false')
    for nome, valores in (extras or {}).items():
        if len(valores) != len(df):
            raise DomainError(f"Coluna extra '{nome}' com tamanho diferente do dataset")
        df[nome] = [format_float(v) if isinstance(v, (float, np.floating)) else str(v) for v in valores]
    return df


def export_processed(dataset: Dataset, caminho: str,
                     extras: Optional[Dict[str, Sequence[Any]]] = None) -> None:
    """
    Grava o dataset no esquema do CSV processado (ou XLSX pela extensão).

    Args:
        dataset: Dataset a exportar
        caminho: Arquivo de saída
        extras: Colunas adicionais (ex.: d_gps_m, d_source) na ordem do dataset
    """
    pasta = os.path.dirname(os.path.abspath(caminho))
    os.makedirs(pasta, exist_ok=True)
    df = _formatar_tabela(dataset, extras)
    if os.path.splitext(caminho)[1].lower() == '.xlsx':
        df.to_excel(caminho, index=False, engine='openpyxl')
    else:
        df.to_csv(caminho, index=False, lineterminator='\n', encoding='utf-8')
    logger.info(f"Campanha exportada: {caminho} ({len(df)} linhas)")


# ============================================================================
# Fluxos brutos
# ============================================================================

def _ler_fluxo(caminho: str, colunas: Sequence[str], log: RejectionLog) -> Tuple[np.ndarray, ...]:
    """Lê colunas numéricas de um fluxo bruto, rejeitando linhas inválidas."""
    df = _ler_tabela(caminho)
    _exigir_colunas(df, colunas, caminho)
    valores = [_numerico(df, c) for c in colunas]
    ok = np.ones(len(df), dtype=bool)
    for coluna, v in zip(colunas, valores):
        ruins = ~np.isfinite(v) & ok
        for i in np.flatnonzero(ruins):
            log.registrar(int(i) + 2, "valor ausente ou não numérico", coluna)
        ok &= np.isfinite(v)
    if 'lat' in colunas:
        lat = valores[list(colunas).index('lat')]
        for i in np.flatnonzero(ok & (np.abs(lat) > 90.0)):
            log.registrar(int(i) + 2, "latitude fora de [-90, 90]", 'lat')
        ok &= ~(np.abs(lat) > 90.0)
    if 'path_loss_db' in colunas:
        pl = valores[list(colunas).index('path_loss_db')]
        _verificar_unidade(pl[ok], caminho)
        fora = ok & ~((pl >= PATH_LOSS_MIN_DB) & (pl <= PATH_LOSS_MAX_DB))
        for i in np.flatnonzero(fora):
            log.registrar(int(i) + 2, f"perda fora de [{PATH_LOSS_MIN_DB:g}, {PATH_LOSS_MAX_DB:g}] dB", 'path_loss_db')
        ok &= ~fora
    linhas = np.flatnonzero(ok) + 2
    valores = [v[ok] for v in valores]
    t = valores[0]
    passos = np.diff(t)
    if np.any(passos < 0):
        k = int(np.flatnonzero(passos < 0)[0]) + 1
        raise MonotonicityError(f"{caminho}: tempo decresce na linha {linhas[k]}")
    return tuple(valores)


def ingest_raw(gps_tx: str, gps_rx: str, uwb: str, rf: str, uwb_cable_bias: float = 5.0,
               gps_sigma: float = 5.4, uwb_sigma: float = 0.036, gps_corr_time: float = 10.0,
               rejeicoes: Optional[RejectionLog] = None) -> RawCampaign:
    """
    Lê os quatro fluxos brutos de uma corrida.

    Args:
        gps_tx, gps_rx: CSVs (t,lat,lon)
        uwb: CSV (t,range_m)
        rf: CSV (t,path_loss_db)
        uwb_cable_bias, gps_sigma, uwb_sigma, gps_corr_time: Parâmetros dos sensores
        rejeicoes: Registro de rejeições (opcional)

    Returns:
        RawCampaign validada
    """
    log = rejeicoes if rejeicoes is not None else RejectionLog("fluxos brutos")
    logs = {nome: RejectionLog(nome) for nome in (gps_tx, gps_rx, uwb, rf)}
    t_tx, lat_tx, lon_tx = _ler_fluxo(gps_tx, ('t', 'lat', 'lon'), logs[gps_tx])
    t_rx, lat_rx, lon_rx = _ler_fluxo(gps_rx, ('t', 'lat', 'lon'), logs[gps_rx])
    t_u, r_u = _ler_fluxo(uwb, ('t', 'range_m'), logs[uwb])
    t_rf, pl = _ler_fluxo(rf, ('t', 'path_loss_db'), logs[rf])
    for nome, registro in logs.items():
        if len(registro):
            logger.warning(registro.summary())
            for r in registro.rejections:
                log.registrar(r.line, f"{os.path.basename(nome)}: {r.reason}", r.column)
    if len(t_rf) == 0:
        raise EmptyDatasetError(f"{rf}: nenhuma amostra RF válida")
    return RawCampaign(
        rf=TimeSeries(t_rf, pl),
        gps_tx=GpsTrack(t_tx, lat_tx, lon_tx),
        gps_rx=GpsTrack(t_rx, lat_rx, lon_rx),
        uwb=TimeSeries(t_u, r_u),
        uwb_cable_bias=uwb_cable_bias,
        gps_sigma=gps_sigma,
        uwb_sigma=uwb_sigma,
        gps_corr_time=gps_corr_time,
    )


RAW_FILES = {'gps_tx': 'gps_tx.csv', 'gps_rx': 'gps_rx.csv', 'uwb': 'uwb.csv', 'rf': 'rf.csv'}


def export_raw(raw: RawCampaign, diretorio: str) -> Dict[str, str]:
    """
    Grava os fluxos brutos nos quatro CSVs do diretório.

    Returns:
        Dicionário fluxo -> caminho gravado
    """
    os.makedirs(diretorio, exist_ok=True)
    tabelas = {
        'gps_tx': pd.DataFrame({'t': raw.gps_tx.t, 'lat': raw.gps_tx.lat, 'lon': raw.gps_tx.lon}),
        'gps_rx': pd.DataFrame({'t': raw.gps_rx.t, 'lat': raw.gps_rx.lat, 'lon': raw.gps_rx.lon}),
        'uwb': pd.DataFrame({'t': raw.uwb.t, 'range_m': raw.uwb.values}),
        'rf': pd.DataFrame({'t': raw.rf.t, 'path_loss_db': raw.rf.values}),
    }
    caminhos = {}
    for nome, tabela in tabelas.items():
        caminho = os.path.join(diretorio, RAW_FILES[nome])
        # lat/lon exigem mais dígitos que os demais campos
        formato = "%.12g" if nome.startswith('gps') else "%.9g"
        tabela.to_csv(caminho, index=False, float_format=formato, lineterminator='\n', encoding='utf-8')
        caminhos[nome] = caminho
    logger.info(f"Fluxos brutos gravados em {diretorio}")
    return caminhos


def ingest_links(caminho: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lê rótulos de classe de enlace (t_s,link), constantes por trechos.

    Returns:
        Tupla (inícios, classes como strings)
    """
    df = _ler_tabela(caminho)
    _exigir_colunas(df, ('t_s', 'link'), caminho)
    t = _numerico(df, 't_s')
    classes = []
    for i, texto in enumerate(df['link'].astype(str)):
        try:
            classes.append(LinkClass.parse(texto).value)
        except DomainError:
            raise SchemaError(f"{caminho}: linha {i + 2}: classe de enlace inválida '{texto}'") from None
    if not np.all(np.isfinite(t)):
        raise SchemaError(f"{caminho}: t_s não numérico")
    if np.any(np.diff(t) <= 0):
        raise MonotonicityError(f"{caminho}: t_s deve ser estritamente crescente")
    return t, np.array(classes, dtype=object)


class CampaignRepository:
    """
    Acesso às campanhas em disco com cache por caminho.

    O cache é invalidado quando o arquivo muda (mtime) ou quando o nível de
    censura pedido é outro.
    """

    def __init__(self, censor_level: float):
        """
        Inicializa o repositório.

        Args:
            censor_level: Nível de censura aplicado na ingestão (dB)
        """
        self.censor_level = float(censor_level)
        self._cache: Dict[str, Tuple[float, float, Dataset]] = {}
        self._rejeicoes: Dict[str, RejectionLog] = {}

    def carregar(self, caminho: str, forcar_recarga: bool = False) -> Dataset:
        """
        Carrega uma campanha processada.

        Args:
            caminho: Arquivo CSV/XLSX
            forcar_recarga: Ignora o cache

        Returns:
            Dataset
        """
        chave = os.path.abspath(caminho)
        mtime = os.path.getmtime(caminho) if os.path.exists(caminho) else -1.0
        em_cache = self._cache.get(chave)
        if em_cache and not forcar_recarga and em_cache[0] == mtime and em_cache[1] == self.censor_level:
            logger.debug(f"{caminho}: usando cache ({len(em_cache[2])} registros)")
            return em_cache[2]

        log = RejectionLog(caminho)
        dataset = ingest_processed(caminho, self.censor_level, log)
        self._rejeicoes[chave] = log
        self._cache[chave] = (mtime, self.censor_level, dataset)
        return dataset

    def carregar_varios(self, caminhos: Sequence[str]) -> Dataset:
        """
        Carrega e concatena várias campanhas.

        Raises:
            SchemaError: Mesmo run_id em dois arquivos
        """
        datasets = []
        origem: Dict[str, str] = {}
        for caminho in caminhos:
            dataset = self.carregar(caminho)
            for run in dataset.runs():
                if run in origem:
                    raise SchemaError(f"Corrida {run} presente em {origem[run]} e {caminho}")
                origem[run] = caminho
            datasets.append(dataset)
        return Dataset.concat(datasets)

    def rejeicoes(self, caminho: str) -> RejectionLog:
        """Rejeições da última leitura do arquivo."""
        return self._rejeicoes.get(os.path.abspath(caminho), RejectionLog(caminho))

    def salvar(self, dataset: Dataset, caminho: str,
               extras: Optional[Dict[str, Sequence[Any]]] = None) -> Tuple[bool, str]:
        """
        Exporta um dataset.

        Returns:
            Tupla (sucesso, mensagem)
        """
        try:
            export_processed(dataset, caminho, extras)
        except OSError as e:
            return False, f"Erro ao gravar {caminho}: {e}"
        self._cache.pop(os.path.abspath(caminho), None)
        return True, f"{len(dataset)} registros gravados em {caminho}"

    @staticmethod
    def obter_estatisticas(dataset: Dataset) -> Dict[str, Any]:
        """
        Estatísticas resumidas de uma campanha.

        Args:
            dataset: Campanha

        Returns:
            Dicionário com contagens, fração censurada e faixas
        """
        if not len(dataset):
            return {
                'total': 0,
                'corridas': 0,
                'censurados': 0,
                'fracao_censurada': 0.0,
                'por_classe': {},
                'distancia': {'min': None, 'max': None},
                'duracao_s': 0.0,
                'censor_level': dataset.censor_level,
            }

        arr = dataset.arrays
        classes, contagens = np.unique(arr.link.astype(str), return_counts=True)
        duracao = 0.0
        for run in dataset.runs():
            t_run = arr.t[arr.run_id == run]
            duracao += float(t_run[-1] - t_run[0])

        return {
            'total': len(dataset),
            'corridas': len(dataset.runs()),
            'censurados': dataset.n_censored,
            'fracao_censurada': dataset.censored_fraction,
            'por_classe': {str(c): int(n) for c, n in zip(classes, contagens)},
            'distancia': {'min': float(arr.d.min()), 'max': float(arr.d.max())},
            'duracao_s': duracao,
            'censor_level': dataset.censor_level,
        }
