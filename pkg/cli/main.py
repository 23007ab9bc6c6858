"""
Linha de comando do pipeline de desvanecimento em larga escala V2V.

Comandos:
    synth       Simula uma campanha (e, opcionalmente, os sensores brutos)
    fuse        Fusão GPS+UWB e montagem do CSV processado
    fit         Ajuste ML censurado de uma família
    compare     Quatro famílias + varredura da quebra, ranking por BIC
    autocorr    Autocorrelação do sombreamento e ajuste de Gudmundson
    sigma-bins  Desvio do sombreamento por faixa de distância
    breakpoint  Quebra teórica pela primeira zona de Fresnel
    presets     Lista os presets de parâmetros

Códigos de saída: 0 sucesso, 2 validação, 3 não convergência, 1 erro inesperado.
"""

import argparse
import json
import math
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from core.models import (CampaignConfig, Dataset, Domain, FitResult, ModelFamily,
                         PathLossModel, TrajectorySpec)
from core.pathloss import theoretical_breakpoint
from core.repository import (CampaignRepository, RAW_FILES, export_processed, export_raw,
                             ingest_links, ingest_raw)
from services.censored_ml import compare_families, fit, parse_sweep
from services.channel_simulator import (campaign_from_config, corrupt_distances,
                                        simulate_campaign)
from services.preprocessing import build_processed_dataset
from services.preset_manager import PresetManager
from services.run_history import RunHistory
from services.shadowing_correlation import (DEFAULT_SIGMA_BINS, bucketed_decorrelation,
                                            estimate_decorrelation, extract_residuals,
                                            resample_all, sigma_vs_distance)
from utils.errors import (EXIT_CONVERGENCE, EXIT_OK, EXIT_VALIDATION, DomainError,
                          SchemaError, V2VError, exit_code_for)
from utils.logging_setup import LOG_LEVELS, configure_logging
from utils.reporting import provenance, read_json, write_csv, write_json

# Campanha sintética usada quando a configuração não traz o bloco 'synth':
# ciclos 5 m -> 2000 m -> 5 m com 40 000 amostras e o DSDS diurno.
SYNTH_PADRAO: Dict[str, Any] = {
    'model': 'dsds_campaign1',
    'trajectory': {
        'duration': 6600.0,
        'sample_period': 0.165,
        'distance_waypoints': [[0, 5], [200, 100], [368, 600], [400, 2000],
                               [432, 600], [600, 100], [800, 5]],
        'v_rx': [[0, 10.0]],
        'v_tx': [[0, 10.0]],
    },
    'shadowing': 'shadowing_time_campaign1',
}

Handler = Callable[[argparse.Namespace, CampaignConfig], Tuple[int, Dict[str, Any]]]


# ============================================================================
# Auxiliares
# ============================================================================

def _carregar_config(args: argparse.Namespace) -> CampaignConfig:
    config = CampaignConfig.carregar(args.config) if args.config else CampaignConfig()
    return config.com_sobrescritas(
        censor_level=getattr(args, 'censor_level', None),
        seed=args.seed,
        n_starts=getattr(args, 'n_starts', None),
        max_workers=getattr(args, 'workers', None),
    )


def _presets() -> PresetManager:
    return PresetManager()


def _carregar_dataset(caminhos: Sequence[str], config: CampaignConfig) -> Dataset:
    """Um ou mais arquivos processados, concatenados."""
    repositorio = CampaignRepository(config.censor_level)
    dataset = repositorio.carregar_varios(caminhos)
    for caminho in caminhos:
        rejeicoes = repositorio.rejeicoes(caminho)
        if len(rejeicoes):
            logger.warning(rejeicoes.summary())
    return dataset


def _carregar_modelo(args: argparse.Namespace) -> PathLossModel:
    """Modelo a partir de --fit (relatório do fit ou documento de modelo) ou --preset."""
    if getattr(args, 'preset', None):
        return _presets().carregar_modelo(args.preset)
    if not getattr(args, 'fit', None):
        raise SchemaError("Informe --fit ou --preset")
    documento = read_json(args.fit)
    documento = documento.get('fit', documento)
    return PathLossModel.from_dict(documento.get('model', documento))


def _entradas(*caminhos: Union[None, str, Sequence[str]]) -> List[str]:
    entradas: List[str] = []
    for c in caminhos:
        if isinstance(c, str):
            entradas.append(c)
        elif c:
            entradas.extend(c)
    return entradas


def _parse_bins(texto: str) -> List[Tuple[float, float]]:
    """Bordas 'a,b,c,...' (aceita 'inf') em faixas consecutivas [a,b), [b,c)..."""
    try:
        bordas = [float(p) for p in texto.split(',') if p.strip()]
    except ValueError:
        raise DomainError(f"Faixas inválidas: {texto}") from None
    if len(bordas) < 2:
        raise DomainError("--bins exige ao menos duas bordas")
    return list(zip(bordas[:-1], bordas[1:]))


def _imprimir_ranking(linhas: Sequence[Dict[str, Any]]) -> None:
    print("=" * 60)
    print(f"{'#':>2}  {'família':<10} {'d_break':>8} {'BIC':>14} {'RMSE':>8}  conv.")
    print("-" * 60)
    for k, linha in enumerate(linhas, 1):
        d_break = '-' if linha['d_break'] is None else f"{linha['d_break']:g}"
        print(f"{k:>2}  {linha['family']:<10} {d_break:>8} {linha['bic']:>14.3f} "
              f"{linha['rmse']:>8.3f}  {'sim' if linha['converged'] else 'NÃO'}")
    print("=" * 60)


# ============================================================================
# Comandos
# ============================================================================

def cmd_synth(args: argparse.Namespace, config: CampaignConfig) -> Tuple[int, Dict[str, Any]]:
    """Simula uma campanha e grava o CSV processado (e os fluxos brutos)."""
    presets = _presets()
    bloco = dict(config.synth or SYNTH_PADRAO)
    if args.model:
        bloco['model'] = args.model
    if isinstance(bloco.get('shadowing'), str):
        bloco['shadowing'] = presets.carregar_sombreamento(bloco['shadowing'])

    model, traj, processo, opcoes = campaign_from_config(bloco, presets.carregar_modelo)
    dataset = simulate_campaign(model, traj, processo, config.censor_level, config.seed,
                                run_id=opcoes['run_id'], sigma_mode=opcoes['sigma_mode'])
    export_processed(dataset, args.out)

    arquivos_brutos: Dict[str, str] = {}
    if args.raw_dir:
        sensores = {
            'gps_sigma': config.gps_sigma,
            'gps_corr_time': config.gps_corr_time,
            'uwb_sigma': config.uwb_sigma,
            'uwb_cable_bias': config.uwb_cable_bias,
            **opcoes['sensors'],
        }
        raw = corrupt_distances(dataset, seed=config.seed, **sensores)
        arquivos_brutos = export_raw(raw, args.raw_dir)
        arquivos_brutos['links'] = _exportar_links(traj, os.path.join(args.raw_dir, 'links.csv'))

    relatorio = {
        'provenance': provenance('synth', _entradas(args.config), config.seed),
        'model': model.to_dict(),
        'campaign': CampaignRepository.obter_estatisticas(dataset),
        'raw_files': arquivos_brutos or None,
    }
    print(f"{len(dataset)} amostras simuladas ({dataset.censored_fraction:.1%} censuradas) -> {args.out}")
    return EXIT_OK, relatorio


def _exportar_links(traj: TrajectorySpec, caminho: str) -> str:
    tabela = pd.DataFrame({'t_s': [t for t, _ in traj.link_schedule],
                           'link': [classe.value for _, classe in traj.link_schedule]})
    write_csv(caminho, tabela)
    return caminho


def cmd_fuse(args: argparse.Namespace, config: CampaignConfig) -> Tuple[int, Dict[str, Any]]:
    """Fluxos brutos -> CSV processado com distância fundida."""
    raw = ingest_raw(args.gps_tx, args.gps_rx, args.uwb, args.rf,
                     uwb_cable_bias=config.uwb_cable_bias, gps_sigma=config.gps_sigma,
                     uwb_sigma=config.uwb_sigma, gps_corr_time=config.gps_corr_time)
    links = ingest_links(args.links) if args.links else None
    janela_media = args.averaging_window if args.averaging_window is not None else config.averaging_window
    dataset, extras = build_processed_dataset(
        raw, config.censor_level, averaging_window=janela_media,
        fusion_window=args.window if args.window is not None else config.fusion_window,
        links=links, run_id=args.run_id,
    )
    export_processed(dataset, args.out, extras)

    n_fundidas = int(np.count_nonzero(extras['d_source'] == 'FUSED'))
    relatorio = {
        'provenance': provenance('fuse', _entradas(args.gps_tx, args.gps_rx, args.uwb, args.rf, args.links),
                                 config.seed, {'averaging_window': janela_media}),
        'campaign': CampaignRepository.obter_estatisticas(dataset),
        'n_fused': n_fundidas,
        'n_gps_only': len(dataset) - n_fundidas,
    }
    print(f"{len(dataset)} amostras processadas ({n_fundidas} com distância fundida) -> {args.out}")
    return EXIT_OK, relatorio


def cmd_fit(args: argparse.Namespace, config: CampaignConfig) -> Tuple[int, Dict[str, Any]]:
    """Ajuste de uma família; não convergência grava o relatório e sai com 3."""
    dataset = _carregar_dataset(args.data, config)
    if args.ignore_censoring:
        dataset = dataset.sem_censura()
    resultado = fit(args.family, dataset, d_break=args.d_break, n_starts=config.n_starts, seed=config.seed)

    relatorio = {
        'provenance': provenance('fit', _entradas(args.data, args.config), config.seed),
        'censor_level': config.censor_level,
        'ignore_censoring': bool(args.ignore_censoring),
        'fit': resultado.to_dict(),
    }
    write_json(args.out, relatorio)
    if args.save_preset:
        ok, mensagem = _presets().salvar_modelo(args.save_preset, resultado.model,
                                                f"Ajuste de {', '.join(os.path.basename(c) for c in args.data)}")
        (logger.info if ok else logger.warning)(mensagem)

    print(f"{resultado.family.value}: LL={resultado.log_likelihood:.3f} BIC={resultado.bic:.3f} "
          f"RMSE={resultado.rmse:.3f} dB -> {args.out}")
    return (EXIT_OK if resultado.converged else EXIT_CONVERGENCE), relatorio


def _linha_fit(resultado: FitResult) -> Dict[str, Any]:
    return {
        'family': resultado.family.value,
        'd_break': resultado.d_break,
        'bic': resultado.bic,
        'log_likelihood': resultado.log_likelihood,
        'rmse': resultado.rmse,
        'converged': resultado.converged,
    }


def cmd_compare(args: argparse.Namespace, config: CampaignConfig) -> Tuple[int, Dict[str, Any]]:
    """Compara as quatro famílias; grava o BIC de cada candidato da varredura."""
    dataset = _carregar_dataset(args.data, config)
    candidatos = parse_sweep(args.sweep) if args.sweep else config.breakpoint_candidates
    comparacao = compare_families(dataset, candidatos, n_starts=config.n_starts, seed=config.seed,
                                  max_workers=config.max_workers, status=logger.info,
                                  progresso=lambda atual, total: logger.debug(f"Candidato {atual}/{total}"))

    linhas_csv = []
    for resultado in comparacao.fits.values():
        if not resultado.family.is_double_slope:
            linhas_csv.append({**_linha_fit(resultado), 'error': ''})
    for family, entradas in comparacao.sweeps.items():
        for entrada in entradas:
            if isinstance(entrada, FitResult):
                linhas_csv.append({**_linha_fit(entrada), 'error': ''})
            else:
                linhas_csv.append({'family': family.value, 'd_break': entrada.d_break, 'bic': math.nan,
                                   'log_likelihood': math.nan, 'rmse': math.nan, 'converged': False,
                                   'error': entrada.message})
    write_csv(args.out, pd.DataFrame(linhas_csv, columns=['family', 'd_break', 'bic', 'log_likelihood',
                                                          'rmse', 'converged', 'error']))

    ranking = [_linha_fit(r) for r in comparacao.ranking()]
    _imprimir_ranking(ranking)
    melhor = comparacao.best()
    relatorio = {
        'provenance': provenance('compare', _entradas(args.data, args.config), config.seed,
                                 {'candidates': list(candidatos)}),
        'ranking': ranking,
        'best': _linha_fit(melhor),
        'skipped': {f.value: motivo for f, motivo in comparacao.skipped.items()},
    }
    return (EXIT_OK if melhor.converged else EXIT_CONVERGENCE), relatorio


def cmd_autocorr(args: argparse.Namespace, config: CampaignConfig) -> Tuple[int, Dict[str, Any]]:
    """Autocorrelação + Gudmundson, ou a tabela por faixas de velocidade."""
    dataset = _carregar_dataset(args.data, config)
    model = _carregar_modelo(args)
    domain = Domain.parse(args.domain)
    espacamento = args.spacing if args.spacing is not None else config.grid_spacing(domain)
    lag_max = args.lag_max if args.lag_max is not None else config.lag_max(domain)
    base = provenance('autocorr', _entradas(args.data, args.fit, args.config), config.seed)

    if args.buckets:
        if domain is not Domain.TIME:
            raise DomainError("--buckets exige --domain time")
        blocos = resample_all(extract_residuals(model, dataset, domain), espacamento)
        rx_bins, rel_bins = config.speed_bins()
        tabela = bucketed_decorrelation(blocos, dataset, rx_bins, rel_bins,
                                        config.min_samples_rule, lag_max)
        write_csv(args.out, tabela.to_frame())
        print(tabela.to_frame().to_string(index=False))
        return EXIT_OK, {
            'provenance': base,
            'domain': domain.value,
            'grid_spacing': espacamento,
            'min_samples_rule': tabela.min_samples_rule,
            'rx_speed_bins': [list(b) for b in tabela.rx_speed_bins],
            'rel_speed_bins': [list(b) for b in tabela.rel_speed_bins],
            't_c': [list(linha) for linha in tabela.t_c],
            'n_at_scale': [list(linha) for linha in tabela.n_at_scale],
        }

    est = estimate_decorrelation(model, dataset, domain, espacamento, lag_max)
    write_csv(args.out, est.to_frame())
    unidade = 'm' if domain is Domain.DISTANCE else 's'
    print(f"Escala de descorrelação ({domain.value}): {est.fitted_scale:.4g} {unidade}, "
          f"sigma={math.sqrt(est.sigma2):.3f} dB")
    return EXIT_OK, {
        'provenance': base,
        'domain': domain.value,
        'grid_spacing': espacamento,
        'lag_max': lag_max,
        'sigma2': est.sigma2,
        'fitted_scale': est.fitted_scale,
        'fit_weighted_sse': est.fit_weighted_sse,
    }


def cmd_sigma_bins(args: argparse.Namespace, config: CampaignConfig) -> Tuple[int, Dict[str, Any]]:
    """Desvio do sombreamento por faixa de distância."""
    dataset = _carregar_dataset(args.data, config)
    model = _carregar_modelo(args)
    faixas = _parse_bins(args.bins) if args.bins else list(DEFAULT_SIGMA_BINS)
    resultado = sigma_vs_distance(model, dataset, faixas)
    tabela = pd.DataFrame([b.to_dict() for b in resultado], columns=['lower', 'upper', 'sigma', 'n', 'status'])
    write_csv(args.out, tabela)
    print(tabela.to_string(index=False))
    return EXIT_OK, {
        'provenance': provenance('sigma-bins', _entradas(args.data, args.fit, args.config), config.seed),
        'bins': [b.to_dict() for b in resultado],
    }


def cmd_breakpoint(args: argparse.Namespace, config: CampaignConfig) -> Tuple[int, Dict[str, Any]]:
    """Quebra teórica 4 h_tx h_rx / lambda."""
    h_tx = args.h_tx if args.h_tx is not None else config.h_tx
    h_rx = args.h_rx if args.h_rx is not None else config.h_rx
    portadora = args.carrier if args.carrier is not None else config.carrier_hz
    d_break = theoretical_breakpoint(h_tx, h_rx, portadora)
    print(f"Quebra teórica: {d_break:.2f} m (h_tx={h_tx:g} m, h_rx={h_rx:g} m, f={portadora / 1e6:g} MHz)")
    return EXIT_OK, {
        'provenance': provenance('breakpoint', _entradas(args.config), config.seed),
        'h_tx': h_tx,
        'h_rx': h_rx,
        'carrier_hz': portadora,
        'd_break_m': d_break,
    }


def cmd_presets(args: argparse.Namespace, config: CampaignConfig) -> Tuple[int, Dict[str, Any]]:
    """Lista os presets ou mostra um deles."""
    presets = _presets()
    if args.show:
        ok, dados = presets.carregar(args.show)
        if not ok:
            raise SchemaError(dados)
        print(json.dumps(dados, indent=2, ensure_ascii=False))
        return EXIT_OK, {'provenance': provenance('presets'), 'preset': {args.show: dados}}

    lista = presets.listar_todos()
    print("=" * 60)
    for item in lista:
        print(f"  {item['nome']:<32} {item['tipo']:<13} {item['familia']}")
    print("=" * 60)
    return EXIT_OK, {'provenance': provenance('presets'), 'presets': lista}


# ============================================================================
# Parser
# ============================================================================

def _build_parser() -> argparse.ArgumentParser:
    comum = argparse.ArgumentParser(add_help=False)
    comum.add_argument('--config', help="Configuração JSON da campanha")
    comum.add_argument('--seed', type=int, help="Semente (sobrescreve a configuração)")
    comum.add_argument('--log-level', default='INFO', type=str.upper, choices=LOG_LEVELS)
    comum.add_argument('--history-dir', help="Diretório do histórico de execuções")
    comum.add_argument('--report', help="Relatório JSON adicional")

    parser = argparse.ArgumentParser(prog='v2v_fading', description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', parents=[comum], help="Simula uma campanha")
    p.add_argument('--out', required=True, help="CSV processado de saída")
    p.add_argument('--raw-dir', help="Grava também gps_tx/gps_rx/uwb/rf/links.csv")
    p.add_argument('--model', help="Preset de modelo (sobrescreve synth.model)")
    p.add_argument('--censor-level', type=float)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser('fuse', parents=[comum], help="Fusão GPS+UWB")
    p.add_argument('--gps-tx', required=True)
    p.add_argument('--gps-rx', required=True)
    p.add_argument('--uwb', required=True)
    p.add_argument('--rf', required=True)
    p.add_argument('--links', help="Rótulos de enlace (t_s,link)")
    p.add_argument('--out', required=True)
    p.add_argument('--censor-level', type=float)
    p.add_argument('--window', type=float, help="Janela de validade do UWB (s)")
    p.add_argument('--averaging-window', type=int, help="Amostras RF por média")
    p.add_argument('--run-id', default='run-1')
    p.set_defaults(handler=cmd_fuse)

    p = sub.add_parser('fit', parents=[comum], help="Ajuste ML censurado")
    p.add_argument('--data', required=True, nargs='+', help="CSV/XLSX processado(s); vários são concatenados")
    p.add_argument('--family', required=True, choices=[f.value for f in ModelFamily])
    p.add_argument('--d-break', type=float)
    p.add_argument('--out', required=True)
    p.add_argument('--censor-level', type=float)
    p.add_argument('--n-starts', type=int)
    p.add_argument('--ignore-censoring', action='store_true',
                   help="Trata amostras censuradas como exatas no nível de censura")
    p.add_argument('--save-preset', help="Salva o modelo ajustado como preset")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser('compare', parents=[comum], help="Ranking BIC das quatro famílias")
    p.add_argument('--data', required=True, nargs='+', help="CSV/XLSX processado(s); vários são concatenados")
    p.add_argument('--sweep', help="inicio:passo:fim ou lista a,b,c")
    p.add_argument('--out', required=True, help="CSV family,d_break,bic,...")
    p.add_argument('--censor-level', type=float)
    p.add_argument('--n-starts', type=int)
    p.add_argument('--workers', type=int)
    p.set_defaults(handler=cmd_compare)

    for nome, ajuda, handler in (('autocorr', "Autocorrelação do sombreamento", cmd_autocorr),
                                 ('sigma-bins', "Desvio por faixa de distância", cmd_sigma_bins)):
        p = sub.add_parser(nome, parents=[comum], help=ajuda)
        p.add_argument('--data', required=True, nargs='+', help="CSV/XLSX processado(s); vários são concatenados")
        origem = p.add_mutually_exclusive_group(required=True)
        origem.add_argument('--fit', help="Relatório do fit ou documento de modelo")
        origem.add_argument('--preset', help="Preset de modelo")
        p.add_argument('--out', required=True)
        p.add_argument('--censor-level', type=float)
        p.set_defaults(handler=handler)
        if nome == 'autocorr':
            p.add_argument('--domain', choices=[d.value for d in Domain], default=Domain.DISTANCE.value)
            p.add_argument('--spacing', type=float)
            p.add_argument('--lag-max', type=float)
            p.add_argument('--buckets', action='store_true', help="Tabela por faixas de velocidade")
        else:
            p.add_argument('--bins', help="Bordas a,b,c,... (aceita inf)")

    p = sub.add_parser('breakpoint', parents=[comum], help="Quebra teórica")
    p.add_argument('--h-tx', type=float)
    p.add_argument('--h-rx', type=float)
    p.add_argument('--carrier', type=float, help="Portadora (Hz)")
    p.set_defaults(handler=cmd_breakpoint)

    p = sub.add_parser('presets', parents=[comum], help="Lista os presets")
    p.add_argument('--show', help="Mostra um preset")
    p.set_defaults(handler=cmd_presets)

    return parser


def _registrar_historico(args: argparse.Namespace, relatorio: Dict[str, Any], codigo: int) -> None:
    if not args.history_dir:
        return
    entrada = dict(relatorio.get('provenance') or provenance(args.command))
    entrada['exit_code'] = codigo
    if not RunHistory(args.history_dir).adicionar(entrada):
        logger.warning(f"Não foi possível gravar o histórico em {args.history_dir}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Executa a CLI.

    Args:
        argv: Argumentos (padrão: sys.argv[1:])

    Returns:
        Código de saída
    """
    args = _build_parser().parse_args(argv)
    configure_logging(args.log_level)

    handler: Handler = args.handler
    relatorio: Dict[str, Any] = {}
    try:
        config = _carregar_config(args)
        codigo, relatorio = handler(args, config)
        if args.report:
            write_json(args.report, relatorio)
    except V2VError as e:
        logger.error(str(e))
        codigo = exit_code_for(e)
    except FileNotFoundError as e:
        logger.error(f"Arquivo não encontrado: {e.filename}")
        codigo = EXIT_VALIDATION
    except json.JSONDecodeError as e:
        logger.error(f"JSON inválido: {e}")
        codigo = EXIT_VALIDATION

    if codigo == EXIT_CONVERGENCE:
        logger.warning("Otimizador não convergiu; relatório gravado mesmo assim")
    _registrar_historico(args, relatorio, codigo)
    return codigo


if __name__ == '__main__':
    sys.exit(main())
