#!/usr/bin/env python3
"""
verify_campaign.py - Verifica campanhas processadas

Este script lê CSVs/XLSX de campanhas processadas, listando:
- Se o arquivo é válido e quantas linhas foram rejeitadas
- Número de corridas e amostras
- Fração de amostras censuradas
- Contagem por classe de enlace e faixa de distância

Uso:
    python verify_campaign.py [pasta_ou_arquivos...] [--censor-level DB]

    Se nada for especificado, usa 'data' como padrão.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.models import CENSOR_LEVEL_CAMPAIGN1
from core.repository import CampaignRepository
from utils.errors import V2VError
from utils.logging_setup import configure_logging

EXTENSOES = ('.csv', '.xlsx')


def verify_campaign(repositorio: CampaignRepository, caminho: str) -> dict:
    """
    Lê uma campanha e coleta as estatísticas.

    Args:
        repositorio: Repositório com o nível de censura
        caminho: Arquivo da campanha

    Returns:
        Dicionário com valid, stats, rejected, summary e error
    """
    try:
        dataset = repositorio.carregar(caminho)
    except V2VError as e:
        return {'valid': False, 'error': str(e)}
    rejeicoes = repositorio.rejeicoes(caminho)
    return {
        'valid': True,
        'stats': repositorio.obter_estatisticas(dataset),
        'rejected': len(rejeicoes.linhas()),
        'summary': rejeicoes.summary(limite=5),
        'error': None,
    }


def _arquivos(alvos):
    for alvo in alvos:
        if os.path.isdir(alvo):
            for nome in sorted(os.listdir(alvo)):
                if nome.lower().endswith(EXTENSOES):
                    yield os.path.join(alvo, nome)
        else:
            yield alvo


def main(argv=None) -> int:
    """Função principal."""
    parser = argparse.ArgumentParser(description="Verifica campanhas processadas")
    parser.add_argument('alvos', nargs='*', default=['data'])
    parser.add_argument('--censor-level', type=float, default=CENSOR_LEVEL_CAMPAIGN1)
    args = parser.parse_args(argv)
    configure_logging("ERROR")

    arquivos = list(_arquivos(args.alvos))
    if not arquivos:
        print("Nenhum arquivo de campanha encontrado.")
        return 0

    repositorio = CampaignRepository(args.censor_level)
    print(f"Verificando campanhas (censura {args.censor_level:g} dB)")
    print("=" * 60)

    validos = invalidos = total_amostras = 0
    for caminho in arquivos:
        resultado = verify_campaign(repositorio, caminho)
        print(f"\n{os.path.basename(caminho)}")
        if not resultado['valid']:
            invalidos += 1
            print(f"   INVÁLIDO: {resultado['error']}")
            continue

        validos += 1
        stats = resultado['stats']
        total_amostras += stats['total']
        print(f"   VÁLIDO: {stats['total']} amostra(s) em {stats['corridas']} corrida(s)")
        print(f"   Censuradas: {stats['censurados']} ({stats['fracao_censurada']:.1%})")
        if stats['total']:
            print(f"   Distância: {stats['distancia']['min']:.1f} a {stats['distancia']['max']:.1f} m, "
                  f"duração {stats['duracao_s']:.1f} s")
        for classe, n in stats['por_classe'].items():
            print(f"      - {classe}: {n}")
        if resultado['rejected']:
            print(f"   ATENÇÃO: {resultado['rejected']} linha(s) rejeitada(s)")
            for linha in resultado['summary'].splitlines()[1:]:
                print(f"     {linha}")

    print("\n" + "=" * 60)
    print("RESUMO:")
    print(f"  Arquivos verificados: {len(arquivos)}")
    print(f"  Válidos: {validos}")
    print(f"  Inválidos: {invalidos}")
    print(f"  Total de amostras: {total_amostras}")
    print("=" * 60)

    return 1 if invalidos else 0


if __name__ == "__main__":
    sys.exit(main())
