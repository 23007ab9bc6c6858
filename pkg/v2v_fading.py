#!/usr/bin/env python3
"""
Desvanecimento em larga escala V2V

Simulação, fusão de distância, ajuste ML censurado e correlação do
sombreamento de campanhas veículo-a-veículo.

Usage:
    python v2v_fading.py <comando> [opções]
    python v2v_fading.py --help
"""

import os
import sys

# Adiciona diretório atual ao path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cli.main import main

if __name__ == "__main__":
    sys.exit(main())
