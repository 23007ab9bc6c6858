"""Fixtures compartilhadas: modelos publicados e campanhas sintéticas pequenas."""

import math

import numpy as np
import pytest
from loguru import logger

from core.models import (CENSOR_LEVEL_CAMPAIGN1, Dataset, Domain, PathLossModel,
                         TrajectorySpec)
from core.pathloss import reference_sigma
from services.channel_simulator import ShadowingProcess, simulate_campaign

# Meio ciclo 5 -> 2000 m; o espelho volta a 5 m em t = 800 s.
# Com o DSDS diurno e censura em 110.6 dB, ~9% das amostras ficam censuradas.
WAYPOINTS_9PCT = ((0, 5), (200, 100), (368, 600), (400, 2000), (432, 600), (600, 100), (800, 5))


@pytest.fixture
def dsds_model():
    return PathLossModel.dsds(59.8, 1.6, 3.14, 35.0, 2.2, 4.5)


@pytest.fixture
def dsds_campaign2_model():
    return PathLossModel.dsds(59.5, 1.55, 3.28, 35.0, 2.2, 4.8)


@pytest.fixture
def ss_model():
    return PathLossModel.single_slope(57.34, 2.69, 4.5)


@pytest.fixture
def avisos():
    """Mensagens de nível WARNING ou acima registradas pelo loguru durante o teste."""
    mensagens = []
    sink = logger.add(lambda m: mensagens.append(m.record['message']), level='WARNING')
    yield mensagens
    logger.remove(sink)


def trajetoria(n_amostras: int = 40000, sample_period: float = 0.165, **kwargs) -> TrajectorySpec:
    """Trajetória cíclica 5-2000 m com n_amostras."""
    return TrajectorySpec(
        duration=n_amostras * sample_period,
        distance_waypoints=WAYPOINTS_9PCT,
        sample_period=sample_period,
        **kwargs,
    )


def campanha_iid(model, n_amostras: int, seed: int, censor_level: float = CENSOR_LEVEL_CAMPAIGN1,
                 **kwargs) -> Dataset:
    """Campanha com sombreamento praticamente independente entre amostras."""
    processo = ShadowingProcess(sigma=reference_sigma(model), scale=1e-3, domain=Domain.TIME)
    return simulate_campaign(model, trajetoria(n_amostras, **kwargs), processo, censor_level, seed)


@pytest.fixture
def small_dsds_campaign(dsds_model):
    return campanha_iid(dsds_model, 8000, seed=11)


@pytest.fixture
def uncensored_ss_data():
    """SS sem censura (nível infinito) com ruído gaussiano conhecido."""
    rng = np.random.default_rng(5)
    d = rng.uniform(5.0, 2000.0, 3000)
    pl = 57.0 + 26.9 * np.log10(d / 10.0) + rng.normal(0.0, 4.0, len(d))
    return Dataset.from_arrays(t=np.arange(len(d)) * 0.1, d=d, path_loss=pl, censor_level=math.inf)
