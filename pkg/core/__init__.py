"""Módulo core - Modelos de dados, modelos de perda e repositório de campanhas."""

from .models import CampaignConfig, Dataset, LinkClass, ModelFamily, PathLossModel
from .repository import CampaignRepository

__all__ = ['CampaignConfig', 'Dataset', 'LinkClass', 'ModelFamily', 'PathLossModel', 'CampaignRepository']
