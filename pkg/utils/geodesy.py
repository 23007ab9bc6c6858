"""Geodésia no elipsoide WGS-84 (Vincenty inverso, com fallback pyproj)."""

import math
from typing import Tuple

import numpy as np
from loguru import logger
from pyproj import Geod

from utils.errors import DomainError

# WGS-84
WGS84_A = 6378137.0
WGS84_F = 1 / 298.257223563
WGS84_B = (1 - WGS84_F) * WGS84_A

_GEOD = Geod(ellps="WGS84")

LatLon = Tuple[float, float]


def _validar(p: LatLon) -> Tuple[float, float]:
    lat, lon = float(p[0]), float(p[1])
    if not (math.isfinite(lat) and math.isfinite(lon)) or abs(lat) > 90.0:
        raise DomainError(f"Coordenada inválida: ({lat}, {lon})")
    return lat, lon


def vincenty_inverse(p1: LatLon, p2: LatLon, max_iter: int = 200, tol: float = 1e-12) -> Tuple[float, bool]:
    """
    Distância pelo problema inverso de Vincenty.

    Args:
        p1: (lat, lon) em graus
        p2: (lat, lon) em graus
        max_iter: Máximo de iterações em lambda
        tol: Tolerância de convergência em lambda (rad)

    Returns:
        Tupla (distância em metros, convergiu)
    """
    lat1, lon1 = _validar(p1)
    lat2, lon2 = _validar(p2)

    f = WGS84_F
    u1 = math.atan((1 - f) * math.tan(math.radians(lat1)))
    u2 = math.atan((1 - f) * math.tan(math.radians(lat2)))
    L = math.radians(lon2 - lon1)
    sin_u1, cos_u1 = math.sin(u1), math.cos(u1)
    sin_u2, cos_u2 = math.sin(u2), math.cos(u2)

    lam = L
    for _ in range(max_iter):
        sin_lam, cos_lam = math.sin(lam), math.cos(lam)
        sin_sigma = math.hypot(cos_u2 * sin_lam, cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lam)
        if sin_sigma == 0.0:
            # pontos coincidentes
            return 0.0, True
        cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lam
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = cos_u1 * cos_u2 * sin_lam / sin_sigma
        cos_sq_alpha = 1 - sin_alpha ** 2
        if cos_sq_alpha != 0.0:
            cos_2sigma_m = cos_sigma - 2 * sin_u1 * sin_u2 / cos_sq_alpha
        else:
            # linha equatorial
            cos_2sigma_m = 0.0
        C = f / 16 * cos_sq_alpha * (4 + f * (4 - 3 * cos_sq_alpha))
        lam_prev = lam
        lam = L + (1 - C) * f * sin_alpha * (
            sigma + C * sin_sigma * (cos_2sigma_m + C * cos_sigma * (-1 + 2 * cos_2sigma_m ** 2))
        )
        if abs(lam - lam_prev) <= tol:
            break
    else:
        return float("nan"), False

    u_sq = cos_sq_alpha * (WGS84_A ** 2 - WGS84_B ** 2) / WGS84_B ** 2
    A = 1 + u_sq / 16384 * (4096 + u_sq * (-768 + u_sq * (320 - 175 * u_sq)))
    B = u_sq / 1024 * (256 + u_sq * (-128 + u_sq * (74 - 47 * u_sq)))
    delta_sigma = B * sin_sigma * (
        cos_2sigma_m + B / 4 * (
            cos_sigma * (-1 + 2 * cos_2sigma_m ** 2)
            - B / 6 * cos_2sigma_m * (-3 + 4 * sin_sigma ** 2) * (-3 + 4 * cos_2sigma_m ** 2)
        )
    )
    return WGS84_B * A * (sigma - delta_sigma), True


def geodesic_distance(p1: LatLon, p2: LatLon) -> float:
    """
    Distância geodésica entre duas coordenadas WGS-84.

    Usa Vincenty; para entradas quase antipodais, onde a iteração não
    converge, recorre ao algoritmo de Karney (pyproj.Geod.inv).

    Args:
        p1: (lat, lon) em graus
        p2: (lat, lon) em graus

    Returns:
        Distância em metros
    """
    distancia, convergiu = vincenty_inverse(p1, p2)
    if convergiu:
        return distancia
    logger.warning(f"Vincenty não convergiu para {p1} -> {p2}; usando Karney (pyproj)")
    _, _, dist = _GEOD.inv(p1[1], p1[0], p2[1], p2[0])
    return float(dist)


def geodesic_distances(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Versão elemento a elemento de geodesic_distance para arrays."""
    lat1, lon1, lat2, lon2 = (np.asarray(a, dtype=float) for a in (lat1, lon1, lat2, lon2))
    return np.array([
        geodesic_distance((a, b), (c, d)) for a, b, c, d in zip(lat1, lon1, lat2, lon2)
    ])


def destination(lat, lon, azimuth_deg, distance_m):
    """
    Problema direto: ponto a uma distância e azimute dados (pyproj).

    Args:
        lat: Latitude(s) de partida em graus
        lon: Longitude(s) de partida em graus
        azimuth_deg: Azimute(s) em graus
        distance_m: Distância(s) em metros

    Returns:
        Tupla (lat, lon) de arrays
    """
    lat, lon, az, dist = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (lat, lon, azimuth_deg, distance_m))
    )
    lon2, lat2, _ = _GEOD.fwd(lon.copy(), lat.copy(), az.copy(), dist.copy())
    return np.asarray(lat2, dtype=float), np.asarray(lon2, dtype=float)
