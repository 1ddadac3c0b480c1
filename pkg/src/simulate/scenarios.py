#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Simulated three-level hierarchies: structural bottoms (scenario one) plus smoothing noise (scenario two)
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from src.core.errors import ConfigurationError
from src.hierarchy.structure import Hierarchy, build_from_edges

logger = logging.getLogger(__name__)

SIMULATION_EDGES = (
    ("Total", "A"), ("Total", "B"),
    ("A", "AA"), ("A", "AB"),
    ("B", "BA"), ("B", "BB"),
)
SCENARIOS = ("one", "two")
BOTTOM_COUNT = 4

# contemporaneous covariance of the bottom-level ARMA innovations
DEFAULT_SIGMA1 = np.array([
    [3.0, -2.0, 0.0, 0.0],
    [-2.0, 3.0, 0.0, 0.0],
    [0.0, 0.0, 3.0, -1.0],
    [0.0, 0.0, -1.0, 3.0],
])

# scenario two: signs of (v_t, w_t) added to AA, AB, BA, BB
SCENARIO2_V_SIGNS = np.array([-1.0, 1.0, -1.0, 1.0])
SCENARIO2_OMEGA_SIGNS = np.array([-0.5, -0.5, 0.5, -0.5])


def simulation_hierarchy() -> Hierarchy:
    """Total -> (A, B) -> (AA, AB, BA, BB)"""
    return build_from_edges(SIMULATION_EDGES)


@dataclass
class SimulationConfig:
    """Parameters of the simulated hierarchies and the replicated experiment"""

    scenario: str = "one"
    t_total: int = 324
    horizon: int = 24
    season_length: int = 12
    sigma_e2: float = 2.0
    sigma_eps2: float = 0.007
    sigma_omega2: float = 7.0
    sigma0: np.ndarray = field(default_factory=lambda: np.eye(BOTTOM_COUNT))
    sigma1: np.ndarray = field(default_factory=lambda: DEFAULT_SIGMA1.copy())
    arma_coef_range: Tuple[float, float] = (0.5, 0.7)
    scenario2_v_var: float = 10.0
    scenario2_omega_var: float = 9.0
    replications: int = 100
    seed: int = 2022
    burn_in: int = 200
    workers: int = 1

    def validate(self):
        """Raise ConfigurationError for any out-of-range setting"""
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"Unknown scenario: {self.scenario} (expected one of {', '.join(SCENARIOS)})")
        for name in ("sigma_e2", "sigma_eps2", "sigma_omega2", "scenario2_v_var", "scenario2_omega_var"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.season_length < 2:
            raise ConfigurationError(f"season_length must be at least 2, got {self.season_length}")
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.t_total <= self.horizon + 2 * self.season_length:
            raise ConfigurationError(
                f"t_total={self.t_total} must exceed horizon + 2*season_length = "
                f"{self.horizon + 2 * self.season_length}")
        if self.replications < 1:
            raise ConfigurationError(f"replications must be positive, got {self.replications}")
        if self.burn_in < 0 or self.workers < 1:
            raise ConfigurationError("burn_in must be non-negative and workers positive")
        low, high = self.arma_coef_range
        if not 0.0 <= low <= high < 1.0:
            raise ConfigurationError(f"Invalid ARMA coefficient range {self.arma_coef_range}")
        for name in ("sigma0", "sigma1"):
            matrix = np.asarray(getattr(self, name), dtype=float)
            if matrix.shape != (BOTTOM_COUNT, BOTTOM_COUNT) or not np.allclose(matrix, matrix.T):
                raise ConfigurationError(f"{name} must be a symmetric {BOTTOM_COUNT}x{BOTTOM_COUNT} matrix")
            if np.linalg.eigvalsh(matrix)[0] < -1e-12:
                raise ConfigurationError(f"{name} is not positive semi-definite")


@dataclass
class BottomComponents:
    """Bottom-level series and the components they were built from, each 4 x T"""

    trend: np.ndarray
    seasonal: np.ndarray
    noise: np.ndarray
    innovations: np.ndarray
    ar_orders: np.ndarray
    ma_orders: np.ndarray

    @property
    def bottoms(self) -> np.ndarray:
        return self.trend + self.seasonal + self.noise


def _gaussian(rng: np.random.Generator, cov: np.ndarray, size: int) -> np.ndarray:
    """size x d draws from N(0, cov); cov may be singular"""
    cov = np.asarray(cov, dtype=float)
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        values, vectors = np.linalg.eigh(cov)
        factor = vectors * np.sqrt(np.clip(values, 0.0, None))
    return rng.standard_normal((size, cov.shape[0])) @ factor.T


def simulate_bottom(cfg: SimulationConfig, rng: np.random.Generator) -> BottomComponents:
    """
    Structural bottom-level series: local linear trend, seasonal and ARMA noise

    Draw order is fixed (initial states, ARMA orders and coefficients,
    trend and seasonal disturbances, ARMA innovations) so a seed fully
    determines the output.
    """
    cfg.validate()
    t_total, season = cfg.t_total, cfg.season_length
    d = BOTTOM_COUNT

    mu0 = _gaussian(rng, cfg.sigma0, 1)[0]
    slope0 = _gaussian(rng, cfg.sigma0, 1)[0]
    seasonal0 = _gaussian(rng, cfg.sigma0, season)

    ar_orders = rng.integers(0, 2, size=d)
    ma_orders = rng.integers(0, 2, size=d)
    low, high = cfg.arma_coef_range
    phi = rng.uniform(low, high, size=d) * ar_orders
    theta = rng.uniform(low, high, size=d) * ma_orders

    e = rng.standard_normal((t_total, d)) * np.sqrt(cfg.sigma_e2)
    eps = rng.standard_normal((t_total, d)) * np.sqrt(cfg.sigma_eps2)
    omega = rng.standard_normal((t_total, d)) * np.sqrt(cfg.sigma_omega2)

    slope = slope0 + np.cumsum(eps, axis=0)
    trend = mu0 + np.cumsum(slope + e, axis=0)

    seasonal = np.vstack([seasonal0, np.zeros((t_total, d))])
    for t in range(season, season + t_total):
        seasonal[t] = -seasonal[t - season + 1:t].sum(axis=0) + omega[t - season]
    seasonal = seasonal[season:]

    length = cfg.burn_in + t_total
    innovations = _gaussian(rng, cfg.sigma1, length)
    noise = np.zeros((length, d))
    noise[0] = innovations[0]
    for t in range(1, length):
        noise[t] = phi * noise[t - 1] + innovations[t] + theta * innovations[t - 1]

    logger.debug(f"Simulated bottoms with AR orders {ar_orders.tolist()}, MA orders {ma_orders.tolist()}")
    return BottomComponents(
        trend=trend.T,
        seasonal=seasonal.T,
        noise=noise[cfg.burn_in:].T,
        innovations=innovations[cfg.burn_in:].T,
        ar_orders=ar_orders,
        ma_orders=ma_orders,
    )


def aggregate_bottoms(bottoms: np.ndarray) -> np.ndarray:
    """7 x T panel ordered Total, A, B, AA, AB, BA, BB"""
    aa, ab, ba, bb = bottoms
    a = aa + ab
    b = ba + bb
    return np.vstack([a + b, a, b, aa, ab, ba, bb])


def generate_scenario1(cfg: SimulationConfig, rng: np.random.Generator) -> np.ndarray:
    return aggregate_bottoms(simulate_bottom(cfg, rng).bottoms)


def scenario2_noise(cfg: SimulationConfig, rng: np.random.Generator) -> np.ndarray:
    """4 x T signed combination of the v and w white noise added to the bottoms"""
    v = rng.standard_normal(cfg.t_total) * np.sqrt(cfg.scenario2_v_var)
    omega = rng.standard_normal(cfg.t_total) * np.sqrt(cfg.scenario2_omega_var)
    return np.outer(SCENARIO2_V_SIGNS, v) + np.outer(SCENARIO2_OMEGA_SIGNS, omega)


def generate_scenario2(cfg: SimulationConfig, rng: np.random.Generator) -> np.ndarray:
    """Scenario one bottoms made noisier, with the noise smoothing out in aggregates"""
    z = simulate_bottom(cfg, rng).bottoms
    return aggregate_bottoms(z + scenario2_noise(cfg, rng))


def generate(cfg: SimulationConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.scenario == "two":
        return generate_scenario2(cfg, rng)
    return generate_scenario1(cfg, rng)
