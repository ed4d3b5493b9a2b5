"""Synthetic LoRaWAN coverage instances.

Users sit on a regular grid, gateways at uniform random sites.  Each link's
received power comes from the Hata urban path-loss model plus log-normal
shadowing, is mapped to a packet reception rate, and the rates become CIP
contributions through ``a_ij = -ln(1 - rate_ij)``: with independent link
failures, ``sum_i a_ij x_i >= -ln(eps_j)`` is exactly "failure probability at
most ``eps_j``".
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import CIPError, Instance


class NonpositiveDistance(CIPError, ValueError):
    pass


class RateAtOne(CIPError, ValueError):
    pass


class InfeasibleConfig(CIPError, ValueError):
    pass


@dataclass(frozen=True)
class RadioParams:
    frequency_mhz: float = 916.0
    h_mobile: float = 1.5
    h_base: float = 30.0
    p_tx: float = 10.0
    p_min: float = -120.0
    shadowing_sigma: float = 8.0
    rate_mode: str = "logistic"
    rate_width: float = 4.0
    rate_max: float = 0.999
    rate_hi: float = 0.9
    rate_lo: float = 0.0
    min_rate: float = 0.1
    d_min_km: float = 0.01

    def __post_init__(self):
        if self.frequency_mhz <= 0 or self.h_mobile <= 0 or self.h_base <= 0:
            raise ValueError("frequency and antenna heights must be positive")
        if self.shadowing_sigma < 0:
            raise ValueError("shadowing sigma must be nonnegative")
        if self.rate_mode not in ("logistic", "threshold"):
            raise ValueError(f"unknown rate mode {self.rate_mode!r}")
        if not 0 <= self.rate_max < 1:
            raise ValueError("rate_max must lie in [0, 1)")


@dataclass(frozen=True)
class GenConfig:
    grid_rows: int = 20
    grid_cols: int = 20
    spacing_km: float = 0.4
    n_facilities: int = 60
    n_users: int = 40
    facility_margin_km: float = 0.0
    cost_dist: str = "uniform"
    cost_sigma: float = 0.15
    geometric_q: float = 0.5
    seed: int = 0
    max_users: int = 5000
    max_facilities: int = 5000

    def __post_init__(self):
        if self.n_users > self.grid_rows * self.grid_cols:
            raise InfeasibleConfig("more users requested than grid points")
        if self.n_users > self.max_users or self.n_facilities > self.max_facilities:
            raise InfeasibleConfig("instance exceeds configured size caps")
        if not 0 < self.geometric_q <= 1:
            raise InfeasibleConfig("geometric parameter q must lie in (0, 1]")
        if self.cost_dist not in ("uniform", "gaussian"):
            raise InfeasibleConfig(f"unknown cost distribution {self.cost_dist!r}")


# (generator config, radio params) per named profile
PROFILES = {
    "desk": (GenConfig(geometric_q=0.05), RadioParams()),
    # grid, sample and site counts of the full-size study; far beyond the exact oracles
    "paper-shaped": (GenConfig(grid_rows=61, grid_cols=128, spacing_km=0.15, n_facilities=4380,
                               n_users=2000, geometric_q=0.05), RadioParams()),
}


def height_correction(h_mobile: float) -> float:
    """Urban mobile-antenna correction at 916 MHz."""
    return 3.2 * math.log10(11.75 * h_mobile) ** 2 - 4.97


def hata_path_loss(d_km, params: RadioParams = RadioParams(), clamp: bool = True):
    """Hata urban path loss in dB; accepts scalars or arrays of distances in km."""
    d = np.asarray(d_km, dtype=float)
    if clamp:
        d = np.maximum(d, params.d_min_km)
    elif np.any(d <= 0):
        raise NonpositiveDistance("distance must be positive")
    f, hb = params.frequency_mhz, params.h_base
    loss = (69.55 + 26.16 * math.log10(f) - 13.82 * math.log10(hb)
            + (44.9 - 6.55 * math.log10(hb)) * np.log10(d) + height_correction(params.h_mobile))
    return float(loss) if loss.ndim == 0 else loss


def received_power(d_km, params: RadioParams = RadioParams(), shadow_draw=0.0):
    """Link budget in dBm: transmit power minus path loss plus a shadowing draw."""
    return params.p_tx - hata_path_loss(d_km, params) + shadow_draw


def reception_rate(p_rx, params: RadioParams = RadioParams()):
    p = np.asarray(p_rx, dtype=float)
    if params.rate_mode == "threshold":
        rate = np.where(p >= params.p_min, params.rate_hi, params.rate_lo)
    else:
        rate = 0.5 * (1.0 + np.tanh((p - params.p_min) / (2.0 * params.rate_width)))
    rate = np.minimum(rate, params.rate_max)
    return float(rate) if rate.ndim == 0 else rate


def reliability_to_cip(rates, max_failure):
    """Contributions ``-ln(1 - rate)`` and requirements ``-ln(eps)``."""
    rho = np.asarray(rates, dtype=float)
    eps = np.asarray(max_failure, dtype=float)
    if np.any(rho >= 1):
        raise RateAtOne("a reception rate of 1 gives infinite contribution")
    if np.any(rho < 0):
        raise ValueError("reception rates must be nonnegative")
    if np.any((eps <= 0) | (eps >= 1)):
        raise ValueError("failure targets must lie in (0, 1)")
    return -np.log1p(-rho), -np.log(eps)


def generate_instance(cfg: GenConfig = GenConfig(), params: RadioParams = RadioParams()) -> Instance:
    """Draw one coverage instance; fully determined by ``cfg.seed``.

    Requirements are each user's all-gateways coverage divided by an
    independent ``Geometric(q) >= 1`` draw, so every instance is feasible.
    Rates below ``params.min_rate`` are zeroed except on each user's best link.
    """
    root = np.random.SeedSequence(cfg.seed)
    s_users, s_sites, s_costs, s_req, s_shadow = root.spawn(5)
    gy, gx = np.meshgrid(np.arange(cfg.grid_rows), np.arange(cfg.grid_cols), indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()]) * cfg.spacing_km
    pick = np.random.default_rng(s_users).choice(len(grid), size=cfg.n_users, replace=False)
    users = grid[np.sort(pick)]
    lo = -cfg.facility_margin_km
    hi_x = (cfg.grid_cols - 1) * cfg.spacing_km + cfg.facility_margin_km
    hi_y = (cfg.grid_rows - 1) * cfg.spacing_km + cfg.facility_margin_km
    site_rng = np.random.default_rng(s_sites)
    sites = np.column_stack([site_rng.uniform(lo, hi_x, cfg.n_facilities),
                             site_rng.uniform(lo, hi_y, cfg.n_facilities)])
    d = np.linalg.norm(sites[:, None, :] - users[None, :, :], axis=2)
    # one child stream per user column keeps draws independent of evaluation order
    shadow = np.empty_like(d)
    for j, seq in enumerate(s_shadow.spawn(cfg.n_users)):
        shadow[:, j] = np.random.default_rng(seq).normal(0.0, params.shadowing_sigma, cfg.n_facilities)
    rates = reception_rate(received_power(d, params, shadow), params)
    rates = np.atleast_2d(rates)
    best = rates.argmax(axis=0)
    keep = rates >= params.min_rate
    keep[best, np.arange(cfg.n_users)] = True
    rates = np.where(keep, rates, 0.0)
    if np.any(rates.max(axis=0) <= 0):
        raise InfeasibleConfig("some user has no gateway with positive reception rate")
    contrib, _ = reliability_to_cip(rates, np.full(cfg.n_users, 0.5))
    g = np.random.default_rng(s_req).geometric(cfg.geometric_q, cfg.n_users)
    requirements = contrib.sum(axis=0) / g
    cost_rng = np.random.default_rng(s_costs)
    if cfg.cost_dist == "uniform":
        costs = cost_rng.uniform(0.0, 1.0, cfg.n_facilities)
    else:
        costs = np.clip(cost_rng.normal(0.5, cfg.cost_sigma, cfg.n_facilities), 0.0, None)
    meta = {"generator": "lorawan", "seed": cfg.seed, "config": asdict(cfg), "radio": asdict(params),
            "geometric_draws": g.tolist()}
    return Instance(costs, requirements, contrib, meta)
