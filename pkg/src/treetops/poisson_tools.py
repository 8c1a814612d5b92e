"""Chen-Stein distance bookkeeping for the extremal point counts.

The number of leaves landing in a fixed window is approximately Poisson; the
total-variation error splits into a self-pair term, a same-branch term, and
the measured contribution of nontrivially correlated pairs. Everything here
is plain bookkeeping: the only statistical input is the pair term estimated
by pair_overlap_census.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .field_model import ModelParams

__all__ = [
    "ChenSteinInput",
    "chen_stein_bound",
    "tv_poisson",
    "avoidance_gap_budget",
]


@dataclass(frozen=True)
class ChenSteinInput:
    """Ingredients of the dependence bound.

    log2_n_configs   log2 of the number of leaves (kept in log form; 2^N
                     overflows a float long before the sizes of interest)
    mu_n             expected number of window hits at this size
    pair_term        mean count of unordered pairs with interior overlap,
                     doubled to the ordered-pair convention of the bound
    pair_term_se     standard error of pair_term (carried for reporting)
    """

    log2_n_configs: float
    mu_n: float
    pair_term: float
    pair_term_se: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.log2_n_configs) or self.log2_n_configs < 0:
            raise ValueError("log2_n_configs must be finite and nonnegative")
        if not (self.mu_n >= 0.0):
            raise ValueError("mu_n must be nonnegative")
        if not (self.pair_term >= 0.0):
            raise ValueError("pair_term must be nonnegative")
        if not (self.pair_term_se >= 0.0):
            raise ValueError("pair_term_se must be nonnegative")


def chen_stein_bound(inp: ChenSteinInput, params: ModelParams) -> float:
    """Total-variation bound: 2^-N mu^2 + 2^-m mu^2 + pair_term.

    The first term covers self pairs (the neighborhood of a leaf includes the
    leaf itself), the second covers pairs sharing all but the last scale, and
    the pair term covers everything with intermediate overlap. ldexp keeps
    the 2^-N scaling exact instead of round-tripping through 2.0**-N.
    """
    n = params.size
    if abs(inp.log2_n_configs - n) > 1e-9:
        raise ValueError(
            f"log2_n_configs = {inp.log2_n_configs} does not match params (N = {n})")
    mu_sq = inp.mu_n * inp.mu_n
    return math.ldexp(mu_sq, -n) + math.ldexp(mu_sq, -params.bits_per_scale) \
        + inp.pair_term


def _chernoff_tail(lam: float, k: int) -> float:
    """Upper bound on P(Poisson(lam) >= k) for k > lam."""
    if lam == 0.0:
        return 0.0
    if k <= lam:
        return 1.0
    # exp(-lam) (e lam / k)^k, evaluated in log space
    return math.exp(-lam + k * (1.0 + math.log(lam) - math.log(k)))


def tv_poisson(lam1: float, lam2: float) -> float:
    """Total-variation distance between Poisson(lam1) and Poisson(lam2).

    Direct half-sum of |pmf differences|, truncated once the Chernoff tail of
    both laws drops below 1e-14; the neglected mass contributes less than
    1e-14 to the distance. pmfs go through log-gamma so large k never touches
    a factorial.
    """
    for lam in (lam1, lam2):
        if not (lam >= 0.0) or not math.isfinite(lam):
            raise ValueError("intensities must be finite and nonnegative")
    if lam1 == lam2:
        return 0.0
    top = max(lam1, lam2)
    k_max = int(top + 10.0 * math.sqrt(top) + 20.0)
    while _chernoff_tail(lam1, k_max) >= 1e-14 or _chernoff_tail(lam2, k_max) >= 1e-14:
        k_max = k_max * 2 + 10
    k = np.arange(k_max + 1)

    def log_pmf(lam):
        if lam == 0.0:
            out = np.full(k.shape, -np.inf)
            out[0] = 0.0
            return out
        return k * math.log(lam) - lam - gammaln(k + 1.0)

    p1 = np.exp(log_pmf(lam1))
    p2 = np.exp(log_pmf(lam2))
    return 0.5 * float(np.abs(p1 - p2).sum())


def avoidance_gap_budget(mu_n: float, mu_limit: float, chen_stein: float) -> float:
    """Error budget for comparing an empirical void frequency to exp(-mu_limit).

    |P(no hits) - exp(-mu_limit)| <= tv(count, Poisson(mu_n))
                                     + tv(Poisson(mu_n), Poisson(mu_limit))
    with the first term bounded by the Chen-Stein output and the second
    computed exactly.
    """
    if not (mu_n >= 0.0 and mu_limit >= 0.0):
        raise ValueError("intensities must be nonnegative")
    if chen_stein < 0.0:
        raise ValueError("chen_stein must be nonnegative")
    return chen_stein + tv_poisson(mu_n, mu_limit)
