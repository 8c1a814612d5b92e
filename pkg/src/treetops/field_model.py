"""Closed-form quantities of the hierarchical Gaussian energy field.

The field lives on the 2^N leaves of a K-level tree with b = 2^m children per
node, N = K*m. Each edge at depth j carries an independent centered Gaussian
increment of variance m; a leaf energy is the sum of its K path increments,
so var = N for every leaf and cov = overlap * m for a pair of leaves agreeing
on their first `overlap` levels.

K = 1 is the independent-energies endpoint (2^N iid Gaussians); m = 1 is the
fully hierarchical binary cascade endpoint. The interpolation exponent
alpha = ln K / ln N is always derived from the integer pair (K, m), never
supplied, which makes K = N^alpha and m = N^(1-alpha) exact by construction.

Everything here is a pure function; evaluation order inside each formula is
fixed so example values reproduce bitwise across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ModelParams",
    "Interval",
    "Barrier",
    "beta_c",
    "centering",
    "intensity",
    "overlap",
    "covariance",
    "barrier_value",
    "barrier_profile",
    "default_gamma",
]

_BETA_C = math.sqrt(2.0 * math.log(2.0))


def beta_c() -> float:
    """Critical inverse temperature sqrt(2 ln 2) = 1.1774100225154747..."""
    return _BETA_C


@dataclass(frozen=True)
class ModelParams:
    """Field geometry: K scales, m bits per scale.

    scales          K, number of tree levels (N^alpha)
    bits_per_scale  m, log2 of the branching factor (N^(1-alpha))
    """

    scales: int
    bits_per_scale: int

    def __post_init__(self):
        if not isinstance(self.scales, int) or isinstance(self.scales, bool):
            raise ValueError("scales must be an integer")
        if not isinstance(self.bits_per_scale, int) or isinstance(self.bits_per_scale, bool):
            raise ValueError("bits_per_scale must be an integer")
        if self.scales < 1:
            raise ValueError(f"scales must be >= 1, got {self.scales}")
        if self.bits_per_scale < 1:
            raise ValueError(f"bits_per_scale must be >= 1, got {self.bits_per_scale}")

    @property
    def size(self) -> int:
        """N = K*m, total number of bits."""
        return self.scales * self.bits_per_scale

    @property
    def alpha(self) -> float:
        """ln K / ln N, with the K = 1 convention alpha = 0."""
        if self.scales == 1:
            return 0.0
        return math.log(self.scales) / math.log(self.size)

    @property
    def branching(self) -> int:
        """b = 2^m children per node (exact integer)."""
        return 1 << self.bits_per_scale

    @property
    def increment_variance(self) -> float:
        """Variance m of each per-scale increment; K of them sum to N."""
        return float(self.bits_per_scale)

    @property
    def leaves(self) -> int:
        """b^K = 2^N configurations (exact integer)."""
        return 1 << self.size


@dataclass(frozen=True)
class Interval:
    """A window [lower, upper] on the recentered-energy axis.

    lower must be finite (an infinite left end carries infinite intensity
    mass); upper may be +inf. Degenerate and reversed intervals are rejected.
    """

    lower: float
    upper: float

    def __post_init__(self):
        lo = float(self.lower)
        up = float(self.upper)
        if math.isnan(lo) or math.isnan(up):
            raise ValueError("interval ends must not be NaN")
        if math.isinf(lo):
            raise ValueError("interval lower end must be finite")
        if not lo < up:
            raise ValueError(f"need lower < upper, got [{lo}, {up}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def is_compact(self) -> bool:
        return math.isfinite(self.upper)


def centering(params: ModelParams) -> float:
    """Centering level a_N = beta_c*N - (1+2*alpha)/(2*beta_c) * ln N.

    The leading term is the maximal-energy slope; the log correction
    interpolates between the independent-field constant 1 (alpha = 0) and the
    cascade constant 3 (alpha = 1).
    """
    n = params.size
    if n < 2:
        raise ValueError("centering needs N >= 2 (log correction degenerate at N = 1)")
    # fixed order: coefficient first, then the two terms; do not refactor,
    # frozen test values depend on this exact sequence of roundings
    coeff = (1.0 + 2.0 * params.alpha) / (2.0 * _BETA_C)
    return _BETA_C * n - coeff * math.log(n)


def intensity(window: Interval) -> float:
    """Limit intensity mass integral of exp(-beta_c x)/sqrt(2 pi) over the window."""
    upper_term = 0.0 if math.isinf(window.upper) else math.exp(-_BETA_C * window.upper)
    return (math.exp(-_BETA_C * window.lower) - upper_term) / (_BETA_C * math.sqrt(2.0 * math.pi))


def _check_labels(sigma, params: ModelParams) -> None:
    if len(sigma) != params.scales:
        raise ValueError(f"label vector has length {len(sigma)}, expected K = {params.scales}")
    b = params.branching
    for s in sigma:
        if not 1 <= s <= b:
            raise ValueError(f"label entry {s} outside 1..{b}")


def overlap(sigma, tau, params: ModelParams) -> int:
    """Length of the longest common label prefix of two configurations."""
    if len(sigma) != len(tau):
        raise ValueError("label vectors differ in length")
    _check_labels(sigma, params)
    _check_labels(tau, params)
    j = 0
    for a, c in zip(sigma, tau):
        if a != c:
            break
        j += 1
    return j


def covariance(sigma, tau, params: ModelParams) -> float:
    """overlap * m; equals N when sigma == tau, 0 for distinct first labels."""
    return overlap(sigma, tau, params) * params.increment_variance


def default_gamma(params: ModelParams) -> float:
    """Midpoint (1-alpha)/4 of the admissible shaving range (0, (1-alpha)/2).

    The choice is not canonical, any exponent strictly inside the range works;
    the midpoint keeps both the survival and the pair-killing effects visible
    at desk scale. Undefined (returns 0.0) at alpha = 1 where the range is empty.
    """
    return (1.0 - params.alpha) / 4.0


@dataclass(frozen=True)
class Barrier:
    """A scale-indexed threshold profile over k = 0..K.

    kind "U":      beta_c * k * m + ln N, the whole-tree ceiling.
    kind "E":      U lowered by N^gamma strictly inside (0 < k < K); endpoints
                   keep the U value. Requires 0 < gamma < (1-alpha)/2.
    kind "custom": U plus a user table of K+1 offsets. Offsets used as a
                   modified-mean barrier must vanish at both endpoints, which
                   is checked at construction unless explicitly waived.
    """

    kind: str
    gamma: float | None = None
    offsets: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("U", "E", "custom"):
            raise ValueError(f"unknown barrier kind {self.kind!r}")
        if self.kind == "custom" and self.offsets is None:
            raise ValueError("custom barrier needs an offset table")

    @classmethod
    def threshold_U(cls) -> "Barrier":
        return cls(kind="U")

    @classmethod
    def threshold_E(cls, gamma: float | None = None) -> "Barrier":
        """gamma = None defers to default_gamma(params) at evaluation time."""
        return cls(kind="E", gamma=gamma)

    @classmethod
    def custom(cls, offsets, require_zero_endpoints: bool = True) -> "Barrier":
        offs = tuple(float(o) for o in offsets)
        if require_zero_endpoints and (offs[0] != 0.0 or offs[-1] != 0.0):
            raise ValueError("custom barrier offsets must vanish at k = 0 and k = K")
        return cls(kind="custom", offsets=offs)


def _resolve_gamma(barrier: Barrier, params: ModelParams) -> float:
    g = barrier.gamma if barrier.gamma is not None else default_gamma(params)
    hi = (1.0 - params.alpha) / 2.0
    if not 0.0 < g < hi:
        raise ValueError(
            f"gamma = {g} outside the open admissible range (0, {hi}) at alpha = {params.alpha}"
        )
    return g


def barrier_value(barrier: Barrier, k: int, params: ModelParams) -> float:
    """Threshold at scale k for the given barrier kind."""
    K = params.scales
    if not 0 <= k <= K:
        raise ValueError(f"scale index {k} outside 0..{K}")
    n = params.size
    u = _BETA_C * k * params.increment_variance + math.log(n)
    if barrier.kind == "U":
        return u
    if barrier.kind == "E":
        g = _resolve_gamma(barrier, params)
        if 0 < k < K:
            return u - float(n) ** g
        return u
    # custom
    if len(barrier.offsets) != K + 1:
        raise ValueError(f"offset table has {len(barrier.offsets)} entries, expected K+1 = {K + 1}")
    return u + barrier.offsets[k]


def barrier_profile(barrier: Barrier, params: ModelParams):
    """All K+1 threshold values as a list, index = scale."""
    return [barrier_value(barrier, k, params) for k in range(params.scales + 1)]
