"""Seeded synthesis of the sparse linear model on an AR(1) Gaussian design.

Per-machine data are drawn from independent, reproducible streams derived by
hashing (base_seed, stream_tag, replication, machine) through NumPy's
SeedSequence, so shards can be generated in any order, in parallel, or
re-generated bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# Stream tags keep design, coefficient and noise draws independent.
TAG_DESIGN = 1
TAG_THETA = 2
TAG_NOISE = 3


@dataclass(frozen=True)
class ProblemSpec:
    """Full generative configuration of one distributed regression problem.

    ``sigma`` is either an explicit noise level or the string ``"from_r"``,
    meaning sigma = 1/sqrt(r) so that the planted signal strength is held
    fixed while the SNR parameter r varies.
    """

    d: int
    K: int
    M: int
    n: int
    r: float
    corr_decay: float = 0.5
    sigma: float | str = "from_r"
    base_seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not 1 <= self.K < self.d:
            raise ValueError("K must satisfy 1 <= K < d")
        if self.M < 1 or self.n < 1:
            raise ValueError("M and n must be positive")
        if not 0 < self.r <= 1:
            raise ValueError("r must lie in (0, 1]")
        if not 0 <= self.corr_decay < 1:
            raise ValueError("corr_decay must lie in [0, 1)")
        if isinstance(self.sigma, str):
            if self.sigma != "from_r":
                raise ValueError("sigma must be a positive number or 'from_r'")
        elif self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.base_seed < 0:
            raise ValueError("base_seed must be a nonnegative integer")

    def sigma_value(self, r: float | None = None) -> float:
        """Resolve the noise level, honoring the 'from_r' convention."""
        if isinstance(self.sigma, str):
            return 1.0 / math.sqrt(self.r if r is None else r)
        return float(self.sigma)

    def with_(self, **kwargs) -> "ProblemSpec":
        return replace(self, **kwargs)


@dataclass
class DataShard:
    """One machine's design matrix and (optionally filled) response."""

    machine_id: int
    X: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        if self.y is not None and self.y.shape[0] != self.X.shape[0]:
            raise ValueError("X and y row counts differ")


@dataclass
class GroundTruth:
    """Planted coefficient vector and its calibration constants."""

    theta_star: np.ndarray
    support: np.ndarray
    theta_min: float
    c_omega: float | None = None


def stream(base_seed: int, tag: int, *keys: int) -> np.random.Generator:
    """Independent generator for (base_seed, tag, *keys)."""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(tag), *map(int, keys)]))


def ar1_cholesky(d: int, corr_decay: float) -> np.ndarray:
    """Closed-form lower Cholesky factor of Sigma_ij = corr_decay^|i-j|.

    Row i is (s^i, s^{i-1} q, ..., s q, q, 0, ...) with q = sqrt(1 - s^2),
    the coefficients of the stationary AR(1) recursion.
    """
    if d < 1:
        raise ValueError("d must be positive")
    if not 0 <= corr_decay < 1:
        raise ValueError("corr_decay must lie in [0, 1)")
    s = float(corr_decay)
    q = math.sqrt(1.0 - s * s)
    L = np.zeros((d, d))
    powers = s ** np.arange(d)
    for i in range(d):
        L[i, 0] = powers[i]
        if i >= 1:
            # L[i, j] = q * s^(i - j) for 1 <= j <= i
            L[i, 1 : i + 1] = q * powers[:i][::-1]
    return L


def _ar1_rows(rng: np.random.Generator, n: int, d: int, s: float) -> np.ndarray:
    """n i.i.d. N(0, Sigma) rows via the AR(1) recursion (O(n d))."""
    Z = rng.standard_normal((n, d))
    if s == 0.0:
        return Z
    X = np.empty((n, d))
    q = math.sqrt(1.0 - s * s)
    X[:, 0] = Z[:, 0]
    for j in range(1, d):
        X[:, j] = s * X[:, j - 1] + q * Z[:, j]
    return X


def sample_shards(spec: ProblemSpec, rep: int = 0, n: int | None = None) -> list[DataShard]:
    """Draw the M design matrices; responses are filled separately.

    ``rep`` enters the seed derivation so non-fixed-design experiments can
    redraw designs per replication; the default 0 is the fixed-design stream.
    """
    n = spec.n if n is None else n
    shards = []
    for m in range(spec.M):
        rng = stream(spec.base_seed, TAG_DESIGN, rep, m)
        X = _ar1_rows(rng, n, spec.d, spec.corr_decay)
        shards.append(DataShard(machine_id=m, X=X))
    return shards


def theta_min_from_snr(d: int, sigma: float, r: float, n: int, c_omega: float) -> float:
    """Minimum planted magnitude for SNR parameter r:
    sigma * sqrt(2 * (c_omega / n) * r * ln d)."""
    if min(sigma, r, n, c_omega) <= 0 or d < 2:
        raise ValueError("all arguments must be positive, d >= 2")
    return sigma * math.sqrt(2.0 * (c_omega / n) * r * math.log(d))


def make_theta_star(
    spec: ProblemSpec, theta_min: float, rng: np.random.Generator | None = None
) -> GroundTruth:
    """Plant K nonzeros: uniform support, equally spaced magnitudes in
    [theta_min, 2*theta_min] assigned in random order, Rademacher signs."""
    if theta_min <= 0:
        raise ValueError("theta_min must be positive")
    if rng is None:
        rng = stream(spec.base_seed, TAG_THETA)
    d, K = spec.d, spec.K
    support = np.sort(rng.choice(d, size=K, replace=False))
    if K == 1:
        mags = np.array([theta_min])
    else:
        mags = theta_min * (1.0 + np.arange(K) / (K - 1))
    rng.shuffle(mags)
    signs = rng.choice([-1.0, 1.0], size=K)
    theta = np.zeros(d)
    theta[support] = signs * mags
    return GroundTruth(theta_star=theta, support=support, theta_min=float(theta_min))


def sample_responses(
    shards: list[DataShard],
    theta_star: np.ndarray,
    sigma: float,
    base_seed: int,
    rep: int = 0,
) -> list[DataShard]:
    """y = X theta* + w with w ~ N(0, sigma^2), one stream per (rep, machine)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    out = []
    for shard in shards:
        rng = stream(base_seed, TAG_NOISE, rep, shard.machine_id)
        w = rng.standard_normal(shard.X.shape[0])
        y = shard.X @ theta_star + sigma * w
        out.append(DataShard(machine_id=shard.machine_id, X=shard.X, y=y))
    return out


def compute_c_omega(sandwich_diags) -> float:
    """Largest per-coordinate variance scale over all machines.

    Accepts an iterable of length-d arrays (one per machine) of the diagonal
    of Omega_hat Sigma_hat Omega_hat'.
    """
    diags = [np.asarray(v, dtype=np.float64) for v in sandwich_diags]
    if not diags:
        raise ValueError("no machines")
    return float(max(v.max() for v in diags))
