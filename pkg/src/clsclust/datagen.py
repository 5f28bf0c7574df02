"""Synthetic two-view data with planted spatial and correlation clusters.

``X`` rows come from one of two bivariate normals (the spatial label); each
``Y`` row is one of two linear maps applied to its ``X`` row (the
correlation label), with isotropic Gaussian noise added either to ``Y``
(default) or to ``X`` before the map.  The two labelings are drawn
independently, so spatial clusters and correlation clusters do not coincide.

Random draws use numpy's PCG64 generator seeded with ``SynthConfig.seed``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError


def _default_means():
    return [[-2.0, 0.0], [2.0, 0.0]]


def _default_cov():
    return [[1.0, 0.0], [0.0, 1.0]]


def _default_maps():
    return [[[1.0, 0.5], [0.5, 1.0]], [[1.0, -0.5], [-0.5, -1.0]]]


@dataclass
class SynthConfig:
    n: int = 500
    n_test: int = 500
    spatial_means: list = field(default_factory=_default_means)
    spatial_cov: list = field(default_factory=_default_cov)
    maps: list = field(default_factory=_default_maps)
    noise_sd: float = 0.2
    map_prob: float = 0.5     # probability of the first map
    spatial_prob: float = 0.5  # probability of the first normal
    noise_on: str = "output"   # "output": y = A x + e;  "input": y = A (x + e)
    seed: int = 0

    def validate(self) -> None:
        means = np.asarray(self.spatial_means, dtype=float)
        cov = np.asarray(self.spatial_cov, dtype=float)
        maps = np.asarray(self.maps, dtype=float)
        if self.n < 1 or self.n_test < 0:
            raise ConfigError("n must be positive and n_test non-negative")
        if means.shape != (2, 2):
            raise ConfigError("spatial_means must be two 2-vectors")
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ConfigError("spatial_cov must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ConfigError("spatial_cov must be positive definite")
        if maps.shape != (2, 2, 2):
            raise ConfigError("maps must be two 2x2 matrices")
        if np.array_equal(maps[0], maps[1]) and self.map_prob not in (0.0, 1.0):
            raise ConfigError("the two maps must differ")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be non-negative")
        if self.noise_on not in ("output", "input"):
            raise ConfigError("noise_on must be 'output' or 'input'")
        if not (0.0 <= self.map_prob <= 1.0 and 0.0 <= self.spatial_prob <= 1.0):
            raise ConfigError("probabilities must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthDataset:
    X: np.ndarray
    Y: np.ndarray
    spatial_labels: np.ndarray
    corr_labels: np.ndarray

    def __len__(self) -> int:
        return len(self.X)


def _draw(cfg: SynthConfig, n: int, rng: np.random.Generator) -> SynthDataset:
    means = np.asarray(cfg.spatial_means, dtype=float)
    chol = np.linalg.cholesky(np.asarray(cfg.spatial_cov, dtype=float))
    maps = np.asarray(cfg.maps, dtype=float)
    spatial = (rng.random(n) >= cfg.spatial_prob).astype(np.int64)
    corr = (rng.random(n) >= cfg.map_prob).astype(np.int64)
    X = means[spatial] + rng.standard_normal((n, 2)) @ chol.T
    noise = cfg.noise_sd * rng.standard_normal((n, 2))
    if cfg.noise_on == "input":
        Y = np.einsum("nij,nj->ni", maps[corr], X + noise)
    else:
        Y = np.einsum("nij,nj->ni", maps[corr], X) + noise
    return SynthDataset(X, Y, spatial, corr)


def generate_synthetic(cfg: SynthConfig | None = None) -> SynthDataset:
    """Training sample of ``cfg.n`` rows."""
    return generate_train_test(cfg)[0]


def generate_train_test(cfg: SynthConfig | None = None) -> tuple[SynthDataset, SynthDataset]:
    """Training and test samples from one seeded stream (training drawn first)."""
    cfg = cfg or SynthConfig()
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    train = _draw(cfg, cfg.n, rng)
    test = _draw(cfg, cfg.n_test, rng)
    return train, test
