"""Synthetic data generators.

The subspace protocol plants points on an embedded nested-Grassmann
submanifold and perturbs each geodesically by an exact distance sigma along
a random unit-norm horizontal direction. A labeled two-class planar-shape
generator backs the supervised pipeline where real landmark data is absent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .geometry import (
    GrassmannPoint,
    exp_map,
    orthonormalize,
    sample_stiefel_uniform,
    tangent_project,
)
from .nested import NestedMap
from .shape import KAds


@dataclass
class SynthConfig:
    """Parameters of the planted-subspace protocol."""

    N: int
    n: int
    m: int
    p: int
    sigma: float
    b_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.p <= self.m < self.n):
            raise ShapeError(f"need p <= m < n, got (n, m, p) = {(self.n, self.m, self.p)}")
        if self.N < 1:
            raise ShapeError("N must be at least 1")
        if self.sigma < 0:
            raise ShapeError("sigma must be nonnegative")


@dataclass
class SyntheticData:
    """Generated dataset plus the planting map and coordinates."""

    points: list[GrassmannPoint]
    map: NestedMap
    planted: list[GrassmannPoint]  # the low-dimensional coordinates Z_i in Gr(p, m)


def generate(config: SynthConfig) -> SyntheticData:
    """Run the planted-subspace protocol; deterministic per seed.

    Draws A uniformly on St(m, n), B-tilde with i.i.d. N(0, b_std) entries,
    and Z_i uniformly on St(p, m); plants X-tilde_i = span(A Z_i + (I - A A^H) B)
    and emits X_i = Exp(X-tilde_i, sigma U_i) with U_i a unit-Frobenius-norm
    random horizontal tangent.
    """
    rng = np.random.default_rng(config.seed)
    a = sample_stiefel_uniform(config.n, config.m, rng=rng).basis
    b_tilde = rng.normal(0.0, config.b_std, size=(config.n, config.p))
    nmap = NestedMap.from_unprojected(a, b_tilde)

    points: list[GrassmannPoint] = []
    planted: list[GrassmannPoint] = []
    for _ in range(config.N):
        z = sample_stiefel_uniform(config.m, config.p, rng=rng)
        planted.append(z)
        base = orthonormalize(a @ z.basis + nmap.B)
        if config.sigma == 0.0:
            points.append(base)
            continue
        direction = tangent_project(base, rng.standard_normal((config.n, config.p)))
        unit = direction.mat / np.linalg.norm(direction.mat)
        points.append(exp_map(base, tangent_project(base, config.sigma * unit)))
    return SyntheticData(points, nmap, planted)


def two_class_shapes(
    n_shapes: int,
    k: int,
    *,
    rng: np.random.Generator,
    deform: float = 0.25,
    nuisance: float = 0.12,
    n_modes: int = 30,
    noise: float = 0.003,
) -> tuple[list[KAds], np.ndarray]:
    """Labeled two-class boundary shapes with a planted class deformation.

    Every shape is a unit circle boundary perturbed by ``n_modes`` random
    radial harmonics of amplitude ``nuisance`` (shared nuisance variation
    that dominates raw nearest-neighbor distances); class 1 additionally
    carries a fixed fourth-harmonic bump of magnitude ``deform``. Each shape
    receives a random similarity transform and landmark noise. Landmarks are
    corresponded by boundary parameter.
    """
    if n_shapes < 2:
        raise ShapeError("need at least two shapes")
    if k <= 2:
        raise ShapeError("need k > 2 landmarks")
    theta = 2.0 * np.pi * np.arange(k) / k
    harmonics = [h for h in range(2, n_modes + 4) if h != 4][:n_modes]
    shapes: list[KAds] = []
    labels = np.empty(n_shapes, dtype=int)
    for i in range(n_shapes):
        label = i % 2
        labels[i] = label
        radius = np.ones(k)
        for h in harmonics:
            radius += rng.normal(0.0, nuisance) * np.cos(h * theta + rng.uniform(0.0, 2.0 * np.pi))
        if label == 1:
            radius = radius + deform * np.cos(4.0 * theta)
        pts = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
        pts += rng.normal(0.0, noise, size=pts.shape)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        scale = rng.uniform(0.5, 2.0)
        shift = rng.uniform(-5.0, 5.0, size=2)
        shapes.append(KAds(scale * pts @ rot.T + shift))
    return shapes, labels
