"""Shared builders for randomized test instances.

Instances come in two flavours: abstract (indexed latent values, no
boxes, suitable for the zero-one losses) and geometric (every latent
value carries a box, suitable for the overlap loss as well).  All
randomness flows through an explicit seed so failures replay exactly.
"""

from __future__ import annotations

import numpy as np

from dissim import Dataset, LatentValue, SampleRecord


def make_sample(
    rng: np.random.Generator,
    sample_id: str,
    num_labels: int,
    num_latents: int,
    d_w: int,
    d_theta: int,
    geometric: bool = False,
    grid: int = 8,
    with_truth: bool = True,
) -> SampleRecord:
    if geometric:
        side = max(2, grid // 2)
        latents = []
        for _ in range(num_latents):
            x0 = int(rng.integers(0, grid - side + 1))
            y0 = int(rng.integers(0, grid - side + 1))
            latents.append(LatentValue(len(latents), (x0, y0, x0 + side, y0 + side)))
        latent_space = tuple(latents)
    else:
        latent_space = tuple(LatentValue(k) for k in range(num_latents))
    return SampleRecord(
        id=sample_id,
        truth_label=int(rng.integers(0, num_labels)),
        latent_space=latent_space,
        psi=rng.standard_normal((num_labels, num_latents, d_w)),
        phi=rng.standard_normal((num_latents, d_theta)),
        truth_latent=int(rng.integers(0, num_latents)) if with_truth else None,
    )


def make_dataset(
    seed: int,
    n: int = 4,
    num_labels: int = 3,
    num_latents: int = 4,
    d_w: int = 5,
    d_theta: int = 3,
    geometric: bool = False,
    uniform_shapes: bool = True,
) -> Dataset:
    """Random dataset; set uniform_shapes=False to vary K per sample."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        k = num_latents if uniform_shapes else int(rng.integers(2, num_latents + 1))
        samples.append(
            make_sample(rng, f"s{i}", num_labels, k, d_w, d_theta, geometric)
        )
    return Dataset(num_labels, d_w, d_theta, tuple(samples))


def random_params(rng: np.random.Generator, dataset: Dataset, scale: float = 1.0):
    w = scale * rng.standard_normal(dataset.d_w)
    theta = scale * rng.standard_normal(dataset.d_theta)
    return w, theta


def brute_distribution(rng: np.random.Generator, k: int) -> np.ndarray:
    p = rng.random(k) + 1e-9
    return p / p.sum()
