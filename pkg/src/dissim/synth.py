"""Synthetic weakly supervised localization benchmark.

Each sample is a G x G grid of d-dimensional cell features.  One candidate
box is planted with the class signature; the rest of the grid carries a
background signature, except that each background cell independently
switches to a random class signature with probability ``clutter`` (decoy
appearance).  Gaussian noise of scale ``noise`` is added to every cell.
Candidate boxes of side ``box_cells`` are enumerated on an integer stride
grid; the latent task is to localize the planted box given only the label.

Signatures are orthonormal (classes plus background), so at zero noise and
zero clutter the block template whose y-th block is the y-th class
signature scores the planted candidate strictly highest: a perfect model
exists and ``template_model`` returns it.

Clutter decisions are drawn unconditionally per cell and thresholded
against ``clutter``, so raising the rate at a fixed seed only switches
cells whose draw falls between the two rates; planted-box features are
bit-identical across rates.

``oracle_objective`` is a deliberately naive re-implementation of the
dissimilarity objective (pure Python loops, its own softmax and argmax)
used to cross-check the vectorized evaluators.  It shares no code with
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .losses import LossFunction
from .model import Dataset, LatentValue, ModelParams, SampleRecord

GroundTruth = dict[str, int]


@dataclass(frozen=True)
class TaskSpec:
    """Generator settings; the defaults give the benchmark used throughout.

    ``boxes`` must be a perfect square whose side fits the stride grid:
    with side m, (grid - box_cells) must be divisible by m - 1 (stride at
    least 1), so candidates tile a regular lattice.  Signatures need
    feature_dim >= num_classes + 1 to be orthonormal with the background.
    """

    num_classes: int = 6
    per_class: int = 45
    grid: int = 8
    boxes: int = 16
    box_cells: int = 5
    feature_dim: int = 8
    clutter: float = 0.3
    noise: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        if self.per_class < 1:
            raise ConfigError(f"per_class must be >= 1, got {self.per_class}")
        if not 0 < self.box_cells <= self.grid:
            raise ConfigError(
                f"box_cells must lie in [1, grid], got {self.box_cells}"
            )
        side = math.isqrt(self.boxes)
        if side * side != self.boxes:
            raise ConfigError(f"boxes must be a perfect square, got {self.boxes}")
        if side > 1:
            span = self.grid - self.box_cells
            if span < side - 1 or span % (side - 1) != 0:
                raise ConfigError(
                    f"no integer stride places {self.boxes} boxes of side "
                    f"{self.box_cells} on a {self.grid}-cell grid"
                )
        if self.feature_dim < self.num_classes + 1:
            raise ConfigError(
                f"feature_dim must be >= num_classes + 1 for orthonormal "
                f"signatures, got {self.feature_dim} < {self.num_classes + 1}"
            )
        if not 0.0 <= self.clutter <= 1.0:
            raise ConfigError(f"clutter must lie in [0, 1], got {self.clutter}")
        if self.noise < 0.0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")

    @property
    def stride(self) -> int:
        side = math.isqrt(self.boxes)
        if side == 1:
            return 1
        return (self.grid - self.box_cells) // (side - 1)

    def candidate_boxes(self) -> list[tuple[int, int, int, int]]:
        """Half-open pixel boxes (x0, y0, x1, y1), one cell = one pixel,
        enumerated row-major over the stride lattice."""
        side = math.isqrt(self.boxes)
        coords = [i * self.stride for i in range(side)]
        return [
            (c, r, c + self.box_cells, r + self.box_cells)
            for r in coords
            for c in coords
        ]


# Distinct entropy stream for signature construction, separate from the
# per-sample spawn tree.
_SIGNATURE_STREAM = 0x516


def _signatures(spec: TaskSpec) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal class signatures plus a background signature."""
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=(spec.seed, _SIGNATURE_STREAM))
    )
    raw = rng.standard_normal((spec.feature_dim, spec.num_classes + 1))
    q, _ = np.linalg.qr(raw)
    basis = q.T
    return basis[: spec.num_classes], basis[spec.num_classes]


def generate(spec: TaskSpec) -> tuple[Dataset, GroundTruth]:
    """Build the benchmark dataset and its ground-truth latent map.

    Bit-reproducible: per-sample streams are spawned from the spec seed,
    and every random quantity (planted position, noise, clutter draws) is
    generated regardless of the rates that gate its use.
    """
    class_sigs, bg_sig = _signatures(spec)
    boxes_px = spec.candidate_boxes()
    latent_space = tuple(
        LatentValue(index=k, box=box) for k, box in enumerate(boxes_px)
    )
    g, d = spec.grid, spec.feature_dim
    c = spec.num_classes
    n = c * spec.per_class
    children = np.random.SeedSequence(entropy=spec.seed).spawn(n)
    samples = []
    truth: GroundTruth = {}
    index = 0
    for label in range(c):
        for j in range(spec.per_class):
            rng = np.random.default_rng(children[index])
            index += 1
            planted = int(rng.integers(spec.boxes))
            cell_noise = rng.standard_normal((g, g, d))
            clutter_draw = rng.random((g, g))
            clutter_class = rng.integers(0, c, size=(g, g))
            cells = np.tile(bg_sig, (g, g, 1))
            clutter_mask = clutter_draw < spec.clutter
            cells[clutter_mask] = class_sigs[clutter_class[clutter_mask]]
            x0, y0, x1, y1 = boxes_px[planted]
            cells[y0:y1, x0:x1] = class_sigs[label]
            cells = cells + spec.noise * cell_noise
            pooled = np.empty((spec.boxes, d))
            for k, (bx0, by0, bx1, by1) in enumerate(boxes_px):
                pooled[k] = cells[by0:by1, bx0:bx1].mean(axis=(0, 1))
            phi = pooled
            psi = np.zeros((c, spec.boxes, c * d))
            for y in range(c):
                psi[y, :, y * d : (y + 1) * d] = pooled
            sample_id = f"c{label}s{j:03d}"
            samples.append(
                SampleRecord(
                    id=sample_id,
                    truth_label=label,
                    latent_space=latent_space,
                    psi=psi,
                    phi=phi,
                    truth_latent=planted,
                )
            )
            truth[sample_id] = planted
    dataset = Dataset(
        num_labels=c, d_w=c * d, d_theta=d, samples=tuple(samples)
    )
    return dataset, truth


def template_model(spec: TaskSpec) -> ModelParams:
    """The analytic block template: block y holds class signature y.

    At zero noise and zero clutter this model predicts the truth label and
    the planted box for every generated sample.
    """
    class_sigs, _ = _signatures(spec)
    return ModelParams(class_sigs.ravel(), np.zeros(spec.feature_dim))


ORACLE_SIZE_LIMIT = 1_000_000


def oracle_objective(
    w: np.ndarray,
    theta: np.ndarray,
    dataset: Dataset,
    loss: LossFunction,
    beta: float,
) -> float:
    """Brute-force dissimilarity objective: mean over samples of the
    expected loss at the score argmax minus beta times the conditional's
    self diversity.  Plain loops and scalar math throughout.

    Refuses instances larger than n * labels * K^2 = 1e6 terms.
    """
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")
    n = len(dataset)
    work = sum(
        dataset.num_labels * s.num_latents * s.num_latents for s in dataset
    )
    if work > ORACLE_SIZE_LIMIT:
        raise InputError(
            f"oracle refuses instances above {ORACLE_SIZE_LIMIT} terms, got {work}"
        )
    w_list = [float(v) for v in np.asarray(w, dtype=np.float64)]
    theta_list = [float(v) for v in np.asarray(theta, dtype=np.float64)]
    total = 0.0
    for sample in dataset:
        K = sample.num_latents
        labels = sample.psi.shape[0]
        truth = sample.truth_label

        activations = []
        for k in range(K):
            acc = 0.0
            for j, tj in enumerate(theta_list):
                acc += tj * float(sample.phi[k, j])
            activations.append(acc)
        peak = max(activations)
        weights = [math.exp(a - peak) for a in activations]
        z = sum(weights)
        probs = [v / z for v in weights]

        best_y, best_k, best_score = 0, 0, None
        for y in range(labels):
            for k in range(K):
                acc = 0.0
                for j, wj in enumerate(w_list):
                    acc += wj * float(sample.psi[y, k, j])
                if best_score is None or acc > best_score:
                    best_y, best_k, best_score = y, k, acc

        exp_loss = 0.0
        for k in range(K):
            exp_loss += probs[k] * loss(truth, k, best_y, best_k, sample)

        self_div = 0.0
        for k1 in range(K):
            for k2 in range(K):
                self_div += probs[k1] * probs[k2] * loss(truth, k1, truth, k2, sample)

        total += exp_loss - beta * self_div
    return total / n
