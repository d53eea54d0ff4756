"""Image-quality metrics and greedy ensemble selection.

The Frechet distance between Gaussian summaries,

    ||mu1 - mu2||^2 + tr(C1 + C2 - 2 (C1 C2)^(1/2)),

is evaluated with the symmetric matrix-root construction
sqrt(sqrt(C1) C2 sqrt(C1)), clamping negative eigenvalues to zero before
rooting, so the result is real and symmetric in its arguments. For
image batches the covariances are 784-dimensional and rank-deficient; a
small diagonal jitter keeps the root stable, and the computation is
carried out in the joint affine span of the two batches (lossless: in
every direction orthogonal to both batches the jittered covariances are
identical epsilon multiples of the identity, whose trace contributions
cancel exactly).

Variation of one image against its batch is the summed squared per-pixel
deviation from the batch-mean image.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import ImageSet, PcaModel, inverse_transform, unscale_features
from .errors import DataError, ValidationError
from .generator import EXACT, generate_features
from .pulses import DEFAULT_LIMITS, PulseLimits
from .sim import C6_DEFAULT
from .training import Learner

IMAGE_FID_JITTER = 1e-6


@dataclass(frozen=True)
class GaussianSummary:
    """Sample mean and (symmetrized) sample covariance of a point cloud."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValidationError(
                f"covariance shape {cov.shape} does not match mean size {mean.size}")
        asym = float(np.abs(cov - cov.T).max()) if cov.size else 0.0
        if asym > 1e-10:
            raise ValidationError(f"covariance asymmetric by {asym:.3g}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", (cov + cov.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.mean.size


def summarize(batch) -> GaussianSummary:
    """Sample mean and covariance (divisor N - 1) of a batch of d-vectors."""
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2:
        raise ValidationError(f"expected an (N, d) batch, got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise ValidationError(f"need at least 2 samples for a covariance, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    return GaussianSummary(mean, cov)


def _sym_sqrt(mat: np.ndarray) -> np.ndarray:
    """Matrix square root of a symmetric PSD matrix, clamping negatives."""
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T


def fid(a: GaussianSummary, b: GaussianSummary, jitter: float = 0.0) -> float:
    """Frechet distance between two Gaussian summaries, >= 0.

    jitter is added to both covariance diagonals before rooting (used for
    rank-deficient image covariances).
    """
    if a.dim != b.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    c1 = a.covariance + jitter * np.eye(a.dim)
    c2 = b.covariance + jitter * np.eye(b.dim)
    root_c1 = _sym_sqrt(c1)
    cross = _sym_sqrt(root_c1 @ c2 @ root_c1)
    delta = a.mean - b.mean
    val = float(delta @ delta + np.trace(c1) + np.trace(c2) - 2.0 * np.trace(cross))
    return max(val, 0.0)


def _project_to_joint_span(x1: np.ndarray, x2: np.ndarray):
    """Rotate both batches into an orthonormal basis of their joint affine span."""
    mu1, mu2 = x1.mean(axis=0), x2.mean(axis=0)
    stacked = np.vstack([x1 - mu1, x2 - mu2, (mu1 - mu2)[None, :]])
    _, svals, vt = np.linalg.svd(stacked, full_matrices=False)
    keep = svals > svals.max() * 1e-12 if svals.size and svals.max() > 0 else svals > 0
    basis = vt[keep]
    origin = mu1
    return (x1 - origin) @ basis.T, (x2 - origin) @ basis.T


def fid_images(real_images, generated_images,
               jitter: float = IMAGE_FID_JITTER) -> float:
    """FID between two image batches on flattened pixels.

    Batches are projected onto their joint affine span first, which
    leaves the jittered FID value unchanged while shrinking the
    eigenproblems from pixel count to batch size.
    """
    r = np.asarray(real_images, dtype=float).reshape(len(real_images), -1)
    g = np.asarray(generated_images, dtype=float).reshape(len(generated_images), -1)
    if r.shape[1] != g.shape[1]:
        raise ValidationError(
            f"pixel dimensions differ: {r.shape[1]} vs {g.shape[1]}")
    if r.shape[0] < 2 or g.shape[0] < 2:
        raise ValidationError("need at least 2 images per batch for FID")
    if r.shape[0] + g.shape[0] + 1 < r.shape[1]:
        r, g = _project_to_joint_span(r, g)
    return fid(summarize(r), summarize(g), jitter=jitter)


def variation_scores(batch) -> np.ndarray:
    """Summed squared deviation of each image from the batch-mean image."""
    arrs = [np.asarray(im, dtype=float) for im in batch]
    if not arrs:
        raise ValidationError("variation needs at least one image")
    shape = arrs[0].shape
    if any(a.shape != shape for a in arrs):
        raise ValidationError("all images in the batch must share one shape")
    stack = np.stack(arrs)
    mu = stack.mean(axis=0)
    return ((mu[None, ...] - stack) ** 2).sum(axis=tuple(range(1, stack.ndim)))


def variation_cdf(scores):
    """Right-continuous empirical CDF as sorted (value, fraction) pairs."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    if s.size == 0:
        raise ValidationError("cannot build a CDF from zero scores")
    values, counts = np.unique(s, return_counts=True)
    fractions = np.cumsum(counts) / s.size
    return list(zip(values.tolist(), fractions.tolist()))


@dataclass(frozen=True)
class Ensemble:
    """Greedily selected learners; inference averages their feature outputs."""

    members: tuple
    validation_fid: float

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValidationError("ensemble must have at least one member")
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                if members[i] == members[j]:
                    raise ValidationError("ensemble members must be distinct")
        object.__setattr__(self, "members", members)


def ensemble_generate(ensemble: Ensemble, seed: float, mode=EXACT,
                      limits: PulseLimits = DEFAULT_LIMITS,
                      c6: float = C6_DEFAULT,
                      steps: int | None = None) -> np.ndarray:
    """Elementwise mean of every member's feature output for one seed."""
    outputs = [generate_features(m.params, seed, mode, limits, c6, steps)
               for m in ensemble.members]
    return np.mean(outputs, axis=0)


@dataclass(frozen=True)
class SelectionResult:
    ensemble: Ensemble
    member_indices: tuple    # positions in the input learner list, in pick order
    fid_trail: tuple         # validation FID after each accepted member
    singleton_fids: tuple    # FID of each input learner alone


def batch_features(learner: Learner, seeds, mode=EXACT,
                   limits: PulseLimits = DEFAULT_LIMITS,
                   c6: float = C6_DEFAULT, steps: int | None = None) -> np.ndarray:
    """(len(seeds), 2^n) feature outputs of one learner."""
    return np.stack([generate_features(learner.params, float(s), mode,
                                       limits, c6, steps) for s in seeds])


def _batch_to_images(feature_batch: np.ndarray, pca: PcaModel) -> np.ndarray:
    weights = unscale_features(pca, feature_batch)
    return inverse_transform(pca, weights)


def greedy_select(learners, val_images: ImageSet, batch_seeds, pca: PcaModel,
                  mode=EXACT, feature_batches=None,
                  jitter: float = IMAGE_FID_JITTER,
                  limits: PulseLimits = DEFAULT_LIMITS,
                  c6: float = C6_DEFAULT,
                  steps: int | None = None) -> SelectionResult:
    """Greedy forward selection of an ensemble by validation FID.

    Seeds the ensemble with the single lowest-FID learner, then keeps
    adding whichever remaining learner most lowers the FID of the
    averaged output, stopping when no addition strictly improves it.
    Ties break toward the earlier learner in the input order.

    feature_batches, when given, must hold each learner's precomputed
    (len(batch_seeds), 2^n) outputs and skips generation.
    """
    learners = list(learners)
    if not learners:
        raise ValidationError("need at least one learner to select from")
    if len(val_images) < 2:
        raise DataError("validation set must hold at least 2 images")
    if feature_batches is None:
        feature_batches = [batch_features(l, batch_seeds, mode, limits, c6, steps)
                           for l in learners]
    batches = np.stack([np.asarray(b, dtype=float) for b in feature_batches])
    if batches.shape[0] != len(learners):
        raise ValidationError(
            f"{batches.shape[0]} feature batches for {len(learners)} learners")
    val_flat = val_images.flat()

    def fid_of(indices) -> float:
        avg = batches[list(indices)].mean(axis=0)
        return fid_images(val_flat, _batch_to_images(avg, pca), jitter=jitter)

    singles = [fid_of([i]) for i in range(len(learners))]
    best = int(np.argmin(singles))
    members = [best]
    val_fid = singles[best]
    trail = [val_fid]
    while True:
        next_learner = None
        for i in range(len(learners)):
            if i in members:
                continue
            trial_fid = fid_of(members + [i])
            if trial_fid < val_fid:
                next_learner = i
                val_fid = trial_fid
        if next_learner is None:
            break
        members.append(next_learner)
        trail.append(val_fid)

    picked = tuple(replace(learners[i], validation_fid=singles[i])
                   for i in members)
    return SelectionResult(Ensemble(picked, val_fid), tuple(members),
                           tuple(trail), tuple(singles))
