"""Per-pixel class probabilities from CNN score maps.

The softmax temperature of every superpixel is set from how dominant its
modal label is: ``tau = 1 / spp**2`` where ``spp`` is the modal-label share.
Superpixels that agree perfectly with the labelling keep the plain softmax;
mixed ones get flatter distributions. The argmax never changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidFraction, InvalidParameter


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScoreMap:
    """Unnormalised class scores, shape ``(c, n, m)``."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 3:
            raise InvalidParameter("score map must have shape (c, n, m)")
        if s.shape[0] < 2:
            raise InvalidParameter("score map needs at least two classes")
        if not np.all(np.isfinite(s)):
            raise InvalidParameter("score map contains non-finite scores")
        object.__setattr__(self, "scores", _readonly(s))

    @property
    def classes(self) -> int:
        return self.scores.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape[1], self.scores.shape[2]


@dataclass(frozen=True, eq=False)
class LabelImage:
    labels: np.ndarray
    classes: int

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise InvalidParameter("label image must be 2-D")
        lab = lab.astype(np.int64)
        if lab.size and (lab.min() < 0 or lab.max() >= self.classes):
            raise InvalidParameter(f"labels must lie in [0, {self.classes})")
        object.__setattr__(self, "labels", _readonly(lab))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True, eq=False)
class SuperpixelMap:
    assignment: np.ndarray
    count: int

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if a.ndim != 2:
            raise InvalidParameter("superpixel map must be 2-D")
        a = a.astype(np.int64)
        if a.size:
            present = np.unique(a)
            if present[0] != 0 or present[-1] != self.count - 1 or len(present) != self.count:
                raise InvalidParameter("superpixel identifiers must be dense in [0, K)")
        object.__setattr__(self, "assignment", _readonly(a))

    @property
    def shape(self) -> tuple[int, int]:
        return self.assignment.shape

    @classmethod
    def grid(cls, n: int, m: int, cell: int = 1) -> SuperpixelMap:
        """Regular ``cell`` x ``cell`` tiling; ``cell=1`` gives one pixel per superpixel."""
        if cell < 1:
            raise InvalidParameter("grid cell must be >= 1")
        rows = np.arange(n) // cell
        cols = np.arange(m) // cell
        per_row = (m + cell - 1) // cell
        a = rows[:, None] * per_row + cols[None, :]
        return cls(a, int(a.max()) + 1 if a.size else 0)


@dataclass(frozen=True, eq=False)
class ProbabilityImage:
    """Per-pixel class probabilities, shape ``(c, n, m)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 3:
            raise InvalidParameter("probability image must have shape (c, n, m)")
        object.__setattr__(self, "probs", _readonly(p))

    @property
    def classes(self) -> int:
        return self.probs.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape[1], self.probs.shape[2]


def argmax_labels(scores: ScoreMap) -> LabelImage:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return LabelImage(np.argmax(scores.scores, axis=0), scores.classes)


def predominant_fraction(labels: LabelImage, sp: SuperpixelMap) -> np.ndarray:
    """Share of each superpixel's pixels that carry its modal label (length K)."""
    if labels.shape != sp.shape:
        raise DimensionMismatch(f"label image {labels.shape} vs superpixel map {sp.shape}")
    k = sp.count
    c = labels.classes
    flat = sp.assignment.ravel() * c + labels.labels.ravel()
    hist = np.bincount(flat, minlength=k * c).reshape(k, c)
    sizes = hist.sum(axis=1)
    if np.any(sizes == 0):
        raise InvalidParameter("superpixel map has empty superpixels")
    return hist.max(axis=1) / sizes


def temperature_for(spp: float | np.ndarray) -> float | np.ndarray:
    """Softmax temperature ``1 / spp**2``."""
    a = np.asarray(spp, dtype=np.float64)
    if np.any(~(a > 0.0)) or np.any(a > 1.0):
        raise InvalidFraction(f"predominant fraction must lie in (0, 1], got {spp!r}")
    tau = 1.0 / (a * a)
    return float(tau) if tau.ndim == 0 else tau


def softmax(scores: np.ndarray, tau: float | np.ndarray = 1.0, axis: int = 0) -> np.ndarray:
    """Max-subtracted softmax of ``scores / tau`` along ``axis``."""
    z = np.asarray(scores, dtype=np.float64) / tau
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def temperature_softmax(
    scores: ScoreMap, sp: SuperpixelMap, fractions: np.ndarray
) -> ProbabilityImage:
    if scores.shape != sp.shape:
        raise DimensionMismatch(f"score map {scores.shape} vs superpixel map {sp.shape}")
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.shape != (sp.count,):
        raise DimensionMismatch(f"expected {sp.count} fractions, got {fractions.shape}")
    tau_k = np.asarray(temperature_for(fractions), dtype=np.float64).reshape(-1)
    tau = tau_k[sp.assignment][None, :, :]
    return ProbabilityImage(softmax(scores.scores, tau, axis=0))


def probabilize(scores: ScoreMap, sp: SuperpixelMap) -> ProbabilityImage:
    """argmax labels -> modal fractions -> per-superpixel temperature softmax."""
    labels = argmax_labels(scores)
    return temperature_softmax(scores, sp, predominant_fraction(labels, sp))


def entropy(p: np.ndarray, axis: int = -1) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=axis)
