"""Body-budget scores for tracked objects.

Three per-track scores, each reflecting one solid-body property:

  object permanence    accumulated confident detections, weighted by a
                       class-specific impact value and scaled by 1/1000
  shape constancy      stability of the shape descriptor across frames
  spatial-temporal     fraction of event frames with a detection

and their weighted sum, the composite score.  The composite is the
object's signature: per-class running means of it drive classification of
unknown objects (see knowledge module).

All functions are pure.  Walls are scenery, not objects, and are rejected
everywhere here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .trace_model import SCOREABLE_CLASSES, ClassProfile, ObjectClass, default_profiles
from .tracker import Track

# Fixed divisor anchoring the per-class score bands (impact 10 / 100 / 1000);
# deliberately not configurable.
IMPACT_SCALE = 1000.0

SC_MODES = ("descriptor", "confidence")


@dataclass(frozen=True)
class WeightConfig:
    """Weights for the composite score."""

    alpha: float = 0.33
    beta: float = 0.33
    gamma: float = 0.33

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class BodyBudgetScores:
    """Score bundle for one track; carries its weights so the composite is
    re-checkable from the stored parts."""

    s_op: float
    s_sc: float
    s_stc: float
    a: float
    weights: WeightConfig = WeightConfig()

    def __post_init__(self):
        if self.s_op < 0:
            raise ValueError(f"s_op must be >= 0, got {self.s_op}")
        for name in ("s_sc", "s_stc"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        expected = composite_score(self.s_op, self.s_sc, self.s_stc, self.weights)
        if abs(self.a - expected) > 1e-9:
            raise ValueError(f"composite {self.a} inconsistent with parts (expected {expected})")


def _reject_occluder(track: Track) -> None:
    if track.is_occluder:
        raise ValueError(f"track {track.track_id} is a wall; occluders are not scored")


def score_object_permanence(track: Track, profile: ClassProfile) -> float:
    """Sum of (confidence x impact value) over detected frames, / 1000.

    The profile decides the impact value, so the same track can be scored
    under different class hypotheses.
    """
    _reject_occluder(track)
    total = sum(c for c in track.confidences if c is not None)
    return total * profile.impact_value / IMPACT_SCALE


def score_spatial_temporal(track: Track, n: int) -> float:
    """Fraction of the event's n frames in which the track was detected."""
    _reject_occluder(track)
    if n < 1:
        raise ValueError(f"frame count must be >= 1, got {n}")
    detected = track.detected_frames
    if detected > n:
        raise ValueError(f"track detected in {detected} frames of a {n}-frame event")
    return detected / n


def normalized_euclidean_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """||a - b|| / (||a|| + ||b||), in [0, 1] by the triangle inequality.

    Two zero vectors are identical, distance 0.
    """
    if len(a) != len(b):
        raise ValueError(f"descriptor dimensions differ: {len(a)} vs {len(b)}")
    diff = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
    denom = math.sqrt(sum(x * x for x in a)) + math.sqrt(sum(y * y for y in b))
    if denom == 0.0:
        return 0.0
    return diff / denom


def score_shape_constancy(track: Track, mode: str = "descriptor") -> float:
    """How constant the object's shape stayed, in [0, 1].

    descriptor mode: 1 minus the mean normalized Euclidean distance between
    shape descriptors of consecutive detected frames.  confidence mode:
    mean detection confidence, for comparability with detector-score-based
    reporting.  A single-detection track scores its one confidence either way.
    """
    _reject_occluder(track)
    if mode not in SC_MODES:
        raise ValueError(f"unknown shape-constancy mode {mode!r}; expected one of {SC_MODES}")
    confidences = [c for c in track.confidences if c is not None]
    if not confidences:
        raise ValueError(f"track {track.track_id} has no detections to score")
    if mode == "confidence":
        return min(1.0, max(0.0, sum(confidences) / len(confidences)))
    descriptors = [d for d in track.descriptors if d is not None]
    if len(descriptors) == 1:
        return confidences[0]
    distances = [
        normalized_euclidean_distance(descriptors[i], descriptors[i + 1])
        for i in range(len(descriptors) - 1)
    ]
    return min(1.0, max(0.0, 1.0 - sum(distances) / len(distances)))


def composite_score(s_op: float, s_sc: float, s_stc: float, w: WeightConfig) -> float:
    return w.alpha * s_op + w.beta * s_sc + w.gamma * s_stc


def score_track(
    track: Track,
    n: int,
    profile: ClassProfile,
    weights: WeightConfig = WeightConfig(),
    sc_mode: str = "descriptor",
) -> BodyBudgetScores:
    """All body-budget scores of one track under one class profile."""
    s_op = score_object_permanence(track, profile)
    s_sc = score_shape_constancy(track, sc_mode)
    s_stc = score_spatial_temporal(track, n)
    return BodyBudgetScores(
        s_op=s_op,
        s_sc=s_sc,
        s_stc=s_stc,
        a=composite_score(s_op, s_sc, s_stc, weights),
        weights=weights,
    )


def hypothesis_scores(
    track: Track,
    n: int,
    profiles: Optional[Mapping[ObjectClass, ClassProfile]] = None,
    weights: WeightConfig = WeightConfig(),
    sc_mode: str = "descriptor",
) -> dict[ObjectClass, BodyBudgetScores]:
    """Score one track under every class hypothesis.

    Only the object-permanence term depends on the hypothesis (through the
    impact value); shape constancy and spatial-temporal continuity are
    intrinsic to the track.  This is how an unknown object gets a composite
    score per candidate class for Z-number inference.
    """
    if profiles is None:
        profiles = default_profiles()
    return {
        cls: score_track(track, n, profiles[cls], weights, sc_mode)
        for cls in SCOREABLE_CLASSES
        if cls in profiles
    }


def focus_track(tracks: Sequence[Track]) -> Optional[Track]:
    """The non-wall track with the most detections (ties: lowest id); the
    event's verdict and knowledge-base update hang off this track."""
    candidates = [t for t in tracks if not t.is_occluder]
    if not candidates:
        return None
    return max(candidates, key=lambda t: (t.detected_frames, -t.track_id))
