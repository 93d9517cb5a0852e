"""Frame-to-frame tracking of detections with a constant-velocity filter.

One Track per physical object (or wall).  Objects and walls are associated
in separate pools so a box sliding behind a wall is never matched to the
wall's detection.  During detection gaps a track coasts: the filter keeps
predicting without measurement updates, which is what lets a track survive
occlusion and what gives the curiosity layer a predicted center to test
against occluder geometry.

Association is greedy nearest-neighbor over predicted centers and is
independent of detection order within a frame: candidate pairs are sorted
globally by (distance, class mismatch, track id, detection content) before
assignment, and new tracks are born in detection-content order.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterator, Optional, Sequence, Tuple

import numpy as np

from .trace_model import Detection, EventTrace, ObjectClass, class_order_index

# Tolerance for the covariance symmetry / positive semi-definiteness contract.
COVARIANCE_TOL = 1e-9

# Constant-velocity transition over state [x, y, vx, vy], unit frame step.
F_MAT = np.array(
    [
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)
# Position-only measurement.
H_MAT = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ]
)


class CovarianceError(RuntimeError):
    """Filter covariance lost symmetry or positive semi-definiteness."""


@dataclass(frozen=True)
class TrackerParams:
    """Tuning knobs for association and the per-track filter.

    assoc_gate: max center distance (px) for matching a detection to a track.
    jump_gate: innovation norm (px) above which a matched detection counts
        as a positional discontinuity rather than ordinary noise.
    """

    assoc_gate: float = 50.0
    jump_gate: float = 25.0
    process_noise: float = 1.0
    measurement_noise: float = 2.0
    initial_variance: float = 100.0
    shape_switch_min_run: int = 3

    def __post_init__(self):
        for name in ("assoc_gate", "jump_gate", "process_noise", "measurement_noise", "initial_variance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.shape_switch_min_run < 1:
            raise ValueError(f"shape_switch_min_run must be >= 1, got {self.shape_switch_min_run}")


def _check_covariance(p: np.ndarray) -> None:
    asym = float(np.max(np.abs(p - p.T)))
    if asym > COVARIANCE_TOL:
        raise CovarianceError(f"covariance asymmetry {asym:.3e} exceeds {COVARIANCE_TOL}")
    min_eig = float(np.min(np.linalg.eigvalsh((p + p.T) / 2.0)))
    if min_eig < -COVARIANCE_TOL:
        raise CovarianceError(f"covariance eigenvalue {min_eig:.3e} below -{COVARIANCE_TOL}")


class PointFilter:
    """Kalman filter over [x, y, vx, vy] with position measurements.

    Born from a single detection: position from the detection center,
    velocity zero, diagonal covariance.  No measurement update is applied
    at birth; the first update happens on the next matched frame.
    """

    def __init__(self, center: Tuple[float, float], params: TrackerParams):
        self.x = np.array([center[0], center[1], 0.0, 0.0])
        self.P = np.eye(4) * params.initial_variance
        self._Q = np.eye(4) * params.process_noise
        self._R = np.eye(2) * params.measurement_noise

    def predict(self) -> Tuple[float, float]:
        self.x = F_MAT @ self.x
        self.P = F_MAT @ self.P @ F_MAT.T + self._Q
        _check_covariance(self.P)
        return (float(self.x[0]), float(self.x[1]))

    def update(self, z: Tuple[float, float]) -> float:
        """Fold in a position measurement; returns the innovation norm (px)."""
        innovation = np.asarray(z, dtype=float) - H_MAT @ self.x
        s = H_MAT @ self.P @ H_MAT.T + self._R
        k = np.linalg.solve(s, H_MAT @ self.P).T
        self.x = self.x + k @ innovation
        # Joseph form keeps P symmetric PSD under roundoff.
        ikh = np.eye(4) - k @ H_MAT
        self.P = ikh @ self.P @ ikh.T + k @ self._R @ k.T
        self.P = (self.P + self.P.T) / 2.0
        _check_covariance(self.P)
        return float(np.hypot(innovation[0], innovation[1]))

    @property
    def velocity(self) -> Tuple[float, float]:
        return (float(self.x[2]), float(self.x[3]))


class Track:
    """State history of one tracked object across a trace.

    Per-frame lists are aligned and indexed by (frame - first_frame); they
    always extend to the final frame of the trace, with presence False on
    coasted frames.
    """

    def __init__(self, track_id: int, first_frame: int, det: Detection, params: TrackerParams):
        self.track_id = track_id
        self.first_frame = first_frame
        self.is_occluder = det.object_class is ObjectClass.WALL
        self.filter = PointFilter(det.center, params)
        self.presence: list[bool] = [True]
        self.centers_observed: list[Optional[Tuple[float, float]]] = [det.center]
        # at birth the prediction is the detection itself
        self.centers_predicted: list[Tuple[float, float]] = [det.center]
        self.residuals: list[Optional[float]] = [0.0]
        self.velocities: list[Tuple[float, float]] = [(0.0, 0.0)]
        self.confidences: list[Optional[float]] = [det.confidence]
        self.classes: list[Optional[ObjectClass]] = [det.object_class]
        self.bboxes: list[Optional[Tuple[float, float, float, float]]] = [det.bbox]
        self.descriptors: list[Optional[Tuple[float, ...]]] = [det.shape_descriptor]

    def observe(self, det: Detection, predicted: Tuple[float, float]) -> float:
        residual = self.filter.update(det.center)
        self.presence.append(True)
        self.centers_observed.append(det.center)
        self.centers_predicted.append(predicted)
        self.residuals.append(residual)
        self.velocities.append(self.filter.velocity)
        self.confidences.append(det.confidence)
        self.classes.append(det.object_class)
        self.bboxes.append(det.bbox)
        self.descriptors.append(det.shape_descriptor)
        return residual

    def coast(self, predicted: Tuple[float, float]) -> None:
        self.presence.append(False)
        self.centers_observed.append(None)
        self.centers_predicted.append(predicted)
        self.residuals.append(None)
        self.velocities.append(self.filter.velocity)
        self.confidences.append(None)
        self.classes.append(None)
        self.bboxes.append(None)
        self.descriptors.append(None)

    # -- frame-indexed access -------------------------------------------------

    def covers(self, frame: int) -> bool:
        return self.first_frame <= frame < self.first_frame + len(self.presence)

    def _idx(self, frame: int) -> int:
        if not self.covers(frame):
            raise IndexError(f"track {self.track_id} does not cover frame {frame}")
        return frame - self.first_frame

    def was_present(self, frame: int) -> bool:
        return self.presence[self._idx(frame)]

    def predicted_center_at(self, frame: int) -> Tuple[float, float]:
        return self.centers_predicted[self._idx(frame)]

    # -- aggregates -----------------------------------------------------------

    @property
    def detected_frames(self) -> int:
        return sum(1 for p in self.presence if p)

    @property
    def last_observed_frame(self) -> int:
        for i in range(len(self.presence) - 1, -1, -1):
            if self.presence[i]:
                return self.first_frame + i
        raise RuntimeError("track has no observations")  # unreachable: born observed

    @property
    def last_class(self) -> ObjectClass:
        for cls in reversed(self.classes):
            if cls is not None:
                return cls
        raise RuntimeError("track has no observations")

    @property
    def resolved_class(self) -> ObjectClass:
        """Majority class over observed frames; ties go to the smaller class
        in canonical order, so an exact half-way switch resolves to the
        class the object started as."""
        counts: dict[ObjectClass, int] = {}
        for cls in self.classes:
            if cls is not None:
                counts[cls] = counts.get(cls, 0) + 1
        return max(counts, key=lambda c: (counts[c], -class_order_index(c)))

    def observed_frames(self) -> Iterator[Tuple[int, ObjectClass]]:
        for i, present in enumerate(self.presence):
            if present:
                cls = self.classes[i]
                assert cls is not None
                yield (self.first_frame + i, cls)

    def mean_confidence(self) -> float:
        vals = [c for c in self.confidences if c is not None]
        return sum(vals) / len(vals)

    def __repr__(self) -> str:
        return (
            f"Track(id={self.track_id}, class={self.last_class.value}, "
            f"frames=[{self.first_frame}..{self.first_frame + len(self.presence) - 1}], "
            f"detected={self.detected_frames})"
        )


def _det_key(det: Detection) -> tuple:
    """Content-based ordering key; makes association independent of the
    order detections happen to be listed in a frame."""
    return (det.bbox, class_order_index(det.object_class), det.confidence, det.shape_descriptor)


def _step_pool(
    pool: list[Track],
    dets: Sequence[Detection],
    params: TrackerParams,
) -> list[Detection]:
    """Advance one association pool (objects or walls) by a single frame;
    returns the detections that matched no track and should start new ones."""
    predictions = [t.filter.predict() for t in pool]
    canon = sorted(range(len(dets)), key=lambda j: _det_key(dets[j]))

    pairs = []
    for ti, track in enumerate(pool):
        px, py = predictions[ti]
        for dj in canon:
            det = dets[dj]
            cx, cy = det.center
            dist = float(np.hypot(px - cx, py - cy))
            if dist > params.assoc_gate:
                continue
            mismatch = 0 if det.object_class is track.last_class else 1
            pairs.append((dist, mismatch, track.track_id, _det_key(det), ti, dj))
    pairs.sort(key=lambda p: p[:4])

    track_taken = [False] * len(pool)
    det_taken = [False] * len(dets)
    for _, _, _, _, ti, dj in pairs:
        if track_taken[ti] or det_taken[dj]:
            continue
        track_taken[ti] = True
        det_taken[dj] = True
        pool[ti].observe(dets[dj], predictions[ti])

    for ti, track in enumerate(pool):
        if not track_taken[ti]:
            track.coast(predictions[ti])

    return [dets[dj] for dj in canon if not det_taken[dj]]


def track_event(trace: EventTrace, params: TrackerParams = TrackerParams()) -> list[Track]:
    """Track every detection in the trace; returns tracks in id order.

    The trace is assumed valid (frames consecutive from 0); feed parser or
    generator output.
    """
    tracks: list[Track] = []
    next_id = 0
    for frame in trace.frames:
        obj_dets = [d for d in frame.detections if d.object_class is not ObjectClass.WALL]
        wall_dets = [d for d in frame.detections if d.object_class is ObjectClass.WALL]
        for dets, is_wall_pool in ((obj_dets, False), (wall_dets, True)):
            pool = [t for t in tracks if t.is_occluder == is_wall_pool]
            for det in _step_pool(pool, dets, params):
                tracks.append(Track(next_id, frame.frame_index, det, params))
                next_id += 1
    return tracks


# ---------------------------------------------------------------------------
# Discontinuities
# ---------------------------------------------------------------------------

class DiscontinuityKind(Enum):
    VANISH = "vanish"
    APPEAR = "appear"
    JUMP = "jump"
    SHAPE_SWITCH = "shape-switch"


_KIND_ORDER = {
    DiscontinuityKind.VANISH: 0,
    DiscontinuityKind.APPEAR: 1,
    DiscontinuityKind.JUMP: 2,
    DiscontinuityKind.SHAPE_SWITCH: 3,
}


@dataclass(frozen=True)
class Discontinuity:
    """One break in a track's continuity over frames [start_frame, end_frame]."""

    kind: DiscontinuityKind
    track_id: int
    start_frame: int
    end_frame: int
    detail: str = ""

    def __post_init__(self):
        if self.end_frame < self.start_frame:
            raise ValueError("end_frame must be >= start_frame")


def track_discontinuities(
    track: Track, frame_count: int, params: TrackerParams = TrackerParams()
) -> list[Discontinuity]:
    """Extract continuity breaks from one track.

    A detection gap sandwiched between observations yields both a vanish
    and an appear over the same span; a gap at the start of the trace only
    an appear, a gap running to the end only a vanish.  Walls are scenery:
    they get no discontinuities.
    """
    if track.is_occluder:
        return []
    out: list[Discontinuity] = []
    tid = track.track_id

    if track.first_frame > 0:
        out.append(
            Discontinuity(
                DiscontinuityKind.APPEAR,
                tid,
                0,
                track.first_frame - 1,
                f"first detected at frame {track.first_frame}",
            )
        )

    # maximal runs of absent frames within the track span
    gap_start: Optional[int] = None
    for i, present in enumerate(track.presence):
        frame = track.first_frame + i
        if not present and gap_start is None:
            gap_start = frame
        elif present and gap_start is not None:
            out.append(Discontinuity(DiscontinuityKind.VANISH, tid, gap_start, frame - 1))
            out.append(Discontinuity(DiscontinuityKind.APPEAR, tid, gap_start, frame - 1))
            gap_start = None
    if gap_start is not None:
        out.append(Discontinuity(DiscontinuityKind.VANISH, tid, gap_start, frame_count - 1))

    # positional jumps: matched detections far from the coasting prediction
    for i, residual in enumerate(track.residuals):
        if i == 0 or residual is None:
            continue
        if residual > params.jump_gate:
            frame = track.first_frame + i
            out.append(
                Discontinuity(
                    DiscontinuityKind.JUMP, tid, frame, frame, f"residual {residual:.1f}px"
                )
            )

    # class switches: a sustained run of a different class than established
    runs: list[Tuple[ObjectClass, int, int]] = []  # (class, start_frame, count)
    for frame, cls in track.observed_frames():
        if runs and runs[-1][0] is cls:
            runs[-1] = (cls, runs[-1][1], runs[-1][2] + 1)
        else:
            runs.append((cls, frame, 1))
    if runs:
        established = runs[0][0]
        for cls, start, count in runs[1:]:
            if cls is not established and count >= params.shape_switch_min_run:
                out.append(
                    Discontinuity(
                        DiscontinuityKind.SHAPE_SWITCH,
                        tid,
                        start,
                        start,
                        f"{established.value} -> {cls.value}",
                    )
                )
                established = cls

    out.sort(key=lambda d: (d.start_frame, d.end_frame, _KIND_ORDER[d.kind]))
    return out


def trace_discontinuities(
    tracks: Sequence[Track], frame_count: int, params: TrackerParams = TrackerParams()
) -> list[Discontinuity]:
    out: list[Discontinuity] = []
    for track in tracks:
        out.extend(track_discontinuities(track, frame_count, params))
    out.sort(key=lambda d: (d.start_frame, d.end_frame, _KIND_ORDER[d.kind], d.track_id))
    return out


# ---------------------------------------------------------------------------
# CSV report
# ---------------------------------------------------------------------------

TRACK_CSV_FIELDS = (
    "frame",
    "observed_x",
    "observed_y",
    "predicted_x",
    "predicted_y",
    "residual",
    "present",
)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def track_csv_rows(track: Track) -> Iterator[tuple]:
    """Rows for one track in TRACK_CSV_FIELDS order; absent frames leave the
    observation and residual cells empty."""
    for i, present in enumerate(track.presence):
        frame = track.first_frame + i
        px, py = track.centers_predicted[i]
        if present:
            obs = track.centers_observed[i]
            assert obs is not None
            residual = track.residuals[i]
            assert residual is not None
            yield (frame, _fmt(obs[0]), _fmt(obs[1]), _fmt(px), _fmt(py), _fmt(residual), 1)
        else:
            yield (frame, "", "", _fmt(px), _fmt(py), "", 0)


def write_track_csv(track: Track, fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(TRACK_CSV_FIELDS)
    writer.writerows(track_csv_rows(track))
