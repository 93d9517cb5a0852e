import io
import random

import numpy as np
import pytest

from curiophys import (
    DiscontinuityKind,
    ObjectClass,
    ScenarioKind,
    TrackerParams,
    build_spec,
    generate_event,
    trace_discontinuities,
    track_event,
    write_track_csv,
)
from curiophys.ingest import scripted_violation_frame
from curiophys.tracker import CovarianceError, _check_covariance, track_discontinuities

from trace_builders import ObjectScript, build_trace, linear_script


def _single_track(trace, params=TrackerParams()):
    tracks = [t for t in track_event(trace, params) if not t.is_occluder]
    assert len(tracks) == 1
    return tracks[0]


def test_constant_velocity_object_yields_one_full_track():
    trace = generate_event(build_spec(ScenarioKind.POSSIBLE_VISIBLE))
    track = _single_track(trace)
    assert track.first_frame == 0
    assert track.detected_frames == trace.frame_count
    assert all(track.presence)
    assert track.resolved_class is ObjectClass.SPHERE


def test_filter_converges_on_linear_motion():
    trace = generate_event(build_spec(ScenarioKind.POSSIBLE_VISIBLE, velocity=(-2.0, 1.5)))
    track = _single_track(trace)
    settled = [r for i, r in enumerate(track.residuals) if i >= 5 and r is not None]
    assert max(settled) < 0.5
    vx, vy = track.velocities[25]
    assert vx == pytest.approx(-2.0, abs=1e-3)
    assert vy == pytest.approx(1.5, abs=1e-3)


def test_track_survives_occlusion_as_one_identity():
    trace = generate_event(build_spec(ScenarioKind.POSSIBLE_OCCLUDED))
    track = _single_track(trace)
    gap = [track.first_frame + i for i, p in enumerate(track.presence) if not p]
    assert gap == list(range(40, 56))
    # prediction keeps moving through the gap
    before = track.predicted_center_at(gap[0])
    after = track.predicted_center_at(gap[-1])
    assert after[0] - before[0] == pytest.approx(3.0 * (len(gap) - 1), abs=0.2)
    # reappearance snaps back onto the same track with a tiny residual
    reappear = track.residuals[gap[-1] + 1 - track.first_frame]
    assert reappear is not None and reappear < 1.0


def test_walls_and_objects_track_in_separate_pools():
    # wall bbox sits right on the object's path; it must never capture the object
    script = linear_script((50.0, 100.0), (3.0, 0.0), range(30))
    trace = build_trace("pools", 30, [script], wall_bbox=(60.0, 80.0, 60.0, 40.0))
    tracks = track_event(trace)
    assert len(tracks) == 2
    wall = [t for t in tracks if t.is_occluder]
    obj = [t for t in tracks if not t.is_occluder]
    assert len(wall) == 1 and len(obj) == 1
    assert obj[0].detected_frames == 30
    assert all(c is None or c is ObjectClass.SPHERE for c in obj[0].classes)
    assert wall[0].detected_frames == 30


def test_association_is_permutation_invariant():
    rng = random.Random(17)
    a = linear_script((50.0, 100.0), (3.0, 0.0), range(40), cls=ObjectClass.SPHERE)
    b = linear_script((50.0, 140.0), (3.0, 0.0), range(40), cls=ObjectClass.CUBE)
    base = build_trace("perm", 40, [a, b], wall_bbox=(300.0, 50.0, 40.0, 200.0))
    shuffled_frames = []
    for frame in base.frames:
        dets = list(frame.detections)
        rng.shuffle(dets)
        shuffled_frames.append(type(frame)(frame.frame_index, tuple(dets)))
    shuffled = type(base)(base.event_id, tuple(shuffled_frames), base.ground_truth)

    def summary(tracks):
        return sorted(
            (t.is_occluder, t.first_frame, tuple(t.centers_observed), tuple(t.classes))
            for t in tracks
        )

    assert summary(track_event(base)) == summary(track_event(shuffled))


def test_two_parallel_objects_stay_separate():
    a = linear_script((50.0, 100.0), (3.0, 0.0), range(40), cls=ObjectClass.SPHERE)
    b = linear_script((50.0, 200.0), (3.0, 0.0), range(40), cls=ObjectClass.CONE)
    tracks = track_event(build_trace("pair", 40, [a, b]))
    assert len(tracks) == 2
    classes = sorted(t.resolved_class.value for t in tracks)
    assert classes == ["cone", "sphere"]
    assert all(t.detected_frames == 40 for t in tracks)


def test_same_class_detection_wins_ties():
    # two detections exactly equidistant from the track's prediction (which
    # stays at the birth position after one zero-velocity predict step); the
    # one matching the track's class must win the tie
    sphere_then_pair = ObjectScript(
        centers={0: (100.0, 100.0), 1: (103.0, 100.0)},
        cls=ObjectClass.SPHERE,
    )
    intruder = ObjectScript(centers={1: (97.0, 100.0)}, cls=ObjectClass.CUBE)
    trace = build_trace("tie", 2, [sphere_then_pair, intruder])
    tracks = track_event(trace)
    original = [t for t in tracks if t.first_frame == 0][0]
    assert original.classes[1] is ObjectClass.SPHERE


def test_discontinuities_for_generated_kinds():
    params = TrackerParams()

    trace = generate_event(build_spec(ScenarioKind.POSSIBLE_VISIBLE))
    assert trace_discontinuities(track_event(trace), trace.frame_count, params) == []

    trace = generate_event(build_spec(ScenarioKind.POSSIBLE_OCCLUDED))
    discs = trace_discontinuities(track_event(trace), trace.frame_count, params)
    assert [(d.kind, d.start_frame, d.end_frame) for d in discs] == [
        (DiscontinuityKind.VANISH, 40, 55),
        (DiscontinuityKind.APPEAR, 40, 55),
    ]

    trace = generate_event(build_spec(ScenarioKind.IMPOSSIBLE_DISAPPEAR))
    discs = trace_discontinuities(track_event(trace), trace.frame_count, params)
    assert [(d.kind, d.start_frame, d.end_frame) for d in discs] == [
        (DiscontinuityKind.VANISH, 45, 89),
    ]

    trace = generate_event(build_spec(ScenarioKind.IMPOSSIBLE_TELEPORT))
    discs = trace_discontinuities(track_event(trace), trace.frame_count, params)
    assert [(d.kind, d.start_frame) for d in discs] == [(DiscontinuityKind.JUMP, 45)]

    trace = generate_event(build_spec(ScenarioKind.IMPOSSIBLE_SHAPE_CHANGE))
    discs = trace_discontinuities(track_event(trace), trace.frame_count, params)
    assert [(d.kind, d.start_frame) for d in discs] == [(DiscontinuityKind.SHAPE_SWITCH, 45)]
    assert "sphere -> cone" in discs[0].detail


def test_prefix_gap_yields_appear_only():
    script = linear_script((50.0, 100.0), (3.0, 0.0), range(10, 30))
    trace = build_trace("prefix", 30, [script])
    track = _single_track(trace)
    discs = track_discontinuities(track, 30)
    assert [(d.kind, d.start_frame, d.end_frame) for d in discs] == [
        (DiscontinuityKind.APPEAR, 0, 9),
    ]


def test_trailing_gap_yields_vanish_only():
    script = linear_script((50.0, 100.0), (3.0, 0.0), range(0, 20))
    trace = build_trace("trailing", 30, [script])
    track = _single_track(trace)
    discs = track_discontinuities(track, 30)
    assert [(d.kind, d.start_frame, d.end_frame) for d in discs] == [
        (DiscontinuityKind.VANISH, 20, 29),
    ]


def test_mid_gap_yields_vanish_appear_pair():
    frames = [t for t in range(40) if not 15 <= t <= 24]
    script = linear_script((50.0, 100.0), (3.0, 0.0), frames)
    trace = build_trace("midgap", 40, [script])
    track = _single_track(trace)
    discs = track_discontinuities(track, 40)
    assert [(d.kind, d.start_frame, d.end_frame) for d in discs] == [
        (DiscontinuityKind.VANISH, 15, 24),
        (DiscontinuityKind.APPEAR, 15, 24),
    ]


def test_single_frame_class_blip_is_not_a_shape_switch():
    script = ObjectScript(
        centers={t: (50.0 + 3.0 * t, 100.0) for t in range(20)},
        cls=ObjectClass.SPHERE,
        classes={9: ObjectClass.CUBE},
    )
    track = _single_track(build_trace("blip", 20, [script]))
    discs = track_discontinuities(track, 20)
    assert [d for d in discs if d.kind is DiscontinuityKind.SHAPE_SWITCH] == []


def test_sustained_class_switch_is_detected():
    script = ObjectScript(
        centers={t: (50.0 + 3.0 * t, 100.0) for t in range(20)},
        cls=ObjectClass.SPHERE,
        classes={t: ObjectClass.CUBE for t in range(12, 20)},
    )
    track = _single_track(build_trace("switch", 20, [script]))
    switches = [
        d for d in track_discontinuities(track, 20) if d.kind is DiscontinuityKind.SHAPE_SWITCH
    ]
    assert [(d.start_frame, d.end_frame) for d in switches] == [(12, 12)]


def test_teleport_registers_exactly_one_jump():
    trace = generate_event(build_spec(ScenarioKind.IMPOSSIBLE_TELEPORT))
    track = _single_track(trace)
    cut = scripted_violation_frame(build_spec(ScenarioKind.IMPOSSIBLE_TELEPORT))
    jumps = [
        d for d in track_discontinuities(track, trace.frame_count)
        if d.kind is DiscontinuityKind.JUMP
    ]
    assert [(d.start_frame, d.end_frame) for d in jumps] == [(cut, cut)]
    # and the track was not split in two
    assert track.detected_frames == trace.frame_count


def test_wall_tracks_produce_no_discontinuities():
    # wall with a detection gap still yields nothing
    wall_script = ObjectScript(
        centers={t: (300.0, 100.0) for t in range(30) if not 10 <= t <= 14},
        cls=ObjectClass.WALL,
        confidence=0.9,
    )
    trace = build_trace("wallgap", 30, [wall_script, linear_script((50, 200), (3, 0), range(30))])
    tracks = track_event(trace)
    wall = [t for t in tracks if t.is_occluder][0]
    assert track_discontinuities(wall, 30) == []


def test_covariance_contract_guard():
    _check_covariance(np.eye(4))
    with pytest.raises(CovarianceError, match="asymmetry"):
        bad = np.eye(4)
        bad[0, 1] = 1e-6
        _check_covariance(bad)
    with pytest.raises(CovarianceError, match="eigenvalue"):
        _check_covariance(-np.eye(4))


def test_tracker_params_validation():
    with pytest.raises(ValueError, match="assoc_gate"):
        TrackerParams(assoc_gate=0)
    with pytest.raises(ValueError, match="measurement_noise"):
        TrackerParams(measurement_noise=-1)
    with pytest.raises(ValueError, match="shape_switch_min_run"):
        TrackerParams(shape_switch_min_run=0)


def test_track_csv_rows():
    frames = [t for t in range(10) if t not in (4, 5)]
    script = linear_script((50.0, 100.0), (3.0, 0.0), frames)
    track = _single_track(build_trace("csv", 10, [script]))
    buf = io.StringIO()
    write_track_csv(track, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "frame,observed_x,observed_y,predicted_x,predicted_y,residual,present"
    assert len(lines) == 11
    row4 = lines[5].split(",")
    assert row4[0] == "4" and row4[1] == "" and row4[5] == "" and row4[6] == "0"
    row0 = lines[1].split(",")
    assert row0[1] == "50.000000" and row0[6] == "1"
    # coasted frames still carry predictions
    assert row4[3] != ""
