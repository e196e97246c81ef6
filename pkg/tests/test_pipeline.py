"""End-to-end mixing pipeline: staging, rendering, normalization."""

import numpy as np
import pytest

from automix import channel_fx as fx
from automix.audio_io import AudioClip, Session, SubgroupSpec, Track, sum_tracks
from automix.loudness import integrated_loudness
from automix.pipeline import (
    TRACK_TARGET_LUFS,
    VOCAL_TARGET_LUFS,
    EngineConfig,
    mix_flat,
    mix_session,
    mix_subgrouped,
    render,
)
from automix.pso import PsoConfig

from conftest import FS, make_band_noise, make_noise

FAST = EngineConfig(pso=PsoConfig(swarm_size=6, max_iterations=4, stall_tolerance=0.0, rng_seed=0))


def _track(tid, clip, cls="other"):
    return Track(tid, tid, clip, cls, is_vocal=(cls == "vox"))


def _overlap_session(n=2, seconds=1.5):
    # stacked band noises sharing the 150-500 Hz region
    bands = [(150, 500), (200, 450), (120, 600), (250, 400)]
    tracks = []
    for i in range(n):
        lo, hi = bands[i % len(bands)]
        clip = make_band_noise(lo, hi, -18.0 - 2 * i, seconds=seconds, seed=40 + i)
        tracks.append(_track(f"t{i}", clip))
    return Session(tuple(tracks))


class TestRender:
    def test_identity_is_plain_sum(self):
        clips = [make_noise(-20.0, seconds=0.5, seed=s) for s in (1, 2)]
        out = render(clips, [fx.identity_params()] * 2)
        want = sum_tracks(clips)
        assert np.sqrt(np.mean((out.samples - want.samples) ** 2)) < 1e-9

    def test_single_track_is_process_track(self):
        clip = make_noise(-20.0, seconds=0.5, seed=3)
        p = fx.TrackParams(
            fx.EqParams((2.0, 0.0, -1.0, 0.0, 3.0, 0.0)),
            fx.DrcParams(-25.0, 2.0, 0.01, 0.2),
        )
        out = render([clip], [p])
        want = fx.process_track(clip, p)
        assert np.array_equal(out.samples, want.samples)

    def test_track_order_immaterial(self):
        clips = [make_noise(-20.0, seconds=0.5, seed=s) for s in (1, 2, 3)]
        params = [fx.identity_params()] * 3
        fwd = render(clips, params)
        rev = render(clips[::-1], params)
        assert np.sqrt(np.mean((fwd.samples - rev.samples) ** 2)) < 1e-9

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            render([make_noise(-20.0, seconds=0.5)], [])


class TestMixFlat:
    def test_single_silent_track(self):
        session = Session((_track("quiet", AudioClip(FS, np.zeros(FS))),))
        with pytest.warns(UserWarning, match="silent"):
            result = mix_flat(session, FAST)
        assert np.all(result.mix.samples == 0.0)
        (report,) = result.stage_reports
        assert report.iterations == 0
        assert report.final_f == 0.0
        assert "skipped" in report.note

    def test_two_tracks_reduce_masking(self):
        result = mix_flat(_overlap_session(2), FAST)
        (report,) = result.stage_reports
        assert report.final_f < report.initial_f
        assert report.final_f <= report.initial_f
        assert len(result.final_params) == 2

    def test_stage_monotonicity_and_naming(self):
        result = mix_flat(_overlap_session(3), FAST)
        (report,) = result.stage_reports
        assert report.stage == "All Tracks"
        assert report.track_count == 3
        assert report.final_f <= report.initial_f
        assert len(report.m_before) == 3
        assert len(report.m_after) == 3

    def test_deterministic(self):
        a = mix_flat(_overlap_session(2), FAST)
        b = mix_flat(_overlap_session(2), FAST)
        assert np.array_equal(a.mix.samples, b.mix.samples)
        assert a.stage_reports[0].final_f == b.stage_reports[0].final_f

    def test_tracks_normalized_before_staging(self):
        # a hot and a cold track land on the same target before the
        # swarm ever sees them
        session = Session(
            (
                _track("hot", make_noise(-6.0, seconds=1.5, seed=1)),
                _track("cold", make_noise(-40.0, seconds=1.5, seed=2)),
            )
        )
        result = mix_flat(session, FAST)
        for name, stem in result.stems.items():
            measured = integrated_loudness(stem).integrated_lufs
            assert measured == pytest.approx(TRACK_TARGET_LUFS, abs=1.5)


class TestMixSubgrouped:
    def _grouped_session(self):
        tracks = (
            _track("kick", make_band_noise(50, 220, -18.0, seconds=1.5, seed=11), "drums"),
            _track("snare", make_band_noise(150, 2500, -20.0, seconds=1.5, seed=12), "drums"),
            _track("bass", make_band_noise(60, 500, -18.0, seconds=1.5, seed=13), "bass"),
            _track("lead", make_band_noise(200, 4000, -16.0, seconds=1.5, seed=14), "vox"),
        )
        groups = (
            SubgroupSpec("drums", ("kick", "snare")),
            SubgroupSpec("low", ("bass",)),
            SubgroupSpec("vocals", ("lead",), is_vocal_group=True),
        )
        return Session(tracks, groups)

    def test_stage_count_is_groups_plus_final(self):
        result = mix_subgrouped(self._grouped_session(), FAST)
        assert len(result.stage_reports) == 4
        assert result.stage_reports[-1].stage == "Stem Mix"

    def test_single_member_groups_skipped(self):
        result = mix_subgrouped(self._grouped_session(), FAST)
        by_name = {r.stage: r for r in result.stage_reports}
        assert by_name["low"].iterations == 0
        assert "skipped" in by_name["low"].note
        assert by_name["vocals"].iterations == 0
        assert by_name["drums"].iterations > 0

    def test_stems_hit_their_targets(self):
        result = mix_subgrouped(self._grouped_session(), FAST)
        for name, stem in result.stems.items():
            target = VOCAL_TARGET_LUFS if name == "vocals" else TRACK_TARGET_LUFS
            measured = integrated_loudness(stem).integrated_lufs
            assert measured == pytest.approx(target, abs=0.2), name

    def test_final_stage_eq_stays_narrow(self):
        result = mix_subgrouped(self._grouped_session(), FAST)
        final = result.stage_reports[-1]
        for params in final.params.values():
            assert all(abs(g) <= fx.SUBGROUP_EQ_LIMIT_DB + 1e-12 for g in params.eq.gains_db)

    def test_every_stage_improves_or_holds(self):
        result = mix_subgrouped(self._grouped_session(), FAST)
        for report in result.stage_reports:
            assert report.final_f <= report.initial_f

    def test_five_groups_make_six_stages(self):
        tracks = tuple(
            _track(f"t{i}", make_band_noise(100 + 60 * i, 800 + 60 * i, -20.0, seconds=1.0, seed=50 + i))
            for i in range(5)
        )
        groups = tuple(SubgroupSpec(f"g{i}", (f"t{i}",)) for i in range(5))
        cfg = EngineConfig(pso=PsoConfig(swarm_size=4, max_iterations=2, stall_tolerance=0.0, rng_seed=1))
        result = mix_subgrouped(Session(tracks, groups), cfg)
        assert len(result.stage_reports) == 6


class TestMixSession:
    def test_dispatch_respects_flag(self):
        session = TestMixSubgrouped()._grouped_session()
        grouped = mix_session(session, FAST, use_subgroups=True)
        flat = mix_session(session, FAST, use_subgroups=False)
        assert len(grouped.stage_reports) == 4
        assert len(flat.stage_reports) == 1

    def test_no_subgroups_falls_back_to_flat(self):
        result = mix_session(_overlap_session(2), FAST, use_subgroups=True)
        assert len(result.stage_reports) == 1


class TestAnalysisWindow:
    def test_window_past_end_rejected(self):
        cfg = EngineConfig(pso=FAST.pso, analysis_start_s=10.0)
        with pytest.raises(ValueError):
            mix_flat(_overlap_session(2, seconds=1.0), cfg)

    def test_window_too_short_rejected(self):
        cfg = EngineConfig(pso=FAST.pso, analysis_length_s=0.1)
        with pytest.raises(ValueError):
            mix_flat(_overlap_session(2, seconds=1.0), cfg)

    def test_windowed_run_still_renders_full_length(self):
        cfg = EngineConfig(
            pso=PsoConfig(swarm_size=4, max_iterations=2, stall_tolerance=0.0, rng_seed=2),
            analysis_start_s=0.25,
            analysis_length_s=0.5,
        )
        session = _overlap_session(2, seconds=1.5)
        result = mix_flat(session, cfg)
        assert len(result.mix) == len(session.tracks[0].clip)
