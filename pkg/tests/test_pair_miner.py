import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hallucbench.pair_miner import (
    CandidatePair,
    ClipRecord,
    DegenerateEmbeddingError,
    MinerConfig,
    MissingEmbeddingError,
    assemble_sth,
    assemble_tsh,
    cosine,
    filter_identical_actions,
    filter_short_clips,
    mine_pairs,
    passes_thresholds,
    pool_video,
)
from hallucbench.tensor_store import EmbeddingMatrix

from _fixtures import make_corpus


def _clip(clip_id, video="vid0", order=0, action="skiing", scene="slope", start=0.0, dur=5.0):
    return ClipRecord(
        clip_id=clip_id,
        source_video_id=video,
        start_s=start,
        end_s=start + dur,
        action=action,
        scene=scene,
        order_index=order,
    )


# --- independent oracles -----------------------------------------------------

def _oracle_pool(rows):
    dim = len(rows[0])
    acc = [0.0] * dim
    for row in rows:
        for j in range(dim):
            acc[j] += float(row[j])
    mean = [x / len(rows) for x in acc]
    norm = math.sqrt(sum(x * x for x in mean))
    return [x / norm for x in mean]


def _oracle_cosine(u, v):
    dot = sum(float(a) * float(b) for a, b in zip(u, v))
    nu = math.sqrt(sum(float(a) ** 2 for a in u))
    nv = math.sqrt(sum(float(b) ** 2 for b in v))
    return max(-1.0, min(1.0, dot / (nu * nv)))


def _oracle_mine(clips, sem, vis, cfg, scan_mode):
    found = set()
    for a in clips:
        for b in clips:
            if a.clip_id >= b.clip_id:
                continue
            if scan_mode == "within_video" and a.source_video_id != b.source_video_id:
                continue
            s = _oracle_cosine(sem[a.clip_id], sem[b.clip_id])
            w = _oracle_cosine(vis[a.clip_id], vis[b.clip_id])
            if s >= cfg.lambda_sem and w < cfg.lambda_vis:
                found.add((a.clip_id, b.clip_id))
    return found


class TestPool:
    def test_single_frame(self):
        v = np.array([[3.0, 4.0]], dtype=np.float32)
        pooled = pool_video(EmbeddingMatrix(values=v))
        assert np.allclose(pooled, [0.6, 0.8], atol=1e-7)

    def test_identical_frames(self):
        v = np.array([[1.0, 2.0, 2.0]] * 2, dtype=np.float32)
        pooled = pool_video(EmbeddingMatrix(values=v))
        assert np.allclose(pooled, np.array([1.0, 2.0, 2.0]) / 3.0, atol=1e-7)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        rows = rng.standard_normal((5, 8)).astype(np.float32)
        pooled = pool_video(EmbeddingMatrix(values=rows))
        assert np.allclose(pooled, _oracle_pool(rows.tolist()), atol=1e-6)
        assert abs(np.linalg.norm(pooled) - 1.0) <= 1e-6

    def test_degenerate_mean(self):
        rows = np.array([[1.0, -1.0], [-1.0, 1.0]], dtype=np.float32)
        with pytest.raises(DegenerateEmbeddingError):
            pool_video(EmbeddingMatrix(values=rows))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 16), st.integers(0, 10_000))
    def test_unit_norm_property(self, frames, dim, seed):
        rng = np.random.default_rng(seed)
        rows = rng.standard_normal((frames, dim)).astype(np.float32) + 0.1
        pooled = pool_video(EmbeddingMatrix(values=rows))
        assert abs(np.linalg.norm(pooled) - 1.0) <= 1e-6


class TestCosine:
    def test_identity(self):
        v = np.array([1.0, 2.0, 3.0])
        assert cosine(v, v) == 1.0

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_opposite(self):
        v = np.array([0.5, -2.0])
        assert cosine(v, -v) == -1.0

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateEmbeddingError):
            cosine(np.zeros(3), np.ones(3))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10_000))
    def test_symmetry_exact(self, seed):
        rng = np.random.default_rng(seed)
        u, v = rng.standard_normal(16), rng.standard_normal(16)
        assert cosine(u, v) == cosine(v, u)

    def test_clamped(self):
        v = np.array([1e-8, 1.0])
        assert -1.0 <= cosine(v, v * 3.0) <= 1.0


class TestThresholdRule:
    def test_paper_thresholds_pass(self):
        assert passes_thresholds(0.95, 0.40, MinerConfig())

    def test_visual_boundary_is_strict(self):
        assert not passes_thresholds(0.95, 0.60, MinerConfig())

    def test_semantic_boundary_is_inclusive(self):
        assert passes_thresholds(0.90, 0.40, MinerConfig())

    def test_lambda_validation(self):
        with pytest.raises(ValueError):
            MinerConfig(lambda_sem=1.5)


class TestMinePairs:
    def test_two_clip_example(self):
        clips = [_clip("a", order=0, action="skiing"),
                 _clip("b", order=1, action="driving")]
        base = np.zeros(4)
        base[0] = 1.0
        sem = {"a": base, "b": np.array([0.95, math.sqrt(1 - 0.95**2), 0.0, 0.0])}
        vis = {"a": base, "b": np.array([0.40, math.sqrt(1 - 0.40**2), 0.0, 0.0])}
        pairs = mine_pairs(clips, sem, vis)
        assert len(pairs) == 1
        assert (pairs[0].clip_a, pairs[0].clip_b) == ("a", "b")
        assert pairs[0].adjacent
        assert pairs[0].sem_sim >= 0.9 and pairs[0].vis_sim < 0.6

    def test_missing_embedding_names_clip(self):
        clips = [_clip("a"), _clip("b", order=1)]
        vec = {"a": np.ones(3), "b": np.ones(3)}
        with pytest.raises(MissingEmbeddingError, match="'b'"):
            mine_pairs(clips, vec, {"a": np.ones(3)})

    def test_matches_brute_force(self):
        clips, sem, vis = make_corpus(n_videos=5, clips_per_video=4, seed=11,
                                      visual_twin_videos=(2,))
        cfg = MinerConfig()
        for mode in ("within_video", "cross_video"):
            mined = mine_pairs(clips, sem, vis, cfg, scan_mode=mode)
            got = {(p.clip_a, p.clip_b) for p in mined}
            assert got == _oracle_mine(clips, sem, vis, cfg, mode)
            for p in mined:
                assert p.sem_sim >= cfg.lambda_sem and p.vis_sim < cfg.lambda_vis

    def test_permutation_invariant(self):
        clips, sem, vis = make_corpus(n_videos=4, clips_per_video=4, seed=3)
        mined = mine_pairs(clips, sem, vis)
        shuffled = list(clips)
        random.Random(5).shuffle(shuffled)
        assert mine_pairs(shuffled, sem, vis) == mined

    def test_visual_twins_excluded(self):
        clips, sem, vis = make_corpus(n_videos=2, clips_per_video=3, seed=9,
                                      visual_twin_videos=(0, 1))
        assert mine_pairs(clips, sem, vis) == []


class TestFilters:
    def test_short_clips_dropped(self):
        clips = [_clip("a", dur=0.5), _clip("b", dur=1.0), _clip("c", dur=3.0)]
        assert [c.clip_id for c in filter_short_clips(clips)] == ["b", "c"]

    def test_identical_actions_dropped(self):
        clips = [_clip("a", action="skiing"), _clip("b", order=1, action="skiing")]
        pair = CandidatePair("a", "b", 0.95, 0.2, True, False)
        assert filter_identical_actions([pair], clips) == []

    def test_normalized_identical_dropped(self):
        clips = [_clip("a", action="Skiing "), _clip("b", order=1, action="skiing")]
        pair = CandidatePair("a", "b", 0.95, 0.2, True, False)
        assert filter_identical_actions([pair], clips) == []

    def test_distinct_actions_kept(self):
        clips = [_clip("a", action="skiing"),
                 _clip("b", order=1, action="ironing wax on the ski")]
        pair = CandidatePair("a", "b", 0.95, 0.2, True, False)
        assert filter_identical_actions([pair], clips) == [pair]

    def test_empty_action_rejected(self):
        clips = [_clip("a", action=""), _clip("b", order=1, action="skiing")]
        pair = CandidatePair("a", "b", 0.95, 0.2, True, False)
        with pytest.raises(ValueError, match="'a'"):
            filter_identical_actions([pair], clips)


class TestAssembleTsh:
    def test_order_follows_position(self):
        clips = [_clip("x", order=4, action="later", start=40.0),
                 _clip("w", order=3, action="earlier", start=30.0)]
        pair = CandidatePair("w", "x", 0.95, 0.2, True, False)
        entries = assemble_tsh([pair], clips)
        assert entries[0].clip_sequence == ("w", "x")
        assert entries[0].actions == ("earlier", "later")

    def test_non_adjacent_excluded(self):
        clips = [_clip("a", order=0), _clip("b", order=2)]
        pair = CandidatePair("a", "b", 0.95, 0.2, False, False)
        assert assemble_tsh([pair], clips) == []

    def test_matches_adjacency_scan(self):
        clips, sem, vis = make_corpus(n_videos=10, clips_per_video=5, seed=21)
        pairs = mine_pairs(clips, sem, vis)
        entries = assemble_tsh(pairs, clips)
        by_id = {c.clip_id: c for c in clips}
        expected = set()
        for p in pairs:
            a, b = by_id[p.clip_a], by_id[p.clip_b]
            if a.source_video_id == b.source_video_id and abs(a.order_index - b.order_index) == 1:
                first, second = sorted((a, b), key=lambda c: c.order_index)
                expected.add((first.clip_id, second.clip_id))
        assert {e.clip_sequence for e in entries} == expected


class TestAssembleSth:
    def _distinct_pair(self):
        clips = [
            _clip("a", order=0, action="swimming", scene="in a swimming pool"),
            _clip("b", order=1, action="bathing", scene="in a bathtub"),
        ]
        pair = CandidatePair("a", "b", 0.95, 0.2, True, True)
        return clips, pair

    def test_one_pair_yields_two_yes_two_no(self):
        clips, pair = self._distinct_pair()
        specs = assemble_sth([pair], clips, rng_seed=0)
        yes = [s for s in specs if s.change]
        no = [s for s in specs if not s.change]
        assert len(yes) == 2 and len(no) == 2

    def test_scene_labels_verbatim(self):
        clips, pair = self._distinct_pair()
        specs = assemble_sth([pair], clips, rng_seed=0)
        ab = next(s for s in specs if s.change and s.clip_sequence == ("a", "b"))
        ba = next(s for s in specs if s.change and s.clip_sequence == ("b", "a"))
        assert (ab.scene_from, ab.scene_to) == ("in a swimming pool", "in a bathtub")
        assert (ba.scene_from, ba.scene_to) == ("in a bathtub", "in a swimming pool")

    def test_deterministic_under_seed(self):
        clips, sem, vis = make_corpus(n_videos=6, clips_per_video=4, seed=17)
        pairs = mine_pairs(clips, sem, vis)
        assert assemble_sth(pairs, clips, rng_seed=42) == assemble_sth(pairs, clips, rng_seed=42)

    def test_empty_when_no_distinct_scene(self, caplog):
        clips = [_clip("a", scene="slope"), _clip("b", order=1, scene="slope")]
        pair = CandidatePair("a", "b", 0.95, 0.2, True, False)
        with caplog.at_level("WARNING"):
            assert assemble_sth([pair], clips, rng_seed=0) == []
        assert any("no distinct-scene" in r.message for r in caplog.records)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 6), st.integers(2, 5), st.integers(0, 1000))
    def test_balance_property(self, videos, per_video, seed):
        clips, sem, vis = make_corpus(n_videos=videos, clips_per_video=per_video,
                                      seed=seed % 100)
        pairs = mine_pairs(clips, sem, vis)
        specs = assemble_sth(pairs, clips, rng_seed=seed)
        assert sum(s.change for s in specs) == sum(not s.change for s in specs)
        assert len({s.spec_id for s in specs}) == len(specs)
