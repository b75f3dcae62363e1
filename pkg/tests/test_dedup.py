import numpy as np
import pytest

from sonoprep import (
    DedupReport,
    EmbeddingFormatError,
    InvalidInputError,
    cosine_similarity,
    dct_feature,
    load_embeddings,
    semantic_screen,
    stub_embedding,
    visual_screen,
    write_embeddings_binary,
    write_embeddings_json,
)
from conftest import make_frame
from oracles import dct2_direct


def cos_columns(freq: int, size: int = 64) -> np.ndarray:
    """Image varying along columns as the DCT-II basis function of ``freq``."""
    y = np.arange(size)
    pattern = np.cos(np.pi * (2 * y + 1) * freq / (2 * size))
    return np.tile(pattern, (size, 1))


def basis_frame(freq, id, sequence_id="s", frame_index=0, mix=None):
    img = cos_columns(freq)
    if mix is not None:
        other_freq, w = mix
        img = (1 - w) * img + w * cos_columns(other_freq)
    return make_frame(0.5 + 0.4 * img, id=id, sequence_id=sequence_id, frame_index=frame_index)


class TestDctFeature:
    def test_constant_image_is_zero(self):
        for level in (0.0, 0.3, 1.0):
            feat = dct_feature(make_frame(np.full((64, 64), level)))
            assert feat.shape == (63,)
            assert np.allclose(feat, 0.0)

    def test_linearity_under_intensity_scale(self, rng):
        img = rng.random((64, 64))
        f1 = dct_feature(make_frame(img))
        f2 = dct_feature(make_frame(0.5 * img))
        assert np.allclose(f2, 0.5 * f1, atol=1e-12)

    def test_cosine_pattern_energy_at_0_1(self):
        frame = basis_frame(1, "a")
        feat = dct_feature(frame)
        oracle = dct2_direct(frame.pixels, 8, 8).ravel()[1:]
        assert np.allclose(feat, oracle, atol=1e-9)
        # feature index 0 is coefficient (0, 1): all energy lives there
        assert np.argmax(np.abs(feat)) == 0
        assert np.abs(feat[0]) > 1.0
        assert np.abs(np.delete(feat, 0)).max() < 1e-9

    def test_small_frame_uses_nearest_upscale(self):
        # smaller-than-canonical input still yields a 63-long finite feature
        feat = dct_feature(make_frame(np.eye(8) * 0.5))
        assert feat.shape == (63,) and np.isfinite(feat).all()


class TestCosineSimilarity:
    def test_identity(self):
        v = np.array([0.3, -0.2, 0.9])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 2.0]) == 0.0

    def test_hand_value(self):
        assert cosine_similarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.70710678, abs=1e-8)

    def test_zero_norm_rule(self):
        assert cosine_similarity([0.0, 0.0], [1.0, 1.0]) == 0.0

    def test_clamped(self, rng):
        v = rng.standard_normal(50)
        assert -1.0 <= cosine_similarity(v, 1e-3 * v) <= 1.0

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            cosine_similarity([1.0], [1.0, 2.0])


class TestVisualScreen:
    def test_exact_duplicate_dropped(self):
        a = basis_frame(1, "a1", frame_index=0)
        b = basis_frame(1, "a2", frame_index=1)
        retained, entries = visual_screen([a, b], 0.95)
        assert retained == ["a1"]
        assert entries[1].stage_dropped == "visual"
        assert entries[1].keeper_id == "a1"
        assert entries[1].similarity == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_frames_all_retained(self):
        frames = [basis_frame(f, f"f{f}", frame_index=f) for f in (1, 2, 3, 4)]
        retained, _ = visual_screen(frames, 0.5)
        assert retained == ["f1", "f2", "f3", "f4"]

    def test_greedy_last_keeper_trace(self):
        # sim(A, A') ~ 0.994 > 0.95; sim(A, B) = sim(B, A) = 0
        a = basis_frame(1, "A", frame_index=0)
        a_prime = basis_frame(1, "A'", frame_index=1, mix=(5, 0.1))
        b = basis_frame(5, "B", frame_index=2)
        a_again = basis_frame(1, "A2", frame_index=3)
        retained, entries = visual_screen([a, a_prime, b, a_again], 0.95)
        assert retained == ["A", "B", "A2"]
        dropped = [e for e in entries if e.stage_dropped != "none"]
        assert [e.id for e in dropped] == ["A'"]
        assert dropped[0].keeper_id == "A"

    def test_empty_input(self):
        retained, entries = visual_screen([], 0.9)
        assert retained == [] and entries == []

    def test_idempotent_on_retained_output(self, rng):
        frames = [
            make_frame(rng.random((32, 32)), id=f"r{i}", frame_index=i) for i in range(12)
        ]
        retained, _ = visual_screen(frames, 0.6)
        survivors = [f for f in frames if f.id in set(retained)]
        retained2, _ = visual_screen(survivors, 0.6)
        assert retained2 == retained

    def test_threshold_one_retains_all(self, rng):
        frames = [
            make_frame(rng.random((16, 16)), id=f"t{i}", frame_index=i) for i in range(6)
        ]
        frames[3] = make_frame(frames[2].pixels.copy(), id="t3", frame_index=3)
        retained, _ = visual_screen(frames, 1.0)
        assert len(retained) == 6

    def test_brightness_invariance(self, rng):
        frames = [
            make_frame(rng.random((32, 32)), id=f"b{i}", frame_index=i) for i in range(10)
        ]
        frames.append(make_frame(frames[0].pixels.copy(), id="dup", frame_index=10))
        retained, _ = visual_screen(frames, 0.7)
        scaled = [
            make_frame(0.5 * f.pixels, id=f.id, frame_index=f.frame_index) for f in frames
        ]
        retained_scaled, _ = visual_screen(scaled, 0.7)
        assert retained == retained_scaled

    def test_report_accounting(self, rng):
        frames = [
            make_frame(rng.random((16, 16)), id=f"c{i}", frame_index=i) for i in range(8)
        ]
        retained, entries = visual_screen(frames, 0.8)
        assert len(entries) == len(frames)
        assert len(retained) + sum(1 for e in entries if not e.retained) == len(frames)
        keepers = {e.keeper_id for e in entries if not e.retained}
        assert keepers <= set(retained)

    def test_requires_single_sorted_sequence(self):
        a = basis_frame(1, "a", sequence_id="s1")
        b = basis_frame(2, "b", sequence_id="s2")
        with pytest.raises(InvalidInputError):
            visual_screen([a, b], 0.9)
        c = basis_frame(1, "c", sequence_id="s1", frame_index=5)
        d = basis_frame(2, "d", sequence_id="s1", frame_index=1)
        with pytest.raises(InvalidInputError):
            visual_screen([c, d], 0.9)

    def test_bad_threshold(self):
        with pytest.raises(InvalidInputError):
            visual_screen([], 0.0)

    def test_compare_all_option(self):
        # A' matches the FIRST keeper, not the last: only the full-pairwise
        # mode catches it
        a = basis_frame(1, "A", frame_index=0)
        b = basis_frame(5, "B", frame_index=1)
        a_near = basis_frame(1, "A'", frame_index=2, mix=(5, 0.1))
        retained_last, _ = visual_screen([a, b, a_near], 0.95)
        assert retained_last == ["A", "B", "A'"]
        retained_all, entries_all = visual_screen([a, b, a_near], 0.95, compare_all=True)
        assert retained_all == ["A", "B"]
        assert entries_all[2].keeper_id == "A"


class TestSemanticScreen:
    def test_empty(self):
        retained, entries = semantic_screen([], 0.9)
        assert retained == [] and entries == []

    def test_identical_pair_drops_second(self):
        v = np.array([1.0, 2.0, 3.0])
        retained, entries = semantic_screen([("x", v), ("y", v.copy())], 0.9)
        assert retained == ["x"]
        assert entries[1].keeper_id == "x"
        assert entries[1].similarity == pytest.approx(1.0, abs=1e-9)

    def test_kept_set_trace(self):
        # candidate 2 is near candidate 1 (sim 0.95 > 0.9) and is dropped;
        # candidate 3 is only compared against the kept set {1} (sim 0.5)
        e1 = np.array([1.0, 0.0])
        e2 = np.array([0.95, np.sqrt(1 - 0.95**2)])
        e3 = np.array([0.5, np.sqrt(1 - 0.25)])
        assert cosine_similarity(e1, e2) == pytest.approx(0.95, abs=1e-12)
        assert cosine_similarity(e1, e3) == pytest.approx(0.50, abs=1e-12)
        retained, entries = semantic_screen([("1", e1), ("2", e2), ("3", e3)], 0.9)
        assert retained == ["1", "3"]
        assert entries[1].stage_dropped == "semantic"
        assert entries[1].keeper_id == "1"

    def test_length_mismatch_names_both_ids(self):
        with pytest.raises(InvalidInputError) as excinfo:
            semantic_screen([("p", np.ones(4)), ("q", np.ones(5))], 0.9)
        assert "p" in str(excinfo.value) and "q" in str(excinfo.value)


class TestStubEmbedding:
    def test_deterministic_for_identical_frames(self, rng):
        img = rng.random((64, 64))
        a = stub_embedding(make_frame(img, id="a"))
        b = stub_embedding(make_frame(img.copy(), id="b"))
        assert a.shape == (32,)
        assert cosine_similarity(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_constant_frame_degenerates_to_zero(self):
        vec = stub_embedding(make_frame(np.full((64, 64), 0.7)))
        assert np.allclose(vec, 0.0)
        assert cosine_similarity(vec, np.ones(32)) == 0.0

    def test_intensity_scale_invariance(self, rng):
        img = rng.random((64, 64))
        a = stub_embedding(make_frame(img))
        b = stub_embedding(make_frame(0.5 * img))
        assert cosine_similarity(a, b) == pytest.approx(1.0, abs=1e-9)

    def test_unit_norm(self, rng):
        vec = stub_embedding(make_frame(rng.random((64, 64))))
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


class TestEmbeddingFiles:
    def make_items(self, rng, n=5, dim=16):
        return {
            f"id-{i}": rng.standard_normal(dim).astype(np.float32) for i in range(n)
        }

    def test_binary_round_trip(self, tmp_path, rng):
        items = self.make_items(rng)
        path = tmp_path / "emb.bin"
        write_embeddings_binary(path, items)
        loaded = load_embeddings(path)
        assert set(loaded) == set(items)
        for k in items:
            assert np.array_equal(loaded[k], items[k])

    def test_json_loads_identical_vectors(self, tmp_path, rng):
        items = self.make_items(rng)
        bpath, jpath = tmp_path / "emb.bin", tmp_path / "emb.json"
        write_embeddings_binary(bpath, items)
        write_embeddings_json(jpath, items)
        from_bin = load_embeddings(bpath)
        from_json = load_embeddings(jpath)
        assert set(from_bin) == set(from_json)
        for k in from_bin:
            assert np.array_equal(from_bin[k], from_json[k])

    def test_zero_vector_rejected(self, tmp_path):
        path = tmp_path / "z.bin"
        write_embeddings_binary(path, {"z": np.zeros(8, dtype=np.float32)})
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(path)

    def test_truncated_binary_rejected(self, tmp_path, rng):
        path = tmp_path / "t.bin"
        write_embeddings_binary(path, self.make_items(rng))
        data = path.read_bytes()
        path.write_bytes(data[:-10])
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(path)

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "g.bin"
        path.write_bytes(b"\x00\x01\x02 garbage that is neither PMEB nor JSON")
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(path)

    def test_unicode_ids(self, tmp_path):
        items = {"séq-1/frame_0001": np.ones(4, dtype=np.float32)}
        path = tmp_path / "u.bin"
        write_embeddings_binary(path, items)
        assert set(load_embeddings(path)) == set(items)


class TestDedupReportCsv:
    def test_csv_format(self, tmp_path):
        from sonoprep import DedupEntry

        report = DedupReport(
            entries=[
                DedupEntry(id="keep"),
                DedupEntry(id="drop", stage_dropped="visual", keeper_id="keep", similarity=0.987654321),
            ],
            threshold_vis=0.95,
            threshold_sem=0.9,
        )
        path = tmp_path / "report.csv"
        report.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "id,stage_dropped,keeper_id,similarity"
        assert lines[1] == "keep,none,,"
        assert lines[2] == "drop,visual,keep,0.987654"
        assert report.retained_fraction == pytest.approx(0.5)
