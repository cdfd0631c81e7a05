import sys
from pathlib import Path

import numpy as np
import pytest

from cfgpatch.errors import (
    ClassCountMismatchError,
    MalformedResponseError,
    ScorerTimeoutError,
    ShapeError,
    TransportError,
)
from cfgpatch import wire
from cfgpatch.victim import (
    RemoteScorer,
    ToyScorer,
    ToyVictim,
    area_resample,
    toy_score,
)

SERVER = str(Path(__file__).parent / "toy_server.py")


def naive_area_resample(image, height, width):
    """Loop-based fractional-overlap downsample, independent of the library."""
    src_h, src_w, channels = image.shape
    out = np.zeros((height, width, channels))
    for i in range(height):
        lo_r, hi_r = i * src_h / height, (i + 1) * src_h / height
        for j in range(width):
            lo_c, hi_c = j * src_w / width, (j + 1) * src_w / width
            acc = np.zeros(channels)
            for r in range(int(np.floor(lo_r)), int(np.ceil(hi_r))):
                for c in range(int(np.floor(lo_c)), int(np.ceil(hi_c))):
                    wr = min(hi_r, r + 1) - max(lo_r, r)
                    wc = min(hi_c, c + 1) - max(lo_c, c)
                    if wr > 0 and wc > 0:
                        acc += wr * wc * image[r, c]
            out[i, j] = acc / ((hi_r - lo_r) * (hi_c - lo_c))
    return out


class TestToyScore:
    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(11)
        victim = ToyVictim.random(5, 6)
        image = rng.uniform(size=(48, 56, 3))
        small = naive_area_resample(image, 32, 32).ravel()
        expected = victim.templates_vis @ (small / np.linalg.norm(small))
        assert np.allclose(toy_score(image, "vis", victim), expected, atol=1e-9)

    def test_resample_matches_naive(self):
        rng = np.random.default_rng(4)
        image = rng.uniform(size=(40, 72, 2))
        fast = area_resample(image, 32, 32)
        slow = naive_area_resample(image, 32, 32)
        assert np.allclose(fast, slow, atol=1e-10)

    def test_template_image_scores_one(self):
        victim = ToyVictim.random(2, 5)
        template = victim.templates_vis[3].reshape(32, 32, 3)
        # Upsample by pixel repetition; area-average undoes it exactly.
        big = np.repeat(np.repeat(template, 2, axis=0), 2, axis=1)
        scores = toy_score(big, "vis", victim)
        assert scores[3] == pytest.approx(1.0, abs=1e-6)
        assert int(np.argmax(scores)) == 3

    def test_all_zero_image_scores_zero(self):
        victim = ToyVictim.random(0, 4)
        scores = toy_score(np.zeros((32, 32, 1)), "ir", victim)
        assert np.array_equal(scores, np.zeros(4))

    def test_channel_mismatch(self):
        victim = ToyVictim.random(0, 4)
        with pytest.raises(ShapeError):
            toy_score(np.zeros((32, 32, 1)), "vis", victim)
        with pytest.raises(ShapeError):
            toy_score(np.zeros((32, 32, 3)), "ir", victim)

    def test_scores_in_cosine_range(self):
        rng = np.random.default_rng(9)
        victim = ToyVictim.random(1, 8)
        for _ in range(5):
            scores = toy_score(rng.uniform(size=(64, 64, 3)), "vis", victim)
            assert np.all(scores >= -1.0 - 1e-12)
            assert np.all(scores <= 1.0 + 1e-12)

    def test_deterministic_and_picklable(self):
        import pickle
        victim = ToyVictim.random(3, 4)
        clone = pickle.loads(pickle.dumps(victim))
        image = np.random.default_rng(0).uniform(size=(32, 32, 3))
        assert np.array_equal(toy_score(image, "vis", victim),
                              toy_score(image, "vis", clone))

    def test_save_load_roundtrip(self, tmp_path):
        victim = ToyVictim.random(7, 5)
        victim.save(tmp_path / "victim.npz")
        loaded = ToyVictim.load(tmp_path / "victim.npz")
        assert np.array_equal(victim.templates_vis, loaded.templates_vis)
        assert np.array_equal(victim.templates_ir, loaded.templates_ir)
        assert loaded.seed == 7


class TestWireCodec:
    def test_conformance_vectors_roundtrip(self):
        vectors = Path("src/cfgpatch/data/protocol_vectors.jsonl").read_bytes()
        for line in vectors.splitlines(keepends=True):
            assert wire.encode_message(wire.decode_message(line)) == line

    def test_request_image_roundtrip_on_8bit_grid(self):
        rng = np.random.default_rng(2)
        image = rng.integers(0, 256, size=(5, 7, 3)).astype(np.float64) / 255.0
        request = wire.score_request(3, "vis", image)
        decoded, modality, request_id = wire.image_from_request(request)
        assert modality == "vis" and request_id == 3
        assert np.array_equal(decoded, image)

    def test_bad_payload_length(self):
        request = wire.score_request(0, "ir", np.zeros((4, 4, 1)))
        request["width"] = 5
        with pytest.raises(MalformedResponseError):
            wire.image_from_request(request)

    def test_unparseable_line(self):
        with pytest.raises(MalformedResponseError):
            wire.decode_message(b"not json\n")


def spawn(*flags, timeout=30.0, classes=4):
    command = [sys.executable, SERVER, "--seed", "0",
               "--classes", str(classes), *flags]
    return RemoteScorer.spawn(command, timeout=timeout)


class TestRemoteScorer:
    def test_loopback_matches_in_process(self):
        victim = ToyVictim.random(0, 4)
        scorer = spawn()
        try:
            assert scorer.describe().class_count == 4
            rng = np.random.default_rng(1)
            for _ in range(5):
                image = rng.integers(0, 256, size=(32, 32, 3)) / 255.0
                remote = scorer.score(image, "vis")
                local = toy_score(image, "vis", victim)
                assert np.allclose(remote, local, atol=1e-6)
        finally:
            scorer.close()

    def test_wrong_id_is_protocol_error(self):
        scorer = spawn("--wrong-id")
        try:
            with pytest.raises(MalformedResponseError):
                scorer.score(np.zeros((16, 16, 3)), "vis")
        finally:
            scorer.close()

    def test_class_count_mismatch(self):
        scorer = spawn("--short-scores")
        try:
            with pytest.raises(ClassCountMismatchError):
                scorer.score(np.zeros((16, 16, 3)), "vis")
        finally:
            scorer.close()

    def test_timeout(self):
        scorer = spawn("--stall", timeout=0.5)
        try:
            with pytest.raises(ScorerTimeoutError):
                scorer.score(np.zeros((16, 16, 3)), "vis")
        finally:
            scorer.close()

    def test_handshake_refusal(self):
        with pytest.raises(TransportError):
            spawn("--refuse")

    def test_dead_command(self):
        with pytest.raises(TransportError):
            RemoteScorer.spawn(["/nonexistent/scorer"], timeout=1.0)


def test_toy_scorer_descriptor():
    scorer = ToyScorer(victim=ToyVictim.random(0, 9))
    desc = scorer.describe()
    assert desc.kind == "toy" and desc.class_count == 9 and desc.concurrent
