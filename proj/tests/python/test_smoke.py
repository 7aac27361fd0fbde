import numpy as np
import pytest

import lida


def test_fingerprint_matches_low_bits():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(40, 48, 3), dtype=np.uint8)
    fp = lida.fingerprint(img)
    assert fp.shape == img.shape
    assert np.array_equal(fp, np.where(img % 8 != 0, 255, 0).astype(np.uint8))


def test_bad_shape_raises():
    with pytest.raises(lida.LidaError):
        lida.fingerprint(np.zeros((40, 40), dtype=np.uint8))


def test_degrade_zero_is_identity():
    img = lida.synthesize(real_per_class=1, fake_per_class=0, seed=3, image_side=48)[0][0]
    assert np.array_equal(lida.degrade(img, 0.0), img)


def test_image_round_trip(tmp_path):
    img = lida.synthesize(real_per_class=1, fake_per_class=0, seed=4, image_side=40)[0][0]
    lida.write_image(img, tmp_path / "a.png")
    assert np.array_equal(lida.read_image(tmp_path / "a.png"), img)


def test_pipeline(tmp_path):
    corpus = lida.synthesize(real_per_class=4, fake_per_class=0, seed=1, image_side=48)
    fps = [lida.fingerprint(img) for img, _, _ in corpus]
    ckpt, acc = lida.pretrain(lida.Encoder(seed=1), fps, [c for _, _, c in corpus], lr=1e-3, epochs=1, batch_size=4, seed=1)
    assert 0.0 <= acc <= 100.0
    assert len(ckpt.prototype) == 64

    exemplars = lida.synthesize(real_per_class=0, fake_per_class=1, seed=2, image_side=48)
    reg = lida.Registry()
    ex_fps = []
    for img, label, _ in exemplars:
        fp = lida.fingerprint(img)
        ex_fps.append(fp)
        reg.add(label, ckpt.encoder.encode(fp))
    assert sorted(reg.labels()) == sorted(lida.generator_names())

    top = lida.attribute(ex_fps[0], reg, ckpt.encoder, k=3)
    assert top[0][1] == exemplars[0][1]
    assert top[0][2] == pytest.approx(1.0)
    assert [t[2] for t in top] == sorted((t[2] for t in top), reverse=True)

    reg.save(tmp_path / "reg.bin")
    ckpt.save(tmp_path / "enc.bin")
    again = lida.Registry.load(tmp_path / "reg.bin")
    assert len(again) == len(reg)
    loaded = lida.Checkpoint.load(tmp_path / "enc.bin")
    assert loaded.encoder.encode(ex_fps[1]) == ckpt.encoder.encode(ex_fps[1])

    adapted, reg2 = lida.adapt(ckpt, reg, ex_fps, fps[: len(ex_fps)], lr=1e-3, epochs=1, batch_size=8, seed=1)
    assert len(reg2) == len(reg)
    report = lida.evaluate(adapted.encoder, reg2, ex_fps, [label for _, label, _ in exemplars])
    assert report["queries"] == len(ex_fps)
    assert report["rank1"] == pytest.approx(100.0)

    is_real, sim = lida.detect(fps[0], ckpt.prototype, ckpt.encoder)
    assert -1.0 <= sim <= 1.0


def test_corrupt_registry(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"not a registry")
    with pytest.raises(lida.CorruptFile):
        lida.Registry.load(bad)


def test_adapt_requires_prototype():
    ckpt = lida.Checkpoint(lida.Encoder())
    with pytest.raises(lida.NotPretrained):
        lida.adapt(ckpt, lida.Registry(), [], [])
