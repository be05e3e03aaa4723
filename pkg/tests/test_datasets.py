"""Tests for manifest loading, splits, the store, and synthetic data."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from imil.datasets import (
    LabeledImage,
    SyntheticSpec,
    TrainingStore,
    encode_png,
    generate_synthetic,
    load_manifest,
    replace_sample,
    save_store,
    split_dataset,
    to_png_image,
)
from imil.exceptions import LoadError, NotFoundError, ValidationError

from .oracles import stratified_counts_reference


def make_store(n0=3, n1=3, size=8, seed=0):
    rng = np.random.default_rng(seed)
    samples = [
        LabeledImage(id=f"s{i}", pixels=rng.random((size, size)), label=i % 2)
        for i in range(n0 + n1)
    ]
    return TrainingStore(samples)


def write_dataset(tmp_path, rows, size=10):
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    lines = ["id,filepath,label"]
    for sample_id, label in rows:
        arr = (np.random.default_rng(hash(sample_id) % 1000).random((size, size)) * 255).astype(
            np.uint8
        )
        Image.fromarray(arr, mode="L").save(img_dir / f"{sample_id}.png")
        lines.append(f"{sample_id},{sample_id}.png,{label}")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest, img_dir


class TestTrainingStore:
    def test_order_and_lookup(self):
        store = make_store()
        assert store.ids() == [f"s{i}" for i in range(6)]
        assert store.get("s2").label == 0
        assert "s3" in store
        assert "nope" not in store

    def test_duplicate_id_rejected(self):
        img = np.zeros((4, 4))
        with pytest.raises(ValidationError):
            TrainingStore([LabeledImage("a", img, 0), LabeledImage("a", img, 1)])

    def test_unknown_id_raises(self):
        with pytest.raises(NotFoundError):
            make_store().get("missing")

    def test_replace_updates_pixels_and_flag(self):
        store = make_store()
        new = np.zeros((8, 8))
        replace_sample(store, "s1", new)
        got = store.get("s1")
        np.testing.assert_array_equal(got.pixels, new)
        assert got.replaced is True
        assert store.get("s0").replaced is False

    def test_replace_preserves_order_and_label(self):
        store = make_store()
        label_before = store.get("s1").label
        store.replace("s1", np.zeros((8, 8)))
        assert store.ids()[1] == "s1"
        assert store.get("s1").label == label_before

    def test_replace_shape_mismatch_rejected(self):
        store = make_store()
        with pytest.raises(ValidationError):
            store.replace("s1", np.zeros((9, 9)))

    def test_replace_out_of_range_pixels_rejected(self):
        store = make_store()
        with pytest.raises(ValidationError):
            store.replace("s1", np.full((8, 8), 2.0))

    def test_replace_copies_input(self):
        store = make_store()
        new = np.zeros((8, 8))
        store.replace("s1", new)
        new[0, 0] = 0.5
        assert store.get("s1").pixels[0, 0] == 0.0

    def test_snapshot_is_independent(self):
        store = make_store()
        snap = store.snapshot()
        store.replace("s0", np.zeros((8, 8)))
        assert snap.get("s0").replaced is False
        assert snap.get("s0").pixels.max() > 0

    def test_labels_and_pixel_array(self):
        store = make_store()
        np.testing.assert_array_equal(store.labels(), [0, 1, 0, 1, 0, 1])
        assert store.pixel_array().shape == (6, 8, 8)

    def test_bad_label_rejected(self):
        with pytest.raises(ValidationError):
            LabeledImage("x", np.zeros((4, 4)), 2)


class TestLoadManifest:
    def test_round_trip(self, tmp_path):
        manifest, img_dir = write_dataset(tmp_path, [("a", 0), ("b", 1), ("c", 0)])
        store = load_manifest(manifest, img_dir, image_size=10)
        assert store.ids() == ["a", "b", "c"]
        assert store.labels().tolist() == [0, 1, 0]
        assert store.get("a").pixels.shape == (10, 10)
        assert 0.0 <= store.get("a").pixels.min() <= store.get("a").pixels.max() <= 1.0

    def test_resizes_to_target(self, tmp_path):
        manifest, img_dir = write_dataset(tmp_path, [("a", 0)], size=20)
        store = load_manifest(manifest, img_dir, image_size=12)
        assert store.get("a").pixels.shape == (12, 12)

    def test_color_images_keep_channels(self, tmp_path):
        img_dir = tmp_path / "imgs"
        img_dir.mkdir()
        arr = np.zeros((10, 10, 3), dtype=np.uint8)
        arr[..., 0] = 255
        Image.fromarray(arr, mode="RGB").save(img_dir / "c.png")
        (tmp_path / "manifest.csv").write_text("id,filepath,label\nc,c.png,1\n")
        store = load_manifest(tmp_path / "manifest.csv", img_dir, image_size=10)
        assert store.get("c").pixels.shape == (10, 10, 3)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(LoadError):
            load_manifest(tmp_path / "nope.csv", tmp_path)

    def test_missing_image_file(self, tmp_path):
        (tmp_path / "manifest.csv").write_text("id,filepath,label\na,gone.png,0\n")
        with pytest.raises(LoadError):
            load_manifest(tmp_path / "manifest.csv", tmp_path)

    def test_bad_header(self, tmp_path):
        (tmp_path / "manifest.csv").write_text("name,path\nx,y\n")
        with pytest.raises(ValidationError):
            load_manifest(tmp_path / "manifest.csv", tmp_path)

    def test_bad_label(self, tmp_path):
        manifest, img_dir = write_dataset(tmp_path, [("a", 0)])
        manifest.write_text("id,filepath,label\na,a.png,7\n")
        with pytest.raises(ValidationError):
            load_manifest(manifest, img_dir, image_size=10)

    def test_duplicate_id(self, tmp_path):
        manifest, img_dir = write_dataset(tmp_path, [("a", 0)])
        manifest.write_text("id,filepath,label\na,a.png,0\na,a.png,1\n")
        with pytest.raises(ValidationError):
            load_manifest(manifest, img_dir, image_size=10)


class TestSplitDataset:
    def test_split_sizes_and_stratification(self):
        store = make_store(n0=10, n1=10)
        train, test = split_dataset(store, 0.8, seed=0)
        assert len(train) == 16
        assert len(test) == 4
        assert train.labels().sum() == 8
        assert test.labels().sum() == 2

    def test_disjoint_and_complete(self):
        store = make_store(n0=7, n1=7)
        train, test = split_dataset(store, 0.6, seed=3)
        assert set(train.ids()) | set(test.ids()) == set(store.ids())
        assert set(train.ids()) & set(test.ids()) == set()

    def test_deterministic_per_seed(self):
        store = make_store(n0=10, n1=10)
        a, _ = split_dataset(store, 0.8, seed=5)
        b, _ = split_dataset(store, 0.8, seed=5)
        c, _ = split_dataset(store, 0.8, seed=6)
        assert a.ids() == b.ids()
        assert a.ids() != c.ids()

    def test_split_copies_pixels(self):
        store = make_store()
        train, test = split_dataset(store, 0.5, seed=0)
        sub = train if "s0" in train else test
        store.replace("s0", np.zeros((8, 8)))
        assert sub.get("s0").pixels.max() > 0

    def test_fraction_bounds(self):
        store = make_store()
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValidationError):
                split_dataset(store, bad, seed=0)

    def test_tiny_class_rejected(self):
        samples = [
            LabeledImage("a", np.zeros((4, 4)), 0),
            LabeledImage("b", np.zeros((4, 4)), 0),
            LabeledImage("c", np.zeros((4, 4)), 1),
        ]
        with pytest.raises(ValidationError):
            split_dataset(TrainingStore(samples), 0.5, seed=0)

    @given(
        n0=st.integers(2, 40),
        n1=st.integers(2, 40),
        frac_pct=st.integers(10, 90),
        seed=st.integers(0, 1000),
    )
    @settings(max_examples=100, deadline=None)
    def test_counts_follow_largest_remainder(self, n0, n1, frac_pct, seed):
        fraction = frac_pct / 100
        want = stratified_counts_reference([n0, n1], fraction)
        if not all(0 < w < n for w, n in zip(want, (n0, n1))):
            return  # degenerate target; split would empty a class slice
        store = make_store(n0=0, n1=0)
        samples = [
            LabeledImage(f"a{i}", np.zeros((4, 4)), 0) for i in range(n0)
        ] + [LabeledImage(f"b{i}", np.zeros((4, 4)), 1) for i in range(n1)]
        store = TrainingStore(samples)
        train, _ = split_dataset(store, fraction, seed=seed)
        got = [int((train.labels() == 0).sum()), int((train.labels() == 1).sum())]
        assert got == want


class TestSynthetic:
    def spec(self, **kw):
        base = dict(
            n_per_class=5,
            signal_region=(7, 7, 14, 14),
            spurious_region=(21, 21, 28, 28),
            spurious_train_correlation=1.0,
            spurious_test_correlation=0.0,
            seed=9,
            image_size=28,
        )
        base.update(kw)
        return SyntheticSpec(**base)

    def test_shapes_and_counts(self):
        train, test = generate_synthetic(self.spec())
        assert len(train) == 10
        assert len(test) == 4  # defaults to n_per_class // 2 per class
        assert train.get(train.ids()[0]).pixels.shape == (28, 28)

    def test_explicit_test_count(self):
        _, test = generate_synthetic(self.spec(n_test_per_class=3))
        assert len(test) == 6

    def test_signal_block_only_on_class_one(self):
        train, _ = generate_synthetic(self.spec(noise_std=0.0))
        for s in train:
            block = s.pixels[7:14, 7:14]
            target = 0.6 if s.label == 1 else 0.1
            np.testing.assert_allclose(block, target, atol=1 / 255)

    def test_marker_follows_correlation(self):
        train, test = generate_synthetic(self.spec(n_per_class=20))
        for s in train:  # correlation 1.0: marker iff class 1
            has_marker = s.pixels[21:28, 21:28].mean() > 0.9
            assert has_marker == (s.label == 1)
        for s in test:  # correlation 0.0: marker iff class 0
            has_marker = s.pixels[21:28, 21:28].mean() > 0.9
            assert has_marker == (s.label == 0)

    def test_deterministic_per_seed(self):
        # noise makes the pixels actually depend on the generator stream
        a_train, a_test = generate_synthetic(self.spec(noise_std=0.05))
        b_train, b_test = generate_synthetic(self.spec(noise_std=0.05))
        np.testing.assert_array_equal(a_train.pixel_array(), b_train.pixel_array())
        np.testing.assert_array_equal(a_test.pixel_array(), b_test.pixel_array())
        c_train, _ = generate_synthetic(self.spec(noise_std=0.05, seed=10))
        assert not np.array_equal(a_train.pixel_array(), c_train.pixel_array())

    def test_pixels_on_8bit_lattice(self):
        train, _ = generate_synthetic(self.spec(noise_std=0.05))
        arr = train.pixel_array()
        np.testing.assert_allclose(arr * 255, np.round(arr * 255), atol=1e-9)
        assert arr.min() >= 0.0 and arr.max() <= 1.0

    def test_meta_carries_regions(self):
        train, test = generate_synthetic(self.spec())
        assert train.meta["signal_region"] == [7, 7, 14, 14]
        assert test.meta["spurious_region"] == [21, 21, 28, 28]

    def test_overlapping_regions_rejected(self):
        with pytest.raises(ValidationError):
            self.spec(signal_region=(7, 7, 22, 22))

    def test_region_outside_image_rejected(self):
        with pytest.raises(ValidationError):
            self.spec(spurious_region=(21, 21, 30, 30))

    def test_bad_correlation_rejected(self):
        with pytest.raises(ValidationError):
            self.spec(spurious_train_correlation=1.5)


class TestPngRoundTrip:
    def test_store_survives_save_and_reload(self, tmp_path):
        train, _ = generate_synthetic(
            SyntheticSpec(
                n_per_class=3,
                signal_region=(7, 7, 14, 14),
                spurious_region=(21, 21, 28, 28),
                spurious_train_correlation=1.0,
                spurious_test_correlation=0.0,
                seed=2,
                noise_std=0.05,
            )
        )
        manifest = save_store(train, tmp_path / "out")
        loaded = load_manifest(manifest, tmp_path / "out", image_size=28)
        assert loaded.ids() == train.ids()
        np.testing.assert_array_equal(loaded.pixel_array(), train.pixel_array())

    def test_encode_png_deterministic(self, rng):
        x = np.round(rng.random((16, 16)) * 255) / 255
        assert encode_png(x) == encode_png(x)

    def test_to_png_image_modes(self, rng):
        assert to_png_image(rng.random((8, 8))).mode == "L"
        assert to_png_image(rng.random((8, 8, 3))).mode == "RGB"
