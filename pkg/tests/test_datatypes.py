"""Core value types: images, datasets, synthetic sets, run configuration."""

import numpy as np
import pytest

from topodistill.datatypes import (Image, LabeledDataset, RunConfig, SyntheticSet,
                                   config_from_dict, config_to_dict, new_synthetic_set)
from topodistill.errors import (DimensionMismatchError, EmptyClassError,
                                InsufficientRealImagesError)


def make_dataset(per_class, class_count=2, side=4, seed=0):
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c in range(class_count):
        for _ in range(per_class):
            images.append(Image(rng.uniform(0, 1, (side, side, 1))))
            labels.append(c)
    return LabeledDataset(images=images, labels=labels, class_count=class_count)


class TestImage:
    def test_pixels_clamped_at_construction(self):
        img = Image(np.array([[-0.5, 0.3], [1.7, 1.0]]))
        assert img.pixels.min() == 0.0
        assert img.pixels.max() == 1.0
        assert img.pixels[0, 1, 0] == pytest.approx(0.3)

    def test_2d_input_promoted_to_single_channel(self):
        img = Image(np.zeros((3, 5)))
        assert img.shape == (3, 5, 1)
        assert (img.height, img.width, img.channels) == (3, 5, 1)

    def test_pixel_array_is_read_only(self):
        img = Image(np.zeros((2, 2, 1)))
        with pytest.raises(ValueError):
            img.pixels[0, 0, 0] = 0.5

    def test_rejects_non_image_shapes(self):
        with pytest.raises(DimensionMismatchError):
            Image(np.zeros(4))
        with pytest.raises(DimensionMismatchError):
            Image(np.zeros((2, 0, 1)))

    def test_equality_is_pixelwise(self):
        a = Image(np.full((2, 2, 1), 0.25))
        b = Image(np.full((2, 2, 1), 0.25))
        c = Image(np.full((2, 2, 1), 0.26))
        assert a == b
        assert a != c


class TestLabeledDataset:
    def test_length_mismatch_rejected(self):
        img = Image(np.zeros((2, 2, 1)))
        with pytest.raises(DimensionMismatchError):
            LabeledDataset(images=[img, img], labels=[0], class_count=1)

    def test_out_of_range_label_rejected(self):
        img = Image(np.zeros((2, 2, 1)))
        with pytest.raises(EmptyClassError):
            LabeledDataset(images=[img], labels=[2], class_count=2)

    def test_every_class_needs_an_image(self):
        img = Image(np.zeros((2, 2, 1)))
        with pytest.raises(EmptyClassError):
            LabeledDataset(images=[img], labels=[0], class_count=2)

    def test_class_indices(self):
        data = make_dataset(per_class=3, class_count=2)
        assert data.class_indices(0) == [0, 1, 2]
        assert data.class_indices(1) == [3, 4, 5]


class TestSyntheticSet:
    def test_labels_must_be_contiguous_class_blocks(self):
        img = Image(np.zeros((2, 2, 1)))
        with pytest.raises(DimensionMismatchError):
            SyntheticSet(images=[img, img], labels=[1, 0], ipc=1)

    def test_class_slice_layout(self):
        img = Image(np.zeros((2, 2, 1)))
        syn = SyntheticSet(images=[img] * 6, labels=[0, 0, 1, 1, 2, 2], ipc=2)
        assert syn.class_count == 3
        assert syn.class_slice(1) == slice(2, 4)

    def test_replace_pixels_clamps(self):
        img = Image(np.full((2, 2, 1), 0.5))
        syn = SyntheticSet(images=[img], labels=[0], ipc=1)
        syn.replace_pixels(np.full((1, 2, 2, 1), 3.0))
        assert syn.images[0].pixels.max() == 1.0

    def test_replace_pixels_checks_count(self):
        img = Image(np.zeros((2, 2, 1)))
        syn = SyntheticSet(images=[img, img], labels=[0, 1], ipc=1)
        with pytest.raises(DimensionMismatchError):
            syn.replace_pixels(np.zeros((3, 2, 2, 1)))


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.alpha == 0.5
        assert cfg.lambda_fit == 0.1
        assert cfg.lambda_topo == 0.5
        assert cfg.gamma_loop == 1.0
        assert cfg.k_nn == 10
        assert cfg.pi_grid == 32
        assert cfg.n_c == 64
        assert cfg.sigma_smooth == 1.0
        assert cfg.sigma_pi == 0.05
        assert cfg.beta_align == 1.0
        assert cfg.learn_rate == 0.25
        assert cfg.adam_betas == (0.5, 0.9)

    def test_block_steps_floor_division(self):
        cfg = RunConfig(budget_B=300, residual_blocks_k=3)
        assert cfg.block_steps() == 75
        cfg = RunConfig(budget_B=10, residual_blocks_k=2)
        assert cfg.block_steps() == 3

    def test_every_block_needs_a_step(self):
        with pytest.raises(ValueError):
            RunConfig(budget_B=3, residual_blocks_k=3)

    @pytest.mark.parametrize("field,value", [
        ("alpha", 1.5), ("lambda_fit", -0.1), ("lambda_topo", -1.0),
        ("gamma_loop", 0.0), ("k_nn", 0), ("refresh_T", 0),
        ("sigma_pi", 0.0), ("learn_rate", 0.0), ("ipc", 0),
        ("init_mode", "copy"), ("topo_cadence", "sometimes"),
        ("alpha", float("nan")),
    ])
    def test_invalid_values_rejected(self, field, value):
        with pytest.raises(ValueError):
            RunConfig(**{field: value})

    def test_dict_round_trip(self):
        cfg = RunConfig(alpha=0.25, budget_B=40, residual_blocks_k=1,
                        adam_betas=(0.4, 0.8), seed=9)
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_dict_round_trip_random_configs(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            cfg = RunConfig(
                alpha=float(rng.uniform(0, 1)),
                lambda_fit=float(rng.uniform(0, 1)),
                lambda_topo=float(rng.uniform(0, 2)),
                budget_B=int(rng.integers(4, 50)),
                residual_blocks_k=int(rng.integers(0, 4)),
                refresh_T=int(rng.integers(1, 10)),
                seed=int(rng.integers(0, 1000)),
            )
            assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_unknown_key_rejected(self):
        payload = config_to_dict(RunConfig())
        payload["lamda_fit"] = 0.2
        with pytest.raises(ValueError):
            config_from_dict(payload)


class TestNewSyntheticSet:
    def test_real_copy_takes_first_per_class(self):
        data = make_dataset(per_class=3, class_count=3)
        syn = new_synthetic_set(data, ipc=1, init_mode="real-copy")
        assert len(syn.images) == 3
        for c in range(3):
            first = data.images[data.class_indices(c)[0]]
            assert syn.images[c] == first

    def test_noise_init_is_seed_deterministic(self):
        data = make_dataset(per_class=2, class_count=2)
        a = new_synthetic_set(data, ipc=2, init_mode="noise", seed=7)
        b = new_synthetic_set(data, ipc=2, init_mode="noise", seed=7)
        for x, y in zip(a.images, b.images):
            assert np.array_equal(x.pixels, y.pixels)
        c = new_synthetic_set(data, ipc=2, init_mode="noise", seed=8)
        assert not np.array_equal(a.images[0].pixels, c.images[0].pixels)

    def test_real_copy_needs_enough_images(self):
        rng = np.random.default_rng(0)
        images = [Image(rng.uniform(0, 1, (2, 2, 1))) for _ in range(3)]
        data = LabeledDataset(images=images, labels=[0, 1, 1], class_count=2)
        with pytest.raises(InsufficientRealImagesError):
            new_synthetic_set(data, ipc=2, init_mode="real-copy")
