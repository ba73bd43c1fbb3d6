"""Feature embedders, normalization gradients, and the refresh cache."""

import numpy as np
import pytest

from topodistill.datatypes import Image
from topodistill.errors import DimensionMismatchError
from topodistill.features import (FeatureCache, class_mean_feature, embed, embed_vjp,
                                  embedder_from_spec, l2_normalize, l2_normalize_vjp,
                                  make_embedder)
from topodistill.oracle import finite_diff


class TestNormalize:
    def test_unit_norm_output(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            v = rng.standard_normal(6)
            out = l2_normalize(v)
            assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector_passes_through(self):
        z = np.zeros(4)
        assert np.array_equal(l2_normalize(z), z)

    def test_vjp_matches_finite_differences(self):
        rng = np.random.default_rng(17)
        worst = 0.0
        for _ in range(30):
            raw = rng.standard_normal(5)
            cot = rng.standard_normal(5)
            got = l2_normalize_vjp(raw, cot)

            def loss(x):
                return float(cot @ l2_normalize(x))

            want = finite_diff(loss, raw.copy(), step=1e-6)
            worst = max(worst, np.abs(got - want).max())
        assert worst < 1e-7


class TestEmbedders:
    def test_pixel_identity_is_flatten(self):
        emb = make_embedder("pixel-identity", (2, 3, 1), dim=6)
        pix = np.arange(6, dtype=float).reshape(2, 3, 1) / 10.0
        assert np.array_equal(embed(emb, pix), pix.ravel())

    def test_pixel_identity_dim_must_match(self):
        with pytest.raises(ValueError):
            make_embedder("pixel-identity", (2, 3, 1), dim=7)

    def test_random_projection_seed_determinism(self):
        a = make_embedder("random-projection-tanh", (3, 3, 1), dim=4, seed=5)
        b = make_embedder("random-projection-tanh", (3, 3, 1), dim=4, seed=5)
        c = make_embedder("random-projection-tanh", (3, 3, 1), dim=4, seed=6)
        pix = np.full((3, 3, 1), 0.3)
        assert np.array_equal(embed(a, pix), embed(b, pix))
        assert not np.array_equal(embed(a, pix), embed(c, pix))

    def test_random_projection_output_bounded(self):
        emb = make_embedder("random-projection-tanh", (4, 4, 1), dim=8, seed=0)
        rng = np.random.default_rng(1)
        for _ in range(10):
            z = embed(emb, rng.uniform(0, 1, (4, 4, 1)))
            assert np.abs(z).max() < 1.0

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            make_embedder("resnet", (2, 2, 1))

    def test_spec_round_trip(self):
        emb = make_embedder("random-projection-tanh", (3, 3, 1), dim=5, seed=2)
        again = embedder_from_spec(emb.spec(), (3, 3, 1))
        pix = np.full((3, 3, 1), 0.7)
        assert np.array_equal(embed(emb, pix), embed(again, pix))

    def test_spec_unknown_key_rejected(self):
        spec = {"kind": "pixel-identity", "dim": 4, "seed": 0, "bias": True}
        with pytest.raises(ValueError):
            embedder_from_spec(spec, (2, 2, 1))


class TestEmbedVjp:
    @pytest.mark.parametrize("kind", ["pixel-identity", "random-projection-tanh"])
    @pytest.mark.parametrize("normalize", [False, True])
    def test_matches_finite_differences(self, kind, normalize):
        shape = (3, 4, 1)
        dim = 12 if kind == "pixel-identity" else 5
        emb = make_embedder(kind, shape, dim=dim, seed=3)
        rng = np.random.default_rng(23)
        worst = 0.0
        for _ in range(15):
            pix = rng.uniform(0.1, 0.9, shape)
            cot = rng.standard_normal(dim)
            got = embed_vjp(emb, pix, cot, normalize=normalize)

            def loss(flat):
                return float(cot @ embed(emb, flat.reshape(shape), normalize=normalize))

            want = finite_diff(loss, pix.ravel().copy(), step=1e-6).reshape(shape)
            denom = max(np.abs(want).max(), 1e-12)
            worst = max(worst, np.abs(got - want).max() / denom)
        assert worst < 1e-6


class TestFeatureCache:
    def test_transparent_values(self):
        # cached result must equal a fresh embedding bit for bit
        emb = make_embedder("random-projection-tanh", (3, 3, 1), dim=4, seed=1)
        cache = FeatureCache(refresh_T=5)
        pix = np.full((3, 3, 1), 0.4)
        got = cache.get_or_embed(emb, ("syn", 0), pix, current_step=0)
        assert np.array_equal(got, embed(emb, pix))

    def test_serves_stale_within_refresh_window(self):
        emb = make_embedder("pixel-identity", (2, 2, 1), dim=4)
        cache = FeatureCache(refresh_T=3)
        first = np.full((2, 2, 1), 0.2)
        second = np.full((2, 2, 1), 0.8)
        z0 = cache.get_or_embed(emb, ("syn", 0), first, current_step=0)
        z1 = cache.get_or_embed(emb, ("syn", 0), second, current_step=2)
        assert np.array_equal(z0, z1)
        assert cache.hits == 1

    def test_recomputes_at_refresh_boundary(self):
        emb = make_embedder("pixel-identity", (2, 2, 1), dim=4)
        cache = FeatureCache(refresh_T=3)
        first = np.full((2, 2, 1), 0.2)
        second = np.full((2, 2, 1), 0.8)
        cache.get_or_embed(emb, ("syn", 0), first, current_step=0)
        z = cache.get_or_embed(emb, ("syn", 0), second, current_step=3)
        assert np.array_equal(z, embed(emb, second))
        assert cache.misses == 2

    def test_invalidate_forces_recompute(self):
        emb = make_embedder("pixel-identity", (2, 2, 1), dim=4)
        cache = FeatureCache(refresh_T=100)
        first = np.full((2, 2, 1), 0.2)
        second = np.full((2, 2, 1), 0.8)
        cache.get_or_embed(emb, ("syn", 1), first, current_step=0)
        cache.invalidate(("syn", 1))
        z = cache.get_or_embed(emb, ("syn", 1), second, current_step=1)
        assert np.array_equal(z, embed(emb, second))

    def test_clear_empties_cache(self):
        emb = make_embedder("pixel-identity", (2, 2, 1), dim=4)
        cache = FeatureCache(refresh_T=10)
        cache.get_or_embed(emb, ("syn", 0), np.zeros((2, 2, 1)), current_step=0)
        assert len(cache) == 1
        cache.clear()
        assert len(cache) == 0


def test_class_mean_feature_is_plain_average():
    emb = make_embedder("pixel-identity", (2, 2, 1), dim=4)
    rng = np.random.default_rng(9)
    images = [Image(rng.uniform(0, 1, (2, 2, 1))) for _ in range(4)]
    got = class_mean_feature(emb, images, [0, 2])
    want = (embed(emb, images[0].pixels) + embed(emb, images[2].pixels)) / 2.0
    assert np.allclose(got, want, atol=1e-15)
