import numpy as np
import pytest
from hypothesis import given, strategies as st

from ghostscatter.correlation import (AccumulatorMode, finalize_delta_g2, finalize_g2, merge,
                                      merge_tree, new_accumulator, reconstruct_anti_diagonal,
                                      reconstruct_bucket, shard_standard_error, update)
from ghostscatter.grid import IntensityFrame, flip_array, make_grid

G8 = make_grid(8, 1e-5)


def point_grid():
    return make_grid(8, 1e-5)


def test_empty_accumulator_cannot_finalize():
    for kind in ("outer-product", "anti-diagonal", "fixed-test-point", "bucket"):
        acc = new_accumulator(AccumulatorMode(kind), G8, G8)
        assert acc.n_frames == 0
        with pytest.raises(ValueError):
            finalize_delta_g2(acc)


def test_outer_product_store_shape():
    g = make_grid(256, 1e-5)
    acc = new_accumulator(AccumulatorMode("outer-product"), g, g)
    assert acc.sum_prod.shape == (256, 256)


def test_bucket_test_sum_is_scalar():
    acc = new_accumulator(AccumulatorMode("bucket"), G8)
    assert acc.sum_t.shape == (1,)


def test_outer_product_memory_budget():
    g = make_grid(256, 1e-5, 2)
    with pytest.raises(MemoryError):
        new_accumulator(AccumulatorMode("outer-product"), g, g)


def test_mode_validation():
    with pytest.raises(ValueError):
        AccumulatorMode("diagonal")
    with pytest.raises(ValueError):
        new_accumulator(AccumulatorMode("anti-diagonal"), G8, make_grid(16, 1e-5))
    with pytest.raises(ValueError):
        new_accumulator(AccumulatorMode("fixed-test-point", 1.0), G8, G8)


def test_single_frame_gives_zero_map():
    r = np.random.default_rng(0)
    acc = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    update(acc, r.random(8), r.random(8))
    assert not finalize_delta_g2(acc).any()


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.integers(2, 50))
def test_constant_frames_zero_covariance(c1, c2, n):
    acc = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    update(acc, np.full((n, 8), c1), np.full((n, 8), c2))
    assert np.all(np.abs(finalize_delta_g2(acc)) <= 1e-12 * max(1.0, c1 * c2))


def test_two_frame_hand_arithmetic():
    v = 3.0
    acc = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    frames = np.zeros((2, 8))
    frames[1, 4] = v
    update(acc, frames, frames)
    assert finalize_delta_g2(acc)[4, 4] == v * v / 4


N_THERMAL = 100_000


@pytest.fixture(scope="module")
def exponential_pair():
    r = np.random.default_rng(2024)
    a = r.exponential(1.0, (N_THERMAL, 8))
    b = r.exponential(1.0, (N_THERMAL, 8))
    return a, b


def test_same_frames_thermal_covariance(exponential_pair):
    a, _ = exponential_pair
    acc = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    update(acc, a, a)
    dg = finalize_delta_g2(acc)
    mean = a.mean(axis=0)
    # sample variance of unit exponential samples: asymptotic variance 8/N
    se = np.sqrt(8 / N_THERMAL)
    assert np.all(np.abs(np.diag(dg) / mean**2 - 1) < 3 * se * 1.05)


def test_same_point_g2_is_two(exponential_pair):
    a, _ = exponential_pair
    acc = new_accumulator(AccumulatorMode("fixed-test-point", 0.0), G8, G8)
    update(acc, a, a)
    g2 = finalize_g2(acc)
    assert abs(g2[G8.index_of(0.0)] - 2) < 0.05


def test_independent_arms(exponential_pair):
    a, b = exponential_pair
    acc = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    update(acc, a, b)
    dg = finalize_delta_g2(acc)
    assert np.all(np.abs(dg) < 3 * 1.05 / np.sqrt(N_THERMAL) * 1.5)
    g2 = finalize_g2(acc)
    assert np.all(np.abs(g2 - 1) < 0.02)


def test_g2_within_thermal_bounds(exponential_pair):
    a, b = exponential_pair
    acc = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    update(acc, a, np.concatenate([a[:, :4], b[:, 4:]], axis=1))
    g2 = finalize_g2(acc)
    eps = 5 * np.sqrt(8 / N_THERMAL)
    assert np.all(g2 >= 1 - eps) and np.all(g2 <= 2 + eps)


def test_g2_masks_dark_samples():
    acc = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    r = np.random.default_rng(3).random((10, 8))
    r[:, 2] = 0
    update(acc, r, r)
    g2 = finalize_g2(acc)
    assert g2.mask[2].all() and g2.mask[:, 2].all() and not g2.mask[0, 0]


def test_merge_identity_exact():
    r = np.random.default_rng(4)
    a = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    update(a, r.random((30, 8)), r.random((30, 8)))
    z = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    m = merge(a, z)
    for x, y in zip(m.totals(), a.totals()):
        np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(finalize_delta_g2(m), finalize_delta_g2(a))


@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(1, 40))
def test_merge_commutative_bitwise(seed, na, nb):
    r = np.random.default_rng(seed)
    mode = AccumulatorMode("anti-diagonal")
    a = update(new_accumulator(mode, G8, G8), r.exponential(1, (na, 8)), r.exponential(1, (na, 8)))
    b = update(new_accumulator(mode, G8, G8), r.exponential(9, (nb, 8)), r.exponential(9, (nb, 8)))
    ab, ba = merge(a, b), merge(b, a)
    for x, y in zip(ab.totals(), ba.totals()):
        np.testing.assert_array_equal(x, y)
    assert ab.n_frames == ba.n_frames == na + nb


def test_merge_rejects_incompatible():
    a = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    b = new_accumulator(AccumulatorMode("anti-diagonal"), G8, G8)
    with pytest.raises(ValueError):
        merge(a, b)


@pytest.mark.parametrize("kind", ["outer-product", "anti-diagonal", "fixed-test-point", "bucket"])
def test_shards_match_single_pass(kind):
    r = np.random.default_rng(5)
    n = 10_000
    ir = r.exponential(1.0, (n, 8)) * 1e3
    it = ir * 0.5 + r.exponential(1.0, (n, 8)) * 1e3
    tobs = it.sum(axis=1) if kind == "bucket" else it
    mode = AccumulatorMode(kind)
    single = update(new_accumulator(mode, G8, G8), ir, tobs)
    shards = []
    for s in range(8):
        idx = np.arange(s, n, 8)
        shards.append(update(new_accumulator(mode, G8, G8), ir[idx], tobs[idx]))
    a, b = finalize_delta_g2(single), finalize_delta_g2(merge_tree(shards))
    assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(a))


def test_frame_by_frame_equals_batch():
    r = np.random.default_rng(6)
    ir, it = r.random((50, 8)), r.random((50, 8))
    mode = AccumulatorMode("outer-product")
    batch = update(new_accumulator(mode, G8, G8), ir, it)
    single = new_accumulator(mode, G8, G8)
    for a, b in zip(ir, it):
        update(single, IntensityFrame(G8, a), IntensityFrame(G8, b))
    np.testing.assert_allclose(finalize_delta_g2(single), finalize_delta_g2(batch), rtol=1e-13)


def test_anti_diagonal_is_outer_product_mirror():
    r = np.random.default_rng(7)
    g = make_grid(16, 1e-5)
    ir, it = r.exponential(1, (200, 16)), r.exponential(1, (200, 16))
    it = it + np.roll(ir[:, ::-1], 1, axis=1)
    outer = finalize_delta_g2(update(new_accumulator(AccumulatorMode("outer-product"), g, g), ir, it))
    anti = reconstruct_anti_diagonal(
        update(new_accumulator(AccumulatorMode("anti-diagonal"), g, g), ir, it))
    mirror = (g.n - np.arange(g.n)) % g.n
    np.testing.assert_allclose(anti, outer[np.arange(g.n), mirror], rtol=1e-12, atol=1e-14)


def test_anti_diagonal_2d():
    r = np.random.default_rng(8)
    g = make_grid(8, 1e-5, 2)
    ir = r.exponential(1, (100, 8, 8))
    it = flip_array(ir, 2)
    anti = reconstruct_anti_diagonal(
        update(new_accumulator(AccumulatorMode("anti-diagonal"), g, g), ir, it))
    np.testing.assert_allclose(anti, ir.var(axis=0), rtol=1e-10)


def test_fixed_point_scalar_and_frames_agree():
    r = np.random.default_rng(9)
    ir, it = r.random((40, 8)), r.random((40, 8))
    mode = AccumulatorMode("fixed-test-point", 2e-5)
    j = G8.index_of(2e-5)
    a = update(new_accumulator(mode, G8, G8), ir, it)
    b = update(new_accumulator(mode, G8, G8), ir, it[:, j])
    np.testing.assert_array_equal(finalize_delta_g2(a), finalize_delta_g2(b))
    outer = finalize_delta_g2(update(new_accumulator(AccumulatorMode("outer-product"), G8, G8), ir, it))
    np.testing.assert_allclose(finalize_delta_g2(a), outer[:, j], rtol=1e-12)


def test_bucket_uniform_and_opaque_objects():
    r = np.random.default_rng(10)
    g = make_grid(64, 1e-5)
    ir = r.exponential(1.0, (20_000, 64))
    uniform = update(new_accumulator(AccumulatorMode("bucket"), g), ir, ir.sum(axis=1) * g.pitch)
    img = reconstruct_bucket(uniform)
    # every reference sample shares the same variance with the total: flat within noise
    assert np.std(img) / np.mean(img) < 5 * np.sqrt(8 / 20_000)
    opaque = update(new_accumulator(AccumulatorMode("bucket"), g), ir, np.zeros(20_000))
    assert not reconstruct_bucket(opaque).any()


def test_reconstruct_checks_mode_and_count():
    acc = new_accumulator(AccumulatorMode("bucket"), G8)
    with pytest.raises(ValueError):
        reconstruct_anti_diagonal(acc)
    update(acc, np.ones(8), 1.0)
    with pytest.raises(ValueError):
        reconstruct_bucket(acc)


def test_update_rejects_mismatched_frames():
    acc = new_accumulator(AccumulatorMode("outer-product"), G8, G8)
    with pytest.raises(ValueError):
        update(acc, np.ones((3, 8)), np.ones((2, 8)))
    with pytest.raises(ValueError):
        update(acc, np.ones(9), np.ones(8))


def test_shard_standard_error_equal_shards():
    r = np.random.default_rng(11)
    mode = AccumulatorMode("bucket")
    shards = [update(new_accumulator(mode, G8), r.random((100, 8)), r.random(100)) for _ in range(5)]
    maps = np.stack([finalize_delta_g2(s) for s in shards])
    expected = maps.std(axis=0, ddof=1) / np.sqrt(5)
    np.testing.assert_allclose(shard_standard_error(shards), expected, rtol=1e-12)
    with pytest.raises(ValueError):
        shard_standard_error(shards[:1])
