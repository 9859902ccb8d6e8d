import numpy as np
import pytest

from mvfi.core_types import FlowField, Image
from mvfi.errors import InvalidInput
from mvfi.mv_ingest import BlockVector
from mvfi.prealign import (SmoothingProfile, box_filter_flow,
                           downsample_flow_nearest, gaussian_blur_flow,
                           gaussian_taps, median_filter_flow, obmc_warp,
                           prealign_pair, smooth_flow, tile_average_flow,
                           upsample_flow_bilinear, warp_bilinear, zoh_densify)
from mvfi.synth import oracle_gaussian, oracle_median, oracle_warp


def flow_of(u, v):
    return FlowField.from_arrays(np.asarray(u, float), np.asarray(v, float))


def rand_flow(rng, h, w, scale=8.0):
    return flow_of(rng.uniform(-scale, scale, (h, w)),
                   rng.uniform(-scale, scale, (h, w)))


def rand_block_flow(rng, h, w, blk=8, scale=8.0):
    """ZOH-like field: constant blocks with noise, a few outlier blocks."""
    u = np.zeros((h, w))
    v = np.zeros((h, w))
    for y in range(0, h, blk):
        for x in range(0, w, blk):
            du, dv = rng.uniform(-scale, scale, 2)
            if rng.random() < 0.08:
                du += rng.uniform(-16, 16)
            u[y:y + blk, x:x + blk] = du
            v[y:y + blk, x:x + blk] = dv
    return flow_of(u, v)


# zoh_densify


def test_zoh_single_full_cover_block():
    f = zoh_densify([BlockVector(0, 0, 16, 16, 1.0, -2.0)], 16, 16)
    assert np.all(f.u == 1.0) and np.all(f.v == -2.0)


def test_zoh_empty_is_zero_field():
    f = zoh_densify([], 8, 8)
    assert not f.u.any() and not f.v.any()


def test_zoh_last_write_wins():
    a = BlockVector(0, 0, 16, 16, 1.0, 0.0)
    b = BlockVector(8, 0, 16, 16, 2.0, 0.0)
    f = zoh_densify([a, b], 24, 16)
    assert np.all(f.u[:, 8:24] == 2.0)
    assert np.all(f.u[:, :8] == 1.0)


def test_zoh_clips_out_of_frame_blocks():
    f = zoh_densify([BlockVector(-8, -8, 16, 16, 3.0, 4.0)], 16, 16)
    assert np.all(f.u[:8, :8] == 3.0)
    assert not f.u[8:, :].any() and not f.u[:, 8:].any()
    # fully outside contributes nothing
    g = zoh_densify([BlockVector(100, 100, 16, 16, 3.0, 4.0)], 16, 16)
    assert not g.u.any()


# downsample


def test_downsample_picks_top_left():
    vals = np.arange(64, dtype=float).reshape(8, 8)
    f = downsample_flow_nearest(flow_of(vals, vals), 4)
    assert f.u.tolist() == [[0.0, 4.0], [32.0, 36.0]]


def test_downsample_ceil_dims_and_identity():
    f = rand_flow(np.random.default_rng(0), 9, 13)
    d = downsample_flow_nearest(f, 4)
    assert (d.height, d.width) == (3, 4)
    i = downsample_flow_nearest(f, 1)
    assert np.array_equal(i.u, f.u)


def test_downsample_rejects_bad_factor():
    with pytest.raises(InvalidInput):
        downsample_flow_nearest(rand_flow(np.random.default_rng(0), 4, 4), 0)


# median


def test_median_constant_unchanged():
    f = flow_of(np.full((7, 7), 3.5), np.zeros((7, 7)))
    m = median_filter_flow(f, 5)
    assert np.allclose(m.u, 3.5)


def test_median_removes_spike():
    u = np.ones((9, 9))
    u[4, 4] = 50.0
    m = median_filter_flow(flow_of(u, u), 5)
    assert m.u[4, 4] == 1.0


def test_median_preserves_step_edge():
    u = np.zeros((9, 9))
    u[:, 5:] = 4.0
    m = median_filter_flow(flow_of(u, np.zeros_like(u)), 5)
    assert np.array_equal(m.u, u)


def test_median_rejects_even_k():
    with pytest.raises(InvalidInput):
        median_filter_flow(rand_flow(np.random.default_rng(0), 4, 4), 4)


def test_median_matches_oracle():
    rng = np.random.default_rng(11)
    for _ in range(8):
        h, w = rng.integers(3, 20, 2)
        comp = rng.uniform(-9, 9, (h, w))
        for k in (3, 5):
            got = median_filter_flow(flow_of(comp, comp), k).u
            assert np.max(np.abs(got - oracle_median(comp, k))) <= 1e-5


# gaussian


def test_gaussian_taps_shape_and_sum():
    taps = gaussian_taps(2.0)
    assert len(taps) == 13  # radius ceil(3*2) = 6
    assert abs(taps.sum() - 1.0) < 1e-12
    assert np.array_equal(taps, taps[::-1])


def test_gaussian_constant_unchanged():
    f = flow_of(np.full((12, 12), -2.25), np.zeros((12, 12)))
    g = gaussian_blur_flow(f, 2.0)
    assert np.max(np.abs(g.u + 2.25)) < 1e-6


def test_gaussian_impulse_center_tap():
    taps = gaussian_taps(2.0)
    u = np.zeros((15, 15))
    u[7, 7] = 1.0
    g = gaussian_blur_flow(flow_of(u, u), 2.0)
    assert abs(g.u[7, 7] - taps[6] ** 2) < 1e-12


def test_gaussian_ramp_fixed_away_from_borders():
    xs = np.tile(np.arange(32, dtype=float), (32, 1))
    g = gaussian_blur_flow(flow_of(xs, xs), 2.0)
    inner = np.s_[8:-8, 8:-8]
    assert np.max(np.abs(g.u[inner] - xs[inner])) < 1e-9


def test_gaussian_matches_oracle():
    rng = np.random.default_rng(12)
    taps = gaussian_taps(1.0)
    for _ in range(6):
        h, w = rng.integers(4, 24, 2)
        comp = rng.uniform(-9, 9, (h, w))
        got = gaussian_blur_flow(flow_of(comp, comp), 1.0).u
        assert np.max(np.abs(got - oracle_gaussian(comp, taps))) <= 1e-5


# upsample


def test_upsample_1x1_is_constant():
    f = flow_of([[2.5]], [[-1.0]])
    up = upsample_flow_bilinear(f, 7, 5)
    assert np.all(up.u == 2.5) and np.all(up.v == -1.0)
    assert (up.width, up.height) == (7, 5)


def test_upsample_identity_at_same_size():
    f = rand_flow(np.random.default_rng(3), 6, 9)
    up = upsample_flow_bilinear(f, 9, 6)
    assert np.allclose(up.u, f.u, atol=1e-12)


def test_upsample_2x2_to_4x4_hand_weights():
    f = flow_of([[0.0, 1.0], [2.0, 3.0]], np.zeros((2, 2)))
    up = upsample_flow_bilinear(f, 4, 4)
    # src coord for dst 1 is (1.5)*2/4 - 0.5 = 0.25: weights 0.75/0.25
    assert abs(up.u[0, 1] - 0.25) < 1e-12
    assert abs(up.u[1, 0] - 0.5) < 1e-12
    assert abs(up.u[1, 1] - 0.75) < 1e-12
    # corners clamp to the nearest source sample
    assert up.u[0, 0] == 0.0 and up.u[3, 3] == 3.0


def test_upsample_values_not_rescaled():
    f = flow_of(np.full((2, 2), 8.0), np.zeros((2, 2)))
    up = upsample_flow_bilinear(f, 8, 8)
    assert np.all(up.u == 8.0)


# warp


def img_from(mat):
    return Image.from_array(np.asarray(mat, float)[:, :, None])


def test_warp_zero_flow_identity_bit_exact():
    rng = np.random.default_rng(4)
    img = Image.from_array(rng.uniform(0, 1, (10, 11, 3)))
    zero = flow_of(np.zeros((10, 11)), np.zeros((10, 11)))
    out = warp_bilinear(img, zero, 1.0)
    assert np.array_equal(out.data, img.data)


def test_warp_integer_flow_shifts_ramp():
    xs = np.tile(np.arange(8, dtype=float) / 10.0, (8, 1))
    img = img_from(xs)
    one = flow_of(np.ones((8, 8)), np.zeros((8, 8)))
    out = warp_bilinear(img, one, 1.0)
    # samples at x+1: ramp advances by one step, right edge replicated
    assert np.allclose(out.data[:, :-1, 0], xs[:, 1:])
    assert np.allclose(out.data[:, -1, 0], xs[:, -1])


def test_warp_half_pixel_averages_neighbors():
    xs = np.tile(np.array([0.0, 0.4, 0.8, 0.2]), (4, 1))
    img = img_from(xs)
    one = flow_of(np.ones((4, 4)), np.zeros((4, 4)))
    out = warp_bilinear(img, one, 0.5)
    assert abs(out.data[0, 0, 0] - 0.2) < 1e-12
    assert abs(out.data[0, 1, 0] - 0.6) < 1e-12


def test_warp_dim_mismatch():
    img = Image.from_array(np.zeros((4, 4, 3)))
    with pytest.raises(InvalidInput):
        warp_bilinear(img, flow_of(np.zeros((5, 4)), np.zeros((5, 4))), 1.0)


def test_warp_matches_oracle():
    rng = np.random.default_rng(5)
    for _ in range(6):
        h, w = rng.integers(4, 24, 2)
        img = Image.from_array(rng.uniform(0, 1, (h, w, 3)))
        f = rand_flow(rng, h, w, scale=3.0)
        for scale in (1.0, 0.5, -0.5):
            got = warp_bilinear(img, f, scale).data
            want = oracle_warp(img.data, f.u, f.v, scale)
            assert np.max(np.abs(got - want)) <= 1e-5


# box / tile (legacy chain)


def test_box_filter_constant_and_mean():
    f = flow_of(np.full((6, 6), 2.0), np.zeros((6, 6)))
    assert np.allclose(box_filter_flow(f, 3).u, 2.0)
    u = np.zeros((5, 5))
    u[2, 2] = 9.0
    b = box_filter_flow(flow_of(u, u), 3)
    assert abs(b.u[2, 2] - 1.0) < 1e-12


def test_tile_average():
    u = np.zeros((16, 32))
    u[:, 16:] = 4.0
    t = tile_average_flow(flow_of(u, u), 16)
    assert np.all(t.u[:, :16] == 0.0) and np.all(t.u[:, 16:] == 4.0)
    alt = np.tile([0.0, 2.0], (16, 8))
    mixed = tile_average_flow(flow_of(alt, np.zeros_like(alt)), 16)
    assert np.allclose(mixed.u, 1.0)


# obmc


def test_obmc_single_full_frame_block_equals_warp():
    rng = np.random.default_rng(6)
    img = Image.from_array(rng.uniform(0, 1, (16, 16, 3)))
    vec = BlockVector(0, 0, 16, 16, 1.25, -0.75)
    got = obmc_warp(img, [vec], 1.0)
    want = warp_bilinear(img, zoh_densify([vec], 16, 16), 1.0)
    assert np.max(np.abs(got.data - want.data)) <= 1e-5


def test_obmc_uniform_vectors_equal_zoh_warp():
    rng = np.random.default_rng(7)
    img = Image.from_array(rng.uniform(0, 1, (32, 32, 3)))
    vecs = [BlockVector(x, y, 16, 16, 2.5, 1.0)
            for y in range(0, 32, 16) for x in range(0, 32, 16)]
    got = obmc_warp(img, vecs, 1.0)
    want = warp_bilinear(img, zoh_densify(vecs, 32, 32), 1.0)
    assert np.max(np.abs(got.data - want.data)) <= 1e-5


def test_obmc_windows_partition_unity_on_grid():
    # equal vectors anywhere means weights must normalize away; verify the
    # raw window sum by warping a constant image with no motion
    img = Image.from_array(np.full((48, 48, 1), 0.5))
    vecs = [BlockVector(x, y, 16, 16, 0.0, 0.0)
            for y in range(0, 48, 16) for x in range(0, 48, 16)]
    out = obmc_warp(img, vecs, 1.0)
    assert np.max(np.abs(out.data - 0.5)) <= 1e-12


def test_obmc_uncovered_pixels_fall_back_to_source():
    rng = np.random.default_rng(8)
    img = Image.from_array(rng.uniform(0, 1, (64, 64, 1)))
    # one small block in the corner leaves the far corner uncovered
    out = obmc_warp(img, [BlockVector(0, 0, 8, 8, 4.0, 4.0)], 1.0)
    assert np.array_equal(out.data[32:, 32:], img.data[32:, 32:])


# smoothing chain and prealign


def total_variation(f):
    tv = 0.0
    for comp in (f.u, f.v):
        tv += np.abs(np.diff(comp, axis=0)).sum() + np.abs(np.diff(comp, axis=1)).sum()
    return tv


def test_production_smoothing_reduces_total_variation():
    rng = np.random.default_rng(9)
    for _ in range(10):
        zoh = rand_block_flow(rng, 64, 64)
        out = smooth_flow(zoh, SmoothingProfile.PRODUCTION)
        assert total_variation(out) < total_variation(zoh)


def test_smooth_flow_parameter_validation():
    f = rand_flow(np.random.default_rng(0), 8, 8)
    with pytest.raises(InvalidInput):
        smooth_flow(f, SmoothingProfile.PRODUCTION, down_factor=3)
    with pytest.raises(InvalidInput):
        smooth_flow(f, SmoothingProfile.PRODUCTION, median_k=4)
    with pytest.raises(InvalidInput):
        smooth_flow(f, SmoothingProfile.PRODUCTION, sigma=0.0)


def test_smooth_flow_zoh_passthrough():
    f = rand_flow(np.random.default_rng(1), 8, 8)
    out = smooth_flow(f, SmoothingProfile.ZOH_ONLY)
    assert np.array_equal(out.u, f.u)


def test_prealign_no_vectors_identical_frames():
    rng = np.random.default_rng(10)
    img = Image.from_array(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
    res = prealign_pair(img, img, [], SmoothingProfile.PRODUCTION)
    assert np.array_equal(res.blend.to_u8().data, img.data)


def test_prealign_constant_shift_recovers_midpoint():
    # a ramp translating 4 px/frame with exact MVs: the blend must land
    # halfway, far from either endpoint
    w = h = 32
    xs = np.tile(np.arange(w, dtype=float), (h, 1)) / w
    i0 = Image.from_array(np.repeat(xs[:, :, None], 3, axis=2))
    shifted = np.roll(xs, 4, axis=1)
    shifted[:, :4] = xs[:, :1]
    i1 = Image.from_array(np.repeat(shifted[:, :, None], 3, axis=2))
    vecs = [BlockVector(x, y, 16, 16, 4.0, 0.0)
            for y in range(0, h, 16) for x in range(0, w, 16)]
    res = prealign_pair(i0, i1, vecs, SmoothingProfile.PRODUCTION)
    inner = res.blend.data[8:-8, 10:-10, 0]
    want = np.roll(xs, 2, axis=1)[8:-8, 10:-10]
    assert np.max(np.abs(inner - want)) < 1e-6


def test_prealign_dim_mismatch():
    a = Image.from_array(np.zeros((16, 16, 3), dtype=np.uint8))
    b = Image.from_array(np.zeros((16, 32, 3), dtype=np.uint8))
    with pytest.raises(InvalidInput):
        prealign_pair(a, b, [])


def test_prealign_profiles_share_blend_shape():
    rng = np.random.default_rng(13)
    i0 = Image.from_array(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
    i1 = Image.from_array(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
    vecs = [BlockVector(0, 0, 16, 16, 1.0, 0.0)]
    for prof in SmoothingProfile:
        res = prealign_pair(i0, i1, vecs, prof)
        assert res.blend.data.shape == (32, 32, 3)
        assert res.w0.is_float and res.w1.is_float
