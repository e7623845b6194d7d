import numpy as np
import pytest

from mimo_ee.channel import (ChannelState, GeometryConfig, build_channel, column_energy,
                             derive_seed, large_scale_gain, sample_geometry, sample_small_scale)


def test_geometry_rejects_bad_values():
    with pytest.raises(ValueError):
        GeometryConfig(min_distance_m=300.0, max_distance_m=250.0)
    with pytest.raises(ValueError):
        GeometryConfig(path_loss_exponent=0.0)
    with pytest.raises(ValueError):
        GeometryConfig(carrier_factor=-1.0)
    with pytest.raises(ValueError):
        GeometryConfig(shadow_std_db=-1.0)


def test_degenerate_interval_gives_constant_distance():
    geom = GeometryConfig(min_distance_m=100.0, max_distance_m=100.0)
    assert np.all(sample_geometry(geom, 5, 123) == 100.0)


def test_geometry_deterministic_and_in_range():
    geom = GeometryConfig()
    a = sample_geometry(geom, 3, 9)
    assert np.array_equal(a, sample_geometry(geom, 3, 9))
    assert np.all((a >= 35.0) & (a <= 250.0))


def test_geometry_mean():
    d = sample_geometry(GeometryConfig(), 100_000, 4)
    assert abs(d.mean() - 142.5) / 142.5 < 0.01


def test_geometry_rejects_zero_users():
    with pytest.raises(ValueError):
        sample_geometry(GeometryConfig(), 0, 1)


@pytest.mark.parametrize("d, eps, expected", [(1.0, 3.8, 1.0), (2.0, 2.0, 0.25)])
def test_large_scale_without_shadowing(d, eps, expected):
    geom = GeometryConfig(shadow_std_db=0.0, path_loss_exponent=eps)
    beta = large_scale_gain(np.array([d]), geom, 0)
    assert beta[0] == pytest.approx(expected, rel=1e-12)


def test_shadowing_is_zero_mean_in_db():
    geom = GeometryConfig(shadow_std_db=10.0, path_loss_exponent=1.0)
    beta = large_scale_gain(np.ones(100_000), geom, 17)
    db = 10 * np.log10(beta)
    assert abs(db.mean()) < 0.2
    assert db.std() == pytest.approx(10.0, rel=0.02)


def test_large_scale_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        large_scale_gain(np.array([1.0, 0.0]), GeometryConfig(), 0)


def test_small_scale_shape_and_determinism():
    h = sample_small_scale(128, 3, 5)
    assert h.shape == (128, 3) and np.iscomplexobj(h)
    assert np.array_equal(h, sample_small_scale(128, 3, 5))
    with pytest.raises(ValueError):
        sample_small_scale(0, 3, 5)


def test_single_antenna_energy_mean():
    h = sample_small_scale(1, 100_000, 0)
    assert column_energy(h).mean() == pytest.approx(1.0, rel=0.02)


def test_small_scale_unit_variance_parts():
    h = sample_small_scale(1000, 100, 1)
    assert h.real.var() == pytest.approx(0.5, rel=0.02)
    assert h.imag.var() == pytest.approx(0.5, rel=0.02)


def test_norm_mean_is_m():
    h = sample_small_scale(128, 10_000, 8)
    assert column_energy(h).mean() == pytest.approx(128.0, rel=0.02)


def test_columns_prefix_consistent_across_user_count():
    a = sample_small_scale(16, 3, 2)
    b = sample_small_scale(16, 5, 2)
    assert np.array_equal(a, b[:, :3])


def test_build_channel_unit_beta_gives_norms():
    geom = GeometryConfig(min_distance_m=1.0, max_distance_m=1.0, shadow_std_db=0.0)
    ch = build_channel(geom, 8, 3, 1)
    assert np.allclose(ch.composite_gain, column_energy(ch.small_scale), rtol=1e-12)


def test_build_channel_table_dimensions_and_invariants():
    ch = build_channel(GeometryConfig(), 128, 3, 0)
    assert ch.small_scale.shape == (128, 3)
    assert np.all(ch.large_scale > 0) and np.all(ch.composite_gain > 0)
    np.testing.assert_allclose(ch.composite_gain,
                               ch.large_scale * np.sum(np.abs(ch.small_scale) ** 2, axis=0),
                               rtol=1e-12)


def test_build_channel_serialization_is_deterministic():
    a = build_channel(GeometryConfig(), 16, 3, 42)
    b = build_channel(GeometryConfig(), 16, 3, 42)
    assert a.to_json() == b.to_json()
    c = ChannelState.from_json(a.to_json())
    assert np.array_equal(c.small_scale, a.small_scale)
    assert np.array_equal(c.composite_gain, a.composite_gain)


def test_from_dict_rejects_inconsistent_gain():
    doc = build_channel(GeometryConfig(), 4, 2, 0).to_dict()
    doc["composite_gain"][0] *= 2
    with pytest.raises(ValueError):
        ChannelState.from_dict(doc)


def test_sub_seeds_differ_per_stream():
    seeds = {derive_seed(7, lab) for lab in ("geometry", "shadow", "fading")}
    assert len(seeds) == 3


def test_cross_term_mean_is_one():
    h = sample_small_scale(64, 2 * 10_000, 3).reshape(64, 10_000, 2)
    hk, hl = h[:, :, 0], h[:, :, 1]
    cross = np.abs(np.sum(hk.conj() * hl, axis=0)) ** 2 / np.sum(np.abs(hl) ** 2, axis=0)
    assert cross.mean() == pytest.approx(1.0, rel=0.05)
