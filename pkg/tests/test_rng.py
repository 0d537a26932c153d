import numpy as np
import pytest

from wsnm.rng import SplitMix64, derive_seed


def test_reference_output():
    # Published first output for seed 1234567.
    assert SplitMix64(1234567).next_u64() == 0x599ED017FB08FC85


def test_vectorized_matches_sequential():
    a = SplitMix64(42)
    seq = [a.next_u64() for _ in range(10)]
    assert SplitMix64(42).u64(10).tolist() == seq
    b = SplitMix64(42)
    b.u64(4)
    assert b.next_u64() == seq[4]


def test_uniform_and_normal_moments():
    rng = SplitMix64(9)
    u = rng.uniform(200_000)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005
    z = SplitMix64(10).normal(200_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    assert np.all(np.isfinite(z))


def test_sampling_without_replacement():
    picks = SplitMix64(3).sample_without_replacement(1000, 250)
    assert picks.size == 250 and np.unique(picks).size == 250
    assert picks.min() >= 0 and picks.max() < 1000
    assert SplitMix64(3).sample_without_replacement(10, 0).size == 0
    assert sorted(SplitMix64(4).sample_without_replacement(5, 5).tolist()) == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        SplitMix64(3).sample_without_replacement(5, 6)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, 1, 2, 3) == derive_seed(0, 1, 2, 3)
    assert len({derive_seed(0, i, j) for i in range(10) for j in range(10)}) == 100
