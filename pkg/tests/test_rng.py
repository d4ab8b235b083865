import numpy as np
import pytest
from hypothesis import given, strategies as st

from annihilation.rng import CounterRNG, NormalStream, philox4x32

# Known-answer vectors for Philox4x32-10 from the Random123 distribution.
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    (
        (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
        (0xA4093822, 0x299F31D0),
        (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
    ),
]


@pytest.mark.parametrize("counter, key, expected", KAT)
def test_philox_known_answers(counter, key, expected):
    assert tuple(int(w) for w in philox4x32(counter, key)) == expected


def test_frozen_stream_values():
    rng = CounterRNG(42, "golden")
    u1, u2 = rng.uniform_pair(np.arange(3), 0)
    np.testing.assert_allclose(u1, [0.38399252, 0.47911193, 0.30844237], atol=1e-8)
    np.testing.assert_allclose(u2, [0.65259521, 0.22259468, 0.47288659], atol=1e-8)
    np.testing.assert_allclose(rng.normals(np.arange(3), 5), [0.30683132, -1.43917391, -1.94451674], atol=1e-8)


@given(st.integers(0, 2**40), st.integers(0, 10_000), st.integers(0, 50))
def test_path_value_independent_of_batch(seed, path, draw):
    rng = CounterRNG(seed, "x")
    batch = rng.uniform_pair(np.array([0, path, path + 7]), draw)[0][1]
    alone = rng.uniform_pair(np.array([path]), draw)[0][0]
    assert batch == alone


def test_tags_and_seeds_separate_streams():
    paths = np.arange(1000)
    a = CounterRNG(1, "a").uniform_pair(paths, 0)[0]
    b = CounterRNG(1, "b").uniform_pair(paths, 0)[0]
    c = CounterRNG(2, "a").uniform_pair(paths, 0)[0]
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_uniforms_in_unit_interval_and_flat():
    u = CounterRNG(5).uniform_pair(np.arange(200_000), 3)[0]
    assert u.min() >= 0.0 and u.max() < 1.0
    counts, _ = np.histogram(u, bins=20, range=(0, 1))
    expected = u.size / 20
    chi2 = np.sum((counts - expected) ** 2 / expected)
    assert chi2 < 45  # 19 dof, p ~ 1e-3


def test_normals_moments():
    z = CounterRNG(9).normals(np.arange(400_000), 0)
    assert abs(z.mean()) < 5 / np.sqrt(z.size)
    assert abs(z.var() - 1.0) < 5 * np.sqrt(2 / z.size)
    assert abs(np.mean(z**4) - 3.0) < 0.05


def test_normal_stream_matches_indexed_draws():
    rng = CounterRNG(3, "s")
    paths = np.arange(5)
    stream = NormalStream(rng, paths)
    for k in range(7):
        np.testing.assert_array_equal(stream.next(), rng.normals(paths, k))
    late = NormalStream(rng, paths, start=3)
    np.testing.assert_array_equal(late.next(), rng.normals(paths, 3))


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        CounterRNG(-1)
