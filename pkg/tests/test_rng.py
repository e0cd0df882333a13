"""Generator correctness against a pure-Python reference implementation.

The reference below is the textbook sequential SplitMix64: advance the state
by the Weyl constant, then finalize.  The package's counter-based form must
produce the identical stream, and the derived samplers (uniform, Gaussian,
permutation) must consume it in the documented way.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from relulimits import SplitMix64

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def reference_stream(seed: int, n: int) -> list[int]:
    """Sequential SplitMix64 with plain Python integers."""
    state = seed & MASK
    out = []
    for _ in range(n):
        state = (state + GAMMA) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


class TestRawStream:
    def test_matches_reference_for_many_seeds(self):
        for seed in (0, 1, 42, 2**63, MASK, 1234567890123456789):
            got = SplitMix64(seed).u64(64).tolist()
            assert got == reference_stream(seed, 64)

    def test_stream_position_is_stateful(self):
        rng = SplitMix64(9)
        first = rng.u64(10).tolist()
        second = rng.u64(10).tolist()
        assert first + second == reference_stream(9, 20)

    def test_negative_seed_wraps_like_two_complement(self):
        assert SplitMix64(-1).u64(4).tolist() == reference_stream(MASK, 4)

    def test_non_integer_seed_rejected(self):
        with pytest.raises(ValueError):
            SplitMix64(1.5)  # type: ignore[arg-type]

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            SplitMix64(0).u64(-1)


class TestUniform:
    def test_definition_top_53_bits(self):
        raw = reference_stream(7, 100)
        expected = [(v >> 11) * 2.0**-53 for v in raw]
        np.testing.assert_array_equal(SplitMix64(7).uniform(100), expected)

    def test_range_and_mean(self):
        u = SplitMix64(123).uniform(100_000)
        assert u.min() >= 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.005


class TestNormal:
    def test_box_muller_pairing(self):
        """Two uniforms per output pair, cos then sin branch."""
        raw = SplitMix64(5).uniform(4)
        u1, u2 = 1.0 - raw[0], raw[1]
        r = math.sqrt(-2.0 * math.log(u1))
        expected0 = r * math.cos(2.0 * math.pi * u2)
        expected1 = r * math.sin(2.0 * math.pi * u2)
        got = SplitMix64(5).normal(2)
        np.testing.assert_allclose(got, [expected0, expected1], rtol=0, atol=0)

    def test_odd_draw_discards_spare_but_advances_stream(self):
        a = SplitMix64(31)
        a.normal(3)
        b = SplitMix64(31)
        b.normal(4)
        # both consumed two pairs of uniforms
        np.testing.assert_array_equal(a.u64(5), b.u64(5))

    def test_moments(self):
        z = SplitMix64(99).normal(200_000)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01


class TestPermutationAndInteger:
    def test_permutation_is_a_permutation(self):
        for seed in range(10):
            p = SplitMix64(seed).permutation(137)
            assert sorted(p.tolist()) == list(range(137))

    def test_permutation_deterministic(self):
        np.testing.assert_array_equal(
            SplitMix64(4).permutation(50), SplitMix64(4).permutation(50)
        )

    def test_integer_bounds(self):
        rng = SplitMix64(8)
        draws = [rng.integer(13) for _ in range(2000)]
        assert min(draws) == 0 and max(draws) == 12

    def test_integer_matches_modulo_reduction(self):
        raw = reference_stream(21, 5)
        rng = SplitMix64(21)
        assert [rng.integer(1000) for _ in range(5)] == [v % 1000 for v in raw]


class TestFork:
    def test_fork_changes_stream(self):
        base = SplitMix64(17)
        forked = SplitMix64(17).fork("init")
        assert base.u64(8).tolist() != forked.u64(8).tolist()

    def test_fork_is_deterministic_and_tag_sensitive(self):
        a = SplitMix64(17).fork("init").u64(8).tolist()
        b = SplitMix64(17).fork("init").u64(8).tolist()
        c = SplitMix64(17).fork("shuffle").u64(8).tolist()
        assert a == b
        assert a != c

    def test_forks_of_different_seeds_differ(self):
        a = SplitMix64(1).fork("x").u64(8).tolist()
        b = SplitMix64(2).fork("x").u64(8).tolist()
        assert a != b
