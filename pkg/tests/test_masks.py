import json
import math
from fractions import Fraction

import numpy as np
import pytest

from cs_certify import masks
from cs_certify.errors import CardinalityError, ParameterError
from cs_certify.masks import MaskKind


# Independent rasterization oracle: a pixel lies on a line exactly when
# it is the half-up rounding of the line at its dominant coordinate.
def oracle_radial(m, n, lines):
    ci, cj = m // 2, n // 2
    pts = set()
    for ell in range(lines):
        fr = Fraction(ell, lines)
        th = math.pi * fr.numerator / fr.denominator
        di, dj = math.sin(th), math.cos(th)
        for i in range(m):
            for j in range(n):
                if abs(dj) >= abs(di):
                    if i == math.floor(ci + (j - cj) * di / dj + 0.5):
                        pts.add((i, j))
                elif j == math.floor(cj + (i - ci) * dj / di + 0.5):
                    pts.add((i, j))
    return pts


# |Omega| values computed with oracle_radial and frozen.
RADIAL_GOLDEN = {
    (32, 32, 8): 240,
    (32, 32, 2): 63,
    (32, 32, 22): 575,
    (16, 16, 4): 60,
    (5, 5, 2): 9,
}


class TestDownSample:
    def test_example_4x4(self):
        m = masks.generate_mask("down_sample", 4, 4, {"stride": 2})
        assert set(m.indices) == {(0, 0), (0, 2), (2, 0), (2, 2)}
        assert masks.mask_ratio(m) == Fraction(1, 4)

    def test_ratio_formula_all_strides(self):
        for s in range(2, 9):
            for mm in range(4, 34):
                for nn in range(4, 34, 3):
                    msk = masks.generate_mask("down_sample", mm, nn, {"stride": s})
                    expect = Fraction(math.ceil(mm / s) * math.ceil(nn / s), mm * nn)
                    assert masks.mask_ratio(msk) == expect

    def test_stride_too_small(self):
        with pytest.raises(ParameterError):
            masks.generate_mask("down_sample", 4, 4, {"stride": 1})


class TestUniformRandom:
    def test_cardinality_32(self):
        m = masks.generate_mask("uniform_random", 32, 32, {"ratio": 0.3}, seed=5)
        assert m.size == 307

    def test_cardinality_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            ratio = float(rng.uniform(0.05, 0.95))
            seed = int(rng.integers(0, 2**32))
            m = masks.generate_mask("uniform_random", 16, 16, {"ratio": ratio},
                                    seed=seed)
            assert m.size == math.floor(ratio * 256 + 0.5)

    def test_determinism(self):
        a = masks.generate_mask("uniform_random", 12, 9, {"ratio": 0.4}, seed=77)
        b = masks.generate_mask("uniform_random", 12, 9, {"ratio": 0.4}, seed=77)
        assert a.indices == b.indices

    def test_prefix_nesting_same_seed(self):
        small = masks.generate_mask("uniform_random", 8, 8, {"ratio": 0.2}, seed=3)
        big = masks.generate_mask("uniform_random", 8, 8, {"ratio": 0.6}, seed=3)
        assert set(small.indices) <= set(big.indices)

    def test_seed_required(self):
        with pytest.raises(ParameterError):
            masks.generate_mask("uniform_random", 8, 8, {"ratio": 0.3})

    @pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2, 1.7])
    def test_ratio_domain(self, ratio):
        with pytest.raises(ParameterError):
            masks.generate_mask("uniform_random", 8, 8, {"ratio": ratio}, seed=1)

    def test_degenerate_cardinality(self):
        # rounds to zero samples on a small grid
        with pytest.raises(CardinalityError):
            masks.generate_mask("uniform_random", 2, 2, {"ratio": 0.05}, seed=1)


class TestDensityVaried:
    def test_cardinality_and_center(self):
        m = masks.generate_mask("density_varied", 32, 32,
                                {"ratio": 0.3, "alpha": 3}, seed=7)
        assert m.size == 307
        assert (16, 16) in set(m.indices)

    def test_cardinality_random_pairs(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            ratio = float(rng.uniform(0.05, 0.8))
            seed = int(rng.integers(0, 2**32))
            m = masks.generate_mask("density_varied", 16, 16,
                                    {"ratio": ratio, "alpha": 2.0}, seed=seed)
            assert m.size == math.floor(ratio * 256 + 0.5)

    def test_determinism(self):
        a = masks.generate_mask("density_varied", 16, 16, {"ratio": 0.25}, seed=2)
        b = masks.generate_mask("density_varied", 16, 16, {"ratio": 0.25}, seed=2)
        assert a.indices == b.indices

    def test_concentrates_near_center(self):
        m = masks.generate_mask("density_varied", 32, 32,
                                {"ratio": 0.2, "alpha": 4}, seed=11)
        r = np.array([math.hypot(i - 16, j - 16) for i, j in m.indices])
        rng = np.random.default_rng(0)
        u = masks.generate_mask("uniform_random", 32, 32, {"ratio": 0.2}, seed=11)
        ru = np.array([math.hypot(i - 16, j - 16) for i, j in u.indices])
        assert r.mean() < ru.mean()

    def test_negative_alpha(self):
        with pytest.raises(ParameterError):
            masks.generate_mask("density_varied", 8, 8,
                                {"ratio": 0.3, "alpha": -1}, seed=1)


class TestRadial:
    @pytest.mark.parametrize("m,n,lines", sorted(RADIAL_GOLDEN))
    def test_golden_sizes(self, m, n, lines):
        msk = masks.generate_mask("radial", m, n, {"lines": lines})
        assert msk.size == RADIAL_GOLDEN[(m, n, lines)]

    def test_matches_oracle_exactly(self):
        msk = masks.generate_mask("radial", 32, 32, {"lines": 8})
        assert set(msk.indices) == oracle_radial(32, 32, 8)

    @pytest.mark.parametrize("small,big", [(1, 2), (2, 4), (2, 6), (3, 6), (4, 8)])
    def test_nested_line_counts(self, small, big):
        a = masks.generate_mask("radial", 32, 32, {"lines": small})
        b = masks.generate_mask("radial", 32, 32, {"lines": big})
        assert set(a.indices) <= set(b.indices)

    def test_line_count_required(self):
        with pytest.raises(ParameterError):
            masks.generate_mask("radial", 8, 8, {"lines": 0})

    def test_full_coverage_rejected(self):
        # enough lines on a tiny grid hit every pixel
        with pytest.raises(CardinalityError):
            masks.generate_mask("radial", 2, 2, {"lines": 4})


def brute_force_product(indices):
    rows = sorted({i for i, _ in indices})
    cols = sorted({j for _, j in indices})
    from itertools import product

    return set(product(rows, cols)) == set(indices)


class TestSeparability:
    def test_down_sample_witness(self):
        m = masks.generate_mask("down_sample", 4, 4, {"stride": 2})
        assert masks.is_separable(m) == ((0, 2), (0, 2))

    def test_diagonal_not_separable(self):
        m = masks.explicit_mask(2, 2, [(0, 0), (1, 1)])
        assert masks.is_separable(m) is None

    def test_radial_cross_not_separable(self):
        m = masks.generate_mask("radial", 32, 32, {"lines": 2})
        assert masks.is_separable(m) is None

    def test_matches_brute_force_on_fixtures(self):
        fixtures = [
            masks.generate_mask("down_sample", 6, 9, {"stride": 3}),
            masks.generate_mask("radial", 16, 16, {"lines": 4}),
            masks.generate_mask("uniform_random", 8, 8, {"ratio": 0.3}, seed=1),
            masks.explicit_mask(4, 4, [(0, 1), (0, 3), (2, 1), (2, 3)]),
            masks.explicit_mask(4, 4, [(0, 1), (0, 3), (2, 1)]),
            masks.full_mask(3, 5),
        ]
        for msk in fixtures:
            witness = masks.is_separable(msk)
            assert (witness is not None) == brute_force_product(msk.indices)
            if witness is not None:
                rows, cols = witness
                from itertools import product

                assert set(product(rows, cols)) == set(msk.indices)


class TestMaskRatio:
    def test_examples(self):
        ds = masks.generate_mask("down_sample", 4, 4, {"stride": 2})
        assert masks.mask_ratio(ds) == Fraction(1, 4)
        u = masks.generate_mask("uniform_random", 32, 32, {"ratio": 0.3}, seed=1)
        assert masks.mask_ratio(u) == Fraction(307, 1024)
        assert masks.mask_ratio(masks.full_mask(5, 5)) == 1


class TestValidation:
    def test_duplicates_rejected(self):
        with pytest.raises(ParameterError):
            masks.Mask(4, 4, ((0, 0), (0, 0)), MaskKind.EXPLICIT)

    def test_bounds_rejected(self):
        with pytest.raises(ParameterError):
            masks.explicit_mask(4, 4, [(4, 0)])

    def test_empty_rejected(self):
        with pytest.raises(CardinalityError):
            masks.explicit_mask(4, 4, [])

    def test_full_needs_flag(self):
        all_idx = [(i, j) for i in range(3) for j in range(3)]
        with pytest.raises(CardinalityError):
            masks.explicit_mask(3, 3, all_idx)
        assert masks.full_mask(3, 3).size == 9

    def test_indices_column_major_order(self):
        m = masks.explicit_mask(4, 4, [(3, 1), (0, 0), (2, 0)])
        assert m.indices == ((0, 0), (2, 0), (3, 1))
        np.testing.assert_array_equal(m.linear_indices(), [0, 2, 7])


class TestSerialization:
    def test_json_round_trip(self, tmp_path):
        m = masks.generate_mask("density_varied", 12, 10,
                                {"ratio": 0.3, "alpha": 2.5}, seed=9)
        path = tmp_path / "mask.json"
        masks.save_mask(m, path)
        back = masks.load_mask(path)
        assert back == m
        doc = json.loads(path.read_text())
        assert set(doc) == {"kind", "m", "n", "params", "seed", "indices"}

    def test_binary_round_trip(self, tmp_path):
        m = masks.generate_mask("radial", 32, 32, {"lines": 8})
        path = tmp_path / "mask.bin"
        masks.save_mask(m, path)
        back = masks.load_mask(path)
        assert back.indices == m.indices
        assert back.kind is MaskKind.EXPLICIT
        # layout: u32 m, u32 n, then u16 pairs
        raw = path.read_bytes()
        assert len(raw) == 8 + 4 * m.size
        assert int.from_bytes(raw[0:4], "little") == 32

    def test_binary_truncation_detected(self):
        with pytest.raises(ParameterError):
            masks.mask_from_bytes(b"\x04\x00\x00\x00")

    def test_regeneration_bit_identical(self):
        spec = ("uniform_random", 16, 16, {"ratio": 0.4}, 123)
        a = masks.generate_mask(*spec)
        b = masks.generate_mask(*spec)
        assert masks.mask_to_bytes(a) == masks.mask_to_bytes(b)
