import math

import numpy as np
import pytest

from cs_certify import bases, certify, masks, sensing
from cs_certify.certify import SdpOptions
from cs_certify.errors import ParameterError, SizeCapError


def sweep_ssp_dim2(A, points=200001):
    """Dense angular sweep over a 2-dimensional nullspace (oracle)."""
    B = certify.nullspace_basis(A)
    assert B.shape[1] == 2
    th = np.linspace(0.0, np.pi, points)
    vals = np.abs(np.outer(B[:, 0], np.cos(th)) +
                  np.outer(B[:, 1], np.sin(th))).sum(axis=0)
    return float(vals.min())


def sampled_ssp(A, tries=100_000, seed=0):
    """Random sampling of the nullspace sphere (upper-bound oracle)."""
    B = certify.nullspace_basis(A)
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((tries, B.shape[1]))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    return float(np.abs(U @ B.T).sum(axis=1).min())


class TestSpark:
    def test_zero_column(self):
        assert certify.spark_bruteforce(np.array([[1., 0., 2.], [3., 0., 4.]])) == 1

    def test_duplicated_column(self):
        assert certify.spark_bruteforce(np.array([[1., 1., 2.], [3., 3., 4.]])) == 2

    def test_three_column_example(self):
        assert certify.spark_bruteforce(np.array([[1., 0., 1.], [0., 1., 1.]])) == 3

    def test_general_position(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((4, 8))
        assert certify.spark_bruteforce(A) == 5

    def test_trivial_nullspace_marker(self):
        assert certify.spark_bruteforce(np.eye(4)) == math.inf

    def test_size_cap(self):
        with pytest.raises(SizeCapError):
            certify.spark_bruteforce(np.zeros((2, 30)))

    def test_matches_naive_enumeration(self):
        from itertools import combinations

        rng = np.random.default_rng(3)
        for _ in range(5):
            A = rng.standard_normal((3, 7))
            A[:, 4] = 2.0 * A[:, 1] - A[:, 2]  # plant a 3-term dependence
            smax = np.linalg.norm(A, 2)
            naive = math.inf
            for size in range(1, 4):
                for cols in combinations(range(7), size):
                    s = np.linalg.svd(A[:, cols], compute_uv=False)
                    if s[-1] < 1e-10 * smax:
                        naive = size
                        break
                if naive < math.inf:
                    break
            assert certify.spark_bruteforce(A) == naive == 3


class TestSspExact:
    def test_closed_forms(self):
        assert certify.ssp_exact_small(np.array([[1., 1.]])) == \
            pytest.approx(math.sqrt(2), abs=1e-12)
        assert certify.ssp_exact_small(np.array([[1., 2.]])) == \
            pytest.approx(3 / math.sqrt(5), abs=1e-12)
        assert certify.ssp_exact_small(np.array([[1., 0., -1.], [0., 1., -1.]])) == \
            pytest.approx(math.sqrt(3), abs=1e-12)

    def test_trivial_nullspace(self):
        assert certify.ssp_exact_small(np.eye(3)) == math.inf

    def test_dim2_matches_sweep(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            A = rng.standard_normal((4, 6))
            exact = certify.ssp_exact_small(A)
            sweep = sweep_ssp_dim2(A)
            assert exact <= sweep + 1e-9
            assert sweep - exact <= 1e-4

    def test_higher_nullity_vs_sampling(self):
        rng = np.random.default_rng(7)
        for _ in range(15):
            q = int(rng.integers(3, 7))
            N = q + int(rng.integers(3, 7))
            A = rng.standard_normal((q, N))
            exact = certify.ssp_exact_small(A)
            # sampling can only sit above the true minimum
            assert exact <= sampled_ssp(A, seed=int(rng.integers(1 << 30))) + 1e-9

    def test_full_nullspace(self):
        # zero operator: every unit vector is feasible, minimum ratio is 1
        assert certify.ssp_exact_small(np.zeros((2, 6))) == pytest.approx(1.0)

    def test_size_cap_directs_to_relaxation(self):
        rng = np.random.default_rng(1)
        with pytest.raises(SizeCapError, match="sdp"):
            certify.ssp_exact_small(rng.standard_normal((5, 20)))

    def test_row_transform_invariance(self):
        rng = np.random.default_rng(11)
        A = rng.standard_normal((4, 8))
        T = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        base = certify.ssp_exact_small(A)
        assert certify.ssp_exact_small(T @ A) == pytest.approx(base, abs=1e-8)
        assert certify.spark_bruteforce(T @ A) == certify.spark_bruteforce(A)
        perm = np.eye(4)[rng.permutation(4)]
        assert certify.ssp_exact_small(perm @ A * 3.0) == \
            pytest.approx(base, abs=1e-8)


class TestSdpRelaxation:
    def test_nullity_one_examples(self):
        c = certify.ssp_sdp_lower_bound(np.array([[1., 1.]]))
        assert c.delta_sq == pytest.approx(2.0, abs=1e-4)
        c = certify.ssp_sdp_lower_bound(np.array([[1., 2.]]))
        assert c.delta_sq == pytest.approx(1.8, abs=1e-4)

    def test_nullity_one_exactness_batch(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            N = int(rng.integers(5, 21))
            A = rng.standard_normal((N - 1, N))
            cert = certify.ssp_sdp_lower_bound(A)
            exact = certify.ssp_exact_small(A) ** 2
            assert abs(cert.delta_sq - exact) <= 1e-4
            assert cert.status == "converged"

    def test_sandwich_random(self):
        rng = np.random.default_rng(9)
        opts = SdpOptions(gap_tol=5e-4, max_iter=30_000)
        for _ in range(10):
            q = int(rng.integers(4, 7))
            A = rng.standard_normal((q, 2 * q))
            cert = certify.ssp_sdp_lower_bound(A, opts)
            ssp2 = certify.ssp_exact_small(A) ** 2
            spark = certify.spark_bruteforce(A)
            assert cert.delta_sq <= ssp2 + 1e-4 <= spark + 1e-4

    def test_trivial_nullspace_marker(self):
        c = certify.ssp_sdp_lower_bound(np.eye(5))
        assert math.isinf(c.delta_sq)
        assert c.status == "trivial_nullspace"
        assert c.k_max == 5

    def test_unconverged_reports_zero(self):
        rng = np.random.default_rng(2)
        A = rng.standard_normal((8, 16))
        c = certify.ssp_sdp_lower_bound(A, SdpOptions(max_iter=40, gap_tol=1e-12,
                                                      tol=1e-14))
        assert c.status == "unconverged"
        assert c.delta_sq == 0.0 and c.k_max == -1
        assert c.solver_report.iterations == 40

    def test_size_cap(self):
        with pytest.raises(SizeCapError):
            certify.ssp_sdp_lower_bound(np.zeros((2, 4)), SdpOptions(n_cap=3))

    def test_rank_deficient_rows_handled(self):
        # duplicated rows must not change the certificate
        A = np.array([[1., 2., 0.], [2., 4., 0.], [0., 0., 0.]])
        c = certify.ssp_sdp_lower_bound(A)
        e = certify.ssp_exact_small(A)
        assert c.delta_sq <= e * e + 1e-6

    def test_nullspace_monotone_under_mask_growth(self):
        wht = bases.generate_basis("walsh_hadamard", 4)
        d4 = bases.wavelet_matrix(4)
        opts = SdpOptions(gap_tol=1e-5)
        prev_sdp, prev_exact = -math.inf, -math.inf
        for ratio in (0.25, 0.5, 0.75):
            msk = masks.generate_mask("uniform_random", 4, 4, {"ratio": ratio},
                                      seed=13)
            A = sensing.build_sensing(msk, wht, wht, d4).A
            ssp = certify.ssp_exact_small(A)
            cert = certify.ssp_sdp_lower_bound(A, opts)
            assert ssp >= prev_exact - 1e-8
            assert cert.delta_sq >= prev_sdp - 1e-4
            prev_exact, prev_sdp = ssp, cert.delta_sq

    def test_certificate_json(self):
        c = certify.ssp_sdp_lower_bound(np.array([[1., 1.]]))
        doc = c.to_json()
        assert '"delta_sq"' in doc and '"solver_report"' in doc


class TestCauchySchwarz:
    def test_l1_sq_bounded_by_l0_l2_sq(self):
        rng = np.random.default_rng(21)
        count = 0
        while count < 1000:
            q = int(rng.integers(2, 6))
            N = q + int(rng.integers(1, 6))
            B = certify.nullspace_basis(rng.standard_normal((q, N)))
            u = rng.standard_normal(B.shape[1])
            eta = B @ u
            if not np.linalg.norm(eta):
                continue
            l0 = np.sum(np.abs(eta) > 1e-12)
            assert np.abs(eta).sum() ** 2 <= l0 * (eta @ eta) * (1 + 1e-12)
            count += 1


class TestCoherence:
    def test_orthonormal_marker(self):
        assert math.isinf(certify.coherence_spark_bound(np.eye(4)))

    def test_duplicated_column(self):
        A = np.array([[1., 1.], [2., 2.]])
        assert certify.coherence_spark_bound(A) == pytest.approx(2.0)

    def test_example_value(self):
        A = np.array([[1., 0., 1 / math.sqrt(2)], [0., 1., 1 / math.sqrt(2)]])
        assert certify.coherence_spark_bound(A) == pytest.approx(1 + math.sqrt(2))

    def test_zero_column_rejected(self):
        with pytest.raises(ParameterError):
            certify.coherence_spark_bound(np.array([[1., 0.], [1., 0.]]))

    def test_certificate_wrapper(self):
        A = np.array([[1., 1.], [2., 2.]])
        c = certify.certificate_coherence(A)
        assert c.method == "coherence" and c.k_max == 0


class TestRecoveryKmax:
    @pytest.mark.parametrize("delta_sq,expect", [(2.0, 0), (3.0, 1), (4.0, 1),
                                                 (0.0, -1), (1e-9, 0)])
    def test_examples(self, delta_sq, expect):
        assert certify.recovery_kmax(delta_sq) == expect

    def test_strictness_ladder(self):
        for k in range(101):
            assert certify.recovery_kmax(2.0 * k) == k - 1
            assert certify.recovery_kmax(2.0 * k + 1e-9) == k

    def test_rejects_non_finite(self):
        with pytest.raises(ParameterError):
            certify.recovery_kmax(math.inf)
        with pytest.raises(ParameterError):
            certify.recovery_kmax(-1.0)


class TestKronBound:
    @pytest.mark.parametrize("modes,expect", [([2.0, 3.0], 0), ([4.0, 4.0], 1),
                                              ([6.0, 10.0], 2)])
    def test_examples(self, modes, expect):
        assert certify.kron_recovery_bound(modes) == expect

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            certify.kron_recovery_bound([])

    def test_all_trivial_rejected(self):
        with pytest.raises(ParameterError):
            certify.kron_recovery_bound([math.inf, math.inf])

    def test_separable_system_vs_full(self):
        wht = bases.generate_basis("walsh_hadamard", 4)
        d4 = bases.wavelet_matrix(4)
        msk = masks.generate_mask("down_sample", 4, 4, {"stride": 2})
        S = sensing.build_sensing(msk, wht, wht, d4)
        per_mode = [
            certify.ssp_sdp_lower_bound(sensing.realify(f)).delta_sq
            for f in S.mode_factors
        ]
        k_kron = certify.kron_recovery_bound(per_mode)
        full = certify.ssp_sdp_lower_bound(S.A)
        assert k_kron <= full.k_max
