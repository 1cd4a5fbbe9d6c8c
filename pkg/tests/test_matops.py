import numpy as np
import pytest
import scipy.linalg as sl

from bchseries.checks import real_spectrum_matrix, unit_matrix
from bchseries.coeffs import g_coefficient
from bchseries.errors import BranchError, DecompositionError, InputError
from bchseries.matops import (
    BCHForm,
    FallbackPolicy,
    MatrixPair,
    apply_string_function,
    bch_first_order_standard,
    bch_truncated,
    convert_form,
    eigendecompose,
    g_regularized,
    hadamard_conjugate,
    mat_exp,
    mat_log_principal,
)
from bchseries.oracle import direct_Z


def comm(X, Y):
    return X @ Y - Y @ X


class TestEigendecompose:
    def test_diagonal_sorted(self):
        spec = eigendecompose(np.diag([0.5, -1.0, 0.2]))
        assert np.allclose(spec.eigenvalues, [-1.0, 0.2, 0.5])
        assert spec.condition == pytest.approx(1.0)

    def test_complex_order(self):
        spec = eigendecompose(np.array([[0.0, -1.0], [1.0, 0.0]]))
        assert np.allclose(spec.eigenvalues, [-1j, 1j])

    def test_reconstruction(self, rng):
        A = real_spectrum_matrix(rng, 5)
        spec = eigendecompose(A)
        assert np.allclose(spec.from_eigenbasis(np.diag(spec.eigenvalues)), A, atol=1e-12)

    def test_hermitian_is_unitary(self, rng):
        H = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        H = H + H.conj().T
        spec = eigendecompose(H)
        assert np.allclose(spec.basis.conj().T @ spec.basis, np.eye(4), atol=1e-12)

    def test_defective(self):
        with pytest.raises(DecompositionError, match="defective"):
            eigendecompose(np.array([[0.0, 1.0], [0.0, 0.0]]))

    @pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.array([[np.nan]]), np.zeros((0, 0))])
    def test_bad_shapes(self, bad):
        with pytest.raises(InputError):
            eigendecompose(bad)


class TestExpLog:
    def test_exp_nilpotent(self):
        N = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert np.allclose(mat_exp(N), [[1, 1], [0, 1]])

    def test_exp_rotation(self):
        th = 0.7
        R = mat_exp(np.array([[0.0, -th], [th, 0.0]]))
        assert np.allclose(R, [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])

    def test_log_round_trip(self, rng):
        X = 0.5 * unit_matrix(rng, 4, complex_entries=True)
        assert np.allclose(mat_log_principal(sl.expm(X)), X, atol=1e-12)

    def test_log_identity(self):
        assert np.allclose(mat_log_principal(np.eye(3)), 0)

    def test_log_negative_axis(self):
        with pytest.raises(BranchError):
            mat_log_principal(np.diag([1.0, -2.0]))

    def test_log_singular(self):
        with pytest.raises(BranchError):
            mat_log_principal(np.diag([1.0, 0.0]))


class TestHadamard:
    def test_nilpotent_direct(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        B = np.array([[0.0, 0.0], [1.0, 0.0]])
        assert np.allclose(hadamard_conjugate(A, B), [[1, -1], [1, -1]], atol=1e-15)

    def test_nilpotent_eigen_path_rejects(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(DecompositionError):
            hadamard_conjugate(A, np.eye(2), method="eigen")

    def test_diagonal(self, rng):
        a = rng.uniform(-1, 1, 3)
        B = rng.normal(size=(3, 3))
        expected = np.exp(a[:, None] - a[None, :]) * B
        assert np.allclose(hadamard_conjugate(np.diag(a), B, method="eigen"), expected)
        assert np.allclose(hadamard_conjugate(np.diag(a), B), expected)

    def test_two_paths_agree(self, rng):
        for _ in range(10):
            A = real_spectrum_matrix(rng, 4, norm=1.5)
            B = unit_matrix(rng, 4, complex_entries=True)
            d, e = hadamard_conjugate(A, B), hadamard_conjugate(A, B, method="eigen")
            assert np.linalg.norm(d - e) <= 1e-10 * np.linalg.norm(d)

    def test_unknown_method(self):
        with pytest.raises(InputError):
            hadamard_conjugate(np.eye(2), np.eye(2), method="nope")


class TestConvertForm:
    def test_round_trip(self, rng):
        X = real_spectrum_matrix(rng, 3, norm=1.0)
        Y = unit_matrix(rng, 3)
        A, B = convert_form(X, Y, "symmetric")
        X2, Y2 = convert_form(A, B, BCHForm.STANDARD)
        assert np.allclose(X2, X, atol=1e-13) and np.allclose(Y2, Y, atol=1e-13)

    def test_diagonal(self, rng):
        x = rng.uniform(-1, 1, 3)
        Y = rng.normal(size=(3, 3))
        A, B = convert_form(np.diag(x), Y, "symmetric")
        assert np.allclose(A, np.diag(x / 2))
        assert np.allclose(B, np.exp((x[:, None] - x[None, :]) / 2) * Y / 2)

    def test_same_logarithm(self, rng):
        X = real_spectrum_matrix(rng, 3, norm=1.0)
        Y = 0.3 * unit_matrix(rng, 3)
        A, B = convert_form(X, Y, "symmetric")
        assert np.allclose(direct_Z(A, B), sl.logm(sl.expm(X) @ sl.expm(Y)), atol=1e-12)

    def test_matrix_pair(self, rng):
        X = real_spectrum_matrix(rng, 3, norm=1.0)
        Y = unit_matrix(rng, 3)
        A, B = MatrixPair(X, Y, "standard").symmetric()
        assert np.allclose(A, X / 2)
        with pytest.raises(InputError):
            MatrixPair(np.eye(2), np.eye(3))


class TestFirstOrder:
    def test_commuting(self, rng):
        x, y = rng.uniform(-1, 1, (2, 3))
        Z = bch_first_order_standard(np.diag(x), np.diag(y))
        assert np.allclose(Z, np.diag(x + y))

    def test_scalar_weight(self):
        X = np.diag([0.3, -0.4])
        Y = np.array([[0.0, 1.0], [0.0, 0.0]])
        w = 0.7
        Z = bch_first_order_standard(X, Y)
        assert Z[0, 1] == pytest.approx(w / (1 - np.exp(-w)))

    def test_quadratic_remainder(self, rng):
        X = real_spectrum_matrix(rng, 4, norm=1.5)
        Y = unit_matrix(rng, 4)
        errs = []
        for s in (1e-2, 5e-3):
            exact = sl.logm(sl.expm(X) @ sl.expm(s * Y))
            errs.append(np.linalg.norm(bch_first_order_standard(X, s * Y) - exact))
        assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)

    def test_small_commutator_expansion(self, rng):
        X = 1e-3 * unit_matrix(rng, 3)
        Y = unit_matrix(rng, 3)
        Z = bch_first_order_standard(X, Y)
        approx = X + Y + comm(X, Y) / 2 + comm(X, comm(X, Y)) / 12
        assert np.linalg.norm(Z - approx) < 1e-10


class TestStringFunction:
    def setup_method(self):
        rng = np.random.default_rng(7)
        self.A = real_spectrum_matrix(rng, 3, norm=1.0)
        self.spec = eigendecompose(self.A)
        self.B1, self.B2 = unit_matrix(rng, 3), unit_matrix(rng, 3)

    def test_identity(self):
        out = apply_string_function(lambda x: 1.0, 1, 2, self.spec, [self.B1, self.B2])
        assert np.allclose(out, self.B1 @ self.B2)

    def test_exp_is_conjugation(self):
        out = apply_string_function(np.exp, 1, 1, self.spec, [self.B1])
        assert np.allclose(out, sl.expm(self.A) @ self.B1 @ sl.expm(-self.A))

    def test_linear_is_commutator(self):
        out = apply_string_function(lambda x: x, 1, 2, self.spec, [self.B1, self.B2])
        assert np.allclose(out, comm(self.A, self.B1 @ self.B2))

    def test_inner_position(self):
        out = apply_string_function(lambda x: x, 2, 2, self.spec, [self.B1, self.B2])
        assert np.allclose(out, self.B1 @ comm(self.A, self.B2))

    def test_bad_range(self):
        with pytest.raises(InputError):
            apply_string_function(np.exp, 2, 1, self.spec, [self.B1, self.B2])


class TestRegularized:
    @pytest.mark.parametrize("N", [1, 2, 3, 4])
    def test_matches_direct_off_degeneracy(self, rng, N):
        e = np.sort(rng.uniform(-2, 2, (20, N + 1)), axis=1)
        e = e + np.arange(N + 1) * 0.3
        vals, count = g_regularized(e, FallbackPolicy(gap=0.0))
        assert count == 0
        for row, v in zip(e, vals):
            assert v == pytest.approx(g_coefficient(N, row), rel=1e-13)

    @pytest.mark.parametrize("N", [2, 3])
    def test_continuity_at_coincidence(self, rng, N):
        base = rng.uniform(-1, 1, N + 1)
        base[1] = base[0]
        limit, count = g_regularized(base[None, :], FallbackPolicy())
        assert count == 1
        approach = [g_coefficient(N, base + np.eye(N + 1)[1] * h) for h in (1e-2, 5e-3)]
        # first-order extrapolation of the direct values toward h = 0
        extrap = 2 * approach[1] - approach[0]
        assert abs(limit[0] - extrap) < 1e-4

    def test_all_equal(self):
        # A = aI gives exactly 2aI + 2B
        for N in (1, 2, 3, 4, 5):
            vals, _ = g_regularized(np.full((1, N + 1), 0.4), FallbackPolicy())
            assert abs(vals[0] - (2.0 if N == 1 else 0.0)) < 1e-12

    def test_two_node_policy_is_symmetric_average(self):
        e = np.array([[0.2, 0.2 + 1e-9, 0.9]])
        coarse, _ = g_regularized(e, FallbackPolicy(radius=1e-4, nodes=2, gap=0.0, delta=1e-6))
        fine, _ = g_regularized(e, FallbackPolicy())
        assert abs(coarse[0] - fine[0]) < 1e-6

    def test_policy_validation(self):
        with pytest.raises(InputError):
            FallbackPolicy(radius=0)
        with pytest.raises(InputError):
            FallbackPolicy(nodes=1)


class TestTruncated:
    def test_order_zero(self, rng):
        A = real_spectrum_matrix(rng, 3)
        rep = bch_truncated(A, unit_matrix(rng, 3), 0)
        assert np.allclose(rep.Z, 2 * A) and rep.terms == []

    def test_zero_A(self, rng):
        B = unit_matrix(rng, 3, complex_entries=True)
        rep = bch_truncated(np.zeros((3, 3)), B, 4)
        assert np.allclose(rep.Z, 2 * B, atol=1e-12)
        assert rep.fallback_count > 0

    def test_zero_B(self, rng):
        A = real_spectrum_matrix(rng, 4)
        rep = bch_truncated(A, np.zeros((4, 4)), 3)
        assert np.array_equal(rep.Z, 2 * A)
        assert rep.fallback_count == 0

    def test_commuting(self, rng):
        a, b = rng.uniform(-1, 1, (2, 4))
        rep = bch_truncated(np.diag(a), np.diag(b), 3)
        assert np.allclose(rep.Z, np.diag(2 * a + 2 * b), atol=1e-10)

    def test_first_order_small_A(self, rng):
        A = 1e-4 * unit_matrix(rng, 3)
        B = unit_matrix(rng, 3)
        T1 = bch_truncated(A, B, 1).terms[0]
        # 2B - [A,[A,B]]/3 + O(A^4)
        assert np.linalg.norm(T1 - (2 * B - comm(A, comm(A, B)) / 3)) < 1e-12

    def test_time_reversal_parity(self, rng):
        # log(e^A e^{2B} e^A) is odd under (A, B) -> (-A, -B)
        A = real_spectrum_matrix(rng, 3, norm=1.0)
        B = unit_matrix(rng, 3)
        plus = bch_truncated(A, B, 4).terms
        minus = bch_truncated(-A, B, 4).terms
        for k, (p, m) in enumerate(zip(plus, minus), start=1):
            assert np.linalg.norm(m - (-1) ** (k + 1) * p) <= 1e-11 * max(1, np.linalg.norm(p))

    def test_second_order_vanishes_for_zero_A(self, rng):
        rep = bch_truncated(np.zeros((3, 3)), unit_matrix(rng, 3), 2)
        assert np.linalg.norm(rep.terms[1]) < 1e-12

    def test_monotone_improvement(self, rng):
        A = real_spectrum_matrix(rng, 4)
        B = 0.05 * unit_matrix(rng, 4)
        ref = direct_Z(A, B)
        errs = [np.linalg.norm(bch_truncated(A, B, N).Z - ref) for N in (1, 3, 5)]
        assert errs[0] > errs[1] > errs[2]

    def test_basis_invariance(self, rng):
        A = real_spectrum_matrix(rng, 3)
        B = unit_matrix(rng, 3)
        W = np.eye(3) + 0.2 * rng.normal(size=(3, 3))
        Wi = np.linalg.inv(W)
        Z1 = bch_truncated(A, B, 3).Z
        Z2 = bch_truncated(W @ A @ Wi, W @ B @ Wi, 3).Z
        assert np.linalg.norm(W @ Z1 @ Wi - Z2) <= 1e-9 * np.linalg.norm(Z2)

    def test_compare_oracle(self, rng):
        A = real_spectrum_matrix(rng, 3)
        rep = bch_truncated(A, 1e-3 * unit_matrix(rng, 3), 3, compare_oracle=True)
        assert rep.oracle_error is not None and rep.oracle_error < 1e-11

    def test_caps(self, rng):
        with pytest.raises(InputError):
            bch_truncated(np.eye(2), np.eye(2), 7)
        with pytest.raises(InputError):
            bch_truncated(np.eye(17), np.eye(17), 1)
        with pytest.raises(InputError):
            bch_truncated(np.eye(2), np.eye(3), 1)
        with pytest.raises(InputError):
            bch_truncated(np.eye(16), np.eye(16), 6)

    def test_defective_A(self):
        with pytest.raises(DecompositionError):
            bch_truncated(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2), 1)


def test_hermitian_sweep_slopes(rng):
    from bchseries.checks import error_sweep
    from bchseries.oracle import SweepGrid

    H = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    H = H + H.conj().T
    A = H / np.linalg.norm(H, 2)
    B = unit_matrix(rng, 4, complex_entries=True)
    result = error_sweep(A, B, range(1, 5), SweepGrid.logspace(1e-3, 1e-1, 8))
    for N, slope in result.slopes.items():
        assert abs(slope - (N + 1)) <= 0.3
