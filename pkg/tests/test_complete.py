import numpy as np
import pytest

from hybridcorr import (
    ComponentSpec,
    G2Params,
    HestonParams,
    HybridSystemSpec,
    InnerCholesky,
    assemble_block_matrix,
    complete_g2_heston,
    complete_heston_heston,
    complete_panel,
)
from hybridcorr.models import KIND_G2, KIND_HESTON

G2 = ComponentSpec(KIND_G2, G2Params(0.1, 0.2, 0.01, 0.02, 0.5))


def heston(rho):
    return ComponentSpec(KIND_HESTON, HestonParams(1.0, 0.2, 0.3, 0.1, rho))


class TestFormulas:
    def test_g2_heston_worked_example(self):
        assert complete_g2_heston(0.30, 0.20, -0.8) == pytest.approx((-0.24, -0.16), abs=1e-15)

    def test_g2_heston_zero_inner(self):
        assert complete_g2_heston(0.7, -0.5, 0.0) == (0.0, -0.0)

    def test_g2_heston_unit_inner_collapses(self):
        assert complete_g2_heston(0.7, -0.5, 1.0) == (0.7, -0.5)

    def test_heston_heston_worked_example(self):
        got = complete_heston_heston(0.5, -0.8, -0.7)
        assert got == pytest.approx((-0.35, -0.40, 0.28), abs=1e-15)

    def test_heston_heston_decoupled(self):
        assert complete_heston_heston(0.0, -0.8, -0.7) == (0.0, -0.0, 0.0)

    def test_completed_cross_block_is_singular(self):
        s_v, v_s, v_v = complete_heston_heston(0.5, -0.8, -0.7)
        block = np.array([[0.5, s_v], [v_s, v_v]])
        assert np.linalg.det(block) == pytest.approx(0.0, abs=1e-15)

    def test_outputs_bounded_for_bounded_inputs(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            xs, ys, rj = rng.uniform(-1, 1, size=3)
            out = complete_g2_heston(xs, ys, rj)
            assert max(abs(out[0]), abs(out[1])) <= 1.0
            ss, ri = rng.uniform(-1, 1, size=2)
            out = complete_heston_heston(ss, ri, rj)
            assert max(abs(v) for v in out) <= 1.0


class TestCholeskyAlgebra:
    def test_inner_cholesky_reproduces_block(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            rho = rng.uniform(-1, 1)
            L = InnerCholesky(rho).L
            assert np.abs(L @ L.T - [[1, rho], [rho, 1]]).max() < 1e-14

    def test_reconstruction_matches_direct_formulas(self):
        # L_i Omega L_j^T with Omega = [[c11, 0], [0, 0]] reproduces the
        # both-variances-missing fill for c11 = corr(s_i, s_j)
        rng = np.random.default_rng(4)
        for _ in range(200):
            ss, ri, rj = rng.uniform(-1, 1, size=3)
            omega = np.array([[ss, 0.0], [0.0, 0.0]])
            block = InnerCholesky(ri).reconstruct_cross(omega, InnerCholesky(rj))
            s_v, v_s, v_v = complete_heston_heston(ss, ri, rj)
            expect = np.array([[ss, s_v], [v_s, v_v]])
            assert np.abs(block - expect).max() < 1e-14

    def test_unit_rho_edge_is_well_defined(self):
        L = InnerCholesky(1.0).L
        assert np.array_equal(L, [[1.0, 0.0], [1.0, 0.0]])


def draft_g2_heston(rho_j=-0.8, x_s=0.30, y_s=0.20, masked=True):
    cross = np.array([[x_s, np.nan], [y_s, np.nan]]) if masked else np.array(
        [[x_s, x_s * rho_j], [y_s, y_s * rho_j]]
    )
    return assemble_block_matrix(
        [[[1.0, 0.5], [0.5, 1.0]], [[1.0, rho_j], [rho_j, 1.0]]],
        {(0, 1): cross},
        labels=("0.x", "0.y", "1.s", "1.v"),
    )


class TestCompletePanel:
    def test_no_mask_returns_input_unchanged(self):
        draft = draft_g2_heston(masked=False)
        spec = HybridSystemSpec((G2, heston(-0.8)))
        out = complete_panel(draft, spec)
        assert out is draft

    def test_g2_heston_fill(self):
        draft = draft_g2_heston()
        spec = HybridSystemSpec((G2, heston(-0.8)))
        out = complete_panel(draft, spec)
        assert out.entries[0, 3] == pytest.approx(-0.24, abs=1e-15)
        assert out.entries[1, 3] == pytest.approx(-0.16, abs=1e-15)
        assert np.array_equal(out.entries, out.entries.T)
        assert not np.isnan(out.entries).any()

    def test_completed_column_proportional(self):
        draft = draft_g2_heston(rho_j=-0.6, x_s=0.41, y_s=-0.13)
        out = complete_panel(draft, HybridSystemSpec((G2, heston(-0.6))))
        col_s = out.entries[0:2, 2]
        col_v = out.entries[0:2, 3]
        assert np.abs(col_v - col_s * -0.6).max() < 1e-15

    def test_heston_heston_both_missing_rank_one(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            ss, ri, rj = rng.uniform(-0.99, 0.99, size=3)
            cross = np.full((2, 2), np.nan)
            cross[0, 0] = ss
            draft = assemble_block_matrix(
                [[[1.0, ri], [ri, 1.0]], [[1.0, rj], [rj, 1.0]]],
                {(0, 1): cross},
                labels=("0.s", "0.v", "1.s", "1.v"),
            )
            out = complete_panel(draft, HybridSystemSpec((heston(ri), heston(rj))))
            block = out.cross_block(0, 1)
            assert abs(np.linalg.det(block)) < 1e-14
            expect = ss * np.array([[1.0, rj], [ri, ri * rj]])
            assert np.abs(block - expect).max() < 1e-14

    def test_one_variance_missing_uses_observed_row(self):
        # v0 observed, v1 missing: the v1 column comes from the s1 column
        cross = np.array([[0.5, np.nan], [-0.1, np.nan]])
        draft = assemble_block_matrix(
            [[[1.0, -0.8], [-0.8, 1.0]], [[1.0, -0.7], [-0.7, 1.0]]],
            {(0, 1): cross},
            labels=("0.s", "0.v", "1.s", "1.v"),
        )
        out = complete_panel(draft, HybridSystemSpec((heston(-0.8), heston(-0.7))))
        assert out.entries[0, 3] == pytest.approx(0.5 * -0.7, abs=1e-15)
        assert out.entries[1, 3] == pytest.approx(-0.1 * -0.7, abs=1e-15)
        assert out.entries[1, 2] == -0.1  # observed entry untouched

    def test_masked_stock_entry_rejected(self):
        cross = np.array([[np.nan, np.nan], [0.3, np.nan]])
        draft = assemble_block_matrix(
            [[[1.0, -0.8], [-0.8, 1.0]], [[1.0, -0.7], [-0.7, 1.0]]],
            {(0, 1): cross},
            labels=("0.s", "0.v", "1.s", "1.v"),
        )
        with pytest.raises(ValueError, match="observed stock series"):
            complete_panel(draft, HybridSystemSpec((heston(-0.8), heston(-0.7))))

    def test_masked_diagonal_entry_rejected(self):
        draft = draft_g2_heston(masked=False)
        M = draft.entries.copy()
        mask = np.zeros(M.shape, dtype=bool)
        mask[2, 3] = mask[3, 2] = True
        with pytest.raises(ValueError, match="diagonal block"):
            complete_panel(draft, HybridSystemSpec((G2, heston(-0.8))), mask)
