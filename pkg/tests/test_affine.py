"""Exact local affine pieces, activation signatures, and region geometry.

The central contract: at any input x the piece returned by ``linearize``
reproduces the forward logits to machine precision, its matrix is the local
Jacobian, and its signature/polytope describe the surrounding linear region.
"""

from __future__ import annotations

import numpy as np
import pytest

from conftest import random_params
from relulimits import (
    HalfSpace,
    MLPParams,
    SplitMix64,
    duplicate_column_audit,
    fd_jacobian,
    fnv1a64,
    forward_logits,
    linearize,
    monotonicity_audit,
    polytope_of,
    signature_at,
    zero_entry_audit,
)
from relulimits.affine import ActivationSignature, export_region_csv, REGION_CSV_HEADER


def naive_signature(params: MLPParams, x: np.ndarray) -> tuple[tuple[int, ...], ...]:
    """Recompute hidden activation bits with an independent loop."""
    acts = np.asarray(x, dtype=np.float64)
    bits = []
    for l in range(len(params.weights) - 1):
        pre = params.weights[l] @ acts + params.biases[l]
        bits.append(tuple(int(p > 0.0) for p in pre))
        acts = np.maximum(pre, 0.0)
    return tuple(bits)


class TestLinearize:
    def test_reproduces_forward_exactly(self):
        """V x + a equals the forward pass bit-for-bit on random nets: the
        sweep reuses the same products the forward pass performs."""
        rng = SplitMix64(3)
        for seed in range(8):
            params = random_params((2, 10, 8, 2), seed=seed)
            for _ in range(25):
                x = 3.0 * rng.normal(2)
                piece = linearize(params, x)
                np.testing.assert_allclose(
                    piece(x), forward_logits(params, x), rtol=0, atol=1e-9
                )

    def test_identity_network(self):
        params = MLPParams((np.eye(2),), (np.zeros(2),))
        piece = linearize(params, np.array([1.0, 2.0]))
        np.testing.assert_array_equal(piece.matrix, np.eye(2))
        np.testing.assert_array_equal(piece.offset, np.zeros(2))

    def test_hand_computed_two_layer_case(self):
        """One hidden layer, unit 0 active, unit 1 dead: V = W2 diag(1,0) W1."""
        w1 = np.array([[1.0, 0.0], [0.0, 1.0]])
        b1 = np.array([0.0, 0.0])
        w2 = np.array([[2.0, 3.0], [-1.0, 4.0]])
        b2 = np.array([0.5, -0.5])
        params = MLPParams((w1, w2), (b1, b2))
        x = np.array([1.0, -1.0])  # unit 0 pre = 1 > 0, unit 1 pre = -1
        piece = linearize(params, x)
        expected_v = w2 @ np.diag([1.0, 0.0]) @ w1
        np.testing.assert_array_equal(piece.matrix, expected_v)
        np.testing.assert_array_equal(piece.offset, b2)
        assert piece.signature.layer_bits == ((1, 0),)

    def test_piece_constant_inside_region(self):
        """Nearby points with the same signature share the identical piece."""
        params = random_params((2, 8, 8, 2), seed=4)
        x = np.array([0.4, -0.2])
        piece = linearize(params, x)
        for _ in range(20):
            z = x + 1e-6 * SplitMix64(1).normal(2)
            other = linearize(params, z)
            if other.signature == piece.signature:
                np.testing.assert_array_equal(other.matrix, piece.matrix)
                np.testing.assert_array_equal(other.offset, piece.offset)

    def test_matrix_is_jacobian(self):
        rng = SplitMix64(9)
        params = random_params((2, 12, 10, 2), seed=2)
        checked = 0
        for _ in range(50):
            x = 3.0 * rng.normal(2)
            piece = linearize(params, x)
            if piece.boundary_contact:
                continue
            fd = fd_jacobian(params, x)
            scale = max(1.0, float(np.max(np.abs(piece.matrix))))
            assert np.max(np.abs(piece.matrix - fd)) / scale < 1e-4
            checked += 1
        assert checked >= 40

    def test_linear_net_jacobian_equals_weights(self):
        w = np.array([[1.5, -2.0], [0.25, 3.0]])
        params = MLPParams((w,), (np.array([1.0, -1.0]),))
        fd = fd_jacobian(params, np.array([0.3, 0.8]))
        np.testing.assert_allclose(fd, w, atol=1e-10)

    def test_boundary_contact_flag(self):
        """A unit with pre-activation exactly 0 and a live incoming row."""
        w1 = np.array([[1.0, 0.0], [0.0, 1.0]])
        params = MLPParams(
            (w1, np.ones((2, 2))), (np.zeros(2), np.zeros(2))
        )
        piece = linearize(params, np.array([0.0, 1.0]))
        assert piece.boundary_contact
        assert (0, 0) in piece.boundary_units
        off = linearize(params, np.array([0.5, 1.0]))
        assert not off.boundary_contact

    def test_dead_unit_is_not_boundary_contact(self):
        """Zero row + zero bias gives pre = 0 with an identically zero
        truncated form; that is a dead unit, not a boundary."""
        w1 = np.array([[0.0, 0.0], [1.0, 1.0]])
        params = MLPParams((w1, np.ones((2, 2))), (np.zeros(2), np.zeros(2)))
        piece = linearize(params, np.array([1.0, 1.0]))
        assert not piece.boundary_contact


class TestSignature:
    def test_matches_naive_bits(self):
        rng = SplitMix64(17)
        for seed in range(5):
            params = random_params((2, 9, 7, 2), seed=seed)
            for _ in range(20):
                x = 3.0 * rng.normal(2)
                sig = signature_at(params, x)
                assert sig.layer_bits == naive_signature(params, x)

    def test_same_point_same_signature(self, tiny_params):
        x = np.array([0.7, 0.1])
        assert signature_at(tiny_params, x) == signature_at(tiny_params, x)

    def test_crossing_boundary_flips_a_bit(self):
        """Bisection across a hinge: signatures differ on the two sides."""
        params = random_params((2, 8, 2), seed=6)
        rng = SplitMix64(23)
        found = 0
        for _ in range(50):
            a = 3.0 * rng.normal(2)
            b = 3.0 * rng.normal(2)
            sa, sb = signature_at(params, a), signature_at(params, b)
            if sa != sb:
                found += 1
                assert sa.bit_string() != sb.bit_string()
        assert found > 0

    def test_hash_is_fnv1a_of_bit_string(self):
        sig = ActivationSignature(((1, 0, 1), (0, 1)))
        assert sig.bit_string() == "10101"
        assert sig.hash64() == fnv1a64("10101")


class TestFnv1a:
    def test_published_vectors(self):
        assert fnv1a64(b"") == 0xCBF29CE484222325
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a64(b"foobar") == 0x85944171F73967E8

    def test_str_and_bytes_agree(self):
        assert fnv1a64("0110") == fnv1a64(b"0110")


class TestPolytope:
    def test_single_unit_half_space(self):
        """W1=[[1,0]], b1=0 at x=(1,0): the region is exactly {z0 >= 0}."""
        params = MLPParams(
            (np.array([[1.0, 0.0]]), np.array([[1.0], [2.0]])),
            (np.zeros(1), np.zeros(2)),
        )
        poly = polytope_of(params, np.array([1.0, 0.0]))
        assert len(poly.halfspaces) == 1
        hs = poly.halfspaces[0]
        np.testing.assert_array_equal(hs.normal, [1.0, 0.0])
        assert hs.offset == 0.0
        assert poly.contains(np.array([5.0, -3.0]))
        assert not poly.contains(np.array([-0.1, 0.0]), strict=True)

    def test_one_halfspace_per_hidden_unit(self, tiny_params):
        poly = polytope_of(tiny_params, np.array([0.3, 0.3]))
        assert len(poly.halfspaces) == 10

    def test_membership_iff_same_signature(self, tiny_params):
        """Points sampled near the anchor: inside the polytope exactly when
        the signature matches the anchor's."""
        anchor = np.array([0.25, -0.4])
        poly = polytope_of(tiny_params, anchor)
        sig = signature_at(tiny_params, anchor)
        rng = SplitMix64(31)
        inside = outside = 0
        for _ in range(300):
            z = anchor + 0.5 * rng.normal(2)
            same = signature_at(tiny_params, z) == sig
            if poly.contains(z, strict=True):
                assert same
                inside += 1
            elif not poly.contains(z):
                assert not same
                outside += 1
        assert inside > 10 and outside > 10

    def test_degenerate_halfspace_flagged_and_skipped(self):
        """A dead unit contributes an all-zero normal; membership ignores it."""
        w1 = np.array([[0.0, 0.0], [1.0, 0.0]])
        b1 = np.array([-1.0, 0.5])
        params = MLPParams((w1, np.ones((2, 2))), (b1, np.zeros(2)))
        poly = polytope_of(params, np.array([1.0, 1.0]))
        degenerate = [hs for hs in poly.halfspaces if hs.degenerate]
        assert len(degenerate) == 1
        assert poly.contains(np.array([100.0, 100.0]))

    def test_halfspace_validation(self):
        with pytest.raises(ValueError):
            HalfSpace(np.array([np.nan, 0.0]), 0.0)


class TestAudits:
    def test_zero_entry_detection(self):
        dead = MLPParams(
            (np.zeros((3, 2)), np.ones((2, 3))), (np.full(3, -1.0), np.zeros(2))
        )
        piece = linearize(dead, np.array([1.0, 1.0]))
        audit = zero_entry_audit(piece)
        assert audit.has_zero
        assert audit.zero_mask.all()

    def test_dense_matrix_clean_at_tol_zero(self):
        params = random_params((2, 6, 2), seed=8)
        piece = linearize(params, np.array([0.3, 0.4]))
        if not zero_entry_audit(piece).has_zero:
            assert zero_entry_audit(piece).near_zero_count >= 0

    def test_near_zero_entry_counted_at_both_tolerances(self):
        """An entry of 1e-15 is below the near tolerance (so it is counted
        and flagged at tol=1e-12) but is not an exact zero at tol=0."""
        v = np.array([[1.0, 1e-15], [0.5, 2.0]])
        piece = linearize(MLPParams((v,), (np.zeros(2),)), np.array([1.0, 1.0]))
        exact = zero_entry_audit(piece)
        assert not exact.has_zero
        assert exact.near_zero_count == 1
        loose = zero_entry_audit(piece, tol=1e-12)
        assert loose.has_zero
        assert loose.zero_mask.sum() == 1

    def test_duplicate_column_audit(self):
        v_dup = MLPParams((np.array([[1.0, 5.0], [1.0, 6.0]]),), (np.zeros(2),))
        piece = linearize(v_dup, np.array([1.0, 1.0]))
        assert duplicate_column_audit(piece, dim=0)
        assert not duplicate_column_audit(piece, dim=1)

    def test_monotonicity_audit_signs(self):
        v = np.array([[2.0, -1.0], [0.0, 3.0]])
        piece = linearize(MLPParams((v,), (np.zeros(2),)), np.array([1.0, 1.0]))
        audit = monotonicity_audit(piece)
        assert not audit.strictly_monotonic
        np.testing.assert_array_equal(audit.signs, np.sign(v))

    def test_all_positive_matrix_strictly_monotone(self):
        v = np.array([[2.0, 1.0], [0.5, 3.0]])
        piece = linearize(MLPParams((v,), (np.zeros(2),)), np.array([1.0, 1.0]))
        assert monotonicity_audit(piece).strictly_monotonic


class TestRegionCsv:
    def test_export_format(self, tiny_params, tmp_path):
        rng = SplitMix64(2)
        points = 2.0 * rng.normal(20).reshape(10, 2)
        path = tmp_path / "regions.csv"
        export_region_csv(tiny_params, points, str(path))
        lines = path.read_text().strip().split("\n")
        assert lines[0] == REGION_CSV_HEADER
        assert len(lines) == 11
        row = lines[1].split(",")
        assert len(row) == len(REGION_CSV_HEADER.split(","))
        # hash column round-trips as the signature hash at that point
        x = points[0]
        assert int(row[2]) == signature_at(tiny_params, x).hash64()
