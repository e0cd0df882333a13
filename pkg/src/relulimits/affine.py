"""Exact piecewise-affine form of a ReLU net and the induced input regions.

Off the activation boundaries a ReLU net is affine: ``f(x) = V x + a`` where
``V`` multiplies the weight matrices with the active-unit masks interleaved,

    V = W_L diag(s_{L-1}) W_{L-1} ... diag(s_1) W_1,

and ``a`` accumulates the biases through the same masked products.  Both are
built layer by layer here, which simultaneously yields the *layer-truncated*
affine form of every hidden pre-activation; those truncated forms define one
half-space per hidden unit whose intersection is the (convex, possibly
unbounded) region sharing the anchor's activation signature.

Sign convention: a unit is *active* iff its pre-activation is strictly
positive; an exact zero counts as inactive.  A zero pre-activation is flagged
as boundary contact only when the unit's truncated affine form is not
identically zero (units silenced by frozen dropout masks sit at exact zero
everywhere and are not boundaries).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._jsonio import atomic_write_text, format_float
from .nn import MLPParams, forward_logits

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


def fnv1a64(data: bytes | str) -> int:
    """64-bit FNV-1a over bytes (strings are UTF-8 encoded)."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class ActivationSignature:
    """Per-hidden-layer activation bits; bit = 1 iff pre-activation > 0."""

    layer_bits: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        for bits in self.layer_bits:
            if any(b not in (0, 1) for b in bits):
                raise ValueError("signature bits must be 0 or 1")

    @property
    def total_bits(self) -> int:
        return sum(len(bits) for bits in self.layer_bits)

    def bit_string(self) -> str:
        """Layers concatenated first-to-last as an ASCII 0/1 string."""
        return "".join("".join(str(b) for b in bits) for bits in self.layer_bits)

    def hash64(self) -> int:
        """FNV-1a (64-bit) of the ASCII bit string."""
        return fnv1a64(self.bit_string())


@dataclass(frozen=True)
class AffinePiece:
    """The affine map f(x) = matrix @ x + offset valid on anchor's region."""

    matrix: np.ndarray
    offset: np.ndarray
    signature: ActivationSignature
    anchor_x: np.ndarray
    boundary_units: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        offset = np.ascontiguousarray(self.offset, dtype=np.float64)
        anchor = np.ascontiguousarray(self.anchor_x, dtype=np.float64)
        if matrix.ndim != 2 or offset.shape != (matrix.shape[0],):
            raise ValueError("matrix must be (C, D) with offset of length C")
        if anchor.shape != (matrix.shape[1],):
            raise ValueError("anchor must have length D")
        for arr in (matrix, offset, anchor):
            arr.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "anchor_x", anchor)

    @property
    def boundary_contact(self) -> bool:
        return bool(self.boundary_units)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=np.float64) + self.offset


@dataclass(frozen=True)
class HalfSpace:
    """{z : normal . z + offset >= 0}; an all-zero normal is degenerate."""

    normal: np.ndarray
    offset: float

    def __post_init__(self) -> None:
        normal = np.ascontiguousarray(self.normal, dtype=np.float64)
        if not np.all(np.isfinite(normal)) or not math.isfinite(self.offset):
            raise ValueError("half-space coefficients must be finite")
        normal.setflags(write=False)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def degenerate(self) -> bool:
        return not np.any(self.normal)

    def contains(self, z: np.ndarray, strict: bool = False) -> bool:
        value = float(self.normal @ np.asarray(z, dtype=np.float64) + self.offset)
        return value > 0.0 if strict else value >= 0.0


@dataclass(frozen=True)
class PolytopeDescription:
    """Intersection of one half-space per hidden unit, anchored at a point.

    Any point strictly inside every non-degenerate half-space shares the
    anchor's activation signature.  Degenerate (all-zero-normal) half-spaces
    come from units whose truncated affine form vanishes identically; their
    activation bits are constant, so membership checks skip them.
    """

    halfspaces: tuple[HalfSpace, ...]
    signature: ActivationSignature
    anchor_x: np.ndarray

    def __post_init__(self) -> None:
        anchor = np.ascontiguousarray(self.anchor_x, dtype=np.float64)
        anchor.setflags(write=False)
        object.__setattr__(self, "anchor_x", anchor)

    def contains(self, z: np.ndarray, strict: bool = False) -> bool:
        return all(
            hs.contains(z, strict=strict)
            for hs in self.halfspaces
            if not hs.degenerate
        )


def _sweep(params: MLPParams, x: np.ndarray, collect_layers: bool):
    """Shared forward + masked-product pass.

    Returns (signature bits, V, a, boundary units, per-hidden-layer truncated
    forms).  Signature bits come from the true forward pre-activations so
    they agree bitwise with plain forward evaluation; V and a are built from
    the masked products using those bits.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ValueError(f"expected input of shape ({params.input_dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    h = x
    v_cur: np.ndarray | None = None
    a_cur: np.ndarray | None = None
    bits: list[tuple[int, ...]] = []
    boundary: list[tuple[int, int]] = []
    layer_forms: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    n_hidden = params.depth - 1
    for l in range(n_hidden):
        w, b = params.weights[l], params.biases[l]
        pre = w @ h + b
        if v_cur is None:
            v_l = w.copy()
            a_l = b.copy()
        else:
            v_l = w @ v_cur
            a_l = w @ a_cur + b
        active = pre > 0.0
        bits.append(tuple(int(v) for v in active))
        for i in np.flatnonzero(pre == 0.0):
            if np.any(v_l[i]) or a_l[i] != 0.0:
                boundary.append((l, int(i)))
        if collect_layers:
            layer_forms.append((pre, v_l, a_l))
        mask = active.astype(np.float64)
        v_cur = mask[:, None] * v_l
        a_cur = mask * a_l
        h = np.maximum(pre, 0.0)
    w_out, b_out = params.weights[-1], params.biases[-1]
    if v_cur is None:
        v_final = w_out.copy()
        a_final = b_out.copy()
    else:
        v_final = w_out @ v_cur
        a_final = w_out @ a_cur + b_out
    signature = ActivationSignature(tuple(bits))
    return signature, v_final, a_final, tuple(boundary), layer_forms, x


def linearize(params: MLPParams, x: np.ndarray) -> AffinePiece:
    """Exact affine form (V, a) of the net on the region containing ``x``.

    ``V`` equals the Jacobian of the logits wherever ``x`` is off every
    activation boundary, and ``V x + a`` reproduces the forward logits to
    float rounding (the test suite pins 1e-9).
    """
    signature, v, a, boundary, _, anchor = _sweep(params, x, collect_layers=False)
    return AffinePiece(v, a, signature, anchor, boundary)


def signature_at(params: MLPParams, x: np.ndarray) -> ActivationSignature:
    """Activation signature of ``x`` (strictly-positive convention)."""
    signature, *_ = _sweep(params, x, collect_layers=False)
    return signature


def polytope_of(params: MLPParams, x: np.ndarray) -> PolytopeDescription:
    """Half-space description of the activation region containing ``x``.

    For hidden unit ``i`` of layer ``l`` with truncated affine form
    ``(V_l[i], a_l[i])`` and pre-activation sign ``delta`` at the anchor, the
    half-space is ``{z : delta * (V_l[i] . z + a_l[i]) >= 0}``.  An exactly
    zero pre-activation gives ``delta = 0`` (a degenerate constraint) and,
    when the truncated form is nonzero, marks anchor boundary contact.
    """
    signature, _, _, _, layer_forms, anchor = _sweep(params, x, collect_layers=True)
    halfspaces: list[HalfSpace] = []
    for pre, v_l, a_l in layer_forms:
        delta = np.sign(pre)
        for i in range(pre.shape[0]):
            halfspaces.append(HalfSpace(delta[i] * v_l[i], float(delta[i] * a_l[i])))
    return PolytopeDescription(tuple(halfspaces), signature, anchor)


@dataclass(frozen=True)
class ZeroEntryAudit:
    """Zero-entry scan of a piece's matrix at an exact and a near tolerance."""

    has_zero: bool
    zero_mask: np.ndarray
    near_zero_count: int
    tol: float

    def __post_init__(self) -> None:
        mask = np.ascontiguousarray(self.zero_mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "zero_mask", mask)


NEAR_ZERO_TOL = 1e-12


def zero_entry_audit(piece: AffinePiece, tol: float = 0.0) -> ZeroEntryAudit:
    """Entries of V with |v| <= tol (default: exact zeros), plus a secondary
    count at the fixed near-zero tolerance 1e-12."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    magnitude = np.abs(piece.matrix)
    mask = magnitude <= tol
    near = int(np.count_nonzero(magnitude <= NEAR_ZERO_TOL))
    return ZeroEntryAudit(bool(mask.any()), mask, near, tol)


def duplicate_column_audit(piece: AffinePiece, dim: int, tol: float = 1e-12) -> bool:
    """True iff column ``dim`` of V contains two entries within ``tol``."""
    col = piece.matrix[:, dim]
    if col.shape[0] < 2:
        return False
    diff = np.abs(col[:, None] - col[None, :])
    iu = np.triu_indices(col.shape[0], k=1)
    return bool(np.any(diff[iu] <= tol))


@dataclass(frozen=True)
class MonotonicityAudit:
    """Entrywise signs of V; strictly monotonic iff no entry is zero."""

    signs: np.ndarray
    strictly_monotonic: bool

    def __post_init__(self) -> None:
        signs = np.ascontiguousarray(self.signs, dtype=np.int64)
        signs.setflags(write=False)
        object.__setattr__(self, "signs", signs)


def monotonicity_audit(piece: AffinePiece) -> MonotonicityAudit:
    signs = np.sign(piece.matrix).astype(np.int64)
    return MonotonicityAudit(signs, bool(np.all(signs != 0)))


def fd_jacobian(params: MLPParams, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian of the logits, shape (C, D)."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=np.float64)
    jac = np.empty((params.output_dim, x.shape[0]), dtype=np.float64)
    for d in range(x.shape[0]):
        plus = x.copy()
        minus = x.copy()
        plus[d] += h
        minus[d] -= h
        jac[:, d] = (forward_logits(params, plus) - forward_logits(params, minus)) / (2 * h)
    return jac


REGION_CSV_HEADER = "x0,x1,signature_hash,has_zero_entry,v00,v01,v10,v11,a0,a1"


def export_region_csv(
    params: MLPParams, points: Iterable[np.ndarray], path: str
) -> None:
    """Per-point region rows for the 2-in/2-out case (pinned column layout)."""
    if params.input_dim != 2 or params.output_dim != 2:
        raise ValueError("region CSV export is defined for 2-D input, 2-class output")
    lines = [REGION_CSV_HEADER]
    for point in points:
        piece = linearize(params, np.asarray(point, dtype=np.float64))
        audit = zero_entry_audit(piece)
        v = piece.matrix
        a = piece.offset
        lines.append(
            ",".join(
                [
                    format_float(piece.anchor_x[0]),
                    format_float(piece.anchor_x[1]),
                    str(piece.signature.hash64()),
                    str(int(audit.has_zero)),
                    format_float(v[0, 0]),
                    format_float(v[0, 1]),
                    format_float(v[1, 0]),
                    format_float(v[1, 1]),
                    format_float(a[0]),
                    format_float(a[1]),
                ]
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")
