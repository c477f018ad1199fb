"""Tolerance-aware dense linear algebra and subspace calculus over R and C.

Every rank decision in the package goes through :class:`Tolerance`: a
singular value counts as nonzero when it exceeds ``max(abs, rel * scale)``,
where ``scale`` defaults to the largest singular value of the matrix being
tested.  Composite operations pass an explicit ``scale`` taken from the
unprojected operand, so that a product that is zero up to roundoff is not
mistaken for a full-rank matrix of tiny norm.

Subspaces are stored as orthonormal bases; every operation returning a
:class:`Subspace` re-orthonormalizes its output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError

__all__ = [
    "Tolerance",
    "DEFAULT_TOL",
    "Subspace",
    "SubspaceArrangement",
    "singular_values",
    "sigma_max",
    "rank_tol",
    "null_space",
    "column_space",
    "subspace_sum",
    "intersect",
    "preimage",
    "image",
    "contained_in",
    "subspaces_equal",
    "cos_vector_subspace",
    "pinv",
    "matrix_to_json",
    "matrix_from_json",
]


@dataclass(frozen=True)
class Tolerance:
    """Relative threshold plus an absolute floor for rank decisions."""

    rel: float = 1e-10
    abs: float = 1e-13

    def __post_init__(self):
        if not self.rel > 0:
            raise InputError(f"Tolerance.rel must be positive, got {self.rel}")
        if not self.abs >= 0:
            raise InputError(f"Tolerance.abs must be nonnegative, got {self.abs}")

    def threshold(self, scale):
        return max(self.abs, self.rel * float(scale))

    def to_json(self):
        return {"rel": self.rel, "abs": self.abs}


DEFAULT_TOL = Tolerance()


def _checked(M, name="matrix"):
    A = np.asarray(M)
    if A.dtype == object or not (np.issubdtype(A.dtype, np.number)):
        raise InputError(f"{name} must be numeric")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    if np.issubdtype(A.dtype, np.integer) or A.dtype == bool:
        A = A.astype(float)
    return A


def _as_matrix(M, name="matrix"):
    A = _checked(M, name)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise InputError(f"{name} must be 2-dimensional, got shape {A.shape}")
    return A


def _field_of(*arrays):
    return "complex" if any(np.iscomplexobj(a) for a in arrays) else "real"


def singular_values(M):
    """Singular values, descending; works on a single matrix or a stack."""
    A = _checked(M)
    if A.shape[-1] == 0 or A.shape[-2] == 0:
        return np.zeros(A.shape[:-2] + (0,))
    return np.linalg.svd(A, compute_uv=False)


def sigma_max(M):
    """Largest singular value (0 for empty matrices)."""
    s = singular_values(M)
    if s.shape[-1] == 0:
        return 0.0 if s.ndim == 1 else np.zeros(s.shape[:-1])
    return s[..., 0] if s.ndim > 1 else float(s[0])


def rank_tol(M, tol=DEFAULT_TOL, scale=None):
    """Numerical rank.

    For a stack of matrices (ndim 3) returns an integer array with one rank
    per matrix; ``scale`` may then be an array broadcastable to the stack.
    """
    s = singular_values(M)
    if s.shape[-1] == 0:
        return 0 if s.ndim == 1 else np.zeros(s.shape[:-1], dtype=int)
    ref = s[..., 0] if scale is None else np.asarray(scale, dtype=float)
    thresh = np.maximum(tol.abs, tol.rel * ref)
    ranks = np.sum(s > np.expand_dims(thresh, -1), axis=-1)
    if s.ndim == 1:
        return int(ranks)
    return ranks.astype(int)


class Subspace:
    """A linear subspace of H^n held as an orthonormal basis (n x d)."""

    __slots__ = ("_basis", "_field")

    def __init__(self, basis, field=None):
        B = _checked(basis, "basis")
        if B.ndim != 2:
            raise InputError(f"basis must be n x d, got shape {B.shape}")
        if B.shape[1] > B.shape[0]:
            raise InputError("basis has more columns than rows")
        if field is None:
            field = _field_of(B)
        if field not in ("real", "complex"):
            raise InputError(f"field must be 'real' or 'complex', got {field!r}")
        if field == "complex":
            B = B.astype(complex)
        elif np.iscomplexobj(B):
            raise InputError("complex basis tagged as real")
        B = B.copy()
        B.setflags(write=False)
        self._basis = B
        self._field = field

    @classmethod
    def from_spanning(cls, M, tol=DEFAULT_TOL, field=None, scale=None):
        """Column space of an arbitrary spanning matrix."""
        return column_space(M, tol=tol, field=field, scale=scale)

    @classmethod
    def zero(cls, n, field="real"):
        dtype = complex if field == "complex" else float
        return cls(np.zeros((n, 0), dtype=dtype), field)

    @classmethod
    def full(cls, n, field="real"):
        dtype = complex if field == "complex" else float
        return cls(np.eye(n, dtype=dtype), field)

    @classmethod
    def coordinate(cls, n, indices, field="real"):
        """span{e_i : i in indices}."""
        dtype = complex if field == "complex" else float
        B = np.zeros((n, len(indices)), dtype=dtype)
        for col, i in enumerate(indices):
            B[i, col] = 1.0
        return cls(B, field)

    @property
    def basis(self):
        return self._basis

    @property
    def field(self):
        return self._field

    @property
    def ambient_dim(self):
        return self._basis.shape[0]

    @property
    def dim(self):
        return self._basis.shape[1]

    def projector(self):
        B = self._basis
        return B @ B.conj().T

    def complement_projector(self):
        return np.eye(self.ambient_dim) - self.projector()

    def complement(self, tol=DEFAULT_TOL):
        """Orthogonal complement."""
        if self.dim == 0:
            return Subspace.full(self.ambient_dim, self._field)
        return null_space(self._basis.conj().T, tol=tol, scale=1.0)

    def complexify(self):
        return Subspace(self._basis.astype(complex), "complex")

    def orthonormality_error(self):
        d = self.dim
        if d == 0:
            return 0.0
        B = self._basis
        return float(np.linalg.norm(B.conj().T @ B - np.eye(d), 2))

    def to_json(self):
        return matrix_to_json(self._basis)

    @classmethod
    def from_json(cls, obj, tol=DEFAULT_TOL):
        return column_space(matrix_from_json(obj), tol=tol, field=obj.get("field"))

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim}, field={self._field!r})"


def _orthonormal_columns(U):
    # QR pass tightens orthonormality of SVD factors to a few ulps
    if U.shape[1] == 0:
        return U
    Q, R = np.linalg.qr(U)
    signs = np.sign(np.real(np.diag(R)))
    signs[signs == 0] = 1
    return Q * signs


def column_space(M, tol=DEFAULT_TOL, field=None, scale=None):
    A = _as_matrix(M)
    n = A.shape[0]
    field = field or _field_of(A)
    if A.shape[1] == 0:
        return Subspace.zero(n, field)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    ref = s[0] if scale is None else scale
    r = int(np.sum(s > tol.threshold(ref))) if s.size else 0
    return Subspace(_orthonormal_columns(U[:, :r]), field)


def null_space(M, tol=DEFAULT_TOL, scale=None, field=None):
    """Kernel of M as a Subspace of H^ncols."""
    A = _as_matrix(M)
    n = A.shape[1]
    field = field or _field_of(A)
    if A.shape[0] == 0 or n == 0:
        return Subspace.full(n, field)
    _, s, Vh = np.linalg.svd(A, full_matrices=True)
    ref = s[0] if scale is None else scale
    r = int(np.sum(s > tol.threshold(ref))) if s.size else 0
    N = Vh[r:].conj().T
    return Subspace(_orthonormal_columns(N), field)


def _check_same_ambient(U, W):
    if U.ambient_dim != W.ambient_dim:
        raise InputError(
            f"ambient dimension mismatch: {U.ambient_dim} vs {W.ambient_dim}"
        )


def subspace_sum(U, W, tol=DEFAULT_TOL):
    _check_same_ambient(U, W)
    field = _field_of(U.basis, W.basis)
    return column_space(np.hstack([U.basis, W.basis]), tol=tol, field=field, scale=1.0)


def intersect(U, W, tol=DEFAULT_TOL):
    """U ∩ W as the kernel of the stacked complement projectors."""
    _check_same_ambient(U, W)
    field = _field_of(U.basis, W.basis)
    if U.dim == 0 or W.dim == 0:
        return Subspace.zero(U.ambient_dim, field)
    stacked = np.vstack([U.complement_projector(), W.complement_projector()])
    return null_space(stacked, tol=tol, scale=1.0, field=field)


def preimage(T, W, tol=DEFAULT_TOL):
    """T^{-1}(W) = ker(P_{W⊥} T)."""
    T = _as_matrix(T, "T")
    if T.shape[0] != W.ambient_dim:
        raise InputError(f"map targets H^{T.shape[0]}, subspace lives in H^{W.ambient_dim}")
    field = _field_of(T, W.basis)
    scale = max(sigma_max(T), 1.0)
    return null_space(W.complement_projector() @ T, tol=tol, scale=scale, field=field)


def image(T, U, tol=DEFAULT_TOL):
    """T(U) as a Subspace of the target."""
    T = _as_matrix(T, "T")
    if T.shape[1] != U.ambient_dim:
        raise InputError(f"map acts on H^{T.shape[1]}, subspace lives in H^{U.ambient_dim}")
    field = _field_of(T, U.basis)
    scale = max(sigma_max(T), 1.0)
    return column_space(T @ U.basis, tol=tol, field=field, scale=scale)


def contained_in(U, W, tol=DEFAULT_TOL):
    """U ⊆ W, tested as rank(P_{W⊥} basis(U)) = 0 at the unit scale of orthonormal bases."""
    _check_same_ambient(U, W)
    if U.dim == 0:
        return True
    residual = U.basis - W.basis @ (W.basis.conj().T @ U.basis)
    return rank_tol(residual, tol=tol, scale=1.0) == 0


def subspaces_equal(U, W, tol=DEFAULT_TOL):
    return U.dim == W.dim and contained_in(U, W, tol) and contained_in(W, U, tol)


def cos_vector_subspace(u, W):
    """cos(u, W) = ‖P_W u‖ / ‖u‖, the maximal real part of ⟨u, w⟩/‖u‖ over unit w ∈ W."""
    u = _checked(u, "u").reshape(-1)
    norm = np.linalg.norm(u)
    if norm == 0:
        raise DomainError("cos(u, W) undefined for u = 0")
    if W.dim == 0:
        raise DomainError("cos(u, W) undefined for the zero subspace")
    if u.shape[0] != W.ambient_dim:
        raise InputError("vector and subspace dimensions differ")
    c = np.linalg.norm(W.basis.conj().T @ u) / norm
    return float(min(c, 1.0))


def pinv(M, tol=DEFAULT_TOL):
    """Moore-Penrose pseudoinverse; singular values below the threshold are zeroed.

    Accepts a stack of matrices (ndim 3).
    """
    A = _checked(M)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.shape[-1] == 0 or A.shape[-2] == 0:
        return np.zeros(A.shape[:-2] + (A.shape[-1], A.shape[-2]), dtype=A.dtype)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    thresh = np.maximum(tol.abs, tol.rel * s[..., :1])
    s_inv = np.where(s > thresh, 1.0 / np.where(s > thresh, s, 1.0), 0.0)
    Vs = np.swapaxes(Vh, -1, -2).conj() * s_inv[..., None, :]
    return Vs @ np.swapaxes(U, -1, -2).conj()


def matrix_to_json(M):
    """{ambient_dim, ncols, data (row-major), field}; complex entries as [re, im]."""
    A = np.asarray(M)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    complex_field = np.iscomplexobj(A)
    if complex_field:
        data = [[float(z.real), float(z.imag)] for z in A.reshape(-1)]
    else:
        data = [float(x) for x in A.reshape(-1)]
    return {
        "ambient_dim": int(A.shape[0]),
        "ncols": int(A.shape[1]),
        "data": data,
        "field": "complex" if complex_field else "real",
    }


def matrix_from_json(obj):
    try:
        rows, cols = int(obj["ambient_dim"]), int(obj["ncols"])
        field = obj.get("field", "real")
        data = obj["data"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed matrix JSON: {exc}") from exc
    if field == "complex":
        arr = np.array([complex(re, im) for re, im in data], dtype=complex)
    elif field == "real":
        arr = np.array(data, dtype=float)
    else:
        raise InputError(f"unknown field {field!r}")
    if arr.size != rows * cols:
        raise InputError(f"expected {rows * cols} entries, got {arr.size}")
    return _checked(arr.reshape(rows, cols))


class SubspaceArrangement:
    """An ordered tuple of subspaces, optionally with index sets inducing sums.

    With ``index_sets`` given, the induced parts V_I = sum of V_i over i in I
    are computed on first access and cached.
    """

    def __init__(self, parts, index_sets=None, tol=DEFAULT_TOL):
        parts = list(parts)
        if not parts:
            raise InputError("an arrangement needs at least one part")
        n = parts[0].ambient_dim
        field = parts[0].field
        for p in parts:
            if p.ambient_dim != n:
                raise InputError("arrangement parts must share the ambient dimension")
            if p.field != field:
                raise InputError("arrangement parts must share the field")
        if index_sets is not None:
            index_sets = [tuple(sorted(I)) for I in index_sets]
            for I in index_sets:
                if any(i < 0 or i >= len(parts) for i in I):
                    raise InputError(f"index set {I} out of range")
        self.parts = parts
        self.index_sets = index_sets
        self.tol = tol
        self._induced = None

    @property
    def ambient_dim(self):
        return self.parts[0].ambient_dim

    @property
    def field(self):
        return self.parts[0].field

    def induced_parts(self):
        if self.index_sets is None:
            return self.parts
        if self._induced is None:
            out = []
            for I in self.index_sets:
                if not I:
                    out.append(Subspace.zero(self.ambient_dim, self.field))
                    continue
                B = np.hstack([self.parts[i].basis for i in I])
                out.append(column_space(B, tol=self.tol, field=self.field, scale=1.0))
            self._induced = out
        return self._induced

    def __len__(self):
        return len(self.induced_parts())
