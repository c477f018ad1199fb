"""Structured linear-map families and their composition with a sensing matrix.

Every structured map is stored as a *signed selection*: a tuple ``rows`` of
distinct source coordinates and a tuple ``signs`` in {+1, -1}, acting by
``(T w)_k = signs[k] * w[rows[k]]``.  Permutations (r = m, signs all +1),
selections (signs all +1) and sign matrices (rows = identity) are special
cases that keep their own ``kind`` tag for reporting and for the
combinatorial pencil analysis.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FamilySizeError, InputError
from .numkit import Subspace, SubspaceArrangement, column_space, matrix_from_json, matrix_to_json

DEFAULT_CAP = 10**7

STRUCTURED_KINDS = ("permutation", "selection", "sign", "signed_selection")
KINDS = STRUCTURED_KINDS + ("explicit",)
DESCRIPTORS = ("perm", "sel", "sign", "selsign", "explicit")


@dataclass(frozen=True, eq=False)
class LinearMap:
    """A linear map H^n -> H^m, optionally precomposed with a sensing matrix.

    ``source_dim``/``target_dim`` refer to the composite map when
    ``sensing`` is set.
    """

    kind: str
    m: int = 0
    rows: tuple = ()
    signs: tuple = ()
    matrix: np.ndarray = None
    sensing: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown map kind {self.kind!r}")
        if self.kind == "explicit":
            if self.matrix is None:
                raise InputError("explicit map needs a matrix")
            M = np.array(self.matrix)
            if M.ndim != 2 or not np.all(np.isfinite(M)):
                raise InputError("explicit map matrix must be a finite 2-d array")
            M.setflags(write=False)
            object.__setattr__(self, "matrix", M)
        else:
            rows = tuple(int(i) for i in self.rows)
            signs = tuple(int(s) for s in self.signs) if self.signs else (1,) * len(rows)
            object.__setattr__(self, "rows", rows)
            object.__setattr__(self, "signs", signs)
            if len(signs) != len(rows):
                raise InputError("signs and rows must have equal length")
            if any(s not in (1, -1) for s in signs):
                raise InputError("signs must be +1 or -1")
            if len(set(rows)) != len(rows):
                raise InputError("rows must be pairwise distinct")
            if any(i < 0 or i >= self.m for i in rows):
                raise InputError(f"row index out of range for m={self.m}")
            if self.kind == "permutation" and (len(rows) != self.m or any(s != 1 for s in signs)):
                raise InputError("a permutation must list all m coordinates with + signs")
            if self.kind == "selection" and any(s != 1 for s in signs):
                raise InputError("a selection has + signs")
            if self.kind == "sign" and rows != tuple(range(self.m)):
                raise InputError("a sign map keeps every coordinate in place")
        if self.sensing is not None:
            A = np.array(self.sensing)
            if A.ndim != 2 or A.shape[0] != self.inner_source_dim:
                raise InputError(
                    f"sensing matrix must have {self.inner_source_dim} rows, got shape {A.shape}"
                )
            A.setflags(write=False)
            object.__setattr__(self, "sensing", A)

    # constructors
    @classmethod
    def permutation(cls, perm):
        perm = tuple(perm)
        return cls("permutation", m=len(perm), rows=perm)

    @classmethod
    def selection(cls, rows, m):
        return cls("selection", m=m, rows=tuple(rows))

    @classmethod
    def sign(cls, signs):
        signs = tuple(signs)
        return cls("sign", m=len(signs), rows=tuple(range(len(signs))), signs=signs)

    @classmethod
    def signed_selection(cls, rows, signs, m):
        return cls("signed_selection", m=m, rows=tuple(rows), signs=tuple(signs))

    @classmethod
    def explicit(cls, matrix):
        return cls("explicit", matrix=np.asarray(matrix))

    @classmethod
    def identity(cls, m):
        return cls.permutation(range(m))

    # shape
    @property
    def structured(self):
        return self.kind != "explicit"

    @property
    def inner_source_dim(self):
        return self.matrix.shape[1] if self.kind == "explicit" else self.m

    @property
    def source_dim(self):
        return self.sensing.shape[1] if self.sensing is not None else self.inner_source_dim

    @property
    def target_dim(self):
        return self.matrix.shape[0] if self.kind == "explicit" else len(self.rows)

    def compose(self, A):
        """The map x -> T(A x)."""
        if self.sensing is not None:
            A = self.sensing @ np.asarray(A)
        return LinearMap(self.kind, self.m, self.rows, self.signs, self.matrix, np.asarray(A))

    def without_sensing(self):
        return LinearMap(self.kind, self.m, self.rows, self.signs, self.matrix)

    def structured_matrix(self):
        """Matrix of the map before composition with the sensing matrix."""
        if self.kind == "explicit":
            return self.matrix
        T = np.zeros((len(self.rows), self.m))
        T[np.arange(len(self.rows)), list(self.rows)] = self.signs
        return T

    def materialize(self):
        T = self.structured_matrix()
        if self.sensing is not None:
            return T @ self.sensing
        return T

    def apply(self, X):
        X = np.asarray(X)
        if self.sensing is not None:
            X = self.sensing @ X
        if self.kind == "explicit":
            return self.matrix @ X
        signs = np.asarray(self.signs)
        out = X[list(self.rows)]
        return out * (signs.reshape((-1,) + (1,) * (X.ndim - 1)))

    def rank(self, tol=None):
        from .numkit import DEFAULT_TOL, rank_tol

        return rank_tol(self.materialize(), tol or DEFAULT_TOL)

    def key(self):
        """Hashable identity of the defining arrays."""
        sens = None if self.sensing is None else (self.sensing.shape, self.sensing.tobytes())
        if self.kind == "explicit":
            return ("explicit", self.matrix.shape, self.matrix.tobytes(), sens)
        return (self.kind, self.m, self.rows, self.signs, sens)

    def __eq__(self, other):
        return isinstance(other, LinearMap) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_json(self):
        if self.kind == "explicit":
            params = {"matrix": matrix_to_json(self.matrix)}
        else:
            params = {"m": self.m, "rows": list(self.rows), "signs": list(self.signs)}
        out = {"kind": self.kind, "params": params}
        if self.sensing is not None:
            out["sensing"] = matrix_to_json(self.sensing)
        return out

    @classmethod
    def from_json(cls, obj):
        kind, params = obj["kind"], obj.get("params", {})
        if kind == "explicit":
            lm = cls.explicit(matrix_from_json(params["matrix"]))
        else:
            lm = cls(kind, m=int(params["m"]), rows=tuple(params["rows"]),
                     signs=tuple(params.get("signs") or ()))
        if obj.get("sensing") is not None:
            lm = lm.compose(matrix_from_json(obj["sensing"]))
        return lm

    def describe(self):
        if self.kind == "explicit":
            return f"explicit{self.matrix.shape}"
        if self.kind == "permutation":
            return "perm:" + ",".join(map(str, self.rows))
        if self.kind == "selection":
            return f"sel:{self.m}:" + ",".join(map(str, self.rows))
        if self.kind == "sign":
            return "sign:" + ",".join(map(str, self.signs))
        return f"selsign:{self.m}:" + ",".join(map(str, self.rows)) + ":" + ",".join(map(str, self.signs))


def parse_map(spec):
    """Parse a compact map string or a path to a LinearMap JSON file.

    Forms (0-based indices): ``perm:2,0,1``, ``sel:6:0,1,2,3``,
    ``sign:1,-1,1``, ``selsign:6:0,1,2,3:1,-1,1,1``, ``id:5``.
    """
    if Path(spec).suffix == ".json" and Path(spec).exists():
        return LinearMap.from_json(json.loads(Path(spec).read_text()))
    try:
        head, _, rest = spec.partition(":")
        ints = lambda s: tuple(int(v) for v in s.split(",")) if s else ()
        if head == "perm":
            return LinearMap.permutation(ints(rest))
        if head == "id":
            return LinearMap.identity(int(rest))
        if head == "sel":
            m, rows = rest.split(":")
            return LinearMap.selection(ints(rows), int(m))
        if head == "sign":
            return LinearMap.sign(ints(rest))
        if head == "selsign":
            m, rows, signs = rest.split(":")
            return LinearMap.signed_selection(ints(rows), ints(signs), int(m))
    except ValueError as exc:
        raise InputError(f"cannot parse map spec {spec!r}: {exc}") from exc
    raise InputError(f"unknown map spec {spec!r}")


def extend_square(T):
    """Zero-pad T to a max(m, n) x max(m, n) matrix (rank is unchanged)."""
    T = np.asarray(T)
    m, n = T.shape
    k = max(m, n)
    out = np.zeros((k, k), dtype=T.dtype)
    out[:m, :n] = T
    return out


@functools.lru_cache(maxsize=32)
def _member_arrays(d, m, r):
    if d == "sign":
        signs = np.array(list(_sign_patterns(m)), dtype=np.int64).reshape(-1, m)
        rows = np.tile(np.arange(m), (len(signs), 1))
    else:
        perms = np.array(list(itertools.permutations(range(m), r)), dtype=np.int64).reshape(-1, r)
        if d in ("perm", "sel"):
            rows, signs = perms, np.ones_like(perms)
        else:
            pats = np.array(list(_sign_patterns(r)), dtype=np.int64).reshape(-1, r)
            rows, signs = np.repeat(perms, len(pats), axis=0), np.tile(pats, (len(perms), 1))
    rows.setflags(write=False)
    signs.setflags(write=False)
    return rows, signs


def _sign_patterns(r):
    # + before -, lexicographic in the sign-bit array
    for bits in itertools.product((1, -1), repeat=r):
        yield bits


@dataclass(frozen=True, eq=False)
class MapFamily:
    """A finite family of linear maps, optionally composed with a sensing matrix.

    ``descriptor`` is one of ``perm`` (all m x m permutations), ``sel``
    (all rank-r selections r x m), ``sign`` (all m x m sign matrices),
    ``selsign`` (signed selections, signs on the r selected rows) or
    ``explicit`` (a given list of maps).
    """

    descriptor: str
    m: int = 0
    r: int = 0
    members: tuple = ()
    compose_with: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.descriptor not in DESCRIPTORS:
            raise InputError(f"unknown family descriptor {self.descriptor!r}")
        if self.descriptor in ("perm", "sign"):
            object.__setattr__(self, "r", self.m)
        if self.descriptor != "explicit":
            if self.m < 1 or not (0 <= self.r <= self.m):
                raise InputError(f"invalid family size m={self.m}, r={self.r}")
        else:
            object.__setattr__(self, "members", tuple(self.members))
        if self.compose_with is not None:
            A = np.array(self.compose_with)
            if A.ndim != 2:
                raise InputError("compose_with must be a matrix")
            if self.descriptor != "explicit" and A.shape[0] != self.m:
                raise InputError(f"sensing matrix must have {self.m} rows")
            A.setflags(write=False)
            object.__setattr__(self, "compose_with", A)

    @classmethod
    def all_permutations(cls, m, A=None):
        return cls("perm", m=m, compose_with=A)

    @classmethod
    def all_selections(cls, r, m, A=None):
        return cls("sel", m=m, r=r, compose_with=A)

    @classmethod
    def all_signs(cls, m, A=None):
        return cls("sign", m=m, compose_with=A)

    @classmethod
    def all_signed_selections(cls, r, m, A=None):
        return cls("selsign", m=m, r=r, compose_with=A)

    @classmethod
    def explicit_list(cls, maps, A=None):
        return cls("explicit", members=tuple(maps), compose_with=A)

    def compose(self, A):
        if self.compose_with is not None:
            A = self.compose_with @ np.asarray(A)
        return MapFamily(self.descriptor, self.m, self.r, self.members, np.asarray(A))

    def without_sensing(self):
        return MapFamily(self.descriptor, self.m, self.r, self.members)

    @property
    def structured(self):
        return self.descriptor != "explicit"

    @property
    def source_dim(self):
        if self.compose_with is not None:
            return self.compose_with.shape[1]
        if self.descriptor == "explicit":
            return self.members[0].source_dim if self.members else 0
        return self.m

    @property
    def target_dim(self):
        if self.descriptor == "explicit":
            return self.members[0].target_dim if self.members else 0
        return self.r

    def cardinality(self):
        m, r = self.m, self.r
        if self.descriptor == "perm":
            return math.factorial(m)
        if self.descriptor == "sel":
            return math.perm(m, r)
        if self.descriptor == "sign":
            return 2**m
        if self.descriptor == "selsign":
            return 2**r * math.perm(m, r)
        return len(self.members)

    def check_cap(self, cap=DEFAULT_CAP):
        c = self.cardinality()
        if c > cap:
            raise FamilySizeError(c, cap)
        return c

    def _raw(self):
        m, r = self.m, self.r
        d = self.descriptor
        if d == "perm":
            for p in itertools.permutations(range(m)):
                yield LinearMap("permutation", m=m, rows=p)
        elif d == "sel":
            for rows in itertools.permutations(range(m), r):
                yield LinearMap("selection", m=m, rows=rows)
        elif d == "sign":
            ident = tuple(range(m))
            for s in _sign_patterns(m):
                yield LinearMap("sign", m=m, rows=ident, signs=s)
        elif d == "selsign":
            for rows in itertools.permutations(range(m), r):
                for s in _sign_patterns(r):
                    yield LinearMap("signed_selection", m=m, rows=rows, signs=s)
        else:
            yield from self.members

    def enumerate(self, cap=DEFAULT_CAP):
        """Deterministic stream of every member, lexicographic in the defining arrays."""
        self.check_cap(cap)
        A = self.compose_with
        for lm in self._raw():
            yield lm if A is None else lm.compose(A)

    def __iter__(self):
        return self.enumerate()

    def __len__(self):
        return self.cardinality()

    def sample(self, rng_seed, count):
        """Uniform i.i.d. draws, reproducible from the seed."""
        if count < 1:
            raise InputError("count must be >= 1")
        rng = np.random.default_rng(rng_seed)
        m, r = self.m, self.r
        out = []
        for _ in range(count):
            d = self.descriptor
            if d == "perm":
                lm = LinearMap("permutation", m=m, rows=tuple(rng.permutation(m)))
            elif d == "sel":
                lm = LinearMap("selection", m=m, rows=tuple(rng.choice(m, size=r, replace=False)))
            elif d == "sign":
                lm = LinearMap("sign", m=m, rows=tuple(range(m)),
                               signs=tuple(rng.choice((1, -1), size=m)))
            elif d == "selsign":
                lm = LinearMap("signed_selection", m=m,
                               rows=tuple(rng.choice(m, size=r, replace=False)),
                               signs=tuple(rng.choice((1, -1), size=r)))
            else:
                lm = self.members[int(rng.integers(len(self.members)))]
            out.append(lm if self.compose_with is None else lm.compose(self.compose_with))
        return out

    def member_arrays(self, cap=DEFAULT_CAP):
        """(rows, signs) integer arrays, one row per member in enumeration order."""
        if not self.structured:
            raise InputError("member arrays exist only for structured families")
        self.check_cap(cap)
        return _member_arrays(self.descriptor, self.m, self.r)

    def apply_members(self, X, cap=DEFAULT_CAP):
        """Images of X under every member, shape (K, rows, cols), in enumeration order."""
        X = np.asarray(X)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        AX = X if self.compose_with is None else self.compose_with @ X
        if not self.structured:
            self.check_cap(cap)
            return np.stack([lm.apply(AX) for lm in self.members])
        rows, signs = self.member_arrays(cap)
        return AX[rows] * signs[..., None]

    def member(self, k):
        """The k-th member in enumeration order."""
        if not self.structured:
            lm = self.members[k]
        else:
            rows, signs = self.member_arrays()
            kind = {"perm": "permutation", "sel": "selection", "sign": "sign",
                    "selsign": "signed_selection"}[self.descriptor]
            lm = LinearMap(kind, m=self.m, rows=tuple(rows[k]), signs=tuple(signs[k]))
        return lm if self.compose_with is None else lm.compose(self.compose_with)

    def pair_orbits(self, ordered=True, cap=DEFAULT_CAP):
        """Representatives of ordered map pairs up to simultaneous left multiplication.

        For structured families, (tau1, tau2) and (G tau1, G tau2) with G an
        invertible map of the target preserving the family have identical
        collision sets and eigenspaces.  Returns a :class:`PairSet` whose
        multiplicities sum to ``cardinality()**2`` (ordered) or to the number
        of unordered pairs with diagonal (explicit, ``ordered=False``).
        """
        return PairSet.build(self, ordered=ordered, cap=cap)

    def to_json(self):
        out = {"descriptor": self.descriptor, "params": {}}
        if self.descriptor == "explicit":
            out["params"]["members"] = [lm.to_json() for lm in self.members]
        else:
            out["params"] = {"m": self.m, "r": self.r}
        out["compose_with"] = None if self.compose_with is None else matrix_to_json(self.compose_with)
        return out

    @classmethod
    def from_json(cls, obj):
        d, params = obj["descriptor"], obj.get("params", {})
        A = obj.get("compose_with")
        A = None if A is None else matrix_from_json(A)
        if d == "explicit":
            members = tuple(LinearMap.from_json(x) for x in params["members"])
            return cls("explicit", members=members, compose_with=A)
        return cls(d, m=int(params["m"]), r=int(params.get("r", params["m"])), compose_with=A)

    def describe(self):
        if self.descriptor in ("perm", "sign"):
            return f"{self.descriptor}:{self.m}"
        if self.descriptor in ("sel", "selsign"):
            return f"{self.descriptor}:{self.r},{self.m}"
        return f"explicit[{len(self.members)}]"


def parse_family(spec, A=None):
    """Parse ``perm:5``, ``sel:3,5``, ``sign:4``, ``selsign:3,5`` or a MapFamily JSON path."""
    if Path(spec).suffix == ".json" and Path(spec).exists():
        fam = MapFamily.from_json(json.loads(Path(spec).read_text()))
        return fam if A is None else fam.compose(A)
    head, _, rest = spec.partition(":")
    try:
        nums = [int(v) for v in rest.split(",")] if rest else []
    except ValueError as exc:
        raise InputError(f"cannot parse family spec {spec!r}") from exc
    if head == "perm" and len(nums) == 1:
        return MapFamily.all_permutations(nums[0], A)
    if head == "sign" and len(nums) == 1:
        return MapFamily.all_signs(nums[0], A)
    if head == "sel" and len(nums) == 2:
        return MapFamily.all_selections(nums[0], nums[1], A)
    if head == "selsign" and len(nums) == 2:
        return MapFamily.all_signed_selections(nums[0], nums[1], A)
    raise InputError(f"unknown family spec {spec!r}")


@dataclass
class PairSet:
    """Ordered map-pair representatives with multiplicities.

    For structured families the representatives are also held as integer
    arrays (``rows1``, ``signs1``, ``rows2``, ``signs2``; one row per pair)
    so that batched computations never materialize LinearMap objects.
    """

    family: MapFamily
    ordered: bool
    multiplicity: np.ndarray
    rows1: np.ndarray = None
    signs1: np.ndarray = None
    rows2: np.ndarray = None
    signs2: np.ndarray = None
    index_pairs: list = None

    @classmethod
    def build(cls, family, ordered=True, cap=DEFAULT_CAP):
        family.check_cap(cap)
        m, r, d = family.m, family.r, family.descriptor
        if d == "explicit":
            K = len(family.members)
            if ordered:
                idx = [(i, j) for i in range(K) for j in range(K)]
            else:
                idx = [(i, j) for i in range(K) for j in range(i, K)]
            if len(idx) > cap:
                raise FamilySizeError(len(idx), cap)
            return cls(family, ordered, np.ones(len(idx), dtype=np.int64), index_pairs=idx)
        if d == "perm":
            r1 = np.array(list(itertools.permutations(range(m))), dtype=np.int64).reshape(-1, m)
            r2 = np.tile(np.arange(m), (len(r1), 1))
            s1 = np.ones_like(r1)
            s2 = np.ones_like(r2)
            mult = math.factorial(m)
        elif d == "sign":
            s1 = np.array(list(_sign_patterns(m)), dtype=np.int64).reshape(-1, m)
            r1 = np.tile(np.arange(m), (len(s1), 1))
            r2, s2 = r1.copy(), np.ones_like(s1)
            mult = 2**m
        elif d == "sel":
            combos = list(itertools.combinations(range(m), r))
            arrs = list(itertools.permutations(range(m), r))
            r1 = np.array([c for c in combos for _ in arrs], dtype=np.int64).reshape(-1, r)
            r2 = np.array([a for _ in combos for a in arrs], dtype=np.int64).reshape(-1, r)
            s1, s2 = np.ones_like(r1), np.ones_like(r2)
            mult = math.factorial(r)
        else:  # selsign
            combos = list(itertools.combinations(range(m), r))
            arrs = list(itertools.permutations(range(m), r))
            pats = list(_sign_patterns(r))
            r1 = np.array([c for c in combos for _ in arrs for _ in pats], dtype=np.int64).reshape(-1, r)
            r2 = np.array([a for _ in combos for a in arrs for _ in pats], dtype=np.int64).reshape(-1, r)
            s2 = np.array([p for _ in combos for _ in arrs for p in pats], dtype=np.int64).reshape(-1, r)
            s1 = np.ones_like(r1)
            mult = 2**r * math.factorial(r)
        if len(r1) > cap:
            raise FamilySizeError(len(r1), cap)
        return cls(family, True, np.full(len(r1), mult, dtype=np.int64), r1, s1, r2, s2)

    def __len__(self):
        return len(self.multiplicity)

    def covered(self):
        return int(self.multiplicity.sum())

    def _structured_map(self, rows, signs):
        kind = {"perm": "permutation", "sel": "selection", "sign": "sign",
                "selsign": "signed_selection"}[self.family.descriptor]
        lm = LinearMap(kind, m=self.family.m, rows=tuple(rows), signs=tuple(signs))
        A = self.family.compose_with
        return lm if A is None else lm.compose(A)

    def pair(self, k):
        """The k-th representative as a pair of LinearMaps."""
        if self.index_pairs is not None:
            i, j = self.index_pairs[k]
            A = self.family.compose_with
            a, b = self.family.members[i], self.family.members[j]
            if A is not None:
                a, b = a.compose(A), b.compose(A)
            return a, b
        return (self._structured_map(self.rows1[k], self.signs1[k]),
                self._structured_map(self.rows2[k], self.signs2[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self.pair(k)

    def apply_stack(self, X, lo=0, hi=None):
        """Stacks (T1 X, T2 X) over pairs lo..hi-1, shape (K, rows, cols).

        ``X`` is applied after the family's sensing matrix.
        """
        X = np.asarray(X)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        hi = len(self) if hi is None else min(hi, len(self))
        A = self.family.compose_with
        AX = X if A is None else A @ X
        if self.index_pairs is not None:
            members = self.family.members
            imgs = [lm.apply(AX) for lm in members]
            idx = self.index_pairs[lo:hi]
            T1 = np.stack([imgs[i] for i, _ in idx])
            T2 = np.stack([imgs[j] for _, j in idx])
            return T1, T2
        T1 = AX[self.rows1[lo:hi]] * self.signs1[lo:hi, :, None]
        T2 = AX[self.rows2[lo:hi]] * self.signs2[lo:hi, :, None]
        return T1, T2


def _rng(seed):
    return np.random.default_rng(seed)


def _gaussian(rng, shape, field="real"):
    if field == "complex":
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return rng.standard_normal(shape)


def random_sensing_matrix(m, n, rng_seed=None, field="real"):
    """An m x n matrix with i.i.d. standard Gaussian entries."""
    if m < 1 or n < 1:
        raise InputError("sensing matrix needs positive dimensions")
    return _gaussian(_rng(rng_seed), (m, n), field)


def random_subspace(n, d, rng_seed=None, field="real"):
    """Column space of an n x d Gaussian draw (dimension d almost surely)."""
    if not 0 <= d <= n:
        raise InputError(f"need 0 <= d <= n, got d={d}, n={n}")
    if d == 0:
        return Subspace.zero(n, field)
    return column_space(_gaussian(_rng(rng_seed), (n, d), field), field=field)


def random_arrangement(dims, n, rng_seed=None, field="real", index_sets=None):
    rng = _rng(rng_seed)
    parts = []
    for d in dims:
        if not 0 < d <= n:
            raise InputError(f"part dimension {d} out of range for n={n}")
        parts.append(column_space(_gaussian(rng, (n, d), field), field=field))
    return SubspaceArrangement(parts, index_sets=index_sets)
