"""Constructive witnesses V with dim(T1 V + T2 V) = 2 dim V.

The construction runs the subspace recursion

    I_j = R_j ∩ F_j,  G_{j+1} = T1(I_j) ∩ T2(I_j),
    R_{j+1} = T1^{-1}(G_{j+1}) ∩ I_j,  F_{j+1} = T2^{-1}(G_{j+1}) ∩ I_j,

from R_0 = F_0 = H^n until both chains stop moving at level alpha.  The
interleaved chain R_0 ⊇ I_0 ⊇ R_1 ⊇ I_1 ⊇ ... crosses the threshold n - d
exactly once, which selects one of three initializations (``W_alpha``,
``W_beta``, ``Z_gamma``).  Alternating extension steps then grow the
initial subspace back up the chain to a d-dimensional subspace of R_0.

Each existence step is realized as a random draw inside a known subspace,
followed by exact verification of the transversality and rank conditions,
with a bounded number of retries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pencil
from .errors import ConstructionError, InputError, NotApplicableError, NumericalInstabilityError, PreconditionError
from .maps import LinearMap
from .numkit import (
    DEFAULT_TOL,
    Subspace,
    contained_in,
    image,
    intersect,
    matrix_to_json,
    null_space,
    preimage,
    rank_tol,
    subspaces_equal,
)

__all__ = [
    "FiltrationLevel",
    "FiltrationTrace",
    "WitnessSubspace",
    "run_filtration",
    "check_trace",
    "applicable_initializations",
    "init_W_alpha",
    "init_W_beta",
    "init_Z_gamma",
    "extend_chain",
    "witness_flag",
    "construct_witness",
    "doubling_rank",
]

DEFAULT_RETRIES = 16


def _matrix(tau):
    if isinstance(tau, LinearMap):
        return tau.materialize()
    T = np.asarray(tau)
    if T.ndim != 2:
        raise InputError("map must be a matrix or LinearMap")
    return T


def _pair(tau1, tau2):
    T1, T2 = _matrix(tau1), _matrix(tau2)
    if T1.shape != T2.shape:
        raise InputError(f"map shapes differ: {T1.shape} vs {T2.shape}")
    if np.iscomplexobj(T1) or np.iscomplexobj(T2):
        T1, T2 = T1.astype(complex), T2.astype(complex)
    return T1, T2


@dataclass
class FiltrationLevel:
    R: Subspace
    F: Subspace
    I: Subspace
    G: Subspace = None  # G_j; undefined at level 0

    @property
    def dims(self):
        return (self.R.dim, self.F.dim, None if self.G is None else self.G.dim)


@dataclass
class FiltrationTrace:
    """Levels 0..alpha+1 of the recursion; level alpha+1 repeats level alpha."""

    levels: list
    alpha: int
    n: int

    @property
    def dims(self):
        return [lvl.dims for lvl in self.levels]

    @property
    def R_alpha(self):
        return self.levels[self.alpha].R

    @property
    def G_alpha(self):
        """T1(R_alpha) = T2(R_alpha); equals G_{alpha+1}, also defined when alpha = 0."""
        return self.levels[self.alpha + 1].G

    def chain(self):
        """Dimensions along R_0 ⊇ I_0 ⊇ R_1 ⊇ I_1 ⊇ ... ⊇ R_alpha = I_alpha."""
        out = []
        for j in range(self.alpha + 1):
            out.append(("R", j, self.levels[j].R.dim))
            out.append(("I", j, self.levels[j].I.dim))
        return out

    def to_json(self):
        return {
            "alpha": self.alpha,
            "dims": [{"R": r, "F": f, "G": g, "I": lvl.I.dim} for (r, f, g), lvl in zip(self.dims, self.levels)],
        }


def run_filtration(tau1, tau2, max_levels=None, tol=DEFAULT_TOL):
    """Iterate the recursion until R and F both stabilize.

    ``max_levels`` bounds alpha (default n + 1).  The bound n + 1 is tight:
    T1 = I with T2 a single nilpotent Jordan block on C^3 stabilizes at
    alpha = 4.
    """
    T1, T2 = _pair(tau1, tau2)
    n = T1.shape[1]
    if max_levels is None:
        max_levels = n + 1
    field = "complex" if np.iscomplexobj(T1) else "real"
    R = F = Subspace.full(n, field)
    G = None
    levels = []
    for j in range(max_levels + 1):
        I = intersect(R, F, tol)
        levels.append(FiltrationLevel(R, F, I, G))
        G_next = intersect(image(T1, I, tol), image(T2, I, tol), tol)
        R_next = intersect(preimage(T1, G_next, tol), I, tol)
        F_next = intersect(preimage(T2, G_next, tol), I, tol)
        if subspaces_equal(R, R_next, tol) and subspaces_equal(F, F_next, tol):
            levels.append(FiltrationLevel(R_next, F_next, intersect(R_next, F_next, tol), G_next))
            return FiltrationTrace(levels, j, n)
        R, F, G = R_next, F_next, G_next
    trace = FiltrationTrace(levels, len(levels) - 1, n)
    raise NumericalInstabilityError(f"no stabilization within {max_levels} levels", trace)


def check_trace(trace, tau1, tau2, tol=DEFAULT_TOL):
    """Chain containments, image identities and stabilization equalities; returns violations."""
    T1, T2 = _pair(tau1, tau2)
    bad = []
    L = trace.levels
    for j in range(len(L) - 1):
        a, b = L[j], L[j + 1]
        if not contained_in(a.I, a.R, tol) or not contained_in(a.I, a.F, tol):
            bad.append(f"I_{j} not inside R_{j} and F_{j}")
        if not contained_in(b.R, a.I, tol):
            bad.append(f"R_{j + 1} not inside I_{j}")
        if not contained_in(b.F, a.I, tol):
            bad.append(f"F_{j + 1} not inside I_{j}")
        if j >= 1 and not contained_in(L[j + 1].G, L[j].G, tol):
            bad.append(f"G_{j + 1} not inside G_{j}")
        if not subspaces_equal(image(T1, b.R, tol), b.G, tol):
            bad.append(f"T1(R_{j + 1}) != G_{j + 1}")
        if not subspaces_equal(image(T2, b.F, tol), b.G, tol):
            bad.append(f"T2(F_{j + 1}) != G_{j + 1}")
    a = trace.alpha
    Ra = L[a].R
    if not subspaces_equal(Ra, L[a].F, tol):
        bad.append("R_alpha != F_alpha")
    if not (subspaces_equal(Ra, L[a + 1].R, tol) and subspaces_equal(L[a].F, L[a + 1].F, tol)):
        bad.append("chains not stable at alpha")
    G = trace.G_alpha
    if not subspaces_equal(image(T1, Ra, tol), G, tol) or not subspaces_equal(image(T2, Ra, tol), G, tol):
        bad.append("T1(R_alpha) and T2(R_alpha) differ from G_alpha")
    if a >= 1 and not subspaces_equal(L[a].G, G, tol):
        bad.append("G_alpha != G_{alpha+1}")
    return bad


def applicable_initializations(trace, d):
    """Every (case, level) whose dimension sandwich holds; exactly one for d >= 1."""
    t = trace.n - d
    L, a = trace.levels, trace.alpha
    out = []
    if L[a].R.dim > t:
        out.append(("W_alpha", a))
    for j in range(a + 1):
        if L[j].I.dim <= t < L[j].R.dim:
            out.append(("W_beta", j))
    for j in range(a):
        if L[j + 1].R.dim <= t < L[j].I.dim:
            out.append(("Z_gamma", j))
    return out


@dataclass
class WitnessSubspace:
    """A constructed subspace and the log of the steps that produced it.

    ``stage`` is ("W", j) for a subspace of R_j or ("Z", j) for a subspace
    of I_j; the final witness has stage ("W", 0) or ("flag", 0).
    """

    V_star: Subspace
    certified: bool
    d: int
    construction_log: list = field(default_factory=list)
    V0_star: Subspace = None
    stage: tuple = ("W", 0)
    rank: int = None
    trace_dims: list = None

    @property
    def case(self):
        return "flag" if self.stage[0] == "flag" else "single"

    def recheck(self, tau1, tau2, tol=DEFAULT_TOL):
        """Independent rank computation of the certificate."""
        T1, T2 = _pair(tau1, tau2)
        if self.case == "flag":
            B0 = self.V0_star.basis
            target = self.V0_star.dim + self.V_star.dim
            return rank_tol(np.hstack([T1 @ B0, T2 @ self.V_star.basis]), tol) == target
        return doubling_rank(T1, T2, self.V_star.basis, tol) == 2 * self.V_star.dim

    def to_json(self):
        return {
            "V_star": matrix_to_json(self.V_star.basis),
            "V0_star": None if self.V0_star is None else matrix_to_json(self.V0_star.basis),
            "construction_log": self.construction_log,
            "certified": self.certified,
            "case": self.case,
            "d": self.d,
            "rank": self.rank,
            "trace_dims": self.trace_dims,
        }


def doubling_rank(T1, T2, B, tol=DEFAULT_TOL):
    if B.shape[1] == 0:
        return 0
    return rank_tol(np.hstack([T1 @ B, T2 @ B]), tol)


def _gaussian(rng, shape, field):
    if field == "complex":
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return rng.standard_normal(shape)


def _draw(container, k, rng, field):
    """Random k-dim subspace of the container."""
    C = container.basis
    if k == 0:
        return Subspace.zero(container.ambient_dim, field if field == "complex" else container.field)
    X = _gaussian(rng, (C.shape[1], k), field)
    Q, _ = np.linalg.qr(C @ X)
    return Subspace(Q)


def _meets(W, Q, tol):
    """W ∩ Q != 0."""
    if W.dim == 0 or Q.dim == 0:
        return False
    return rank_tol(np.hstack([W.basis, Q.basis]), tol, scale=1.0) < W.dim + Q.dim


def _fields(T1):
    return ["complex"] if np.iscomplexobj(T1) else ["real", "complex"]


def _attempts(T1, retries):
    for fld in _fields(T1):
        for attempt in range(retries):
            yield fld, attempt


def _kernels(T1, T2, tol):
    return {"ker T1": null_space(T1, tol), "ker T2": null_space(T2, tol)}


def _transversal_step(T1, T2, container, k, avoid, base, target_rank, rng, tol, retries, label):
    """Draw X of dim k in the container avoiding ``avoid``; accept base + X by a rank test."""
    failures = {}
    for fld, attempt in _attempts(T1, retries):
        X = _draw(container, k, rng, fld)
        hit = [name for name, Q in avoid.items() if _meets(X, Q, tol)]
        for name in hit:
            failures[name] = failures.get(name, 0) + 1
        if hit:
            continue
        V = X if base is None or base.dim == 0 else Subspace(np.hstack([base.basis, X.basis]))
        if V.dim and np.linalg.matrix_rank(V.basis) < V.dim:
            failures["dimension"] = failures.get("dimension", 0) + 1
            continue
        if doubling_rank(T1, T2, V.basis, tol) == target_rank(V):
            V = Subspace.from_spanning(V.basis, tol, scale=1.0)
            return V, {"attempts": attempt + 1, "field": fld}
        failures["rank"] = failures.get("rank", 0) + 1
    raise ConstructionError(f"{label}: retry budget exhausted", {"step": label, "failures": failures})


def init_W_alpha(trace, tau1, tau2, d, tol=DEFAULT_TOL, rng_seed=None, retries=DEFAULT_RETRIES, rng=None):
    """Initialization inside the stable subspace R_alpha when dim R_alpha > n - d.

    Inside H ⊆ R_alpha, a complement of both restricted kernels of dim G_alpha,
    T1 and T2 are isomorphisms onto G_alpha and M = T1|_H^{-1} T2|_H is an
    automorphism of H.  A subspace W of H with W ∩ M(W) = 0 has the
    doubling property.
    """
    T1, T2 = _pair(tau1, tau2)
    rng = rng or np.random.default_rng(rng_seed)
    n, a = trace.n, trace.alpha
    R, G = trace.R_alpha, trace.G_alpha
    w = R.dim - (n - d)
    if w <= 0:
        raise NotApplicableError(f"dim R_alpha = {R.dim} is not above n - d = {n - d}")
    e1 = n - rank_tol(T1 - T2, tol)
    if e1 > n - d:
        raise PreconditionError(f"dim E_1 = {e1} > n - d = {n - d}; use the flag construction", dim_E1=e1, d=d)
    g = G.dim
    if g < 2 * w:
        raise ConstructionError("W_alpha: stable image too small", {"dim_G": g, "needed": 2 * w})
    failures = {}
    for fld, attempt in _attempts(T1, retries):
        H = _draw(R, g, rng, fld)
        A1, A2 = T1 @ H.basis, T2 @ H.basis
        if rank_tol(A1, tol) < g or rank_tol(A2, tol) < g:
            failures["restricted kernels"] = failures.get("restricted kernels", 0) + 1
            continue
        M = np.linalg.lstsq(A1, A2, rcond=None)[0]
        X = _gaussian(rng, (g, w), fld)
        if rank_tol(np.hstack([X, M @ X]), tol) < 2 * w:
            failures["automorphism"] = failures.get("automorphism", 0) + 1
            continue
        Q, _ = np.linalg.qr(H.basis @ X)
        if doubling_rank(T1, T2, Q, tol) == 2 * w:
            log = [{"step": "W_alpha", "level": a, "dim": w, "attempts": attempt + 1, "field": fld}]
            return WitnessSubspace(Subspace(Q), True, d, log, stage=("W", a), rank=2 * w,
                                   trace_dims=trace.to_json()["dims"])
        failures["rank"] = failures.get("rank", 0) + 1
    raise ConstructionError("W_alpha: retry budget exhausted", {"step": "W_alpha", "failures": failures})


def _find(trace, d, case):
    for c, j in applicable_initializations(trace, d):
        if c == case:
            return j
    raise NotApplicableError(f"no {case} sandwich in the trace for d = {d}")


def init_W_beta(trace, tau1, tau2, d, tol=DEFAULT_TOL, rng_seed=None, retries=DEFAULT_RETRIES, rng=None):
    """W ⊆ R_beta of dim R_beta - (n - d) avoiding I_beta and both kernels."""
    T1, T2 = _pair(tau1, tau2)
    rng = rng or np.random.default_rng(rng_seed)
    b = _find(trace, d, "W_beta")
    lvl = trace.levels[b]
    k = lvl.R.dim - (trace.n - d)
    avoid = {f"I_{b}": lvl.I, **_kernels(T1, T2, tol)}
    V, info = _transversal_step(T1, T2, lvl.R, k, avoid, None, lambda V: 2 * V.dim, rng, tol, retries, "W_beta")
    log = [{"step": "W_beta", "level": b, "dim": k, **info}]
    return WitnessSubspace(V, True, d, log, stage=("W", b), rank=2 * k, trace_dims=trace.to_json()["dims"])


def init_Z_gamma(trace, tau1, tau2, d, tol=DEFAULT_TOL, rng_seed=None, retries=DEFAULT_RETRIES, rng=None):
    """Z ⊆ I_gamma of dim I_gamma - (n - d) avoiding R_{gamma+1} and both kernels."""
    T1, T2 = _pair(tau1, tau2)
    rng = rng or np.random.default_rng(rng_seed)
    c = _find(trace, d, "Z_gamma")
    lvl = trace.levels[c]
    k = lvl.I.dim - (trace.n - d)
    avoid = {f"R_{c + 1}": trace.levels[c + 1].R, **_kernels(T1, T2, tol)}
    V, info = _transversal_step(T1, T2, lvl.I, k, avoid, None, lambda V: 2 * V.dim, rng, tol, retries, "Z_gamma")
    log = [{"step": "Z_gamma", "level": c, "dim": k, **info}]
    return WitnessSubspace(V, True, d, log, stage=("Z", c), rank=2 * k, trace_dims=trace.to_json()["dims"])


def _z_to_w(T1, T2, trace, Z, j, d, rng, tol, retries):
    """Grow Z ⊆ I_j to W ⊆ R_j by a complement avoiding I_j, T1^{-1}(T1 Z + T2 Z) and both kernels."""
    lvl = trace.levels[j]
    k = lvl.R.dim - lvl.I.dim
    if k == 0:
        return Z, {"step": "W_extend", "level": j, "dim": Z.dim, "added": 0}
    images = Subspace.from_spanning(np.hstack([T1 @ Z.basis, T2 @ Z.basis]), tol) if Z.dim else Subspace.zero(T1.shape[0])
    avoid = {f"I_{j}": lvl.I, "T1-preimage of T1 Z + T2 Z": preimage(T1, images, tol), **_kernels(T1, T2, tol)}
    V, info = _transversal_step(T1, T2, lvl.R, k, avoid, Z, lambda V: 2 * V.dim, rng, tol, retries,
                                f"W_extend at level {j}")
    return V, {"step": "W_extend", "level": j, "dim": V.dim, "added": k, **info}


def _w_to_z(T1, T2, trace, W, j, d, rng, tol, retries):
    """Grow W ⊆ R_{j+1} to Z ⊆ I_j by a complement avoiding R_{j+1}, T2^{-1}(T1 W + T2 W) and both kernels."""
    lvl = trace.levels[j]
    Rn = trace.levels[j + 1].R
    k = lvl.I.dim - Rn.dim
    if k == 0:
        return W, {"step": "Z_extend", "level": j, "dim": W.dim, "added": 0}
    images = Subspace.from_spanning(np.hstack([T1 @ W.basis, T2 @ W.basis]), tol) if W.dim else Subspace.zero(T1.shape[0])
    avoid = {f"R_{j + 1}": Rn, "T2-preimage of T1 W + T2 W": preimage(T2, images, tol), **_kernels(T1, T2, tol)}
    V, info = _transversal_step(T1, T2, lvl.I, k, avoid, W, lambda V: 2 * V.dim, rng, tol, retries,
                                f"Z_extend at level {j}")
    return V, {"step": "Z_extend", "level": j, "dim": V.dim, "added": k, **info}


def extend_chain(witness, trace, tau1, tau2, d, tol=DEFAULT_TOL, rng_seed=None, retries=DEFAULT_RETRIES, rng=None):
    """Alternate Z -> W and W -> Z extensions down to a subspace of R_0."""
    T1, T2 = _pair(tau1, tau2)
    rng = rng or np.random.default_rng(rng_seed)
    kind, j = witness.stage
    V = witness.V_star
    log = list(witness.construction_log)
    while not (kind == "W" and j == 0):
        if kind == "Z":
            V, entry = _z_to_w(T1, T2, trace, V, j, d, rng, tol, retries)
            kind = "W"
        else:
            V, entry = _w_to_z(T1, T2, trace, V, j - 1, d, rng, tol, retries)
            kind, j = "Z", j - 1
        log.append(entry)
    r = doubling_rank(T1, T2, V.basis, tol)
    certified = V.dim == d and r == 2 * d
    return WitnessSubspace(V, certified, d, log, stage=("W", 0), rank=r, trace_dims=trace.to_json()["dims"])


def _single(T1, T2, d, tol, rng, retries, max_levels=None):
    trace = run_filtration(T1, T2, max_levels, tol)
    cases = applicable_initializations(trace, d)
    if len(cases) != 1:
        raise ConstructionError("initialization scan is ambiguous", {"cases": cases, "dims": trace.dims})
    case, _ = cases[0]
    init = {"W_alpha": init_W_alpha, "W_beta": init_W_beta, "Z_gamma": init_Z_gamma}[case]
    start = init(trace, T1, T2, d, tol, retries=retries, rng=rng)
    return extend_chain(start, trace, T1, T2, d, tol, retries=retries, rng=rng), trace


def _ranks_and_dimU(T1, T2, d, tol, spectrum_dim_U):
    n = T1.shape[1]
    r1, r2 = rank_tol(T1, tol), rank_tol(T2, tol)
    if min(r1, r2) < 2 * d:
        raise PreconditionError(f"rank {min(r1, r2)} < 2d = {2 * d}", rank1=r1, rank2=r2, d=d)
    if spectrum_dim_U is not None and spectrum_dim_U > n - d:
        raise PreconditionError(f"dim U = {spectrum_dim_U} > n - d = {n - d}", dim_U=spectrum_dim_U, d=d)


def _default_dim_U(tau1, tau2, tol):
    return pencil.dim_U(pencil.spectrum(tau1, tau2, tol))


def witness_flag(tau1, tau2, d, tol=DEFAULT_TOL, rng_seed=None, retries=DEFAULT_RETRIES, rng=None, dim_U=None):
    """Flag witness (V0, V) with dim(T1 V0 + T2 V) = d0 + d, when dim E_1 > n - d.

    d0 = n - dim E_1 < d.  V0 comes from the single-subspace construction,
    V = V0 + W with W avoiding T2^{-1}(T1 V0 + T2 V0), V0 and ker T2.
    """
    T1, T2 = _pair(tau1, tau2)
    rng = rng or np.random.default_rng(rng_seed)
    n = T1.shape[1]
    e1 = n - rank_tol(T1 - T2, tol)
    if e1 <= n - d:
        raise NotApplicableError(f"dim E_1 = {e1} is not above n - d = {n - d}")
    _ranks_and_dimU(T1, T2, d, tol, _default_dim_U(tau1, tau2, tol) if dim_U is None else dim_U)
    d0 = n - e1
    log = []
    field_ = "complex" if np.iscomplexobj(T1) else "real"
    if d0 > 0:
        inner, _ = _single(T1, T2, d0, tol, rng, retries)
        if not inner.certified:
            raise ConstructionError("flag: inner witness not certified", {"d0": d0})
        V0 = inner.V_star
        log.extend(inner.construction_log)
    else:
        V0 = Subspace.zero(n, field_)
    if V0.dim:
        images = Subspace.from_spanning(np.hstack([T1 @ V0.basis, T2 @ V0.basis]), tol)
        pre = preimage(T2, images, tol)
    else:
        pre = Subspace.zero(n, field_)
    avoid = {"T2-preimage of T1 V0 + T2 V0": pre, "V0": V0, "ker T2": null_space(T2, tol)}
    failures = {}
    for fld, attempt in _attempts(T1, retries):
        W = _draw(Subspace.full(n, fld), d - d0, rng, fld)
        hit = [name for name, Q in avoid.items() if _meets(W, Q, tol)]
        for name in hit:
            failures[name] = failures.get(name, 0) + 1
        if hit:
            continue
        B = np.hstack([V0.basis, W.basis])
        Vs = Subspace.from_spanning(B, tol, scale=1.0)
        r = rank_tol(np.hstack([T1 @ V0.basis, T2 @ Vs.basis]), tol) if Vs.dim else 0
        if Vs.dim == d and r == d0 + d:
            log.append({"step": "flag", "level": 0, "dim": d, "d0": d0, "attempts": attempt + 1, "field": fld})
            return WitnessSubspace(Vs, True, d, log, V0_star=V0, stage=("flag", 0), rank=r)
        failures["rank"] = failures.get("rank", 0) + 1
    raise ConstructionError("flag: retry budget exhausted", {"step": "flag", "failures": failures})


def construct_witness(tau1, tau2, d, tol=DEFAULT_TOL, rng_seed=None, retries=DEFAULT_RETRIES, max_levels=None,
                      dim_U=None):
    """Certified witness for a map pair, or an error; never an uncertified subspace.

    Dispatches on dim E_1 = dim ker(T1 - T2): at most n - d uses the
    filtration pipeline, above n - d the flag construction.  ``dim_U`` may be
    supplied to skip the spectrum computation.
    """
    T1, T2 = _pair(tau1, tau2)
    n = T1.shape[1]
    if not 0 <= d <= n:
        raise InputError(f"need 0 <= d <= n, got d={d}, n={n}")
    rng = np.random.default_rng(rng_seed)
    if d == 0:
        return WitnessSubspace(Subspace.zero(n), True, 0, [{"step": "trivial", "level": 0, "dim": 0}], rank=0)
    du = _default_dim_U(tau1, tau2, tol) if dim_U is None else dim_U
    _ranks_and_dimU(T1, T2, d, tol, du)
    e1 = n - rank_tol(T1 - T2, tol)
    if e1 > n - d:
        out = witness_flag(T1, T2, d, tol, retries=retries, rng=rng, dim_U=du)
    else:
        out, _ = _single(T1, T2, d, tol, rng, retries, max_levels)
    if not (out.certified and out.recheck(T1, T2, tol)):
        raise ConstructionError("final certificate failed", {"rank": out.rank, "d": d})
    return out
