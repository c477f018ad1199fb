"""Eigenstructure of a map pair and the dimension of its parallel-image locus.

For maps T1, T2 the eigenspaces are E(lam) = ker(T1 - lam T2) over C.  The
locus U of points w outside Z = ker(T1 - T2) ∪ ker T1 ∪ ker T2 where T1 w
and T2 w are parallel is the union of E(lam) over lam not in {0, 1}, with
Z removed.  Two facts make its dimension computable from finitely many
eigenvalues:

* for lam not in {0, 1}, E(lam) ∩ Z = K, the common kernel of T1 and T2;
* all but finitely many lam share the same ``generic`` eigenspace dimension
  g >= dim K.  When g > dim K the generic eigenspaces sweep out a family of
  dimension g + 1 ("path type").

So dim U = max(g + 1 if path type, eigdim of every jump lam not in {0, 1}
with eigdim > dim K), and -1 when nothing survives.  The signed variant
also drops lam = -1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from .errors import FamilySizeError, InputError, UnsupportedMapError
from .maps import DEFAULT_CAP, LinearMap, MapFamily
from .numkit import DEFAULT_TOL, Subspace, Tolerance, null_space, rank_tol, sigma_max

__all__ = [
    "PencilCandidate",
    "PencilSpectrum",
    "eig_subspace",
    "spectrum_combinatorial",
    "spectrum_numeric",
    "spectrum",
    "dim_U",
    "spectra_agree",
    "ConditionReport",
    "check_condition_1",
    "BoundAudit",
    "audit_dimension_bound",
]

LAMBDA_ATOL = 1e-8


@dataclass(frozen=True)
class PencilCandidate:
    """An eigenvalue whose eigenspace is larger than the generic one.

    ``phase`` is the exact rational q with lam = exp(2 pi i q) on the
    combinatorial path and ``None`` on the numeric path.
    """

    value: complex
    eigdim: int
    is_zero: bool
    is_one: bool
    is_minus_one: bool
    inside_Z: bool
    phase: Fraction = None

    def to_json(self):
        out = {
            "lambda": [float(self.value.real), float(self.value.imag)],
            "eigdim": self.eigdim,
            "excluded": {"zero": self.is_zero, "one": self.is_one, "minus_one": self.is_minus_one},
            "inside_Z": self.inside_Z,
        }
        if self.phase is not None:
            out["phase"] = f"{self.phase.numerator}/{self.phase.denominator}"
        return out


@dataclass
class PencilSpectrum:
    n: int
    candidates: list
    generic_eigdim: int
    common_kernel_dim: int
    ker1_dim: int
    ker2_dim: int
    ker_diff_dim: int
    ker_sum_dim: int
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def path_type(self):
        """True when generic eigenspaces are not contained in the common kernel."""
        return self.generic_eigdim > self.common_kernel_dim

    def to_json(self):
        return {
            "n": self.n,
            "method": self.method,
            "candidates": [c.to_json() for c in self.candidates],
            "generic_eigdim": self.generic_eigdim,
            "common_kernel_dim": self.common_kernel_dim,
            "path_type": self.path_type,
            "ker1_dim": self.ker1_dim,
            "ker2_dim": self.ker2_dim,
            "ker_diff_dim": self.ker_diff_dim,
            "ker_sum_dim": self.ker_sum_dim,
            "diagnostics": self.diagnostics,
        }


def _pair_matrices(tau1, tau2):
    T1 = tau1.materialize() if isinstance(tau1, LinearMap) else np.asarray(tau1)
    T2 = tau2.materialize() if isinstance(tau2, LinearMap) else np.asarray(tau2)
    if T1.ndim != 2 or T1.shape != T2.shape:
        raise InputError(f"map shapes differ: {T1.shape} vs {T2.shape}")
    return T1, T2


def eig_subspace(tau1, tau2, lam, tol=DEFAULT_TOL):
    """E(lam) = ker(T1 - lam T2) over C."""
    T1, T2 = _pair_matrices(tau1, tau2)
    return null_space(T1.astype(complex) - complex(lam) * T2, tol=tol, field="complex")


def _phase_value(q):
    z = cmath.exp(2j * math.pi * float(q))
    re = 0.0 if abs(z.real) < 1e-15 else z.real
    im = 0.0 if abs(z.imag) < 1e-15 else z.imag
    return complex(re, im)


def _relation_components(tau1, tau2):
    """Untouched count, path count and (length, sign product) of every cycle.

    Row k of T1 w = lam T2 w reads w[a_k] = lam * s_k * w[b_k], an edge
    a_k -> b_k.  Distinct rows give in- and out-degree at most one, so the
    graph is a disjoint union of directed paths and cycles.
    """
    succ = {}
    has_pred = set()
    for a, b, s1, s2 in zip(tau1.rows, tau2.rows, tau1.signs, tau2.signs):
        succ[a] = (b, s1 * s2)
        has_pred.add(b)
    touched = set(succ) | has_pred
    untouched = tau1.m - len(touched)
    seen = set()
    paths = 0
    for v in sorted(touched - has_pred):
        paths += 1
        while v is not None and v not in seen:
            seen.add(v)
            v = succ.get(v, (None,))[0]
    cycles = []
    for v in sorted(touched - seen):
        if v in seen:
            continue
        length, sign = 0, 1
        while v not in seen:
            seen.add(v)
            v, s = succ[v]
            length += 1
            sign *= s
        cycles.append((length, sign))
    return untouched, paths, cycles


def _consistent(cycle, q):
    length, sign = cycle
    shift = Fraction(0) if sign == 1 else Fraction(1, 2)
    return ((length * q) - shift).denominator == 1


def spectrum_combinatorial(tau1, tau2):
    """Exact spectrum of a structured pair from its relation graph."""
    for t in (tau1, tau2):
        if not isinstance(t, LinearMap) or not t.structured or t.sensing is not None:
            raise UnsupportedMapError("combinatorial spectrum needs structured maps without a sensing matrix")
    if tau1.m != tau2.m or tau1.target_dim != tau2.target_dim:
        raise InputError("structured maps must share source and target sizes")
    untouched, paths, cycles = _relation_components(tau1, tau2)
    generic = untouched + paths
    phases = set()
    for length, sign in cycles:
        for j in range(length):
            q = Fraction(j, length) if sign == 1 else Fraction(2 * j + 1, 2 * length)
            phases.add(q % 1)

    def eigdim(q):
        return generic + sum(1 for c in cycles if _consistent(c, q))

    candidates = []
    for q in sorted(phases):
        candidates.append(PencilCandidate(
            value=_phase_value(q),
            eigdim=eigdim(q),
            is_zero=False,
            is_one=q == 0,
            is_minus_one=q == Fraction(1, 2),
            inside_Z=(q == 0) or eigdim(q) == untouched,
            phase=q,
        ))
    kernel = tau1.m - tau1.target_dim
    return PencilSpectrum(
        n=tau1.m,
        candidates=candidates,
        generic_eigdim=generic,
        common_kernel_dim=untouched,
        ker1_dim=kernel,
        ker2_dim=kernel,
        ker_diff_dim=eigdim(Fraction(0)),
        ker_sum_dim=eigdim(Fraction(1, 2)),
        method="combinatorial",
        diagnostics={"paths": paths, "cycles": [list(c) for c in cycles]},
    )


def _compressed_eigenvalues(T1, T2, rho, rng, max_abs):
    p, n = T1.shape
    W = rng.standard_normal((p, rho)) + 1j * rng.standard_normal((p, rho))
    Z = rng.standard_normal((n, rho)) + 1j * rng.standard_normal((n, rho))
    A = W.conj().T @ T1 @ Z
    B = W.conj().T @ T2 @ Z
    ab = scipy.linalg.eig(A, B, right=False, homogeneous_eigvals=True)
    alpha, beta = ab[0], ab[1]
    finite = np.abs(beta) > 1e-12 * np.maximum(np.abs(alpha), np.abs(beta))
    vals = alpha[finite] / beta[finite]
    return vals[np.abs(vals) < max_abs]


def _cluster(values, radius):
    clusters = []
    for v in sorted(values, key=lambda z: (z.real, z.imag)):
        for c in clusters:
            if abs(np.mean(c) - v) <= radius:
                c.append(v)
                break
        else:
            clusters.append([v])
    return [complex(np.mean(c)) for c in clusters]


def spectrum_numeric(tau1, tau2, tol=DEFAULT_TOL, rng_seed=0, cluster_radius=1e-6,
                     verify_rel=1e-8, max_abs=1e8):
    """Spectrum of an arbitrary pair from generalized eigenvalues.

    With normal rank rho, a random rho x rho compression W^H (T1, T2) Z is a
    regular pencil whose finite eigenvalues contain every jump of the
    original.  Two independent compressions are intersected to discard
    most spurious values, and every surviving cluster is re-verified by an
    explicit rank computation; only lam with eigdim above the generic
    value are kept.
    """
    T1, T2 = _pair_matrices(tau1, tau2)
    T1 = T1.astype(complex)
    T2 = T2.astype(complex)
    p, n = T1.shape
    rng = np.random.default_rng(rng_seed)
    s1, s2 = sigma_max(T1), sigma_max(T2)

    def nullity_at(lam, rel=None):
        M = T1 - lam * T2
        t = tol if rel is None else Tolerance(rel=max(rel, tol.rel), abs=tol.abs)
        return n - rank_tol(M, t, scale=max(s1 + abs(lam) * s2, 1e-300))

    probes = np.exp(2j * np.pi * rng.random(3)) * (1.0 + rng.random(3))
    rho = max(n - nullity_at(l) for l in probes)
    generic = n - rho
    common = n - rank_tol(np.vstack([T1, T2]), tol)
    ker1 = n - rank_tol(T1, tol) if p else n
    ker2 = n - rank_tol(T2, tol) if p else n
    diag = {"normal_rank": int(rho), "seed": rng_seed}

    candidates = []
    if rho > 0:
        first = _compressed_eigenvalues(T1, T2, rho, rng, max_abs)
        second = _compressed_eigenvalues(T1, T2, rho, rng, max_abs)
        kept = [v for v in first if second.size and np.min(np.abs(second - v)) <= 1e3 * cluster_radius]
        diag["raw_eigenvalues"] = int(first.size)
        spurious = 0
        for lam in _cluster(kept, cluster_radius):
            e = nullity_at(lam, verify_rel)
            if e <= generic:
                spurious += 1
                continue
            candidates.append(PencilCandidate(
                value=lam,
                eigdim=int(e),
                is_zero=abs(lam) <= LAMBDA_ATOL,
                is_one=abs(lam - 1) <= LAMBDA_ATOL,
                is_minus_one=abs(lam + 1) <= LAMBDA_ATOL,
                inside_Z=abs(lam) <= LAMBDA_ATOL or abs(lam - 1) <= LAMBDA_ATOL or e == common,
            ))
        diag["rejected_clusters"] = spurious
        cond = np.linalg.cond(np.vstack([T1, T2])) if common == 0 else float("inf")
        diag["ill_conditioned"] = bool(cond > 1e8)
    candidates.sort(key=lambda c: (round(c.value.real, 9), round(c.value.imag, 9)))
    return PencilSpectrum(
        n=n,
        candidates=candidates,
        generic_eigdim=int(generic),
        common_kernel_dim=int(common),
        ker1_dim=int(ker1),
        ker2_dim=int(ker2),
        ker_diff_dim=int(nullity_at(1.0)),
        ker_sum_dim=int(nullity_at(-1.0)),
        method="numeric",
        diagnostics=diag,
    )


def _is_plain_structured(tau):
    return isinstance(tau, LinearMap) and tau.structured and tau.sensing is None


def spectrum(tau1, tau2, tol=DEFAULT_TOL, rng_seed=0):
    """Combinatorial spectrum when both maps are structured, numeric otherwise."""
    if _is_plain_structured(tau1) and _is_plain_structured(tau2):
        return spectrum_combinatorial(tau1, tau2)
    return spectrum_numeric(tau1, tau2, tol=tol, rng_seed=rng_seed)


def dim_U(spec, sign_variant=False):
    """Dimension of the parallel-image locus, -1 when it is empty."""
    best = spec.generic_eigdim + 1 if spec.path_type else -1
    for c in spec.candidates:
        if c.is_zero or c.is_one or c.inside_Z:
            continue
        if sign_variant and c.is_minus_one:
            continue
        best = max(best, c.eigdim)
    return best


def spectra_agree(a, b, atol=LAMBDA_ATOL):
    """Same candidate set (lam within atol, eigdims exact) and same generic data."""
    if (a.generic_eigdim, a.common_kernel_dim, a.path_type) != (b.generic_eigdim, b.common_kernel_dim, b.path_type):
        return False, "generic eigenspace data differ"
    if len(a.candidates) != len(b.candidates):
        return False, f"{len(a.candidates)} vs {len(b.candidates)} candidates"
    unmatched = list(b.candidates)
    for c in a.candidates:
        hit = next((o for o in unmatched if abs(o.value - c.value) <= atol), None)
        if hit is None:
            return False, f"no match for lambda={c.value}"
        if hit.eigdim != c.eigdim:
            return False, f"eigdim {c.eigdim} vs {hit.eigdim} at lambda={c.value}"
        unmatched.remove(hit)
    return True, ""


@dataclass
class ConditionReport:
    """Rank and codimension checks over every ordered pair of a family."""

    verdict: bool
    d: int
    n: int
    sign_variant: bool
    pairs_checked: int
    pairs_covered: int
    rank_ok: bool
    failures: list = field(default_factory=list)

    def to_json(self):
        return {
            "verdict": self.verdict,
            "d": self.d,
            "n": self.n,
            "sign_variant": self.sign_variant,
            "pairs_checked": self.pairs_checked,
            "pairs_covered": self.pairs_covered,
            "rank_ok": self.rank_ok,
            "failures": self.failures,
        }


def check_condition_1(family, d, sign_variant=False, tol=DEFAULT_TOL, cap=DEFAULT_CAP, max_failures=50):
    """rank(tau) >= 2d for every member and n - dim U >= d for every ordered pair.

    Pairs are visited up to simultaneous left multiplication by the
    family's symmetry group, which leaves both checks unchanged.
    """
    if d < 0:
        raise InputError("d must be nonnegative")
    pairs = family.pair_orbits(ordered=True, cap=cap)
    n = family.source_dim
    ranks = {}

    def rank_of(t):
        key = t.key()
        if key not in ranks:
            ranks[key] = rank_tol(t.materialize(), tol)
        return ranks[key]

    failures = []
    n_failed = 0
    rank_ok = True
    for k, (t1, t2) in enumerate(pairs):
        reasons = []
        r1, r2 = rank_of(t1), rank_of(t2)
        if min(r1, r2) < 2 * d:
            rank_ok = False
            reasons.append(f"rank {min(r1, r2)} < 2d = {2 * d}")
        du = dim_U(spectrum(t1, t2, tol), sign_variant)
        if n - du < d:
            reasons.append(f"codim {n - du} < d = {d}")
        if not reasons:
            continue
        n_failed += 1
        if len(failures) < max_failures:
            failures.append({
                "pair": [t1.describe(), t2.describe()],
                "multiplicity": int(pairs.multiplicity[k]),
                "dim_U": du,
                "reasons": reasons,
            })
    return ConditionReport(
        verdict=n_failed == 0,
        d=d,
        n=n,
        sign_variant=sign_variant,
        pairs_checked=len(pairs),
        pairs_covered=pairs.covered(),
        rank_ok=rank_ok,
        failures=failures,
    )


@dataclass
class BoundAudit:
    """Exhaustive check that dim U <= m - n, with a cross-check of both spectrum paths."""

    family: str
    n: int
    sign_variant: bool
    bound: int
    pairs_checked: int
    pairs_covered: int
    within_bound: int
    agree: int
    max_dim_U: int
    violations: list = field(default_factory=list)
    disagreements: list = field(default_factory=list)

    @property
    def all_within(self):
        return self.within_bound == self.pairs_covered

    @property
    def all_agree(self):
        return self.agree == self.pairs_covered

    def to_json(self):
        out = dict(self.__dict__)
        out["all_within"] = self.all_within
        out["all_agree"] = self.all_agree
        return out


def audit_dimension_bound(family, n, sign_variant=False, cross_check=True, exhaustive=False,
                          tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    """Verify dim U (or dim U with the sign exclusion) <= m - n over every ordered pair.

    Counts are weighted by orbit multiplicity so they refer to ordered
    pairs; with ``exhaustive`` every ordered pair is evaluated directly.
    """
    if not family.structured or family.compose_with is not None:
        raise UnsupportedMapError("the bound audit needs a structured family without a sensing matrix")
    bound = family.m - n
    if exhaustive:
        members = list(family.enumerate(cap=cap))
        if len(members) ** 2 > cap:
            raise FamilySizeError(len(members) ** 2, cap)
        items = [((a, b), 1) for a in members for b in members]
    else:
        ps = family.pair_orbits(cap=cap)
        items = [(ps.pair(k), int(ps.multiplicity[k])) for k in range(len(ps))]
    within = agree = 0
    max_du = -1
    violations, disagreements = [], []
    for (t1, t2), mult in items:
        comb = spectrum_combinatorial(t1, t2)
        du = dim_U(comb, sign_variant)
        max_du = max(max_du, du)
        if du <= bound:
            within += mult
        else:
            violations.append({"pair": [t1.describe(), t2.describe()], "dim_U": du})
        if cross_check:
            ok, why = spectra_agree(comb, spectrum_numeric(t1, t2, tol))
            if ok:
                agree += mult
            else:
                disagreements.append({"pair": [t1.describe(), t2.describe()], "reason": why})
    covered = sum(m for _, m in items)
    return BoundAudit(
        family=family.describe(),
        n=n,
        sign_variant=sign_variant,
        bound=bound,
        pairs_checked=len(items),
        pairs_covered=covered,
        within_bound=within,
        agree=agree if cross_check else covered,
        max_dim_U=max_du,
        violations=violations,
        disagreements=disagreements,
    )
