"""Least-squares recovery over a finite map family.

For each member T the inner problem min_c ||y - T B c|| is solved by the
pseudoinverse; the outer problem picks the member with the smallest
residual.  Since the residual equals ||y|| sqrt(1 - cos^2(y, T(V))), the
same member maximizes the cosine between y and T(V); both scores are kept
and their agreement is recorded on every solve.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FamilySizeError, InputError
from .maps import DEFAULT_CAP
from .numkit import DEFAULT_TOL, Subspace, Tolerance, pinv, rank_tol, sigma_max

__all__ = [
    "RecoveryOutcome",
    "StabilityReport",
    "solve_mle",
    "solve_unlabeled",
    "solve_sparse",
    "stability_report",
    "canonical_sign",
    "TIE_REL",
]

TIE_REL = 1e-12
MEMBERSHIP_TOL = Tolerance(rel=1e-8)


@dataclass
class RecoveryOutcome:
    """Estimate (tau_hat, coordinates) with its scores.

    ``x_hat`` holds coordinates in the given basis (the sensing matrix for
    unlabeled sensing, so x_hat is the signal itself); ``v_hat = basis @ x_hat``.
    """

    tau_hat: object
    tau_index: int
    x_hat: np.ndarray
    v_hat: np.ndarray
    residual: float
    cos_score: float
    ties: list = field(default_factory=list)
    tie_indices: list = field(default_factory=list)
    degenerate: bool = False
    argmax_agrees: bool = True
    support: tuple = None
    margin: float = None
    error_prediction: np.ndarray = None

    def to_json(self):
        def vec(v):
            v = np.asarray(v)
            if np.iscomplexobj(v):
                return [[float(z.real), float(z.imag)] for z in v]
            return [float(z) for z in v]

        return {
            "tau_hat": self.tau_hat.to_json(),
            "tau_hat_spec": self.tau_hat.describe(),
            "tau_index": self.tau_index,
            "x_hat": vec(self.x_hat),
            "v_hat": vec(self.v_hat),
            "residual": self.residual,
            "cos_score": self.cos_score,
            "ties": self.tie_indices,
            "degenerate": self.degenerate,
            "argmax_agrees": self.argmax_agrees,
            "support": None if self.support is None else list(self.support),
            "margin": self.margin,
            "error_prediction": None if self.error_prediction is None else vec(self.error_prediction),
        }


def _vector(y, name="y"):
    y = np.asarray(y)
    if y.ndim == 2 and 1 in y.shape:
        y = y.reshape(-1)
    if y.ndim != 1 or not np.all(np.isfinite(y)):
        raise InputError(f"{name} must be a finite vector")
    if np.issubdtype(y.dtype, np.integer):
        y = y.astype(float)
    return y


def _scores(y, basis, family, tol, cap):
    TB = family.apply_members(basis, cap)
    if TB.shape[1] != y.shape[0]:
        raise InputError(f"y has length {y.shape[0]}, maps produce {TB.shape[1]} entries")
    P = pinv(TB, tol)
    coords = np.einsum("kij,j->ki", P, y)
    fit = np.einsum("kij,kj->ki", TB, coords)
    residual = np.linalg.norm(y[None, :] - fit, axis=1)
    return coords, fit, residual


def _solve(y, basis, family, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    y = _vector(y)
    basis = np.asarray(basis)
    if family.cardinality() == 0:
        raise InputError("empty family")
    ynorm = np.linalg.norm(y)
    coords, fit, residual = _scores(y, basis, family, tol, cap)
    if ynorm == 0:
        idx = list(range(len(residual)))
        return RecoveryOutcome(family.member(0), 0, np.zeros(basis.shape[1], dtype=coords.dtype),
                               np.zeros(basis.shape[0], dtype=coords.dtype), 0.0, float("nan"),
                               ties=[], tie_indices=idx, degenerate=True)
    cos = np.minimum(np.linalg.norm(fit, axis=1) / ynorm, 1.0)
    best = int(np.argmin(residual))
    tie_idx = np.flatnonzero(residual <= residual[best] + TIE_REL * ynorm)
    first = int(tie_idx[0])
    cos_ties = set(np.flatnonzero(cos >= cos.max() - TIE_REL).tolist())
    agrees = first in cos_ties
    x_hat = coords[first]
    tau = family.member(first)
    return RecoveryOutcome(
        tau_hat=tau,
        tau_index=first,
        x_hat=x_hat,
        v_hat=basis @ x_hat,
        residual=float(residual[first]),
        cos_score=float(cos[first]),
        ties=[family.member(int(i)) for i in tie_idx[1:]] if len(tie_idx) <= 64 else [],
        tie_indices=[int(i) for i in tie_idx],
        argmax_agrees=bool(agrees),
    )


def solve_mle(y_bar, V, family, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    """argmin over tau in the family and v in V of ||y_bar - tau(v)||; first in order on ties."""
    if not isinstance(V, Subspace):
        raise InputError("V must be a Subspace; use solve_unlabeled for a sensing matrix")
    if V.ambient_dim != family.source_dim:
        raise InputError(f"family acts on H^{family.source_dim}, V lives in H^{V.ambient_dim}")
    return _solve(y_bar, V.basis, family, tol, cap)


def solve_unlabeled(y_bar, A, family, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    """Unlabeled sensing: the subspace is the column space of A and x_hat is the signal.

    ``family`` must not already carry a sensing matrix; A supplies it.
    """
    A = np.asarray(A)
    if A.ndim != 2 or not np.all(np.isfinite(A)):
        raise InputError("A must be a finite matrix")
    if rank_tol(A, tol) < A.shape[1]:
        raise InputError("A must have full column rank")
    if family.compose_with is not None:
        raise InputError("pass the bare family; A is applied here")
    if family.source_dim != A.shape[0] and family.structured:
        raise InputError(f"family acts on H^{family.source_dim}, A has {A.shape[0]} rows")
    return _solve(y_bar, A, family, tol, cap)


def canonical_sign(x, rel=1e-12):
    """Representative of {x, -x} whose first non-negligible entry is positive (real part for complex).

    Zero entries come back as +0.0.
    """
    x = np.asarray(x)
    scale = np.linalg.norm(x)
    if scale > 0:
        for v in x.reshape(-1):
            if abs(v) > rel * scale:
                lead = v.real if v.real != 0 else v.imag
                if lead < 0:
                    return -x + 0.0
                break
    return x + 0.0


def solve_sparse(y_bar, A, k, family, sign_variant=False, tol=DEFAULT_TOL, cap=DEFAULT_CAP):
    """k-sparse recovery: outer loop over supports, inner exhaustive least squares."""
    A = np.asarray(A)
    n = A.shape[1]
    if not 1 <= k <= n:
        raise InputError(f"need 1 <= k <= n, got k={k}, n={n}")
    n_supports = math.comb(n, k)
    if n_supports * family.cardinality() > cap:
        raise FamilySizeError(n_supports * family.cardinality(), cap)
    y = _vector(y_bar)
    best, best_support = None, None
    for support in itertools.combinations(range(n), k):
        out = _solve(y, A[:, list(support)], family, tol, cap)
        if best is None or out.residual < best.residual - TIE_REL * max(np.linalg.norm(y), 1.0):
            best, best_support = out, support
    x = np.zeros(n, dtype=np.result_type(best.x_hat, A))
    x[list(best_support)] = best.x_hat
    if sign_variant:
        x = canonical_sign(x)
    best.x_hat = x
    best.v_hat = x
    best.support = best_support
    return best


@dataclass
class StabilityReport:
    """Noise-stability check of the estimator at a clean observation y."""

    fitting_indices: list
    max_cos_outside: float
    noise_threshold: float
    margin: float
    condition_holds: bool
    outcome: RecoveryOutcome
    tau_in_fitting: bool = None
    x_star: np.ndarray = None
    predicted_error: np.ndarray = None
    equality_residual: float = None
    equality_holds: bool = None
    bound: float = None
    realized_error: float = None
    bound_holds: bool = None

    def to_json(self):
        def f(x):
            return None if x is None else float(x)

        return {
            "fitting_indices": self.fitting_indices,
            "max_cos_outside": self.max_cos_outside,
            "noise_threshold": self.noise_threshold,
            "margin": self.margin,
            "condition_holds": self.condition_holds,
            "tau_in_fitting": self.tau_in_fitting,
            "equality_residual": f(self.equality_residual),
            "equality_holds": self.equality_holds,
            "bound": f(self.bound),
            "realized_error": f(self.realized_error),
            "bound_holds": self.bound_holds,
            "outcome": self.outcome.to_json(),
        }


def roundoff_floor(TV, x_star):
    """Attainable accuracy of a least-squares solve with matrix ``TV`` near ``x_star``."""
    cond = np.linalg.cond(TV) if TV.size else 1.0
    return 64 * np.finfo(float).eps * cond * max(float(np.linalg.norm(x_star)), 1.0)


def stability_report(y, epsilon, V, family, tol=DEFAULT_TOL, membership=MEMBERSHIP_TOL, x_star=None,
                     equality_rel=1e-8, cap=DEFAULT_CAP):
    """Margin ||y|| (1 - max cos outside the fitting maps) - 2 ||eps|| and, when positive,
    the error identity x_hat - x_star = (T_hat V)^+ eps with its norm bound.

    ``V`` is a Subspace or a basis matrix (such as a sensing matrix); the
    family must not carry its own sensing matrix in the latter case.
    """
    y = _vector(y)
    eps = _vector(epsilon, "epsilon")
    if y.shape != eps.shape:
        raise InputError("y and epsilon must have the same length")
    ynorm = np.linalg.norm(y)
    if ynorm == 0:
        raise DomainError("stability report needs y != 0")
    basis = V.basis if isinstance(V, Subspace) else np.asarray(V)
    coords, fit, residual = _scores(y, basis, family, tol, cap)
    cos = np.minimum(np.linalg.norm(fit, axis=1) / ynorm, 1.0)
    fitting = residual <= membership.rel * ynorm
    outside = cos[~fitting]
    max_cos = float(outside.max()) if outside.size else None
    enorm = float(np.linalg.norm(eps))
    if max_cos is None:
        threshold, margin = float("inf"), float("inf")
    else:
        threshold = ynorm * (1.0 - max_cos) / 2.0
        margin = ynorm * (1.0 - max_cos) - 2.0 * enorm
    outcome = _solve(y + eps, basis, family, tol, cap)
    outcome.margin = margin
    report = StabilityReport(
        fitting_indices=[int(i) for i in np.flatnonzero(fitting)],
        max_cos_outside=max_cos,
        noise_threshold=threshold,
        margin=margin,
        condition_holds=bool(margin > 0),
        outcome=outcome,
    )
    if not report.condition_holds:
        return report
    report.tau_in_fitting = bool(fitting[outcome.tau_index])
    if x_star is None:
        x_star = coords[int(np.flatnonzero(fitting)[0])]
    x_star = np.asarray(x_star)
    TV = outcome.tau_hat.apply(basis)
    P = pinv(TV, tol)
    predicted = P @ eps
    outcome.error_prediction = predicted
    report.x_star = x_star
    report.predicted_error = predicted
    report.equality_residual = float(np.linalg.norm((outcome.x_hat - x_star) - predicted))
    # a relative-to-eps tolerance cannot go below the roundoff in x_hat itself
    floor = roundoff_floor(TV, x_star)
    allowed = max(equality_rel * enorm, floor) if enorm > 0 else 1e-12 * max(np.linalg.norm(x_star), 1.0)
    report.equality_holds = bool(report.equality_residual <= allowed)
    report.bound = float(sigma_max(basis @ P) * enorm)
    report.realized_error = float(np.linalg.norm(basis @ (outcome.x_hat - x_star)))
    report.bound_holds = bool(report.realized_error <= report.bound + 1e-8)
    return report
