"""The minimal gradient-Lipschitz seminorm of a 1-field and related functionals.

``gamma1_exact`` evaluates the closed-form pairwise expression
sqrt(A^2 + B^2) + A maximized over site pairs; ``gamma1_sup_sample`` is the
sampled supremum form used as a test oracle. ``gamma1_tilde`` is the cheaper
max(A~, B) surrogate with the same order of magnitude, and
``wells_condition_check`` verifies the pairwise inequality that a seminorm
bound M must satisfy before the piecewise-quadratic construction is run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OneField, validate

#: Constant relating gamma1_tilde to gamma1_exact: tilde <= exact <= TILDE_RATIO * tilde.
TILDE_RATIO = 2.0 * (1.0 + np.sqrt(2.0))


@dataclass(frozen=True)
class GammaBreakdown:
    value: float
    argmax_pair: tuple[int, int]
    A_at_max: float
    B_at_max: float


def functional_A(field: OneField, j: int, k: int) -> float:
    """|P_a(a) - P_b(a) + P_a(b) - P_b(b)| / |a-b|^2 for a=sites[j], b=sites[k]."""
    if j == k:
        raise ValueError("functional_A requires distinct indices")
    a, b = field.sites[j], field.sites[k]
    fa, fb = field.values[j], field.values[k]
    da, db = field.gradients[j], field.gradients[k]
    ab = a - b
    dist2 = float(ab @ ab)
    # P_a(a)-P_b(a) = fa - fb - db.(a-b);  P_a(b)-P_b(b) = fa + da.(b-a) - fb
    num = abs(2.0 * (fa - fb) - (da + db) @ ab)
    return num / dist2


def functional_B(field: OneField, j: int, k: int) -> float:
    """|D_a f - D_b f| / |a-b|."""
    if j == k:
        raise ValueError("functional_B requires distinct indices")
    ab = field.sites[j] - field.sites[k]
    return float(np.linalg.norm(field.gradients[j] - field.gradients[k]) / np.linalg.norm(ab))


def _pair_terms(field: OneField, j: int, k: int) -> tuple[float, float]:
    a = functional_A(field, j, k)
    b = functional_B(field, j, k)
    return a, b


def gamma1_exact(field: OneField) -> GammaBreakdown:
    """Exact pairwise maximum of sqrt(A^2+B^2)+A; 0 for a single site.

    The pair loop is deterministic: ties keep the lexicographically
    smallest (j, k), j < k.
    """
    validate(field)
    n = field.num_sites
    if n == 1:
        return GammaBreakdown(0.0, (0, 0), 0.0, 0.0)
    best = -1.0
    best_pair = (0, 1)
    best_ab = (0.0, 0.0)
    for j in range(n - 1):
        for k in range(j + 1, n):
            a, b = _pair_terms(field, j, k)
            v = float(np.hypot(a, b) + a)
            if v > best:
                best, best_pair, best_ab = v, (j, k), (a, b)
    return GammaBreakdown(best, best_pair, best_ab[0], best_ab[1])


def gamma1_sup_sample(field: OneField, probes: np.ndarray) -> float:
    """Sampled form 2 sup_x max_{a != b} |P_a(x)-P_b(x)| / (|a-x|^2 + |b-x|^2).

    Lower-bounds ``gamma1_exact`` for any probe set; used as an oracle.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[0] == 0:
        raise ValueError("probes must be non-empty")
    if field.num_sites == 1:
        return 0.0
    sites, vals, grads = field.sites, field.values, field.gradients
    base = vals - np.einsum("ij,ij->i", grads, sites)
    n = field.num_sites
    best = 0.0
    chunk = max(1, 4_000_000 // (n * n))
    for s in range(0, probes.shape[0], chunk):
        X = probes[s:s + chunk]                                # (P, d)
        px = base[:, None] + grads @ X.T                       # P_a(x): (n, P)
        d2 = np.sum((sites[:, None, :] - X[None, :, :]) ** 2, axis=2)
        num = np.abs(px[:, None, :] - px[None, :, :])
        den = d2[:, None, :] + d2[None, :, :]
        den[np.arange(n), np.arange(n), :] = np.inf
        best = max(best, float(np.max(num / den)))
    return 2.0 * best


def gamma1_tilde(field: OneField) -> float:
    """max over pairs of max(A~, B), with A~(a,b) = |P_a(a)-P_b(a)| / |a-b|^2."""
    validate(field)
    n = field.num_sites
    if n == 1:
        return 0.0
    sites, vals, grads = field.sites, field.values, field.gradients
    diff = sites[:, None, :] - sites[None, :, :]
    dist2 = np.einsum("jkd,jkd->jk", diff, diff)
    np.fill_diagonal(dist2, np.inf)
    # A~(j,k) uses the gradient at k evaluated at site j.
    pa_at_a = vals[:, None] - vals[None, :] - np.einsum("kd,jkd->jk", grads, diff)
    a_tilde = np.abs(pa_at_a) / dist2
    b = np.sqrt(np.einsum("jkd,jkd->jk", grads[:, None] - grads[None, :],
                          grads[:, None] - grads[None, :])) / np.sqrt(dist2)
    return float(max(a_tilde.max(), b.max()))


def wells_condition_check(field: OneField, M: float,
                          rel_slack: float = 1e-12) -> tuple[int, int] | None:
    """Verify f_b <= f_a + (D_a+D_b).(b-a)/2 + M|b-a|^2/4 - |D_a-D_b|^2/(4M)
    for every ordered pair (a, b).

    Returns ``None`` when the condition holds, else the first violating
    ordered index pair. Equality cases are classified as holding using a
    relative slack, since M equal to the exact seminorm attains equality.
    """
    if M <= 0:
        raise ValueError("M must be positive")
    sites, vals, grads = field.sites, field.values, field.gradients
    n = field.num_sites
    for ia in range(n):
        for ib in range(n):
            if ia == ib:
                continue
            ba = sites[ib] - sites[ia]
            rhs = (vals[ia]
                   + 0.5 * (grads[ia] + grads[ib]) @ ba
                   + 0.25 * M * (ba @ ba)
                   - 0.25 / M * np.sum((grads[ia] - grads[ib]) ** 2))
            scale = max(abs(vals[ib]), abs(rhs), M * (ba @ ba), 1.0)
            if vals[ib] > rhs + rel_slack * scale:
                return (ia, ib)
    return None
