"""Elementary symmetric functions and the pointwise curvature inequalities.

Everything here works on principal-curvature vectors ``kappa`` of length
``m`` (the hypersurface dimension).  Batch variants accept arrays of shape
``(count, m)`` and are what the cone scans use.

Internally sums are accumulated in ``np.longdouble``: the refined
Newton-MacLaurin gap vanishes on whole families of vectors and the float64
round-off on those families is of the same size as the acceptance tolerances.
"""

from __future__ import annotations

import enum
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

MAX_DIM = 64
EQUALITY_TOL = 1e-9
VIOLATION_TOL = 1e-12

_EXT = np.longdouble


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class PreconditionError(ValueError):
    """Input violates a stated precondition (e.g. cone membership)."""


class RootFindingError(ArithmeticError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class Equality(enum.Enum):
    CASE_I = "EqualityCaseI"
    CASE_II = "EqualityCaseII"
    INTERIOR = "Interior"


class GapClass(enum.Enum):
    STRICT_NEGATIVE = "StrictNegative"
    EQUALITY_CASE_I = "EqualityCaseI"
    EQUALITY_CASE_II = "EqualityCaseII"
    POSITIVE = "Positive"


class ConeKind(enum.Enum):
    HOROCONVEX = "horoconvex"
    PAIRWISE_PRODUCT = "pairwise"
    GARDING = "garding"
    UNIT_BOX = "unitbox"


@dataclass(frozen=True)
class ConeSpec:
    kind: ConeKind
    extent: float = 10.0
    k: int | None = None

    def __post_init__(self):
        if self.extent <= 0:
            raise DomainError("cone extent must be positive")
        if self.kind is ConeKind.GARDING and (self.k is None or self.k < 1):
            raise DomainError("Garding cone needs k >= 1")

    def contains(self, kappa) -> bool:
        return bool(self.contains_batch(np.atleast_2d(as_kappa(kappa)))[0])

    def contains_batch(self, K: np.ndarray) -> np.ndarray:
        K = np.asarray(K, dtype=float)
        if self.kind is ConeKind.HOROCONVEX:
            return np.all(K >= 1.0, axis=-1)
        if self.kind is ConeKind.UNIT_BOX:
            return np.all((K >= 0.0) & (K <= 1.0), axis=-1)
        if self.kind is ConeKind.PAIRWISE_PRODUCT:
            # min over i != j of k_i k_j is attained by the two smallest or two largest
            S = np.sort(K, axis=-1)
            return np.minimum(S[..., 0] * S[..., 1], S[..., -1] * S[..., -2]) >= 1.0
        if self.k > K.shape[-1]:
            raise DomainError("Garding index exceeds dimension")
        table = sigma_table(K, self.k)
        return np.all(table[1:] > 0, axis=0)


@dataclass
class GapReport:
    operation: str
    gap: float
    classification: GapClass
    witness: np.ndarray
    sigma_form: float | None = None

    def to_dict(self) -> dict:
        return {
            "operation": self.operation,
            "gap": self.gap,
            "classification": self.classification.value,
            "witness": [float(x) for x in self.witness],
            "sigma_form": self.sigma_form,
        }


def as_kappa(values) -> np.ndarray:
    kappa = np.asarray(values, dtype=float)
    if kappa.ndim != 1 or kappa.size < 1:
        raise DomainError("kappa must be a non-empty 1-D vector")
    if kappa.size > MAX_DIM:
        raise DomainError(f"dimension {kappa.size} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(kappa)):
        raise DomainError("kappa has non-finite entries")
    return kappa


def sigma_table(K, kmax: int, dtype=_EXT) -> np.ndarray:
    """Return ``sigma_0 .. sigma_kmax`` of the last axis of ``K``.

    Prefix recurrence: after absorbing entries ``x_0..x_j`` the table holds
    the symmetric functions of that prefix, and ``e_k += x_j e_{k-1}`` adds
    the next one.  Output has shape ``(kmax + 1,) + K.shape[:-1]``; entries
    with ``k > m`` are zero.
    """
    K = np.asarray(K, dtype=dtype)
    m = K.shape[-1]
    out = np.zeros((kmax + 1,) + K.shape[:-1], dtype=dtype)
    out[0] = 1
    for j in range(m):
        x = K[..., j]
        for k in range(min(j + 1, kmax), 0, -1):
            out[k] += x * out[k - 1]
    return out


def p_table(K, kmax: int, dtype=_EXT) -> np.ndarray:
    table = sigma_table(K, kmax, dtype)
    m = np.shape(K)[-1]
    for k in range(min(kmax, m) + 1):
        table[k] /= math.comb(m, k)
    return table


def sigma(k: int, kappa) -> float:
    """k-th elementary symmetric function; ``sigma(-1, .) == 0``."""
    kappa = as_kappa(kappa)
    m = kappa.size
    if k == -1:
        return 0.0
    if not 0 <= k <= m:
        raise DomainError(f"k={k} outside [0, {m}]")
    return float(sigma_table(np.sort(kappa), k)[k])


def p_mean(k: int, kappa) -> float:
    kappa = as_kappa(kappa)
    if not 0 <= k <= kappa.size:
        raise DomainError(f"k={k} outside [0, {kappa.size}]")
    return sigma(k, kappa) / math.comb(kappa.size, k)


def in_gamma_k(kappa, k: int) -> bool:
    kappa = as_kappa(kappa)
    if not 1 <= k <= kappa.size:
        raise DomainError(f"k={k} outside [1, {kappa.size}]")
    table = sigma_table(np.sort(kappa), k)
    return bool(np.all(table[1:] > 0))


def _require_gamma(kappa, k):
    if not in_gamma_k(kappa, k):
        raise PreconditionError(f"kappa not in Gamma_{k}^+")


def nm_gap_upper(k: int, kappa) -> float:
    """Slack in ``sigma_{k-1} sigma_{k+1} / sigma_k^2 <= k(m-k)/((k+1)(m-k+1))``."""
    kappa = as_kappa(kappa)
    m = kappa.size
    if not 1 <= k <= m - 1:
        raise DomainError(f"k={k} outside [1, {m - 1}]")
    _require_gamma(kappa, k)
    s = sigma_table(np.sort(kappa), k + 1)
    bound = _EXT(k * (m - k)) / _EXT((k + 1) * (m - k + 1))
    return float(bound - s[k - 1] * s[k + 1] / s[k] ** 2)


def nm_gap_lower(k: int, kappa) -> float:
    """Slack in ``sigma_1 sigma_{k-1} / sigma_k >= k m / (m + 1 - k)``."""
    kappa = as_kappa(kappa)
    m = kappa.size
    if not 1 <= k <= m:
        raise DomainError(f"k={k} outside [1, {m}]")
    _require_gamma(kappa, k)
    s = sigma_table(np.sort(kappa), k)
    if s[k] == 0:
        raise ZeroDivisionError("sigma_k vanishes")
    return float(s[1] * s[k - 1] / s[k] - _EXT(k * m) / _EXT(m + 1 - k))


# -- refined inequality and the two claims ---------------------------------

def refined_gap_batch(K) -> np.ndarray:
    """p-normalised refined gap for each row of ``K`` (m >= 5)."""
    K = np.asarray(K)
    if K.shape[-1] < 5:
        raise DomainError("refined gap needs m >= 5")
    p = p_table(K, 5)
    with np.errstate(divide="raise", invalid="raise"):
        g = (p[5] * p[3] / p[4] - p[4]) + 2 * (p[2] - p[3] ** 2 / p[4]) + (p[1] * p[3] / p[4] - 1)
    return g.astype(float)


def refined_sigma_form(kappa) -> float:
    """Un-normalised left side, written with sigma_k and n = m + 1."""
    kappa = as_kappa(kappa)
    m = kappa.size
    if m < 5:
        raise DomainError("refined gap needs m >= 5")
    n = m + 1
    s = sigma_table(np.sort(kappa), 5)
    if s[4] == 0:
        raise ZeroDivisionError("sigma_4 vanishes")
    t1 = 5 * s[5] * s[3] / s[4] - _EXT(4 * (n - 5)) / (n - 4) * s[4]
    t2 = _EXT((n - 4) * (n - 5)) / 6 * (_EXT(4 * (n - 3)) / (n - 4) * s[2] - 3 * s[3] ** 2 / s[4])
    t3 = _EXT((n - 2) * (n - 3) * (n - 4) * (n - 5)) / 24 * (s[1] * s[3] / s[4] - _EXT(4 * (n - 1)) / (n - 4))
    return float(t1 + t2 + t3)


def refined_gap(kappa, tol: float = EQUALITY_TOL) -> GapReport:
    """Refined Newton-MacLaurin gap with its equality classification.

    The p-normalised value equals the sigma form divided by
    ``(m - 4) C(m, 3)``; both are computed and their signs must agree.
    """
    kappa = as_kappa(kappa)
    if kappa.size < 5:
        raise DomainError("refined gap needs m >= 5")
    s4 = sigma(4, kappa)
    if s4 == 0:
        raise ZeroDivisionError("sigma_4 vanishes")
    gap = float(refined_gap_batch(np.sort(kappa)[None, :])[0])
    sform = refined_sigma_form(kappa)
    scale = (kappa.size - 4) * math.comb(kappa.size, 3)
    if abs(sform / scale - gap) > 1e-9 * max(1.0, abs(gap), abs(sform / scale)):
        raise ArithmeticError("sigma form and p form of the refined gap disagree")
    eq = classify_equality(kappa, tol)
    if eq is Equality.CASE_I:
        cls = GapClass.EQUALITY_CASE_I
    elif eq is Equality.CASE_II:
        cls = GapClass.EQUALITY_CASE_II
    elif gap > 0:
        cls = GapClass.POSITIVE
    else:
        cls = GapClass.STRICT_NEGATIVE
    return GapReport("refined_gap", gap, cls, kappa.copy(), sform)


def claim1_batch(K) -> np.ndarray:
    p = p_table(K, 4)
    return (3 * (p[2] * p[4] - p[3] ** 2) + (p[1] * p[3] - p[4])).astype(float)


def claim2_batch(K) -> np.ndarray:
    p = p_table(K, 5)
    return (3 * (p[5] * p[3] - p[4] ** 2) + (p[1] * p[3] - p[4])).astype(float)


def claim1_gap(kappa) -> float:
    kappa = as_kappa(kappa)
    if kappa.size < 4:
        raise DomainError("claim 1 needs m >= 4")
    return float(claim1_batch(np.sort(kappa)[None, :])[0])


def claim2_gap(kappa) -> float:
    kappa = as_kappa(kappa)
    if kappa.size < 5:
        raise DomainError("claim 2 needs m >= 5")
    return float(claim2_batch(np.sort(kappa)[None, :])[0])


# -- cyclic identities -------------------------------------------------------

IDENTITY_TAGS = ("m4-first", "m4-second", "m4-combined", "m5-first", "m5-second", "m5-combined")


def _pair_split_terms(m):
    """(pair, disjoint pair) index sets: every distinct k_a k_b (k_c - k_d)^2."""
    idx = range(m)
    for ab in itertools.combinations(idx, 2):
        rest = [i for i in idx if i not in ab]
        for cd in itertools.combinations(rest, 2):
            yield ab, cd


def _triple_split_terms():
    for abc in itertools.combinations(range(5), 3):
        yield abc, tuple(i for i in range(5) if i not in abc)


def cyclic_sides(tag: str, K) -> tuple[np.ndarray, np.ndarray]:
    """Left side (from p-means) and right side (explicit cyclic sum) of an identity."""
    if tag not in IDENTITY_TAGS:
        raise DomainError(f"unknown identity {tag!r}")
    K = np.asarray(K, dtype=_EXT)
    m = int(tag[1])
    if K.shape[-1] != m:
        raise DomainError(f"identity {tag} needs m={m}, got {K.shape[-1]}")
    x = [K[..., i] for i in range(m)]
    p = p_table(K, m)
    first_l = p[1] * p[3] - p[4]
    if m == 4:
        second_l = 3 * (p[2] * p[4] - p[3] ** 2)
        first_r = sum(x[a] * x[b] * (x[c] - x[d]) ** 2 for (a, b), (c, d) in _pair_split_terms(4)) / 16
        second_r = -sum((x[a] * x[b]) ** 2 * (x[c] - x[d]) ** 2 for (a, b), (c, d) in _pair_split_terms(4)) / 16
        combined_r = sum(
            x[a] * x[b] * (1 - x[a] * x[b]) * (x[c] - x[d]) ** 2 for (a, b), (c, d) in _pair_split_terms(4)
        ) / 16
    else:
        second_l = 3 * (p[5] * p[3] - p[4] ** 2)
        first_r = sum(x[a] * x[b] * (x[c] - x[d]) ** 2 for (a, b), (c, d) in _pair_split_terms(5)) / 100
        second_r = -3 * sum((x[a] * x[b] * x[c]) ** 2 * (x[d] - x[e]) ** 2 for (a, b, c), (d, e) in _triple_split_terms()) / 100
        combined_r = sum(
            (x[a] * x[b] + x[b] * x[c] + x[a] * x[c] - 3 * (x[a] * x[b] * x[c]) ** 2) * (x[d] - x[e]) ** 2
            for (a, b, c), (d, e) in _triple_split_terms()
        ) / 100
    part = tag.split("-")[1]
    if part == "first":
        return first_l, first_r
    if part == "second":
        return second_l, second_r
    return first_l + second_l, combined_r


def cyclic_identity_residual(tag: str, kappa) -> float:
    kappa = as_kappa(kappa)
    lhs, rhs = cyclic_sides(tag, kappa[None, :])
    return float(abs(lhs[0] - rhs[0]))


def identity_battery(count: int = 100_000, seed: int = 0, low: float = -5.0, high: float = 5.0) -> dict:
    """Max relative residual per identity tag on uniform random real vectors.

    Relative to the larger side, with an absolute floor of 1e-14 (equivalently
    a denominator floor of 1e-2 at the 1e-12 relative level).
    """
    out = {}
    for i, tag in enumerate(IDENTITY_TAGS):
        rng = np.random.default_rng([seed, i])
        K = rng.uniform(low, high, size=(count, int(tag[1])))
        lhs, rhs = cyclic_sides(tag, K)
        scale = np.maximum(np.maximum(abs(lhs), abs(rhs)), _EXT(1e-2))
        out[tag] = float(np.max(abs(lhs - rhs) / scale))
    return out


# -- derivative reduction ------------------------------------------------------

def _secular_roots(u, mult, guesses, max_iter=200):
    """Root of sum_l mult_l / (y - u_l) in each gap (u_l, u_{l+1})."""
    lo = u[:-1].copy()
    hi = u[1:].copy()
    y = np.where((guesses > lo) & (guesses < hi), guesses, 0.5 * (lo + hi))
    eps = np.finfo(float).eps
    for _ in range(max_iter):
        d = y[:, None] - u[None, :]
        # a bisection midpoint can land on a pole when entries nearly coincide
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.sum(mult / d, axis=1)
            dg = -np.sum(mult / d**2, axis=1)
        lo = np.where(g > 0, y, lo)
        hi = np.where(g < 0, y, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g / dg
        y_new = y - step
        # closed bracket: a converged iterate has just become one of its ends
        bad = ~((y_new >= lo) & (y_new <= hi))
        y_new = np.where(bad, 0.5 * (lo + hi), y_new)
        small = ~bad & (np.abs(step) <= 2 * eps * np.abs(y))
        done = small | (hi - lo <= 4 * eps * np.abs(y)) | (g == 0)
        y = y_new
        if np.all(done):
            return y, True
    return y, False


def derivative_reduce(kappa, return_residual: bool = False):
    """Curvatures of ``F'/m`` where ``F(x) = prod(x + kappa_i)``.

    The m - 1 returned values share p_1..p_{m-1} with ``kappa`` and interlace
    with its sorted entries.  Companion-matrix eigenvalues give starting
    points; each root is then polished by safeguarded Newton on the secular
    equation inside its interlacing bracket, and repeated entries of
    ``kappa`` contribute their value with multiplicity reduced by one.
    """
    kappa = np.sort(as_kappa(kappa))
    m = kappa.size
    if m < 2:
        raise DomainError("derivative reduction needs m >= 2")
    s = sigma_table(kappa, m)
    # F'(x)/m = sum_j (m - j)/m sigma_j x^(m-1-j); roots are -kappa_tilde
    coeffs = np.array([float(_EXT(m - j) / m * s[j]) for j in range(m)])
    if m == 2:
        guesses = np.array([-coeffs[1]])
    else:
        comp = np.zeros((m - 1, m - 1))
        comp[0, :] = -coeffs[1:]
        comp[np.arange(1, m - 1), np.arange(m - 2)] = 1.0
        guesses = np.sort(-np.linalg.eigvals(comp).real)

    u, mult = np.unique(kappa, return_counts=True)
    positions, pos = [], 0
    for c in mult[:-1]:
        pos += c - 1
        positions.append(pos)
        pos += 1
    roots = np.repeat(u, mult - 1).tolist()
    if u.size > 1:
        found, ok = _secular_roots(u, mult.astype(float), guesses[positions])
        if not ok:
            raise RootFindingError("secular iteration did not converge", _poly_residual(coeffs, found))
        roots.extend(found.tolist())
    out = np.sort(np.array(roots))
    res = _poly_residual(coeffs, out)
    if not np.isfinite(res):
        raise RootFindingError("non-finite derivative roots", res)
    return (out, res) if return_residual else out


def _poly_residual(coeffs, roots):
    return float(np.max(np.abs(np.polyval(coeffs, -np.asarray(roots))))) if len(roots) else 0.0


def reduce_to(kappa, m_target: int) -> np.ndarray:
    kappa = as_kappa(kappa)
    while kappa.size > m_target:
        kappa = derivative_reduce(kappa)
    return kappa


# -- equality classification --------------------------------------------------

def classify_batch(K, tol: float = EQUALITY_TOL) -> np.ndarray:
    """Vectorised equality-pattern classifier; returns an object array of Equality."""
    K = np.asarray(K, dtype=float)
    m = K.shape[-1]
    t = tol * np.maximum(1.0, np.abs(K).max(axis=-1))
    spread = K.max(axis=-1) - K.min(axis=-1)
    case1 = spread <= t
    near1 = np.abs(K - 1.0) <= t[..., None]
    above = K > 1.0 + t[..., None]
    case2 = ~case1 & (above.sum(axis=-1) == 1) & (near1.sum(axis=-1) == m - 1)
    out = np.full(K.shape[:-1], Equality.INTERIOR, dtype=object)
    out[case1] = Equality.CASE_I
    out[case2] = Equality.CASE_II
    return out


def classify_equality(kappa, tol: float = EQUALITY_TOL) -> Equality:
    if tol <= 0:
        raise DomainError("tol must be positive")
    return classify_batch(as_kappa(kappa)[None, :], tol)[0]


def pattern_distance(K) -> np.ndarray:
    """Sup-norm distance to the nearest equality pattern (either case)."""
    K = np.sort(np.asarray(K, dtype=float), axis=-1)
    d1 = 0.5 * (K[..., -1] - K[..., 0])
    d2 = np.abs(K[..., :-1] - 1.0).max(axis=-1)
    return np.minimum(d1, d2)


# -- sampling and scans ---------------------------------------------------------

_LAW_WEIGHTS = (0.4, 0.4, 0.1, 0.1)  # uniform, log-uniform, perturbed pattern, exact pattern
PERTURBATION = 1e-4
CHUNK = 1 << 16
_CONE_CODE = {ConeKind.HOROCONVEX: 0, ConeKind.PAIRWISE_PRODUCT: 1, ConeKind.GARDING: 2, ConeKind.UNIT_BOX: 3}


def _patterns(cone, m, size, rng):
    K = cone.extent
    if cone.kind is ConeKind.UNIT_BOX:
        c = rng.uniform(1e-3, 1.0, size)
        return np.repeat(c[:, None], m, axis=1)
    out = np.ones((size, m))
    case_one = rng.random(size) < 0.5
    c = 1.0 + np.exp(rng.uniform(np.log(1e-3), np.log(K), size))
    out[case_one] = c[case_one, None]
    rows = np.flatnonzero(~case_one)
    out[rows, rng.integers(0, m, rows.size)] = c[rows]
    return out


def sample_cone(cone: ConeSpec, m: int, size: int, rng: np.random.Generator):
    """Draw ``size`` vectors from the cone; returns ``(K, planted)``.

    ``planted`` marks exact equality patterns.  The mixture is uniform, one
    plus log-uniform, and +/-1e-4 perturbations of equality patterns,
    reflected back into the cone.
    """
    if cone.kind is ConeKind.GARDING:
        raise DomainError("sampling is defined for horoconvex, pairwise and unitbox cones")
    law = rng.choice(4, size=size, p=_LAW_WEIGHTS)
    Kx = cone.extent
    if cone.kind is ConeKind.UNIT_BOX:
        uni = 1.0 - rng.random((size, m))
        logu = np.exp(rng.uniform(np.log(1e-3), 0.0, (size, m)))
    else:
        uni = 1.0 + Kx * rng.random((size, m))
        logu = 1.0 + np.exp(rng.uniform(np.log(1e-6), np.log(Kx), (size, m)))
    pat = _patterns(cone, m, size, rng)
    pert = pat + rng.uniform(-PERTURBATION, PERTURBATION, (size, m))
    if cone.kind is ConeKind.UNIT_BOX:
        pert = 1.0 - np.abs(1.0 - pert)
    else:
        pert = 1.0 + np.abs(pert - 1.0)
    out = np.select([law[:, None] == 0, law[:, None] == 1, law[:, None] == 2], [uni, logu, pert], pat)
    if cone.kind is ConeKind.PAIRWISE_PRODUCT:
        # replace one entry of half the bulk samples by a < 1 with a * min(others) >= 1
        swap = (law < 2) & (rng.random(size) < 0.5)
        rows = np.flatnonzero(swap)
        j = rng.integers(0, m, rows.size)
        sub = out[rows].copy()
        sub[np.arange(rows.size), j] = np.inf
        floor = 1.0 / sub.min(axis=1)
        out[rows, j] = floor + rng.random(rows.size) * (1.0 - floor)
    return out, law == 3


@dataclass
class ScanSummary:
    cone: str
    m: int
    count: int
    seed: int
    max_gap: float
    argmax_witness: list
    min_gap: float
    argmin_witness: list
    violations: int
    positive_count: int
    negative_count: int
    case_counts: dict = field(default_factory=dict)
    planted: int = 0
    planted_flagged: int = 0
    equality_max_abs_gap: float = 0.0
    interior_near_zero: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _scan_chunk(cone, m, seed, index, size, tol):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_CONE_CODE[cone.kind], m, index)))
    K, planted = sample_cone(cone, m, size, rng)
    gap = refined_gap_batch(K)
    cls = classify_batch(K, tol)
    eq = cls != Equality.INTERIOR
    near_zero = (~eq) & (np.abs(gap) < tol) & (pattern_distance(K) > 1e-3)
    i_max, i_min = int(np.argmax(gap)), int(np.argmin(gap))
    return {
        "max": (gap[i_max], K[i_max]),
        "min": (gap[i_min], K[i_min]),
        "violations": int(np.sum(gap > VIOLATION_TOL)),
        "positive": int(np.sum(gap > VIOLATION_TOL)),
        "negative": int(np.sum(gap < -VIOLATION_TOL)),
        "case_I": int(np.sum(cls == Equality.CASE_I)),
        "case_II": int(np.sum(cls == Equality.CASE_II)),
        "planted": int(planted.sum()),
        "planted_flagged": int(np.sum(planted & eq)),
        "eq_gap": float(np.max(np.abs(gap[eq]))) if eq.any() else 0.0,
        "near_zero": int(near_zero.sum()),
    }


def worker_count() -> int:
    env = os.environ.get("HYPAF_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, cap)


def scan_cone(cone: ConeSpec, m: int, count: int, seed: int, tol: float = EQUALITY_TOL,
              threads: int | None = None) -> ScanSummary:
    """Sample the cone and evaluate the refined gap on every sample.

    Samples are generated in fixed-size chunks, each from its own seed
    substream, so the summary does not depend on the thread count.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    if m < 5 or m > MAX_DIM:
        raise DomainError("refined gap scan needs 5 <= m <= 64")
    sizes = [min(CHUNK, count - i) for i in range(0, count, CHUNK)]
    threads = threads or worker_count()
    jobs = [(cone, m, seed, i, s, tol) for i, s in enumerate(sizes)]
    if threads == 1 or len(jobs) == 1:
        parts = [_scan_chunk(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda j: _scan_chunk(*j), jobs))
    # first chunk wins ties, matching a serial argmax
    best = max(range(len(parts)), key=lambda i: (parts[i]["max"][0], -i))
    worst = min(range(len(parts)), key=lambda i: (parts[i]["min"][0], i))
    total = lambda key: sum(p[key] for p in parts)  # noqa: E731
    return ScanSummary(
        cone=cone.kind.value,
        m=m,
        count=count,
        seed=seed,
        max_gap=float(parts[best]["max"][0]),
        argmax_witness=[float(x) for x in parts[best]["max"][1]],
        min_gap=float(parts[worst]["min"][0]),
        argmin_witness=[float(x) for x in parts[worst]["min"][1]],
        violations=total("violations"),
        positive_count=total("positive"),
        negative_count=total("negative"),
        case_counts={"EqualityCaseI": total("case_I"), "EqualityCaseII": total("case_II")},
        planted=total("planted"),
        planted_flagged=total("planted_flagged"),
        equality_max_abs_gap=max(p["eq_gap"] for p in parts),
        interior_near_zero=total("near_zero"),
    )


def shift_by_one(coeffs: dict, m: int) -> dict:
    """Rewrite ``sum_k c_k sigma_k(kappa)`` in terms of ``sigma_j(kappa - 1)``.

    Uses ``sigma_k(1 + x) = sum_j C(m - j, k - j) sigma_j(x)``.  Coefficients
    are kept exact (ints or Fractions) so that vanishing low-order terms
    vanish exactly.
    """
    out = {}
    for k, c in coeffs.items():
        for j in range(k + 1):
            out[j] = out.get(j, 0) + c * math.comb(m - j, k - j)
    return {j: c for j, c in out.items() if c != 0}


def shifted_combination(coeffs: dict, X, dtype=_EXT) -> np.ndarray:
    """Evaluate ``sum_k c_k sigma_k(1 + x)`` from the excess vectors ``X``."""
    X = np.asarray(X)
    shifted = shift_by_one(coeffs, X.shape[-1])
    if not shifted:
        return np.zeros(X.shape[:-1])
    table = sigma_table(X, max(shifted), dtype)
    total = sum(dtype(float(c)) * table[j] for j, c in shifted.items())
    return np.asarray(total, dtype=float)
