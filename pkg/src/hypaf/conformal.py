"""Conformal metrics ``w^2 g_round`` on S^m with axisymmetric factor ``w(theta)``.

Schouten eigenvalues come from the conformal transformation law written in
the round metric,

    S = -Hess w / w + 2 dw (x) dw / w^2 - |dw|^2 / (2 w^2) g + g / 2,

split into the meridian direction (Hess -> w_thetatheta) and the m-1
spherical directions (Hess -> cot(theta) w_theta), then divided by w^2 so
they are measured in the conformal metric itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import grid
from ._io import atomic_write_text, fmt
from .symfunc import DomainError, sigma_table


class FactorFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    m: int
    theta: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "w", w)
        if self.m < 2:
            raise DomainError("sphere dimension must be >= 2")
        if w.shape != theta.shape:
            raise DomainError("theta and w differ in length")
        grid.check_theta(theta)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            bad = int(np.flatnonzero(~(np.isfinite(w) & (w > 0)))[0])
            raise DomainError(f"conformal factor must be positive; w[{bad}]={w[bad]:.6g}")

    @property
    def h(self) -> float:
        return math.pi / (self.theta.size - 1)

    @classmethod
    def round(cls, m: int, N: int = 400):
        theta = grid.uniform_theta(N)
        return cls(m, theta, np.ones_like(theta))

    @classmethod
    def from_function(cls, m: int, func, N: int = 400):
        theta = grid.uniform_theta(N)
        return cls(m, theta, np.asarray(func(theta), dtype=float))

    def scaled(self, c: float):
        return ConformalFactor(self.m, self.theta, c * self.w)


def write_factor(path, cf: ConformalFactor) -> None:
    lines = [f"{cf.m} {cf.theta.size - 1}"]
    lines += [f"{fmt(t)} {fmt(w)}" for t, w in zip(cf.theta, cf.w)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_factor(path) -> ConformalFactor:
    rows = [ln.split() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    try:
        m, N = (int(v) for v in rows[0])
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise FactorFormatError(f"cannot parse conformal factor file {path}: {exc}") from exc
    if data.shape != (N + 1, 2):
        raise FactorFormatError(f"expected {N + 1} rows, found {len(rows) - 1}")
    return ConformalFactor(m, data[:, 0], data[:, 1])


@dataclass
class SchoutenField:
    m: int
    mu_rad: np.ndarray
    mu_sph: np.ndarray

    def multiset(self) -> np.ndarray:
        return np.column_stack([self.mu_rad] + [self.mu_sph] * (self.m - 1))


def schouten(cf: ConformalFactor) -> SchoutenField:
    w = cf.w
    if np.any(w <= 0):
        raise DomainError("conformal factor must be positive")
    wt = grid.d1(w, cf.h)
    wtt = grid.d2(w, cf.h)
    cot_wt = grid.cot_times(wt, wtt, cf.theta)
    g = (wt / w) ** 2
    mu_rad = (-wtt / w + 1.5 * g + 0.5) / w**2
    mu_sph = (-cot_wt / w - 0.5 * g + 0.5) / w**2
    return SchoutenField(cf.m, mu_rad, mu_sph)


def sigma_k_metric(cf: ConformalFactor, k: int, field_: SchoutenField | None = None) -> np.ndarray:
    if not 0 <= k <= cf.m:
        raise DomainError(f"k={k} outside [0, {cf.m}]")
    A = field_ or schouten(cf)
    return sigma_table(A.multiset(), k)[k].astype(float)


def integrate(cf: ConformalFactor, f) -> float:
    """Integral against the volume of ``w^2 g_round``."""
    return grid.integrate_sphere(np.asarray(f) * cf.w**cf.m, cf.theta, cf.m)


def volume(cf: ConformalFactor) -> float:
    return integrate(cf, np.ones_like(cf.w))


def functional_F(cf: ConformalFactor, k: int) -> float:
    """Scale-invariant ``vol^{-(m-2k)/m} int sigma_k(g) dvol_g``."""
    s = sigma_k_metric(cf, k)
    return volume(cf) ** (-(cf.m - 2 * k) / cf.m) * integrate(cf, s)


def round_reference(m: int, k: int) -> float:
    return math.comb(m, k) / 2**k * grid.sphere_area(m) ** (2 * k / m)


def positivity_class(cf: ConformalFactor, field_: SchoutenField | None = None) -> int:
    """Largest j with the Schouten eigenvalues in the Garding cone of order j at every node."""
    A = field_ or schouten(cf)
    sig = sigma_table(A.multiset(), cf.m)
    j = 0
    while j < cf.m and np.all(sig[j + 1] > 0):
        j += 1
    return j


@dataclass
class SobolevReport:
    k: int
    value: float
    reference: float
    gap: float
    positivity: int
    protected: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "value": self.value,
            "reference": self.reference,
            "gap": self.gap,
            "positivity_class": self.positivity,
            "protected": self.protected,
            "notes": list(self.notes),
        }


def sobolev_protected(m: int, k: int, positivity: int) -> bool:
    """Whether the lower bound on F_k is covered for this positivity class.

    Covered: k-positive with 0 < k < m/2, or k = 2 with m > 4 and 1-positive.
    """
    if 0 < k < m / 2 and positivity >= k:
        return True
    return k == 2 and m > 4 and positivity >= 1


def sobolev_gap(cf: ConformalFactor, k: int) -> SobolevReport:
    A = schouten(cf)
    s = sigma_k_metric(cf, k, A)
    value = volume(cf) ** (-(cf.m - 2 * k) / cf.m) * integrate(cf, s)
    ref = round_reference(cf.m, k)
    pos = positivity_class(cf, A)
    rep = SobolevReport(k, value, ref, value - ref, pos, sobolev_protected(cf.m, k, pos))
    if not rep.protected:
        rep.notes.append(f"advisory: factor is {pos}-positive, bound not covered for k={k}")
    return rep


def gamma1_exponent(t: float, n: int) -> float:
    if t < 0:
        raise DomainError("t must be non-negative")
    return -math.expm1(-t / (n - 1))


def gamma1_regularize(cf: ConformalFactor, t: float) -> ConformalFactor:
    """``w -> w^{1 - exp(-t/(n-1))}`` with ``n = m + 1``."""
    a = gamma1_exponent(t, cf.m + 1)
    return ConformalFactor(cf.m, cf.theta, cf.w**a)


def gamma1_identity(cf: ConformalFactor, t: float) -> dict:
    """Check the regularized factor's ``sigma_1`` against its closed form.

    With ``a`` the exponent and ``G = |dw|^2 / w^2``,
    ``wt^2 sigma_1(wt^2 g) = (m/2)(1-a) + ((m-2)/2) a(1-a) G + a w^2 sigma_1(w^2 g)``.
    """
    m = cf.m
    a = gamma1_exponent(t, m + 1)
    reg = gamma1_regularize(cf, t)
    lhs = reg.w**2 * sigma_k_metric(reg, 1)
    G = (grid.d1(cf.w, cf.h) / cf.w) ** 2
    rhs = m / 2 * (1 - a) + (m - 2) / 2 * a * (1 - a) * G + a * cf.w**2 * sigma_k_metric(cf, 1)
    s1 = sigma_k_metric(reg, 1)
    return {
        "exponent": a,
        "min_sigma1": float(s1.min()),
        "gamma1": bool(np.all(s1 > 0)),
        "identity_residual": float(np.max(np.abs(lhs - rhs))),
    }


@dataclass
class AsymptoticRatios:
    t: float
    R1: float
    R2: float
    int_l2: float
    sigma2_integral: float
    area: float
    volume: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def asymptotic_compare(state) -> AsymptoticRatios:
    """Compare a flow state with the conformal metric ``sinh(r)^2 g_round``.

    ``R1 = int l2 / [((n-3)(n-4)/3) int sigma_2(w^2 g) dvol]`` and
    ``R2 = |Sigma| / vol(w^2 g)``; both tend to 1 along the flow.
    """
    S = state.S
    n = S.n
    cf = ConformalFactor(n - 1, S.theta, np.sinh(S.r))
    s2 = integrate(cf, sigma_k_metric(cf, 2))
    geo = state.geo
    l2 = geo.int_l2()
    A = geo.area()
    vol = volume(cf)
    return AsymptoticRatios(
        t=float(state.t),
        R1=l2 / ((n - 3) * (n - 4) / 3 * s2),
        R2=A / vol,
        int_l2=l2,
        sigma2_integral=s2,
        area=A,
        volume=vol,
    )


def sobolev_battery(count: int = 100, seed: int = 0, m: int = 5, ks=(1, 2), N: int = 400,
                    amplitude: float = 0.3, max_draws: int = 100_000) -> list:
    """Reports for ``count`` factors ``exp(a cos t + b cos 2t)`` per k whose bound is covered.

    Draws are rejected until the positivity precondition holds, so every
    returned report is protected.
    """
    rng = np.random.default_rng(seed)
    theta = grid.uniform_theta(N)
    out = []
    for k in ks:
        got, draws = 0, 0
        while got < count:
            draws += 1
            if draws > max_draws:
                raise RuntimeError(f"could not find {count} covered factors for k={k}")
            a, b = rng.uniform(-amplitude, amplitude, size=2)
            cf = ConformalFactor(m, theta, np.exp(a * np.cos(theta) + b * np.cos(2 * theta)))
            rep = sobolev_gap(cf, k)
            if rep.protected:
                out.append((float(a), float(b), rep))
                got += 1
    return out
