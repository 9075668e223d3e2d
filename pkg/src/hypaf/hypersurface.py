"""Axisymmetric star-shaped hypersurfaces in hyperbolic space.

A surface is the graph ``r(theta)`` over S^{n-1}, with ``theta`` the polar
angle and ``r`` the geodesic distance from the origin.  Principal curvatures
come from the graph formula for the second fundamental form; they are stored
as the excess ``x = kappa - 1`` so that quantities which vanish on
horospheres (the Gauss-Bonnet integrand, umbilicity deficit) stay accurate
when ``r`` is large.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import grid
from ._io import atomic_write_text, fmt
from .symfunc import DomainError, shifted_combination, sigma_table


class CurvatureError(ArithmeticError):
    def __init__(self, message, node=None, theta=None):
        where = "" if node is None else f" at node {node} (theta={theta:.6g})"
        super().__init__(message + where)
        self.node = node
        self.theta = theta


class SurfaceFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AxisymmetricHypersurface:
    n: int
    theta: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        r = np.asarray(self.r, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "r", r)
        if self.n < 5:
            raise DomainError(f"ambient dimension must be >= 5, got {self.n}")
        if r.shape != theta.shape:
            raise DomainError("theta and r differ in length")
        h = grid.check_theta(theta)
        if not np.all(np.isfinite(r)):
            bad = int(np.flatnonzero(~np.isfinite(r))[0])
            raise DomainError(f"non-finite radius at node {bad}")
        if np.any(r <= 0):
            bad = int(np.flatnonzero(r <= 0)[0])
            raise DomainError(f"radius must be positive; r[{bad}]={r[bad]:.6g}")
        # even extension across the poles needs r_theta = 0 there
        slope0 = (-3 * r[0] + 4 * r[1] - r[2]) / (2 * h)
        slope1 = (3 * r[-1] - 4 * r[-2] + r[-3]) / (2 * h)
        if max(abs(slope0), abs(slope1)) > 10 * h * h * (1 + np.ptp(r)):
            raise DomainError("r_theta does not vanish at the poles")

    @property
    def N(self) -> int:
        return self.theta.size - 1

    @property
    def h(self) -> float:
        return math.pi / self.N

    @property
    def m(self) -> int:
        return self.n - 1

    @classmethod
    def sphere(cls, n: int, radius: float, N: int = 400):
        theta = grid.uniform_theta(N)
        return cls(n, theta, np.full_like(theta, float(radius)))

    @classmethod
    def from_function(cls, n: int, func, N: int = 400):
        theta = grid.uniform_theta(N)
        return cls(n, theta, np.asarray(func(theta), dtype=float))

    @classmethod
    def perturbed(cls, n: int, r0: float, eps: float, k: int = 2, N: int = 400):
        """``r0 + eps cos(k theta)``; ``k`` must be even for pole compatibility."""
        if k % 2:
            raise DomainError("cos(k theta) is even about both poles only for even k")
        return cls.from_function(n, lambda t: r0 + eps * np.cos(k * t), N)

    def with_radius(self, r):
        return AxisymmetricHypersurface(self.n, self.theta, r)


def write_surface(path, S: AxisymmetricHypersurface) -> None:
    lines = [f"{S.n} {S.N}"]
    lines += [f"{fmt(t)} {fmt(r)}" for t, r in zip(S.theta, S.r)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_surface(path) -> AxisymmetricHypersurface:
    text = Path(path).read_text(encoding="utf-8").split("\n")
    rows = [ln.split() for ln in text if ln.strip()]
    try:
        n, N = (int(v) for v in rows[0])
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise SurfaceFormatError(f"cannot parse surface file {path}: {exc}") from exc
    if data.shape != (N + 1, 2):
        raise SurfaceFormatError(f"expected {N + 1} rows, found {len(rows) - 1}")
    return AxisymmetricHypersurface(n, data[:, 0], data[:, 1])


# -- fields ---------------------------------------------------------------

@dataclass
class SupportFields:
    lam: np.ndarray
    dlam: np.ndarray
    phi: np.ndarray
    phi_t: np.ndarray
    phi_tt: np.ndarray
    cot_phi_t: np.ndarray
    v: np.ndarray


def support_fields(S: AxisymmetricHypersurface) -> SupportFields:
    """lambda = sinh r, lambda' = cosh r, phi with phi' = 1/sinh, and v."""
    r = S.r
    if np.any(r <= 0):
        raise DomainError("radius must be positive")
    # log tanh(r/2) = -2 artanh(e^-r), accurate to relative precision for large r
    phi = -2.0 * np.arctanh(np.exp(-r))
    phi_t = grid.d1(phi, S.h)
    phi_tt = grid.d2(phi, S.h)
    return SupportFields(
        lam=np.sinh(r),
        dlam=np.cosh(r),
        phi=phi,
        phi_t=phi_t,
        phi_tt=phi_tt,
        cot_phi_t=grid.cot_times(phi_t, phi_tt, S.theta),
        v=np.sqrt(1.0 + phi_t**2),
    )


@dataclass
class CurvatureField:
    """Meridian and spherical curvatures per node, stored as excess over 1."""

    n: int
    x_rad: np.ndarray
    x_sph: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def kappa_rad(self):
        return 1.0 + self.x_rad

    @property
    def kappa_sph(self):
        return 1.0 + self.x_sph

    def excess_multiset(self) -> np.ndarray:
        m = self.n - 1
        return np.column_stack([self.x_rad] + [self.x_sph] * (m - 1))

    def multiset(self) -> np.ndarray:
        return 1.0 + self.excess_multiset()

    def sigma_table(self) -> np.ndarray:
        """sigma_0 .. sigma_{n-1} per node, shape (n, N+1), float64."""
        if "sigma" not in self._cache:
            self._cache["sigma"] = sigma_table(self.multiset(), self.n - 1).astype(float)
        return self._cache["sigma"]

    def sigma(self, k: int) -> np.ndarray:
        if k == -1:
            return np.zeros_like(self.x_rad)
        if not 0 <= k <= self.n - 1:
            raise DomainError(f"k={k} outside [0, {self.n - 1}]")
        return self.sigma_table()[k]

    def l2(self) -> np.ndarray:
        if "l2" not in self._cache:
            self._cache["l2"] = shifted_combination(l2_coefficients(self.n), self.excess_multiset())
        return self._cache["l2"]

    def margin(self) -> np.ndarray:
        return np.minimum(self.x_rad, self.x_sph)

    def deficit(self) -> float:
        return float(max(np.max(np.abs(self.x_rad)), np.max(np.abs(self.x_sph))))


def l2_coefficients(n: int) -> dict:
    """Gauss-Bonnet integrand as a combination of sigma_0, sigma_2, sigma_4."""
    return {
        4: 1,
        2: -Fraction((n - 3) * (n - 4), 6),
        0: Fraction((n - 1) * (n - 2) * (n - 3) * (n - 4), 24),
    }


def gauss_bonnet_constant(n: int) -> float:
    return (n - 1) * (n - 2) * (n - 3) * (n - 4) / 24


def curvature(S: AxisymmetricHypersurface, fields: SupportFields | None = None) -> CurvatureField:
    """Principal curvatures of the graph with respect to the outward normal.

    Meridian: ``(lambda' - phi_tt / v^2) / (v lambda)``; spherical, with
    multiplicity n - 2: ``(lambda' - cot(theta) phi_t) / (v lambda)``.  The
    excess over 1 is formed with ``lambda' - v lambda = e^-r - (v - 1) lambda``
    so no large terms cancel.
    """
    f = fields or support_fields(S)
    base = np.exp(-S.r) - f.phi_t**2 / (1.0 + f.v) * f.lam
    denom = f.v * f.lam
    x_rad = (base - f.phi_tt / f.v**2) / denom
    x_sph = (base - f.cot_phi_t) / denom
    for arr in (x_rad, x_sph):
        bad = ~np.isfinite(arr)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise CurvatureError("non-finite curvature", i, S.theta[i])
    return CurvatureField(S.n, x_rad, x_sph)


# -- integrals --------------------------------------------------------------

class Geometry:
    """Fields, curvature and area density of one surface, computed once."""

    def __init__(self, S: AxisymmetricHypersurface):
        self.S = S
        self.fields = support_fields(S)
        self.curv = curvature(S, self.fields)
        self.density = self.fields.lam ** (S.n - 1) * self.fields.v

    def integrate(self, f) -> float:
        return grid.integrate_sphere(np.asarray(f) * self.density, self.S.theta, self.S.n - 1)

    def area(self) -> float:
        return self.integrate(np.ones_like(self.S.r))

    def int_sigma(self, k: int) -> float:
        return self.integrate(self.curv.sigma(k))

    def int_l2(self) -> float:
        return self.integrate(self.curv.l2())

    def Q(self) -> float:
        return q_value(self.S.n, self.area(), self.int_l2())


def q_value(n: int, area: float, int_l2: float) -> float:
    if area <= 0:
        raise DomainError("area must be positive")
    return area ** (-(n - 5) / (n - 1)) * int_l2


def area(S) -> float:
    return Geometry(S).area()


def integrate_sigma(k: int, S) -> float:
    return Geometry(S).int_sigma(k)


def integrate_l2(S) -> float:
    return Geometry(S).int_l2()


def functional_Q(S) -> float:
    return Geometry(S).Q()


def horoconvexity_margin(S) -> float:
    return float(np.min(curvature(S).margin()))


def umbilicity_deficit(S) -> float:
    return curvature(S).deficit()


def q_lower_bound(n: int) -> float:
    return gauss_bonnet_constant(n) * grid.sphere_area(n - 1) ** (4 / (n - 1))


# -- inequality reports -------------------------------------------------------

EQUALITY_RTOL = 1e-8


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    gap: float
    equality: bool
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, name, lhs, rhs, rtol=EQUALITY_RTOL, **extra):
        lhs, rhs = float(lhs), float(rhs)
        gap = lhs - rhs
        return cls(name, lhs, rhs, gap, abs(gap) <= rtol * max(abs(lhs), abs(rhs)), extra=extra)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "equality": self.equality,
            "notes": list(self.notes),
            **self.extra,
        }


def af4_rhs(n: int, area: float) -> float:
    om = grid.sphere_area(n - 1)
    ratio = area / om
    return math.comb(n - 1, 4) * om * (ratio**0.5 + ratio ** (0.5 * (n - 5) / (n - 1))) ** 2


def af2_rhs(n: int, area: float) -> float:
    om = grid.sphere_area(n - 1)
    return (n - 1) * (n - 2) / 2 * (area + om ** (2 / (n - 1)) * area ** ((n - 3) / (n - 1)))


def minkowski_bhw_rhs(n: int, area: float) -> float:
    om = grid.sphere_area(n - 1)
    return (n - 1) * om ** (1 / (n - 1)) * area ** ((n - 2) / (n - 1))


def minkowski_dlg_rhs(n: int, area: float) -> float:
    om = grid.sphere_area(n - 1)
    ratio = area / om
    return (n - 1) * om * (ratio ** ((n - 2) / (n - 1)) + ratio ** (n / (n - 1)))


def gallego_solanes_rhs(n: int, k: int, area: float) -> float:
    c = 1.0 if k > 1 else (n - 2) / (n - 1)
    return c * math.comb(n - 1, k) * area


def _margin_note(report, margin, what="horoconvex"):
    report.extra["horoconvexity_margin"] = float(margin)
    if margin < 0:
        msg = f"surface is not {what} (margin {margin:.3e}); inequality is unprotected"
        report.notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return report


def check_af4(S, geo: Geometry | None = None) -> InequalityReport:
    geo = geo or Geometry(S)
    rep = InequalityReport.build("af4", geo.int_sigma(4), af4_rhs(S.n, geo.area()))
    return _margin_note(rep, float(np.min(geo.curv.margin())))


def check_af2_sigma2(S, geo: Geometry | None = None) -> InequalityReport:
    geo = geo or Geometry(S)
    rep = InequalityReport.build("af2_sigma2", geo.int_sigma(2), af2_rhs(S.n, geo.area()))
    s1, s2 = geo.curv.sigma(1), geo.curv.sigma(2)
    rep.extra["min_sigma1"] = float(s1.min())
    rep.extra["min_sigma2"] = float(s2.min())
    rep.extra["two_convex"] = bool(s1.min() >= 0 and s2.min() >= 0)
    if not rep.extra["two_convex"]:
        rep.notes.append("surface is not two-convex; inequality is unprotected")
    return rep


def check_weighted_minkowski(S, geo: Geometry | None = None):
    """Weighted Minkowski inequalities with weight cosh r.

    Uses the graph identities ``<grad cosh r, nu> = sinh r <d_r, nu>`` and
    ``<d_r, nu> = 1/v``.
    """
    geo = geo or Geometry(S)
    f = geo.fields
    H = geo.curv.sigma(1)
    A = geo.area()
    weighted_H = geo.integrate(f.dlam * H)
    bhw = InequalityReport.build(
        "minkowski_bhw", geo.integrate(f.dlam * H - (S.n - 1) * f.lam / f.v), minkowski_bhw_rhs(S.n, A)
    )
    dlg = InequalityReport.build("minkowski_dlg", weighted_H, minkowski_dlg_rhs(S.n, A))
    for rep in (bhw, dlg):
        rep.extra["min_H"] = float(H.min())
    return bhw, dlg


def check_gallego_solanes(S, k: int, geo: Geometry | None = None) -> InequalityReport:
    if not 1 <= k <= S.n - 1:
        raise DomainError(f"k={k} outside [1, {S.n - 1}]")
    geo = geo or Geometry(S)
    rep = InequalityReport.build(f"gallego_solanes_k{k}", geo.int_sigma(k), gallego_solanes_rhs(S.n, k, geo.area()))
    rep.extra["ratio"] = rep.lhs / rep.rhs
    return _margin_note(rep, float(np.min(geo.curv.margin())), "convex")


def all_reports(S) -> list:
    """Every inequality audit for one surface, sharing one Geometry."""
    geo = Geometry(S)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        reps = [check_gallego_solanes(S, k, geo) for k in range(1, 5)]
        reps += list(check_weighted_minkowski(S, geo))
        reps.append(check_af2_sigma2(S, geo))
        reps.append(check_af4(S, geo))
    return reps


# -- closed forms for geodesic spheres -------------------------------------------

@dataclass
class SphereRecord:
    n: int
    radius: float
    kappa: float
    area: float
    int_sigma: list
    int_l2: float
    Q: float
    reports: list

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "radius": self.radius,
            "kappa": self.kappa,
            "area": self.area,
            "int_sigma": list(self.int_sigma),
            "int_l2": self.int_l2,
            "Q": self.Q,
            "Q_bound": q_lower_bound(self.n),
            "inequalities": [r.to_dict() for r in self.reports],
        }


def geodesic_sphere(n: int, radius: float) -> SphereRecord:
    """Exact curvature integrals and inequality sides for a geodesic sphere."""
    if n < 5:
        raise DomainError(f"ambient dimension must be >= 5, got {n}")
    if not radius > 0:
        raise DomainError("radius must be positive")
    m = n - 1
    om = grid.sphere_area(m)
    s, c = math.sinh(radius), math.cosh(radius)
    k = c / s
    A = om * s**m
    int_sigma = [math.comb(m, j) * k**j * A for j in range(m + 1)]
    # l2 = K (coth^2 - 1)^2 = K / sinh^4
    int_l2 = gauss_bonnet_constant(n) * om * s ** (m - 4)
    reps = [InequalityReport.build(f"gallego_solanes_k{j}", int_sigma[j], gallego_solanes_rhs(n, j, A))
            for j in range(1, 5)]
    reps.append(InequalityReport.build("minkowski_bhw", m * om * s ** (m - 1), minkowski_bhw_rhs(n, A)))
    reps.append(InequalityReport.build("minkowski_dlg", m * om * c * c * s ** (m - 1), minkowski_dlg_rhs(n, A)))
    reps.append(InequalityReport.build("af2_sigma2", int_sigma[2], af2_rhs(n, A), rtol=1e-12))
    reps.append(InequalityReport.build("af4", int_sigma[4], af4_rhs(n, A), rtol=1e-12))
    return SphereRecord(n, float(radius), k, A, int_sigma, int_l2, q_value(n, A, int_l2), reps)
