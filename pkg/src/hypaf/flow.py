"""Inverse curvature flow of axisymmetric graphs with normal speed
``F = ((n-4)/4) sigma_3 / sigma_4``.

For a graph ``r(theta)`` the normal velocity ``F nu`` pulls back to
``dr/dt = F v``.  Geodesic spheres obey ``dr/dt = tanh r``, i.e.
``sinh r(t) = e^t sinh r(0)``.

Time stepping is classical RK4.  The step is chosen from a parabolic CFL
heuristic and clipped so that monitor rows land exactly on a uniform time
grid, which keeps the finite-difference time derivatives of the monitored
integrals high order.
"""

from __future__ import annotations

import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import grid
from ._io import atomic_write_text, dumps, fmt
from .hypersurface import (
    AxisymmetricHypersurface,
    Geometry,
    InequalityReport,
    gauss_bonnet_constant,
    q_lower_bound,
    read_surface,
)
from .symfunc import DomainError, PreconditionError

log = logging.getLogger(__name__)

CSV_HEADER = (
    "t,area,int_sigma2,int_sigma4,int_l2,Q,horo_margin,umbilic_deficit,dt,resid_var_k2,resid_l2"
)
R_GUARD = 40.0


class FlowBreakdown(ArithmeticError):
    """The discrete flow left its domain; carries the last good state."""

    def __init__(self, message, t, node=None, theta=None, last_state=None):
        where = f" at t={t:.6g}"
        if node is not None:
            where += f", node {node} (theta={theta:.6g})"
        super().__init__(message + where)
        self.t = t
        self.node = node
        self.theta = theta
        self.last_state = last_state


@dataclass
class FlowConfig:
    """Run parameters.  Every field is echoed into the JSON sidecar."""

    n: int = 6
    N: int = 400
    r0: float = 2.0
    eps: float = 0.1
    mode: int = 2
    surface_file: str | None = None
    t_max: float = 8.0
    dt_safety: float = 0.2
    dt_max: float = 0.01
    dt_fixed: float | None = None
    monitor_dt: float = 0.05
    equality_tol: float = 1e-8
    abort_margin: float = 1e-10
    r_guard: float = R_GUARD
    keep_radii: bool = True

    def __post_init__(self):
        if not self.t_max > 0:
            raise DomainError("t_max must be positive")
        if not 0 < self.dt_safety <= 1:
            raise DomainError("dt_safety must lie in (0, 1]")
        if not self.monitor_dt > 0:
            raise DomainError("monitor_dt must be positive")
        if self.dt_fixed is not None and not self.dt_fixed > 0:
            raise DomainError("dt_fixed must be positive")
        if self.n < 5:
            raise DomainError(f"ambient dimension must be >= 5, got {self.n}")

    @classmethod
    def from_dict(cls, data: dict) -> "FlowConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["quadrature"] = grid.QUADRATURE
        d["stencil"] = grid.STENCIL
        d["integrator"] = "rk4"
        return d

    def initial_surface(self) -> AxisymmetricHypersurface:
        if self.surface_file:
            S = read_surface(self.surface_file)
            if S.n != self.n:
                raise DomainError(f"surface file has n={S.n}, config says n={self.n}")
            return S
        return AxisymmetricHypersurface.perturbed(self.n, self.r0, self.eps, self.mode, self.N)


class FlowState:
    """Flow time plus the surface, with derived fields cached on creation."""

    def __init__(self, t: float, S: AxisymmetricHypersurface):
        self.t = float(t)
        self.S = S
        self.geo = Geometry(S)

    @property
    def fields(self):
        return self.geo.fields

    @property
    def curv(self):
        return self.geo.curv


def normal_speed(state: FlowState) -> np.ndarray:
    n = state.S.n
    s3 = state.curv.sigma(3)
    s4 = state.curv.sigma(4)
    bad = ~(s4 > 0)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise FlowBreakdown("sigma_4 <= 0", state.t, i, state.S.theta[i], state)
    return (n - 4) / 4 * s3 / s4


def _radial_velocity(state: FlowState) -> np.ndarray:
    return normal_speed(state) * state.fields.v


def _stage(S, t, r, last):
    if not np.all(np.isfinite(r)):
        i = int(np.flatnonzero(~np.isfinite(r))[0])
        raise FlowBreakdown("non-finite radius in RK stage", t, i, S.theta[i], last)
    try:
        st = FlowState(t, S.with_radius(r))
    except (DomainError, ArithmeticError) as exc:
        if isinstance(exc, FlowBreakdown):
            raise
        raise FlowBreakdown(f"invalid stage surface: {exc}", t, last_state=last) from exc
    return _radial_velocity(st)


def step(state: FlowState, dt: float) -> FlowState:
    """One classical RK4 step of ``dr/dt = F v``."""
    if dt < 0:
        raise DomainError("dt must be non-negative")
    if dt == 0:
        return state
    S, t, r = state.S, state.t, state.S.r
    k1 = _radial_velocity(state)
    k2 = _stage(S, t + dt / 2, r + dt / 2 * k1, state)
    k3 = _stage(S, t + dt / 2, r + dt / 2 * k2, state)
    k4 = _stage(S, t + dt, r + dt * k3, state)
    r_new = r + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(r_new)):
        raise FlowBreakdown("non-finite radius after step", t + dt, last_state=state)
    try:
        return FlowState(t + dt, S.with_radius(r_new))
    except DomainError as exc:
        raise FlowBreakdown(f"invalid surface after step: {exc}", t + dt, last_state=state) from exc


def cfl_dt(state: FlowState, safety: float) -> float:
    """Parabolic step bound ``safety (h min lambda)^2 / max(F / kappa_rad)``.

    ``F`` is homogeneous of degree -1 in the curvatures, so ``F/kappa`` is the
    natural size of dF/dkappa; curvature depends on r_thetatheta through
    ``1/lambda``.
    """
    F = normal_speed(state)
    scale = np.max(F / state.curv.kappa_rad)
    return safety * (state.S.h * np.min(state.fields.lam)) ** 2 / scale


# -- trace ------------------------------------------------------------------

@dataclass
class FlowTrace:
    n: int
    config: dict
    t: list = field(default_factory=list)
    area: list = field(default_factory=list)
    int_sigma: list = field(default_factory=list)  # rows of sigma_0..sigma_{n-1}
    int_F_sigma: list = field(default_factory=list)  # rows of F sigma_0..F sigma_{n-1}
    int_l2: list = field(default_factory=list)
    Q: list = field(default_factory=list)
    horo_margin: list = field(default_factory=list)
    umbilic_deficit: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    lemma_rhs: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    theta: np.ndarray | None = None
    steps: int = 0
    status: str = "running"

    def __len__(self):
        return len(self.t)

    def record(self, state: FlowState, dt_used: float, keep_radius: bool = True) -> None:
        if self.t and not state.t > self.t[-1]:
            raise ValueError("trace times must increase strictly")
        geo = state.geo
        n = state.S.n
        F = normal_speed(state)
        sig = geo.curv.sigma_table()
        A = geo.area()
        l2 = geo.int_l2()
        self.t.append(state.t)
        self.area.append(A)
        self.int_sigma.append([geo.integrate(s) for s in sig])
        self.int_F_sigma.append([geo.integrate(F * s) for s in sig])
        self.int_l2.append(l2)
        self.Q.append(A ** (-(n - 5) / (n - 1)) * l2)
        self.horo_margin.append(float(np.min(geo.curv.margin())))
        self.umbilic_deficit.append(geo.curv.deficit())
        self.dt.append(float(dt_used))
        self.lemma_rhs.append(lemma_rhs(geo, sig))
        if keep_radius:
            self.radii.append(state.S.r.copy())
        if self.theta is None:
            self.theta = state.S.theta.copy()

    def array(self, name) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def area_growth_gap(self) -> np.ndarray:
        """Instantaneous ``d|Sigma|/dt - (n-1)|Sigma| = int F sigma_1 - (n-1)|Sigma|``."""
        IF = self.array("int_F_sigma")
        return IF[:, 1] - (self.n - 1) * self.array("area")

    def state_at(self, index: int) -> FlowState:
        S = AxisymmetricHypersurface(self.n, self.theta, self.radii[index])
        return FlowState(self.t[index], S)

    def to_csv(self) -> str:
        resid_k2 = variational_residual(self, 2) if len(self) >= 5 else np.full(len(self), np.nan)
        resid_l2 = lemma_residual(self) if len(self) >= 5 else np.full(len(self), np.nan)
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for i in range(len(self)):
            vals = (
                self.t[i], self.area[i], self.int_sigma[i][2], self.int_sigma[i][4], self.int_l2[i],
                self.Q[i], self.horo_margin[i], self.umbilic_deficit[i], self.dt[i],
                resid_k2[i], resid_l2[i],
            )
            buf.write(",".join(fmt(v) for v in vals) + "\n")
        return buf.getvalue()

    def write(self, csv_path, sidecar_path=None) -> None:
        atomic_write_text(csv_path, self.to_csv())
        if sidecar_path is not None:
            meta = {"config": self.config, "status": self.status, "steps": self.steps, "rows": len(self)}
            atomic_write_text(sidecar_path, dumps(meta))


def lemma_rhs(geo: Geometry, sig=None) -> float:
    """Right side of the l2 evolution law, in the grouped three-term form."""
    n = geo.S.n
    sig = geo.curv.sigma_table() if sig is None else sig
    s1, s2, s3, s4 = sig[1], sig[2], sig[3], sig[4]
    s5 = sig[5] if n - 1 >= 5 else np.zeros_like(s1)
    c = (n - 4) / 4
    first = 5 * s5 * s3 / s4 - 4 * (n - 5) / (n - 4) * s4
    second = (n - 4) * (n - 5) / 6 * (4 * (n - 3) / (n - 4) * s2 - 3 * s3**2 / s4)
    third = (n - 2) * (n - 3) * (n - 4) * (n - 5) / 24 * (s1 * s3 / s4 - 4 * (n - 1) / (n - 4))
    return (n - 5) * geo.int_l2() + c * geo.integrate(first + second + third)


def time_derivative(t, y) -> np.ndarray:
    """d/dt by the 5-point interpolating polynomial centred at each row.

    The first two and last two rows are NaN.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(y.shape, np.nan)
    for i in range(2, len(t) - 2):
        ts = t[i - 2:i + 3] - t[i]
        out[i] = _fornberg_d1(ts) @ y[i - 2:i + 3]
    return out


def _fornberg_d1(x) -> np.ndarray:
    # weights of the first derivative at 0 from the Vandermonde system
    k = len(x)
    V = np.vander(x, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


def variational_residual(trace: FlowTrace, k: int) -> np.ndarray:
    """``d/dt int sigma_k - [(k+1) int F sigma_{k+1} + (n-k) int F sigma_{k-1}]`` per row."""
    n = trace.n
    if len(trace) < 5:
        raise ValueError("variational residual needs at least 5 trace rows")
    if not 0 <= k <= n - 2:
        raise DomainError(f"k={k} outside [0, {n - 2}]")
    IS = trace.array("int_sigma")
    IF = trace.array("int_F_sigma")
    lower = IF[:, k - 1] if k >= 1 else 0.0
    rhs = (k + 1) * IF[:, k + 1] + (n - k) * lower
    return time_derivative(trace.t, IS[:, k]) - rhs


def lemma_residual(trace: FlowTrace) -> np.ndarray:
    if len(trace) < 5:
        raise ValueError("lemma residual needs at least 5 trace rows")
    return time_derivative(trace.t, trace.int_l2) - trace.array("lemma_rhs")


def area_derivative_gap(trace: FlowTrace) -> np.ndarray:
    """``d|Sigma|/dt - (n-1)|Sigma|`` with the time derivative taken from the trace."""
    return time_derivative(trace.t, trace.area) - (trace.n - 1) * trace.array("area")


# -- run ----------------------------------------------------------------------

def _check_state(state: FlowState, cfg: FlowConfig, last: FlowState | None):
    margin = state.curv.margin()
    i = int(np.argmin(margin))
    if margin[i] < -cfg.abort_margin:
        raise FlowBreakdown(
            f"horoconvexity lost (margin {margin[i]:.3e})", state.t, i, state.S.theta[i], last or state
        )
    if np.max(state.S.r) > cfg.r_guard:
        j = int(np.argmax(state.S.r))
        raise FlowBreakdown("radius exceeded guard", state.t, j, state.S.theta[j], last or state)


def run(config: FlowConfig, initial: AxisymmetricHypersurface | None = None,
        trace: FlowTrace | None = None) -> FlowTrace:
    """Integrate to ``t_max``, emitting a trace row every ``monitor_dt``.

    Raises PreconditionError if the initial surface is not strictly
    horoconvex and FlowBreakdown on any failure afterwards; in the latter case
    the partially filled trace is attached as ``exc.trace``.
    """
    S = initial if initial is not None else config.initial_surface()
    state = FlowState(0.0, S)
    margin0 = float(np.min(state.curv.margin()))
    if not margin0 > 0:
        raise PreconditionError(f"initial surface is not horoconvex (margin {margin0:.3e})")
    trace = trace if trace is not None else FlowTrace(S.n, config.to_dict())
    trace.record(state, 0.0, config.keep_radii)
    n_rows = int(round(config.t_max / config.monitor_dt))
    try:
        for row in range(1, n_rows + 1):
            t_next = min(row * config.monitor_dt, config.t_max)
            dt_last = 0.0
            while state.t < t_next * (1 - 1e-14):
                if config.dt_fixed is not None:
                    dt = config.dt_fixed
                else:
                    dt = min(cfl_dt(state, config.dt_safety), config.dt_max)
                remaining = t_next - state.t
                if dt >= remaining * (1 - 1e-9):
                    dt = remaining
                elif config.dt_fixed is None and dt > remaining / 2:
                    # split evenly rather than leave a sliver before the monitor time
                    dt = remaining / 2
                new = step(state, dt)
                _check_state(new, config, state)
                state = new
                dt_last = dt
                trace.steps += 1
            state.t = t_next
            trace.record(state, dt_last, config.keep_radii)
    except FlowBreakdown as exc:
        trace.status = "breakdown"
        exc.trace = trace
        raise
    trace.status = "complete"
    return trace


# -- verdicts -------------------------------------------------------------------

def limit_bound_check(trace: FlowTrace) -> InequalityReport:
    """Minimum of Q over the trace against the sphere value of Q."""
    if not len(trace):
        raise ValueError("empty trace")
    Q = trace.array("Q")
    bound = q_lower_bound(trace.n)
    rep = InequalityReport.build("q_limit_bound", float(Q.min()), bound, rtol=trace.config.get("equality_tol", 1e-8))
    rep.extra.update(
        Q_initial=float(Q[0]),
        Q_final=float(Q[-1]),
        final_excess=float(Q[-1] / bound - 1),
        argmin_t=float(trace.t[int(np.argmin(Q))]),
    )
    return rep


def q_monotonicity(trace: FlowTrace, slack: float = 1e-6) -> dict:
    Q = trace.array("Q")
    inc = (Q[1:] - Q[:-1]) / np.abs(Q[:-1])
    worst = float(inc.max()) if inc.size else 0.0
    return {"max_relative_increase": worst, "slack": slack, "pass": bool(worst <= slack)}


def decay_fit(trace: FlowTrace, t_lo: float = 3.0, t_hi: float = 8.0) -> dict:
    """Least-squares slope of log(umbilicity deficit) over [t_lo, t_hi]."""
    t = trace.array("t")
    d = trace.array("umbilic_deficit")
    sel = (t >= t_lo - 1e-12) & (t <= t_hi + 1e-12) & (d > 0)
    if sel.sum() < 2:
        return {"exponent": math.nan, "points": int(sel.sum()), "window": [t_lo, t_hi]}
    slope, icpt = np.polyfit(t[sel], np.log(d[sel]), 1)
    return {"exponent": float(slope), "log_C": float(icpt), "points": int(sel.sum()), "window": [t_lo, t_hi],
            "bound_rate": -1.0 / (trace.n - 1)}


def gauss_bonnet_drift(trace: FlowTrace) -> dict:
    l2 = trace.array("int_l2")
    ref = gauss_bonnet_constant(trace.n) * grid.sphere_area(trace.n - 1)
    return {
        "relative_spread": float(np.ptp(l2) / abs(l2[0])),
        "sphere_value": ref if trace.n == 5 else None,
        "max_relative_offset": float(np.max(np.abs(l2 / ref - 1))),
    }


def config_from_json(text: str) -> FlowConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DomainError("config must be a JSON object")
    return FlowConfig.from_dict(data)
