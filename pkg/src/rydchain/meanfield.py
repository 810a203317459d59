"""Mean-field dynamics of the driven chain.

Implements the factorized equations of motion for the full lattice, their
uniform and two-sublattice (A/B) reductions, fixed-point solvers for both,
the closed-form uniform solution available when v1 = -v2, adaptive time
integration, and the critical drive strength where the multi-root window of
the uniform steady-state equation closes.

Spin components are expectation values S = <sigma>/2, so the fully
de-excited chain sits at Sz = -1/2 and saturation approaches Sz = 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from . import _kernels
from .errors import ConfigError, CriticalPointNotFound, IntegrationError, NumericalFailure
from .model import DecayMatrix, InteractionMatrices, ModelParams, build_interaction_matrices

BLOCH_EPS = 1e-6
RESIDUAL_TOL = 1e-10
ROOT_SCAN_POINTS = 2000
DEDUPE_TOL = 1e-6


# ---------------------------------------------------------------------------
# state containers


@dataclass(frozen=True)
class SpinLattice:
    """Per-site Bloch vectors of an N-site chain."""

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    def __post_init__(self):
        if not (len(self.sx) == len(self.sy) == len(self.sz)):
            raise ValueError("sx, sy, sz must have equal length")

    @property
    def n_sites(self) -> int:
        return len(self.sx)

    @classmethod
    def uniform(cls, s, n_sites: int) -> "SpinLattice":
        s = np.asarray(s, dtype=float)
        return cls(*(np.full(n_sites, s[i]) for i in range(3)))

    @classmethod
    def from_vector(cls, y: np.ndarray) -> "SpinLattice":
        n = y.size // 3
        return cls(y[:n].copy(), y[n : 2 * n].copy(), y[2 * n :].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.sx, self.sy, self.sz])

    def bloch_norms(self) -> np.ndarray:
        return np.sqrt(self.sx**2 + self.sy**2 + self.sz**2)


@dataclass(frozen=True)
class BipartiteState:
    """Bloch vectors (sx, sy, sz) of the A and B sublattices."""

    a: np.ndarray
    b: np.ndarray

    @classmethod
    def from_vector(cls, y: np.ndarray) -> "BipartiteState":
        y = np.asarray(y, dtype=float)
        return cls(y[:3].copy(), y[3:6].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    def swapped(self) -> "BipartiteState":
        return BipartiteState(self.b.copy(), self.a.copy())

    def bloch_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(self.a), np.linalg.norm(self.b)])


@dataclass(frozen=True)
class FixedPoint:
    """A root of the uniform or bipartite equations of motion.

    ``vec`` is (sx, sy, sz) for uniform roots and the 6-component
    (A then B) vector for bipartite ones.  ``band`` labels uniform roots as
    low excitation ("ULE", Sz < -1/4) or high excitation ("UHE").
    """

    kind: str  # "uniform" | "bipartite"
    vec: np.ndarray
    residual: float
    stability: str = "unknown"  # stable | unstable | marginal | unknown
    band: str | None = None

    @property
    def sz(self) -> float:
        return float(self.vec[2])

    @property
    def sz_gap(self) -> float:
        """|Sz^A - Sz^B| for bipartite roots, 0 for uniform ones."""
        if self.kind == "bipartite":
            return abs(float(self.vec[2] - self.vec[5]))
        return 0.0

    def with_stability(self, verdict: str) -> "FixedPoint":
        return FixedPoint(self.kind, self.vec, self.residual, verdict, self.band)


class RootList(list):
    """List of FixedPoint with solver diagnostics attached."""

    def __init__(self, items=(), diagnostics=None):
        super().__init__(items)
        self.diagnostics = diagnostics or {}


@dataclass
class Trajectory:
    """Sampled solution of a mean-field integration."""

    times: np.ndarray
    ys: np.ndarray  # (n_samples, dim)
    kind: str  # "bipartite" | "lattice"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def state(self, i: int):
        if self.kind == "bipartite":
            return BipartiteState.from_vector(self.ys[i])
        return SpinLattice.from_vector(self.ys[i])

    @property
    def final_state(self):
        return self.state(len(self.times) - 1)

    def sz_block(self) -> np.ndarray:
        """Sz samples, shape (n_samples, n_sites) (bipartite: sites A, B)."""
        if self.kind == "bipartite":
            return self.ys[:, [2, 5]]
        n = self.ys.shape[1] // 3
        return self.ys[:, 2 * n :]


# ---------------------------------------------------------------------------
# equations of motion


def mf_rhs(state: SpinLattice, im: InteractionMatrices, dm: DecayMatrix, params: ModelParams) -> SpinLattice:
    """Full-lattice equations of motion.

    The interaction enters through s_v^{jk} built from the pairwise matrices;
    the decay matrix contributes the linear single-body damping (diagonal)
    and the nonlinear collective terms (off-diagonal).
    """
    n = state.n_sites
    if im.v1_jk.shape != (n, n) or dm.gamma_jk.shape != (n, n):
        raise ValueError("interaction/decay matrices do not match the lattice size")
    sx, sy, sz = state.sx, state.sy, state.sz
    gs = np.diag(dm.gamma_jk)
    goff = dm.gamma_jk - np.diag(gs)
    u = (im.v1_jk @ (1.0 - 2.0 * sz) - im.v2_jk @ (1.0 + 2.0 * sz)) / 4.0
    gx = goff @ sx
    gy = goff @ sy
    fx = -0.5 * gs * sx + params.delta * sy + sy * u + sz * gx
    fy = -0.5 * gs * sy - params.delta * sx - params.omega * sz - sx * u + sz * gy
    fz = -0.5 * gs * (1.0 + 2.0 * sz) + params.omega * sy - (sx * gx + sy * gy)
    return SpinLattice(fx, fy, fz)


def uniform_rhs(s, params: ModelParams) -> np.ndarray:
    """Single-spin reduction: all sites share one Bloch vector.

    The collective decay appears as kappa = (N-1)*gamma_m and the interaction
    as the Sz-dependent detuning shift.
    """
    sx, sy, sz = np.asarray(s, dtype=float)
    dt = params.delta_eff(sz)
    kap = params.kappa
    gs = params.gamma_s
    return np.array(
        [
            -0.5 * gs * sx + dt * sy + kap * sz * sx,
            -0.5 * gs * sy - dt * sx - params.omega * sz + kap * sz * sy,
            -0.5 * gs * (1.0 + 2.0 * sz) + params.omega * sy - kap * (sx * sx + sy * sy),
        ]
    )


def bipartite_rhs(st: BipartiteState, params: ModelParams) -> BipartiteState:
    """Two-sublattice reduction: neighbouring sites alternate between A and B."""
    if params.n_sites % 2:
        warnings.warn(
            "bipartite reduction assumes an even number of sites", stacklevel=2
        )
    f = _bipartite_rhs_vec(st.as_vector(), params)
    return BipartiteState(f[:3], f[3:])


def _bipartite_rhs_vec(y: np.ndarray, params: ModelParams) -> np.ndarray:
    out = np.empty(6)
    _kernels.mf_rhs_kernel(
        _kernels.KIND_BIPARTITE, np.asarray(y, dtype=float), _bipartite_p(params), _DUMMY, _DUMMY, out
    )
    return out


_DUMMY = np.zeros((1, 1))


def _bipartite_p(params: ModelParams) -> np.ndarray:
    return np.array(
        [
            params.omega,
            params.delta,
            params.gamma_s,
            params.gamma_m,
            float(params.n_sites),
            params.v1,
            params.v2,
            params.coordination,
        ]
    )


def uniform_jacobian_matrix(s, params: ModelParams) -> np.ndarray:
    """Analytic Jacobian of uniform_rhs (the interaction shift is Sz-dependent)."""
    sx, sy, sz = np.asarray(s, dtype=float)
    dt = params.delta_eff(sz)
    kap = params.kappa
    gs = params.gamma_s
    w = params.s_v_slope
    return np.array(
        [
            [-0.5 * gs + kap * sz, dt, w * sy + kap * sx],
            [-dt, -0.5 * gs + kap * sz, -w * sx - params.omega + kap * sy],
            [-2.0 * kap * sx, params.omega - 2.0 * kap * sy, -gs],
        ]
    )


def bipartite_jacobian_matrix(y, params: ModelParams) -> np.ndarray:
    """Analytic 6x6 Jacobian of the two-sublattice equations."""
    xa, ya, za, xb, yb, zb = np.asarray(y, dtype=float)
    gs = params.gamma_s
    gm = params.gamma_m
    n = float(params.n_sites)
    om = params.omega
    w = params.s_v_slope
    sva = params.s_v(za)
    svb = params.s_v(zb)
    half_n_gm = 0.5 * n * gm
    m_gm = (n - 2.0) * gm

    cxa = (n - 2.0) * xa / n + xb
    cya = (n - 2.0) * ya / n + yb
    cxb = (n - 2.0) * xb / n + xa
    cyb = (n - 2.0) * yb / n + ya

    jac = np.zeros((6, 6))
    # d f^A / d (A, B)
    jac[0] = [-0.5 * gs + 0.5 * m_gm * za, params.delta + svb, half_n_gm * cxa,
              half_n_gm * za, 0.0, w * ya]
    jac[1] = [-(params.delta + svb), -0.5 * gs + 0.5 * m_gm * za, half_n_gm * cya - om,
              0.0, half_n_gm * za, -w * xa]
    jac[2] = [-m_gm * xa - half_n_gm * xb, om - m_gm * ya - half_n_gm * yb, -gs,
              -half_n_gm * xa, -half_n_gm * ya, 0.0]
    # d f^B / d (A, B): mirror of the above
    jac[3] = [half_n_gm * zb, 0.0, w * yb,
              -0.5 * gs + 0.5 * m_gm * zb, params.delta + sva, half_n_gm * cxb]
    jac[4] = [0.0, half_n_gm * zb, -w * xb,
              -(params.delta + sva), -0.5 * gs + 0.5 * m_gm * zb, half_n_gm * cyb - om]
    jac[5] = [-half_n_gm * xb, -half_n_gm * yb, 0.0,
              -m_gm * xb - half_n_gm * xa, om - m_gm * yb - half_n_gm * ya, -gs]
    return jac


# ---------------------------------------------------------------------------
# uniform steady states


def uniform_root_equation(sz, params: ModelParams):
    """Steady-state condition for the uniform Sz:
    delta_eff^2 + (gamma_s/2 - kappa Sz)^2 + omega^2 Sz/(2 Sz + 1) = 0."""
    dt = params.delta_eff(sz)
    g = 0.5 * params.gamma_s - params.kappa * sz
    return dt * dt + g * g + params.omega**2 * sz / (2.0 * sz + 1.0)


def uniform_cubic_coeffs(params: ModelParams) -> np.ndarray:
    """Coefficients (c0..c3) of A(Sz) = (2Sz+1)*(delta_eff^2 + G^2).

    The steady-state condition multiplied by (2Sz+1) is A(Sz) + omega^2 Sz,
    a cubic in Sz because the interaction shift is linear in Sz.
    """
    d0 = params.delta + params.coordination * (params.v1 - params.v2) / 4.0
    d1 = params.s_v_slope
    g0 = 0.5 * params.gamma_s
    g1 = -params.kappa
    q0 = d0 * d0 + g0 * g0
    q1 = 2.0 * (d0 * d1 + g0 * g1)
    q2 = d1 * d1 + g1 * g1
    return np.array([q0, q1 + 2.0 * q0, q2 + 2.0 * q1, 2.0 * q2])


def uniform_transverse(params: ModelParams, sz: float) -> tuple[float, float]:
    """Back-solve (Sx, Sy) from the transverse steady-state equations at given Sz."""
    dt = params.delta_eff(sz)
    g = 0.5 * params.gamma_s - params.kappa * sz
    r = dt * dt + g * g
    if r == 0.0:
        return 0.0, 0.0
    return -params.omega * sz * dt / r, -params.omega * sz * g / r


def _scan_uniform_roots(params: ModelParams, n_scan: int = ROOT_SCAN_POINTS) -> list[float]:
    """Dense scan with sign-change bracketing + bisection, avoiding the
    pole at Sz = -1/2."""
    grid = np.linspace(-0.5 + 1e-6, 0.5, n_scan)
    vals = uniform_root_equation(grid, params)
    roots = []
    for i in range(n_scan - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(grid[i])
        elif a * b < 0.0:
            roots.append(
                bisect(uniform_root_equation, grid[i], grid[i + 1], args=(params,), xtol=1e-15)
            )
    if vals[-1] == 0.0:
        roots.append(grid[-1])
    deduped: list[float] = []
    for r in roots:
        if not deduped or abs(r - deduped[-1]) > 1e-12:
            deduped.append(float(r))
    return deduped


def _band(sz: float) -> str:
    return "ULE" if sz < -0.25 else "UHE"


def uniform_fixed_points(params: ModelParams) -> RootList:
    """All uniform steady states, each verified against uniform_rhs.

    The undriven limit is handled exactly: at omega = 0 the only steady state
    is the fully de-excited spin.
    """
    if params.omega == 0.0:
        vec = np.array([0.0, 0.0, -0.5])
        res = float(np.max(np.abs(uniform_rhs(vec, params))))
        return RootList([FixedPoint("uniform", vec, res, band=_band(-0.5))])
    roots = _scan_uniform_roots(params)
    out = []
    for sz in roots:
        sx, sy = uniform_transverse(params, sz)
        vec = np.array([sx, sy, sz])
        res = float(np.max(np.abs(uniform_rhs(vec, params))))
        if res > RESIDUAL_TOL:
            raise NumericalFailure(
                f"uniform root at Sz={sz} failed verification (residual {res:.3e})"
            )
        out.append(FixedPoint("uniform", vec, res, band=_band(sz)))
    if not out:
        raise NumericalFailure(
            "uniform root scan found no steady state; at least one must exist"
        )
    return RootList(out)


def uniform_analytic(params: ModelParams) -> float:
    """Closed-form uniform Sz for the special case v1 = -v2.

    There the interaction shift is constant (delta_eff = delta + z*v1/2) and
    the steady-state cubic has fixed coefficients, so a cube-root expression
    applies.  The cube root is taken on the principal branch; if that branch
    carries a leftover imaginary part the other two branches are tried, and a
    result is accepted only when its imaginary residue is at most 1e-9.
    """
    scale = max(1.0, abs(params.v1), abs(params.v2))
    if abs(params.v1 + params.v2) > 1e-12 * scale:
        raise ConfigError("uniform_analytic requires v1 == -v2 exactly")
    v = params.v1
    dt = params.delta + params.coordination * v / 2.0
    gs = params.gamma_s
    kap = params.kappa
    om = params.omega

    if kap == 0.0:
        # the cubic degenerates to a linear equation
        return -(dt * dt + gs * gs / 4.0) / (2.0 * dt * dt + om * om + gs * gs / 2.0)

    big_g = kap + gs
    c1 = 2.0 * dt * dt + om * om
    c2 = (-(big_g**2) + 6.0 * c1) ** 3 + (
        big_g**3 + 36.0 * big_g * dt * dt - 9.0 * (kap - 2.0 * gs) * om * om
    ) ** 2
    c3 = (
        -(kap**3)
        - 3.0 * gs * kap**2
        - 3.0 * (gs * gs + 3.0 * (4.0 * dt * dt - om * om)) * kap
        - gs * (gs * gs + 18.0 * c1)
        + np.sqrt(complex(c2))
    )
    w = np.sqrt(3.0) * 1j - 1.0

    candidates = []
    if abs(c3) > 1e-300:
        croot = c3 ** (1.0 / 3.0)
        for k in range(3):
            cr = croot * np.exp(2j * np.pi * k / 3.0)
            szc = (
                -2.0 * kap
                + 4.0 * gs
                + 4.0 * (big_g**2 - 6.0 * c1) / (w * cr)
                + w * cr
            ) / (12.0 * kap)
            if abs(szc.imag) <= 1e-9 and -0.5 <= szc.real <= 0.5:
                candidates.append((k, float(szc.real)))
    if not candidates:
        # degenerate radicand; fall back to the cubic's real roots
        coeffs = uniform_cubic_coeffs(params)
        poly = np.array([coeffs[3], coeffs[2], coeffs[1] + om * om, coeffs[0]])
        for r in np.roots(poly):
            if abs(r.imag) <= 1e-9 and -0.5 <= r.real <= 0.5:
                candidates.append((9, float(r.real)))
    if not candidates:
        raise NumericalFailure("no real uniform solution found in the closed form")
    candidates.sort(key=lambda kr: (kr[0], kr[1]))
    return candidates[0][1]


# ---------------------------------------------------------------------------
# bipartite fixed points


def _transverse_linear_solve(params: ModelParams, sza: float, szb: float) -> np.ndarray:
    """Solve the transverse equations at frozen (Sz^A, Sz^B); they are linear
    in (Sx, Sy) of both sublattices.  Used to seed the Newton iteration."""
    gs = params.gamma_s
    gm = params.gamma_m
    n = float(params.n_sites)
    om = params.omega
    da = params.delta + params.s_v(szb)  # A feels the B shift
    db = params.delta + params.s_v(sza)
    ca = -0.5 * gs + 0.5 * (n - 2.0) * gm * sza
    cb = -0.5 * gs + 0.5 * (n - 2.0) * gm * szb
    ha = 0.5 * n * gm * sza
    hb = 0.5 * n * gm * szb
    mat = np.array(
        [
            [ca, da, ha, 0.0],
            [-da, ca, 0.0, ha],
            [hb, 0.0, cb, db],
            [0.0, hb, -db, cb],
        ]
    )
    rhs = np.array([0.0, om * sza, 0.0, om * szb])
    try:
        x = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError:
        x = np.zeros(4)
    return np.array([x[0], x[1], sza, x[2], x[3], szb])


def _newton_bipartite(y0: np.ndarray, params: ModelParams, tol: float = 1e-12, max_iter: int = 60):
    y = y0.copy()
    f = _bipartite_rhs_vec(y, params)
    fn = np.max(np.abs(f))
    for _ in range(max_iter):
        if fn <= tol:
            return y, fn
        jac = bipartite_jacobian_matrix(y, params)
        try:
            dy = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            dy = np.linalg.lstsq(jac, -f, rcond=None)[0]
        lam = 1.0
        while lam > 1e-4:
            y_try = y + lam * dy
            f_try = _bipartite_rhs_vec(y_try, params)
            fn_try = np.max(np.abs(f_try))
            if fn_try < fn * (1.0 - 0.25 * lam) or fn_try < tol:
                y, f, fn = y_try, f_try, fn_try
                break
            lam *= 0.5
        else:
            return None, fn
    if fn <= tol:
        return y, fn
    return None, fn


def bipartite_fixed_points(
    params: ModelParams,
    n_seeds: int = 21,
    dedupe_tol: float = DEDUPE_TOL,
    physical_only: bool = True,
) -> RootList:
    """Distinct roots of the two-sublattice equations by multi-start Newton.

    Seeds form a deterministic n_seeds x n_seeds grid in (Sz^A, Sz^B) with the
    transverse components initialised from the linear solve at frozen Sz.
    Both symmetric (A = B) and symmetry-broken roots are returned; A/B-swapped
    partners count as distinct roots.  Roots are deduplicated at max-norm
    distance ``dedupe_tol`` and, when ``physical_only``, restricted to the
    Bloch ball (length <= 1/2 + 1e-6 per sublattice).
    """
    grid = np.linspace(-0.5, 0.5, n_seeds + 2)[1:-1]
    roots: list[np.ndarray] = []
    failed = 0
    discarded = 0
    for sza in grid:
        for szb in grid:
            y0 = _transverse_linear_solve(params, float(sza), float(szb))
            y, fn = _newton_bipartite(y0, params)
            if y is None:
                failed += 1
                continue
            st = BipartiteState.from_vector(y)
            if physical_only and np.any(st.bloch_norms() > 0.5 + BLOCH_EPS):
                discarded += 1
                continue
            if any(np.max(np.abs(y - r)) < dedupe_tol for r in roots):
                continue
            roots.append(y)
    out = []
    for y in sorted(roots, key=lambda r: (round(r[2], 9), round(r[5], 9))):
        res = float(np.max(np.abs(_bipartite_rhs_vec(y, params))))
        out.append(FixedPoint("bipartite", y, res))
    return RootList(
        out,
        diagnostics={
            "seeds": n_seeds * n_seeds,
            "newton_failures": failed,
            "unphysical_discarded": discarded,
        },
    )


# ---------------------------------------------------------------------------
# time integration


def integrate(
    state0,
    params: ModelParams,
    t_final: float,
    t_eval=None,
    rtol: float = 1e-7,
    atol: float = 1e-9,
    stop_when_steady: bool = False,
    steady_tol: float = 1e-9,
    max_steps: int = 50_000_000,
    im: InteractionMatrices | None = None,
) -> Trajectory:
    """Integrate the mean-field equations with an embedded 4/5 pair.

    ``state0`` selects the equations: a BipartiteState evolves under the
    two-sublattice reduction, a SpinLattice under the full-lattice equations
    (all-to-all collective decay, interactions from ``im`` or rebuilt from
    ``params``).  The solution is sampled exactly at ``t_eval`` (default: 201
    uniform times including t_final).  Deterministic for fixed inputs.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    if t_eval is None:
        t_eval = np.linspace(0.0, t_final, 201)
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) <= 0) or t_eval[0] < 0 or t_eval[-1] > t_final:
        raise ValueError("t_eval must be strictly increasing within [0, t_final]")

    if isinstance(state0, BipartiteState):
        kind = _kernels.KIND_BIPARTITE
        y0 = state0.as_vector()
        p = _bipartite_p(params)
        v1m = v2m = _DUMMY
        kind_name = "bipartite"
    elif isinstance(state0, SpinLattice):
        if state0.n_sites != params.n_sites:
            raise ValueError("state size does not match params.n_sites")
        kind = _kernels.KIND_LATTICE
        y0 = state0.as_vector()
        p = np.array([params.omega, params.delta, params.gamma_s, params.gamma_m])
        mats = im if im is not None else build_interaction_matrices(params)
        v1m = np.ascontiguousarray(mats.v1_jk)
        v2m = np.ascontiguousarray(mats.v2_jk)
        kind_name = "lattice"
    else:
        raise TypeError(f"unsupported state type {type(state0).__name__}")

    status, ys, n_filled, t_reached, n_steps = _kernels.dp54_integrate(
        kind,
        y0,
        0.0,
        float(t_final),
        p,
        v1m,
        v2m,
        t_eval,
        rtol,
        atol,
        steady_tol if stop_when_steady else 0.0,
        max_steps,
    )
    metadata = {
        "integrator": "dp54",
        "rtol": rtol,
        "atol": atol,
        "status": int(status),
        "t_reached": float(t_reached),
        "n_steps": int(n_steps),
    }
    if status in (_kernels.STATUS_DONE, _kernels.STATUS_STEADY):
        if status == _kernels.STATUS_STEADY:
            metadata["steady_at"] = float(t_reached)
        return Trajectory(t_eval, ys, kind_name, metadata)
    partial = Trajectory(t_eval[:n_filled], ys[:n_filled], kind_name, metadata) if n_filled else None
    reason = "step-size underflow" if status == _kernels.STATUS_UNDERFLOW else "step budget exhausted"
    raise IntegrationError(f"integration failed at t={t_reached:.6g}: {reason}", partial=partial)


# ---------------------------------------------------------------------------
# critical drive


def uniform_branch_omega(params: ModelParams, sz: float) -> float:
    """Drive strength sustaining a uniform steady state at the given Sz:
    omega = sqrt(-(2Sz+1)/Sz * [delta_eff^2 + (gamma_s/2 - kappa Sz)^2])."""
    if not (-0.5 <= sz < 0.0):
        raise ValueError("uniform branch requires -1/2 <= Sz < 0")
    if sz == -0.5:
        return 0.0
    dt = params.delta_eff(sz)
    g = 0.5 * params.gamma_s - params.kappa * sz
    val = -(2.0 * sz + 1.0) / sz * (dt * dt + g * g)
    return float(np.sqrt(max(val, 0.0)))


@dataclass(frozen=True)
class CriticalPoint:
    """Drive strength at which the multi-root window closes, with the Sz of
    the merging root pair and the bisection bracket."""

    omega_c: float
    sz: float
    bracket: tuple[float, float]


def critical_omega(
    params: ModelParams,
    omega_max: float | None = None,
    coarse_points: int = 400,
    tol: float = 1e-8,
) -> CriticalPoint:
    """Critical drive where the high-excitation branch becomes the only
    uniform steady state.

    The uniform branch is the level set of uniform_branch_omega over Sz
    (the steady-state condition solved for omega); the critical point is the
    top fold of that branch, located by bisection on omega of the root count
    of the steady-state equation, then polished with the exact double-root
    condition of the underlying cubic.
    """
    if omega_max is None:
        omega_max = 4.0 * (
            1.0
            + 0.36 * params.kappa
            + params.gamma_s
            + abs(params.delta)
            + params.coordination * (abs(params.v1) + abs(params.v2)) / 2.0
        )

    def n_roots(om: float) -> int:
        return len(_scan_uniform_roots(params.replace(omega=om)))

    for _ in range(4):
        if n_roots(omega_max) == 1:
            break
        omega_max *= 2.0
    else:
        raise CriticalPointNotFound("root count never drops to one in the scan window")

    grid = np.linspace(omega_max / coarse_points, omega_max, coarse_points)
    counts = [n_roots(om) for om in grid]
    multi = [i for i, c in enumerate(counts) if c >= 2]
    if not multi:
        raise CriticalPointNotFound("no multi-root window found in the scan window")
    lo_i = multi[-1]
    if lo_i == len(grid) - 1:
        raise CriticalPointNotFound("multi-root window extends past the scan window")
    lo, hi = grid[lo_i], grid[lo_i + 1]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if n_roots(mid) >= 2:
            lo = mid
        else:
            hi = mid

    # polish: at the fold both P(Sz) = A + omega^2 Sz and P'(Sz) vanish, so
    # A(Sz) - A'(Sz) Sz = 0 and omega_c^2 = -A'(Sz)
    c0, c1, c2, c3 = uniform_cubic_coeffs(params)
    fold_roots = np.roots([-2.0 * c3, -c2, 0.0, c0])
    best = None
    for r in fold_roots:
        if abs(r.imag) > 1e-9 or not (-0.5 < r.real < 0.5):
            continue
        sz = float(r.real)
        om2 = -(c1 + 2.0 * c2 * sz + 3.0 * c3 * sz * sz)
        if om2 <= 0.0:
            continue
        om = float(np.sqrt(om2))
        if lo - 10.0 * tol <= om <= hi + 10.0 * tol:
            if best is None or abs(om - 0.5 * (lo + hi)) < abs(best[0] - 0.5 * (lo + hi)):
                best = (om, sz)
    if best is not None:
        return CriticalPoint(best[0], best[1], (float(lo), float(hi)))

    # fallback: bracket midpoint, Sz from the closest root pair just below
    roots = _scan_uniform_roots(params.replace(omega=lo))
    if len(roots) >= 2:
        gaps = [(roots[i + 1] - roots[i], i) for i in range(len(roots) - 1)]
        _, i = min(gaps)
        sz = 0.5 * (roots[i] + roots[i + 1])
    else:
        sz = roots[0]
    return CriticalPoint(0.5 * (lo + hi), float(sz), (float(lo), float(hi)))


def critical_omega_asymptotic(params: ModelParams, sz: float | None = None) -> float:
    """Large-collective-decay approximation sqrt(-Sz (2Sz+1)) * (N-1)*gamma_m
    at the self-consistent Sz (the merging-root Sz of critical_omega)."""
    if params.gamma_m == 0.0:
        return 0.0
    if sz is None:
        sz = critical_omega(params).sz
    val = -sz * (2.0 * sz + 1.0)
    return float(np.sqrt(max(val, 0.0)) * params.kappa)
