"""Linear stability of uniform and bipartite fixed points.

The verdict comes from the eigenvalues of the Jacobian of the corresponding
equations of motion: stable when every real part is below -tau, unstable when
any exceeds +tau, marginal inside the band.  The band keeps verdicts from
flapping on numerical noise right at bifurcations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import meanfield
from .errors import NumericalFailure
from .model import ModelParams

TAU_STAB = 1e-8

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    max_real: float
    verdict: str
    method: str

    def is_stable(self) -> bool:
        return self.verdict == STABLE


def _point_vec(point) -> tuple[np.ndarray, str]:
    if isinstance(point, meanfield.FixedPoint):
        return np.asarray(point.vec, dtype=float), point.kind
    if isinstance(point, meanfield.BipartiteState):
        return point.as_vector(), "bipartite"
    vec = np.asarray(point, dtype=float).ravel()
    if vec.size == 3:
        return vec, "uniform"
    if vec.size == 6:
        return vec, "bipartite"
    raise ValueError("point must be a 3-vector (uniform) or 6-vector (bipartite)")


def _rhs(vec: np.ndarray, kind: str, params: ModelParams) -> np.ndarray:
    if kind == "uniform":
        return meanfield.uniform_rhs(vec, params)
    return meanfield._bipartite_rhs_vec(vec, params)


def jacobian(point, params: ModelParams, mode: str = "analytic") -> np.ndarray:
    """Jacobian of the uniform (3x3) or bipartite (6x6) equations at a point.

    Warns (does not fail) when the point is not a fixed point to 1e-8; the
    linearization is still well defined there.
    """
    vec, kind = _point_vec(point)
    res = float(np.max(np.abs(_rhs(vec, kind, params))))
    if res > 1e-8:
        warnings.warn(
            f"jacobian evaluated away from a fixed point (residual {res:.2e})",
            stacklevel=2,
        )
    if mode == "analytic":
        if kind == "uniform":
            return meanfield.uniform_jacobian_matrix(vec, params)
        return meanfield.bipartite_jacobian_matrix(vec, params)
    if mode == "finite-difference":
        n = vec.size
        jac = np.empty((n, n))
        for i in range(n):
            h = 1e-6 * max(1.0, abs(vec[i]))
            up = vec.copy()
            dn = vec.copy()
            up[i] += h
            dn[i] -= h
            jac[:, i] = (_rhs(up, kind, params) - _rhs(dn, kind, params)) / (2.0 * h)
        return jac
    raise ValueError(f"unknown jacobian mode {mode!r}")


def classify(point, params: ModelParams, tau: float = TAU_STAB) -> StabilityReport:
    """Eigen-decomposition of the analytic Jacobian with a three-way verdict."""
    jac = jacobian(point, params, mode="analytic")
    try:
        eigs = np.linalg.eigvals(jac)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalFailure(f"eigen-solver failed: {exc}") from exc
    order = np.lexsort((eigs.imag, eigs.real))
    eigs = eigs[order]
    max_real = float(np.max(eigs.real))
    if max_real < -tau:
        verdict = STABLE
    elif max_real > tau:
        verdict = UNSTABLE
    else:
        verdict = MARGINAL
    return StabilityReport(eigs, max_real, verdict, "analytic")


def classify_all(points, params: ModelParams) -> list:
    """Attach stability verdicts to a list of FixedPoint objects."""
    out = []
    for fp in points:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = classify(fp, params)
        out.append(fp.with_stability(rep.verdict))
    return out
