"""Physical parameters, lattice geometry, and coupling-matrix construction.

Everything downstream (mean-field dynamics, stability, exact solver) consumes
the objects built here.  All constructors are pure functions of their inputs
and the resulting objects are treated as immutable, so they are safe to share
across parallel sweep workers.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

RANGE_NN = "NN"
RANGE_NNN = "NNN"
_RANGE_CUTOFF = {RANGE_NN: 1, RANGE_NNN: 2}


@dataclass(frozen=True)
class ModelParams:
    """All physical constants of one simulation instance.

    Energies and rates are in units of the single-body decay rate unless the
    caller rescales; distances are dimensionless lattice distances, so the
    nearest-neighbour interactions v1, v2 already contain the lattice constant
    (V = C6/a^6).

    ``coordination`` is the effective number of nearest neighbours entering
    the uniform/bipartite interaction term.  The two-site ansatz uses 1 (one
    distinct neighbour); a physically summed periodic chain has 2.
    """

    omega: float
    delta: float
    gamma_s: float = 1.0
    gamma_m: float = 0.0
    n_sites: int = 2
    v1: float = 0.0
    v2: float = 0.0
    interaction_range: str = RANGE_NN
    coordination: float = 1.0
    pbc: bool = True

    def __post_init__(self):
        if self.gamma_s < 0:
            raise ValueError(f"gamma_s must be >= 0, got {self.gamma_s}")
        if self.gamma_m < 0:
            raise ValueError(f"gamma_m must be >= 0, got {self.gamma_m}")
        if self.n_sites < 1:
            raise ValueError(f"n_sites must be >= 1, got {self.n_sites}")
        if self.coordination <= 0:
            raise ValueError(f"coordination must be > 0, got {self.coordination}")
        if self.interaction_range not in _RANGE_CUTOFF:
            raise ValueError(
                f"interaction_range must be one of {sorted(_RANGE_CUTOFF)}, "
                f"got {self.interaction_range!r}"
            )

    @property
    def kappa(self) -> float:
        """Collective decay rate seen by a uniform spin: (N-1)*gamma_m."""
        return (self.n_sites - 1) * self.gamma_m

    def s_v(self, sz) -> float:
        """Mean-field interaction shift z*[v1*(1-2Sz) - v2*(1+2Sz)]/4."""
        return self.coordination * (self.v1 * (1.0 - 2.0 * sz) - self.v2 * (1.0 + 2.0 * sz)) / 4.0

    @property
    def s_v_slope(self) -> float:
        """d(s_v)/dSz, constant because s_v is linear in Sz."""
        return -self.coordination * (self.v1 + self.v2) / 2.0

    def delta_eff(self, sz) -> float:
        """Interaction-shifted detuning delta + s_v(Sz)."""
        return self.delta + self.s_v(sz)

    def replace(self, **kwargs) -> "ModelParams":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown ModelParams fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, s: str) -> "ModelParams":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class InteractionMatrices:
    """Pairwise energy shifts v_jk = V_s / d(j,k)^6, truncated at the range cutoff."""

    v1_jk: np.ndarray
    v2_jk: np.ndarray


@dataclass(frozen=True)
class DecayMatrix:
    """Decay-rate matrix: gamma_s on the diagonal, constant gamma_m elsewhere."""

    gamma_jk: np.ndarray

    @property
    def gamma_s(self) -> float:
        return float(self.gamma_jk[0, 0])

    @property
    def gamma_m(self) -> float:
        n = self.gamma_jk.shape[0]
        return float(self.gamma_jk[0, 1]) if n > 1 else 0.0


@dataclass(frozen=True)
class DDGeometry:
    """Geometry of the exchange coupling: dispersion coefficient, lattice
    constant, and angle between internuclear and quantization axes."""

    c3: float
    a: float
    theta: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"lattice constant must be > 0, got {self.a}")


def chain_distance(j: int, k: int, n_sites: int, pbc: bool) -> int:
    """Lattice distance between sites j and k (0-based), wrapped under pbc."""
    d = abs(j - k)
    if pbc:
        d = min(d, n_sites - d)
    return d


def build_interaction_matrices(params: ModelParams) -> InteractionMatrices:
    """N x N symmetric interaction matrices with zero diagonal.

    Entries are V_s / d^6 for lattice distance d within the configured range
    (1 for NN, 2 for NNN) and zero beyond.
    """
    n = params.n_sites
    cutoff = _RANGE_CUTOFF[params.interaction_range]
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    if params.pbc:
        d = np.minimum(d, n - d)
    with np.errstate(divide="ignore"):
        inv_d6 = np.where((d >= 1) & (d <= cutoff), 1.0 / np.where(d == 0, 1, d) ** 6, 0.0)
    return InteractionMatrices(v1_jk=params.v1 * inv_d6, v2_jk=params.v2 * inv_d6)


def build_decay_matrix(params: ModelParams) -> DecayMatrix:
    """All-to-all decay matrix: diagonal gamma_s, off-diagonal gamma_m."""
    n = params.n_sites
    g = np.full((n, n), params.gamma_m, dtype=float)
    np.fill_diagonal(g, params.gamma_s)
    return DecayMatrix(gamma_jk=g)


def dd_coupling(geom: DDGeometry, j: int, k: int) -> float:
    """Exchange coupling C3*(1 - 3 cos^2 theta) / (a^3 |j-k|^3) between two sites."""
    if j == k:
        raise ValueError("dd_coupling is undefined for j == k")
    ang = 1.0 - 3.0 * math.cos(geom.theta) ** 2
    return geom.c3 * ang / (geom.a**3 * abs(j - k) ** 3)


def magic_angle() -> float:
    """Angle at which the exchange coupling vanishes: arccos(1/sqrt(3)) ~ 54.7 deg."""
    return math.acos(1.0 / math.sqrt(3.0))
