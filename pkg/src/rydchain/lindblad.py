"""Exact master-equation solver for short chains.

Basis states are integers whose bit j gives the occupation of site j: bit set
means the high-energy state (sigma_z = +1), so the fully de-excited chain is
index 0.  Operators are built sparsely from that bit structure; the density
matrix stays dense (2^N x 2^N) and the generator is applied operator-by-
operator, never materializing the 4^N superoperator.

The dissipator uses the all-to-all decay matrix: diagonal gamma_s, constant
off-diagonal gamma_m, so the jump part splits into a collective J- rho J+
channel and (gamma_s - gamma_m) single-site channels applied by index blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853

from .errors import NumericalFailure, ResourceGuardError
from .model import (
    DecayMatrix,
    InteractionMatrices,
    ModelParams,
    build_decay_matrix,
    build_interaction_matrices,
)

N_MAX_DEFAULT = 10

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = -1e-8
STEADY_TOL = 1e-9


def _check_size(n: int, n_max: int = N_MAX_DEFAULT) -> None:
    if n > n_max:
        raise ResourceGuardError(f"n_sites={n} exceeds the exact-solver guard n_max={n_max}")


def _bits(n: int) -> np.ndarray:
    """(2^n, n) matrix of basis-state occupations."""
    states = np.arange(1 << n, dtype=np.int64)
    return (states[:, None] >> np.arange(n)) & 1


def site_operator(kind: str, j: int, n: int) -> sp.csr_matrix:
    """Single-site operator embedded in the 2^n space.

    kind: 'x', 'y', 'z', '+', '-', '11' (projector on the low state),
    '22' (projector on the high state).
    """
    dim = 1 << n
    states = np.arange(dim, dtype=np.int64)
    bit = (states >> j) & 1
    flip = states ^ (1 << j)
    if kind == "z":
        return sp.csr_matrix((2.0 * bit - 1.0, (states, states)), shape=(dim, dim))
    if kind == "x":
        return sp.csr_matrix((np.ones(dim), (flip, states)), shape=(dim, dim))
    if kind == "y":
        vals = 1j * (2.0 * bit - 1.0)  # <b^1j|sigma_y|b> = i(-1)^(1-bit) = i(2 bit - 1)
        return sp.csr_matrix((vals, (flip, states)), shape=(dim, dim))
    if kind == "-":
        sel = bit == 1
        return sp.csr_matrix(
            (np.ones(sel.sum()), (flip[sel], states[sel])), shape=(dim, dim)
        )
    if kind == "+":
        sel = bit == 0
        return sp.csr_matrix(
            (np.ones(sel.sum()), (flip[sel], states[sel])), shape=(dim, dim)
        )
    if kind == "11":
        return sp.csr_matrix((1.0 - bit, (states, states)), shape=(dim, dim))
    if kind == "22":
        return sp.csr_matrix((bit.astype(float), (states, states)), shape=(dim, dim))
    raise ValueError(f"unknown operator kind {kind!r}")


def all_down_state(n: int) -> np.ndarray:
    """Density matrix with every atom in the low state."""
    dim = 1 << n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def build_hamiltonian(
    params: ModelParams,
    im: InteractionMatrices | None = None,
    dd_matrix: np.ndarray | None = None,
    n_max: int = N_MAX_DEFAULT,
) -> sp.csr_matrix:
    """Chain Hamiltonian: drive + detuning + pairwise same-state shifts.

    H = sum_j [Omega/2 sigma_x^j - Delta/2 sigma_z^j]
        + (1/2) sum_{a,k!=j} V^a_jk P_a^j P_a^k
    with P_1/P_2 the projectors on the low/high state.  The exchange
    (flip-flop) term is constructible by passing its coupling matrix
    ``dd_matrix`` but is off by default.
    """
    n = params.n_sites
    _check_size(n, n_max)
    if im is None:
        im = build_interaction_matrices(params)
    dim = 1 << n
    bits = _bits(n).astype(float)
    low = 1.0 - bits
    # diagonal: detuning + pair interactions (each unordered pair once)
    diag = -0.5 * params.delta * (2.0 * bits - 1.0).sum(axis=1)
    diag += 0.5 * (
        np.einsum("bj,jk,bk->b", low, im.v1_jk, low)
        + np.einsum("bj,jk,bk->b", bits, im.v2_jk, bits)
    )
    h = sp.csr_matrix((diag, (np.arange(dim), np.arange(dim))), shape=(dim, dim), dtype=complex)
    if params.omega != 0.0:
        states = np.arange(dim, dtype=np.int64)
        for j in range(n):
            flip = states ^ (1 << j)
            h = h + sp.csr_matrix(
                (np.full(dim, 0.5 * params.omega), (flip, states)), shape=(dim, dim)
            )
    if dd_matrix is not None:
        dd_matrix = np.asarray(dd_matrix, dtype=float)
        states = np.arange(dim, dtype=np.int64)
        for j in range(n):
            for k in range(j + 1, n):
                if dd_matrix[j, k] == 0.0:
                    continue
                bj = (states >> j) & 1
                bk = (states >> k) & 1
                sel = bj != bk
                flip = states[sel] ^ (1 << j) ^ (1 << k)
                h = h + sp.csr_matrix(
                    (np.full(sel.sum(), 2.0 * dd_matrix[j, k]), (flip, states[sel])),
                    shape=(dim, dim),
                )
    return h.tocsr()


def _decay_rates(dm: DecayMatrix) -> tuple[float, float]:
    g = dm.gamma_jk
    n = g.shape[0]
    gs = float(g[0, 0])
    if np.any(np.abs(np.diag(g) - gs) > 1e-12):
        raise ValueError("decay matrix must have a constant diagonal")
    if n > 1:
        off = g[~np.eye(n, dtype=bool)]
        gm = float(off[0])
        if np.any(np.abs(off - gm) > 1e-12):
            raise ValueError("decay matrix must be constant all-to-all off the diagonal")
    else:
        gm = 0.0
    return gs, gm


class LindbladGenerator:
    """Precomputed application of drho/dt = -i[H, rho] + dissipator."""

    def __init__(self, h: sp.spmatrix, dm: DecayMatrix):
        self.dim = h.shape[0]
        n = int(np.log2(self.dim))
        self.n = n
        gs, gm = _decay_rates(dm)
        self.gamma_s, self.gamma_m = gs, gm
        jm = sum(site_operator("-", j, n) for j in range(n)).tocsr()
        jp = jm.conj().T.tocsr()
        if gm != 0.0:
            m_op = gm * (jp @ jm)
            self.jm = jm.astype(complex)
            self.jp = jp.astype(complex)
        else:
            m_op = sp.csr_matrix((self.dim, self.dim), dtype=complex)
            self.jm = self.jp = None
        if gs != gm:
            states = np.arange(self.dim, dtype=np.int64)
            popcount = _bits(n).sum(axis=1).astype(float)
            m_op = m_op + sp.csr_matrix(
                ((gs - gm) * popcount, (states, states)), shape=(self.dim, self.dim)
            )
            self.site_rows = []
            for j in range(n):
                excited = states[((states >> j) & 1) == 1]
                self.site_rows.append((excited ^ (1 << j), excited))
        else:
            self.site_rows = None
        self.k_op = (-1j * h - 0.5 * m_op).tocsr().astype(complex)

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        out = self.k_op @ rho
        out += (self.k_op @ rho.conj().T).conj().T
        return self._jumps(out, rho)

    def rhs_hermitian(self, rho: np.ndarray) -> np.ndarray:
        """Same generator restricted to Hermitian rho: K rho + (K rho)^dag.

        The master-equation flow preserves Hermiticity, so every Runge-Kutta
        stage state stays Hermitian and one sparse product can be saved.
        """
        kr = self.k_op @ rho
        out = kr + kr.conj().T
        return self._jumps(out, rho)

    def _jumps(self, out: np.ndarray, rho: np.ndarray) -> np.ndarray:
        if self.jm is not None:
            out += self.gamma_m * ((self.jm @ rho) @ self.jp)
        if self.site_rows is not None:
            g = self.gamma_s - self.gamma_m
            for lowered, excited in self.site_rows:
                out[np.ix_(lowered, lowered)] += g * rho[np.ix_(excited, excited)]
        return out


def lindblad_rhs(rho: np.ndarray, h: sp.spmatrix, dm: DecayMatrix) -> np.ndarray:
    """One evaluation of the master-equation right-hand side."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != h.shape:
        raise ValueError("density matrix and Hamiltonian dimensions differ")
    return LindbladGenerator(h, dm).rhs(rho)


def check_density_matrix(rho: np.ndarray, where: str = "") -> None:
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > HERMITICITY_TOL:
        raise NumericalFailure(f"hermiticity defect {herm:.3e} {where}")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > TRACE_TOL:
        raise NumericalFailure(f"trace drift |tr-1| = {abs(tr - 1.0):.3e} {where}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if min_eig < POSITIVITY_TOL:
        raise NumericalFailure(f"negative eigenvalue {min_eig:.3e} {where}")


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: list  # dense density matrices at the sample times
    metadata: dict = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def evolve(
    rho0: np.ndarray,
    params: ModelParams,
    t_final: float,
    sample_times=None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    stop_when_steady: bool = True,
    steady_tol: float = STEADY_TOL,
    n_max: int = N_MAX_DEFAULT,
    im: InteractionMatrices | None = None,
    dd_matrix: np.ndarray | None = None,
    check_invariants: bool = True,
) -> EvolutionResult:
    """Integrate the master equation with an adaptive high-order RK scheme.

    Samples are taken from the integrator's dense output; density-matrix
    invariants (hermiticity, unit trace, positivity) are re-checked at every
    sample.  When the RHS max-norm drops below ``steady_tol`` the state is
    declared steady and the remaining samples are frozen.
    """
    _check_size(params.n_sites, n_max)
    rho0 = np.asarray(rho0, dtype=complex)
    dim = 1 << params.n_sites
    if rho0.shape != (dim, dim):
        raise ValueError(f"initial state must be {dim}x{dim} for n_sites={params.n_sites}")
    if check_invariants:
        check_density_matrix(rho0, "in the initial state")
    if sample_times is None:
        sample_times = np.linspace(0.0, t_final, 61)
    sample_times = np.asarray(sample_times, dtype=float)
    if np.any(np.diff(sample_times) <= 0) or sample_times[0] < 0 or sample_times[-1] > t_final:
        raise ValueError("sample_times must be strictly increasing within [0, t_final]")

    h = build_hamiltonian(params, im=im, dd_matrix=dd_matrix, n_max=n_max)
    gen = LindbladGenerator(h, build_decay_matrix(params))

    def fun(_t, y):
        return gen.rhs(y.reshape(dim, dim)).ravel()

    states: list[np.ndarray] = []
    times_out: list[float] = []
    isamp = 0
    while isamp < len(sample_times) and sample_times[isamp] <= 0.0:
        states.append(rho0.copy())
        times_out.append(float(sample_times[isamp]))
        isamp += 1

    solver = DOP853(fun, 0.0, rho0.ravel(), t_bound=float(t_final), rtol=rtol, atol=atol)
    steady_at = None
    n_steps = 0
    while solver.status == "running" and isamp < len(sample_times):
        msg = solver.step()
        if solver.status == "failed":
            raise NumericalFailure(f"master-equation integration failed: {msg}")
        n_steps += 1
        if isamp < len(sample_times) and sample_times[isamp] <= solver.t:
            dense = solver.dense_output()
            while isamp < len(sample_times) and sample_times[isamp] <= solver.t:
                rho_t = dense(sample_times[isamp]).reshape(dim, dim)
                if check_invariants:
                    check_density_matrix(rho_t, f"at t={sample_times[isamp]:.6g}")
                states.append(rho_t)
                times_out.append(float(sample_times[isamp]))
                isamp += 1
        if stop_when_steady and n_steps % 10 == 0:
            if float(np.max(np.abs(gen.rhs(solver.y.reshape(dim, dim))))) < steady_tol:
                steady_at = solver.t
                break

    if steady_at is not None and isamp < len(sample_times):
        rho_ss = solver.y.reshape(dim, dim)
        if check_invariants:
            check_density_matrix(rho_ss, f"at the steady stop t={steady_at:.6g}")
        while isamp < len(sample_times):
            states.append(rho_ss.copy())
            times_out.append(float(sample_times[isamp]))
            isamp += 1

    metadata = {
        "rtol": rtol,
        "atol": atol,
        "n_steps": n_steps,
        "steady_at": steady_at,
        "integrator": "dop853",
    }
    return EvolutionResult(np.array(times_out), states, metadata)


# ---------------------------------------------------------------------------
# observables


def mean_sz(rho: np.ndarray) -> float:
    """Site-averaged <sigma_z>."""
    dim = rho.shape[0]
    n = int(np.log2(dim))
    zsum = (2.0 * _bits(n) - 1.0).sum(axis=1)
    return float(np.real(np.diag(rho)) @ zsum / n)


def sz_expectation(rho: np.ndarray, site: int) -> float:
    dim = rho.shape[0]
    n = int(np.log2(dim))
    z = 2.0 * (((np.arange(dim) >> site) & 1).astype(float)) - 1.0
    return float(np.real(np.diag(rho)) @ z)


def connected_correlation(rho: np.ndarray, i: int, j: int) -> float:
    """<sigma_z^i sigma_z^{i+j}> - <sigma_z^i><sigma_z^{i+j}> with the second
    site wrapped periodically; sites are 0-based, j is the separation."""
    dim = rho.shape[0]
    n = int(np.log2(dim))
    if not (0 <= i < n):
        raise ValueError(f"site {i} outside the chain")
    k = (i + j) % n
    states = np.arange(dim)
    zi = 2.0 * (((states >> i) & 1).astype(float)) - 1.0
    zk = 2.0 * (((states >> k) & 1).astype(float)) - 1.0
    p = np.real(np.diag(rho))
    return float(p @ (zi * zk) - (p @ zi) * (p @ zk))


def von_neumann_entropy(rho: np.ndarray) -> float:
    """-Tr(rho ln rho); eigenvalues below 1e-14 are clamped to zero."""
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    evals = np.where(evals < 1e-14, 0.0, evals)
    nz = evals[evals > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


# ---------------------------------------------------------------------------
# small-chain steady state by null-space solve (cross-check, N <= 4)


def steady_state_nullspace(
    params: ModelParams,
    im: InteractionMatrices | None = None,
    n_max: int = 4,
) -> np.ndarray:
    """Steady state from the null space of the full superoperator.

    Only for tiny chains (4^N-dimensional dense solve); used to cross-check
    the long-time integration.
    """
    n = params.n_sites
    if n > n_max:
        raise ResourceGuardError(f"nullspace solve limited to n_sites <= {n_max}")
    dim = 1 << n
    h = build_hamiltonian(params, im=im)
    gs, gm = params.gamma_s, params.gamma_m
    eye = sp.identity(dim, dtype=complex, format="csr")
    jm = sum(site_operator("-", j, n) for j in range(n)).tocsr().astype(complex)
    jp = jm.conj().T.tocsr()
    m_op = gm * (jp @ jm) if gm != 0.0 else sp.csr_matrix((dim, dim), dtype=complex)
    if gs != gm:
        m_op = m_op + (gs - gm) * sum(
            (site_operator("+", j, n) @ site_operator("-", j, n)).astype(complex)
            for j in range(n)
        )
    # row-major vec: vec(A rho B) = (A kron B^T) vec(rho)
    lsup = (
        -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
        - 0.5 * (sp.kron(m_op, eye) + sp.kron(eye, m_op.T))
    )
    if gm != 0.0:
        lsup = lsup + gm * sp.kron(jm, jp.T)
    if gs != gm:
        for j in range(n):
            sm = site_operator("-", j, n).astype(complex)
            lsup = lsup + (gs - gm) * sp.kron(sm, sm.conj())
    lsup = lsup.toarray()
    w, v = np.linalg.eig(lsup)
    idx = int(np.argmin(np.abs(w)))
    rho = v[:, idx].reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return rho
