"""Steady-state phase classification and (detuning, drive) sweeps.

A parameter point is classified by combining two evidence channels: the
fixed-point structure with linear stability (stationary phases: uniform
low/high excitation and the symmetry-broken AFM pair), and a seeded ensemble
of time integrations from random initial conditions (the oscillatory phase,
basin statistics, and the spin-variance order parameter).  Labels follow the
taxonomy ULE/UHE/AFM/OSC with bistable/M1/M2 multistability tags.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from . import io, meanfield, stability
from .errors import IntegrationError, NumericalFailure
from .model import ModelParams, build_interaction_matrices

TAU_AFM = 1e-3
TAU_OSC = 1e-3
STATIONARY_TOL = 1e-8
TRANSIENT_FRACTION = 0.6

ULE, UHE, AFM, OSC = "ULE", "UHE", "AFM", "OSC"
TAG_NONE, TAG_BISTABLE, TAG_M1, TAG_M2 = "none", "bistable", "M1", "M2"

PHASE_CODES = {
    "unknown": 0,
    ULE: 1,
    UHE: 2,
    AFM: 3,
    OSC: 4,
    TAG_BISTABLE: 5,
    TAG_M1: 6,
    TAG_M2: 7,
    "multi": 8,
}

# fixed heatmap colour table (RGB), documented in the README
PHASE_COLORS = {
    0: (150, 150, 150),
    1: (25, 60, 140),
    2: (120, 170, 230),
    3: (60, 160, 90),
    4: (235, 200, 60),
    5: (240, 140, 40),
    6: (130, 60, 160),
    7: (200, 40, 40),
    8: (90, 90, 90),
}


@dataclass(frozen=True)
class PhaseLabel:
    components: frozenset
    multistable_tag: str

    def code(self) -> int:
        if self.multistable_tag != TAG_NONE:
            return PHASE_CODES[self.multistable_tag]
        if len(self.components) == 1:
            return PHASE_CODES[next(iter(self.components))]
        if len(self.components) == 0:
            return PHASE_CODES["unknown"]
        return PHASE_CODES["multi"]

    def __str__(self) -> str:
        comps = "+".join(sorted(self.components)) or "unknown"
        return comps if self.multistable_tag == TAG_NONE else f"{comps}[{self.multistable_tag}]"


def make_label(components) -> PhaseLabel:
    comp = frozenset(components)
    bad = comp - {ULE, UHE, AFM, OSC}
    if bad:
        raise ValueError(f"unknown phase components {sorted(bad)}")
    if {AFM, OSC, ULE} <= comp and UHE not in comp:
        tag = TAG_M1
    elif {ULE, UHE} <= comp and (AFM in comp or OSC in comp):
        tag = TAG_M2
    elif len(comp) == 2:
        tag = TAG_BISTABLE
    else:
        tag = TAG_NONE
    return PhaseLabel(comp, tag)


@dataclass(frozen=True)
class OscillationReport:
    is_oscillating: bool
    amplitude: float  # peak-to-peak of the most active Sz component
    period: float | None


def spin_variance(state) -> float:
    """Spatial variance of the unit-normalized site spins:
    sigma = (1/N) sum_i |mean_j(S^j/|S^j|) - S^i/|S^i||^2."""
    if isinstance(state, meanfield.SpinLattice):
        vecs = np.stack([state.sx, state.sy, state.sz])  # (3, N)
    elif isinstance(state, meanfield.BipartiteState):
        vecs = np.stack([state.a, state.b], axis=1)  # (3, 2)
    else:
        vecs = np.asarray(state, dtype=float)
        if vecs.ndim != 2 or vecs.shape[0] != 3:
            raise ValueError("expected a SpinLattice, BipartiteState, or (3, N) array")
    norms = np.linalg.norm(vecs, axis=0)
    if np.any(norms < 1e-12):
        raise ValueError("spin variance undefined: zero-length spin at some site")
    unit = vecs / norms
    mean = unit.mean(axis=1, keepdims=True)
    return float(np.mean(np.sum((mean - unit) ** 2, axis=0)))


def detect_oscillation(traj: meanfield.Trajectory, window: float) -> OscillationReport:
    """Oscillation test on the trailing ``window`` of a trajectory.

    Oscillating means some Sz component has peak-to-peak amplitude above
    τ_osc and is non-monotone there.  The period comes from zero crossings
    of the detrended most-active component (linear interpolation between
    samples; None when fewer than three crossings).
    """
    t_final = traj.times[-1]
    cutoff = TRANSIENT_FRACTION * t_final
    if t_final - window < cutoff - 1e-9:
        raise ValueError("window extends into the transient cutoff of the trajectory")
    mask = traj.times >= t_final - window - 1e-12
    if mask.sum() < 8:
        raise ValueError("trailing window contains too few samples")
    t = traj.times[mask]
    sz = traj.sz_block()[mask]

    best_amp = 0.0
    best_col = None
    oscillating = False
    for col in range(sz.shape[1]):
        s = sz[:, col]
        amp = float(np.ptp(s))
        d = np.diff(s)
        non_monotone = bool(np.any(d > 0) and np.any(d < 0))
        if amp > best_amp:
            best_amp, best_col = amp, col
        if amp > TAU_OSC and non_monotone:
            oscillating = True
    if not oscillating:
        return OscillationReport(False, best_amp, None)

    s = sz[:, best_col] - sz[:, best_col].mean()
    sign = np.sign(s)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if len(idx) < 3:
        return OscillationReport(True, best_amp, None)
    crossings = t[idx] - s[idx] * (t[idx + 1] - t[idx]) / (s[idx + 1] - s[idx])
    period = 2.0 * float(np.mean(np.diff(crossings)))
    return OscillationReport(True, best_amp, period)


@dataclass
class PhasePoint:
    delta: float
    omega: float
    label: PhaseLabel
    fixed_points: list
    variance: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class PhaseDiagram:
    deltas: np.ndarray
    omegas: np.ndarray
    points: list  # row-major: points[i][j] at (deltas[i], omegas[j])
    provenance: dict

    def codes(self) -> np.ndarray:
        return np.array([[pt.label.code() for pt in row] for row in self.points], dtype=int)

    def component_union(self) -> set:
        out = set()
        for row in self.points:
            for pt in row:
                out |= set(pt.label.components)
        return out

    def tags(self) -> set:
        return {pt.label.multistable_tag for row in self.points for pt in row}


def _member_rng(seed: int, seed_key: tuple, m: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(*seed_key, m)))


def _initial_state(params: ModelParams, rng: np.random.Generator, mode: str):
    if mode == "bipartite":
        ra, rb = rng.uniform(-0.5, 0.5, 2)
        return meanfield.BipartiteState(np.array([0.0, 0.0, ra]), np.array([0.0, 0.0, rb]))
    n = params.n_sites
    return meanfield.SpinLattice(np.zeros(n), np.zeros(n), rng.uniform(-0.5, 0.5, n))


def _member_outcome(traj, params: ModelParams, mode: str, window: float):
    """Bucket one trajectory into {uniform-low, uniform-high, AFM, OSC}.

    AFM requires stationarity (RHS max-norm < 1e-8 at the end); OSC follows
    detect_oscillation; everything else falls into the uniform buckets by its
    final Sz with an `unsettled` flag when not yet stationary.
    """
    final = traj.final_state
    if mode == "bipartite":
        f = meanfield._bipartite_rhs_vec(traj.ys[-1], params)
        rhs_norm = float(np.max(np.abs(f)))
        gap = abs(final.a[2] - final.b[2])
        mean_sz = 0.5 * (final.a[2] + final.b[2])
    else:
        im = build_interaction_matrices(params)
        from .model import build_decay_matrix

        d = meanfield.mf_rhs(final, im, build_decay_matrix(params), params)
        rhs_norm = float(max(np.abs(d.sx).max(), np.abs(d.sy).max(), np.abs(d.sz).max()))
        gap = float(final.sz.max() - final.sz.min())
        mean_sz = float(final.sz.mean())
    stationary = rhs_norm < STATIONARY_TOL
    osc = detect_oscillation(traj, window)
    if stationary and gap > TAU_AFM:
        return "AFM", osc, False
    if osc.is_oscillating and not stationary:
        return "OSC", osc, False
    bucket = "uniform-low" if mean_sz < -0.25 else "uniform-high"
    return bucket, osc, not stationary


def classify_phase(
    params: ModelParams,
    ensemble: int = 16,
    seed: int = 0,
    mode: str = "bipartite",
    t_final: float = 300.0,
    seed_key: tuple = (),
    root_seeds: int = 21,
    rtol: float = 1e-7,
    atol: float = 1e-9,
) -> PhasePoint:
    """Classify the steady-state phase at one parameter point.

    Stationary components (ULE/UHE/AFM) come from the fixed-point structure
    with bipartite linear stability; the OSC component requires an ensemble
    member that passes detect_oscillation.  Outcome counts of the seeded
    ensemble are recorded in diagnostics and cross-checked against the label.
    Deterministic for fixed (params, seed, seed_key).
    """
    if ensemble < 8:
        raise ValueError("ensemble size must be at least 8")
    if mode not in ("bipartite", "lattice"):
        raise ValueError(f"unknown ensemble mode {mode!r}")

    uroots = meanfield.uniform_fixed_points(params)
    uroots = [
        fp.with_stability(
            stability.classify(np.concatenate([fp.vec, fp.vec]), params).verdict
        )
        for fp in uroots
    ]
    broots = stability.classify_all(
        meanfield.bipartite_fixed_points(params, n_seeds=root_seeds), params
    )

    components = set()
    if any(f.stability == "stable" and f.band == ULE for f in uroots):
        components.add(ULE)
    if any(f.stability == "stable" and f.band == UHE for f in uroots):
        components.add(UHE)
    if any(f.stability == "stable" and f.sz_gap > TAU_AFM for f in broots):
        components.add(AFM)

    window = (1.0 - TRANSIENT_FRACTION) * t_final
    t_eval = np.concatenate([[0.0], np.linspace(t_final - window, t_final, 513)])
    counts = {"uniform-low": 0, "uniform-high": 0, "AFM": 0, "OSC": 0}
    n_failed = 0
    n_unsettled = 0
    osc_amplitude = 0.0
    osc_period = None
    variance = 0.0
    for m in range(ensemble):
        rng = _member_rng(seed, seed_key, m)
        state0 = _initial_state(params, rng, mode)
        try:
            traj = meanfield.integrate(state0, params, t_final, t_eval=t_eval, rtol=rtol, atol=atol)
        except IntegrationError:
            n_failed += 1
            continue
        bucket, osc, unsettled = _member_outcome(traj, params, mode, window)
        counts[bucket] += 1
        n_unsettled += unsettled
        if bucket == "OSC":
            components.add(OSC)
            if osc.amplitude > osc_amplitude:
                osc_amplitude, osc_period = osc.amplitude, osc.period
        try:
            variance = max(variance, spin_variance(traj.final_state))
        except ValueError:
            pass
    if ensemble - n_failed < ensemble / 2:
        raise NumericalFailure(
            f"only {ensemble - n_failed} of {ensemble} ensemble members integrated"
        )

    mismatches = []
    if counts["AFM"] and AFM not in components:
        mismatches.append("members reached AFM but no stable AFM root was found")
    if counts["uniform-low"] and ULE not in components:
        mismatches.append("members reached uniform-low but no stable ULE root was found")
    if counts["uniform-high"] and UHE not in components and AFM not in components:
        mismatches.append("members reached uniform-high but no stable UHE root was found")

    label = make_label(components)
    diagnostics = {
        "outcome_counts": counts,
        "n_failed": n_failed,
        "n_unsettled": n_unsettled,
        "osc_amplitude": osc_amplitude,
        "osc_period": osc_period,
        "n_uniform_roots": len(uroots),
        "n_bipartite_roots": len(broots),
        "mode": mode,
        "t_final": t_final,
        "mismatches": mismatches,
    }
    return PhasePoint(
        params.delta, params.omega, label, list(uroots) + list(broots), variance, diagnostics
    )


# ---------------------------------------------------------------------------
# sweeps


def _sweep_point(args):
    base, i, j, delta, omega, opts = args
    params = base.replace(delta=float(delta), omega=float(omega))
    pt = classify_phase(
        params,
        ensemble=opts.get("ensemble", 16),
        seed=opts.get("seed", 0),
        mode=opts.get("mode", "bipartite"),
        t_final=opts.get("t_final", 300.0),
        seed_key=(i, j),
        root_seeds=opts.get("root_seeds", 21),
    )
    return i, j, pt


def sweep(
    params: ModelParams,
    deltas,
    omegas,
    ensemble: int = 16,
    seed: int = 0,
    mode: str = "bipartite",
    t_final: float = 300.0,
    workers: int = 1,
    root_seeds: int = 21,
) -> PhaseDiagram:
    """Classify every point of a (delta, omega) grid.

    Grid points are independent; each gets the sub-seed (seed, i, j), so the
    result is deterministic and independent of worker count or completion
    order.
    """
    deltas = np.asarray(deltas, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    if deltas.size == 0 or omegas.size == 0:
        raise ValueError("sweep axes must be non-empty")
    opts = {
        "ensemble": ensemble,
        "seed": seed,
        "mode": mode,
        "t_final": t_final,
        "root_seeds": root_seeds,
    }
    tasks = [
        (params, i, j, d, o, opts)
        for i, d in enumerate(deltas)
        for j, o in enumerate(omegas)
    ]
    points = [[None] * omegas.size for _ in range(deltas.size)]
    if workers > 1:
        with multiprocessing.get_context("spawn").Pool(workers) as pool:
            for i, j, pt in pool.imap_unordered(_sweep_point, tasks, chunksize=4):
                points[i][j] = pt
    else:
        for task in tasks:
            i, j, pt = _sweep_point(task)
            points[i][j] = pt
    provenance = {
        "params": params.to_dict(),
        "seed": seed,
        "ensemble": ensemble,
        "mode": mode,
        "t_final": t_final,
    }
    return PhaseDiagram(deltas, omegas, points, provenance)


def diagram_to_csv(diag: PhaseDiagram, path, header: dict | None = None) -> None:
    columns = [
        "delta",
        "omega",
        "label_code",
        "components",
        "multistable_tag",
        "sigma",
        "n_uniform_low",
        "n_uniform_high",
        "n_afm",
        "n_osc",
        "n_failed",
        "n_fixed_points",
    ]
    rows = []
    for i, d in enumerate(diag.deltas):
        for j, o in enumerate(diag.omegas):
            pt = diag.points[i][j]
            c = pt.diagnostics["outcome_counts"]
            rows.append(
                [
                    float(d),
                    float(o),
                    pt.label.code(),
                    "+".join(sorted(pt.label.components)) or "unknown",
                    pt.label.multistable_tag,
                    pt.variance,
                    c["uniform-low"],
                    c["uniform-high"],
                    c["AFM"],
                    c["OSC"],
                    pt.diagnostics["n_failed"],
                    len(pt.fixed_points),
                ]
            )
    io.write_csv(path, header or diag.provenance, columns, rows)


def diagram_to_grid(diag: PhaseDiagram, grid_path, legend_path) -> None:
    """Integer-coded label matrix (rows = deltas, cols = omegas) + legend."""
    import json

    codes = diag.codes()
    with open(grid_path, "w", encoding="utf-8") as fh:
        fh.write(io.HEADER_PREFIX + json.dumps(diag.provenance, sort_keys=True) + "\n")
        for row in codes:
            fh.write(",".join(str(c) for c in row) + "\n")
    legend = {str(code): name for name, code in PHASE_CODES.items()}
    with open(legend_path, "w", encoding="utf-8") as fh:
        json.dump({"codes": legend, "colors": {str(k): v for k, v in PHASE_COLORS.items()}}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def diagram_to_ppm(diag: PhaseDiagram, path, scale: int = 8) -> None:
    """Heatmap with the fixed colour table; omega increases upward."""
    codes = diag.codes()
    img = np.zeros((codes.shape[1], codes.shape[0], 3), dtype=np.uint8)
    for i in range(codes.shape[0]):
        for j in range(codes.shape[1]):
            img[codes.shape[1] - 1 - j, i] = PHASE_COLORS[codes[i, j]]
    img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    io.write_ppm(path, img)
