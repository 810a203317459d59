"""Command-line front end.

Configuration comes from a single JSON document (--config; bundled recipe
names are looked up in the package when no file of that name exists) with
command-line flags taking precedence.  Every output file starts with a JSON
header carrying the resolved configuration, the seed, and the tool version,
so a run can be reproduced from any of its outputs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 resource guard.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from . import __version__, io, lindblad, meanfield, phases, stability
from .errors import (
    ConfigError,
    CriticalPointNotFound,
    IntegrationError,
    NumericalFailure,
    ResourceGuardError,
)
from .model import DDGeometry, ModelParams, build_interaction_matrices, chain_distance, dd_coupling

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_RESOURCE = 4


def load_config(spec: str | None) -> dict:
    if spec is None:
        return {}
    if os.path.exists(spec):
        with open(spec, "r", encoding="utf-8") as fh:
            return json.load(fh)
    name = spec if spec.endswith(".json") else spec + ".json"
    ref = resources.files("rydchain").joinpath("recipes", name)
    if ref.is_file():
        return json.loads(ref.read_text(encoding="utf-8"))
    raise ConfigError(f"config {spec!r} is neither a file nor a bundled recipe")


def list_recipes() -> list[str]:
    ref = resources.files("rydchain").joinpath("recipes")
    return sorted(p.name[:-5] for p in ref.iterdir() if p.name.endswith(".json"))


def resolve_params(config: dict, args) -> ModelParams:
    fields = dict(config.get("params", {}))
    if getattr(args, "z", None) is not None:
        fields["coordination"] = args.z
    if getattr(args, "range", None) is not None:
        fields["interaction_range"] = args.range
    try:
        return ModelParams.from_dict(fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc


def _opt(args, config, key, default):
    val = getattr(args, key, None)
    if val is not None:
        return val
    return config.get(key, default)


def _workers(args, config) -> int:
    if args.workers is not None:
        return args.workers
    if "RYD_WORKERS" in os.environ:
        try:
            return int(os.environ["RYD_WORKERS"])
        except ValueError as exc:
            raise ConfigError(f"RYD_WORKERS must be an integer: {exc}") from exc
    return int(config.get("workers", 1))


def _header(command: str, params: ModelParams, seed, options: dict) -> dict:
    return {
        "tool": "rydchain",
        "version": __version__,
        "command": command,
        "params": params.to_dict(),
        "seed": seed,
        "options": options,
    }


def _axis(spec_list, what: str) -> np.ndarray:
    try:
        lo, hi, n = spec_list
        return np.linspace(float(lo), float(hi), int(n))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} axis must be [min, max, n]: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_mf_evolve(args) -> int:
    config = load_config(args.config)
    params = resolve_params(config, args)
    seed = _opt(args, config, "seed", 0)
    t_final = float(_opt(args, config, "t_final", 300.0))
    ensemble = int(_opt(args, config, "ensemble", 1))
    mode = _opt(args, config, "mode", "bipartite")
    n_samples = int(config.get("n_samples", 201))
    t_eval = np.linspace(0.0, t_final, n_samples)
    options = {"t_final": t_final, "ensemble": ensemble, "mode": mode, "n_samples": n_samples}
    rows = []
    for m in range(ensemble):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(m,)))
        state0 = phases._initial_state(params, rng, mode)
        traj = meanfield.integrate(state0, params, t_final, t_eval=t_eval)
        n_sites = 2 if mode == "bipartite" else params.n_sites
        for it, t in enumerate(traj.times):
            y = traj.ys[it]
            for s in range(n_sites):
                if mode == "bipartite":
                    sx, sy, sz = y[3 * s : 3 * s + 3]
                else:
                    n = params.n_sites
                    sx, sy, sz = y[s], y[n + s], y[2 * n + s]
                rows.append([float(t), m, s, float(sx), float(sy), float(sz)])
    io.write_csv(
        args.out,
        _header("mf-evolve", params, seed, options),
        ["t", "member", "site", "sx", "sy", "sz"],
        rows,
    )
    return EXIT_OK


def cmd_fixed_points(args) -> int:
    config = load_config(args.config)
    params = resolve_params(config, args)
    uroots = meanfield.uniform_fixed_points(params)
    broots = meanfield.bipartite_fixed_points(params)
    rows = []
    idx = 0
    for fp in list(uroots) + list(broots):
        vec6 = np.concatenate([fp.vec, fp.vec]) if fp.kind == "uniform" else fp.vec
        rep = stability.classify(vec6, params)
        row = [fp.kind, idx, fp.band or ""]
        row += [float(v) for v in vec6]
        row += [fp.residual, rep.verdict, rep.max_real]
        for lam in rep.eigenvalues:
            row += [float(lam.real), float(lam.imag)]
        rows.append(row)
        idx += 1
    cols = (
        ["kind", "index", "band", "sxa", "sya", "sza", "sxb", "syb", "szb",
         "residual", "stability", "max_real"]
        + [f"eig{i}_{p}" for i in range(6) for p in ("re", "im")]
    )
    io.write_csv(args.out, _header("fixed-points", params, None, {}), cols, rows)
    return EXIT_OK


def cmd_stability(args) -> int:
    config = load_config(args.config)
    params = resolve_params(config, args)
    state = config.get("state")
    if state is None:
        raise ConfigError("stability requires a 'state' entry (3 or 6 components)")
    vec = np.asarray(state, dtype=float)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = stability.classify(vec, params)
        jac_fd = stability.jacobian(vec, params, mode="finite-difference")
        jac_an = stability.jacobian(vec, params, mode="analytic")
    rows = [
        [i, float(lam.real), float(lam.imag)] for i, lam in enumerate(rep.eigenvalues)
    ]
    header = _header("stability", params, None, {
        "verdict": rep.verdict,
        "max_real": rep.max_real,
        "jacobian_fd_defect": float(np.max(np.abs(jac_an - jac_fd))),
    })
    io.write_csv(args.out, header, ["index", "re", "im"], rows)
    return EXIT_OK


def cmd_phase_diagram(args) -> int:
    config = load_config(args.config)
    params = resolve_params(config, args)
    seed = int(_opt(args, config, "seed", 0))
    ensemble = int(_opt(args, config, "ensemble", 16))
    t_final = float(_opt(args, config, "t_final", 300.0))
    mode = config.get("mode", "bipartite")
    root_seeds = int(config.get("root_seeds", 21))
    deltas = _axis(config.get("delta_axis", [-6.0, 2.0, 30]), "delta")
    omegas = _axis(config.get("omega_axis", [0.2, 5.0, 30]), "omega")
    workers = _workers(args, config)
    diag = phases.sweep(
        params, deltas, omegas,
        ensemble=ensemble, seed=seed, mode=mode, t_final=t_final,
        workers=workers, root_seeds=root_seeds,
    )
    options = {
        "ensemble": ensemble, "t_final": t_final, "mode": mode,
        "delta_axis": [float(deltas[0]), float(deltas[-1]), len(deltas)],
        "omega_axis": [float(omegas[0]), float(omegas[-1]), len(omegas)],
        "root_seeds": root_seeds, "workers": workers,
    }
    header = _header("phase-diagram", params, seed, options)
    phases.diagram_to_csv(diag, args.out, header)
    base = args.out[:-4] if args.out.endswith(".csv") else args.out
    phases.diagram_to_grid(diag, base + ".grid.csv", base + ".legend.json")
    if args.heatmap:
        phases.diagram_to_ppm(diag, base + ".ppm")
    return EXIT_OK


def cmd_critical_scan(args) -> int:
    config = load_config(args.config)
    params = resolve_params(config, args)
    n_list = config.get("n_list", [])
    gammas = config.get("gammas", [params.gamma_m])
    if not n_list:
        raise ConfigError("critical-scan requires a non-empty 'n_list'")
    rows = []
    for g in gammas:
        for n in n_list:
            p = params.replace(gamma_s=float(g), gamma_m=float(g), n_sites=int(n))
            try:
                cp = meanfield.critical_omega(p)
                asym = meanfield.critical_omega_asymptotic(p, sz=cp.sz)
                ratio = asym / cp.omega_c if cp.omega_c > 0 else float("nan")
                rows.append([float(g), int(n), cp.omega_c, cp.sz, asym, ratio, "ok"])
            except CriticalPointNotFound:
                rows.append([float(g), int(n), float("nan"), float("nan"),
                             float("nan"), float("nan"), "not-found"])
    io.write_csv(
        args.out,
        _header("critical-scan", params, None, {"n_list": list(n_list), "gammas": list(gammas)}),
        ["gamma", "n_sites", "omega_c", "sz", "asymptotic", "ratio", "status"],
        rows,
    )
    return EXIT_OK


def cmd_exact_evolve(args) -> int:
    config = load_config(args.config)
    params = resolve_params(config, args)
    t_final = float(_opt(args, config, "t_final", 300.0))
    n_samples = int(config.get("n_samples", 61))
    sample_times = np.linspace(0.0, t_final, n_samples)
    rho0 = lindblad.all_down_state(params.n_sites)
    result = lindblad.evolve(
        rho0, params, t_final, sample_times=sample_times,
        stop_when_steady=bool(config.get("stop_when_steady", True)),
    )
    rows = [
        [float(t), lindblad.mean_sz(rho), lindblad.von_neumann_entropy(rho)]
        for t, rho in zip(result.times, result.states)
    ]
    options = {"t_final": t_final, "n_samples": n_samples,
               "steady_at": result.metadata["steady_at"]}
    io.write_csv(args.out, _header("exact-evolve", params, None, options),
                 ["t", "mean_sz", "entropy"], rows)
    if args.dump_rho:
        save_density_matrix(args.dump_rho, result.final_state)
    return EXIT_OK


def cmd_exact_correlations(args) -> int:
    config = load_config(args.config)
    params = resolve_params(config, args)
    t_final = float(_opt(args, config, "t_final", 300.0))
    site = int(config.get("site", 0))
    rho0 = lindblad.all_down_state(params.n_sites)
    result = lindblad.evolve(rho0, params, t_final, sample_times=np.array([t_final]))
    rho = result.final_state
    rows = [
        [j, lindblad.connected_correlation(rho, site, j)]
        for j in range(params.n_sites)
    ]
    options = {"t_final": t_final, "site": site,
               "steady_at": result.metadata["steady_at"],
               "mean_sz": lindblad.mean_sz(rho),
               "entropy": lindblad.von_neumann_entropy(rho)}
    io.write_csv(args.out, _header("exact-correlations", params, None, options),
                 ["separation", "c_j"], rows)
    return EXIT_OK


def cmd_interactions_table(args) -> int:
    config = load_config(args.config)
    params = resolve_params(config, args)
    im = build_interaction_matrices(params)
    geom = None
    if "dd" in config:
        d = config["dd"]
        geom = DDGeometry(c3=float(d["c3"]), a=float(d["a"]), theta=float(d["theta"]))
    rows = []
    n = params.n_sites
    for j in range(n):
        for k in range(j + 1, n):
            row = [j, k, chain_distance(j, k, n, params.pbc),
                   float(im.v1_jk[j, k]), float(im.v2_jk[j, k])]
            if geom is not None:
                row.append(dd_coupling(geom, j, k))
            rows.append(row)
    cols = ["j", "k", "distance", "v1_jk", "v2_jk"] + (["dd_jk"] if geom else [])
    io.write_csv(args.out, _header("interactions-table", params, None, {}), cols, rows)
    return EXIT_OK


def save_density_matrix(path, rho: np.ndarray) -> None:
    """Binary dump: uint64 little-endian dimension, then row-major
    complex128 (little-endian re, im pairs)."""
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(np.uint64(rho.shape[0]).newbyteorder("<").tobytes())
        fh.write(rho.astype("<c16").tobytes())


def load_density_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        dim = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape(dim, dim).astype(np.complex128)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydchain",
        description="Driven-dissipative Rydberg chain: mean-field phases and exact dynamics",
    )
    parser.add_argument("--version", action="version", version=f"rydchain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, heatmap=False, dump=False):
        p.add_argument("--config", help="JSON config file or bundled recipe name")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: RYD_WORKERS or 1)")
        p.add_argument("--z", type=float, default=None, help="coordination override")
        p.add_argument("--range", choices=["NN", "NNN"], default=None,
                       help="interaction range override")
        p.add_argument("--t-final", dest="t_final", type=float, default=None)
        p.add_argument("--ensemble", type=int, default=None)
        if heatmap:
            p.add_argument("--heatmap", action="store_true", help="also write a PPM heatmap")
        if dump:
            p.add_argument("--dump-rho", dest="dump_rho", default=None,
                           help="binary dump of the final density matrix")

    handlers = {
        "mf-evolve": cmd_mf_evolve,
        "fixed-points": cmd_fixed_points,
        "stability": cmd_stability,
        "phase-diagram": cmd_phase_diagram,
        "critical-scan": cmd_critical_scan,
        "exact-evolve": cmd_exact_evolve,
        "exact-correlations": cmd_exact_correlations,
        "interactions-table": cmd_interactions_table,
    }
    for name in handlers:
        p = sub.add_parser(name)
        common(p, heatmap=(name == "phase-diagram"), dump=(name == "exact-evolve"))
        p.set_defaults(func=handlers[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (NumericalFailure, IntegrationError, CriticalPointNotFound) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
