"""
Command-line front end.

Every command writes its data files plus ``manifest.json`` (the fully
resolved run parameters) into ``--out``. CSV files start with a ``#`` block
holding units, the column layout and the SHA-256 of the manifest, followed by
a plain header row; the numbers are formatted deterministically, so identical
manifests give byte-identical files.

Exit status: 0 success, 1 acceptance failure (``report --check``),
2 invalid input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, acceptance, analysis, lattice, markovian, memory
from .kernels import BandEdgeError
from .model import ConfigError, Setup, centering_offset, scenario, setup_from_dict, setup_to_dict

COMMANDS = ("gap-scan", "branches", "bics", "dynamics", "compare", "report")
UNITS = "energies and rates in units of xi, times in units of 1/xi"


class SolverFailure(RuntimeError):
    pass


def _fmt(x) -> str:
    return format(float(x) + 0.0, ".12g")


def _parse_init(text: str, n_atoms: int) -> np.ndarray:
    """``atom:<k>`` (1-based) or a comma-separated list of complex amplitudes."""
    text = text.strip()
    if text.startswith("atom:"):
        try:
            k = int(text[5:])
        except ValueError:
            raise ConfigError(f"bad --init {text!r}") from None
        if not 1 <= k <= n_atoms:
            raise ConfigError(f"--init atom index {k} outside 1..{n_atoms}")
        alpha = np.zeros(n_atoms, dtype=complex)
        alpha[k - 1] = 1.0
        return alpha
    try:
        alpha = np.array([complex(x.strip().replace(" ", "")) for x in text.split(",")])
    except ValueError:
        raise ConfigError(f"bad --init {text!r}") from None
    if alpha.size != n_atoms:
        raise ConfigError(f"--init needs {n_atoms} amplitudes, got {alpha.size}")
    if abs(np.linalg.norm(alpha) - 1.0) > 1e-8:
        raise ConfigError(f"--init amplitudes must be normalised (norm {np.linalg.norm(alpha):.6g})")
    return alpha


def _resolve_setup(args, n_sites: int | None = None) -> Setup:
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        setup = setup_from_dict(data)
        changes = {}
        if args.omega is not None:
            changes["omega"] = args.omega
        if args.g is not None:
            changes["g"] = args.g
        if changes:
            setup = setup.with_atoms(**changes)
        size = n_sites or args.n_sites
        if size is not None and size != setup.waveguide.n_sites:
            sites = [a.sites for a in setup.atoms]
            shift = centering_offset(sites, size) - (min(a.n for a in setup.atoms) - 1)
            setup = Setup(setup.waveguide.__class__(setup.waveguide.omega_c, setup.waveguide.xi,
                                                    size, setup.waveguide.boundary),
                          tuple(a.shifted(shift) for a in setup.atoms))
        return setup
    return scenario(
        args.scenario,
        omega=0.0 if args.omega is None else args.omega,
        g=0.1 if args.g is None else args.g,
        n_sites=n_sites or args.n_sites or 501,
    )


def _sites_for_horizon(setup: Setup, t_end: float, safety: float = 0.9) -> int:
    lo, hi = setup.span
    margin = int(np.ceil(t_end * 2.0 * setup.waveguide.xi / safety)) + 2
    size = (hi - lo + 1) + 2 * margin
    return size + (1 - size % 2)


class Output:
    """Collects the manifest and writes data files into the output directory."""

    def __init__(self, out: Path, manifest: dict):
        self.out = out
        self.manifest = manifest
        out.mkdir(parents=True, exist_ok=True)
        text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        self.digest = hashlib.sha256(text.encode()).hexdigest()
        (out / "manifest.json").write_text(text)

    def csv(self, name: str, columns: list[str], rows, notes: tuple[str, ...] = ()) -> Path:
        lines = [
            f"# gawq {self.manifest['command']}",
            f"# units: {UNITS}",
            f"# manifest-sha256: {self.digest}",
        ]
        lines += [f"# {n}" for n in notes]
        lines.append("# columns: " + " ".join(f"{i}={c}" for i, c in enumerate(columns, start=1)))
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
        path = self.out / name
        path.write_text("\n".join(lines) + "\n")
        return path

    def json(self, name: str, payload) -> Path:
        path = self.out / name
        path.write_text(json.dumps(payload, sort_keys=True, indent=2, default=_jsonable) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _manifest(args, setup: Setup | None, **extra) -> dict:
    data = {
        "command": args.command,
        "scenario": args.scenario,
        "config": args.config,
        "version": __version__,
        "deterministic": True,
    }
    for key in ("omega", "g", "n_sites", "t_end", "dt", "tol_im", "tol_zero",
                "omega_min", "omega_max", "points", "init", "check", "vectors"):
        if hasattr(args, key):
            data[key] = getattr(args, key)
    if setup is not None:
        data["setup"] = setup_to_dict(setup)
    data.update(extra)
    return data


def cmd_gap_scan(args) -> int:
    setup = _resolve_setup(args)
    grid = np.linspace(args.omega_min, args.omega_max, args.points)
    target = setup if args.config else args.scenario
    g = 0.1 if args.g is None else args.g
    result = markovian.gap_scan(target, grid, g=g, n_sites=setup.waveguide.n_sites,
                                tol_zero=args.tol_zero, full=True)
    out = Output(Path(args.out), _manifest(args, setup))
    out.csv("gap_scan.csv", ["omega_over_xi", "gap_over_xi"],
            [(w, s.gap) for w, s in result])
    if args.spectra:
        out.json("spectra.json", [
            {"omega": w, "gap": s.gap, "zero_multiplicity": s.zero_multiplicity,
             "eigenvalues": [[z.real, z.imag] for z in s.eigenvalues]}
            for w, s in result
        ])
    gaps = np.array([s.gap for _, s in result])
    print(f"{len(result)} points, gap range [{gaps.min():.3e}, {gaps.max():.3e}]")
    return 0


def cmd_branches(args) -> int:
    setup = _resolve_setup(args)
    points = int(round(args.t_end / args.dt)) + 1
    times = np.linspace(0.0, args.t_end, points)
    try:
        branches = memory.track_branches(setup, times)
    except RuntimeError as exc:
        raise SolverFailure(str(exc)) from exc
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", memory.UnsettledBranchWarning)
        count = memory.count_bics(branches, tol_im=args.tol_im)
    size = setup.n_atoms
    cols = ["t"] + [f"re_eta_{i}" for i in range(1, size + 1)] + [f"im_eta_{i}" for i in range(1, size + 1)]
    rows = [[t, *branches.eta[:, k].real, *branches.eta[:, k].imag] for k, t in enumerate(times)]
    out = Output(Path(args.out), _manifest(args, setup))
    out.csv("branches.csv", cols, rows, notes=(f"bound-state count (|Im eta| <= {args.tol_im:g}): {count}",))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"bound states from memory-kernel branches: {count}")
    return 0


def cmd_bics(args) -> int:
    setup = _resolve_setup(args)
    ham = lattice.build_hamiltonian(setup)
    bics = lattice.find_bound_states(ham, setup)
    size = setup.n_atoms
    cols = ["n", "energy", "localization", "residual"]
    cols += [f"re_overlap_{i}" for i in range(1, size + 1)] + [f"im_overlap_{i}" for i in range(1, size + 1)]
    rows = [[str(n), b.energy, b.localization, b.residual, *b.atomic_overlaps.real, *b.atomic_overlaps.imag]
            for n, b in enumerate(bics, start=1)]
    out = Output(Path(args.out), _manifest(args, setup))
    out.csv("bics.csv", cols, rows)
    if args.vectors:
        out.json("bic_vectors.json", [
            {"n": n, "energy": b.energy,
             "atoms": [[i + 1, z.real, z.imag] for i, z in enumerate(b.vector.alpha)],
             "photon": [[j + 1, z.real, z.imag] for j, z in enumerate(b.vector.beta) if abs(z) > 1e-14]}
            for n, b in enumerate(bics, start=1)
        ])
    print(f"{len(bics)} bound state(s) in the band")
    for n, b in enumerate(bics, start=1):
        print(f"  {n}: E = {b.energy:+.6f}  overlaps = {np.array2string(b.atomic_overlaps.real, precision=4)}")
    return 0


def _dynamics_setup(args) -> Setup:
    setup = _resolve_setup(args)
    if args.n_sites is None and lattice.light_cone_horizon(setup) < args.t_end:
        setup = _resolve_setup(args, n_sites=_sites_for_horizon(setup, args.t_end))
    elif lattice.light_cone_horizon(setup) < args.t_end:
        print(f"warning: t_end {args.t_end:g} exceeds the reflection-free horizon "
              f"{lattice.light_cone_horizon(setup):.4g}", file=sys.stderr)
    if setup.n_atoms + setup.waveguide.n_sites > lattice.MAX_DIM:
        raise ConfigError(f"lattice of {setup.waveguide.n_sites} sites exceeds the dense limit")
    return setup


def _simulate(setup: Setup, alpha0: np.ndarray, times: np.ndarray):
    size = setup.n_atoms
    ham = lattice.build_hamiltonian(setup)
    psi0 = np.zeros(ham.shape[0], dtype=complex)
    psi0[:size] = alpha0
    try:
        prop = lattice.SpectralPropagator(ham)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(str(exc)) from exc
    exact = lattice.atomic_populations(setup, psi0, times, prop)
    ww = np.abs(memory.ww_evolve(setup, alpha0, times)) ** 2
    bics = lattice.find_bound_states(ham, setup)
    pred = analysis.long_time_prediction(bics, psi0)
    bic = pred.populations(times) if bics else np.zeros_like(exact)
    return exact, ww, bic, bics, pred


def cmd_dynamics(args) -> int:
    setup = _dynamics_setup(args)
    alpha0 = _parse_init(args.init, setup.n_atoms)
    times = np.linspace(0.0, args.t_end, int(round(args.t_end / args.dt)) + 1)
    exact, ww, bic, bics, pred = _simulate(setup, alpha0, times)
    size = setup.n_atoms
    cols = ["t"] + [f"{kind}_{i}" for kind in ("exact", "ww", "bic") for i in range(1, size + 1)]
    rows = [[t, *exact[k], *ww[k], *bic[k]] for k, t in enumerate(times)]
    out = Output(Path(args.out), _manifest(args, setup))
    out.csv("dynamics.csv", cols, rows, notes=(
        f"n_sites {setup.waveguide.n_sites}, horizon {_fmt(lattice.light_cone_horizon(setup))}",
        f"regime {pred.kind.value}, {len(bics)} bound state(s)",
    ))
    print(f"final total population: exact {exact[-1].sum():.3e}, ww {ww[-1].sum():.3e}")
    return 0


def cmd_compare(args) -> int:
    setup = _dynamics_setup(args)
    alpha0 = _parse_init(args.init, setup.n_atoms)
    t_end = min(args.t_end, lattice.light_cone_horizon(setup))
    times = np.linspace(0.0, t_end, int(round(t_end / args.dt)) + 1)
    exact, ww, _, bics, pred = _simulate(setup, alpha0, times)
    metrics = analysis.compare_trajectories(
        analysis.Trajectory(times, exact), analysis.Trajectory(times, ww),
        pred if bics else None)
    payload = {"window": [0.0, t_end], "n_bics": len(bics), "regime": pred.kind.value,
               "periods": list(pred.periods), **metrics.as_dict()}
    out = Output(Path(args.out), _manifest(args, setup))
    out.json("metrics.json", payload)
    print(json.dumps(payload, sort_keys=True, default=_jsonable))
    return 0


def _scenario_report(label: str, args) -> dict:
    setup = scenario(label, n_sites=args.n_sites or 501)
    gap = markovian.spectrum(markovian.build_liouvillian(setup), tol_zero=args.tol_zero).gap
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", memory.UnsettledBranchWarning)
        ww_count = memory.count_bics(memory.track_branches(setup), tol_im=args.tol_im)
    ham = lattice.build_hamiltonian(setup)
    bics = lattice.find_bound_states(ham, setup)
    horizon = lattice.light_cone_horizon(setup)
    times = np.linspace(0.0, horizon, int(horizon / args.dt) + 1)
    alpha0 = np.zeros(setup.n_atoms, dtype=complex)
    alpha0[1] = 1.0
    exact, ww, _, _, pred = _simulate(setup, alpha0, times)
    metrics = analysis.compare_trajectories(
        analysis.Trajectory(times, exact), analysis.Trajectory(times, ww), pred if bics else None)
    return {
        "gap_at_zero": gap,
        "memory_count": ww_count,
        "lattice_count": len(bics),
        "dark_modes": markovian.dark_mode_count(setup),
        "energies": [b.energy for b in bics],
        "overlaps": [b.atomic_overlaps.real.tolist() for b in bics],
        "regime": pred.kind.value,
        "metrics": metrics.as_dict(),
    }


def cmd_report(args) -> int:
    labels = ("a", "b", "c", "d")
    with ThreadPoolExecutor(max_workers=markovian._thread_count()) as pool:
        parts = dict(zip(labels, pool.map(lambda lab: _scenario_report(lab, args), labels)))
    out = Output(Path(args.out), _manifest(args, None))
    out.json("report.json", parts)
    for lab, part in parts.items():
        print(f"({lab}) gap {part['gap_at_zero']:.2e}  bound states memory/lattice "
              f"{part['memory_count']}/{part['lattice_count']}  regime {part['regime']}")
    if not args.check:
        return 0
    results = acceptance.run_all()
    for r in results:
        print(r.line())
    out.json("acceptance.json", [
        {"criterion": r.number, "title": r.title, "passed": r.passed, "detail": r.detail}
        for r in results
    ])
    return 0 if all(r.passed for r in results) else 1


HANDLERS = {
    "gap-scan": cmd_gap_scan,
    "branches": cmd_branches,
    "bics": cmd_bics,
    "dynamics": cmd_dynamics,
    "compare": cmd_compare,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gawq",
        description="Giant atoms on a coupled-resonator waveguide: gaps, bound states and dynamics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--scenario", choices=["a", "b", "c", "d"], default=None,
                     help="reference geometry (default a)")
    src.add_argument("--config", help="JSON geometry file")
    common.add_argument("--omega", type=float, default=None, help="common atomic frequency")
    common.add_argument("--g", type=float, default=None, help="common coupling strength")
    common.add_argument("--n-sites", type=int, default=None, help="resonators in the lattice")
    common.add_argument("--tol-im", type=float, default=1e-3, help="|Im eta| threshold")
    common.add_argument("--tol-zero", type=float, default=markovian.TOL_ZERO,
                        help="zero-eigenvalue clustering tolerance")
    common.add_argument("--out", default="gawq-out", help="output directory")

    p = sub.add_parser("gap-scan", parents=[common], help="Liouvillian gap versus atomic frequency")
    p.add_argument("--omega-min", type=float, default=-1.0)
    p.add_argument("--omega-max", type=float, default=1.0)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--spectra", action="store_true", help="also dump full spectra as JSON")

    p = sub.add_parser("branches", parents=[common], help="eigenvalue branches of the memory matrix")
    p.add_argument("--t-end", type=float, default=200.0)
    p.add_argument("--dt", type=float, default=0.1)

    p = sub.add_parser("bics", parents=[common], help="bound states in the continuum")
    p.add_argument("--vectors", action="store_true", help="also dump state vectors as JSON")

    for name, text in (("dynamics", "exact, memory-kernel and bound-state populations"),
                       ("compare", "deviation metrics between exact and memory-kernel dynamics")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--t-end", type=float, default=200.0)
        p.add_argument("--dt", type=float, default=0.1)
        p.add_argument("--init", default="atom:2", help="atom:<k> or comma-separated amplitudes")

    p = sub.add_parser("report", parents=[common], help="summary of all four reference geometries")
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--check", action="store_true", help="run the acceptance suite; exit 1 on failure")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.scenario is None and args.config is None:
        args.scenario = "a"
    for key in ("t_end", "dt", "points"):
        if getattr(args, key, 1) is not None and getattr(args, key, 1) <= 0:
            print(f"error: --{key.replace('_', '-')} must be positive", file=sys.stderr)
            return 2
    try:
        return HANDLERS[args.command](args)
    except (ConfigError, BandEdgeError, lattice.DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverFailure, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
