"""Batch command-line front end.

Each subcommand runs one pipeline and writes CSV tables, a JSON metadata
file (with every resolved option echoed back, so a run can be reproduced
from its own metadata), and 16-bit PGM heatmaps for phase-space grids.
Exit codes: 0 success, 1 usage error, 2 numerical failure.  Partial
outputs are removed when a run fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys as _sys
from pathlib import Path

import numpy as np

from . import __version__, classical, fluctuations, fock_oracle, positive_p
from ._kernels import backend_name
from .errors import FloqlinError, UsageError
from .floquet import build_floquet_system
from .fluctuations import WignerGrid, l1_distance, sup_distance

SUBCOMMANDS = (
    "phase-diagram",
    "bifurcation",
    "limit-cycle",
    "floquet",
    "theta-diffusion",
    "wigner-linearized",
    "wigner-exact",
    "compare",
    "pp-moments",
)

_DEFAULT_SEED = 12345


def _fmt(x):
    """Format a float with 17 significant digits (lossless for doubles)."""
    return f"{x:.17g}"


def parse_value(text):
    """Parse a numeric flag; ``sqrt:X`` means the square root of ``X``."""
    if isinstance(text, (int, float)):
        return float(text)
    if text.startswith("sqrt:"):
        inner = float(text[5:])
        if inner < 0:
            raise UsageError(f"sqrt of negative value: {text}")
        return math.sqrt(inner)
    return float(text)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class OutputSet:
    """Tracks files written by one run so failures leave nothing behind."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.paths = []

    def _write_atomic(self, name, data: bytes):
        path = self.dir / name
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
        self.paths.append(path)
        return path

    def write_text(self, name, text):
        return self._write_atomic(name, text.encode())

    def write_csv(self, name, header, rows, config_hash):
        lines = [f"# config_sha256={config_hash}", ",".join(header)]
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, float):
                    cells.append(_fmt(cell))
                elif cell is None:
                    cells.append("")
                else:
                    cells.append(str(cell))
            lines.append(",".join(cells))
        return self.write_text(name, "\n".join(lines) + "\n")

    def write_json(self, name, obj):
        return self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_pgm(self, name, grid: WignerGrid, config_hash):
        """16-bit PGM: values scaled to [0, 65535]; bounds in metadata."""
        w = grid.values
        wmin, wmax = float(w.min()), float(w.max())
        if wmax > wmin:
            scaled = np.round(65535.0 * (w - wmin) / (wmax - wmin)).astype(">u2")
        else:
            scaled = np.zeros_like(w, dtype=">u2")
        ny, nx = w.shape
        header = f"P5\n# config_sha256={config_hash}\n{nx} {ny}\n65535\n".encode()
        self._write_atomic(name, header + scaled.tobytes())
        return wmin, wmax

    def discard_all(self):
        for p in self.paths:
            try:
                p.unlink()
            except OSError:
                pass


def _config_hash(config):
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _grid_meta(grid: WignerGrid, wmin, wmax):
    return {
        "x_min": grid.x[0],
        "x_max": grid.x[-1],
        "nx": int(grid.x.size),
        "p_min": grid.p[0],
        "p_max": grid.p[-1],
        "ny": int(grid.p.size),
        "w_min": wmin,
        "w_max": wmax,
        "mass": grid.mass(),
        "row0_is_p_min": True,
    }


def _add_common(sp, *, gamma=True, seed=False):
    sp.add_argument("--out", default="out", help="output directory")
    sp.add_argument("--F", default="0.3162277660168379", help="drive amplitude (accepts sqrt:X)")
    sp.add_argument("--Delta", default="0.6324555320336759", help="detuning (accepts sqrt:X)")
    if gamma:
        sp.add_argument("--gamma", default="0.1", help="nonlinear-loss rate (accepts sqrt:X)")
    if seed:
        sp.add_argument("--seed", type=int, default=_DEFAULT_SEED, help="RNG seed")
    sp.add_argument("--ngrid", type=int, default=1024, help="cycle grid points")
    sp.add_argument("--transient", type=float, default=50.0, help="transient time before detection")
    sp.add_argument("--emit-plot-script", action="store_true", help="also write a non-normative plot script")
    sp.add_argument("--config", default=None, help="JSON metadata from a previous run; reuses its config")


def _build_parser():
    parser = _Parser(prog="floqlin", description="limit-cycle fluctuation pipelines")
    parser.add_argument("--version", action="version", version=f"floqlin {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("phase-diagram", help="region labels over the (Delta^2, I) plane")
    sp.add_argument("--out", default="out")
    sp.add_argument("--I-max", type=float, default=2.0)
    sp.add_argument("--Delta2-max", type=float, default=1.0)
    sp.add_argument("--resolution", type=int, default=200)
    sp.add_argument("--emit-plot-script", action="store_true")
    sp.add_argument("--config", default=None)

    sp = subs.add_parser("bifurcation", help="stationary branches and cycle intensities vs F^2")
    _add_common(sp)
    sp.add_argument("--f2-max", type=float, default=0.5)
    sp.add_argument("--resolution", type=int, default=41)
    sp.add_argument("--no-cycles", action="store_true", help="skip limit-cycle searches")

    sp = subs.add_parser("limit-cycle", help="locate the periodic orbit")
    _add_common(sp)

    sp = subs.add_parser("floquet", help="Floquet exponents and modes of the cycle")
    _add_common(sp)

    sp = subs.add_parser("theta-diffusion", help="offset-variance curve from the quadrature kernel")
    _add_common(sp)
    sp.add_argument("--t-end", type=float, default=120.0)
    sp.add_argument("--points", type=int, default=400)

    sp = subs.add_parser("wigner-linearized", help="mixture phase-space distribution")
    _add_common(sp)
    sp.add_argument("--n-theta", type=int, default=256)
    sp.add_argument("--grid-n", type=int, default=201)

    sp = subs.add_parser("wigner-exact", help="exact steady-state phase-space distribution")
    _add_common(sp)
    sp.add_argument("--n-max", type=int, default=None)
    sp.add_argument("--grid-n", type=int, default=201)
    sp.add_argument("--steady-tol", type=float, default=1e-9)

    sp = subs.add_parser("compare", help="linearized vs exact distributions on a shared grid")
    _add_common(sp)
    sp.add_argument("--n-theta", type=int, default=256)
    sp.add_argument("--n-max", type=int, default=None)
    sp.add_argument("--grid-n", type=int, default=201)
    sp.add_argument("--steady-tol", type=float, default=1e-9)

    sp = subs.add_parser("pp-moments", help="stochastic-ensemble moment tables")
    _add_common(sp, seed=True)
    sp.add_argument("--n-traj", type=int, default=10000)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--t-end", type=float, default=40.0)
    return parser


def _resolve_config(args):
    """Echoable configuration (plain JSON scalars only)."""
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        config = dict(loaded["config"] if "config" in loaded else loaded)
    else:
        config = {}
        for key, val in vars(args).items():
            if key in ("command", "config", "out", "emit_plot_script"):
                continue
            if isinstance(val, str):
                val = parse_value(val)
            config[key] = val
    env_seed = os.environ.get("FLOQLIN_SEED")
    if env_seed is not None and "seed" in config:
        config["seed"] = int(env_seed)
    config["command"] = args.command
    config["version"] = __version__
    config["backend"] = backend_name()
    return config


def _model(config):
    return classical.ModelParams(
        F=config["F"], Delta=config["Delta"], gamma=config.get("gamma", 0.1)
    )


def _cycle_and_system(config):
    cyc = classical.find_limit_cycle(
        _model(config), ngrid=int(config.get("ngrid", 1024)),
        transient=config.get("transient", 50.0),
    )
    return cyc, build_floquet_system(cyc)


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Non-normative convenience plot for floqlin outputs. Not part of the
# verified interface; edit freely.
import json, sys
import numpy as np
import matplotlib.pyplot as plt

meta = json.load(open(sys.argv[1]))
print(json.dumps(meta, indent=2))
for name in meta.get("outputs", []):
    if name.endswith(".csv"):
        data = np.genfromtxt(meta["outdir"] + "/" + name, delimiter=",", names=True, skip_header=1)
        cols = data.dtype.names
        plt.figure(); plt.plot(data[cols[0]], data[cols[1]], ".-")
        plt.xlabel(cols[0]); plt.ylabel(cols[1]); plt.title(name)
plt.show()
"""


def _run_phase_diagram(config, out: OutputSet, h):
    res = int(config["resolution"])
    d2 = np.linspace(0.0, config["Delta2_max"], res)
    iv = np.linspace(0.0, config["I_max"], res)
    rows = []
    for d2v in d2:
        delta = math.sqrt(d2v)
        for i in iv:
            rows.append((float(d2v), float(i), classical.classify(i, delta).label))
    out.write_csv("phase_diagram.csv", ["delta2", "intensity", "label"], rows, h)
    return {"rows": len(rows), "outputs": ["phase_diagram.csv"]}


def _run_bifurcation(config, out: OutputSet, h):
    scan = classical.bifurcation_scan(
        config["Delta"],
        config["f2_max"],
        int(config["resolution"]),
        gamma=config.get("gamma", 0.1),
        with_cycles=not config.get("no_cycles", False),
    )
    rows = []
    for row in scan:
        for s in row.states:
            rows.append(
                (
                    row.f2, s.intensity, s.phase,
                    s.lam_plus.real, s.lam_plus.imag, s.lam_minus.real, s.lam_minus.imag,
                    int(s.stable), s.damping, row.cycle_mean_intensity, row.cycle_period,
                )
            )
        if not row.states:
            rows.append((row.f2, None, None, None, None, None, None, None, None,
                         row.cycle_mean_intensity, row.cycle_period))
    out.write_csv(
        "bifurcation.csv",
        ["f2", "intensity", "phase", "re_lam_plus", "im_lam_plus", "re_lam_minus",
         "im_lam_minus", "stable", "damping", "cycle_mean_intensity", "cycle_period"],
        rows, h,
    )
    return {"rows": len(rows), "outputs": ["bifurcation.csv"]}


def _run_limit_cycle(config, out: OutputSet, h):
    cyc = classical.find_limit_cycle(
        _model(config), ngrid=int(config.get("ngrid", 1024)),
        transient=config.get("transient", 50.0),
    )
    rows = [
        (t, b.real, b.imag, d.real, d.imag)
        for t, b, d in zip(cyc.tau, cyc.samples, cyc.derivatives)
    ]
    out.write_csv("cycle.csv", ["tau", "re_beta", "im_beta", "re_dbeta", "im_dbeta"], rows, h)
    return {
        "period": cyc.period,
        "closure_residual": cyc.residual,
        "mean_intensity": cyc.mean_intensity(),
        "outputs": ["cycle.csv"],
    }


def _run_floquet(config, out: OutputSet, h):
    cyc, sysf = _cycle_and_system(config)
    rows = []
    for k in range(cyc.ngrid):
        rows.append(
            (cyc.tau[k],)
            + tuple(float(f) for pair in zip(sysf.p0[k].real, sysf.p0[k].imag) for f in pair)
            + tuple(float(f) for pair in zip(sysf.p1[k].real, sysf.p1[k].imag) for f in pair)
            + tuple(float(f) for pair in zip(sysf.q0_dag[k].real, sysf.q0_dag[k].imag) for f in pair)
            + tuple(float(f) for pair in zip(sysf.q1_dag[k].real, sysf.q1_dag[k].imag) for f in pair)
        )
    header = ["tau"]
    for mode in ("p0", "p1", "q0dag", "q1dag"):
        for comp in ("0", "1"):
            header += [f"re_{mode}_{comp}", f"im_{mode}_{comp}"]
    out.write_csv("floquet_modes.csv", header, rows, h)
    return {
        "period": cyc.period,
        "mu0": [sysf.mu0.real, sysf.mu0.imag],
        "mu1": [sysf.mu1.real, sysf.mu1.imag],
        "mean_trace": sysf.mean_trace,
        "goldstone_residual": sysf.goldstone_residual,
        "periodicity_residual": sysf.periodicity_residual,
        "orthogonality_residual": sysf.orthogonality_residual,
        "outputs": ["floquet_modes.csv"],
    }


def _run_theta_diffusion(config, out: OutputSet, h):
    _, sysf = _cycle_and_system(config)
    times = np.linspace(0.0, config["t_end"], int(config["points"]))
    curve = fluctuations.theta_variance_series(sysf, config["gamma"], times)
    rows = list(zip(curve.times.tolist(), curve.variances.tolist()))
    out.write_csv("theta_variance.csv", ["tau", "variance"], rows, h)
    return {
        "coarse_slope": curve.coarse_slope,
        "mean_kernel": curve.mean_kernel,
        "outputs": ["theta_variance.csv"],
    }


def _run_wigner_linearized(config, out: OutputSet, h):
    _, sysf = _cycle_and_system(config)
    n = int(config["grid_n"])
    grid = fluctuations.mixture_wigner(
        sysf, config["gamma"], n_theta=int(config["n_theta"]), nx=n, ny=n
    )
    wmin, wmax = out.write_pgm("wigner_linearized.pgm", grid, h)
    return {"grid": _grid_meta(grid, wmin, wmax), "outputs": ["wigner_linearized.pgm"]}


def _oracle_params(config):
    n_max = config.get("n_max")
    return fock_oracle.OracleParams(
        F=config["F"],
        Delta=config["Delta"],
        gamma=config.get("gamma", 0.1),
        n_max=int(n_max) if n_max is not None else None,
        steady_tol=config.get("steady_tol", 1e-9),
    )


def _run_wigner_exact(config, out: OutputSet, h):
    state = fock_oracle.evolve_steady(_oracle_params(config))
    n = int(config["grid_n"])
    grid = fock_oracle.exact_wigner(state, nx=n, ny=n)
    wmin, wmax = out.write_pgm("wigner_exact.pgm", grid, h)
    return {
        "grid": _grid_meta(grid, wmin, wmax),
        "n_max": state.n_max,
        "leakage": state.leakage,
        "steady_meta": {k: float(v) for k, v in state.meta.items()},
        "outputs": ["wigner_exact.pgm"],
    }


def _run_compare(config, out: OutputSet, h):
    _, sysf = _cycle_and_system(config)
    n = int(config["grid_n"])
    lin = fluctuations.mixture_wigner(
        sysf, config["gamma"], n_theta=int(config["n_theta"]), nx=n, ny=n
    )
    state = fock_oracle.evolve_steady(_oracle_params(config))
    exact = fock_oracle.exact_wigner(state, grid=lin)
    wmin_l, wmax_l = out.write_pgm("wigner_linearized.pgm", lin, h)
    wmin_e, wmax_e = out.write_pgm("wigner_exact.pgm", exact, h)
    return {
        "l1_distance": l1_distance(lin, exact),
        "sup_distance": sup_distance(exact, lin),
        "linearized": _grid_meta(lin, wmin_l, wmax_l),
        "exact": _grid_meta(exact, wmin_e, wmax_e),
        "n_max": state.n_max,
        "outputs": ["wigner_linearized.pgm", "wigner_exact.pgm"],
    }


def _run_pp_moments(config, out: OutputSet, h):
    params = _model(config)
    stats = positive_p.simulate_ensemble(
        params,
        n_traj=int(config["n_traj"]),
        dt=config["dt"],
        t_end=config["t_end"],
        seed=int(config["seed"]),
    )
    rows = []
    for i, t in enumerate(stats.times):
        row = [float(t)]
        for key in positive_p.MOMENT_KEYS:
            row += [stats.moments[key][i].real, stats.moments[key][i].imag]
        rows.append(tuple(row))
    header = ["tau"]
    for m, nn in positive_p.MOMENT_KEYS:
        header += [f"re_m{m}{nn}", f"im_m{m}{nn}"]
    out.write_csv("pp_moments.csv", header, rows, h)
    steady = {
        f"m{m}{n}": {
            "value": [stats.steady[(m, n)][0].real, stats.steady[(m, n)][0].imag],
            "stderr": [stats.steady[(m, n)][1].real, stats.steady[(m, n)][1].imag],
        }
        for m, n in positive_p.MOMENT_KEYS
    }
    return {
        "steady": steady,
        "divergent": stats.divergent,
        "window": list(stats.window),
        "outputs": ["pp_moments.csv"],
    }


_RUNNERS = {
    "phase-diagram": _run_phase_diagram,
    "bifurcation": _run_bifurcation,
    "limit-cycle": _run_limit_cycle,
    "floquet": _run_floquet,
    "theta-diffusion": _run_theta_diffusion,
    "wigner-linearized": _run_wigner_linearized,
    "wigner-exact": _run_wigner_exact,
    "compare": _run_compare,
    "pp-moments": _run_pp_moments,
}


def run(argv):
    """Execute one subcommand; returns the process exit status."""
    try:
        args = _build_parser().parse_args(argv)
        config = _resolve_config(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=_sys.stderr)
        return 1
    out = OutputSet(args.out)
    h = _config_hash(config)
    try:
        results = _RUNNERS[args.command](config, out, h)
    except FloqlinError as exc:
        out.discard_all()
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 2
    meta = {
        "command": args.command,
        "config": config,
        "config_sha256": h,
        "outdir": str(out.dir),
        "results": results,
        "outputs": results.get("outputs", []),
    }
    out.write_json(f"{args.command.replace('-', '_')}_meta.json", meta)
    if getattr(args, "emit_plot_script", False):
        out.write_text("plot.py", _PLOT_SCRIPT)
    print(json.dumps({"status": "ok", "outdir": str(out.dir), "config_sha256": h}))
    return 0


def main():
    return run(_sys.argv[1:])


if __name__ == "__main__":
    _sys.exit(main())
