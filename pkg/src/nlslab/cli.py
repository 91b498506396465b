"""Command-line entry point: ``nlslab <command> [--config file.toml] [flags]``.

Flags override config-file keys. Every run writes ``manifest.json`` into the
output directory; ``nlslab replay <manifest>`` reruns it.
"""
from __future__ import annotations

import argparse
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigInvalid, FormatError, NLSLabError

log = logging.getLogger("nlslab")

COMMANDS = ("ground-state", "spectrum", "evolve", "probe", "sample-manifold", "dispersive-check")

DEFAULTS = {
    "alpha": None,
    "grid": 48,
    "box": 16.0,
    "radial_points": 8192,
    "delta": 1e-2,
    "epsilon": 1e-2,
    "q": 1.0,
    "beta": 0.5,
    "T": None,
    "dt": 0.1,
    "seed": 0,
    "out": "nlslab-out",
    "direction": "bump",
    "correct": False,
    "offset": 0.0,
    "tol": 1e-9,
    "eig_tol": 1e-6,
    "scales": [4e-3, 8e-3, 1.6e-2],
    "n_directions": 2,
    "stride": 2,
    "sponge": 3.0,
}
# frequencies that the default boxes resolve
DEFAULT_ALPHA = {"ground-state": 1.0, "dispersive-check": 1.0}
DESK_ALPHA = 0.08

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_BLOWUP, EXIT_IO = 0, 2, 3, 4, 5


def _load_toml(path: str) -> dict:
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"config {path} is not valid TOML: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in data.items()}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlslab", description="Ground states, spectra and centre-stable probes "
                                                           "for the focusing cubic NLS in 3D.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--alpha", type=float)
        p.add_argument("--grid", type=int)
        p.add_argument("--box", type=float)
        p.add_argument("--radial-points", dest="radial_points", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--q", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--T", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--direction", choices=("bump", "random"))
        p.add_argument("--correct", action="store_true", default=None)
        p.add_argument("--offset", type=float, help="added to h after correction, in units of |h|")
        p.add_argument("--tol", type=float)
        p.add_argument("--eig-tol", dest="eig_tol", type=float)
        p.add_argument("--scales", type=float, nargs="+")
        p.add_argument("--n-directions", dest="n_directions", type=int)
        p.add_argument("--stride", type=int)
        p.add_argument("--sponge", type=float)
    rp = sub.add_parser("replay")
    rp.add_argument("manifest")
    rp.add_argument("--out")
    return ap


def resolve_config(command: str, args: dict) -> dict:
    cfg = dict(DEFAULTS)
    if args.get("config"):
        cfg.update(_load_toml(args["config"]))
    for k, v in args.items():
        if k in ("config", "command", "verbose") or v is None:
            continue
        cfg[k] = v
    if cfg.get("alpha") is None:
        cfg["alpha"] = DEFAULT_ALPHA.get(command, DESK_ALPHA)
    cfg["command"] = command
    unknown = set(cfg) - set(DEFAULTS) - {"command"}
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    if not cfg["alpha"] > 0:
        raise ConfigInvalid(f"alpha must be positive (got {cfg['alpha']})")
    if cfg["grid"] < 4 or cfg["grid"] % 2:
        raise ConfigInvalid(f"grid must be even and >= 4 (got {cfg['grid']})")
    if not cfg["box"] > 0:
        raise ConfigInvalid(f"box must be positive (got {cfg['box']})")
    if not 1.0 <= cfg["q"] < 4.0 / 3.0:
        raise ConfigInvalid(f"q must lie in [1, 4/3) (got {cfg['q']})")
    if not cfg["dt"] > 0:
        raise ConfigInvalid("dt must be positive")
    if cfg["T"] is not None and not cfg["T"] > 0:
        raise ConfigInvalid("T must be positive")
    if cfg["epsilon"] < 0 or cfg["delta"] <= 0:
        raise ConfigInvalid("epsilon must be >= 0 and delta > 0")


def _manifest(cfg: dict, extra: dict) -> dict:
    return {
        "config": cfg,
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "grid": {"n": cfg["grid"], "L": cfg["box"], "h": 2 * cfg["box"] / cfg["grid"]},
        "tolerances": {"tol": cfg["tol"], "eig_tol": cfg["eig_tol"]},
        **extra,
    }


def _direction(setup, cfg: dict, index: int = 0):
    from .probe import bump_direction
    if cfg["direction"] == "bump":
        return bump_direction(setup, seed=None if index == 0 else cfg["seed"] + index)
    rng = np.random.Generator(np.random.Philox(cfg["seed"] + index))
    g = setup.grid
    s = 1.0 / math.sqrt(setup.alpha)
    raw = (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)) * np.exp(-(g.radius / (3 * s)) ** 2)
    R = setup.admissible(raw)
    return R / g.norm(R)


def run(cfg: dict) -> tuple[int, dict]:
    """Dispatch one command; returns (exit code, summary)."""
    from . import io
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FormatError(f"cannot create output directory {out}: {exc}") from exc
    cmd = cfg["command"]
    t0 = time.time()
    code = EXIT_OK
    if cmd == "ground-state":
        from .ground_state import RadialGrid, solve_ground_state
        p = solve_ground_state(cfg["alpha"], RadialGrid.default(cfg["alpha"], cfg["radial_points"]), tol=cfg["tol"])
        io.write_profile(p, out / "profile.nlsp")
        summary = {"alpha": p.alpha, "central_value": p.central_value, "mass": p.mass(),
                   "residual": p.residual_norm(), "r_max": p.grid.r_max, "n_points": p.grid.n_points}
        io.write_json(summary, out / "ground_state.json")
    elif cmd == "spectrum":
        from .probe import ProbeSetup
        from .spectral import spectral_report
        S = ProbeSetup.build(cfg["alpha"], cfg["grid"], cfg["box"], cfg["eig_tol"])
        summary = spectral_report(S.basis, S.spectral, {"grid": cfg["grid"], "box": cfg["box"],
                                                        "gram_condition": S.projections.cond})
        io.write_json(summary, out / "spectrum.json")
    elif cmd == "evolve":
        from .evolution import EvolutionConfig, evolve_nls, norm_diagnostics
        from .grid import SpinorField
        from .probe import ProbeSetup
        S = ProbeSetup.build(cfg["alpha"], cfg["grid"], cfg["box"], cfg["eig_tol"])
        R0 = cfg["epsilon"] * math.sqrt(S.ground.mass()) * _direction(S, cfg)
        T = cfg["T"] if cfg["T"] is not None else 6.0 / S.spectral.sigma
        ecfg = EvolutionConfig(dt=cfg["dt"], T=T, stride=cfg["stride"])
        psi, tr = evolve_nls(S.W + R0, S.grid, ecfg)
        tr.write_csv(out / "norms.csv")
        io.write_field(SpinorField.from_scalar(S.grid, psi), out / "final.nlsf")
        summary = {"T": T, "blowup": tr.blowup, **norm_diagnostics(tr, cfg["beta"], cfg["q"])}
        io.write_json(summary, out / "evolve.json")
        code = EXIT_BLOWUP if tr.blowup else EXIT_OK
    elif cmd == "probe":
        from .probe import ProbeConfig, ProbeSetup, probe, unstable_correction
        S = ProbeSetup.build(cfg["alpha"], cfg["grid"], cfg["box"], cfg["eig_tol"])
        pc = ProbeConfig(delta=cfg["delta"], T=cfg["T"], dt=cfg["dt"], q=cfg["q"], beta=cfg["beta"],
                         stride=cfg["stride"])
        R0 = cfg["epsilon"] * math.sqrt(S.ground.mass()) * _direction(S, cfg)
        h = unstable_correction(R0, pc, S) if cfg["correct"] else 0.0
        h = h + cfg["offset"] * abs(h)
        rep = probe(R0, h, pc, S)
        summary = rep.to_dict()
        io.write_json(summary, out / "probe.json")
        code = EXIT_BLOWUP if rep.classification == "Blowup" else EXIT_OK
    elif cmd == "sample-manifold":
        from .probe import ProbeConfig, ProbeSetup, sample_manifold
        S = ProbeSetup.build(cfg["alpha"], cfg["grid"], cfg["box"], cfg["eig_tol"])
        pc = ProbeConfig(delta=cfg["delta"], T=cfg["T"], dt=cfg["dt"], q=cfg["q"], beta=cfg["beta"],
                         stride=cfg["stride"])
        dirs = [_direction(S, cfg, i) for i in range(cfg["n_directions"])]
        rows = sample_manifold(dirs, cfg["scales"], pc, S)
        io.write_rows_csv(rows, out / "manifold.csv")
        summary = {"rows": rows}
    elif cmd == "dispersive-check":
        from .dispersive import DispersiveCheckConfig, two_time_dispersive_check
        from .probe import ProbeSetup
        S = ProbeSetup.build(cfg["alpha"], cfg["grid"], cfg["box"], cfg["eig_tol"])
        dcfg = DispersiveCheckConfig(dt=cfg["dt"], sponge=cfg["sponge"])
        summary = two_time_dispersive_check(S.projections, S.op, dcfg)
        io.write_json(summary, out / "dispersive.json")
    else:  # pragma: no cover - argparse restricts the choices
        raise ConfigInvalid(f"unknown command {cmd}")
    io.write_json(_manifest(cfg, {"elapsed_s": time.time() - t0, "exit_code": code}), out / "manifest.json")
    return code, summary


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if ns.command == "replay":
            from .io import read_json
            cfg = dict(read_json(ns.manifest)["config"])
            if ns.out:
                cfg["out"] = ns.out
            validate(cfg)
        else:
            cfg = resolve_config(ns.command, vars(ns))
        code, summary = run(cfg)
    except NLSLabError as exc:
        print(f"nlslab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"nlslab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("finished %s with exit code %d", cfg["command"], code)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
