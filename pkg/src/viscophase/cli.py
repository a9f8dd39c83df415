"""Command line entry point: ``viscophase {run,twin,sweep,check,validate}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checks import run_checks
from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .energetics import EnergyMonitor, write_energy_csv
from .relenergy import perturbation_sweep, twin_run, write_relenergy_csv, write_sweep_csv
from .state import make_initial, save_state
from .timestep import BlowUpError, run

log = logging.getLogger("viscophase")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viscophase",
        description="Pseudo-spectral viscoelastic phase separation runs and relative-energy checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", nargs="?", help="TOML run configuration (defaults if omitted)")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="initial-data seed (overrides experiment.seed)")
        p.add_argument("--dt", type=float, help="time step (overrides scheme.dt)")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    with_config(sub.add_parser("run", help="single trajectory, writes energy.csv"))
    twin = with_config(sub.add_parser("twin", help="reference/perturbed pair, writes relenergy.csv"))
    twin.add_argument("--eps", type=float, help="perturbation amplitude (overrides experiment.eps)")
    sweep = with_config(sub.add_parser("sweep", help="perturbation sweep, writes sweep.csv"))
    sweep.add_argument("--eps", type=float, nargs="+",
                       help="descending amplitudes (override experiment.amplitudes)")
    sweep.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker processes (default: hardware threads)")
    check = sub.add_parser("check", help="run the built-in oracle suite")
    check.add_argument("--out", help="directory for check.json")
    check.add_argument("-v", "--verbose", action="store_true")
    validate = sub.add_parser("validate", help="report the coefficient assumptions of a config")
    validate.add_argument("config", nargs="?")
    validate.add_argument("--out", help="directory for validation.json")
    validate.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load(args, check_assumptions: bool = True) -> RunConfig:
    if args.config is None:
        cfg = parse_config("", check_assumptions)
    else:
        cfg = load_config(args.config, check_assumptions)
    if getattr(args, "out", None):
        cfg = cfg.replace("output", directory=args.out)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace("experiment", seed=args.seed)
    if getattr(args, "dt", None) is not None:
        cfg = cfg.replace("scheme", dt=args.dt)
    eps = getattr(args, "eps", None)
    if eps is not None:
        if isinstance(eps, list):
            cfg = cfg.replace("experiment", amplitudes=tuple(eps))
        else:
            cfg = cfg.replace("experiment", eps=eps)
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output.directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}", "output.directory") from None
    if not os.access(out, os.W_OK):
        raise ConfigError("output directory is not writable", "output.directory")
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _manifest(out: Path, command: str, cfg: RunConfig, started: float, extra: dict | None = None):
    payload = {"command": command, "version": __version__,
               "wall_time_s": time.perf_counter() - started,
               "config": serialize_config(cfg), **(extra or {})}
    _write_json(out / "manifest.json", payload)


def _initial(cfg: RunConfig):
    e = cfg.experiment
    return make_initial(cfg.build_grid(), e.kind, e.seed, phi_mean=e.phi_mean, noise=e.noise,
                        velocity=e.velocity, reduced=cfg.model.reduced)


# -- subcommands ------------------------------------------------------------------------

def cmd_run(cfg: RunConfig, started: float) -> int:
    out = _outdir(cfg)
    model = cfg.build_model()
    traj = run(_initial(cfg), cfg.scheme_config(), model, cfg.scheme.t_end,
               monitors={"energy": EnergyMonitor(model)}, keep_states=False)
    energies = [e for e, _ in traj.records["energy"]]
    dissip = [d for _, d in traj.records["energy"]]
    res = write_energy_csv(out / "energy.csv", energies, dissip)
    if "snapshot" in cfg.output.formats:
        save_state(traj.final, out / "final")
    summary = {"steps": len(traj.steps), "final_time": traj.final.time,
               "max_div_u": traj.max_div_u, "max_residual": float(np.max(res)),
               "truncated": traj.truncated}
    print(f"run: {summary['steps']} steps to t={traj.final.time:.6g}, "
          f"max residual {summary['max_residual']:.3e}, max |div u| {traj.max_div_u:.3e}")
    _manifest(out, "run", cfg, started, {"summary": summary})
    return EXIT_OK


def cmd_twin(cfg: RunConfig, started: float) -> int:
    out = _outdir(cfg)
    twin = twin_run(_initial(cfg), cfg.perturbation(), cfg.build_model(), cfg.scheme_config(),
                    cfg.scheme.t_end, penalty=cfg.penalty(), reduced=cfg.model.reduced)
    write_relenergy_csv(out / "relenergy.csv", twin)
    if "snapshot" in cfg.output.formats:
        z, zbar = twin.final
        save_state(z, out / "final_perturbed")
        save_state(zbar, out / "final_reference")
    e = twin.e_rel
    summary = {"eps": cfg.experiment.eps, "E_rel_initial": float(e[0]),
               "E_rel_final": float(e[-1]), "E_rel_max": float(e.max()),
               "fitted_constant": twin.fitted_constant()}
    print(f"twin: eps={cfg.experiment.eps:g} E_rel(0)={e[0]:.6e} "
          f"E_rel(T)={e[-1]:.6e} max={e.max():.6e}")
    _manifest(out, "twin", cfg, started, {"summary": summary})
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, started: float, jobs: int) -> int:
    out = _outdir(cfg)
    e = cfg.experiment
    report = perturbation_sweep(_initial(cfg), e.amplitudes, cfg.build_model(),
                                cfg.scheme_config(), cfg.scheme.t_end,
                                seed=e.perturbation_seed, fields_=e.perturbation_fields,
                                reduced=cfg.model.reduced, penalty=cfg.penalty(),
                                jobs=max(1, min(jobs, len(e.amplitudes))))
    write_sweep_csv(out / "sweep.csv", report)
    checks = {"slope": report.slope, "quadratic": report.quadratic,
              "ratio_spread": report.ratio_spread, "ratio_uniform": report.ratio_uniform,
              "chat": report.chat, "gronwall_holds": report.gronwall_holds}
    for name, ok, detail in [
            ("E_rel(0) ~ eps^2", report.quadratic, f"slope {report.slope:.4f}"),
            ("growth ratio uniform", report.ratio_uniform, f"spread {report.ratio_spread:.4f}"),
            ("single chat bounds all", report.gronwall_holds, f"chat {report.chat:.4f}")]:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    _manifest(out, "sweep", cfg, started, {"summary": checks})
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_check(out: str | None) -> int:
    results = run_checks()
    for r in results:
        print(r.line())
    passed = all(r.passed for r in results)
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        _write_json(path / "check.json", {"passed": passed, "results": [r.to_dict() for r in results]})
    return EXIT_OK if passed else EXIT_CHECK


def cmd_validate(cfg: RunConfig, out: str | None) -> int:
    report = cfg.validate()
    for line in report.lines():
        print(line)
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        _write_json(path / "validation.json", report.to_dict())
    if cfg.model.test_mode:
        print("test mode: assumption failures are reported but not enforced")
        return EXIT_OK
    return EXIT_OK if report.passed else EXIT_CHECK


# -- driver -----------------------------------------------------------------------------

def _diagnostic(directory: str | None, payload: dict) -> None:
    """Every failure leaves a JSON record on stderr and, when possible, on disk."""
    text = json.dumps(payload, default=_json_default)
    print(text, file=sys.stderr)
    try:
        path = Path(directory or ".")
        path.mkdir(parents=True, exist_ok=True)
        (path / "diagnostic.json").write_text(text + "\n")
    except OSError:
        pass


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    cfg = None
    try:
        if args.command == "check":
            return cmd_check(args.out)
        cfg = _load(args, check_assumptions=args.command != "validate")
        if args.command == "validate":
            return cmd_validate(cfg, args.out)
        if args.command == "run":
            return cmd_run(cfg, started)
        if args.command == "twin":
            return cmd_twin(cfg, started)
        return cmd_sweep(cfg, started, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _diagnostic(getattr(args, "out", None), {"command": args.command, **exc.to_dict()})
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        directory = cfg.output.directory if cfg is not None else getattr(args, "out", None)
        _diagnostic(directory, {"command": args.command, "error": "numerical",
                                "message": str(exc), "report": exc.report})
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
