"""Command-line front end. Every run reads one YAML config, merges it over the
embedded defaults, writes its outputs plus ``manifest.json`` and exits with

    0  all checks passed
    1  a verification check failed
    2  usage or configuration error
"""

from __future__ import annotations

import argparse
import copy
import math
import sys
from contextlib import nullcontext
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from bzmild import io
from bzmild.comparison import ChainError, Margins, natural_region, trap_chain
from bzmild.grid import GridSpec, StatePair, constant, gaussian_bump, make_field
from bzmild.mild import PicardConfig, bounds_for_m, picard_extend
from bzmild.model import (PRESETS, KineticRoots, ModelParams, SteadyStates, find_kappa_bar,
                          find_root_G_m, find_root_G_star, preset_params)
from bzmild.monitor import (entry_check, instability_probe, invariance_experiment, named_region,
                            semigroup_suite)
from bzmild.semigroup import KERNEL, SPECTRAL, skewed_heat
from bzmild.stepper import SCHEMES, StepperConfig, default_box, max_stable_dt, simulate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "seed": 0,
    "output_dir": "runs",
    "params": {"preset": "standard", "h": 1.0, "epsilon": None, "q": None, "d": None},
    "grid": {"dim": 1, "extent": 100.0, "points": 128},
    "solver": {
        "kind": "imex",
        "scheme": "imex-strang",
        "mode": KERNEL,
        "dt": None,  # None: 0.9 of the box-preserving limit
        "snapshot_stride": 100,
        "picard": {"samples": 16, "quad_substeps": 2, "tol": 1e-8, "max_iter": 20},
    },
    "analyze": {"m": 1.0, "q3_margin": 0.5, "c_star": None, "q_nat": None, "u_nat": None},
    "simulate": {
        "T": 1.0,
        "u": {"kind": "band_limited", "lo": 0.0, "hi": 1.0},
        "v": {"kind": "band_limited", "lo": 0.0, "hi": 1.0},
        "frames": True,
        "frame_stride": 1,
    },
    "verify": {
        "suite": {"trials": 100, "points": 256},
        "invariance": {"regions": ["S", "box"], "m": 2.0, "n_samples": 10, "T": 10.0, "points": 128},
        "instability": {"amplitude": 1e-6, "T": 1.0, "points": 64, "extent": 20.0},
        "heat_skew": None,  # fault injection: multiply the heat propagator by this factor
    },
    "trap_time": {
        "c_star": [1e-4],
        "m": [1.0],
        "margins": {"q2": 0.5, "q3": 0.5, "u": 0.5},
        "entry_check": False,
        "entry_points": 8,
        "entry_stride": 50,
    },
    "sweep": {"h": [0.5, 1.0, 2.0, 4.0], "T": 0.5, "amplitude": 0.5, "width": 2.0,
              "extent": 20.0, "points": 32},
}


class ConfigError(ValueError):
    pass


def merge(base: dict, override: dict, path: str = "") -> dict:
    """Deep merge; keys absent from the defaults are rejected."""
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[k], dict) and base[k] and k not in ("u", "v"):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            out[k] = merge(base[k], v, where + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path, seed: int | None = None, output: str | None = None) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if {"command", "config", "versions"} <= raw.keys():
        raw = raw["config"]  # a manifest from an earlier run (JSON is valid YAML)
    cfg = merge(DEFAULTS, raw)
    if seed is not None:
        cfg["seed"] = seed
    if output is not None:
        cfg["output_dir"] = output
    validate(cfg)
    return cfg


def params_from(cfg: dict, h: float | None = None) -> ModelParams:
    pc = cfg["params"]
    if pc["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {pc['preset']!r}; known: {sorted(PRESETS)}")
    base = preset_params(pc["h"] if h is None else h, pc["preset"])
    over = {k: pc[k] for k in ("epsilon", "q", "d") if pc[k] is not None}
    return ModelParams(**{**asdict(base), **over})


def grid_from(section: dict, dim: int | None = None) -> GridSpec:
    return GridSpec(dim or section.get("dim", 1), float(section["extent"]), int(section["points"]))


def validate(cfg: dict) -> None:
    """Rebuild every typed object once so bad values fail before any work starts."""
    try:
        params_from(cfg)
        grid_from(cfg["grid"])
        s = cfg["solver"]
        if s["kind"] not in ("imex", "mild"):
            raise ConfigError(f"solver.kind must be 'imex' or 'mild', got {s['kind']!r}")
        if s["scheme"] not in SCHEMES:
            raise ConfigError(f"solver.scheme must be one of {SCHEMES}")
        if s["mode"] not in (KERNEL, SPECTRAL):
            raise ConfigError(f"solver.mode must be {KERNEL!r} or {SPECTRAL!r}")
        PicardConfig(mode=s["mode"], **s["picard"])
        Margins(**cfg["trap_time"]["margins"])
        if not isinstance(cfg["seed"], int):
            raise ConfigError("seed must be an integer")
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def _stepper_cfg(cfg: dict, p: ModelParams, box) -> StepperConfig:
    s = cfg["solver"]
    dt = s["dt"]
    if dt is None:
        dt = 0.9 * max_stable_dt(p, box) * (2.0 if s["scheme"] == "imex-strang" else 1.0)
    return StepperConfig(dt=float(dt), scheme=s["scheme"], snapshot_stride=int(s["snapshot_stride"]), mode=s["mode"])


def _picard_cfg(cfg: dict) -> PicardConfig:
    s = cfg["solver"]
    return PicardConfig(mode=s["mode"], **s["picard"])


def _say(args, msg):
    if not args.quiet:
        print(msg)


# ---------------------------------------------------------------------------

def cmd_analyze(cfg, out: Path, args) -> tuple[int, list]:
    p = params_from(cfg)
    a = cfg["analyze"]
    m = float(a["m"])
    roots = KineticRoots.compute(p)
    steady = SteadyStates.compute(p)
    q1 = find_root_G_m(m, p)
    q3 = p.q + a["q3_margin"] * (q1 - p.q)
    kappa_star = find_root_G_star(q3, p)
    kappa_bar = find_kappa_bar(q1, p)
    report = {
        "params": asdict(p),
        "roots": asdict(roots),
        "steady_states": asdict(steady),
        "comparison": {"m": m, "q1": q1, "q3": q3, "kappa_star": kappa_star, "kappa_bar": kappa_bar},
        "S": {"lo": p.q, "hi": roots.u_bar},
        "solver_bounds": asdict(bounds_for_m(m, p)),
    }
    if a["q_nat"] is not None and a["u_nat"] is not None:
        try:
            report["S_nat"] = asdict(natural_region(m, p, a["q_nat"], a["u_nat"], a["c_star"]))
        except ChainError as exc:
            report["S_nat"] = {"error": str(exc)}
    path = io.write_json(out / "analyze.json", report)
    _say(args, f"u_bar = {roots.u_bar:.16g}\nu_tilde = {roots.u_tilde:.16g}\nq1(m={m:g}) = {q1:.12g}\n"
               f"kappa_star = {kappa_star:.12g}\nkappa_bar = {kappa_bar:.12g}\nT0 = {report['solver_bounds']['T0']:.6g}")
    return EXIT_OK, [path]


def _initial(cfg, grid, rng):
    sc = cfg["simulate"]
    fields = []
    for name in ("u", "v"):
        spec = dict(sc[name])
        kind = spec.pop("kind")
        fields.append(make_field(grid, kind, rng, **spec))
    return fields


def cmd_simulate(cfg, out: Path, args) -> tuple[int, list]:
    p = params_from(cfg)
    grid = grid_from(cfg["grid"])
    rng = np.random.default_rng(cfg["seed"])
    u0, v0 = _initial(cfg, grid, rng)
    T = float(cfg["simulate"]["T"])
    if cfg["solver"]["kind"] == "mild":
        traj = picard_extend(u0, v0, p, T, _picard_cfg(cfg))
    else:
        box = default_box(u0.values, v0.values)
        traj = simulate(StatePair(u0, v0), T, p, _stepper_cfg(cfg, p, box), box=box)
    outputs = [io.write_envelope_csv(out / "envelope.csv", traj.envelope())]
    outputs.append(io.write_field_csv(out / "u_final.csv", traj.u[-1]))
    outputs.append(io.write_field_csv(out / "v_final.csv", traj.v[-1]))
    if cfg["simulate"]["frames"]:
        stride = int(cfg["simulate"]["frame_stride"])
        for i in range(0, len(traj), stride):
            for name, arr in (("u", traj.u[i]), ("v", traj.v[i])):
                outputs.append(io.write_pgm(out / "frames" / io.frame_name(name, i), arr))
    outputs.append(io.write_json(out / "simulate.json", {"meta": traj.meta, "samples": len(traj),
                                                         "t_final": traj.times[-1]}))
    _say(args, f"simulated to T = {traj.times[-1]:g} with {traj.provenance} ({len(traj)} snapshots)")
    return EXIT_OK, outputs


def _verify_suite(cfg, p, args) -> dict:
    vc = cfg["verify"]
    suite = semigroup_suite(GridSpec(1, cfg["grid"]["extent"], vc["suite"]["points"]),
                            vc["suite"]["trials"], cfg["seed"], p)
    for c in suite.checks:
        _say(args, c.line())
    return {"semigroup_suite": suite.summary()}


def _verify_invariance(cfg, p, args) -> dict:
    inv = cfg["verify"]["invariance"]
    g = GridSpec(1, cfg["grid"]["extent"], inv["points"])
    out = {}
    for name in inv["regions"]:
        region = named_region(name, p, m=inv["m"])
        rep = invariance_experiment(p, region, inv["n_samples"], inv["T"], g, seed=cfg["seed"],
                                    scheme=cfg["solver"]["scheme"], mode=cfg["solver"]["mode"], cap=inv["m"])
        out[f"invariance_{name}"] = rep.summary()
        _say(args, f"{'PASS' if rep.passed else 'FAIL'}  invariance of {region.name}: "
                   f"worst overshoot {max(rep.worst, default=0.0):.3e} over {rep.n_samples} samples")
    return out


def _verify_instability(cfg, p, args) -> dict:
    ic = cfg["verify"]["instability"]
    probe = instability_probe(p, ic["amplitude"], ic["T"], GridSpec(1, ic["extent"], ic["points"]))
    ok = probe.grew_tenfold and probe.strictly_positive and (probe.ode_gap or 0.0) <= 1e-6
    _say(args, f"{'PASS' if ok else 'FAIL'}  instability of (0,0): growth x{probe.growth:.3g}")
    return {"instability": {**probe.summary(), "verdict": "pass" if ok else "fail"}}


def cmd_verify(cfg, out: Path, args) -> tuple[int, list]:
    p = params_from(cfg)
    skew = cfg["verify"]["heat_skew"]
    verdicts = {}
    with skewed_heat(skew) if skew is not None else nullcontext():
        for name, stage in (("semigroup_suite", _verify_suite), ("invariance", _verify_invariance),
                            ("instability", _verify_instability)):
            try:
                verdicts.update(stage(cfg, p, args))
            except (ArithmeticError, RuntimeError, ValueError) as exc:
                # a solver blow-up under verification is itself a failed check
                verdicts[name] = {"verdict": "fail", "error": f"{type(exc).__name__}: {exc}"}
                _say(args, f"FAIL  {name}: {type(exc).__name__}: {exc}")
    passed = all(v["verdict"] == "pass" for v in verdicts.values())
    path = io.write_json(out / "verify.json", {"verdict": "pass" if passed else "fail", "heat_skew": skew,
                                               "results": verdicts})
    return (EXIT_OK if passed else EXIT_FAIL), [path]


def cmd_trap_time(cfg, out: Path, args) -> tuple[int, list]:
    p = params_from(cfg)
    tc = cfg["trap_time"]
    margins = Margins(**tc["margins"])
    rows, header, failed = [], None, False
    for m in tc["m"]:
        for c_star in tc["c_star"]:
            chain = trap_chain(float(c_star), float(m), p, margins)
            row = chain.as_row()
            if tc["entry_check"]:
                g = GridSpec(1, cfg["grid"]["extent"], tc["entry_points"])
                cs = float(c_star)
                u0, v0 = constant(g, cs), constant(g, cs)
                box = (0.0, max(1.0, float(m)), 0.0, max(1.0, float(m)))
                scfg = StepperConfig(dt=0.9 * max_stable_dt(p, box) * 2, snapshot_stride=tc["entry_stride"],
                                     mode=cfg["solver"]["mode"])
                traj = simulate(StatePair(u0, v0), chain.T_sharp * 1.02, p, scfg, box=box)
                res = entry_check(traj, chain, p)
                row.update(entry_time=res.entry_time, entry_ok=res.bound_satisfied)
                failed |= not res.bound_satisfied
            header = header or list(row)
            rows.append([row[k] for k in header])
            _say(args, f"m = {m:g}, c* = {c_star:g}: T_sharp = {chain.T_sharp:.6g}")
    path = io.write_csv(out / "trap_times.csv", header, rows)
    return (EXIT_FAIL if failed else EXIT_OK), [path]


def nonuniformity_index(values: np.ndarray) -> float:
    """Spatial variance over mean; zero for a uniform field."""
    mean = float(np.mean(values))
    return float(np.var(values) / mean) if mean > 0 else math.inf


def cmd_sweep(cfg, out: Path, args) -> tuple[int, list]:
    sc = cfg["sweep"]
    g = GridSpec(2, float(sc["extent"]), int(sc["points"]))
    rows, outputs = [], []
    for h in sc["h"]:
        p = params_from(cfg, h=float(h))
        u0 = gaussian_bump(g, (sc["extent"] / 2, sc["extent"] / 2), sc["width"], sc["amplitude"])
        v0 = gaussian_bump(g, (sc["extent"] / 2 + sc["width"], sc["extent"] / 2), sc["width"], sc["amplitude"])
        box = default_box(u0.values, v0.values)
        scfg = _stepper_cfg(cfg, p, box)
        traj = simulate(StatePair(u0, v0), float(sc["T"]), p, scfg, box=box)
        idx_u, idx_v = nonuniformity_index(traj.u[-1]), nonuniformity_index(traj.v[-1])
        rows.append([float(h), idx_u, idx_v, float(traj.u[-1].min()), float(traj.u[-1].max())])
        outputs.append(io.write_pgm(out / "frames" / io.frame_name(f"u_h{h:g}", len(traj) - 1), traj.u[-1]))
        _say(args, f"h = {h:g}: nonuniformity(u) = {idx_u:.4g}")
    outputs.append(io.write_csv(out / "sweep.csv", ["h", "nonuniformity_u", "nonuniformity_v", "min_u", "max_u"],
                                rows))
    return EXIT_OK, outputs


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "verify": cmd_verify,
            "trap-time": cmd_trap_time, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bzmild", description="Mild solutions and invariant-region checks for the Keener-Tyson BZ system.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML config file")
        sp.add_argument("--output", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="random seed (overrides seed)")
        sp.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args.seed, args.output)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg["output_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code, outputs = COMMANDS[args.command](cfg, out, args)
    io.write_manifest(out, args.command, cfg, cfg["seed"], outputs)
    return code


if __name__ == "__main__":
    sys.exit(main())
