"""Command-line entry point binding configs to module pipelines.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical failure.
All outputs land under --out (default ./runs/<timestamp>); the resolved
config is echoed to config.json so every run can be reproduced from its own
output directory.
"""

from __future__ import annotations

import argparse
import sys as _sys
import time
from pathlib import Path

import numpy as np

from . import __version__, io
from .errors import ConfigurationError, NlslabError
from .evolve import CapSpec, Physics, conserved_quantities, evolve, soliton_state
from .experiments import build_workspace, fgr_workspace, run_scenario
from .fgr import check_A1
from .frame import renormalize_E, split_h
from .ground import branch_sweep
from .normal_form import (build_params, example_family, exact_unforced_modulus,
                          minimal_bracket_m, nf_integrate)


def _out_dir(args) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path("runs") / time.strftime("%Y%m%d-%H%M%S")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_spectrum(cfg, out: Path) -> int:
    ws = build_workspace(cfg, with_linearization=False)
    report = ws.pair.report()
    io.write_json(out / "spectrum.json", report)
    print(io.json.dumps(report, indent=2))
    return 0


def cmd_ground(cfg, out: Path) -> int:
    ws = build_workspace(cfg, with_linearization=False)
    gs = ws.gs
    e_lo = ws.pair.e0 + 0.5 * (gs.E - ws.pair.e0)
    e_hi = ws.pair.e0 + 1.5 * (gs.E - ws.pair.e0)
    branch = branch_sweep(gs.lam, np.linspace(e_lo, e_hi, 9), ws.pair, ws.grid,
                          ws.v, mass_window=(0.0, np.inf))
    io.write_csv(out / "branch.csv", {
        "E": [s.E for s in branch],
        "w": [s.w for s in branch],
        "mass": [s.mass for s in branch],
        "residual": [s.residual for s in branch],
    })
    io.write_branch_blob(out / "branch.blob", branch)
    print(f"branch of {len(branch)} states around E={gs.E:.6f} "
          f"(mass {branch.samples[0].mass:.3f}..{branch.samples[-1].mass:.3f}) -> {out}")
    return 0


def cmd_linearize(cfg, out: Path) -> int:
    ws = build_workspace(cfg)
    diag = ws.sys.diagnostics()
    io.write_json(out / "linearization.json", diag)
    print(io.json.dumps(diag, indent=2))
    return 0


def cmd_fgr(cfg, out: Path) -> int:
    fgr_ws, res = fgr_workspace(cfg)
    a1 = check_A1(fgr_ws.pair, fgr_ws.grid, fgr_ws.v)
    payload = {**res.as_dict(), "A1": a1.as_dict()}
    io.write_json(out / "fgr.json", payload)
    print(f"Gamma          = {res.gamma:.6e}")
    print(f"  resolvent    = {res.gamma_resolvent:.6e}")
    print(f"  time domain  = {res.gamma_timedomain:.6e}")
    print(f"  agreement    = {100 * res.agreement:.3f}%")
    print(f"gamma0 (A1)    = {a1.gamma0:.6e}  (positive: {a1.gamma0 > 0})")
    print(f"Gamma/(2 lam^2 w^2) / gamma0 = "
          f"{res.gamma / (2 * fgr_ws.gs.lam**2 * fgr_ws.gs.w**2) / a1.gamma0:.4f}")
    return 0


def cmd_evolve(cfg, out: Path) -> int:
    ws = build_workspace(cfg, with_linearization=False)
    scen = cfg["scenario"]
    cap = None
    if cfg["cap"]["enabled"]:
        cap = CapSpec(cfg["cap"]["start_radius"], cfg["cap"]["strength"],
                      cfg["cap"]["power"])
    physics = Physics(ws.grid, ws.v, ws.gs.lam, cap=cap,
                      gauge_e0=ws.gs.E if cfg["physics"]["gauge"] else 0.0)
    state = soliton_state(ws.gs)
    T = scen["T"] if scen["T"] is not None else 100.0
    dt = scen["dt"]
    rows = {"t": [], "mass": [], "energy": []}

    def norms_obs(t, psi):
        c = conserved_quantities(type(state)(t=t, psi=psi, meta={}), physics)
        rows["t"].append(t)
        rows["mass"].append(c["mass"])
        rows["energy"].append(c["energy"])

    stride = max(int(round(scen["stride_t"] / dt)), 1)
    final = evolve(state, T, dt, physics, observers=(norms_obs,), stride=stride)
    io.write_csv(out / "trajectory.csv", rows)
    io.write_checkpoint(out / "final.chk", final.t, final.psi, ws.grid.dr)
    print(f"evolved to t={final.t:g}; trajectory and checkpoint in {out}")
    return 0


def cmd_decompose(cfg, out: Path, checkpoint: str) -> int:
    ws = build_workspace(cfg)
    t, psi, dr = io.read_checkpoint(checkpoint)
    if abs(dr - ws.grid.dr) > 1e-12 or psi.size != ws.grid.n:
        raise ConfigurationError(
            f"checkpoint grid (n={psi.size}, dr={dr:g}) does not match config"
        )
    res = renormalize_E(psi, ws.gs.E, ws.ctx)
    z, eta = split_h(res.h, ws.sys)
    payload = {
        "t": t, "E": res.E, "Theta": res.Theta,
        "z": [z.real, z.imag], "abs_z": abs(z),
        "eta_L2loc": ws.grid.norm_local(eta, 3.0),
        "eta_L4": ws.grid.norm_lp(eta, 4.0),
        "renorm_iterations": res.iterations,
        "orthogonality_residual": res.orthogonality_residual,
    }
    io.write_json(out / "frame_slice.json", payload)
    print(io.json.dumps(payload, indent=2))
    return 0


def cmd_nf(cfg, out: Path) -> int:
    fgr_ws, res = fgr_workspace(cfg)
    params = build_params(fgr_ws.gs, fgr_ws.sys, res,
                          d21_im=cfg["nf"]["d21_im"], d1_im=cfg["nf"]["d1_im"])
    eps = cfg["scenario"]["eps"]
    traj = nf_integrate(eps + 0.0j, params, T=1.0e4)
    exact = exact_unforced_modulus(traj.t, eps, params.gamma)
    err = float(np.max(np.abs(traj.rho - exact) / exact))
    facts = example_family(max(params.gamma, 1e-3), 0.02, T=2e4)
    m_min = minimal_bracket_m(eps, params.gamma, 0.1 * params.gamma, 0.1)
    payload = {
        "gamma": params.gamma,
        "kappa": params.kappa,
        "a20": params.a20,
        "b22_quadratic": params.b22_quadratic,
        "b22_gamma_route": params.b22_gamma_route,
        "exact_case_max_rel_err": err,
        "minimal_bracket_m": m_min,
        "example_facts": facts.as_dict(),
    }
    io.write_json(out / "nf_report.json", payload)
    io.write_csv(out / "nf.csv", {
        "t": traj.t, "rho": traj.rho, "omega": traj.omega,
        "bracket_lo": 0.5 * exact, "bracket_hi": 2.0 * exact,
    })
    print(io.json.dumps({k: v for k, v in payload.items() if k != "example_facts"},
                        indent=2))
    return 0


def cmd_experiment(cfg, out: Path) -> int:
    rec = run_scenario(cfg, out_dir=out)
    print(f"[{rec.kind}] Gamma={rec.gamma:.4e}  E_in={rec.e_in:.6f}  "
          f"E_final={rec.e_final:.6f}  wall={rec.wall_seconds:.0f}s")
    for key, val in rec.fits.items():
        if isinstance(val, dict) and "exponent" in val:
            print(f"  {key}: exponent {val['exponent']:+.3f} "
                  f"(residual {val['rms_residual']:.3f})")
        elif isinstance(val, dict) and "error" in val:
            print(f"  {key}: {val['error']}")
    if "envelope_m" in rec.fits:
        print(f"  envelope_m: {rec.fits['envelope_m']:.3f}  "
              f"nf_ratio_max: {rec.fits.get('nf_ratio_max', float('nan')):.3f}")
    print(f"run directory: {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlslab",
        description="Soliton relaxation laboratory for the radial cubic NLS",
    )
    parser.add_argument("--version", action="version", version=f"nlslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_chk in [
        ("spectrum", False), ("ground", False), ("linearize", False),
        ("fgr", False), ("evolve", False), ("decompose", True),
        ("nf", False), ("experiment", False),
    ]:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="TOML or JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       dest="overrides", help="override a config key")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker slots for independent sub-tasks")
        if needs_chk:
            p.add_argument("checkpoint", help="field checkpoint to decompose")
    args = parser.parse_args(argv)

    try:
        cfg = io.load_config(args.config, args.overrides)
        out = _out_dir(args)
        io.write_json(out / "config.json", cfg)
        handler = {
            "spectrum": cmd_spectrum,
            "ground": cmd_ground,
            "linearize": cmd_linearize,
            "fgr": cmd_fgr,
            "evolve": cmd_evolve,
            "nf": cmd_nf,
            "experiment": cmd_experiment,
        }
        if args.command == "decompose":
            return cmd_decompose(cfg, out, args.checkpoint)
        return handler[args.command](cfg, out)
    except ConfigurationError as ex:
        print(f"configuration error: {ex}", file=_sys.stderr)
        return 1
    except NlslabError as ex:
        print(f"numerical failure ({type(ex).__name__}): {ex}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
