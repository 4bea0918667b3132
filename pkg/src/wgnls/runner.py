"""
Dispatch of validated run configurations and persistence of their results.

Each run writes into one output directory: ``envelope.json`` (config echo,
content hash, timing, outputs, manifest) plus CSV series and binary fields.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bifurcation import c_star_from_lambda, find_lambda_star, grid_for_mass, mc_curve, rho_certificate
from .config import ConfigError, RunConfig, rng_for
from .dynamics import EvolutionConfig, evolve, gaussian_data, soliton_data
from .functionals import (
    DegenerateFieldError,
    evaluate,
    exponent_table,
    gn_ratio,
    scale_ut,
    tstar,
)
from .ground_state import (
    SolverConfig,
    compare_with_euclidean,
    initial_field,
    minimize_mc,
    minimize_mc_branches,
)
from .spectral import Field, MassLeakError, make_grid, random_smooth_field, read_field, write_field

logger = logging.getLogger(__name__)

__all__ = ["ResultEnvelope", "run", "sweep", "solver_config", "write_csv", "projection_sample", "verify_battery"]


@dataclass
class ResultEnvelope:
    command: str
    config: dict
    config_hash: str
    outputs: dict
    timing: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "envelope.json"
        path.write_text(self.to_json())
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_csv(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})


def _manifest(out: Path, names: list[str]) -> list[dict]:
    rows = []
    for name in sorted(set(names)):
        data = (out / name).read_bytes()
        rows.append({"path": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    return rows


def solver_config(cfg: RunConfig) -> SolverConfig:
    s = cfg.solver
    g = make_grid(cfg.model.d, cfg.grid.Lx, cfg.grid.Nx, cfg.grid.Ny)
    return SolverConfig(grid=g, init=s.init, eps=s.eps, tau0=s.tau0, max_iter=s.max_iter,
                        grad_tol=s.grad_tol, stall_tol=s.stall_tol, pde_tol=s.pde_tol, k_tol=s.k_tol)


def _solve_point(cfg: RunConfig, c: float, lam: float, index: int):
    p = cfg.model_params()
    sc = solver_config(cfg)
    if cfg.solver.rescale_box:
        sc.grid = grid_for_mass(c, p, sc.grid)
    if cfg.solver.both_branches:
        return minimize_mc_branches(c, lam, p, sc)
    if cfg.solver.perturb > 0:
        base = initial_field(sc.grid, sc.init, sc.eps)
        noise = random_smooth_field(sc.grid, rng_for(cfg.seed, index))
        sc.initial = Field(sc.grid, base.values + cfg.solver.perturb * noise.values)
    return minimize_mc(c, lam, p, sc)


def _point_row(args) -> dict:
    cfg_dict, c, lam, index = args
    cfg = RunConfig.from_dict(cfg_dict)
    row = {"c": c, "lambda": lam, "m": math.nan, "beta": math.nan, "grady_fraction": math.nan,
           "grady_share": math.nan, "residual_pde": math.nan, "converged": False, "error": ""}
    try:
        s = _solve_point(cfg, c, lam, index)
        row.update(m=s.m, beta=s.beta, grady_fraction=s.grady_fraction, grady_share=s.grady_share,
                   residual_pde=s.residual_pde, converged=s.converged)
    except Exception as exc:  # isolated per point
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


SWEEP_COLUMNS = ["c", "lambda", "m", "beta", "grady_fraction", "grady_share", "residual_pde", "converged", "error"]


def sweep(cfg: RunConfig, out_dir=None) -> ResultEnvelope:
    """Ground-state solves over the product of ``sweep.c`` and ``sweep.lam``.

    Points run in parallel and are merged in axis order, so the CSV does not
    depend on the worker count. Failed points are flagged; all failing is fatal.
    """
    cfg.validate()
    out = Path(out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    pts = sorted((float(c), float(lam)) for c in cfg.sweep.c for lam in cfg.sweep.lam)
    jobs = [(cfg.to_dict(), c, lam, i) for i, (c, lam) in enumerate(pts)]
    if cfg.workers <= 1:
        rows = [_point_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            rows = list(ex.map(_point_row, jobs))
    if all(r["error"] for r in rows):
        raise RuntimeError("every sweep point failed: " + "; ".join(r["error"] for r in rows))
    files = []
    if "csv" in cfg.output.formats:
        write_csv(out / "sweep.csv", rows, SWEEP_COLUMNS)
        files.append("sweep.csv")
    env = ResultEnvelope("ground-state", cfg.to_dict(), cfg.content_hash(), {"points": rows},
                         {"elapsed_s": time.perf_counter() - t0})
    env.manifest = _manifest(out, files)
    env.write(out)
    return env


def _ground_state(cfg: RunConfig, out: Path):
    if len(cfg.sweep.c) * len(cfg.sweep.lam) > 1:
        return None
    c, lam = float(cfg.sweep.c[0]), float(cfg.sweep.lam[0])
    s = _solve_point(cfg, c, lam, 0)
    outputs = s.summary()
    try:
        outputs["euclidean_gap"] = compare_with_euclidean(s, cfg.model_params())
    except Exception as exc:
        outputs["euclidean_gap_error"] = f"{type(exc).__name__}: {exc}"
    files = []
    if "field" in cfg.output.formats:
        write_field(out / "ground_state.wgf", s.u, cfg.model.alpha)
        files.append("ground_state.wgf")
    return outputs, files


def _curve(cfg: RunConfig, out: Path):
    p = cfg.model_params()
    curve, diag = mc_curve(cfg.sweep.c, p, solver_config(cfg), workers=cfg.workers)
    files = []
    if "csv" in cfg.output.formats:
        write_csv(out / "curve.csv", diag, ["c", "m", "reference", "grady_fraction", "residual_pde", "converged"])
        files.append("curve.csv")
    return {"c": list(curve.c), "m": list(curve.m), "tol": curve.tol, "knots": diag}, files


def _bifurcation(cfg: RunConfig, out: Path):
    p = cfg.model_params()
    lams = sorted(float(v) for v in cfg.sweep.lam)
    rng = (lams[0], lams[-1]) if len(lams) >= 2 else None
    res = find_lambda_star(p, solver_config(cfg), bracket_tol=cfg.solver.bracket_tol,
                           lam_range=rng, workers=cfg.workers)
    summary = res.summary()
    files = []
    if "csv" in cfg.output.formats:
        write_csv(out / "bifurcation_sweep.csv", summary["sweep"],
                  ["lambda", "m1_lambda", "grady_fraction", "converged", "grady_share"])
        files.append("bifurcation_sweep.csv")
    return summary, files


def initial_data(cfg: RunConfig) -> Field:
    e = cfg.evolution
    p = cfg.model_params()
    g = make_grid(cfg.model.d, cfg.grid.Lx, cfg.grid.Nx, cfg.grid.Ny)
    if e.initial == "soliton":
        return soliton_data(g, p, e.mass, e.dilation, e.y_perturb) * e.amplitude
    if e.initial == "gaussian":
        return gaussian_data(g, e.amplitude, e.width, e.y_perturb)
    u, _ = read_field(e.field_path)
    if u.grid != g:
        raise ConfigError([f"dynamics: field file grid {u.grid} differs from the configured grid"])
    return u


def _evolve(cfg: RunConfig, out: Path):
    e = cfg.evolution
    p = cfg.model_params()
    u0 = initial_data(cfg)
    ecfg = EvolutionConfig(
        dt=e.dt, t_end=e.t_end, record_every=e.record_every, R=e.R,
        blowup_grad_factor=e.blowup_grad_factor, leak_tol=e.leak_tol,
        scatter_pot_factor=e.scatter_pot_factor, energy_fail_tol=e.energy_fail_tol,
        checkpoint_every=e.checkpoint_every,
        checkpoint_dir=str(out / "checkpoints") if e.checkpoint_every and "field" in cfg.output.formats else None,
    )
    tr = evolve(u0, p, ecfg)
    files = []
    if "csv" in cfg.output.formats:
        write_csv(out / "trace.csv", list(tr.rows()), list(tr.columns))
        files.append("trace.csv")
    if ecfg.checkpoint_dir:
        files += [f"checkpoints/{q.name}" for q in sorted((out / "checkpoints").glob("*.wgf"))]
    r0 = evaluate(u0, p)
    outputs = {"classification": tr.classification, "reason": tr.reason, "steps": tr.steps,
               "t_final": float(tr.t[-1]), "mass_drift": tr.mass_drift(), "energy_drift": tr.energy_drift(),
               "initial": r0.as_dict(), "K_min": float(np.min(tr.K))}
    return outputs, files


def projection_sample(grid, p, rng, tau_range=(1.0, 1.6)) -> Field:
    """Random smooth field whose amplitude places t* in ``tau_range``.

    t* scales like ``amplitude^(-2 alpha/(alpha d - 4))``, so one rescaling
    lands it exactly; the probes t*/2 and 2t* then stay resolved in the box.
    """
    u = random_smooth_field(grid, rng, widths=(0.4, 1.0), spread=0.1)
    tau = rng.uniform(*tau_range)
    t0 = tstar(u, p)
    return u * (t0 / tau) ** ((p.alpha * p.d - 4) / (2 * p.alpha))


def verify_battery(cfg: RunConfig, n_fields: int = 100) -> dict:
    """Projection and GN checks on seeded random fields, plus exact identities."""
    p = cfg.model_params()
    g = make_grid(cfg.model.d, cfg.grid.Lx, cfg.grid.Nx, cfg.grid.Ny)
    worst_K, sign_ok, max_tt, ratios, skipped = 0.0, 0, 0.0, [], 0
    for i in range(n_fields):
        try:
            u = projection_sample(g, p, rng_for(cfg.seed, i))
            ts = tstar(u, p)
            v = scale_ut(u, ts)
            lo = evaluate(scale_ut(u, ts / 2), p)
            hi = evaluate(scale_ut(u, 2 * ts), p)
        except (DegenerateFieldError, MassLeakError) as exc:
            logger.warning("verify field %d skipped: %s", i, exc)
            skipped += 1
            continue
        rv = evaluate(v, p)
        worst_K = max(worst_K, abs(rv.K) / (rv.gradx_sq + rv.pot))
        sign_ok += int(lo.K > 0 > hi.K and lo.H < rv.H and hi.H < rv.H)
        max_tt = max(max_tt, abs(tstar(v, p) - 1.0))
        ratios.append(gn_ratio(u, p))
    table = exponent_table(p)
    out = {
        "n_fields": n_fields,
        "skipped": skipped,
        "max_K_after_projection": worst_K,
        "sign_pattern_ok": sign_ok,
        "max_tstar_after_projection_minus_1": max_tt,
        "gn_empirical_C": max(ratios) if ratios else math.nan,
        "exponent_identities": table.identities(),
    }
    if p.d == 1:
        cert = rho_certificate(p)
        out["rho_certificate"] = {"a": cert.a, "rho_l2": cert.rho_l2, "rho_pot": cert.rho_pot,
                                  "K_rel": cert.K_rel, "psi_energy": cert.psi_energy,
                                  "reference": cert.reference, "margin": cert.margin}
    return out


def run(cfg: RunConfig, out_dir=None) -> ResultEnvelope:
    """Validate, dispatch on ``cfg.command`` and write the envelope."""
    cfg.validate()
    out = Path(out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    cmd = cfg.command
    files: list[str] = []
    if cmd == "ground-state":
        res = _ground_state(cfg, out)
        if res is None:
            return sweep(cfg, out)
        outputs, files = res
    elif cmd == "curve":
        outputs, files = _curve(cfg, out)
    elif cmd == "bifurcation":
        outputs, files = _bifurcation(cfg, out)
        lo, hi = outputs["lambda_star_bracket"]
        outputs["c_star_bracket"] = list(c_star_from_lambda((lo, hi), cfg.model_params()))
    elif cmd == "evolve":
        outputs, files = _evolve(cfg, out)
    elif cmd == "verify":
        outputs = verify_battery(cfg)
    else:
        outputs = exponent_table(cfg.model_params()).as_json()
    if "json" in cfg.output.formats:
        (out / "summary.json").write_text(json.dumps(_jsonable(outputs), indent=2, sort_keys=True))
        files.append("summary.json")
    env = ResultEnvelope(cmd, cfg.to_dict(), cfg.content_hash(), outputs,
                         {"elapsed_s": time.perf_counter() - t0})
    env.manifest = _manifest(out, files)
    env.write(out)
    return env
