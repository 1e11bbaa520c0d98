"""Execution of configured runs: solves, spectra, continuation, symmetry, reproduction.

Every run writes its artefacts atomically into an output directory and
ends with a ``manifest.json`` describing inputs, results and timings.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import PRESETS, config_hash, domain_from_config, preset
from .contours import contours_csv, contours_svg, extract_contours
from .errors import ConfigError, NehariForgeError
from .grid import Grid, build_grid, field_csv_text, infer_grid, read_field_csv, sample
from .limitflow import continuation
from .mpsolve import SolveConfig, SolveResult, ground_state, least_energy_nodal
from .operator import SchrodingerOperator, assemble, check_assumptions
from .spectra import Spectrum, eig_smallest
from .symlab import SymmetryReport, symmetry_report
from .varcalc import ProblemParams

log = logging.getLogger(__name__)

SOLUTION_LABELS = {"gs": "ground state", "lens": "least-energy nodal solution"}


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, data: Any) -> None:
    write_atomic(path, json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class Problem:
    cfg: dict
    grid: Grid
    op: SchrodingerOperator
    substituted: list[int]
    timings: dict[str, float] = field(default_factory=dict)
    _spectrum: Spectrum | None = None

    def spectrum(self) -> Spectrum:
        if self._spectrum is None:
            t0 = time.perf_counter()
            self._spectrum = eig_smallest(self.op, self.cfg["eigs"]["k"], self.cfg["tolerances"]["eig_tol"])
            self.timings["eigs"] = time.perf_counter() - t0
        return self._spectrum

    def lam(self) -> float:
        lam = self.cfg["lambda"]
        if lam == "auto:lambda1":
            return self.spectrum()[1].value
        if lam == "auto:lambda2":
            return self.spectrum()[2].value
        return float(lam)


def build_problem(cfg: dict, resolution: int | None = None) -> Problem:
    """Grid, sampled potential and operator for a validated configuration."""
    n = resolution if resolution is not None else cfg["resolution"]
    t0 = time.perf_counter()
    try:
        g = build_grid(domain_from_config(cfg["domain"]), n)
    except ValueError as exc:
        raise ConfigError(f"resolution {n}: {exc}") from None
    smp = sample(cfg["potential"], g, regularization=cfg["regularization"])
    op = assemble(g, smp.values)
    t1 = time.perf_counter()
    return Problem(cfg, g, op, smp.substituted, {"setup": t1 - t0})


def _solve_config(cfg: dict, lam: float, seed: str, **over) -> SolveConfig:
    tol, sol = cfg["tolerances"], cfg["solver"]
    kw = dict(
        params=ProblemParams(float(cfg["p"]), lam),
        seed=seed,
        step0=sol["step0"],
        shrink=sol["shrink"],
        grad_tol=tol["grad_tol"],
        max_iter=tol["max_iter"],
        method=sol["method"],
        coarse_levels=sol["coarse_levels"],
        escapes=sol["escapes"],
        morse_k=sol["morse_k"],
    )
    kw.update(over)
    return SolveConfig(**kw)


def _grid_info(prob: Problem) -> dict:
    g = prob.grid
    return {
        "resolution": g.n,
        "h": g.h,
        "nodes": g.size,
        "lattice": [g.ny, g.nx],
        "regularized_nodes": [[float(g.x[k]), float(g.y[k])] for k in prob.substituted],
    }


def _manifest(command: str, cfg: dict, prob: Problem | None, **extra) -> dict:
    m = {
        "tool": "nehari-forge",
        "version": __version__,
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
    }
    if prob is not None:
        m["grid"] = _grid_info(prob)
        m["timings"] = {k: round(v, 3) for k, v in prob.timings.items()}
    m.update(extra)
    return _jsonable(m)


def modes_for(cfg: dict) -> list[str]:
    mode = cfg["mode"]
    if mode in ("gs", "lens"):
        return [mode]
    if mode in ("both", "reproduce"):
        return ["gs", "lens"]
    raise ConfigError(f"mode {mode!r} cannot be used with the solve command (use gs, lens or both)")


def _seed(cfg: dict, mode: str) -> str:
    key = f"seed_{mode}"
    if key not in cfg:
        raise ConfigError(f"{key} is required to compute the {SOLUTION_LABELS[mode]}")
    return cfg[key]


@dataclass
class SolveOutcome:
    prob: Problem
    results: dict[str, SolveResult]
    symmetry: dict[str, SymmetryReport]
    errors: dict[str, NehariForgeError]


def solve_problem(prob: Problem, out: Path, modes: list[str]) -> SolveOutcome:
    """Solve each requested mode and write fields, contours and symmetry reports."""
    cfg = prob.cfg
    lam = prob.lam()
    results: dict[str, SolveResult] = {}
    reports: dict[str, SymmetryReport] = {}
    errors: dict[str, NehariForgeError] = {}
    thr = cfg["tolerances"]["symmetry_threshold"]
    for mode in modes:
        scfg = _solve_config(cfg, lam, _seed(cfg, mode))
        solver = ground_state if mode == "gs" else least_energy_nodal
        t0 = time.perf_counter()
        try:
            r = solver(prob.op, scfg)
        except NehariForgeError as exc:
            log.error("%s failed: %s: %s", mode, type(exc).__name__, exc)
            errors[mode] = exc
            continue
        finally:
            prob.timings[f"solve_{mode}"] = time.perf_counter() - t0
        results[mode] = r
        write_atomic(out / f"field_{mode}.csv", field_csv_text(prob.grid, r.u))
        cs = extract_contours(prob.grid, r.u, cfg["levels"][mode])
        write_atomic(out / f"contours_{mode}.svg", contours_svg(prob.grid, cs))
        write_atomic(out / f"contours_{mode}.csv", contours_csv(cs))
        reports[mode] = symmetry_report(prob.op, r.u, threshold=thr)
        log.info(
            "%s: max %.4g min %.4g energy %.6g Morse index %s (%d iterations, %.1f s)",
            mode, r.u_max, r.u_min, r.energy, r.morse_index, r.iterations, r.seconds,
        )
    if reports:
        write_json(out / "symmetry.json", _jsonable({m: rep.as_dict() for m, rep in reports.items()}))
    return SolveOutcome(prob, results, reports, errors)


def run_solve(cfg: dict, out: Path, resolution: int | None = None) -> int:
    modes = modes_for(cfg)
    prob = build_problem(cfg, resolution)
    out.mkdir(parents=True, exist_ok=True)
    oc = solve_problem(prob, out, modes)
    extra: dict[str, Any] = {
        "lambda": prob.lam(),
        "spectrum": prob._spectrum.summary() if prob._spectrum else {"lambda_min": prob.op.lambda_min},
        "solutions": {m: r.summary() for m, r in oc.results.items()},
        "symmetry": {m: rep.as_dict() for m, rep in oc.symmetry.items()},
        "status": "failed" if oc.errors else "ok",
    }
    if oc.errors:
        extra["errors"] = {m: {"class": type(e).__name__, "message": str(e)} for m, e in oc.errors.items()}
    write_json(out / "manifest.json", _manifest("solve", cfg, prob, **extra))
    return 1 if oc.errors else 0


def run_eigs(cfg: dict, out: Path, resolution: int | None = None) -> int:
    prob = build_problem(cfg, resolution)
    out.mkdir(parents=True, exist_ok=True)
    report = check_assumptions(prob.op)
    S = prob.spectrum()
    summary = S.summary()
    summary["assumptions"] = report.as_dict()
    write_json(out / "spectrum.json", _jsonable(summary))
    write_json(
        out / "manifest.json",
        _manifest("eigs", cfg, prob, spectrum=summary, status="ok"),
    )
    for idx, c in enumerate(S.clusters, start=1):
        log.info("eigenvalue %d: %.8g (multiplicity %d)", idx, c.value, c.multiplicity)
    return 0


def run_continuation(cfg: dict, out: Path, resolution: int | None = None) -> int:
    prob = build_problem(cfg, resolution)
    out.mkdir(parents=True, exist_ok=True)
    cc = cfg["continuation"]
    S = prob.spectrum()
    t0 = time.perf_counter()
    res = continuation(
        prob.op,
        S,
        cc["p_list"],
        mode=cc["mode"],
        lam_factor=cc["lambda_factor"],
        use_predictor=cc["use_predictor"],
        solve_kwargs={"grad_tol": cfg["tolerances"]["grad_tol"], "max_iter": cfg["tolerances"]["max_iter"]},
    )
    prob.timings["continuation"] = time.perf_counter() - t0
    rows = res.rows()
    buf = io.StringIO()
    cols = ["p", "energy", "h_norm", "rescaled_h_norm", "eigenspace_distance", "distance_to_limit", "iterations"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(r[k]) if isinstance(r[k], float) else r[k] for k in cols})
    write_atomic(out / "continuation.csv", buf.getvalue())
    if res.steps:
        write_atomic(out / f"field_{res.mode}.csv", field_csv_text(prob.grid, res.steps[-1].result.u))
    write_atomic(out / "limit_field.csv", field_csv_text(prob.grid, res.limit.u))
    extra = {
        "spectrum": S.summary(),
        "continuation": {
            "mode": res.mode,
            "cluster": res.cluster,
            "lambda": res.lam,
            "lambda_i": res.lam_i,
            "limit_energy": res.limit.energy,
            "limit_norm": res.limit_norm,
            "limit_coefficients": [float(c) for c in res.limit.coefficients],
            "steps": rows,
            "skipped": res.skipped,
        },
        "status": "ok",
    }
    write_json(out / "manifest.json", _manifest("continuation", cfg, prob, **extra))
    return 0


def run_symmetry(cfg: dict, out: Path, field_path: str | None = None, resolution: int | None = None) -> int:
    path = field_path or cfg.get("symmetry", {}).get("field")
    if not path:
        raise ConfigError("symmetry needs a field CSV (--field or symmetry.field in the config)")
    try:
        x, y, v = read_field_csv(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read field {path}: {exc}") from None
    try:
        g = infer_grid(x, y, domain_from_config(cfg["domain"]))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    smp = sample(cfg["potential"], g, regularization=cfg["regularization"])
    op = assemble(g, smp.values)
    rep = symmetry_report(op, v, threshold=cfg["tolerances"]["symmetry_threshold"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "symmetry.json", _jsonable(rep.as_dict()))
    write_json(
        out / "manifest.json",
        _manifest("symmetry", cfg, None, field=str(path), symmetry=rep.as_dict(), status="ok"),
    )
    log.info("%s", rep.short())
    return 0


# ---------------------------------------------------------------- reproduce

TABLE_COLUMNS = [
    "preset", "solution", "quantity", "computed", "reference", "deviation_pct",
    "within_10pct", "morse_index", "symmetry", "status",
]


def deviation_pct(computed: float, reference: float) -> float:
    return 100.0 * (computed - reference) / abs(reference)


def extrema_for_comparison(r: SolveResult, ref: dict) -> dict[str, float]:
    """Computed max/min, swapped for ``-u`` if that matches the reference better.

    Nodal solutions come in pairs ``±u``; which one a run lands on depends on
    the seed's round-off, so both signs are compared.
    """
    plain = {"max": r.u_max, "min": r.u_min, "energy": r.energy}
    flipped = {"max": -r.u_min, "min": -r.u_max, "energy": r.energy}
    if r.mode != "lens":
        return plain

    def err(d):
        return sum(abs(d[k] - ref[k]) / abs(ref[k]) for k in ("max", "min") if k in ref)

    return flipped if err(flipped) < err(plain) else plain


def table_rows(name: str, cfg: dict, oc: SolveOutcome, label_suffix: str = "") -> list[dict]:
    rows = []
    for mode in ("gs", "lens"):
        ref = cfg.get("reference", {}).get(mode, {})
        sol = mode + label_suffix
        if mode in oc.errors:
            e = oc.errors[mode]
            for q in ("max", "min", "energy"):
                if q in ref:
                    rows.append(dict(preset=name, solution=sol, quantity=q, computed="", reference=ref[q],
                                     deviation_pct="", within_10pct="", morse_index="", symmetry="",
                                     status=f"FAILED ({type(e).__name__})"))
            continue
        if mode not in oc.results:
            continue
        r = oc.results[mode]
        vals = extrema_for_comparison(r, ref)
        sym = oc.symmetry[mode].short() if mode in oc.symmetry else ""
        for q in ("max", "min", "energy"):
            if q not in ref and not (q == "max"):
                continue
            row = dict(preset=name, solution=sol, quantity=q, computed=vals[q], reference=ref.get(q, ""),
                       morse_index=r.morse_index, symmetry=sym, status="ok")
            if q in ref:
                dev = deviation_pct(vals[q], ref[q])
                row.update(deviation_pct=round(dev, 3), within_10pct=abs(dev) <= 10.0)
            else:
                row.update(deviation_pct="", within_10pct="")
            rows.append(row)
    return rows


def reproduce(
    out: Path,
    resolution: int | None = None,
    names: list[str] | None = None,
    supplementary: bool = True,
) -> tuple[list[dict], dict]:
    """Run the presets and tabulate computed against reported values."""
    names = names or list(PRESETS)
    rows: list[dict] = []
    per: dict[str, Any] = {}
    for name in names:
        cfg = preset(name)
        t0 = time.perf_counter()
        try:
            prob = build_problem(cfg, resolution)
            sub = out / name
            oc = solve_problem(prob, sub, ["gs", "lens"])
        except NehariForgeError as exc:
            log.error("%s failed: %s", name, exc)
            rows.append(dict(preset=name, solution="", quantity="", computed="", reference="",
                             deviation_pct="", within_10pct="", morse_index="", symmetry="",
                             status=f"FAILED ({type(exc).__name__})"))
            continue
        secs = time.perf_counter() - t0
        rows.extend(table_rows(name, cfg, oc))
        per[name] = {
            "seconds": round(secs, 2),
            "solutions": {m: r.summary() for m, r in oc.results.items()},
            "symmetry": {m: rep.as_dict() for m, rep in oc.symmetry.items()},
            "errors": {m: {"class": type(e).__name__, "message": str(e)} for m, e in oc.errors.items()},
        }
        write_json(sub / "manifest.json", _manifest("reproduce", cfg, prob, preset=name, **per[name]))
        log.info("%s finished in %.1f s", name, secs)
        if supplementary and name == "disk-inverse-r":
            # the radially symmetric critical point reached without leaving saddles
            t1 = time.perf_counter()
            scfg = _solve_config(cfg, prob.lam(), cfg["seed_gs"], escapes=0)
            try:
                r = ground_state(prob.op, scfg)
                rep = symmetry_report(prob.op, r.u, threshold=cfg["tolerances"]["symmetry_threshold"])
                oc2 = SolveOutcome(prob, {"gs": r}, {"gs": rep}, {})
            except NehariForgeError as exc:
                oc2 = SolveOutcome(prob, {}, {}, {"gs": exc})
            rows.extend(r_ for r_ in table_rows(name, cfg, oc2, "-radial") if r_["solution"] == "gs-radial")
            per[name + ":gs-radial"] = {
                "seconds": round(time.perf_counter() - t1, 2),
                "solutions": {m: r.summary() for m, r in oc2.results.items()},
            }
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    write_atomic(out / "reproduce_table.csv", buf.getvalue())
    return rows, per


def run_reproduce(out: Path, resolution: int | None = None, names: list[str] | None = None) -> int:
    rows, per = reproduce(out, resolution, names)
    failed = any(str(r["status"]).startswith("FAILED") for r in rows)
    write_json(
        out / "manifest.json",
        _jsonable({
            "tool": "nehari-forge",
            "version": __version__,
            "command": "reproduce",
            "resolution": resolution or 128,
            "presets": per,
            "status": "failed" if failed else "ok",
        }),
    )
    return 1 if failed else 0
