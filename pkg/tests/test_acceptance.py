"""Acceptance criteria 1-9, each at its stated tolerance.

Every criterion records one PASS/FAIL line (printed in the pytest terminal
summary) and fails its test if any of its checks fails.  The preset runs
use the default 128 intervals per unit length.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np
import pytest

from conftest import RECT, SQUARE, make_op
from nehari_forge.config import PRESETS, preset
from nehari_forge.limitflow import continuation
from nehari_forge.mpsolve import SolveConfig, ground_state
from nehari_forge.runner import build_problem, extrema_for_comparison, solve_problem
from nehari_forge.spectra import eig_smallest, project_eigenspace
from nehari_forge.symlab import applicable_transforms, classify, domain_transforms
from nehari_forge.varcalc import ProblemParams, energy, grad_H, nehari_project

N = 128
PRESET_SECONDS = 60.0
P_LIST = [3.0, 2.5, 2.2, 2.1, 2.05, 2.02]


def within(computed: float, reference: float, rel: float = 0.10) -> bool:
    return abs(computed - reference) <= rel * abs(reference)


def verdict(log, k: int, checks: list[tuple[str, bool]]) -> None:
    failed = [name for name, ok in checks if not ok]
    ok = not failed
    detail = "; ".join(name if passed else f"[FAIL] {name}" for name, passed in checks)
    log[k] = (ok, detail)
    print(f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {k}: " + " | ".join(failed)


def cmp(label: str, computed: float, reference: float) -> tuple[str, bool]:
    dev = 100.0 * (computed - reference) / abs(reference)
    return f"{label} {computed:.4g} vs {reference:g} ({dev:+.1f}%)", within(computed, reference)


def run_presets(root) -> dict:
    runs = {}
    for name in PRESETS:
        t0 = time.perf_counter()
        prob = build_problem(preset(name), N)
        oc = solve_problem(prob, root / name, ["gs", "lens"])
        runs[name] = (prob, oc, time.perf_counter() - t0)
    return runs


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    return run_presets(tmp_path_factory.mktemp("presets"))


def preset_checks(runs, name: str) -> list[tuple[str, bool]]:
    prob, oc, secs = runs[name]
    out = [(f"{name} {m} converged" + (f" ({type(e).__name__})" if (e := oc.errors.get(m)) else ""), m in oc.results)
           for m in ("gs", "lens")]
    out.append((f"{name} runtime {secs:.1f} s <= {PRESET_SECONDS:g} s", secs <= PRESET_SECONDS))
    return out


def values(runs, name: str, mode: str) -> dict:
    _, oc, _ = runs[name]
    return extrema_for_comparison(oc.results[mode], preset(name)["reference"][mode])


def test_criterion_1_eigenvalues(acceptance_log):
    sq = eig_smallest(make_op(SQUARE, N), 4)
    rc = eig_smallest(make_op(RECT, N), 2)
    pi2 = math.pi**2
    checks = [
        (f"square lambda1 {sq[1].value:.5f} vs {pi2 / 2:.5f}", within(sq[1].value, pi2 / 2, 0.005)),
        (f"square lambda2 {sq[2].value:.5f} vs {5 * pi2 / 4:.5f}", within(sq[2].value, 5 * pi2 / 4, 0.005)),
        (f"square lambda2 multiplicity {sq[2].multiplicity}", sq[2].multiplicity == 2),
        (f"rectangle lambda1 {rc[1].value:.5f} vs {5 * pi2 / 4:.5f}", within(rc[1].value, 5 * pi2 / 4, 0.005)),
    ]
    verdict(acceptance_log, 1, checks)


def test_criterion_2_square(runs, acceptance_log):
    checks = preset_checks(runs, "square-negconst")
    _, oc, _ = runs["square-negconst"]
    if not oc.errors:
        gs, ln = values(runs, "square-negconst", "gs"), values(runs, "square-negconst", "lens")
        checks += [
            cmp("gs max", gs["max"], 2.18),
            cmp("gs energy", gs["energy"], 2.54),
            cmp("lens max", ln["max"], 4.61),
            cmp("lens |min|", -ln["min"], 4.61),
            cmp("lens energy", ln["energy"], 33.21),
        ]
        rg = oc.symmetry["gs"]
        names = [c.transform for c in rg.entries]
        checks.append((f"gs even under {len(names)} transforms",
                       len(names) == 5 and all(c.label == "even" for c in rg.entries)))
        pi = oc.symmetry["lens"]["point-inversion"]
        checks.append((f"lens point-inversion {pi.label} (odd score {pi.odd_score:.1e})", pi.label == "odd"))
    verdict(acceptance_log, 2, checks)


def test_criterion_3_step10(runs, acceptance_log):
    checks = preset_checks(runs, "rect-step10")
    _, oc, _ = runs["rect-step10"]
    if not oc.errors:
        gs, ln = values(runs, "rect-step10", "gs"), values(runs, "rect-step10", "lens")
        rx = oc.symmetry["lens"]["reflect-x"]
        checks += [
            cmp("gs max", gs["max"], 5.98),
            cmp("gs energy", gs["energy"], 30.98),
            cmp("lens min", ln["min"], -8.67),
            cmp("lens max", ln["max"], 6.53),
            cmp("lens energy", ln["energy"], 76.23),
            (f"lens reflect-x {rx.label}", rx.label == "even"),
        ]
    verdict(acceptance_log, 3, checks)


def test_criterion_4_step35(runs, acceptance_log):
    checks = preset_checks(runs, "rect-step35")
    _, oc, _ = runs["rect-step35"]
    if not oc.errors:
        gs, ln = values(runs, "rect-step35", "gs"), values(runs, "rect-step35", "lens")
        rx = oc.symmetry["lens"]["reflect-x"]
        checks += [
            cmp("gs energy", gs["energy"], 33.14),
            cmp("lens energy", ln["energy"], 181.09),
            (f"lens reflect-x {rx.label} (even {rx.even_score:.3f}, odd {rx.odd_score:.3f})",
             rx.label == "broken" and rx.even_score > 0.05 and rx.odd_score > 0.05),
        ]
    verdict(acceptance_log, 4, checks)


def test_criterion_5_disks(runs, acceptance_log):
    checks = preset_checks(runs, "disk-inverse-r") + preset_checks(runs, "disk-shifted")
    if not runs["disk-inverse-r"][1].errors:
        gs, ln = values(runs, "disk-inverse-r", "gs"), values(runs, "disk-inverse-r", "lens")
        checks += [
            cmp("1/r gs max", gs["max"], 4.15),
            cmp("1/r gs energy", gs["energy"], 29.9),
            cmp("1/r lens max", ln["max"], 6.36),
            cmp("1/r lens |min|", -ln["min"], 6.36),
            cmp("1/r lens energy", ln["energy"], 76.04),
        ]
    prob, oc, _ = runs["disk-shifted"]
    if not oc.errors:
        gs, ln = values(runs, "disk-shifted", "gs"), values(runs, "disk-shifted", "lens")
        checks += [
            cmp("shifted gs max", gs["max"], 4.41),
            cmp("shifted gs energy", gs["energy"], 18.74),
            cmp("shifted lens max", ln["max"], 6.25),
            cmp("shifted lens |min|", -ln["min"], 6.25),
            cmp("shifted lens energy", ln["energy"], 76.23),
        ]
        u = oc.results["gs"].u
        labels = {t.name: classify(prob.op, u, t).label for t in domain_transforms(prob.grid)}
        even = sorted(k for k, v in labels.items() if v == "even")
        checks.append((f"shifted gs even under {even or 'none'}", even == ["reflect-x"]))
    verdict(acceptance_log, 5, checks)


def test_criterion_6_morse(runs, acceptance_log):
    checks = []
    for name in PRESETS:
        _, oc, _ = runs[name]
        for mode, want in (("gs", 1), ("lens", 2)):
            r = oc.results.get(mode)
            idx = r.morse_index if r else None
            checks.append((f"{name} {mode} index {idx}", idx == want))
    verdict(acceptance_log, 6, checks)


def test_criterion_7_properties(acceptance_log):
    rng = np.random.default_rng(7)
    op = make_op(SQUARE, 32, "-pi^2/4")
    checks = []

    params = ProblemParams(4.0, 1.0)
    worst = 0.0
    for _ in range(10):
        u, v = rng.standard_normal((2, op.grid.size))
        eps = 1e-6
        fd = (energy(op, params, u + eps * v) - energy(op, params, u - eps * v)) / (2 * eps)
        an = op.h_inner(grad_H(op, params, u), v)
        worst = max(worst, abs(fd - an) / abs(an))
    checks.append((f"gradient vs central differences {worst:.1e}", worst < 1e-5))

    worst_id = worst_inv = 0.0
    for _ in range(10):
        u = rng.standard_normal(op.grid.size)
        w = nehari_project(op, params, u)
        worst_id = max(worst_id, abs(energy(op, params, w) - 0.25 * op.h_norm_sq(w)) / energy(op, params, w))
        c = rng.uniform(0.1, 10.0)
        worst_inv = max(worst_inv, np.abs(nehari_project(op, params, c * u) - w).max() / np.abs(w).max())
    checks.append((f"Nehari identity {worst_id:.1e}", worst_id < 1e-10))
    checks.append((f"projection scale invariance {worst_inv:.1e}", worst_inv < 1e-12))

    worst_sym = 0.0
    for opx in (op, make_op(RECT, 32, "10*step(x-1)")):
        for t in applicable_transforms(opx.grid, opx.V):
            u = rng.standard_normal(opx.grid.size)
            e0 = energy(opx, params, u)
            worst_sym = max(worst_sym, abs(energy(opx, params, t.apply(u)) - e0) / abs(e0))
    checks.append((f"energy invariance under V-preserving transforms {worst_sym:.1e}", worst_sym < 1e-12))

    S = eig_smallest(op, 6)
    worst_idem = 0.0
    for i in (1, 2, 3):
        u = rng.standard_normal(op.grid.size)
        pu = project_eigenspace(S, i, u)
        worst_idem = max(worst_idem, np.abs(project_eigenspace(S, i, pu) - pu).max() / np.abs(pu).max())
    checks.append((f"eigenprojection idempotence {worst_idem:.1e}", worst_idem < 1e-12))

    seed = "(x-1)*(y-1)*(x+1)*(y+1)"
    p = 3.0
    r1 = ground_state(op, SolveConfig(ProblemParams(p, 1.0), seed, grad_tol=1e-10, morse=False))
    lam = 2.5
    r2 = ground_state(op, SolveConfig(ProblemParams(p, lam), seed, grad_tol=1e-10, morse=False))
    hom = np.abs(lam ** (1 / (p - 2)) * r2.u - r1.u).max() / np.abs(r1.u).max()
    checks.append((f"lambda-homogeneity of the solution map {hom:.1e}", hom < 1e-6))
    verdict(acceptance_log, 7, checks)


def test_criterion_8_asymptotics(acceptance_log):
    prob = build_problem(preset("square-negconst"), N)
    S = prob.spectrum()
    checks = []
    for mode in ("gs", "lens"):
        res = continuation(prob.op, S, P_LIST, mode=mode)
        ps = [s.p for s in res.steps]
        checks.append((f"{mode} all p solved (skipped {res.skipped})", ps == P_LIST))
        d = [s.eigenspace_distance for s in res.steps]
        checks.append((f"{mode} eigenspace distance tail {', '.join(f'{x:.2e}' for x in d[-3:])}",
                       len(d) >= 3 and d[-3] > d[-2] > d[-1]))
        rel = res.steps[-1].distance_to_limit / res.limit_norm
        checks.append((f"{mode} final distance to u* {100 * rel:.2f}% of ||u*||", rel < 0.05))
        for factor, sign, word in ((2.0, -1, "decreasing"), (0.5, 1, "increasing")):
            r = continuation(prob.op, S, P_LIST, mode=mode, lam_factor=factor)
            norms = np.array([s.norm for s in r.steps])
            trend = len(norms) == len(P_LIST) and bool(np.all(sign * np.diff(norms) > 0))
            if sign < 0:
                trend = trend and norms[-1] < 1e-3 * norms[0]
            else:
                trend = trend and norms[-1] > 1e3 * norms[0]
            checks.append((f"{mode} lambda={factor:g}*lambda_i norm {word} ({norms[0]:.2g} -> {norms[-1]:.2g})", trend))
    verdict(acceptance_log, 8, checks)


def test_criterion_9_determinism(runs, tmp_path_factory, acceptance_log):
    again = run_presets(tmp_path_factory.mktemp("presets_again"))
    checks = []
    for name in PRESETS:
        for mode in ("gs", "lens"):
            a = runs[name][1].results.get(mode)
            b = again[name][1].results.get(mode)
            same = a is not None and b is not None and a.u.tobytes() == b.u.tobytes()
            checks.append((f"{name} {mode}", same))
    # byte comparison of the written CSV files as well
    roots = [p for p in tmp_path_factory.getbasetemp().iterdir() if p.name.startswith("presets")]
    if len(roots) == 2:
        for name in PRESETS:
            for mode in ("gs", "lens"):
                fa, fb = (r / name / f"field_{mode}.csv" for r in sorted(roots))
                ok = fa.exists() and fb.exists() and fa.read_bytes() == fb.read_bytes()
                checks.append((f"{name} field_{mode}.csv identical", ok))
    verdict(acceptance_log, 9, checks)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
