"""Command-line front end: run a configured experiment and emit a JSON report.

Exit codes: 0 all checks pass, 1 a certificate failed, 2 configuration error
(including inadmissible solver input), 3 solver non-convergence.

The report is deterministic for a given config and seed except for the
top-level ``"timings"`` block.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from contextlib import contextmanager

import numpy as np

from . import __version__
from .beltrami import solve_beltrami_map
from .cartan import (bracket_contraction_residual, cartan_residual, conjugation_residual,
                     dbar_contraction_residual, integrability_residual, integrable_conjugation_residual)
from .config import (ConfigError, build_form, build_grid, build_patch, build_phi, build_section,
                     iteration_bound, with_defaults)
from .deformation import TorusMap, beltrami_from_map, claim_identity_residual, finite_distance_check
from .extension import InadmissibleInput, extend, solve_pq_extension
from .forms import BeltramiField, FormField, contract, form_keys
from .hodge import (dbar, dbar_adjoint, del_, del_adjoint, green, harmonic_projection, laplacian_dbar,
                    laplacian_del, t_operator)
from .pluri import PluriForm, defect_propagation_residual, extension_coupling, psi_defect, psi_defect_local
from .spectral import TorusGrid

EXIT_OK, EXIT_CERT, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2, 3


class Run:
    """Collects checks, observations and timings for one report."""

    def __init__(self):
        self.checks: list[dict] = []
        self.observations: dict = {}
        self.results: dict = {}
        self.timings: dict = {}
        self.nonconverged = False
        self.csv: dict[str, tuple[list[str], list[list]]] = {}

    def check(self, name: str, value: float, threshold: float, bound: str = "max") -> bool:
        value = float(value)
        ok = (value <= threshold) if bound == "max" else (value >= threshold)
        ok = bool(ok and not math.isnan(value))
        self.checks.append({"name": name, "value": value, "threshold": float(threshold),
                            "bound": bound, "passed": ok})
        return ok

    @contextmanager
    def timed(self, name: str):
        t0 = time.perf_counter()
        yield
        self.timings[name] = time.perf_counter() - t0

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def _rel(num: float, den: float) -> float:
    return num / den if den > 0 else num


# ----------------------------------------------------------------- commands

def _all_bidegrees(n: int):
    return [(p, q) for p in range(n + 1) for q in range(n + 1)]


def _shear_map(grid: TorusGrid, amplitude: float) -> TorusMap:
    """``F^i = z^i + amplitude c^i s(z^1 + z^2)``, ``c = (1, -1)``: band-limited integrable phi, linear in amplitude."""
    terms = [(0.5, (1, 0, 1, 0)), (0.5j, (0, 1, 0, 1)), (0.25, (1, -1, 1, -1))]
    comp = [(amplitude * c, k) for c, k in terms]
    return TorusMap.from_terms(grid, [comp, [(-c, k) for c, k in comp]])


def cmd_verify_ops(cfg: dict, run: Run) -> None:
    grid = build_grid(cfg)
    n, band, cband = grid.n, cfg["band"], cfg["cartan_band"]
    rng = np.random.default_rng(cfg["seed"])
    worst = {k: 0.0 for k in ("roundtrip", "parseval", "adj_dbar", "adj_del", "dd", "box_green", "green_box",
                              "dbar_green", "dbar_adj_green", "harmonic_green", "harmonic_dbar",
                              "kahler", "quasi_isometry", "energy")}
    for _ in range(cfg["samples"]):
        for p, q in _all_bidegrees(n):
            s = FormField.random(grid, p, q, rng, band)
            ns = s.norm()
            coef = grid.fft(s.data)
            worst["roundtrip"] = max(worst["roundtrip"], np.abs(grid.ifft(coef) - s.data).max() / np.abs(s.data).max())
            pars = math.sqrt(2.0 ** (p + q) * grid.volume * np.sum(np.abs(coef) ** 2))
            worst["parseval"] = max(worst["parseval"], abs(pars - ns) / ns)
            if q < n:
                b = FormField.random(grid, p, q + 1, rng, band)
                lhs, rhs = dbar(s).inner(b), s.inner(dbar_adjoint(b))
                worst["adj_dbar"] = max(worst["adj_dbar"], abs(lhs - rhs) / (dbar(s).norm() * b.norm()))
            if p < n:
                b = FormField.random(grid, p + 1, q, rng, band)
                lhs, rhs = del_(s).inner(b), s.inner(del_adjoint(b))
                worst["adj_del"] = max(worst["adj_del"], abs(lhs - rhs) / (del_(s).norm() * b.norm()))
            dd = [dbar(dbar(s)).norm(), del_(del_(s)).norm(), (del_(dbar(s)) + dbar(del_(s))).norm()]
            worst["dd"] = max(worst["dd"], max(dd) / ns)
            hs = harmonic_projection(s)
            worst["box_green"] = max(worst["box_green"], (laplacian_dbar(green(s)) - (s - hs)).norm() / ns)
            worst["green_box"] = max(worst["green_box"], (green(laplacian_dbar(s)) - (s - hs)).norm() / ns)
            worst["dbar_green"] = max(worst["dbar_green"], (dbar(green(s)) - green(dbar(s))).norm() / ns)
            worst["dbar_adj_green"] = max(worst["dbar_adj_green"],
                                          (dbar_adjoint(green(s)) - green(dbar_adjoint(s))).norm() / ns)
            worst["harmonic_green"] = max(worst["harmonic_green"], harmonic_projection(green(s)).norm() / ns,
                                          green(hs).norm() / ns)
            worst["harmonic_dbar"] = max(worst["harmonic_dbar"], dbar(hs).norm() / ns,
                                         harmonic_projection(dbar(s)).norm() / ns,
                                         dbar_adjoint(hs).norm() / ns, harmonic_projection(dbar_adjoint(s)).norm() / ns)
            worst["kahler"] = max(worst["kahler"], (laplacian_dbar(s) - laplacian_del(s)).norm() / ns)
            t = t_operator(s)
            worst["quasi_isometry"] = max(worst["quasi_isometry"], t.norm() / ns)
            if not t.is_empty:
                gd = green(del_(s))
                da = del_adjoint(s)
                energy = (ns ** 2 - hs.norm() ** 2 - (da.inner(green(da))).real - dbar(gd).norm() ** 2)
                worst["energy"] = max(worst["energy"], abs(t.norm() ** 2 - energy) / ns ** 2)
    for name, thr in (("transform_roundtrip", 1e-13), ("parseval", 1e-12), ("adjoint_dbar", 1e-12),
                      ("adjoint_del", 1e-12), ("d_squared", 1e-13), ("box_green", 1e-12), ("green_box", 1e-12),
                      ("dbar_green_commute", 1e-12), ("dbar_adjoint_green_commute", 1e-12),
                      ("harmonic_green_zero", 1e-12), ("harmonic_dbar_zero", 1e-12), ("kahler_identity", 1e-12),
                      ("energy_identity", 1e-10)):
        key = {"transform_roundtrip": "roundtrip", "adjoint_dbar": "adj_dbar", "adjoint_del": "adj_del",
               "d_squared": "dd", "dbar_green_commute": "dbar_green", "dbar_adjoint_green_commute": "dbar_adj_green",
               "harmonic_green_zero": "harmonic_green", "harmonic_dbar_zero": "harmonic_dbar",
               "kahler_identity": "kahler", "energy_identity": "energy"}.get(name, name)
        run.check(name, worst[key], thr)
    run.check("quasi_isometry_ratio", worst["quasi_isometry"], 1 + 1e-12)

    cart = {"cartan": 0.0, "self_bracket": 0.0, "conjugation": 0.0, "dbar_commutator": 0.0}
    for _ in range(cfg["samples"]):
        phi = BeltramiField.random(grid, rng, 0.5, cband)
        psi = BeltramiField.random(grid, rng, 0.5, cband)
        for p in range(1, n + 1):
            s = FormField.random(grid, p, 0, rng, cband)
            cart["cartan"] = max(cart["cartan"], cartan_residual(phi, psi, s))
            cart["self_bracket"] = max(cart["self_bracket"], bracket_contraction_residual(phi, s))
            cart["conjugation"] = max(cart["conjugation"], conjugation_residual(phi, s))
            cart["dbar_commutator"] = max(cart["dbar_commutator"], dbar_contraction_residual(phi, s))
    for k, v in cart.items():
        run.check(f"{k}_residual", v, 1e-8)
    phi_int = _shear_map(grid, 0.2) if n == 2 else None
    phi_int = beltrami_from_map(phi_int) if phi_int is not None else BeltramiField.random(grid, rng, 0.5, cband)
    worst_int = 0.0
    for p in range(1, n + 1):
        s = FormField.random(grid, p, 0, rng, cband)
        worst_int = max(worst_int, integrable_conjugation_residual(phi_int, s))
    run.check("integrable_conjugation_residual", worst_int, 1e-8)
    run.check("integrability_residual", integrability_residual(phi_int), 1e-10)


def _solve_checks(run: Run, rep, cfg: dict, sup: float, equation: str = "extension_residual") -> None:
    tol = cfg["tol"]
    run.check(equation, rep.extension_residual, tol)
    run.check("fixed_point_residual", rep.fixed_point_residual, tol)
    run.check("harmonic_defect", rep.harmonic_defect, 1e-10)
    run.check("iterations", rep.iterations, iteration_bound(sup, tol))


def _history_csv(run: Run, name: str, history) -> None:
    run.csv[name] = (["iteration", "residual"], [[i + 1, v] for i, v in enumerate(history)])


def _admissible(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except InadmissibleInput as exc:
        raise ConfigError(str(exc)) from None


def cmd_extend(cfg: dict, run: Run) -> None:
    grid = build_grid(cfg)
    with run.timed("setup"):
        phi, F = build_phi(cfg, grid)
        omega0 = build_form(cfg, grid)
    if omega0.bidegree != (grid.n, 0):
        raise ConfigError("extend needs an (n,0)-form; use pq-extend for other bidegrees")
    sup = phi.sup_norm()
    run.results["sup_norm"] = sup
    run.results["finite_distance_margin"] = finite_distance_check(phi).margin
    with run.timed("solve"):
        rho, rep = _admissible(extend, omega0, phi, cfg["tol"], cfg["max_iter"])
    run.results["solve"] = rep.to_dict()
    _history_csv(run, "extend_residuals", rep.residual_history)
    if rho is None:
        run.nonconverged = True
        return
    _solve_checks(run, rep, cfg, sup)
    run.check("dclosed_residual", rep.dclosed_residual, 10 * cfg["tol"])


def cmd_pq_extend(cfg: dict, run: Run) -> None:
    grid = build_grid(cfg)
    with run.timed("setup"):
        phi, F = build_phi(cfg, grid)
        s0 = build_form(cfg, grid)
    sup = phi.sup_norm()
    run.results["sup_norm"] = sup
    with run.timed("solve"):
        s, rep = _admissible(solve_pq_extension, s0, phi, cfg["tol"], cfg["max_iter"])
    run.results["solve"] = rep.to_dict()
    _history_csv(run, "pq_extend_residuals", rep.residual_history)
    if s is None:
        run.nonconverged = True
        return
    _solve_checks(run, rep, cfg, sup, "dbar_equation_residual")
    run.observations["del_residual"] = rep.del_residual


def cmd_beltrami(cfg: dict, run: Run) -> None:
    grid = build_grid(cfg)
    if grid.n != 1:
        raise ConfigError("beltrami runs in complex dimension 1")
    mu, F = build_phi(cfg, grid)
    try:
        with run.timed("solve"):
            f, rep = solve_beltrami_map(mu, cfg["tol"], cfg["max_iter"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    run.results["solve"] = rep.to_dict()
    run.results["sup_mu"] = mu.sup_norm()
    if f is not None:
        run.results["A"], run.results["B"] = f.A, f.B
    _history_csv(run, "beltrami_residuals", rep.solve.residual_history)
    if f is None:
        run.nonconverged = True
        return
    tol = cfg["tol"]
    run.check("one_form_residual", rep.solve.extension_residual, tol)
    run.check("equation_residual", rep.equation_residual, 10 * tol)
    run.check("type_split_residual", rep.type_split_residual, 10 * tol)
    run.check("integration_residual", rep.integration_residual, 1e-9)
    run.check("orientation_margin", rep.orientation_margin, 0.0, bound="min")
    if cfg["compare_map"]:
        if F is None:
            raise ConfigError("compare_map needs phi.kind 'from-map'")
        ref = F.values[0]
        ref = (ref - ref.flat[0]) / np.mean(F.a[..., 0, 0])
        run.check("map_recovery_error", np.abs(f.values - ref).max(), 1e-7)
    residual = np.abs(f.dzbar() - mu.data[0, 0] * f.dz())
    x, y = np.broadcast_arrays(grid.x(0), grid.y(0))
    vals = f.values
    run.csv["beltrami_map"] = (["x", "y", "re_f", "im_f", "residual"],
                               [list(r) for r in zip(x.ravel(), y.ravel(), vals.real.ravel(), vals.imag.ravel(),
                                                     residual.ravel())])


def cmd_pluri_check(cfg: dict, run: Run) -> None:
    grid = build_grid(cfg)
    m = cfg["m"]
    phi, F = build_phi(cfg, grid)
    patch = build_patch(cfg, grid)
    sigma = PluriForm(grid, build_section(cfg, grid, F), m)
    run.results["positivity_margin"] = patch.positivity_margin
    run.check("kahler_symmetry", patch.kahler_symmetry_residual(), 1e-10)
    run.check("kahler_closedness", patch.closedness_residual(), 1e-10)
    glob = psi_defect(sigma, phi, patch)
    loc = psi_defect_local(sigma, phi)
    scale = max(1.0, sigma.form.norm())
    run.check("global_local_defect", (glob - loc).norm() / scale, 1e-9)
    coup = extension_coupling(sigma, phi, patch)
    run.results["defect_norm"] = coup.global_norm
    if cfg["section"]["kind"] == "map-det":
        run.check("defect_vanishes", coup.global_norm, 1e-9)
    if F is not None:
        run.check("trace_identity", float(np.max(claim_identity_residual(F, phi, spectral_rhs=False))), 1e-8)
    if grid.n == 2:
        if integrability_residual(phi) > 1e-8:
            raise ConfigError("pluri-check needs an integrable phi")
        run.check("defect_propagation", defect_propagation_residual(sigma, phi, patch), 1e-7)


def cmd_bench(cfg: dict, run: Run) -> None:
    n = cfg["grid"]["n"]
    rows = []
    for N in cfg["sizes"]:
        try:
            grid = TorusGrid(n, N)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        rng = np.random.default_rng(cfg["seed"])
        f = grid.random_values(rng)
        g = FormField.random(grid, n - 1, 1, rng)
        omega0 = FormField.constant(grid, n, 0, [1.0])
        F = TorusMap.random(grid, rng, 0.3, 1)
        phi = beltrami_from_map(F)

        def best(fn):
            times = []
            for _ in range(cfg["repeats"]):
                t0 = time.perf_counter()
                out = fn()
                times.append(time.perf_counter() - t0)
            return min(times), out

        t_fft, _ = best(lambda: grid.ifft(grid.fft(f)))
        t_T, _ = best(lambda: t_operator(g))
        t_zero, _ = best(lambda: solve_pq_extension(omega0, BeltramiField.zeros(grid), cfg["tol"], cfg["max_iter"]))
        t_solve, (_, rep) = best(lambda: solve_pq_extension(omega0, phi, cfg["tol"], cfg["max_iter"]))
        rows.append([n, N, grid.size, t_fft, t_T, t_zero, t_solve, rep.iterations])
        run.results.setdefault("iterations", []).append(rep.iterations)
    run.timings["bench"] = [dict(zip(["n", "N", "points", "transform_s", "t_apply_s", "solve_zero_phi_s",
                                      "solve_s", "iterations"], r)) for r in rows]
    run.check("bench_rows", len(rows), len(cfg["sizes"]), bound="min")
    run.csv["bench"] = (["n", "N", "points", "transform_s", "t_apply_s", "solve_zero_phi_s", "solve_s",
                         "iterations"], rows)


COMMAND_TABLE = {"verify-ops": cmd_verify_ops, "extend": cmd_extend, "pq-extend": cmd_pq_extend,
                 "beltrami": cmd_beltrami, "pluri-check": cmd_pluri_check, "bench": cmd_bench}


# ------------------------------------------------------------------ driver

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def run_config(cfg: dict) -> tuple[dict, int, Run]:
    """Execute a raw (not yet defaulted) config; returns ``(report, exit_code, run)``."""
    try:
        full = with_defaults(cfg)
    except ConfigError as exc:
        return {"tool": "hodgekit", "version": __version__, "error": str(exc), "exit_code": EXIT_CONFIG}, EXIT_CONFIG, Run()
    run = Run()
    try:
        with run.timed("total"):
            COMMAND_TABLE[full["command"]](full, run)
    except ConfigError as exc:
        report = {"tool": "hodgekit", "version": __version__, "command": full["command"], "config": full,
                  "error": str(exc), "exit_code": EXIT_CONFIG}
        return _jsonable(report), EXIT_CONFIG, run
    code = EXIT_NONCONVERGED if run.nonconverged else (EXIT_OK if run.passed else EXIT_CERT)
    report = {
        "tool": "hodgekit",
        "version": __version__,
        "command": full["command"],
        "config": full,
        "checks": run.checks,
        "observations": run.observations,
        "results": run.results,
        "passed": code == EXIT_OK,
        "exit_code": code,
        "timings": run.timings,
    }
    return _jsonable(report), code, run


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def write_csvs(run: Run, directory: str) -> list[str]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, (header, rows) in run.csv.items():
        path = os.path.join(directory, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([[repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r] for r in rows])
        paths.append(path)
    return paths


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hodgekit", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--out", help="write the JSON report here (default: stdout)")
    ap.add_argument("--csv", help="directory for CSV traces")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--tol", type=float, help="override the solver tolerance")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"hodgekit: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(cfg, dict):
        print("hodgekit: config must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.tol is not None:
        cfg["tol"] = args.tol
    report, code, run = run_config(cfg)
    text = dumps(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.csv and run.csv:
        write_csvs(run, args.csv)
    if code == EXIT_CONFIG:
        print(f"hodgekit: {report.get('error', 'configuration error')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
