"""Experiment configuration: JSON schema, explicit defaults and builders for fields.

Complex numbers are written either as plain numbers or as ``[re, im]`` pairs.
Every default is materialized by :func:`with_defaults`, so the echoed config in
a report is complete and can be re-run as is.
"""

from __future__ import annotations

import copy
import math

import jsonschema
import numpy as np

from .deformation import TorusMap, beltrami_from_map, map_with_sup_norm
from .forms import BeltramiField, FormField, form_keys
from .pluri import KahlerPatch
from .spectral import TorusGrid

COMMANDS = ("verify-ops", "extend", "pq-extend", "beltrami", "pluri-check", "bench")


class ConfigError(ValueError):
    """Invalid or inadmissible experiment configuration (exit code 2)."""


_complex = {"oneOf": [{"type": "number"},
                      {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_term = {"type": "object", "required": ["coef", "k"], "additionalProperties": False,
         "properties": {"coef": _complex, "k": {"type": "array", "items": {"type": "integer"}}}}
_matrix = {"type": "array", "items": {"type": "array", "items": _complex}}

SCHEMA = {
    "type": "object",
    "required": ["command"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "grid": {"type": "object", "additionalProperties": False,
                 "properties": {"n": {"enum": [1, 2]}, "N": {"type": "integer", "minimum": 8}}},
        "phi": {"type": "object", "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["zero", "constant", "from-map", "random-band-limited", "random-map"]},
                    "values": _matrix,
                    "terms": {"type": "array", "items": {"type": "array", "items": _term}},
                    "linear": _matrix, "antilinear": _matrix,
                    "seed": {"type": "integer", "minimum": 0},
                    "band": {"type": "integer", "minimum": 0},
                    "amplitude": {"type": "number", "exclusiveMinimum": 0},
                    "sup_norm": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "scale": {"type": "number"},
                }, "additionalProperties": False},
        "form": {"type": "object", "additionalProperties": False,
                 "properties": {"bidegree": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                             "minItems": 2, "maxItems": 2},
                                "coeffs": {"type": "array", "items": _complex}}},
        "section": {"type": "object", "required": ["kind"], "additionalProperties": False,
                    "properties": {"kind": {"enum": ["constant", "random", "map-det"]},
                                   "value": _complex, "seed": {"type": "integer", "minimum": 0},
                                   "band": {"type": "integer", "minimum": 0}}},
        "patch": {"type": "object", "required": ["kind"], "additionalProperties": False,
                  "properties": {"kind": {"enum": ["flat", "terms", "random"]},
                                 "terms": {"type": "array", "items": _term},
                                 "seed": {"type": "integer", "minimum": 0},
                                 "strength": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                                 "band": {"type": "integer", "minimum": 1},
                                 "min_margin": {"type": "number", "minimum": 0}}},
        "m": {"type": "integer", "minimum": 2},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "band": {"type": ["integer", "null"], "minimum": 0},
        "cartan_band": {"type": ["integer", "null"], "minimum": 1},
        "sizes": {"type": "array", "items": {"type": "integer", "minimum": 8}, "minItems": 1},
        "repeats": {"type": "integer", "minimum": 1},
        "compare_map": {"type": "boolean"},
    },
}


def _default_form(n: int, command: str) -> dict:
    if command == "pq-extend" and n == 2:
        return {"bidegree": [1, 1], "coeffs": [1.0, 0.0, 0.0, 1.0]}
    return {"bidegree": [n, 0], "coeffs": [1.0]}


def with_defaults(cfg: dict) -> dict:
    """Validate against :data:`SCHEMA` and fill in every default explicitly."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config at {'/'.join(map(str, exc.absolute_path)) or '<root>'}: {exc.message}") from None
    out = copy.deepcopy(cfg)
    cmd = out["command"]
    grid = out.setdefault("grid", {})
    grid.setdefault("n", 1 if cmd == "beltrami" else 2)
    grid.setdefault("N", 64 if grid["n"] == 1 else 16)
    n, N = grid["n"], grid["N"]
    if N & (N - 1):
        raise ConfigError(f"grid.N must be a power of two, got {N}")
    out.setdefault("seed", 0)
    out.setdefault("tol", 1e-10)
    out.setdefault("max_iter", 400)
    phi = out.setdefault("phi", {"kind": "zero"})
    if phi["kind"] == "random-band-limited":
        phi.setdefault("seed", out["seed"])
        phi.setdefault("band", N // 4)
        phi.setdefault("amplitude", 0.3)
    elif phi["kind"] == "random-map":
        phi.setdefault("seed", out["seed"])
        phi.setdefault("band", 1)
        phi.setdefault("sup_norm", 0.3)
    elif phi["kind"] == "from-map":
        if "terms" not in phi:
            raise ConfigError("phi.kind 'from-map' needs 'terms'")
        phi.setdefault("linear", np.eye(n).tolist())
        phi.setdefault("antilinear", np.zeros((n, n)).tolist())
    elif phi["kind"] == "constant" and "values" not in phi:
        raise ConfigError("phi.kind 'constant' needs 'values'")
    if cmd in ("extend", "pq-extend"):
        form = out.setdefault("form", _default_form(n, cmd))
        form.setdefault("bidegree", _default_form(n, cmd)["bidegree"])
        form.setdefault("coeffs", [1.0] * len(form_keys(n, *form["bidegree"])))
    if cmd == "pluri-check":
        out.setdefault("m", 2)
        sec = out.setdefault("section", {"kind": "random"})
        if sec["kind"] == "random":
            sec.setdefault("seed", out["seed"])
            sec.setdefault("band", max(1, N // 8))
        elif sec["kind"] == "constant":
            sec.setdefault("value", 1.0)
        patch = out.setdefault("patch", {"kind": "flat"})
        if patch["kind"] == "random":
            patch.setdefault("seed", out["seed"])
            patch.setdefault("strength", 0.3)
            patch.setdefault("band", 1)
        patch.setdefault("min_margin", 0.1)
    if cmd == "verify-ops":
        out.setdefault("samples", 5)
        out.setdefault("band", N // 4)
        out.setdefault("cartan_band", max(1, N // 8))
    if cmd == "beltrami":
        out.setdefault("compare_map", phi["kind"] == "from-map")
    if cmd == "bench":
        out.setdefault("sizes", [32, 64, 128] if n == 1 else [8, 16, 32])
        out.setdefault("repeats", 3)
    return out


def as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def complex_matrix(rows) -> np.ndarray:
    return np.array([[as_complex(v) for v in row] for row in rows])


def build_grid(cfg: dict) -> TorusGrid:
    try:
        return TorusGrid(cfg["grid"]["n"], cfg["grid"]["N"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _terms(part) -> list:
    return [[(as_complex(t["coef"]), t["k"]) for t in comp] for comp in part]


def build_phi(cfg: dict, grid: TorusGrid):
    """Return ``(phi, source_map_or_None)``."""
    part = cfg["phi"]
    kind = part["kind"]
    try:
        if kind == "zero":
            return BeltramiField.zeros(grid), None
        if kind == "constant":
            m = complex_matrix(part["values"])
            if m.shape != (grid.n, grid.n):
                raise ConfigError(f"phi.values must be {grid.n}x{grid.n}")
            return BeltramiField.constant(grid, m), None
        if kind == "random-band-limited":
            rng = np.random.default_rng(part["seed"])
            return BeltramiField.random(grid, rng, part["amplitude"], part["band"]), None
        if kind == "random-map":
            F = map_with_sup_norm(grid, np.random.default_rng(part["seed"]), part["sup_norm"], part["band"])
            return beltrami_from_map(F), F
        F = TorusMap.from_terms(grid, _terms(part["terms"]), complex_matrix(part["linear"]),
                                complex_matrix(part["antilinear"]))
        return beltrami_from_map(F), F
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"phi: {exc}") from None


def build_form(cfg: dict, grid: TorusGrid) -> FormField:
    part = cfg["form"]
    p, q = part["bidegree"]
    if p > grid.n or q > grid.n:
        raise ConfigError(f"bidegree ({p},{q}) exceeds dimension {grid.n}")
    try:
        return FormField.constant(grid, p, q, [as_complex(c) for c in part["coeffs"]])
    except ValueError as exc:
        raise ConfigError(f"form: {exc}") from None


def build_patch(cfg: dict, grid: TorusGrid) -> KahlerPatch:
    part = cfg["patch"]
    try:
        if part["kind"] == "flat":
            return KahlerPatch.flat(grid)
        if part["kind"] == "random":
            p = KahlerPatch.random(grid, np.random.default_rng(part["seed"]), part["strength"], part["band"])
        else:
            p = KahlerPatch.from_terms(grid, [(as_complex(t["coef"]), t["k"]) for t in part["terms"]])
    except ValueError as exc:
        raise ConfigError(f"patch: {exc}") from None
    if p.positivity_margin <= part["min_margin"]:
        raise ConfigError(f"patch positivity margin {p.positivity_margin:.4g} <= {part['min_margin']}")
    return p


def build_section(cfg: dict, grid: TorusGrid, source_map) -> np.ndarray:
    part = cfg["section"]
    if part["kind"] == "constant":
        return np.full(grid.shape, as_complex(part["value"]))
    if part["kind"] == "random":
        return grid.random_values(np.random.default_rng(part["seed"]), part["band"])
    if source_map is None:
        raise ConfigError("section.kind 'map-det' needs a map-generated phi")
    return np.linalg.det(source_map.a) ** cfg["m"]


def iteration_bound(sup: float, tol: float, margin: int = 5) -> int:
    """``ceil(log tol / log sup) + margin``; one step suffices when ``sup == 0``."""
    if sup <= 0.0:
        return 1 + margin
    return math.ceil(math.log(tol) / math.log(sup)) + margin
