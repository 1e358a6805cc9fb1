"""Experiment configuration: strict JSON schema validation and built-in presets.

A config is a plain JSON object; unknown keys are rejected everywhere.  The
lattice block follows the documented schema

    {"dimension": d,
     "hoppings": [{"delta": [...], "amp": [re, im]}, ...],
     "onsite": [re, im],
     "extents": [...],
     "mask": [[...], ...] | "letter": "P",
     "boundary": ["pbc" | "obc" | {"gbc": g}, ...]}

and cost guards (dense eigensolves N <= 2000, moments m <= 20, exhaustive
walk DFS N <= 8) are enforced during validation, before any computation runs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any

from .dynamics import PT_ALPHA_CALIBRATED
from .errors import ConfigError
from .lattice import (
    AxisClosure,
    BoundarySpec,
    LatticeDomain,
    LatticeModel,
    build_domain,
    letter_mask,
    model_from_hoppings,
)

__all__ = [
    "ExperimentConfig",
    "validate_config",
    "preset_names",
    "preset",
    "DEFAULT_TOLERANCES",
    "fig3_3d_hoppings",
]

KINDS = ("spectrum", "moments", "scaling", "walks", "greens", "dynamics", "sweep")

MAX_EIGEN_SITES = 2000
MAX_MOMENT_ORDER = 20
MAX_DFS_SITES = 8

DEFAULT_TOLERANCES: dict[str, float] = {
    "greens_residual_flag": 1e-6,
    "check_rel": 1e-8,
    "check_bulk_rel": 1e-12,
}


@dataclass
class ExperimentConfig:
    """Validated experiment description ready to run."""

    kind: str
    model: LatticeModel | None
    domain: LatticeDomain | None
    boundary: BoundarySpec | None
    params: dict[str, Any]
    sweep: dict[str, list]
    seed: int
    tolerances: dict[str, float]
    base: "ExperimentConfig | None" = None
    raw: dict = field(default_factory=dict)


def _require_keys(obj: dict, allowed: set[str], context: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {context}")


def _complex_pair(value, context: str) -> complex:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(f"{context} must be a [re, im] pair")
    try:
        return complex(float(value[0]), float(value[1]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context} must hold two numbers") from exc


def _parse_boundary(spec, dim: int) -> BoundarySpec:
    if not isinstance(spec, list) or len(spec) != dim:
        raise ConfigError(f"boundary must list one closure per axis ({dim})")
    axes = []
    for i, entry in enumerate(spec):
        if entry == "obc":
            axes.append(AxisClosure("obc"))
        elif entry == "pbc":
            axes.append(AxisClosure("pbc"))
        elif isinstance(entry, dict):
            _require_keys(entry, {"gbc"}, f"boundary[{i}]")
            try:
                axes.append(AxisClosure("gbc", float(entry["gbc"])))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"boundary[{i}].gbc must be a number") from exc
        else:
            raise ConfigError(f"boundary[{i}] must be 'obc', 'pbc' or {{'gbc': g}}")
    return BoundarySpec(tuple(axes))


def _parse_lattice(block: dict) -> tuple[LatticeModel, LatticeDomain, BoundarySpec]:
    _require_keys(
        block,
        {"dimension", "hoppings", "onsite", "extents", "mask", "letter", "boundary"},
        "lattice",
    )
    for key in ("dimension", "extents", "boundary"):
        if key not in block:
            raise ConfigError(f"lattice block is missing {key!r}")
    dim = block["dimension"]
    if not isinstance(dim, int) or not (1 <= dim <= 3):
        raise ConfigError("lattice.dimension must be an integer in 1..3")
    hop_entries = block.get("hoppings", [])
    if not isinstance(hop_entries, list):
        raise ConfigError("lattice.hoppings must be a list")
    hoppings = []
    for i, entry in enumerate(hop_entries):
        if not isinstance(entry, dict):
            raise ConfigError(f"lattice.hoppings[{i}] must be an object")
        _require_keys(entry, {"delta", "amp"}, f"lattice.hoppings[{i}]")
        delta = entry.get("delta")
        if not isinstance(delta, list) or len(delta) != dim:
            raise ConfigError(f"lattice.hoppings[{i}].delta must list {dim} integers")
        hoppings.append((tuple(int(c) for c in delta), _complex_pair(entry.get("amp"), f"lattice.hoppings[{i}].amp")))
    onsite = _complex_pair(block.get("onsite", [0.0, 0.0]), "lattice.onsite")
    extents = block["extents"]
    if not isinstance(extents, list) or len(extents) != dim:
        raise ConfigError(f"lattice.extents must list {dim} positive integers")
    if "mask" in block and "letter" in block:
        raise ConfigError("lattice.mask and lattice.letter are mutually exclusive")
    try:
        model = model_from_hoppings(dim, hoppings, onsite)
        if "letter" in block:
            mask = letter_mask(block["letter"], extents)
        else:
            mask = [tuple(s) for s in block.get("mask", [])]
        domain = build_domain(extents, mask)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    boundary = _parse_boundary(block["boundary"], dim)
    if domain.n_sites > MAX_EIGEN_SITES:
        raise ConfigError(
            f"domain holds {domain.n_sites} sites; dense runs are limited to "
            f"N <= {MAX_EIGEN_SITES}"
        )
    return model, domain, boundary


_PARAM_KEYS: dict[str, set[str]] = {
    "spectrum": set(),
    "moments": {"m_max"},
    "scaling": {"m", "sizes"},
    "walks": {"m", "method"},
    "greens": {"spacing", "margin", "sigma_noise"},
    "dynamics": {
        "pt_gamma",
        "pt_alpha",
        "t0",
        "sigma",
        "duration",
        "carrier",
        "source",
        "m_max",
        "find_critical",
        "critical_bracket",
    },
    "sweep": set(),
}

_SWEEP_AXES = {"g", "N", "m_max", "gamma", "boundary", "letter"}


def _validate_params(kind: str, params: dict) -> dict:
    _require_keys(params, _PARAM_KEYS[kind], f"params ({kind})")
    out = dict(params)
    m_like = out.get("m_max", out.get("m"))
    if m_like is not None:
        if not isinstance(m_like, int) or m_like < 1 or m_like > MAX_MOMENT_ORDER:
            raise ConfigError(f"moment order must be an integer in 1..{MAX_MOMENT_ORDER}")
    if kind == "walks" and out.get("method", "propagate") not in ("propagate", "dfs"):
        raise ConfigError("walks.method must be 'propagate' or 'dfs'")
    if kind == "scaling":
        sizes = out.get("sizes")
        if sizes is not None and (
            not isinstance(sizes, list)
            or any(not isinstance(n, int) or n < 2 for n in sizes)
            or len(sizes) < 3
        ):
            raise ConfigError("scaling.sizes must list at least 3 integers >= 2")
    return out


def validate_config(raw: dict) -> ExperimentConfig:
    """Validate a raw config dict; raises ConfigError on any violation."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(
        raw,
        {"kind", "lattice", "params", "sweep", "seed", "tolerances", "base", "output"},
        "config",
    )
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    tolerances = dict(DEFAULT_TOLERANCES)
    tol_block = raw.get("tolerances", {})
    if not isinstance(tol_block, dict):
        raise ConfigError("tolerances must be an object")
    for key, val in tol_block.items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {key!r}")
        tolerances[key] = float(val)

    sweep = raw.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigError("sweep must be an object of axis lists")
    _require_keys(sweep, _SWEEP_AXES, "sweep")
    for axis, values in sweep.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{axis} must be a nonempty list")

    if kind == "sweep":
        if "base" not in raw or not isinstance(raw["base"], dict):
            raise ConfigError("sweep kind requires a 'base' config object")
        if "lattice" in raw or "params" in raw:
            raise ConfigError("sweep kind carries lattice/params inside 'base'")
        base = validate_config(raw["base"])
        if base.kind == "sweep":
            raise ConfigError("sweep base must not itself be a sweep")
        return ExperimentConfig(
            kind="sweep",
            model=None,
            domain=None,
            boundary=None,
            params={},
            sweep={k: list(v) for k, v in sweep.items()},
            seed=seed,
            tolerances=tolerances,
            base=base,
            raw=copy.deepcopy(raw),
        )

    params = _validate_params(kind, raw.get("params", {}))
    model = domain = boundary = None
    if kind == "dynamics" and "pt_gamma" in params:
        # model generated from the PT family; lattice block only sets the box
        block = raw.get("lattice")
        if block is None:
            raise ConfigError("dynamics config needs a lattice block (extents/boundary)")
        block = dict(block)
        block.setdefault("hoppings", [])
        model, domain, boundary = _parse_lattice(block)
        from .dynamics import pt_model

        onsite = model.onsite if (model.hoppings or model.onsite != 0) else None
        alpha = params.get("pt_alpha", PT_ALPHA_CALIBRATED)
        try:
            model = (
                pt_model(params["pt_gamma"], alpha)
                if onsite is None
                else pt_model(params["pt_gamma"], alpha, onsite=onsite)
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        block = raw.get("lattice")
        if block is None:
            raise ConfigError(f"{kind} config needs a lattice block")
        model, domain, boundary = _parse_lattice(block)
    if kind == "walks":
        m = params.get("m", 4)
        if domain.n_sites > 200:
            raise ConfigError("walks runs are limited to N <= 200")
        if params.get("method") == "dfs" and domain.n_sites > MAX_DFS_SITES:
            raise ConfigError(f"exhaustive DFS walks are limited to N <= {MAX_DFS_SITES}")
        if m > 8:
            raise ConfigError("walks.m is limited to m <= 8")
    return ExperimentConfig(
        kind=kind,
        model=model,
        domain=domain,
        boundary=boundary,
        params=params,
        sweep={k: list(v) for k, v in sweep.items()},
        seed=seed,
        tolerances=tolerances,
        raw=copy.deepcopy(raw),
    )


# ---------------------------------------------------------------------------
# presets: parameters transcribed from the figure captions
# ---------------------------------------------------------------------------

def _fig2_lattice(kp, km, kappa, n, boundary):
    return {
        "dimension": 1,
        "hoppings": [
            {"delta": [2], "amp": [kp, 0.0]},
            {"delta": [-2], "amp": [km, 0.0]},
            {"delta": [1], "amp": [kappa, 0.0]},
            {"delta": [-1], "amp": [kappa, 0.0]},
        ],
        "onsite": [1038.0, -4.5],
        "extents": [n],
        "boundary": boundary,
    }


def fig3_3d_hoppings(conjugate_pair: bool = False) -> list[dict]:
    """3D hopping table; the chiral kappa_a pair is read literally as the two
    displacements (+1,-1,+1) and (+1,+1,-1); ``conjugate_pair`` adds their
    opposites for the alternative reading of the caption formula."""
    hops = [
        {"delta": [1, 0, 0], "amp": [0.0, 1.0]},
        {"delta": [-1, 0, 0], "amp": [0.0, 1.0]},
        {"delta": [0, 1, 0], "amp": [1.0, 0.0]},
        {"delta": [0, -1, 0], "amp": [1.0, 0.0]},
        {"delta": [0, 0, 1], "amp": [0.0, 1.0]},
        {"delta": [0, 0, -1], "amp": [0.0, 1.0]},
        {"delta": [1, 1, 1], "amp": [2.0, 0.0]},
        {"delta": [-1, -1, -1], "amp": [2.0, 0.0]},
        {"delta": [1, -1, 1], "amp": [1.2, 0.0]},
        {"delta": [1, 1, -1], "amp": [1.2, 0.0]},
    ]
    if conjugate_pair:
        hops += [
            {"delta": [-1, 1, -1], "amp": [1.2, 0.0]},
            {"delta": [-1, -1, 1], "amp": [1.2, 0.0]},
        ]
    return hops


_FIG3_2D_LATTICE = {
    "dimension": 2,
    "hoppings": [
        {"delta": [1, 0], "amp": [0.0, 2.0]},
        {"delta": [-1, 0], "amp": [0.0, 2.0]},
        {"delta": [1, 1], "amp": [4.0, 0.0]},
        {"delta": [-1, -1], "amp": [4.0, 0.0]},
    ],
    "onsite": [1040.0, -6.0],
}


def _presets() -> dict[str, dict]:
    fig2_gbc = {
        "kind": "moments",
        "lattice": _fig2_lattice(1.0, -1.0, 4.0, 30, [{"gbc": 0.0}]),
        "params": {"m_max": 10},
        "sweep": {"g": [0.0, 0.001, 0.1, 1.0, 2.0]},
        "seed": 0,
    }
    fig2_scaling = {
        "kind": "scaling",
        "lattice": _fig2_lattice(2.0, 0.4, 4.0, 60, ["obc"]),
        "params": {"m": 2, "sizes": list(range(7, 61))},
        "seed": 0,
    }
    fig3_2d = {
        "kind": "sweep",
        "base": {
            "kind": "moments",
            "lattice": {**_FIG3_2D_LATTICE, "extents": [8, 8], "boundary": ["pbc", "pbc"]},
            "params": {"m_max": 10},
            "seed": 0,
        },
        "sweep": {
            "letter": ["none", "P", "M"],
            "boundary": [["pbc", "pbc"], ["obc", "obc"], ["pbc", "obc"], ["obc", "pbc"]],
        },
        "seed": 0,
    }
    fig3_3d = {
        "kind": "sweep",
        "base": {
            "kind": "moments",
            "lattice": {
                "dimension": 3,
                "hoppings": fig3_3d_hoppings(),
                "onsite": [1040.0, -6.0],
                "extents": [4, 4, 4],
                "boundary": ["pbc", "pbc", "pbc"],
            },
            "params": {"m_max": 10},
            "seed": 0,
        },
        "sweep": {
            "boundary": [
                [a, b, c]
                for a in ("obc", "pbc")
                for b in ("obc", "pbc")
                for c in ("obc", "pbc")
            ]
        },
        "seed": 0,
    }
    fig4_dynamics = {
        "kind": "sweep",
        "base": {
            "kind": "dynamics",
            "lattice": {
                "dimension": 1,
                "hoppings": [],
                "onsite": [1040.0, -3.0],
                "extents": [201],
                "boundary": ["obc"],
            },
            "params": {
                "pt_gamma": 0.0,
                "pt_alpha": PT_ALPHA_CALIBRATED,
                "t0": 0.05,
                "sigma": 0.01,
                "duration": 0.7,
                "carrier": 1040.0,
                "find_critical": True,
                "critical_bracket": [0.13, 0.45],
            },
            "seed": 0,
        },
        "sweep": {"gamma": [0.0, 0.13, 0.45]},
        "seed": 0,
    }
    return {
        "fig2-gbc": fig2_gbc,
        "fig2-scaling": fig2_scaling,
        "fig3-2d": fig3_2d,
        "fig3-3d": fig3_3d,
        "fig4-dynamics": fig4_dynamics,
    }


def preset_names() -> list[str]:
    return sorted(_presets())


def preset(name: str) -> dict:
    """Built-in config by name; raises ConfigError listing the valid names."""
    table = _presets()
    if name not in table:
        raise ConfigError(
            f"unknown preset {name!r}; available presets: {', '.join(sorted(table))}"
        )
    return copy.deepcopy(table[name])
