"""Command-line orchestration: run configs, materialize presets, check invariants.

    momentlab run <config.json> [--out DIR] [--seed S] [--workers K]
                  [--tol-override key=val]
    momentlab preset <name> [--out DIR] [--seed S] [--workers K]
    momentlab check

Outputs are deterministic: identical config and seed produce byte-identical
numeric payloads.  CSV floats carry 17 significant digits; JSON files are
sorted-key, indented, and timestamp-free.  Sweep points are pure tasks
dispatched to an optional process pool and collected by a single writer, so
results do not depend on worker count or scheduling order.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import hashlib
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, preset, preset_names, validate_config
from .dynamics import (
    DriveSpec,
    EPS_RATE,
    PT_ALPHA_CALIBRATED,
    center_of_mass,
    compensate_normalize,
    critical_gamma,
    duhamel_evolve,
    evolve,
    growth_rate,
    peak_growth_factor,
)
from .errors import ConfigError, CostGuardError, MomentlabError
from .greens import default_grid, matching_distance, reconstruct_spectrum, synth_response
from .lattice import BoundarySpec, assemble, build_domain, letter_mask, model_from_hoppings
from .linalg import eigenvalues, resolvent, shifted_power_trace_series
from .moments import bulk_moments, deviations, eigen_moments, fit_power_law
from .walks import bulk_walk_weight, decomposition_check, walk_ledger

_SWEEP_AXIS_ORDER = ("g", "N", "m_max", "gamma", "boundary", "letter")


# ---------------------------------------------------------------------------
# deterministic writers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_artifacts(out_dir: Path, artifacts: dict) -> None:
    for relpath, artifact in sorted(artifacts.items()):
        path = out_dir / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        if artifact[0] == "json":
            path.write_text(json.dumps(artifact[1], indent=2, sort_keys=True) + "\n")
        elif artifact[0] == "csv":
            _, header, rows = artifact
            lines = [",".join(header)]
            lines += [",".join(_fmt(cell) for cell in row) for row in rows]
            path.write_text("\n".join(lines) + "\n")
        else:  # pragma: no cover
            raise ValueError(f"unknown artifact type {artifact[0]!r}")


def _spectrum_payload(values: np.ndarray) -> list:
    ordered = np.sort_complex(np.asarray(values))
    return [[float(v.real), float(v.imag)] for v in ordered]


def _manifest(raw_config: dict, seed: int) -> dict:
    canonical = json.dumps(raw_config, sort_keys=True, separators=(",", ":"))
    import scipy

    return {
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "seed": int(seed),
    }


# ---------------------------------------------------------------------------
# per-kind runners (pure: config in, artifact dict out)
# ---------------------------------------------------------------------------

def _run_spectrum(cfg: ExperimentConfig) -> dict:
    H = assemble(cfg.model, cfg.domain, cfg.boundary)
    spec = eigenvalues(H)
    return {"spectrum.json": ("json", _spectrum_payload(spec.values))}


def _run_moments(cfg: ExperimentConfig) -> dict:
    m_max = cfg.params.get("m_max", 10)
    H = assemble(cfg.model, cfg.domain, cfg.boundary)
    spec = eigenvalues(H)
    series = eigen_moments(spec, cfg.model.onsite, m_max)
    bulk = bulk_moments(cfg.model, m_max)
    dev = deviations(series, bulk)
    rows = []
    for i, m in enumerate(series.orders):
        r = float(dev.values[i]) if dev.valid[i] else float("nan")
        rows.append(
            (
                int(m),
                float(series.values[i].real),
                float(series.values[i].imag),
                float(bulk.values[i].real),
                float(bulk.values[i].imag),
                r,
            )
        )
    return {
        "moments.csv": ("csv", ("m", "re_M", "im_M", "re_w", "im_w", "r"), rows),
        "spectrum.json": ("json", _spectrum_payload(spec.values)),
    }


def _run_scaling(cfg: ExperimentConfig) -> dict:
    m = cfg.params.get("m", 2)
    sizes = cfg.params.get("sizes", list(range(10, 201)))
    bulk = bulk_moments(cfg.model, m)
    w = bulk.value(m)
    rows = []
    points = []
    for n in sizes:
        domain = build_domain(tuple(int(n) for _ in range(cfg.model.dim)))
        H = assemble(cfg.model, domain, cfg.boundary)
        spec = eigenvalues(H)
        series = eigen_moments(spec, cfg.model.onsite, m)
        r = abs(series.value(m) - w) / abs(w)
        rows.append((int(n), float(r)))
        if r > 0:
            points.append((float(n), float(r)))
    fit = fit_power_law(points)
    return {
        "deviations.csv": ("csv", ("N", "r"), rows),
        "fit.json": (
            "json",
            {
                "order_m": int(m),
                "exponent": fit.exponent,
                "prefactor": fit.prefactor,
                "r_squared": fit.r_squared,
                "n_points": fit.n_points,
            },
        ),
    }


def _run_walks(cfg: ExperimentConfig) -> dict:
    m = cfg.params.get("m", 4)
    ledger = walk_ledger(cfg.model, cfg.domain, cfg.boundary, m)
    rows = []
    for i, site in enumerate(ledger.sites):
        rows.append(
            tuple(int(c) for c in site)
            + (
                float(ledger.rooted[i].real),
                float(ledger.rooted[i].imag),
                float(ledger.missing[i].real),
                float(ledger.missing[i].imag),
                int(min(ledger.distance[i], 10**9)),
                bool(ledger.shell[i]),
            )
        )
    header = tuple(f"site_{a}" for a in range(cfg.domain.dim)) + (
        "re_S", "im_S", "re_delta", "im_delta", "hop_distance", "shell",
    )
    report = decomposition_check(cfg.model, cfg.domain, cfg.boundary, m)
    return {
        "ledger.csv": ("csv", header, rows),
        "decomposition.json": (
            "json",
            {
                "order_m": report.order,
                "n_sites": report.n_sites,
                "trace_per_site": [report.trace_per_site.real, report.trace_per_site.imag],
                "decomposed": [report.decomposed.real, report.decomposed.imag],
                "rel_error": report.rel_error,
                "shell_bound": report.shell_bound,
                "shell_observed": report.shell_observed,
                "shell_confined": report.shell_confined,
                "passed": report.passed,
            },
        ),
    }


def _run_greens(cfg: ExperimentConfig) -> dict:
    spacing = cfg.params.get("spacing", 0.1)
    margin = cfg.params.get("margin", 10.0)
    sigma_noise = cfg.params.get("sigma_noise", 0.0)
    H = assemble(cfg.model, cfg.domain, cfg.boundary)
    direct = eigenvalues(H)
    grid = default_grid(direct, spacing=spacing, margin=margin)
    stack = synth_response(H, grid, sigma_noise=sigma_noise, seed=cfg.seed)
    rec = reconstruct_spectrum(stack)
    est_rows = [
        (
            e.branch_id,
            float(e.value.real),
            float(e.value.imag),
            float(e.residual),
            int(e.window_points),
            bool(e.flagged),
        )
        for e in rec.estimates
    ]
    dist = matching_distance(rec.spectrum, direct)
    return {
        "direct_spectrum.json": ("json", _spectrum_payload(direct.values)),
        "reconstructed.json": ("json", _spectrum_payload(rec.spectrum.values)),
        "estimates.csv": (
            "csv",
            ("branch", "re_E", "im_E", "residual", "window_points", "flagged"),
            est_rows,
        ),
        "roundtrip.json": (
            "json",
            {
                "matching_distance_hz": float(dist),
                "grid_points": int(len(stack.omegas)),
                "skipped_points": len(stack.skipped),
                "sigma_noise": float(sigma_noise),
            },
        ),
    }


def _run_dynamics(cfg: ExperimentConfig) -> dict:
    p = cfg.params
    H = assemble(cfg.model, cfg.domain, cfg.boundary)
    n = cfg.domain.n_sites
    source = p.get("source")
    drive = DriveSpec(
        source=n // 2 if source is None else int(source),
        t0=float(p.get("t0", 0.05)),
        sigma=float(p.get("sigma", 0.01)),
        carrier=float(p.get("carrier", np.real(cfg.model.onsite))),
        duration=float(p.get("duration", 0.7)),
    )
    field = evolve(H, drive)
    processed = compensate_normalize(field, cfg.model.onsite)
    rate = growth_rate(processed, drive.source)
    regime = "proliferative" if rate > EPS_RATE else "dispersive"
    pulse_end = drive.t0 + 3 * drive.sigma
    growth = peak_growth_factor(processed, pulse_end)
    com = center_of_mass(processed)
    after = processed.times >= drive.t0 + 4 * drive.sigma
    drift = float(np.polyfit(processed.times[after], com[after], 1)[0])
    spec = eigenvalues(H)

    stride = max(1, len(processed.times) // 240)
    frames = range(0, len(processed.times), stride)
    field_rows = []
    heat_rows = []
    for it in frames:
        t = float(processed.times[it])
        prof = processed.normalized[it]
        heat_rows.append((t,) + tuple(float(np.abs(v)) for v in prof))
        for s in range(n):
            v = prof[s]
            field_rows.append((t, s, float(np.abs(v)), float(np.angle(v))))
    heat_header = ("t",) + tuple(f"site_{s}" for s in range(n))
    artifacts = {
        "field.csv": ("csv", ("t", "site", "abs_psi", "arg_psi"), field_rows),
        "heatmap.csv": ("csv", heat_header, heat_rows),
        "spectrum.json": ("json", _spectrum_payload(spec.values)),
        "summary.json": (
            "json",
            {
                "growth_rate_per_s": float(rate),
                "regime": regime,
                "drift_velocity_sites_per_s": drift,
                "peak_growth_factor": float(growth),
                "eps_rate": EPS_RATE,
                "pt_gamma": p.get("pt_gamma"),
                "pt_alpha": p.get("pt_alpha") if "pt_gamma" in p else None,
            },
        ),
    }
    if p.get("find_critical"):
        bracket = tuple(p.get("critical_bracket", (0.13, 0.45)))
        result = critical_gamma(alpha=p.get("pt_alpha", PT_ALPHA_CALIBRATED), bracket=bracket)
        artifacts["critical.json"] = (
            "json",
            {
                "gamma_c_time_domain": result.gamma_c,
                "gamma_c_saddle": result.gamma_c_saddle,
                "agreement": result.agreement,
                "alpha": p.get("pt_alpha", PT_ALPHA_CALIBRATED),
                "bracket": list(bracket),
            },
        )
    return artifacts


_RUNNERS = {
    "spectrum": _run_spectrum,
    "moments": _run_moments,
    "scaling": _run_scaling,
    "walks": _run_walks,
    "greens": _run_greens,
    "dynamics": _run_dynamics,
}


# ---------------------------------------------------------------------------
# sweep expansion
# ---------------------------------------------------------------------------

def _axis_label(axis: str, value) -> str:
    if axis == "boundary":
        parts = [v if isinstance(v, str) else f"gbc{v['gbc']:g}" for v in value]
        return f"boundary={'-'.join(parts)}"
    return f"{axis}={value:g}" if isinstance(value, float) else f"{axis}={value}"


def _apply_axis(raw: dict, axis: str, value) -> None:
    lattice = raw.setdefault("lattice", {})
    if axis == "g":
        dim = lattice.get("dimension", 1)
        lattice["boundary"] = [{"gbc": float(value)} for _ in range(dim)]
    elif axis == "N":
        dim = lattice.get("dimension", 1)
        lattice["extents"] = [int(value) for _ in range(dim)]
    elif axis == "boundary":
        lattice["boundary"] = copy.deepcopy(value)
    elif axis == "letter":
        lattice.pop("letter", None)
        lattice.pop("mask", None)
        if value != "none":
            lattice["letter"] = value
            lattice["extents"] = [max(9, int(L)) for L in lattice["extents"]]
    elif axis == "m_max":
        raw.setdefault("params", {})["m_max"] = int(value)
    elif axis == "gamma":
        raw.setdefault("params", {})["pt_gamma"] = float(value)
    else:  # pragma: no cover
        raise ConfigError(f"unknown sweep axis {axis!r}")


def _expand_sweep(cfg: ExperimentConfig) -> list[tuple[str, dict]]:
    base_raw = copy.deepcopy(cfg.base.raw if cfg.base is not None else cfg.raw)
    base_raw.pop("sweep", None)
    axes = [a for a in _SWEEP_AXIS_ORDER if a in cfg.sweep]
    if not axes:
        return [("point", base_raw)]
    points = []
    for combo in itertools.product(*[cfg.sweep[a] for a in axes]):
        raw = copy.deepcopy(base_raw)
        labels = []
        for axis, value in zip(axes, combo):
            _apply_axis(raw, axis, value)
            labels.append(_axis_label(axis, value))
        points.append(("__".join(labels), raw))
    return points


def _run_point(args: tuple[int, str, dict]) -> tuple[int, str, dict]:
    idx, label, raw = args
    cfg = validate_config(raw)
    artifacts = _RUNNERS[cfg.kind](cfg)
    return idx, label, artifacts


def run_config(cfg: ExperimentConfig, workers: int = 1) -> dict:
    """Execute a validated config; returns the artifact dict to be written."""
    if cfg.kind != "sweep" and not cfg.sweep:
        return _RUNNERS[cfg.kind](cfg)
    points = _expand_sweep(cfg)
    base = cfg.base if cfg.base is not None else cfg
    find_critical = base.kind == "dynamics" and base.params.get("find_critical")
    tasks = []
    for idx, (label, raw) in enumerate(points):
        raw = copy.deepcopy(raw)
        if find_critical:
            raw.setdefault("params", {})["find_critical"] = False
        tasks.append((idx, label, raw))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, tasks))
    else:
        results = [_run_point(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    artifacts: dict = {}
    index = []
    for _, label, point_artifacts in results:
        index.append(label)
        for rel, art in point_artifacts.items():
            artifacts[f"{label}/{rel}"] = art
    artifacts["sweep_index.json"] = ("json", index)
    if find_critical:
        bracket = tuple(base.params.get("critical_bracket", (0.13, 0.45)))
        alpha = base.params.get("pt_alpha", PT_ALPHA_CALIBRATED)
        result = critical_gamma(alpha=alpha, bracket=bracket)
        artifacts["critical.json"] = (
            "json",
            {
                "gamma_c_time_domain": result.gamma_c,
                "gamma_c_saddle": result.gamma_c_saddle,
                "agreement": result.agreement,
                "alpha": alpha,
                "bracket": list(bracket),
            },
        )
    return artifacts


# ---------------------------------------------------------------------------
# invariant check suite (momentlab check)
# ---------------------------------------------------------------------------

def _check_suite() -> list[tuple[str, bool, str]]:
    results = []

    def record(name, ok, detail=""):
        results.append((name, bool(ok), detail))

    fig2 = model_from_hoppings(
        1, {(2,): 1.0, (-2,): -1.0, (1,): 4.0, (-1,): 4.0}, onsite=1038 - 4.5j
    )
    dom = build_domain((12,))
    h_obc = assemble(fig2, dom, BoundarySpec.open(1)).matrix
    h_pbc = assemble(fig2, dom, BoundarySpec.periodic(1)).matrix
    h_g = assemble(fig2, dom, BoundarySpec.generalized(0.37, 1)).matrix
    err = np.abs(h_g - (h_obc + 0.37 * (h_pbc - h_obc))).max()
    record("gbc-interpolation-identity", err < 1e-14, f"max entry error {err:.2e}")

    rng = np.random.default_rng(7)
    A = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    spec = eigenvalues(A)
    traces = shifted_power_trace_series(A, 0.3 + 0.1j, 6)
    worst = 0.0
    for m in range(1, 7):
        lhs = np.sum((spec.values - (0.3 + 0.1j)) ** m)
        worst = max(worst, abs(lhs - traces[m - 1]) / max(abs(lhs), 1.0))
    record("newton-girard-eigen-vs-trace", worst < 1e-8, f"worst rel {worst:.2e}")

    bulk = bulk_moments(fig2, 6)
    worst = 0.0
    for m in range(1, 7):
        w_walk = bulk_walk_weight(fig2, m)
        worst = max(worst, abs(bulk.value(m) - w_walk))
    record("bulk-weight-two-routes", worst < 1e-9, f"worst abs diff {worst:.2e}")

    rep = decomposition_check(fig2, build_domain((20,)), BoundarySpec.open(1), 4)
    record("walk-decomposition-identity", rep.passed, f"rel error {rep.rel_error:.2e}")

    B = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    vals = eigenvalues(B).values
    G = resolvent(B, 4.2 + 0.3j)
    gv = np.sort_complex(eigenvalues(G).values)
    expected = np.sort_complex(1.0 / ((4.2 + 0.3j) - vals))
    err = np.abs(gv - expected).max()
    record("resolvent-poles", err < 1e-8, f"max diff {err:.2e}")

    xs = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_power_law(list(zip(xs, 7 * xs**2)))
    record(
        "power-law-exactness",
        abs(fit.exponent - 2) < 1e-12 and abs(fit.prefactor - 7) < 1e-9,
        f"exponent {fit.exponent:.15f}",
    )

    C = (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))) * 0.5
    drive = DriveSpec(source=2, t0=0.3, sigma=0.08, carrier=0.7, duration=1.0, dt=5e-4)
    wf = evolve(C, drive)
    oracle = duhamel_evolve(C, drive, wf.times)
    dev = np.abs(wf.psi - oracle).max() / max(np.abs(oracle).max(), 1e-30)
    record("rk4-vs-duhamel", dev < 1e-6, f"rel deviation {dev:.2e}")

    toy = model_from_hoppings(1, {(1,): 2.0, (-1,): 0.5}, onsite=100 - 1j)
    Ht = assemble(toy, build_domain((8,)), BoundarySpec.open(1))
    direct = eigenvalues(Ht)
    stack = synth_response(Ht, default_grid(direct, 0.1, 5.0))
    rec = reconstruct_spectrum(stack)
    dist = matching_distance(rec.spectrum, direct)
    record("greens-roundtrip", dist < 0.05, f"matching distance {dist:.2e} Hz")

    return results


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parse_tol_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--tol-override expects key=value, got {pair!r}")
        key, val = pair.split("=", 1)
        try:
            out[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"--tol-override value for {key!r} must be a number") from exc
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="momentlab",
        description="Spectral-moment laboratory for finite non-Hermitian lattices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", type=Path)
    p_preset = sub.add_parser("preset", help="run a built-in preset")
    p_preset.add_argument("name")
    for p in (p_run, p_preset):
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=1, help="sweep worker processes")
        p.add_argument(
            "--tol-override",
            action="append",
            default=[],
            metavar="KEY=VAL",
            help="override a named tolerance (repeatable)",
        )
    sub.add_parser("check", help="run the quick invariant suite")

    args = parser.parse_args(argv)

    if args.command == "check":
        results = _check_suite()
        failed = 0
        for name, ok, detail in results:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
            failed += 0 if ok else 1
        print(f"{len(results) - failed}/{len(results)} invariant checks passed")
        return 0 if failed == 0 else 1

    try:
        if args.command == "run":
            try:
                raw = json.loads(args.config.read_text())
            except FileNotFoundError:
                print(f"error: config file {args.config} not found", file=sys.stderr)
                return 2
            except json.JSONDecodeError as exc:
                print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
                return 2
            default_out = Path("momentlab-out")
        else:
            raw = preset(args.name)
            default_out = Path(f"momentlab-out-{args.name}")
        if args.seed is not None:
            raw["seed"] = args.seed
        overrides = _parse_tol_overrides(args.tol_override)
        if overrides:
            raw.setdefault("tolerances", {}).update(overrides)
        out_dir = args.out if args.out is not None else Path(raw.pop("output", default_out))
        raw.pop("output", None)
        cfg = validate_config(raw)
        artifacts = run_config(cfg, workers=max(1, args.workers))
        artifacts["manifest.json"] = ("json", _manifest(raw, cfg.seed))
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            _write_artifacts(out_dir, artifacts)
        except OSError as exc:
            print(f"error: cannot write to {out_dir}: {exc}", file=sys.stderr)
            return 3
        print(f"wrote {len(artifacts)} artifact(s) to {out_dir}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CostGuardError as exc:
        print(f"cost guard: {exc}", file=sys.stderr)
        return 2
    except MomentlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
