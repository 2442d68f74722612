"""Command-line front end: config parsing, orchestration, artifact emission.

One experiment per invocation::

    prescurv <mode> --config <path> [--out <dir>] [--quick]

Modes: solve, classify, spectrum, exact-sweep, blowup, pohozaev, testfn,
verify.  Configs are plain INI files (key = value sections, ``#``
comments); every run writes a ``manifest.json`` echoing the resolved
settings next to the mode's own JSON/CSV/.dat artifacts, so repeated
runs with the same config and seed produce bit-identical files.  Curve
artifacts come with a generated gnuplot script instead of rendered
images.

Exit codes: 0 success, 2 solver non-convergence, 3 config error.  The
environment variable ``PRESCURV_THREADS`` caps the BLAS/OpenMP thread
count; it is applied here before the numeric stack loads.
"""

from __future__ import annotations

import os

_threads = os.environ.get("PRESCURV_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import configparser
import csv
import dataclasses
import json
import math
import sys
from typing import Callable, Optional

import numpy as np

from . import __version__
from .diagnostics import (
    blowup_monitor,
    holomorphic_field,
    mass_measures,
    pohozaev_report,
    position_field,
    testfunction_energy_curve,
)
from .domain import BoundaryPoint, DomainSpec, build_mesh
from .energy import Problem
from .exact import (
    annulus_gamma_problem,
    annulus_gamma_state,
    annulus_log_problem,
    annulus_log_state,
    bubble_profile,
    halfplane_problem,
    oneD_profile,
    profile_state,
)
from .fields import CurvatureSpec, Field, background_for, regime_classify
from .solve import (
    PathCollapseError,
    continuation,
    minimize,
    mountain_pass,
    relaxed_endpoints,
)
from .spectral import disk_form_report, morse_index

MODES = ("solve", "classify", "spectrum", "exact-sweep", "blowup",
         "pohozaev", "testfn", "verify")

_REQUIRED = object()


class ConfigError(Exception):
    """Unusable experiment config; maps to exit code 3."""


# -- config loading -----------------------------------------------------------


def _get(cp: configparser.ConfigParser, section: str, key: str,
         cast: Callable = str, default=_REQUIRED):
    if not cp.has_option(section, key):
        if default is _REQUIRED:
            raise ConfigError(f"missing required key [{section}] {key}")
        return default
    raw = cp.get(section, key).strip()
    if raw == "" and default is not _REQUIRED:
        return default
    try:
        return cast(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {exc}") from exc


def _floats(raw: str) -> list[float]:
    return [float(t) for t in raw.replace(",", " ").split()]


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


@dataclasses.dataclass
class ExperimentConfig:
    """Parsed experiment: domain, curvature data, settings, mode, output."""

    mode: str
    domain: DomainSpec
    curvature: Optional[CurvatureSpec]
    settings: dict
    out_dir: str
    quick: bool
    path: str
    mesh: object = dataclasses.field(default=None, repr=False)

    def manifest(self) -> dict:
        man = {
            "mode": self.mode,
            "version": __version__,
            "quick": self.quick,
            "domain": dataclasses.asdict(self.domain),
            "settings": self.settings,
        }
        if self.curvature is not None:
            man["curvature"] = {
                "K": self.curvature.K.describe(),
                "h": [f.describe() for f in self.curvature.h],
                "K_bg": self.curvature.K_bg,
                "h_bg": list(self.curvature.h_bg),
            }
        return man


def _load_domain(cp: configparser.ConfigParser, quick: bool) -> DomainSpec:
    kind = _get(cp, "domain", "kind")
    level = _get(cp, "domain", "level", int, 0)
    if quick:
        level = min(level, 3)
    try:
        return DomainSpec(
            kind=kind,
            L=_get(cp, "domain", "L", float, 1.0),
            r=_get(cp, "domain", "r", float, 0.5),
            R=_get(cp, "domain", "R", float, 1.0),
            level=level,
            grade=_get(cp, "domain", "grade", float, 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"bad [domain] section: {exc}") from exc


def _load_curvature(cp: configparser.ConfigParser, mesh) -> CurvatureSpec:
    n_comp = len(mesh.components)
    K_text = _get(cp, "curvature", "K")
    h_text = _get(cp, "curvature", "h")
    h_parts = [t.strip() for t in h_text.split(";")]
    if len(h_parts) == 1:
        h_parts = h_parts * n_comp
    if len(h_parts) != n_comp:
        raise ConfigError(
            f"[curvature] h lists {len(h_parts)} components, domain has {n_comp}")
    if _get(cp, "curvature", "background", str, "") == "flat":
        K_bg, h_bg = background_for(mesh)
    else:
        K_bg = _get(cp, "curvature", "K_bg", float, 0.0)
        h_bg_text = _get(cp, "curvature", "h_bg", str, "")
        if h_bg_text:
            h_bg = tuple(float(t) for t in h_bg_text.split(";"))
        else:
            h_bg = (0.0,) * n_comp
    try:
        K = _compile_field(K_text, "[curvature] K")
        h = [_compile_field(t, "[curvature] h") for t in h_parts]
        return CurvatureSpec(K=K, h=h, K_bg=K_bg, h_bg=h_bg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad [curvature] section: {exc}") from exc


def _compile_field(text: str, where: str) -> Field:
    try:
        return Field(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse expression for {where}: {exc}") from exc


def _load_settings(cp: configparser.ConfigParser) -> dict:
    s = {
        "method": _get(cp, "solver", "method", str, "minimize"),
        "tol": _get(cp, "solver", "tol", float, 1e-8),
        "max_iter": _get(cp, "solver", "max_iter", int, 100),
        "eps": _get(cp, "solver", "eps", float, 0.0),
        "eps_schedule": _get(cp, "solver", "eps_schedule", _floats,
                             [0.05, 0.02, 0.01, 0.005]),
        "path_points": _get(cp, "solver", "path_points", int, 17),
        "q2": _get(cp, "solver", "q2", float, 0.1),
        "anchor": _get(cp, "solver", "anchor", str, "argmax-d"),
        "init": _get(cp, "solver", "init", str, "zero"),
        "init_value": _get(cp, "solver", "init_value", float, 0.0),
        "blowup_threshold": _get(cp, "solver", "blowup_threshold", float, 50.0),
        "seed": _get(cp, "solver", "seed", int, 0),
    }
    if s["method"] not in ("minimize", "mountain-pass", "continuation"):
        raise ConfigError(f"unknown [solver] method {s['method']!r}")
    if s["init"] not in ("zero", "constant", "random"):
        raise ConfigError(f"unknown [solver] init {s['init']!r}")
    return s


def load_config(path: str, mode: str, out: Optional[str], quick: bool
                ) -> ExperimentConfig:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc

    if not cp.has_section("domain"):
        raise ConfigError("missing required section [domain]")
    domain = _load_domain(cp, quick)
    mesh = build_mesh(domain)

    curvature = _load_curvature(cp, mesh) if cp.has_section("curvature") else None

    settings = _load_settings(cp)
    for extra in ("sweep", "pohozaev", "spectrum", "testfn", "monitor"):
        if cp.has_section(extra):
            settings[extra] = dict(cp.items(extra))

    out_dir = out or _get(cp, "output", "dir", str, "out")
    return ExperimentConfig(mode=mode, domain=domain, curvature=curvature,
                            settings=settings, out_dir=out_dir, quick=quick,
                            path=path, mesh=mesh)


# -- artifact writers ---------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, rows: list[dict]) -> None:
    fields = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _num(v) for k, v in row.items()})


def _num(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_dat(path: str, header: list[str], columns: list[np.ndarray]) -> None:
    """Gnuplot-ready whitespace columns with a commented header line."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in zip(*columns):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def _write_plot_script(out_dir: str, dat_name: str, x: int, ys: list[tuple[int, str]],
                       xlabel: str, title: str) -> None:
    lines = [
        "set terminal pngcairo size 900,600",
        f'set output "{title}.png"',
        f'set xlabel "{xlabel}"',
        "set key left top",
        "plot " + ", \\\n     ".join(
            f'"{dat_name}" using {x}:{col} with linespoints title "{label}"'
            for col, label in ys),
        "",
    ]
    with open(os.path.join(out_dir, "plot.gp"), "w") as fh:
        fh.write("\n".join(lines))


def _write_state_csv(path: str, mesh, u: np.ndarray) -> None:
    rows = [{"x": x, "y": y, "u": val}
            for (x, y), val in zip(mesh.dof_coords, u)]
    _write_csv(path, rows)


# -- shared pieces ------------------------------------------------------------


def _need_curvature(cfg: ExperimentConfig) -> CurvatureSpec:
    if cfg.curvature is None:
        raise ConfigError("missing required section [curvature]")
    return cfg.curvature


def _initial_state(cfg: ExperimentConfig, prob: Problem) -> np.ndarray:
    s = cfg.settings
    if s["init"] == "zero":
        return np.zeros(prob.n_dof)
    if s["init"] == "constant":
        return np.full(prob.n_dof, s["init_value"])
    rng = np.random.default_rng(s["seed"])
    return 0.1 * rng.standard_normal(prob.n_dof)


def _resolve_anchor(cfg: ExperimentConfig, prob: Problem) -> BoundaryPoint:
    text = cfg.settings["anchor"]
    mesh = prob.mesh
    if text == "argmax-d":
        return regime_classify(prob.spec, mesh).D_argmax
    if text == "origin":
        comp = mesh.components[0]
        verts = comp.verts[:-1] if comp.closed else comp.verts
        i = int(np.argmin(np.linalg.norm(mesh.vertices[verts], axis=1)))
        return mesh.boundary_point(0, i)
    try:
        comp_idx, vert_idx = (int(t) for t in text.split(","))
        return mesh.boundary_point(comp_idx, vert_idx)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad [solver] anchor {text!r}: {exc}") from exc


def _boundary_point_dict(pt: BoundaryPoint) -> dict:
    return {
        "component": pt.component,
        "index": pt.index,
        "s": pt.s,
        "coords": list(pt.coords),
    }


def _family_states(cfg: ExperimentConfig) -> tuple[list, list[float], Optional[np.ndarray]]:
    """States of one closed-form family over its parameter list.

    The third return value is the Dirichlet mask of half-disk
    truncations (None on the annulus families).
    """
    sweep = cfg.settings.get("sweep")
    if not sweep:
        raise ConfigError("missing required section [sweep]")
    family = sweep.get("family", "")
    try:
        params = _floats(sweep.get("parameters", ""))
    except ValueError as exc:
        raise ConfigError(f"bad [sweep] parameters: {exc}") from exc
    if not params:
        raise ConfigError("missing required key [sweep] parameters")
    mesh = cfg.mesh
    h1 = float(sweep.get("h1", 2.0))
    h0 = float(sweep.get("h0", math.sqrt(2.0)))
    K0 = float(sweep.get("k0", -1.0))
    states, ops, fixed = [], None, None
    try:
        for p in params:
            if family == "gamma":
                prob = annulus_gamma_problem(mesh, int(p), h1, ops=ops)
                u = annulus_gamma_state(mesh, int(p), h1)
            elif family == "log":
                prob = annulus_log_problem(mesh, p, ops=ops)
                u = annulus_log_state(mesh, p)
            elif family == "bubble":
                prof = bubble_profile(p, K0, h0)
                prob, fixed = halfplane_problem(mesh, prof)
                u = profile_state(mesh, prof)
            elif family == "oned":
                prof = oneD_profile(p, K0)
                prob, fixed = halfplane_problem(mesh, prof)
                u = profile_state(mesh, prof)
            else:
                raise ConfigError(f"unknown [sweep] family {family!r}")
            ops = prob.ops
            states.append((prob, u))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad [sweep] section: {exc}") from exc
    return states, params, fixed


def _sweep_rows(states: list, params: list[float]) -> list[dict]:
    rows = []
    for (prob, u), p in zip(states, params):
        row = {
            "parameter": float(p),
            "sup_u": float(u.max()),
            "inf_u": float(u.min()),
            "area_mass": prob.interior_mass(u),
            "gb_residual": prob.gauss_bonnet_residual(u),
        }
        for c, val in enumerate(prob.boundary_masses(u)):
            row[f"boundary_mass_{c}"] = val
        rows.append(row)
    return rows


def _solve_problem(cfg: ExperimentConfig) -> tuple[Problem, object]:
    prob = Problem(cfg.mesh, _need_curvature(cfg))
    s = cfg.settings
    if s["method"] == "minimize":
        rep = minimize(prob, eps=s["eps"], init=_initial_state(cfg, prob),
                       tol=s["tol"], max_iter=s["max_iter"],
                       blowup_threshold=s["blowup_threshold"])
        return prob, rep
    point = _resolve_anchor(cfg, prob)
    if s["method"] == "mountain-pass":
        low, u1 = relaxed_endpoints(prob, point, s["eps"], q2=s["q2"], tol=s["tol"])
        rep = mountain_pass(prob, s["eps"], low.state, u1,
                            n_points=s["path_points"], tol=s["tol"],
                            blowup_threshold=s["blowup_threshold"])
        return prob, rep
    reports = continuation(prob, point, eps_schedule=s["eps_schedule"],
                           tol=s["tol"], n_points=s["path_points"], q2=s["q2"],
                           blowup_threshold=s["blowup_threshold"])
    return prob, reports


# -- mode runners -------------------------------------------------------------


def _run_solve(cfg: ExperimentConfig) -> int:
    prob, result = _solve_problem(cfg)
    reports = result if isinstance(result, list) else [result]
    final = reports[-1]
    if final.converged and final.morse_index is None:
        final.morse_index = morse_index(prob, final.state,
                                        eps=final.eps).negative_count
    for i, rep in enumerate(reports):
        name = "report.json" if len(reports) == 1 else f"report_{i}.json"
        _write_json(os.path.join(cfg.out_dir, name), rep.as_dict(include_state=False))
    _write_state_csv(os.path.join(cfg.out_dir, "state.csv"), prob.mesh, final.state)
    if final.path is not None:
        _write_dat(os.path.join(cfg.out_dir, "path.dat"), ["index", "energy"],
                   [np.arange(len(final.path.energies), dtype=float),
                    final.path.energies])
        _write_plot_script(cfg.out_dir, "path.dat", 1, [(2, "path energy")],
                           "path index", "path")
    print(f"method={final.method} converged={final.converged} "
          f"residual={final.residual_norm:.3e} sup={final.sup:.6g}")
    return 0 if final.converged and not final.blowup_flag else 2


def _run_classify(cfg: ExperimentConfig) -> int:
    regime = regime_classify(_need_curvature(cfg), cfg.mesh)
    payload = {
        "regime": regime.kind.value,
        "D_max": regime.D_max,
        "D_argmax": _boundary_point_dict(regime.D_argmax),
        "h_integral": regime.h_integral,
        "level_set_transverse": regime.level_set_transverse,
        "annulus_case": regime.annulus_case,
    }
    _write_json(os.path.join(cfg.out_dir, "regime.json"), payload)
    print(json.dumps(_jsonable(payload), sort_keys=True))
    return 0


def _run_spectrum(cfg: ExperimentConfig) -> int:
    extra = cfg.settings.get("spectrum", {})
    if extra.get("disk_form"):
        try:
            D0 = float(extra["disk_form"])
            n_r = int(extra.get("n_r", 3000))
            m_cap = int(extra.get("m_cap", 128))
        except ValueError as exc:
            raise ConfigError(f"bad [spectrum] section: {exc}") from exc
        rep = disk_form_report(D0, n_r=n_r, m_cap=m_cap)
        payload = {
            "D0": rep.D0,
            "R": rep.R,
            "negative_count": rep.negative_count,
            "mode_counts": [[m, c, s] for m, c, s in rep.mode_counts],
        }
        _write_json(os.path.join(cfg.out_dir, "spectrum.json"), payload)
        print(f"disk form D0={rep.D0} negative_count={rep.negative_count}")
        return 0
    fixed = None
    if extra.get("state", "solve") == "family":
        states, params, fixed = _family_states(cfg)
        prob, u = states[-1]
        solve_summary = {"state": "family", "parameter": params[-1]}
        code = 0
    else:
        prob, result = _solve_problem(cfg)
        rep = result[-1] if isinstance(result, list) else result
        u = rep.state
        solve_summary = {"state": "solve", "converged": rep.converged,
                         "residual_norm": rep.residual_norm}
        code = 0 if rep.converged else 2
    spec_rep = morse_index(prob, u, eps=cfg.settings["eps"], fixed=fixed)
    payload = {
        "negative_count": spec_rep.negative_count,
        "eigenvalues": spec_rep.eigenvalues,
        "k_used": spec_rep.k_used,
        "converged": spec_rep.converged,
        "neg_tol": spec_rep.neg_tol,
        "source": solve_summary,
    }
    _write_json(os.path.join(cfg.out_dir, "spectrum.json"), payload)
    print(f"negative_count={spec_rep.negative_count}")
    return code


def _run_exact_sweep(cfg: ExperimentConfig) -> int:
    states, params, _ = _family_states(cfg)
    rows = _sweep_rows(states, params)
    _write_csv(os.path.join(cfg.out_dir, "sweep.csv"), rows)
    cols = list(rows[0])
    _write_dat(os.path.join(cfg.out_dir, "sweep.dat"), cols,
               [np.array([r[c] for r in rows]) for c in cols])
    _write_plot_script(cfg.out_dir, "sweep.dat", 1,
                       [(cols.index("sup_u") + 1, "sup u"),
                        (cols.index("area_mass") + 1, "area mass")],
                       "family parameter", "sweep")
    print(f"{len(rows)} states, sup_u {rows[0]['sup_u']:.4g} .. {rows[-1]['sup_u']:.4g}")
    return 0


def _run_blowup(cfg: ExperimentConfig) -> int:
    states, params, _ = _family_states(cfg)
    mon = cfg.settings.get("monitor", {})
    try:
        kwargs = {k: float(mon[k]) for k in
                  ("window", "sup_window", "growth_min", "bounded_ratio",
                   "far_distance", "far_tol") if mon.get(k)}
    except ValueError as exc:
        raise ConfigError(f"bad [monitor] section: {exc}") from exc
    diag = blowup_monitor(states, **kwargs)
    _write_json(os.path.join(cfg.out_dir, "blowup.json"), diag.as_dict())
    _write_csv(os.path.join(cfg.out_dir, "sweep.csv"), _sweep_rows(states, params))
    print(f"diverging={diag.diverging} candidates={len(diag.candidates)} "
          f"bounded_mass={diag.bounded_mass}")
    return 0


def _run_pohozaev(cfg: ExperimentConfig) -> int:
    extra = cfg.settings.get("pohozaev", {})
    code = 0
    if extra.get("state", "solve") == "family":
        states, params, _ = _family_states(cfg)
        prob, u = states[-1]
        source = {"state": "family", "parameter": params[-1]}
    else:
        prob, result = _solve_problem(cfg)
        rep = result[-1] if isinstance(result, list) else result
        u = rep.state
        source = {"state": "solve", "converged": rep.converged}
        if not rep.converged:
            code = 2
    fields = {}
    names = [t.strip() for t in extra.get("fields", "position").split(",")]
    for name in names:
        if name == "position":
            fields["position"] = position_field()
        elif name == "holomorphic":
            try:
                cos_c = _floats(extra.get("cos_coeffs", "0 1"))
                sin_c = _floats(extra.get("sin_coeffs", ""))
                fields["holomorphic"] = holomorphic_field(prob.mesh, cos_c, sin_c)
            except ValueError as exc:
                raise ConfigError(f"bad [pohozaev] coefficients: {exc}") from exc
        else:
            raise ConfigError(f"unknown [pohozaev] field {name!r}")
    payload = {"source": source}
    for name, field in fields.items():
        rep = pohozaev_report(prob, u, field)
        payload[name] = {
            "residual": rep.residual,
            "boundary_terms": rep.boundary_terms,
            "interior_term": rep.interior_term,
        }
        print(f"{name}: residual={rep.residual:.6e}")
    _write_json(os.path.join(cfg.out_dir, "pohozaev.json"), payload)
    return code


def _run_testfn(cfg: ExperimentConfig) -> int:
    extra = cfg.settings.get("testfn", {})
    prob = Problem(cfg.mesh, _need_curvature(cfg))
    point = _resolve_anchor(cfg, prob)
    try:
        q2 = float(extra.get("q2", cfg.settings["q2"]))
        tail = int(extra.get("tail", 4))
        ratios = _floats(extra["ratios"]) if extra.get("ratios") else None
    except ValueError as exc:
        raise ConfigError(f"bad [testfn] section: {exc}") from exc
    schedule = [r / q2 for r in ratios] if ratios else None
    try:
        curve = testfunction_energy_curve(prob, point, q2=q2,
                                          mu_schedule=schedule)
        fitted = curve.extracted_slopes(tail=tail)
    except ValueError as exc:
        raise ConfigError(f"bad [testfn] section: {exc}") from exc
    rows = curve.rows()
    _write_csv(os.path.join(cfg.out_dir, "testfn.csv"), rows)
    cols = list(rows[0])
    _write_dat(os.path.join(cfg.out_dir, "testfn.dat"), cols,
               [np.array([r[c] for r in rows]) for c in cols])
    _write_plot_script(cfg.out_dir, "testfn.dat", cols.index("delta") + 1,
                       [(cols.index("dirichlet_slope") + 1, "dirichlet slope"),
                        (cols.index("boundary_slope") + 1, "boundary slope"),
                        (cols.index("energy") + 1, "energy")],
                       "delta", "testfn")
    payload = {
        "anchor": _boundary_point_dict(point),
        "q2": curve.q2,
        "d_at_point": curve.d_at_point,
        "min_d_component": curve.min_d_component,
        "fitted_slopes": fitted,
        "energy_end": float(curve.energy[-1]),
    }
    _write_json(os.path.join(cfg.out_dir, "testfn.json"), payload)
    print("fitted slopes: " + json.dumps(_jsonable(payload["fitted_slopes"]),
                                         sort_keys=True))
    return 0


def _run_verify(out_dir: str, quick: bool) -> int:
    from .acceptance import run_battery

    results = run_battery(quick=quick)
    rows = []
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] criterion {res.number:2d} {res.name}: {res.detail}")
        rows.append(res.as_dict())
    _write_json(os.path.join(out_dir, "acceptance.json"), rows)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


# -- entry point --------------------------------------------------------------


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="prescurv",
        description="Prescribed-curvature experiments on flat model surfaces.")
    parser.add_argument("mode", help="one of: " + ", ".join(MODES))
    parser.add_argument("--config", help="experiment config (INI)")
    parser.add_argument("--out", help="output directory (default: [output] dir or ./out)")
    parser.add_argument("--quick", action="store_true",
                        help="clamp refinement to coarse levels; verify runs its short battery")
    args = parser.parse_args(argv)

    try:
        if args.mode == "verify":
            out_dir = args.out or "out"
            os.makedirs(out_dir, exist_ok=True)
            return _run_verify(out_dir, args.quick)
        if args.mode not in MODES:
            raise ConfigError(
                f"unknown mode {args.mode!r}; expected one of {', '.join(MODES)}")
        if not args.config:
            raise ConfigError(f"mode {args.mode!r} requires --config")
        cfg = load_config(args.config, args.mode, args.out, args.quick)
        os.makedirs(cfg.out_dir, exist_ok=True)
        _write_json(os.path.join(cfg.out_dir, "manifest.json"), cfg.manifest())
        runner = {
            "solve": _run_solve,
            "classify": _run_classify,
            "spectrum": _run_spectrum,
            "exact-sweep": _run_exact_sweep,
            "blowup": _run_blowup,
            "pohozaev": _run_pohozaev,
            "testfn": _run_testfn,
        }[cfg.mode]
        return runner(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except (PathCollapseError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
