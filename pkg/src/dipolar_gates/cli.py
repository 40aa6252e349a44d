"""Scenario runner and sweep engine.

    python -m dipolar_gates --scenario gate_map --out runs/map --workers 4

Every scenario evaluates a *point* function over a grid given by the
``sweep`` setting (``var:start:stop:points[:linear|log]``, axes separated by
``;``). Without a sweep a single point is evaluated and the scenario may also
write detail files (spectra, geometries). A JSON manifest records all files
and the resolved settings; passing it back via ``--config`` reruns the job.
"""
from __future__ import annotations

import argparse
import csv
import functools
import itertools
import json
import math
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import coupling, crystal, phonons, rotor
from ._fmt import fnum
from .errors import DipolarError
from .params import PARAM_KEYS, ModelParams, get_binding, params_from_mapping, parse_config, tweezer_constraints

SCHEMA = 1
OK_FRACTION = 0.9
WORKERS_ENV = "DIPOLAR_SIM_WORKERS"


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ helpers

def fmt(value):
    """CSV cell: scientific notation for 0 < |x| < 1e-3."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fnum(value)
    return str(value)


def write_rows(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])


def parse_sweep(text):
    axes = []
    for part in filter(None, (p.strip() for p in text.split(";"))):
        bits = [b.strip() for b in part.split(":")]
        if len(bits) not in (4, 5):
            raise ConfigError(f"bad sweep axis {part!r}; expected var:start:stop:points[:linear|log]")
        var, start, stop, n = bits[0], float(bits[1]), float(bits[2]), int(bits[3])
        kind = bits[4] if len(bits) == 5 else "linear"
        if n < 1:
            raise ConfigError(f"sweep axis {var} needs at least one point")
        if kind == "linear":
            values = np.linspace(start, stop, n)
        elif kind == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("log sweep needs positive bounds")
            values = np.geomspace(start, stop, n)
        else:
            raise ConfigError(f"unknown sweep spacing {kind!r}")
        # trim linspace round-off (0.049999999999999996 -> 0.05)
        axes.append((var, [float(f"{v:.12g}") for v in values]))
    return axes


# ---------------------------------------------------------------- scenarios

@functools.lru_cache(maxsize=8)
def _marker_setup(key):
    params = ModelParams(**dict(key[0]))
    return coupling.marker_chain_setup(params, marker_site=key[1], with_marker=key[2])


def _setup_key(params, site, with_marker=True):
    base = params.with_(epsilon=0.0, delta_u_bar=0.5)
    return (tuple(sorted(base.as_dict().items())), site, with_marker)


def _site(settings, params):
    s = int(settings["marker_site"])
    return params.n_molecules // 2 if s < 0 else s


def stark_point(settings, params):
    levels = rotor.stark_spectrum(settings["B"], settings["mu_b"], settings["E_b"], int(settings["n_max"]))
    rows = []
    for lv in levels:
        if lv.M >= 0 and lv.N <= int(settings["max_label"]):
            rows.append({"label_N": lv.N, "label_absM": lv.M, "energy": lv.energy, "dipole": lv.induced_dipole})
    rows.sort(key=lambda r: (r["label_N"], r["label_absM"]))
    return rows


def two_molecule_point(settings, params):
    setup = coupling.two_molecule_setup(params)
    nu = params.omega_long if params.omega_long is not None else math.sqrt(6.0 / params.mass)
    x = setup.equilibrium.positions[:, 0]
    spacing = abs(x[1] - x[0])
    expected = (6.0 / (params.mass * nu**2)) ** 0.2
    spec = setup.spectrum
    phonons.classify_modes(spec)
    rows = []
    for k, om in enumerate(spec.frequencies):
        rows.append({"k": k, "omega": om, "omega_over_nu": om / nu, "branch": spec.branch[k],
                     "spacing": spacing, "spacing_expected": expected})
    return rows


def two_molecule_files(settings, params, prefix):
    setup = coupling.two_molecule_setup(params)
    phonons.classify_modes(setup.spectrum)
    files = [(f"{prefix}_geometry.csv", "index,layer,x,y,z"), (f"{prefix}_spectrum.csv", "k,omega,branch,ipr")]
    crystal.write_geometry_csv(setup.equilibrium.geometry, files[0][0])
    phonons.write_spectrum_csv(setup.spectrum, files[1][0])
    return files


def chain_point(settings, params):
    setup = _marker_setup(_setup_key(params, 0, with_marker=False))
    spec = setup.spectrum
    labels = setup.labels
    rows = []
    for a, (lo, hi) in sorted(labels.band_edges.items()):
        branch = spec.branch[int(np.flatnonzero(labels.dominant_axis == a)[0])]
        rows.append({"branch": branch, "omega_min": lo, "omega_max": hi, "n_local": int(spec.local.sum())})
    return rows


def chain_files(settings, params, prefix):
    setup = _marker_setup(_setup_key(params, 0, with_marker=False))
    path = f"{prefix}_spectrum.csv"
    phonons.write_spectrum_csv(setup.spectrum, path)
    return [(path, "k,omega,branch,ipr")]


def local_modes_point(settings, params):
    setup = _marker_setup(_setup_key(params, _site(settings, params)))
    spec, geo = setup.spectrum, setup.equilibrium.geometry
    loc = phonons.local_modes(spec)
    rows = []
    for axis in sorted(loc):
        k = loc[axis]
        rows.append({"axis": axis, "k": k, "omega": spec.frequencies[k], "participation": spec.participation[k],
                     "marker_target_weight": phonons.marker_target_weight(spec, geo, k),
                     "n_local": int(spec.local.sum())})
    return rows


def local_modes_files(settings, params, prefix):
    setup = _marker_setup(_setup_key(params, _site(settings, params)))
    files = [(f"{prefix}_spectrum.csv", "k,omega,branch,ipr"),
             (f"{prefix}_modes.csv", "k,molecule,axis,amplitude"),
             (f"{prefix}_geometry.csv", "index,layer,x,y,z")]
    phonons.write_spectrum_csv(setup.spectrum, files[0][0], files[1][0])
    crystal.write_geometry_csv(setup.equilibrium.geometry, files[2][0])
    return files


def pmi_point(settings, params):
    setup = coupling.two_molecule_setup(params)
    nu = params.omega_long if params.omega_long is not None else math.sqrt(6.0 / params.mass)
    w0 = settings["omega0_over_nu"] * nu
    model = coupling.effective_spin_model(setup.table, params.epsilon, w0)
    du = coupling.displacement_bound(setup.table, params.epsilon, w0)
    eps2 = params.epsilon**2 if params.epsilon > 0 else math.nan
    return [{"omega0": w0, "U12": model.U[0, 1], "V_pm": model.phonon[0, 1],
             "V_pm_over_eps2": model.phonon[0, 1] / eps2, "delta_u": du,
             "forbidden": du > params.delta_u_bar}]


def gate_point(settings, params):
    setup = _marker_setup(_setup_key(params, _site(settings, params)))
    metrics, model = coupling.gate_point(setup, params.epsilon, params.delta_u_bar, settings["side"])
    est = coupling.analytic_gate_estimates(params)["+"]
    return [{"U0": metrics.U0, "U_res": metrics.U_res, "ratio": metrics.ratio, "omega0": metrics.omega0,
             "delta_R": metrics.delta_R, "delta_u": metrics.delta_u, "rwa_ok": metrics.rwa_ok,
             "U0_analytic": est["U0_analytic"], "U_res_analytic": est["U_res_analytic"]}]


def tweezer_point(settings, params):
    binding = get_binding(settings["binding"])
    a = binding.spacing(params.r_d)
    win = tweezer_constraints(params, settings["sigma_tw_um"] * 1e-6 / a, binding, settings["safety"])
    return [{"spacing_m": a, "omega_min": win.omega_min, "omega_max": win.omega_max, "empty": win.empty}]


SCENARIOS = {
    "stark_spectrum": (stark_point, None,
                       {"B": 1.0, "mu_b": 1.0, "E_b": 1.0, "n_max": 20, "max_label": 2,
                        "sweep": "E_b:0:10:101"}),
    "two_molecule_trap": (two_molecule_point, two_molecule_files, {"sweep": ""}),
    "chain_spectrum": (chain_point, chain_files, {"sweep": ""}),
    "marker_local_modes": (local_modes_point, local_modes_files, {"marker_site": -1, "sweep": ""}),
    "pmi_two_molecule": (pmi_point, None, {"omega0_over_nu": 2.0, "sweep": "omega0_over_nu:1.5:3.0:61"}),
    "gate_map": (gate_point, None,
                 {"marker_site": -1, "side": "matched", "sweep": "epsilon:0.01:0.15:8;b_over_a:0.5:1.0:6"}),
    "tweezer_window": (tweezer_point, None,
                       {"binding": "LiCs", "sigma_tw_um": 1.0, "safety": 10.0, "sweep": ""}),
}


# ------------------------------------------------------------------ engine

def resolve_settings(scenario, raw):
    """Typed settings: scenario defaults, then ``raw`` string/typed overrides."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    defaults = dict(SCENARIOS[scenario][2])
    settings = dict(defaults)
    param_raw = {}
    for key, value in raw.items():
        if key in ("scenario",):
            continue
        if key in PARAM_KEYS:
            param_raw[key] = value
        elif key in defaults:
            d = defaults[key]
            if isinstance(value, str) and not isinstance(d, str):
                try:
                    value = type(d)(float(value)) if isinstance(d, int) else float(value)
                except ValueError:
                    raise ConfigError(f"setting {key} expects a number, got {value!r}") from None
            settings[key] = value
        else:
            raise ConfigError(f"unknown setting {key!r} for scenario {scenario}")
    try:
        params = params_from_mapping(param_raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from None
    return settings, params


def _numeric_keys(scenario):
    d = SCENARIOS[scenario][2]
    return {k for k, v in d.items() if isinstance(v, (int, float)) and not isinstance(v, bool)}


def _evaluate(job):
    scenario, settings, param_dict, overrides = job
    settings = dict(settings)
    pd = dict(param_dict)
    for k, v in overrides:
        if k in PARAM_KEYS:
            pd[k] = int(round(v)) if k == "n_molecules" else v
            if k == "r_d" and pd.get("_omega_perp_default"):
                pd["omega_perp"] = None
        else:
            settings[k] = v
    pd.pop("_omega_perp_default", None)
    base = {k: v for k, v in overrides}
    try:
        params = ModelParams(**pd)
        rows = SCENARIOS[scenario][0](settings, params)
        return [dict(base, **r, status="ok") for r in rows] or [dict(base, status="ok")]
    except (DipolarError, ValueError, ArithmeticError) as err:
        msg = str(err).splitlines()[0] if str(err) else ""
        return [dict(base, status=type(err).__name__, error=msg)]


# settings that do not change the geometry; points differing only in these share a setup
_CHEAP = {"epsilon", "delta_u_bar", "omega0_over_nu", "E_b", "sigma_tw_um", "safety"}
_SINGLE_THREAD = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _run_jobs(jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [_evaluate(j) for j in jobs]
    # dispatch points sharing a geometry together so per-process caches hit
    order = sorted(range(len(jobs)), key=lambda i: tuple(v for k, v in jobs[i][3] if k not in _CHEAP))
    chunk = max(1, math.ceil(len(jobs) / workers))
    saved = {k: os.environ.get(k) for k in _SINGLE_THREAD}
    os.environ.update({k: "1" for k in _SINGLE_THREAD})
    try:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            out = list(pool.map(_evaluate, [jobs[i] for i in order], chunksize=chunk))
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v
    results = [None] * len(jobs)
    for i, r in zip(order, out):
        results[i] = r
    return results


def run(scenario, raw_settings, out, workers=1):
    """Run one scenario; returns (exit_code, manifest dict)."""
    settings, params = resolve_settings(scenario, raw_settings)
    axes = parse_sweep(settings["sweep"]) if settings["sweep"] else []
    allowed = set(PARAM_KEYS) | _numeric_keys(scenario)
    for var, _ in axes:
        if var not in allowed:
            raise ConfigError(f"sweep variable {var!r} is not a parameter of {scenario}")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    prefix = str(out)

    param_dict = params.as_dict()
    param_dict["_omega_perp_default"] = "omega_perp" not in raw_settings
    grid = [tuple(zip([v for v, _ in axes], combo)) for combo in
            itertools.product(*[vals for _, vals in axes])]
    grid.sort(key=lambda g: tuple(v for _, v in g))
    jobs = [(scenario, settings, tuple(param_dict.items()), g) for g in grid]
    results = _run_jobs(jobs, workers)
    rows = [r for res in results for r in res]

    columns = [v for v, _ in axes]
    for r in rows:
        if r["status"] == "ok":
            columns += [k for k in r if k not in columns and k != "status"]
            break
    columns += ["status"]
    if any(r["status"] != "ok" for r in rows):
        columns += ["error"]
    table = f"{prefix}_{scenario}.csv"
    write_rows(table, rows, columns)
    files = [{"path": table, "schema": ",".join(columns)}]

    n_ok = sum(r["status"] == "ok" for r in rows)
    code = 0
    if not axes:
        if n_ok != len(rows):
            bad = rows[0]
            raise PipelineError(f"{bad['status']}: {bad.get('error', '')}")
        extra = SCENARIOS[scenario][1]
        if extra is not None:
            files += [{"path": p, "schema": s} for p, s in extra(settings, params, prefix)]
    elif n_ok < OK_FRACTION * len(rows):
        code = 3

    resolved = params.as_dict()
    if param_dict["_omega_perp_default"]:
        resolved["omega_perp"] = None  # tied to r_d
    resolved.update({k: v for k, v in settings.items()})
    manifest = {
        "schema": SCHEMA,
        "scenario": scenario,
        "parameters": resolved,
        "files": files,
        "rows": len(rows),
        "rows_ok": n_ok,
    }
    with open(f"{prefix}_manifest.json", "w") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return code, manifest


class PipelineError(RuntimeError):
    pass


def load_config(path):
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        data = json.loads(text)
        if data.get("schema") != SCHEMA:
            raise ConfigError(f"unsupported manifest schema {data.get('schema')!r}")
        raw = {k: v for k, v in data["parameters"].items() if v is not None}
        raw["scenario"] = data["scenario"]
        return raw
    return parse_config(text)


def build_parser():
    p = argparse.ArgumentParser(prog="dipolar_gates", description="Run a dipolar-crystal gate scenario.")
    p.add_argument("--config", help="key = value file or a manifest JSON from a previous run")
    p.add_argument("--scenario", help="one of: " + ", ".join(sorted(SCENARIOS)))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a setting")
    p.add_argument("--out", default="out/run", help="output path prefix")
    p.add_argument("--workers", type=int, default=None,
                   help=f"parallel worker processes (default ${WORKERS_ENV} or 1)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config) if args.config else {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        scenario = args.scenario or raw.pop("scenario", None)
        raw.pop("scenario", None)
        if scenario is None:
            raise ConfigError("no scenario given (use --scenario or a config with 'scenario')")
        try:
            workers = args.workers if args.workers is not None else int(os.environ.get(WORKERS_ENV, "1"))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from None
        if workers < 1:
            raise ConfigError("workers must be at least 1")
        code, _ = run(scenario, raw, args.out, workers)
    except (ConfigError, PipelineError, DipolarError, ValueError, OSError) as err:
        print(f"error: {type(err).__name__}: {' '.join(str(err).split())}", file=sys.stderr)
        return 1 if isinstance(err, ConfigError) else 2
    if code:
        print("error: SweepError: fewer than 90% of grid points succeeded", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
