"""``anosov-forge <experiment> --config <path> [--out <dir>] [--seed <n>]``.

Configs are flat ``key = value`` files. Every run writes ``manifest.txt``
with the fully resolved parameters next to its reports. Exit status is 0
when every certificate of the experiment passes, 1 when one fails and 2 on
invalid input or a module error (an ``error.txt`` record is written).
"""

import argparse
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .reports import parse_key_values, write_csv, write_report

REQUIRED = object()


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float(text):
    t = text.strip().lower()
    consts = {"pi": math.pi, "pi/10": math.pi / 10, "pi/100": math.pi / 100}
    return consts[t] if t in consts else float(t)


class ConfigError(ValueError):
    pass


# experiment -> key -> (parser, default); ``matrix`` values are paths
SCHEMAS = {
    "hyperbolicity": {
        "matrix": ("matrix", REQUIRED),
        "tol": (_float, 1e-9),
    },
    "obstruction": {
        "matrix": ("matrix", REQUIRED),
        "pair": (_bool, True),
        "tol": (_float, 1e-12),
    },
    "suspension-rates": {
        "matrix_b": ("matrix", REQUIRED),
        "matrix_a": ("matrix", REQUIRED),
        "t_max": (_float, 10.0),
        "n_vectors": (int, 8),
        "n_times": (int, 50),
    },
    "da-scan": {
        "delta": (_float, REQUIRED),
        "alpha": (str, "canonical"),
        "grid": (int, 400),
        "t0": (_float, 0.01),
        "exclude_radius_steps": (_float, 2.0),
    },
    "cone-certify": {
        "delta": (_float, REQUIRED),
        "alpha": (str, "canonical"),
        "eps": (_float, 0.3),
        "n_points": (int, 10000),
        "n_flow": (int, 1000),
        "exit_aperture": (_float, math.pi / 10),
        "recheck": (_bool, True),
    },
    "surgery-certify": {
        "delta": (_float, REQUIRED),
        "alpha": (str, "canonical"),
        "kappa_ratio": (_float, 0.25),
        "samples": (int, 10000),
        "n_tau": (int, 1),
        "gluing": (str, "flip"),
        "floor": (_float, 1e-3),
        "orbit_s": (_float, 0.013),
        "orbit_u": (_float, 0.012),
        "orbit_horizon": (_float, 3.0),
    },
    "fw3d": {
        "matrix": ("matrix", REQUIRED),
        "mu_factor": (_float, 1.2),
        "r_support": (_float, 0.2),
        "r_tube": (_float, 0.05),
        "iterations": (int, 15),
        "resolution": (int, 1200),
        "tolerance": (_float, 1e-3),
        "n_theta": (int, 100),
        "n_tau": (int, 100),
        "gluing": (str, "quarter_turn"),
        "floor": (_float, 1e-3),
    },
}

CHOICES = {"gluing": {"surgery-certify": ("flip", "identity", "quarter_turn"),
                      "fw3d": ("quarter_turn", "identity", "disc_rotation")}}


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict
    seed: int
    output_dir: Path
    raw: dict

    def manifest(self):
        out = {"experiment": self.experiment, "version": __version__, "seed": self.seed}
        for k in SCHEMAS[self.experiment]:
            out[k] = self.raw[k]
        return out


def resolve_config(experiment, text, base_dir=Path("."), seed=None, out=None):
    """Validate a config text; unknown keys and missing required keys are errors."""
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(SCHEMAS)}")
    values = parse_key_values(text)
    if not values:
        raise ConfigError("config is empty")
    if values.get("experiment") == experiment:
        del values["experiment"]
    if "experiment" in values:
        raise ConfigError(f"config names experiment {values['experiment']!r}, command line says {experiment!r}")
    schema = dict(SCHEMAS[experiment])
    config_seed = values.pop("seed", None)
    unknown = sorted(set(values) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for {experiment}: {', '.join(unknown)}")
    params, raw = {}, {}
    for key, (kind, default) in schema.items():
        if key not in values:
            if default is REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            params[key], raw[key] = default, default
            continue
        text_value = values[key]
        try:
            if kind == "matrix":
                from .toral_dynamics import read_matrix
                path = Path(text_value)
                path = path if path.is_absolute() else base_dir / path
                params[key], raw[key] = read_matrix(path), str(path)
            elif key == "alpha" and text_value != "canonical":
                path = Path(text_value)
                params[key] = raw[key] = str(path if path.is_absolute() else base_dir / path)
            else:
                params[key] = kind(text_value)
                raw[key] = params[key]
        except (ValueError, OSError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
        allowed = CHOICES.get(key, {}).get(experiment)
        if allowed and params[key] not in allowed:
            raise ConfigError(f"{key} must be one of {', '.join(allowed)}")
    if seed is None:
        seed = int(config_seed) if config_seed is not None else 0
    output_dir = Path(out) if out else Path("anosov-forge-out") / experiment
    return ExperimentConfig(experiment, params, int(seed), output_dir, raw)


# -- experiments; each returns (passed, report mapping) and writes its files --

def _hyperbolicity(cfg):
    from .toral_dynamics import is_hyperbolic, stable_unstable_dims
    A, p = cfg.parameters["matrix"], cfg.parameters
    ok, moduli = is_hyperbolic(A, p["tol"])
    rep = {"d": A.d, "det": A.det, "charpoly": list(A.charpoly()), "moduli": [float(m) for m in moduli],
           "hyperbolic": ok}
    if ok:
        rep["dims.stable"], rep["dims.unstable"] = stable_unstable_dims(A, p["tol"])
    return ok, rep


def _obstruction(cfg):
    from .obstruction import fiberwise_obstruction_report
    p = cfg.parameters
    return True, fiberwise_obstruction_report(p["matrix"], p["pair"], p["tol"]).as_dict()


def _suspension_rates(cfg):
    from .toral_dynamics import fiberwise_rate_check
    p = cfg.parameters
    r = fiberwise_rate_check(p["matrix_b"], p["matrix_a"], p["t_max"], p["n_vectors"], p["n_times"], cfg.seed)
    return r.passed, r.as_dict()


def _domain(p):
    from .da_flow import DADomain, load_profile
    return DADomain(load_profile({"delta": p["delta"], "alpha": p["alpha"]}), t0=p.get("t0", 0.01))


def _da_scan(cfg):
    from .da_flow import scan_grid, write_scan_csv
    p = cfg.parameters
    res = scan_grid(_domain(p), p["grid"], p["exclude_radius_steps"])
    write_scan_csv(cfg.output_dir / "scan.csv", res)
    ok = res.xi > 0 and res.c_abs_max < res.c_bar
    return ok, {"xi": res.xi, "c_max": res.c_max, "c_abs_max": res.c_abs_max, "c_bar": res.c_bar,
                "beta_max_outside": res.beta_max_outside, "xi_positive": res.xi > 0,
                "c_below_bound": res.c_abs_max < res.c_bar}


def _cone_certify(cfg):
    from .cone_engine import CERTIFIED, certify_da
    p = cfg.parameters
    verdict, reports = certify_da(_domain(p), p["eps"], p["n_points"], cfg.seed, p["exit_aperture"],
                                  recheck=p["recheck"], n_flow=p["n_flow"])
    rows = [row for r in reports for row in r.csv_rows()]
    write_csv(cfg.output_dir / "checks.csv", ["s", "u", "check", "margin", "pass"], rows)
    rep = dict(verdict)
    for r in reports:
        rep.update(r.summary())
    return verdict["verdict"] == CERTIFIED, rep


def _surgery_certify(cfg):
    from .surgery import (GluedChartPoint, GluedFlow, W2, boundary_line_field, boundary_sample,
                          transversality_certificate, write_orbit_csv)
    p = cfg.parameters
    profile = _domain(p).profile
    kappa = p["kappa_ratio"] * profile.delta
    field_ = boundary_line_field(boundary_sample(profile, kappa, p["samples"], p["n_tau"]))
    cert, angles = transversality_certificate(field_, p["gluing"], p["floor"])
    s = field_.sample
    write_csv(cfg.output_dir / "transversality.csv", ["theta", "tau", "angle"],
              zip(s.theta.tolist(), s.tau.tolist(), angles.tolist()))
    flow = GluedFlow(profile, kappa, p["gluing"])
    _, rows, log = flow.orbit(GluedChartPoint(W2, p["orbit_s"], p["orbit_u"], 0.0), p["orbit_horizon"])
    write_orbit_csv(cfg.output_dir / "orbit.csv", rows)
    rep = {"kappa": kappa, **cert, "orbit.events": [name for _, name, _ in log] or ["none"]}
    return cert["pass"], rep


def _fw3d(cfg):
    from . import fw3d
    p = cfg.parameters
    A = p["matrix"]
    lam_s = min(abs(complex(v)) for v in A.eigenvalues())
    m = fw3d.DAMap2D(A, p["mu_factor"] * math.log(1.0 / lam_s), p["r_support"])
    numeric, expected = m.repeller_spectrum()
    split = fw3d.nonwandering_split(m, p["iterations"], p["resolution"], tolerance=p["tolerance"])
    trace = fw3d.boundary_foliation_trace(m, p["r_tube"], p["n_theta"], p["n_tau"])
    cert, _ = fw3d.quarter_turn_transversality(trace, p["gluing"], p["floor"])
    control, _ = fw3d.quarter_turn_transversality(trace, "identity", p["floor"])
    fw3d.write_trace_csv(cfg.output_dir / "trace.csv", trace)
    (cfg.output_dir / "trace.svg").write_text(fw3d.trace_svg(trace, p["gluing"]))
    repelling = bool(numeric.min() > 1.0)
    rep = {"mu": m.mu, "mu_threshold": m.mu_threshold, "jacobian_moduli": numeric.tolist(),
           "jacobian_moduli_expected": expected.tolist(), "repelling": repelling,
           "repeller_margin": float(numeric.min() - 1.0)}
    rep.update({f"attractor.{k}": v for k, v in split.as_dict().items()})
    rep.update({"trace.max_jump": trace.max_jump(), "trace.tau_coupling": trace.tau_coupling()})
    rep.update({f"gluing.{k}": v for k, v in cert.items()})
    rep.update({"control.theta_min": control["theta_min"], "control.pass": control["pass"]})
    ok = repelling and split.stable and cert["pass"] and not control["pass"]
    return ok, rep


EXPERIMENTS = {
    "hyperbolicity": _hyperbolicity,
    "obstruction": _obstruction,
    "suspension-rates": _suspension_rates,
    "da-scan": _da_scan,
    "cone-certify": _cone_certify,
    "surgery-certify": _surgery_certify,
    "fw3d": _fw3d,
}


def apply_thread_cap():
    cap = os.environ.get("ANOSOV_FORGE_THREADS")
    if cap:
        import numba
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))


def run(cfg):
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_report(cfg.output_dir / "manifest.txt", cfg.manifest())
    passed, rep = EXPERIMENTS[cfg.experiment](cfg)
    write_report(cfg.output_dir / "report.txt", {"experiment": cfg.experiment, "passed": bool(passed), **rep})
    return 0 if passed else 1


def _error(out_dir, experiment, exc):
    record = {"experiment": experiment, "error.type": type(exc).__name__, "error.message": str(exc)}
    sys.stderr.write("".join(f"{k} = {v}\n" for k, v in record.items()))
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_report(out_dir / "error.txt", record)
        except OSError:
            pass
    return 2


def main(argv=None):
    ap = argparse.ArgumentParser(prog="anosov-forge", description=__doc__.split("\n")[0])
    ap.add_argument("experiment", choices=sorted(EXPERIMENTS))
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--seed", type=int)
    args = ap.parse_args(argv)
    out = args.out
    try:
        apply_thread_cap()
        cfg = resolve_config(args.experiment, args.config.read_text(), args.config.parent, args.seed, args.out)
        out = cfg.output_dir
        return run(cfg)
    except Exception as exc:  # every failure becomes an error record
        return _error(out, args.experiment, exc)


if __name__ == "__main__":
    sys.exit(main())
