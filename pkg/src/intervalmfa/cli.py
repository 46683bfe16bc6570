"""Command-line entry point: ``intervalmfa <subcommand> [options]``.

Exit codes: 0 success, 1 oracle failure, 2 configuration error, 3 convergence
failure, 4 divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field, fields

import numpy as np

from . import spectra
from .cylinders import RangeError, partitions
from .hofbauer import build_tower, census_csv, export_dot, level_census, transitive_part
from .inducing import EmptySchemeError, PreconditionError, build_scheme_type_a, build_scheme_type_b
from .map_model import (
    MapValidationError,
    Potential,
    check_range_condition,
    class_f_report,
    critical_points,
    estimate_topological_entropy,
    growth_diagnostic,
    map_from_config,
    potential_from_config,
)
from .thermo import (
    BracketError,
    ConvergenceError,
    DivergenceError,
    InducedData,
    InducedPressure,
    OriginalPressure,
    normalize_potential,
    tq_curve,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_DIVERGENCE = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class TowerParams:
    level_cap: int = 10
    min_width: float = 1e-10
    tol: float = 1e-9


@dataclass
class SchemeParams:
    type: str = "A"
    domain: int = 0
    X: list | None = None  # [a, b]; default the whole base domain
    base_cylinder: str | None = None  # "DEPTH:INDEX" into P_DEPTH
    delta: float = 0.5
    tau_cap: int = 30


@dataclass
class ThermoParams:
    method: str = "induced"  # or "original"
    depth: int = 14
    tol: float = 1e-10
    pressure_tol: float = 1e-4
    normalize: bool = True
    qmin: float = -2.0
    qmax: float = 2.0
    steps: int = 41


@dataclass
class RunConfig:
    map: dict = field(default_factory=lambda: {"family": "tent", "s": 1.0})
    potential: dict = field(default_factory=lambda: {"kind": "bernoulli", "p": 0.3})
    tower: TowerParams = field(default_factory=TowerParams)
    scheme: SchemeParams = field(default_factory=SchemeParams)
    thermo: ThermoParams = field(default_factory=ThermoParams)
    seed: int = 0
    out: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        kw = dict(d)
        for name, sub in (("tower", TowerParams), ("scheme", SchemeParams), ("thermo", ThermoParams)):
            if name in kw:
                try:
                    kw[name] = sub(**kw[name])
                except TypeError as e:
                    raise ConfigError(f"bad '{name}' section: {e}") from e
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self):
        for v, name in ((self.tower.min_width, "tower.min_width"), (self.tower.tol, "tower.tol"),
                        (self.thermo.tol, "thermo.tol"), (self.thermo.pressure_tol, "thermo.pressure_tol")):
            if not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.thermo.qmax < self.thermo.qmin:
            raise ConfigError("q grid must be sorted (qmin <= qmax)")
        if self.scheme.type not in ("A", "B"):
            raise ConfigError("scheme.type must be A or B")
        if self.thermo.method not in ("induced", "original"):
            raise ConfigError("thermo.method must be induced or original")

    def q_grid(self) -> np.ndarray:
        t = self.thermo
        return np.round(np.linspace(t.qmin, t.qmax, t.steps), 12)


def _round(obj):
    """Floats to 12 significant digits, recursively, for stable JSON."""
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return float(f"{v:.12g}") if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# pipeline pieces ------------------------------------------------------------------


def load_config(args) -> RunConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        cfg = RunConfig.from_dict(d)
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    return cfg


def build_map(cfg: RunConfig):
    try:
        return map_from_config(cfg.map)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"bad map spec {cfg.map}: {e}") from e


def build_potential(cfg: RunConfig) -> Potential:
    try:
        return potential_from_config(cfg.potential)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"bad potential spec {cfg.potential}: {e}") from e


def build_scheme(cfg: RunConfig, f, tower=None):
    tower = tower or build_tower(f, cfg.tower.level_cap, cfg.tower.min_width, cfg.tower.tol)
    s = cfg.scheme
    if s.base_cylinder:
        try:
            depth, index = (int(v) for v in s.base_cylinder.split(":"))
        except ValueError as e:
            raise ConfigError(f"base cylinder must be DEPTH:INDEX, got {s.base_cylinder!r}") from e
        part = None
        for part in partitions(f, depth):
            pass
        if not 0 <= index < len(part):
            raise ConfigError(f"P_{depth} has {len(part)} cylinders; index {index} out of range")
        X = (float(part.a[index]), float(part.b[index]))
    elif s.X is not None:
        X = (float(s.X[0]), float(s.X[1]))
    else:
        D = tower.domains[s.domain]
        X = (D.a, D.b)
    if s.type == "A":
        sch = build_scheme_type_a(tower, s.domain, X, tau_cap=s.tau_cap)
    else:
        sch = build_scheme_type_b(tower, X, s.delta, tau_cap=s.tau_cap, seed=cfg.seed)
    return tower, sch


def build_model(cfg: RunConfig, f=None):
    """(map, potential, pressure model, scheme or None, induced data or None), φ normalised if requested."""
    f = f or build_map(cfg)
    phi = build_potential(cfg)
    t = cfg.thermo
    if t.method == "original":
        if t.normalize and phi.kind in ("holder_function", "constant"):
            phi = normalize_potential(f, phi, t.depth, t.pressure_tol)
        return f, phi, OriginalPressure(f, phi, t.depth, t.pressure_tol), None, None
    _, sch = build_scheme(cfg, f)
    if t.normalize and phi.kind in ("holder_function", "constant"):
        phi = normalize_potential(f, phi, scheme=sch)
    data = InducedData.from_scheme(sch, phi)
    return f, phi, InducedPressure(data), sch, data


# subcommands ----------------------------------------------------------------------


def cmd_map_inspect(cfg, args):
    f = build_map(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ent = estimate_topological_entropy(f, args.depth)
        crit = critical_points(f)
        growth = growth_diagnostic(f, 30) if crit else None
        cf = class_f_report(f)
    rep = {
        "map": f.to_json(),
        "smooth": f.is_smooth,
        "critical_points": [{"c": c.c, "order": c.order} for c in crit],
        "entropy": {"value": ent.value, "laps": list(ent.laps)},
        "class_f_plausible": cf.plausible,
        "warnings": sorted({str(w.message) for w in caught}),
    }
    if growth is not None:
        rep["growth"] = [{"c": p.c, "regime": p.regime, "exp_rate": p.exp_rate, "poly_exponent": p.poly_exponent}
                         for p in growth.points]
        rep["preperiodic"] = bool(growth.preperiodic)
    try:
        phi = build_potential(cfg)
        if phi.kind in ("holder_function", "constant"):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ok, margin = check_range_condition(f, phi, ent.value)
            rep["range_condition"] = {"ok": ok, "margin": margin}
    except ConfigError:
        pass
    _emit(dumps(rep), cfg.out)
    return EXIT_OK


def cmd_cylinders(cfg, args):
    f = build_map(cfg)
    rows = ["depth,index,a,b,image_a,image_b,itinerary"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for part in partitions(f, args.depth):
            if part.depth == 0 and not args.all_depths:
                continue
            if args.all_depths or part.depth == args.depth:
                for i in range(len(part)):
                    itin = "".join(str(int(v)) for v in part.itin[i]) or "-"
                    rows.append(f"{part.depth},{i},{part.a[i]:.12g},{part.b[i]:.12g},{part.img_lo[i]:.12g},{part.img_hi[i]:.12g},{itin}")
    _emit("\n".join(rows) + "\n", cfg.out)
    return EXIT_OK


def cmd_tower(cfg, args):
    f = build_map(cfg)
    cap = args.level_cap if args.level_cap is not None else cfg.tower.level_cap
    mw = args.min_width if args.min_width is not None else cfg.tower.min_width
    tw = build_tower(f, cap, mw, cfg.tower.tol)
    census = level_census(tw)
    tp = transitive_part(tw)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(export_dot(tw))
    if args.census:
        with open(args.census, "w") as fh:
            fh.write(census_csv(tw))
    rep = {
        "domains": len(tw.domains),
        "census": {str(k): v for k, v in census.counts.items()},
        "census_bound": census.bound,
        "census_violations": census.violations,
        "transitive_part": sorted(tp.ids),
        "transitive_closed": tp.closed,
        "truncated": bool(tw.truncated),
        "notes": tw.notes,
    }
    _emit(dumps(rep), cfg.out)
    return EXIT_OK


def cmd_induce(cfg, args):
    s = cfg.scheme
    for k in ("type", "base_cylinder", "delta", "tau_cap", "domain"):
        v = getattr(args, k.replace("-", "_"), None)
        if v is not None:
            setattr(s, k, v)
    f = build_map(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        _, sch = build_scheme(cfg, f)
    d = sch.to_json()
    d["warnings"] = sorted({str(w.message) for w in caught})
    _emit(dumps(d), cfg.out)
    return EXIT_OK


def cmd_pressure(cfg, args):
    _, phi, model, sch, _ = build_model(cfg)
    est = model.estimate(args.t, args.q)
    rep = {"t": args.t, "q": args.q, "value": est.value, "method": est.method, "converged": est.converged,
           "sequence": list(est.sequence), "notes": est.notes, "normalization_shift": phi.normalization_shift}
    if sch is not None:
        rep["coverage"] = sch.coverage
    _emit(dumps(rep), cfg.out)
    return EXIT_OK if est.converged else EXIT_CONVERGENCE


def _grid(cfg, args):
    t = cfg.thermo
    for k in ("qmin", "qmax", "steps"):
        v = getattr(args, k, None)
        if v is not None:
            setattr(t, k, v)
    cfg.validate()
    return cfg.q_grid()


def cmd_tq(cfg, args):
    q = _grid(cfg, args)
    _, _, model, _, data = build_model(cfg)
    curve = tq_curve(model, q, tol=cfg.thermo.tol, jobs=args.jobs, pb_data=data)
    _emit(curve.to_csv(), cfg.out)
    return EXIT_OK if np.all(curve.converged) else EXIT_CONVERGENCE


def cmd_spectrum(cfg, args):
    q = _grid(cfg, args)
    f = build_map(cfg)
    if args.kind == "lyapunov":
        h = estimate_topological_entropy(f).value
        cfg.potential = {"kind": "constant", "a": -h}
        cfg.thermo.normalize = False
        _, _, model, _, data = build_model(cfg, f)
        spec, curve = spectra.dimension_spectrum(model, q, jobs=args.jobs, tol=cfg.thermo.tol, pb_data=data)
        spec = spectra.lyapunov_relabel(spec, h)
    else:
        _, phi, model, sch, data = build_model(cfg, f)
        spec, curve = spectra.dimension_spectrum(model, q, scheme=sch, phi=phi, jobs=args.jobs, tol=cfg.thermo.tol, pb_data=data)
    _emit(spec.to_csv(), cfg.out)
    return EXIT_OK if np.all(curve.converged) else EXIT_CONVERGENCE


def cmd_pointwise(cfg, args):
    f, phi, _, sch, _ = build_model(cfg)
    if sch is None:
        raise ConfigError("pointwise dimension needs an inducing scheme (thermo.method = induced)")
    lyap = spectra.pointwise_lyapunov(f, args.x, args.depth)
    from .thermo import gibbs_weights

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = gibbs_weights(sch, phi, args.gibbs_depth)
    r = spectra.pointwise_dimension(sch, phi, args.x, args.depth, gibbs=g)
    rep = {"x": args.x, "depth": r.depth, "d_cylinder": r.d_cylinder, "d_ball": r.d_ball, "agree": r.agree,
           "exit": r.exit, "lyapunov_lower": lyap.lower, "lyapunov_upper": lyap.upper}
    if args.sample:
        word = spectra.sample_gibbs_word(sch, phi, args.depth, seed=cfg.seed)
        rw = spectra.pointwise_dimension_word(sch, phi, word)
        rep["sampled"] = {"seed": cfg.seed, "d_cylinder": rw.d_cylinder, "lyapunov": rw.lyapunov}
    _emit(dumps(rep), cfg.out)
    return EXIT_OK


def cmd_visits(cfg, args):
    f = build_map(cfg)
    x = args.x if args.x is not None else float(np.random.default_rng(cfg.seed).random())
    rep_ls = spectra.large_scale_visits(f, x, args.delta, args.n)
    tw = build_tower(f, cfg.tower.level_cap, cfg.tower.min_width, cfg.tower.tol)
    R = args.R if args.R is not None else cfg.tower.level_cap
    freq = spectra.tower_visit_frequency(tw, x, args.n, R)
    rep = {"x": x, "delta": args.delta, "n": args.n, "times": rep_ls.times, "truncated": rep_ls.truncated,
           "n_reached": rep_ls.n_reached, "R": R, "tower_visit_frequency": freq}
    _emit(dumps(rep), cfg.out)
    return EXIT_OK


def cmd_verify_oracles(cfg, args):
    from .oracles import OracleConfig, run_suite

    results, report = run_suite(OracleConfig(seed=cfg.seed, jobs=args.jobs))
    _emit(report, cfg.out)
    if cfg.out:
        sys.stdout.write(report)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# argument parsing -----------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for per-q sections")
    common.add_argument("--seed", type=int, default=None)

    p = argparse.ArgumentParser(prog="intervalmfa", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("map-inspect", parents=[common], help="critical points, entropy, growth, class-F heuristics")
    s.add_argument("--depth", type=int, default=14)
    s.set_defaults(func=cmd_map_inspect)

    s = sub.add_parser("cylinders", parents=[common], help="cylinder partition P_n as CSV")
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--all-depths", action="store_true")
    s.set_defaults(func=cmd_cylinders)

    s = sub.add_parser("tower", parents=[common], help="Hofbauer tower summary, DOT graph, level census")
    s.add_argument("action", nargs="?", default="build", choices=["build"])
    s.add_argument("--level-cap", type=int)
    s.add_argument("--min-width", type=float)
    s.add_argument("--dot")
    s.add_argument("--census")
    s.set_defaults(func=cmd_tower)

    s = sub.add_parser("induce", parents=[common], help="build an inducing scheme")
    s.add_argument("--type", choices=["A", "B"])
    s.add_argument("--base-cylinder", dest="base_cylinder")
    s.add_argument("--domain", type=int)
    s.add_argument("--delta", type=float)
    s.add_argument("--tau-cap", dest="tau_cap", type=int)
    s.set_defaults(func=cmd_induce)

    s = sub.add_parser("pressure", parents=[common], help="P(-t log|Df| + q phi)")
    s.add_argument("--t", type=float, default=0.0)
    s.add_argument("--q", type=float, default=1.0)
    s.set_defaults(func=cmd_pressure)

    for name, func in (("tq", cmd_tq), ("spectrum", cmd_spectrum)):
        s = sub.add_parser(name, parents=[common], help="T(q) curve" if name == "tq" else "dimension or Lyapunov spectrum")
        if name == "spectrum":
            s.add_argument("kind", choices=["dimension", "lyapunov"])
        s.add_argument("--qmin", type=float)
        s.add_argument("--qmax", type=float)
        s.add_argument("--steps", type=int)
        s.set_defaults(func=func)

    s = sub.add_parser("pointwise", parents=[common], help="pointwise dimension and Lyapunov exponent")
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--depth", type=int, default=50)
    s.add_argument("--gibbs-depth", dest="gibbs_depth", type=int, default=10)
    s.add_argument("--sample", action="store_true", help="also evaluate a Gibbs-sampled itinerary of the same depth")
    s.set_defaults(func=cmd_pointwise)

    s = sub.add_parser("visits", parents=[common], help="large-scale times and tower visit frequency")
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--x", type=float)
    s.add_argument("--R", type=int)
    s.set_defaults(func=cmd_visits)

    s = sub.add_parser("verify-oracles", parents=[common], help="run the acceptance oracle suite")
    s.set_defaults(func=cmd_verify_oracles)
    return p


def run_command(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args)
        return args.func(cfg, args)
    except (ConfigError, MapValidationError, PreconditionError, EmptySchemeError, RangeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"divergence: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ConvergenceError, BracketError) as e:
        print(f"convergence failure: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
