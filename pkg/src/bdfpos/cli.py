"""Command line front-end: ``bdfp <command> [options]``.

Configuration comes from a flat ``key = value`` file (``--config``) with
command-line flags taking precedence; ``BDFP_CACHE_DIR`` overrides the cache
directory from either.  The JSON report on stdout and the file written with
``--out`` depend only on the configuration, so repeated runs are
byte-identical; timings and cache hits go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import energy as en
from . import projectors as pj
from .errors import BDFError, ParseError, ValidationError
from .momentum import FixedPointOptions, ModelParams, cached_dispersion, dispersion_diagnostics
from .pekar import minimize_pekar, save_profile

COMMANDS = ("dispersion", "pekar", "energy", "sweep", "structure-check")
# below ~30 lambda the box clips ~1e-4 of the trial norm; below ~20 lambda the
# state construction fails outright
BOX_WARN_FACTOR = 30.0
DEFAULT_FORMAT = {"dispersion": "csv", "pekar": "csv", "energy": "json", "sweep": "csv", "structure-check": "json"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    alpha: float = 0.05
    cutoff: float = 30.0
    radial_points: int = 1024
    tolerance: float = 1e-12
    max_iterations: int = 500
    damping: float = 1.0
    grid: int = 64
    box: float | None = None
    box_factor: float = en.DEFAULT_BOX_FACTOR
    r_max: float = 40.0
    nodes: int = 4000
    pekar_tol: float = 1e-8
    lambda_span: tuple = (0.3, 3.0)
    scan_points: int = 21
    alphas: tuple = (0.03, 0.06, 0.12)
    trials: int = 20
    cache_dir: str = ".bdfp_cache"
    out: str | None = None
    format: str | None = None
    seed: int = 0
    memory_budget_mb: float = 2048.0

    @property
    def model(self):
        return ModelParams(
            self.alpha,
            self.cutoff,
            self.radial_points,
            FixedPointOptions(self.tolerance, self.max_iterations, self.damping),
        )

    def model_for(self, alpha):
        return replace(self, alpha=alpha).model

    @property
    def output_format(self):
        return self.format or DEFAULT_FORMAT[self.command]

    def echo(self):
        d = asdict(self)
        d["lambda_span"] = list(self.lambda_span)
        d["alphas"] = list(self.alphas)
        d["format"] = self.output_format
        return d


@dataclass
class RunReport:
    config: dict
    results: dict
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def payload(self):
        return {"config": self.config, "warnings": self.warnings, "results": self.results}


# -- parsing -----------------------------------------------------------------


def _floats(text):
    return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)


_KEYS = {f.name for f in fields(RunConfig)}
_INT_KEYS = {"radial_points", "max_iterations", "grid", "nodes", "scan_points", "trials", "seed"}
_FLOAT_KEYS = {
    "alpha",
    "cutoff",
    "tolerance",
    "damping",
    "box_factor",
    "r_max",
    "pekar_tol",
    "memory_budget_mb",
}
_ALIASES = {"cartesian_points": "grid", "box_length": "box", "output_path": "out", "output": "out"}


def _convert(key, raw):
    try:
        if key in _INT_KEYS:
            as_float = float(raw)
            if not as_float.is_integer():
                raise ValueError
            return int(as_float)
        if key in _FLOAT_KEYS:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if key == "box":
            return None if str(raw).strip().lower() == "auto" else float(raw)
        if key in ("lambda_span", "alphas"):
            return _floats(raw)
        return str(raw)
    except ValueError:
        raise ValidationError(key, f"cannot interpret {raw!r}") from None


def read_config_file(path):
    """Parse a ``key = value`` file into a dict; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        key = _ALIASES.get(key, key)
        if not sep or not key:
            raise ParseError(f"{path}:{lineno}: expected key = value")
        if key not in _KEYS or key == "command":
            raise ParseError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(f"command line: {message}")


def build_parser():
    p = _Parser(prog="bdfp", description="Dressed dispersion, Pekar minimizer and positronium trial energies.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--alpha", help="coupling constant")
    p.add_argument("--cutoff", help="momentum cutoff")
    p.add_argument("--grid", help="Cartesian points per axis")
    p.add_argument("--box", help="box length, or 'auto'")
    p.add_argument("--out", help="output file")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--seed", help="seed for randomized checks")
    p.add_argument("--alphas", help="comma separated couplings for sweep")
    p.add_argument("--timings", action="store_true", help="include stage timings in the report")
    return p


def parse_config(argv=None, env=None):
    """Build a validated :class:`RunConfig` from flags and an optional file."""
    env = os.environ if env is None else env
    args = build_parser().parse_args(argv)
    values = read_config_file(args.config) if args.config else {}
    for key in ("alpha", "cutoff", "grid", "box", "out", "format", "seed", "alphas"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    if env.get("BDFP_CACHE_DIR"):
        values["cache_dir"] = env["BDFP_CACHE_DIR"]
    kwargs = {k: _convert(k, v) for k, v in values.items()}
    cfg = RunConfig(command=args.command, **kwargs)
    validate(cfg)
    return cfg, args


def validate(cfg):
    if cfg.command not in COMMANDS:
        raise ValidationError("command", f"unknown command {cfg.command!r}")
    if not cfg.alpha >= 0:
        raise ValidationError("alpha", "must be >= 0")
    for name in ("cutoff", "tolerance", "box_factor", "r_max", "pekar_tol", "memory_budget_mb"):
        if not getattr(cfg, name) > 0:
            raise ValidationError(name, "must be > 0")
    if not 0 < cfg.damping <= 1:
        raise ValidationError("damping", "must lie in (0, 1]")
    if cfg.radial_points < 3:
        raise ValidationError("radial_points", "must be >= 3")
    if cfg.grid < 4 or cfg.grid % 2:
        raise ValidationError("grid", "must be even and >= 4")
    if cfg.box is not None and not cfg.box > 0:
        raise ValidationError("box", "must be > 0 or 'auto'")
    for name in ("max_iterations", "nodes", "scan_points", "trials"):
        if getattr(cfg, name) < 1:
            raise ValidationError(name, "must be >= 1")
    if cfg.nodes < 4:
        raise ValidationError("nodes", "must be >= 4")
    if len(cfg.lambda_span) != 2 or not 0 < cfg.lambda_span[0] < cfg.lambda_span[1]:
        raise ValidationError("lambda_span", "expected 'lo,hi' with 0 < lo < hi")
    if not cfg.alphas or any(a < 0 for a in cfg.alphas):
        raise ValidationError("alphas", "need a non-empty list of couplings >= 0")
    if list(cfg.alphas) != sorted(cfg.alphas):
        raise ValidationError("alphas", "must be sorted ascending")
    if cfg.format not in (None, "json", "csv"):
        raise ValidationError("format", "must be json or csv")
    if cfg.seed < 0:
        raise ValidationError("seed", "must be >= 0")


# -- running -----------------------------------------------------------------


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.original = exc


class _Stages:
    def __init__(self):
        self.timings = {}

    def __call__(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except BDFError as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0


def _warn(warnings, code, message):
    entry = {"code": code, "message": message}
    if entry not in warnings:
        warnings.append(entry)


def _coupling_warnings(warnings, alpha, cutoff):
    if alpha * math.log(cutoff) > 0.1:
        _warn(
            warnings,
            "ALPHA_LOG_CUTOFF",
            f"alpha*log(cutoff) = {alpha * math.log(cutoff):.3g} > 0.1: outside the small-coupling regime",
        )


def _grid_warnings(warnings, cfg, lam):
    box = cfg.box if cfg.box is not None else en.auto_box(lam, cfg.box_factor)
    kmax = math.sqrt(3.0) * math.pi * cfg.grid / box
    if kmax < cfg.cutoff:
        _warn(
            warnings,
            "BAND_BELOW_CUTOFF",
            f"lattice momenta reach {kmax:.3g} < cutoff {cfg.cutoff:g}; the cutoff projector acts as the identity",
        )
    if box < BOX_WARN_FACTOR * lam:
        _warn(warnings, "BOX_SMALL", f"box {box:.4g} < {BOX_WARN_FACTOR:g} lambda = {BOX_WARN_FACTOR * lam:.4g}")
    mem = 16.0 * (8 * cfg.grid**3) * 6 / 2**20
    if mem > cfg.memory_budget_mb:
        _warn(warnings, "MEMORY_BUDGET", f"estimated {mem:.0f} MiB exceeds budget {cfg.memory_budget_mb:g} MiB")


def _table(stages, cfg, alpha, notes):
    table, path, reused = stages("dispersion", cached_dispersion, cfg.model_for(alpha), cfg.cache_dir)
    notes.append(f"dispersion alpha={alpha!r}: {'reused' if reused else 'wrote'} {path}")
    return table, path


def _pekar(stages, cfg):
    return stages("pekar", minimize_pekar, cfg.r_max, cfg.nodes, 3.0, cfg.pekar_tol)


def _run_dispersion(cfg, stages, warnings, notes):
    _coupling_warnings(warnings, cfg.alpha, cfg.cutoff)
    table, path = _table(stages, cfg, cfg.alpha, notes)
    diag = dispersion_diagnostics(table)
    results = {"cache_file": path.name, "residual": table.residual, "diagnostics": diag}
    return results, {"table": table, "path": path}


def _run_pekar(cfg, stages, warnings, notes):
    res = _pekar(stages, cfg)
    results = {
        "E": res.energy,
        "T": res.kinetic,
        "V": res.potential,
        "mu": res.mu,
        "residual": res.residual,
        "virial_defect": res.virial_defect,
        "iterations": res.iterations,
    }
    return results, {"pekar": res}


def _scan_lambdas(cfg, lam_s):
    return en.default_lambdas(lam_s, cfg.scan_points, cfg.lambda_span)


def _run_energy(cfg, stages, warnings, notes):
    if cfg.alpha <= 0:
        raise ValidationError("alpha", "energy needs alpha > 0")
    _coupling_warnings(warnings, cfg.alpha, cfg.cutoff)
    table, _ = _table(stages, cfg, cfg.alpha, notes)
    pk = _pekar(stages, cfg)
    lam_s = en.lambda_star(cfg.alpha, table)
    for lam in (cfg.lambda_span[0] * lam_s, cfg.lambda_span[1] * lam_s):
        _grid_warnings(warnings, cfg, lam)
    scan = stages(
        "scan",
        en.lambda_scan,
        pk.profile,
        table,
        cfg.alpha,
        _scan_lambdas(cfg, lam_s),
        cfg.grid,
        cfg.box,
        cfg.box_factor,
    )
    best = scan.best
    results = {
        "two_m": scan.two_m,
        "lambda_star": lam_s,
        "best": best.record(),
        "slope": (best.total - scan.two_m) / cfg.alpha**2,
        "reference_slope": table.mass * pk.energy / dispersion_diagnostics(table)["g1_slope_at_0"] ** 2,
        "records": en.scan_records(scan),
    }
    return results, {"scan": scan}


def _run_sweep(cfg, stages, warnings, notes):
    pk = _pekar(stages, cfg)
    tables = {}
    for a in cfg.alphas:
        _coupling_warnings(warnings, a, cfg.cutoff)
        tables[a] = _table(stages, cfg, a, notes)[0]
        if a > 0:
            lam_s = en.lambda_star(a, tables[a])
            for lam in (cfg.lambda_span[0] * lam_s, cfg.lambda_span[1] * lam_s):
                _grid_warnings(warnings, cfg, lam)

    rows = stages(
        "scan",
        en.alpha_sweep,
        cfg.alphas,
        tables.__getitem__,
        pk,
        cfg.grid,
        cfg.box,
        cfg.box_factor,
        cfg.lambda_span,
        cfg.scan_points,
    )
    return {"rows": [asdict(r) for r in rows]}, {"rows": rows}


def structure_suite(seed, trials, dims=(4, 64)):
    """Randomized projector-algebra checks; returns worst-case errors."""
    rng = np.random.default_rng(seed)
    worst = {"reconstruct": 0.0, "log_exp": 0.0, "log_exp_forced": 0.0, "eqq": 0.0, "p0_trace_integer": 0.0}
    classify_ok = True
    spectrum_ok = True
    for _ in range(trials):
        n = 2 * int(rng.integers(dims[0] // 2, dims[1] // 2 + 1))
        P1, P2 = pj.random_pair(n, rng)
        Q = P2 - P1
        worst["reconstruct"] = max(worst["reconstruct"], float(np.abs(pj.reconstruct(pj.decompose_difference(P2, P1)) - Q).max()))
        worst["log_exp"] = max(worst["log_exp"], float(np.abs(pj.exp_chart(P1, pj.canonical_log(P1, P2)) - P2).max()))
        F1, F2 = pj.forced_pair(n, rng)
        worst["log_exp_forced"] = max(
            worst["log_exp_forced"], float(np.abs(pj.exp_chart(F1, pj.canonical_log(F1, F2)) - F2).max())
        )
        R = np.eye(n) - P1
        worst["eqq"] = max(worst["eqq"], float(np.abs(Q @ Q - (R @ Q @ R - P1 @ Q @ P1)).max()))
        tr = pj.p0_trace(Q, P1)
        worst["p0_trace_integer"] = max(worst["p0_trace_integer"], abs(tr - round(tr)))
        nh = n // 2
        k = int(rng.integers(0, nh // 2 + 1))
        e = int(rng.integers(0, nh - 2 * k + 1))
        thetas = tuple(rng.uniform(0.1, 1.4, size=k))
        P, P0, C = pj.c_symmetric_instance(nh, thetas, e, rng)
        spectrum_ok &= pj.c_symmetric_spectrum_check(P - P0, C)["ok"]
        expected = "E1" if e % 2 == 0 else "E_minus_1"
        a = pj.c_symmetric_tangent(P, C, rng, scale=float(rng.uniform(0.2, 1.5)))
        for t in np.linspace(0.0, 1.0, 5):
            classify_ok &= pj.component_classify(pj.exp_chart(P, t * a), P0, C)["component"] == expected
    return {"worst": worst, "spectrum_ok": bool(spectrum_ok), "classify_ok": bool(classify_ok), "trials": trials}


def _run_structure(cfg, stages, warnings, notes):
    res = stages("structure", structure_suite, cfg.seed, cfg.trials)
    return res, {}


_RUNNERS = {
    "dispersion": _run_dispersion,
    "pekar": _run_pekar,
    "energy": _run_energy,
    "sweep": _run_sweep,
    "structure-check": _run_structure,
}


def run(cfg):
    """Execute the pipeline for ``cfg``; returns ``(RunReport, artefacts)``."""
    stages = _Stages()
    warnings, notes = [], []
    results, artefacts = _RUNNERS[cfg.command](cfg, stages, warnings, notes)
    report = RunReport(cfg.echo(), results, warnings, stages.timings, notes)
    if cfg.out:
        stages("write", write_output, cfg, report, artefacts)
    return report, artefacts


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _csv(header, rows):
    def fmt(v):
        return "" if v is None else repr(float(v))

    return ",".join(header) + "\n" + "".join(",".join(fmt(v) for v in r) + "\n" for r in rows)


def write_output(cfg, report, artefacts):
    fmt = cfg.output_format
    out = Path(cfg.out)
    cmd = cfg.command
    if cmd == "dispersion":
        if fmt == "csv":
            _atomic_write(out, Path(artefacts["path"]).read_text(encoding="utf-8"))
        else:
            t = artefacts["table"]
            _atomic_write(out, _dumps({"alpha": t.alpha, "cutoff": t.cutoff, "residual": t.residual,
                                       "p": t.p.tolist(), "g0": t.g0.tolist(), "g1": t.g1.tolist()}))
    elif cmd == "pekar":
        res = artefacts["pekar"]
        if fmt == "csv":
            save_profile(res, out)
        else:
            body = dict(report.results, r=res.profile.radii.tolist(), phi=res.profile.values.tolist())
            _atomic_write(out, _dumps(body))
    elif cmd == "energy":
        recs = report.results["records"]
        if fmt == "json":
            _atomic_write(out, _dumps(recs))
        else:
            keys = ["alpha", "lambda", "kinetic", "exchange_hartree", "exchange_overlap", "total"]
            _atomic_write(out, _csv(keys, [[r[k] for k in keys] for r in recs]))
    elif cmd == "sweep":
        rows = artefacts["rows"]
        if fmt == "csv":
            _atomic_write(out, en.sweep_csv(rows))
        else:
            _atomic_write(out, _dumps([asdict(r) for r in rows]))
    else:
        _atomic_write(out, _dumps(report.results))


def main(argv=None):
    try:
        cfg, args = parse_config(argv)
    except (ParseError, ValidationError) as exc:
        print(f"bdfp: error: {exc}", file=sys.stderr)
        return 2
    try:
        report, _ = run(cfg)
    except StageError as exc:
        print(f"bdfp: error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"bdfp: error: {exc}", file=sys.stderr)
        return 2
    payload = report.payload()
    if args.timings:
        payload["timings"] = report.timings
    sys.stdout.write(_dumps(payload))
    for note in report.notes:
        print(f"bdfp: {note}", file=sys.stderr)
    for w in report.warnings:
        print(f"bdfp: warning [{w['code']}]: {w['message']}", file=sys.stderr)
    print("bdfp: timings " + " ".join(f"{k}={v:.3f}s" for k, v in report.timings.items()), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
