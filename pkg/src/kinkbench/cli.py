"""Command-line front end: ``kinkbench {profile,minimize,sweep,threshold,classify,verify}``.

Configuration is one JSON document; flags override its fields.  Every run is
stored under a directory named by the hash of the effective configuration and
is served from there on reruns unless ``--force`` is given.

Exit codes: 0 success, 1 failure (bad config or solver failure, nothing
written), 2 completed with verification violations or failed sweep rows.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    CRITERIA,
    AnalysisError,
    classify_kinks,
    estimate_threshold,
    sweep,
)
from .energy import Grid, ProblemParams, default_grid
from .minimize import (
    SolveConfig,
    SolveError,
    energy_functional,
    minimize,
    result_from_field,
    verify_minimizer,
)
from .profiles import (
    ProfileError,
    landmarks,
    make_profile,
    spec_from_dict,
    spec_to_dict,
    thresholds,
)
from .store import (
    SCHEMA_VERSION,
    RunWriter,
    config_hash,
    dumps,
    field_csv,
    load_record,
    store_root,
)

EXIT_OK, EXIT_FAIL, EXIT_VIOLATION = 0, 1, 2
COMMANDS = ("profile", "minimize", "sweep", "threshold", "classify", "verify")
SYMMETRIES = ("free", "odd", "periodic", "periodic_odd")

DEFAULTS = {
    "profile": None,
    "epsilon": None,
    "alpha": 0.0,
    "symmetry": None,
    "solver": {"grad_tol": None, "max_iters": 500, "seeds": None},
    "grid": {"n": None, "x_max": None},
    "threshold": {"criterion": None, "bracket": None, "width": 1e-3},
    "source": None,
    "plot": False,
}


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


# -- configuration --------------------------------------------------------------


def _merge(base: dict, over: dict, path="config") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"{path}.{k}", "unknown field")
        if isinstance(base[k], dict) and v is not None:
            if not isinstance(v, dict):
                raise ConfigError(f"{path}.{k}", "expected an object")
            out[k] = _merge(base[k], v, f"{path}.{k}")
        else:
            out[k] = v
    return out


def _number_list(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _scalar_or_list(text):
    vals = _number_list(text)
    return vals[0] if len(vals) == 1 else vals


def effective_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("--config", str(exc)) from None
        if not isinstance(doc, dict):
            raise ConfigError("config", "expected a JSON object")
        cfg = _merge(cfg, doc)
    flags = {}
    try:
        if args.profile is not None:
            flags["profile"] = json.loads(args.profile)
        if args.epsilon is not None:
            flags["epsilon"] = _scalar_or_list(args.epsilon)
        if args.alpha is not None:
            flags["alpha"] = _scalar_or_list(args.alpha)
        if args.bracket is not None:
            flags.setdefault("threshold", {})["bracket"] = _number_list(args.bracket)
    except ValueError as exc:
        raise ConfigError("flags", str(exc)) from None
    if args.symmetry is not None:
        flags["symmetry"] = args.symmetry
    if args.grad_tol is not None:
        flags.setdefault("solver", {})["grad_tol"] = args.grad_tol
    if args.max_iters is not None:
        flags.setdefault("solver", {})["max_iters"] = args.max_iters
    if args.seeds is not None:
        flags.setdefault("solver", {})["seeds"] = [s for s in args.seeds.split(",") if s]
    if args.n is not None:
        flags.setdefault("grid", {})["n"] = args.n
    if args.x_max is not None:
        flags.setdefault("grid", {})["x_max"] = args.x_max
    if args.criterion is not None:
        flags.setdefault("threshold", {})["criterion"] = args.criterion
    if args.source is not None:
        flags["source"] = str(Path(args.source).resolve())
    if args.plot:
        flags["plot"] = True
    return _merge(cfg, flags)


class Run:
    """Validated, typed view of an effective configuration."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        if cfg["profile"] is None:
            raise ConfigError("config.profile", "required")
        if not isinstance(cfg["profile"], dict):
            raise ConfigError("config.profile", "expected an object with a 'kind' field")
        try:
            self.spec = spec_from_dict(cfg["profile"])
            self.prof = make_profile(self.spec)
            self.lm = landmarks(self.prof)
            self.th = thresholds(self.prof, self.lm)
        except (ProfileError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError("config.profile", str(exc)) from None
        # hash the normalized spec, not the spelling it arrived in
        cfg["profile"] = spec_to_dict(self.spec)
        sym = cfg["symmetry"] or ("periodic" if self.prof.periodic else "free")
        if sym not in SYMMETRIES:
            raise ConfigError("config.symmetry", f"must be one of {SYMMETRIES}")
        if sym.startswith("periodic") != self.prof.periodic:
            raise ConfigError("config.symmetry", f"{sym!r} does not fit a "
                              f"{'periodic' if self.prof.periodic else 'non-periodic'} profile")
        self.symmetry = sym
        s = cfg["solver"]
        try:
            self.solve_cfg = SolveConfig(
                grad_tol=None if s["grad_tol"] is None else float(s["grad_tol"]),
                max_iters=int(s["max_iters"]),
                seeds=None if s["seeds"] is None else tuple(s["seeds"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("config.solver", str(exc)) from None
        gk = {}
        for key in ("n", "x_max"):
            val = cfg["grid"][key]
            if val is None:
                continue
            try:
                gk[key] = int(val) if key == "n" else float(val)
            except (TypeError, ValueError):
                raise ConfigError(f"config.grid.{key}", "expected a number") from None
            if key == "n" and gk[key] < 16:
                raise ConfigError("config.grid.n", "needs at least 16 nodes")
            if key == "x_max" and not gk[key] > 0.0:
                raise ConfigError("config.grid.x_max", "must be positive")
        self.grid_kw = gk
        self.source = cfg["source"]
        needs_solution = command in ("minimize", "sweep", "threshold") or (
            command in ("classify", "verify") and self.source is None)
        self.eps = self._list("epsilon", required=needs_solution)
        self.alpha = self._list("alpha", required=needs_solution, allow_zero=True)
        if command in ("minimize", "threshold") or (command in ("classify", "verify")
                                                    and self.source is None):
            if len(self.eps) != 1:
                raise ConfigError("config.epsilon", "a single value is required")
            if command != "threshold" and len(self.alpha) != 1:
                raise ConfigError("config.alpha", "a single value is required")
        if command == "threshold":
            t = cfg["threshold"]
            if t["criterion"] not in CRITERIA:
                raise ConfigError("config.threshold.criterion", f"must be one of {CRITERIA}")
            b = t["bracket"]
            if not (isinstance(b, (list, tuple)) and len(b) == 2):
                raise ConfigError("config.threshold.bracket", "expected [alpha_lo, alpha_hi]")
            lo, hi = float(b[0]), float(b[1])
            if not 0.0 <= lo < hi:
                raise ConfigError("config.threshold.bracket", "needs 0 <= alpha_lo < alpha_hi")
            self.bracket = (lo, hi)
            self.width = float(t["width"])
            if not self.width > 0.0:
                raise ConfigError("config.threshold.width", "must be positive")
        if self.source is not None:
            src = Path(self.source)
            if not (src / "field.csv").exists() or not (src / "result.json").exists():
                raise ConfigError("config.source", f"{src} is not a stored minimize run")

    def _list(self, key, *, required, allow_zero=False):
        val = self.cfg[key]
        if val is None:
            if required:
                raise ConfigError(f"config.{key}", "required")
            return []
        vals = val if isinstance(val, list) else [val]
        try:
            vals = [float(v) for v in vals]
        except (TypeError, ValueError):
            raise ConfigError(f"config.{key}", "expected a number or a list of numbers") from None
        if not vals:
            raise ConfigError(f"config.{key}", "empty list")
        for v in vals:
            if not math.isfinite(v) or (v < 0.0 if allow_zero else v <= 0.0):
                raise ConfigError(f"config.{key}",
                                  f"{v!r} must be {'nonnegative' if allow_zero else 'positive'}")
        return vals

    def params(self, eps=None, alpha=None) -> ProblemParams:
        eps = self.eps[0] if eps is None else eps
        alpha = self.alpha[0] if alpha is None else alpha
        return ProblemParams(eps, alpha, self.symmetry)

    def grid(self, p: ProblemParams) -> Grid:
        return default_grid(self.prof, self.lm, p, **self.grid_kw)


# -- commands -------------------------------------------------------------------


def cmd_profile(run: Run, out: RunWriter) -> int:
    prof, lm = run.prof, run.lm
    if prof.periodic:
        x = np.linspace(-prof.period / 2, prof.period / 2, 1001)
    else:
        x = np.linspace(-1.5 * lm.xi, 1.5 * lm.xi, 1001)
    lines = ["x,mu,f"]
    lines.extend(f"{a!r},{b!r},{c!r}" for a, b, c in
                 zip(x.tolist(), prof.mu(x).tolist(), prof.f(x).tolist()))
    out.text("profile.csv", "\n".join(lines) + "\n")
    lmd = asdict(lm)
    lmd["points"] = lm.points()
    out.json("landmarks.json", lmd)
    out.json("thresholds.json", asdict(run.th))
    return EXIT_OK


def _solve(run: Run):
    p = run.params()
    g = run.grid(p)
    return minimize(g, p, run.prof, run.lm, run.solve_cfg), g, p


def _result_artifacts(out: RunWriter, r, prefix=""):
    x, u = r.full_line()
    out.json(f"{prefix}result.json", r.scalars())
    out.text(f"{prefix}field.csv", field_csv(x, u))


def cmd_minimize(run: Run, out: RunWriter) -> int:
    r, g, p = _solve(run)
    _result_artifacts(out, r)
    if not r.converged:
        return EXIT_FAIL
    rep = verify_minimizer(r, g, p, run.prof, run.lm)
    out.json("verification.json", rep.to_dict())
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def _fmt_key(v: float) -> str:
    return repr(float(v))


def cmd_sweep(run: Run, out: RunWriter, workers=None) -> int:
    table = sweep(run.spec, run.eps, run.alpha, run.symmetry, run.solve_cfg,
                  workers=workers, grid_kw=run.grid_kw or None)
    write_sweep(out, table, plot=bool(run.cfg["plot"]))
    return EXIT_VIOLATION if table.failed else EXIT_OK


def write_sweep(out: RunWriter, table, *, plot: bool):
    out.text("sweep.csv", table.to_csv())
    for (eps, alpha), r in sorted(table.results.items()):
        stem = f"eps={_fmt_key(eps)}_alpha={_fmt_key(alpha)}"
        out.json(f"runs/{stem}.json", r.scalars())
        if plot:
            x, u = r.full_line()
            out.text(f"fields/{stem}.csv", field_csv(x, u))


def cmd_threshold(run: Run, out: RunWriter) -> int:
    est = estimate_threshold(run.spec, run.eps[0], run.bracket, run.cfg["threshold"]["criterion"],
                             run.solve_cfg, width=run.width, grid_kw=run.grid_kw or None)
    out.json("threshold.json", est.to_dict())
    return EXIT_OK


def load_result(run: Run, source):
    """Rebuild a SolveResult from a stored minimize run (field on the full line)."""
    src = Path(source)
    meta = json.loads((src / "result.json").read_text())
    rows = list(csv.reader(io.StringIO((src / "field.csv").read_text())))
    if rows[0] != ["x", "u"]:
        raise ConfigError("config.source", "field.csv must have header x,u")
    x = np.array([float(a) for a, _ in rows[1:]])
    u = np.array([float(b) for _, b in rows[1:]])
    wraps = meta["symmetry"].startswith("periodic")
    g = Grid(float(x[0]), float(x[-1]), x.size, "periodic" if wraps else "dirichlet_zero")
    p = ProblemParams(meta["epsilon"], meta["alpha"], "periodic" if wraps else "free")
    fun = energy_functional(g, p, run.prof)
    gn = fun.norm(fun.gradient(fun.restrict(u)))
    r = result_from_field(u, g, p, run.prof, grad_norm=gn, iterations=meta["iterations"],
                seed=meta["winning_seed"], converged=meta["converged"], tol=meta["grad_tol"],
                energies=[])
    r.canonical = meta["canonical"]
    return r, g, p


def _sourced(run: Run, out: RunWriter):
    if run.source is not None:
        return load_result(run, run.source)
    r, g, p = _solve(run)
    _result_artifacts(out, r)
    if not r.converged:
        raise SolveError("descent did not converge", r.diagnostics)
    return r, g, p


def cmd_classify(run: Run, out: RunWriter) -> int:
    r, _, _ = _sourced(run, out)
    rep = classify_kinks(r, run.prof, run.lm)
    out.json("kinks.json", rep.to_dict())
    return EXIT_OK


def cmd_verify(run: Run, out: RunWriter) -> int:
    r, g, p = _sourced(run, out)
    if not r.converged:
        raise SolveError("stored run did not converge")
    rep = verify_minimizer(r, g, p, run.prof, run.lm)
    out.json("verification.json", rep.to_dict())
    return EXIT_OK if rep.ok else EXIT_VIOLATION


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kinkbench", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="store root (default: $KINKBENCH_STORE or ./kinkbench-store)")
        sp.add_argument("--force", action="store_true", help="recompute even if the hash is stored")
        sp.add_argument("--workers", type=int, default=None, help="processes for sweep rows")
        sp.add_argument("--print-effective-config", action="store_true")
        sp.add_argument("--profile", help='profile as JSON, e.g. \'{"kind": "donut", "chi": 0.2}\'')
        sp.add_argument("--epsilon", help="value or comma-separated list")
        sp.add_argument("--alpha", help="value or comma-separated list")
        sp.add_argument("--symmetry", choices=SYMMETRIES)
        sp.add_argument("--grad-tol", type=float)
        sp.add_argument("--max-iters", type=int)
        sp.add_argument("--seeds", help="comma-separated seed ids")
        sp.add_argument("--n", type=int, help="grid node count")
        sp.add_argument("--x-max", type=float)
        sp.add_argument("--criterion", choices=CRITERIA)
        sp.add_argument("--bracket", help="alpha_lo,alpha_hi")
        sp.add_argument("--source", help="stored minimize run directory")
        sp.add_argument("--plot", action="store_true", help="emit x,u CSV per solved run")
    return ap


def _err(msg):
    print(f"kinkbench: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        if args.print_effective_config:
            sys.stdout.write(dumps(cfg))
            return EXIT_OK
        t0 = time.perf_counter()
        run = Run(args.command, cfg)
        t_validate = time.perf_counter() - t0
    except ConfigError as exc:
        _err(f"invalid configuration: {exc}")
        return EXIT_FAIL
    if args.workers is not None and args.workers < 1:
        _err("invalid configuration: --workers must be at least 1")
        return EXIT_FAIL

    digest = config_hash({"command": args.command, "config": cfg, "schema": SCHEMA_VERSION})
    target = store_root(args.out) / digest
    if target.exists() and not args.force:
        rec = load_record(target)
        print(target)
        return int(rec["exit_code"])

    out = RunWriter()
    t1 = time.perf_counter()
    try:
        if args.command == "sweep":
            code = cmd_sweep(run, out, workers=args.workers)
        else:
            code = {
                "profile": cmd_profile,
                "minimize": cmd_minimize,
                "threshold": cmd_threshold,
                "classify": cmd_classify,
                "verify": cmd_verify,
            }[args.command](run, out)
    except (SolveError, AnalysisError, ValueError, RuntimeError) as exc:
        _err(f"{args.command} failed: {exc}")
        for d in getattr(exc, "diagnostics", []):
            _err(f"  {d}")
        return EXIT_FAIL
    if code == EXIT_FAIL:
        _err(f"{args.command} failed: descent did not converge")
        return EXIT_FAIL
    record = {
        "command": args.command,
        "config": cfg,
        "config_hash": digest,
        "exit_code": code,
        "versions": {"kinkbench": __version__, "schema": SCHEMA_VERSION,
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    timings = {"validate": t_validate, "run": time.perf_counter() - t1}
    out.commit(target, record, timings, force=args.force)
    print(target)
    return code


if __name__ == "__main__":
    sys.exit(main())
