"""Command line entry point.

``ermconc SUBCOMMAND [--config PATH] [--seed U64] [--out DIR] [--workers N]
[--format csv|json]``.  Exit status: 0 when no flags were raised, 2 when a
check raised a flag and 1 on errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile

import numpy as np

from . import acceptance
from .core import Dataset, Penalty
from .errors import ErmConcError, ConfigurationError
from .expfam import BaseMeasure, POISSON, fit_density_mle, fit_expfam_regression, taylor_ratio, two_point_family
from .gaussian import DEFAULT_T_GRID, NormalSequenceSpec, lipschitz_check, tail_report
from .io import MANIFEST_NAME, Artifact, Manifest, csv_table, dumps_json, load_config, load_manifest
from .margin import Complexity, MarginFunction, delta_bound, phi_and_r0
from .riskcurve import CurveSampling, SGrid, argmin_curve, mean_E_curve
from .scenarios import SCENARIO_IDS, ScenarioSpec, run_linearized_ls, run_projection_case
from .sets import Ball, Box

EXIT_OK, EXIT_ERROR, EXIT_FLAG = 0, 1, 2

SUBCOMMANDS = ("direct", "curve", "margin", "expfam", "scenario", "report", "accept")


class RunContext:
    def __init__(self, out, seed, workers, fmt):
        self.out = out
        self.seed = seed
        self.workers = workers
        self.fmt = fmt
        self.artifacts = []
        self.flags = []

    def add(self, art: Artifact):
        self.artifacts.append(art)

    def table(self, base, header, rows, scenario):
        if self.fmt == "json":
            data = [dict(zip(header, r)) for r in rows]
            self.add(Artifact(base + ".json", dumps_json(data), scenario))
        else:
            self.add(Artifact(base + ".csv", csv_table(header, rows), scenario))

    def flag(self, scenario, message):
        self.flags.append({"scenario": scenario, "message": message})


# --------------------------------------------------------------------------
# config helpers
# --------------------------------------------------------------------------

_SPEC_FIELDS = set(ScenarioSpec.__dataclass_fields__) - {"scenario", "params"}


def _section(cfg, name):
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    return sec


def _get(sec, where, key, default, kind=float):
    val = sec.get(key, default)
    try:
        if kind is float:
            return float(val)
        if kind is int:
            if isinstance(val, float) and not val.is_integer():
                raise ValueError
            return int(val)
        return val
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where}.{key}: expected {kind.__name__}, got {val!r}") from None


def _signal(sec, where, n):
    sig = sec.get("signal", "sine")
    if sig == "sine":
        return np.sin(2.0 * np.pi * np.arange(1, n + 1) / n)
    if sig == "zero":
        return np.zeros(n)
    arr = np.asarray(sig, dtype=float)
    if arr.shape != (n,):
        raise ConfigurationError(f"{where}.signal: expected 'sine', 'zero' or {n} numbers")
    return arr


def _penalty(sec, where, n):
    kind = sec.get("penalty", "ridge")
    lam = _get(sec, where, "lam", 0.1)
    if kind == "zero":
        return Penalty.zero()
    if kind == "ridge":
        return Penalty.ridge_n(lam, n)
    if kind == "box":
        b = _get(sec, where, "box", 0.5)
        return Penalty.indicator(Box(np.full(n, -b), np.full(n, b)))
    if kind == "power":
        q = _get(sec, where, "q", 1.5)
        return Penalty.power(math.sqrt(lam), q, np.full(n, 1.0 / math.sqrt(n)))
    raise ConfigurationError(f"{where}.penalty: unknown kind {kind!r}")


def _scenario_spec(entry, k, seed):
    where = f"scenario[{k}]"
    if not isinstance(entry, dict):
        raise ConfigurationError(f"{where}: must be a table")
    sid = entry.get("id", entry.get("scenario"))
    if sid not in SCENARIO_IDS:
        raise ConfigurationError(f"{where}.id: expected one of {', '.join(SCENARIO_IDS)}, got {sid!r}")
    kwargs, params = {}, {}
    for key, val in entry.items():
        if key in ("id", "scenario"):
            continue
        if key in _SPEC_FIELDS:
            kwargs[key] = tuple(val) if isinstance(val, list) else val
        else:
            params[key] = val
    kwargs.setdefault("seed", seed)
    try:
        return ScenarioSpec(sid, params=params, **kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _direct_artifacts(ctx, sec, where, scenario, seed, prefix):
    n = _get(sec, where, "n", 200, int)
    spec = NormalSequenceSpec(n, _get(sec, where, "sigma", 1.0), _signal(sec, where, n),
                              _penalty(sec, where, n), _get(sec, where, "replicates", 100_000, int), seed,
                              sec.get("reference", "g0"))
    t_grid = sec.get("t_grid", list(DEFAULT_T_GRID))
    rep = tail_report(spec, t_grid)
    if ctx.fmt == "json":
        ctx.add(Artifact(prefix + ".json", rep.to_json() + "\n", scenario))
    else:
        ctx.add(Artifact(prefix + ".csv", rep.to_csv(), scenario))
    summary = {"m0": rep.m0, "m0_se": rep.m0_se, "replicates": rep.replicates,
               "quarantined": rep.quarantined, "flagged_t": [r.t for r in rep.flagged]}
    pairs = _get(sec, where, "lipschitz_pairs", 0, int)
    if pairs > 0:
        mx, _, bad = lipschitz_check(spec, pairs)
        summary["lipschitz_max"] = mx
        if mx > 1.0 + 1e-6:
            ctx.flag(scenario, f"Lipschitz ratio {mx!r} exceeds 1")
    for r in rep.flagged:
        ctx.flag(scenario, f"tail frequency above bound at t={r.t!r}")
    ctx.add(Artifact(prefix + ".summary.json", dumps_json(summary), scenario))


def cmd_direct(ctx, cfg):
    _direct_artifacts(ctx, _section(cfg, "direct"), "direct", "normal-sequence", ctx.seed, "direct")


def cmd_curve(ctx, cfg):
    sec = _section(cfg, "curve")
    w = "curve"
    d = _get(sec, w, "dim", 5, int)
    n = _get(sec, w, "n", 50, int)
    radius = _get(sec, w, "radius", 0.5)
    theta0 = np.asarray(sec.get("theta0", np.zeros(d)), dtype=float)
    if theta0.shape != (d,):
        raise ConfigurationError(f"{w}.theta0: expected {d} numbers")
    fam = acceptance.gaussian_location_family(theta0, Ball(radius, center=np.zeros(d)) if radius > 0 else None)
    lam = _get(sec, w, "lam", 0.0)
    pen = Penalty.squared(lam) if lam > 0 else Penalty.zero()
    reps = _get(sec, w, "replicates", 200, int)
    sampling = CurveSampling(lambda rng, m: theta0 + rng.standard_normal((m, d)), n, reps, ctx.seed)
    grid = SGrid(_get(sec, w, "grid_start", 0.01), _get(sec, w, "grid_end", 1.0), "uniform",
                 step=_get(sec, w, "grid_step", 0.01))
    curve = mean_E_curve(fam, pen, sampling, grid)
    ctx.add(Artifact("curve.csv", curve.to_csv(), "gaussian-location"))
    ctx.add(Artifact("curve.sidecar.json", curve.sidecar_json() + "\n", "gaussian-location"))
    am = argmin_curve(curve)
    ctx.add(Artifact("curve.summary.json", dumps_json({"s0": am.s, "ties": am.ties,
                                                       "monotone_violations": curve.monotone_violations()}),
                     "gaussian-location"))
    if curve.monotone_violations():
        ctx.flag("gaussian-location", "mean curve is not monotone")


def cmd_margin(ctx, cfg):
    sec = _section(cfg, "margin")
    w = "margin"
    A, p = _get(sec, w, "A", 1.0), _get(sec, w, "p", 1.0)
    n = _get(sec, w, "n", 100, int)
    K, C = _get(sec, w, "K", 1.0), _get(sec, w, "C", 1.0)
    m_n = _get(sec, w, "m_n", math.sqrt(n))
    _, r0, _ = phi_and_r0(Complexity.power(A, p), m_n, K, C)
    G = MarginFunction.quadratic(_get(sec, w, "c", 1.0 / math.sqrt(2.0)))
    tau_max, s0 = _get(sec, w, "tau_max", 1.0), _get(sec, w, "s0", 0.1)
    rows = [(float(t), delta_bound(float(t), n, tau_max, s0, r0, G, C, K)) for t in sec.get("t", [1, 2, 3, 4])]
    ctx.table("margin", ["t", "delta"], rows, "margin")
    ctx.add(Artifact("margin.summary.json", dumps_json({"r0": r0, "r0_sq": r0**2, "n": n}), "margin"))


def cmd_expfam(ctx, cfg):
    sec = _section(cfg, "expfam")
    fam = sec.get("family", "two-point")
    t_grid = sec.get("t_grid", [1e-1, 10**-1.5, 1e-2, 10**-2.5, 1e-3, 10**-3.5, 1e-4])
    if fam == "two-point":
        tab = taylor_ratio(two_point_family(), np.array([1.0]), t_grid)
    elif fam == "uniform-quadratic":
        base = BaseMeasure.interval(lambda x: np.ones_like(x), 0.0, 1.0, nodes=32, normalize=True)
        tab = taylor_ratio(base, lambda x: x**2 - 1.0 / 3.0, t_grid)
    else:
        raise ConfigurationError(f"expfam.family: unknown family {fam!r}")
    ctx.table("taylor", ["t", "ratio", "kappa"], list(zip(tab.t, tab.ratio, tab.kappa)), "expfam-density")
    stable = tab.stable()
    ctx.add(Artifact("taylor.summary.json", dumps_json({"family": fam, "stable": stable, "Pg2": tab.Pg2}),
                     "expfam-density"))
    if not stable:
        ctx.flag("expfam-density", "Taylor remainder is not stable across t")


def _run_projection(ctx, spec, tag):
    res = run_projection_case(spec, ctx.workers)
    rows = [(r.n, r.K, r.lam, r.tau_min, r.s0, r.s0_se, float(np.median(r.s_hat)), float(np.median(r.tau_hat)),
             r.median_deviation, r.boundary_fraction, r.lemma_gap) for r in res.per_n]
    ctx.table(f"{tag}/per-n", ["n", "K", "lam", "tau_min", "s0", "s0_se", "median_s_hat", "median_tau_hat",
                               "median_deviation", "boundary_fraction", "lemma_gap"], rows, spec.scenario)
    for r in res.per_n:
        ctx.add(Artifact(f"{tag}/curve-n{r.n}.csv", r.curve.to_csv(), spec.scenario))
    summary = res.to_dict()
    ctx.add(Artifact(f"{tag}/summary.json", dumps_json(summary), spec.scenario))
    for r in res.per_n:
        if r.lemma_gap > 1e-6:
            ctx.flag(spec.scenario, f"tau(f_hat) and s_hat differ by {r.lemma_gap!r} at n={r.n}")
    if res.rate is not None and res.rate.relative_error > 0.15:
        ctx.flag(spec.scenario, f"fitted slope {res.rate.fit.slope!r} is more than 15% from "
                                f"{res.rate.target_slope!r}")


def _run_linearized(ctx, spec, tag):
    res = run_linearized_ls(spec)
    ctx.table(f"{tag}/tau", ["n", "median_tau_hat"], list(zip(res.n_values, res.tau_hat_median)), spec.scenario)
    ctx.add(Artifact(f"{tag}/summary.json", dumps_json(res.to_dict()), spec.scenario))
    if res.envelope_check is False:
        ctx.flag(spec.scenario, "certified envelope constants fail on simulated draws")
    if not res.holder_ok:
        ctx.flag(spec.scenario, "l1-ball bound violated")


def _run_expfam_density(ctx, spec, tag):
    fam = two_point_family(spec.params.get("bound", 2.0))
    a0 = float(spec.params.get("theta0", 0.5))
    rows, worst = [], 0.0
    for n in spec.n_list:
        rng = np.random.Generator(np.random.PCG64([spec.seed, n]))
        x = np.where(rng.random(n) < 1.0 / (1.0 + math.exp(-2.0 * a0)), 1.0, -1.0)
        res = fit_density_mle(fam, Dataset(x, "scalar"), Penalty.zero())
        a_hat = float(res.minimizer[0])
        closed = float(np.clip(np.arctanh(np.clip(x.mean(), -1 + 1e-15, 1 - 1e-15)), -2.0, 2.0))
        worst = max(worst, abs(a_hat - closed))
        rows.append((n, a_hat, closed, abs(a_hat - a0)))
    ctx.table(f"{tag}/mle", ["n", "theta_hat", "closed_form", "abs_error"], rows, spec.scenario)
    ctx.add(Artifact(f"{tag}/summary.json", dumps_json({"theta0": a0, "max_closed_form_gap": worst}),
                     spec.scenario))
    if worst > 1e-5:
        ctx.flag(spec.scenario, f"MLE differs from the closed form by {worst!r}")


def _run_expfam_regression(ctx, spec, tag):
    degree = int(spec.params.get("degree", 3))
    beta0 = np.asarray(spec.params.get("beta0", [0.5, -1.0, 0.8, 0.0][: degree + 1]), dtype=float)
    if beta0.size != degree + 1:
        raise ConfigurationError(f"{tag}.beta0: expected {degree + 1} numbers")
    rows, clipped = [], False
    for n in spec.n_list:
        rng = np.random.Generator(np.random.PCG64([spec.seed, n]))
        x = np.sort(rng.random(n))
        M = np.vander(x, degree + 1, increasing=True)
        Y = rng.poisson(np.exp(M @ beta0)).astype(float)
        res = fit_expfam_regression(x, Y, POISSON, design=M)
        clipped |= res.info["xi_clipped"]
        rows.append((n, float(np.linalg.norm(res.minimizer - beta0)), float(res.residual)))
    ctx.table(f"{tag}/fit", ["n", "coef_error", "residual"], rows, spec.scenario)
    ctx.add(Artifact(f"{tag}/summary.json", dumps_json({"beta0": beta0, "clipped": clipped}), spec.scenario))
    if clipped:
        ctx.flag(spec.scenario, "linear predictor left the natural parameter domain")


def cmd_scenario(ctx, cfg):
    entries = cfg.get("scenario", [])
    if not isinstance(entries, list):
        raise ConfigurationError("scenario: expected an array of tables ([[scenario]])")
    specs = [_scenario_spec(e, k, ctx.seed) for k, e in enumerate(entries)]
    for k, spec in enumerate(specs):
        tag = f"{k:02d}-{spec.scenario}"
        if spec.scenario.startswith("projection-case"):
            _run_projection(ctx, spec, tag)
        elif spec.scenario == "linearized-ls":
            _run_linearized(ctx, spec, tag)
        elif spec.scenario == "normal-sequence":
            _direct_artifacts(ctx, spec.params, f"scenario[{k}]", spec.scenario, spec.seed, f"{tag}/direct")
        elif spec.scenario == "expfam-density":
            _run_expfam_density(ctx, spec, tag)
        else:
            _run_expfam_regression(ctx, spec, tag)


def _accept_into(ctx, progress=None):
    results = acceptance.run_all(ctx.seed, ctx.workers, progress=progress)
    for res in results:
        for art in res.artifacts:
            ctx.add(art)
        ctx.add(res.summary_artifact())
    return results


def cmd_accept(ctx, cfg, rerun=True):
    def show(res):
        print(res.line(), flush=True)

    results = _accept_into(ctx, show)
    lines = [r.line() for r in results]
    passed = [r.passed for r in results]
    if rerun:
        # criterion 11: a complete second run must reproduce every file hash
        with tempfile.TemporaryDirectory() as tmp:
            other = RunContext(tmp, ctx.seed, 1, ctx.fmt)
            _accept_into(other)
        mine = {a.name: a.text for a in ctx.artifacts}
        theirs = {a.name: a.text for a in other.artifacts}
        same = mine.keys() == theirs.keys() and all(mine[k] == theirs[k] for k in mine)
        r11 = acceptance.CriterionResult(11, "byte-identical rerun", same, {"files": len(mine)})
        print(r11.line(), flush=True)
        ctx.add(r11.summary_artifact())
        lines.append(r11.line())
        passed.append(same)
        results.append(r11)
    ctx.add(Artifact("acceptance.txt", "\n".join(lines) + "\n", "acceptance"))
    for r, ok in zip(lines, passed):
        if not ok:
            ctx.flag("acceptance", r)
    return results


# --------------------------------------------------------------------------
# output handling and report
# --------------------------------------------------------------------------


def _prepare_out(out):
    os.makedirs(out, exist_ok=True)
    mpath = os.path.join(out, MANIFEST_NAME)
    known = set()
    if os.path.exists(mpath):
        known = {e["file"] for e in load_manifest(mpath)["entries"]}
    stray = []
    for root, _, files in os.walk(out):
        for f in files:
            rel = os.path.relpath(os.path.join(root, f), out).replace(os.sep, "/")
            if rel != MANIFEST_NAME and rel not in known:
                stray.append(rel)
    if stray:
        raise ConfigurationError(f"output directory {out} holds files not produced by a previous run: "
                                 f"{', '.join(sorted(stray)[:5])}")
    for rel in known:
        path = os.path.join(out, rel)
        if os.path.exists(path):
            os.remove(path)
    for root, dirs, _ in os.walk(out, topdown=False):
        for d in dirs:
            p = os.path.join(root, d)
            if not os.listdir(p):
                os.rmdir(p)


def _finish(ctx):
    manifest = Manifest(ctx.seed, flags=ctx.flags)
    for art in ctx.artifacts:
        manifest.write_artifact(ctx.out, art)
    manifest.write(ctx.out)
    return EXIT_FLAG if ctx.flags else EXIT_OK


def _flagged_rows(text):
    lines = text.strip().splitlines()
    if not lines:
        return []
    header = lines[0].split(",")
    if "flagged" not in header or "t" not in header:
        return []
    ti, fi = header.index("t"), header.index("flagged")
    return [ln.split(",")[ti] for ln in lines[1:] if ln.split(",")[fi] == "1"]


def cmd_report(path):
    import hashlib
    import json

    data = load_manifest(path)
    entries = data["entries"]
    if not entries:
        print("no runs")
        return EXIT_OK
    base = os.path.dirname(os.path.abspath(path))
    flagged = False
    scenarios = {}
    for e in entries:
        fpath = os.path.join(base, e["file"])
        if not os.path.exists(fpath):
            print(f"error: missing file {e['file']}", file=sys.stderr)
            return EXIT_ERROR
        with open(fpath, "rb") as fh:
            raw = fh.read()
        if hashlib.sha256(raw).hexdigest() != e["sha256"]:
            print(f"error: hash mismatch for {e['file']}", file=sys.stderr)
            return EXIT_ERROR
        scenarios.setdefault(e["scenario"], []).append((e, raw.decode("utf-8")))
    for scen in sorted(scenarios):
        notes = []
        status = "PASS"
        for e, text in scenarios[scen]:
            name = e["file"]
            bad_t = _flagged_rows(text) if name.endswith(".csv") else []
            if bad_t:
                status = "FLAG"
                notes.append(f"{name}: FLAG at t={', '.join(bad_t)}")
            if name.endswith(".json") and (name.startswith("criterion") or name.endswith("summary.json")):
                obj = json.loads(text)
                if "criterion" in obj:
                    notes.append(f"criterion {obj['criterion']} {'PASS' if obj['passed'] else 'FAIL'}: "
                                 f"{obj['title']}")
                    if not obj["passed"]:
                        status = "FLAG"
                else:
                    keys = ("m0", "s0", "lipschitz_max", "r0", "stable", "c_F", "C_F", "max_closed_form_gap")
                    nums = {k: obj[k] for k in keys if k in obj}
                    if obj.get("rate"):
                        nums["slope"] = obj["rate"]["fit"]["slope"]
                        nums["target_slope"] = obj["rate"]["target_slope"]
                    if obj.get("per_n"):
                        nums["s0"] = [r["s0"] for r in obj["per_n"]]
                        nums["median_s_hat"] = [r["median_s_hat"] for r in obj["per_n"]]
                    if obj.get("flagged_t"):
                        status = "FLAG"
                        notes.append(f"{name}: FLAG at t={', '.join(map(repr, obj['flagged_t']))}")
                    if nums:
                        notes.append(f"{name}: " + ", ".join(f"{k}={v}" for k, v in nums.items()))
        for fl in data.get("flags", []):
            if fl.get("scenario") == scen:
                status = "FLAG"
                notes.append(f"flag: {fl['message']}")
        flagged |= status == "FLAG"
        print(f"[{status}] {scen}")
        for line in notes:
            print(f"    {line}")
    return EXIT_FLAG if flagged else EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="ermconc", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("manifest", nargs="?", help="manifest path (report only)")
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--seed", type=int, help="global seed (overrides the config)")
    parser.add_argument("--out", help="output directory (default: config 'out' or ./ermconc-out)")
    parser.add_argument("--workers", type=int, help="worker processes for scenario runs")
    parser.add_argument("--format", choices=("csv", "json"), help="table format")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        if args.command == "report":
            path = args.manifest or (os.path.join(args.out, MANIFEST_NAME) if args.out else None)
            if path is None:
                raise ConfigurationError("report needs a manifest path")
            return cmd_report(path)
        cfg = load_config(args.config) if args.config else {}
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigurationError(f"seed: expected an unsigned 64-bit integer, got {seed!r}")
        workers = args.workers if args.workers is not None else cfg.get("workers", 1)
        if not isinstance(workers, int) or workers < 1:
            raise ConfigurationError(f"workers: expected a positive integer, got {workers!r}")
        fmt = args.format or cfg.get("format", "csv")
        if fmt not in ("csv", "json"):
            raise ConfigurationError(f"format: expected 'csv' or 'json', got {fmt!r}")
        out = args.out or cfg.get("out", "ermconc-out")
        _prepare_out(out)
        ctx = RunContext(out, seed, workers, fmt)
        handler = {"direct": cmd_direct, "curve": cmd_curve, "margin": cmd_margin, "expfam": cmd_expfam,
                   "scenario": cmd_scenario, "accept": cmd_accept}[args.command]
        handler(ctx, cfg)
        status = _finish(ctx)
        for fl in ctx.flags:
            print(f"FLAG {fl['scenario']}: {fl['message']}")
        print(f"wrote {len(ctx.artifacts)} files to {out}")
        return status
    except ErmConcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
