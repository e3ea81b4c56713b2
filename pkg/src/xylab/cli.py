"""``xylab`` command line: verification suite, series estimation and the mass-ratio demo.

Exit codes: 0 success, 2 usage error, 3 failed check, 4 refused (resources).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import (estimate_cov_series, estimate_cov_series_tilted,
                         estimate_sign_cov_series, estimate_two_point_series, fit_mass, fit_window,
                         lattice_samples, main_theorem_demo, _face_pairs)
from .graphs import LatticeBox
from .sampler import McmcConfig, RejectionFailure, make_rng, sample_sourceless_counts
from .verify import FAULTS, run_suite

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_REFUSED = 0, 2, 3, 4
OUT_ENV = "XYLAB_OUT"
REJECTION_MAX_N = 1


class UsageError(Exception):
    pass


class Refused(Exception):
    pass


# option name -> (type, default); None marks a required option
OPTIONS = {
    "verify": {
        "tier": (int, 1),
        "seed": (int, 0),
        "inject_fault": (str, ""),
        "scale": (float, 0.2),
    },
    "estimate": {
        "observable": (str, None),
        "beta": (float, None),
        "n": (int, None),
        "k_max": (int, 0),
        "sampler": (str, ""),
        "sweeps": (int, 20000),
        "burnin": (int, 1000),
        "thin": (int, 1),
        "seed": (int, 0),
        "tune_sweeps": (int, 0),
    },
    "demo-main-theorem": {
        "beta": (float, 0.5),
        "n": (int, 24),
        "seed": (int, 0),
        "xy_sweeps": (int, 4000),
        "height_sweeps": (int, 20000),
        "synthetic": (list, []),
    },
}
CHOICES = {
    "tier": (1, 2, 3),
    "inject_fault": ("",) + FAULTS,
    "observable": ("two-point", "cov", "sign-cov"),
    "sampler": ("", "rejection", "mcmc", "worm", "tilted"),
}


def _parser():
    p = argparse.ArgumentParser(prog="xylab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"xylab {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    def common(sp):
        sp.add_argument("--config", help="JSON document with option values")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./xylab-out)")

    v = sub.add_parser("verify", help="run the tiered verification suite")
    common(v)
    v.add_argument("--tier", type=int, help="1 exact identities, 2 adds oracles, 3 adds statistics")
    v.add_argument("--seed", type=int)
    v.add_argument("--inject-fault", dest="inject_fault", help=f"mutation test: {', '.join(FAULTS)}")
    v.add_argument("--scale", type=float, help="fraction of the full statistical sample sizes")

    e = sub.add_parser("estimate", help="estimate a correlation series and fit its mass")
    common(e)
    e.add_argument("--observable", help="two-point, cov or sign-cov")
    e.add_argument("--beta", type=float)
    e.add_argument("--n", type=int, help="box radius")
    e.add_argument("--k-max", dest="k_max", type=int, help="largest distance (default ceil(n/2))")
    e.add_argument("--sampler", help="rejection, mcmc, worm or tilted")
    e.add_argument("--sweeps", type=int, help="sweeps (samples for the rejection sampler)")
    e.add_argument("--burnin", type=int)
    e.add_argument("--thin", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--tune-sweeps", dest="tune_sweeps", type=int,
                   help="tuning sweeps for the biased samplers (default sweeps/4)")

    d = sub.add_parser("demo-main-theorem", help="fit both masses and report their ratio")
    common(d)
    d.add_argument("--beta", type=float)
    d.add_argument("--n", type=int)
    d.add_argument("--seed", type=int)
    d.add_argument("--xy-sweeps", dest="xy_sweeps", type=int)
    d.add_argument("--height-sweeps", dest="height_sweeps", type=int)
    d.add_argument("--synthetic", nargs="*", type=float, metavar="RATE",
                   help="exact exponential series; optional rates for XY and height (0.5 1.0)")
    return p


def resolve_config(command, args):
    """Defaults, then the JSON config file, then explicit flags; validated."""
    spec = OPTIONS[command]
    cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config must be a JSON object")
        for key, val in loaded.items():
            name = key.replace("-", "_")
            if name == "out":
                cfg["out"] = val
                continue
            if name not in spec:
                raise UsageError(f"unknown option {key!r} for {command}")
            cfg[name] = val
    for name in spec:
        val = getattr(args, name, None)
        if val is not None:
            cfg[name] = val
    out = {}
    for name, (typ, default) in spec.items():
        if name not in cfg:
            if default is None:
                raise UsageError(f"missing required option --{name.replace('_', '-')}")
            out[name] = default
            continue
        try:
            out[name] = [float(v) for v in cfg[name]] if typ is list else typ(cfg[name])
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {name}: {cfg[name]!r}") from exc
        if name in CHOICES and out[name] not in CHOICES[name]:
            raise UsageError(f"{name} must be one of {[c for c in CHOICES[name] if c != '']}")
    out["out"] = args.out or cfg.get("out") or os.environ.get(OUT_ENV) or "xylab-out"
    return out


# ---------------------------------------------------------------------------
# outputs


def _write(outdir, name, text, digests):
    path = Path(outdir) / name
    data = text.encode("utf-8")
    path.write_bytes(data)
    digests[name] = hashlib.sha256(data).hexdigest()


def _manifest(outdir, command, config, started, digests, checks=None, status=EXIT_OK, notes=()):
    doc = {
        "command": command,
        "config": config,
        "version": __version__,
        "started_unix": started,
        "wall_clock_s": round(time.time() - started, 3),
        "checks": checks or [],
        "outputs": digests,
        "exit_code": status,
        "notes": list(notes),
    }
    path = Path(outdir) / f"{command}-manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _fit_record(series, window, n, beta, seed):
    try:
        fit = fit_mass(series, window)
    except ValueError as exc:
        return {"mass": None, "ci_lo": None, "ci_hi": None, "window": list(window), "n": n,
                "beta": beta, "seed": seed, "refused": str(exc)}
    rec = json.loads(fit.to_json())
    rec.update(n=n, beta=beta, seed=seed)
    return rec


# ---------------------------------------------------------------------------
# commands


def cmd_verify(config):
    started = time.time()
    outdir = Path(config["out"])
    outdir.mkdir(parents=True, exist_ok=True)

    def progress(name, recs):
        for r in recs:
            flag = "PASS" if r.passed else "FAIL"
            print(f"{flag}  {r.check} [{r.instance}] lhs={r.lhs:.6g} rhs={r.rhs:.6g} slack={r.slack:.3g}")

    records = run_suite(config["tier"], seed=config["seed"], fault=config["inject_fault"] or None,
                        scale=config["scale"], progress=progress)
    rows = [r.to_dict() for r in records]
    for row in rows:
        for key in ("lhs", "rhs", "slack"):
            row[key] = float(row[key])
        row["pass"] = bool(row["pass"])
    failed = [r for r in rows if not r["pass"]]
    digests = {}
    _write(outdir, "verify-report.json", json.dumps(rows, indent=2) + "\n", digests)
    status = EXIT_CHECK if failed else EXIT_OK
    _manifest(outdir, "verify", config, started, digests,
              checks=[{"check": r["check"], "instance": r["instance"], "pass": r["pass"]} for r in rows],
              status=status)
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    for r in failed:
        print(f"failed identity: {r['check']} ({r['instance']})", file=sys.stderr)
    return status


def _default_sampler(observable):
    return "worm" if observable == "two-point" else "mcmc"


def _rejection_currents(L, beta, samples, rng):
    T = np.full(L.n_vertices, beta / 2)
    try:
        counts, _ = sample_sourceless_counts(L, T, rng, samples, max_attempts=2000 * samples)
    except RejectionFailure as exc:
        raise Refused(f"{exc}") from exc
    return counts


def cmd_estimate(config):
    started = time.time()
    obs, beta, n = config["observable"], config["beta"], config["n"]
    if beta < 0 or n < 1:
        raise UsageError("need beta >= 0 and n >= 1")
    sampler = config["sampler"] or _default_sampler(obs)
    if obs == "two-point" and sampler != "worm":
        raise UsageError("the two-point series needs --sampler worm")
    if obs != "two-point" and sampler == "worm":
        raise UsageError("the worm samples the two-point function only; use mcmc, rejection or tilted")
    k_max = config["k_max"] or math.ceil(n / 2)
    if k_max > n:
        raise UsageError("k_max must be at most n")
    notes = []
    if n < 8:
        warnings.warn("box too small: the fit window is degenerate", RuntimeWarning, stacklevel=2)
        notes.append("fit window degenerate for n < 8")
    sweeps, burnin = config["sweeps"], config["burnin"]
    if sampler != "rejection" and burnin >= sweeps:
        raise UsageError("burnin must be smaller than sweeps")
    if sampler == "rejection" and n > REJECTION_MAX_N:
        raise Refused(f"the rejection sampler is limited to boxes with n <= {REJECTION_MAX_N} "
                      "(its acceptance rate decays exponentially in the box size); "
                      "use --sampler mcmc")
    L = LatticeBox(n)
    seed = config["seed"]
    rng = make_rng(seed, 1)
    if sampler == "rejection":
        burnin = 0
    cfg = McmcConfig(sweeps=sweeps, burnin=burnin, thin=config["thin"], seed=seed)
    tune = config["tune_sweeps"] or max(1, sweeps // 4)
    series = {}
    if obs == "two-point":
        series["two-point"] = estimate_two_point_series(L, beta, k_max, cfg, rng, tune_rounds=4,
                                                        tune_sweeps=max(1, tune // 10))
    elif sampler == "tilted":
        cov, sig = estimate_cov_series_tilted(L, beta, k_max, sweeps, rng, tune_sweeps=tune)
        series["cov" if obs == "cov" else "sign-cov"] = cov if obs == "cov" else sig
    else:
        samples = None
        if sampler == "rejection" and beta > 0:
            pairs = _face_pairs(L, (0, 0), k_max)
            if obs == "sign-cov":
                pairs = pairs[1:]
            currents = _rejection_currents(L, beta, sweeps, rng)
            samples = lattice_samples(L, beta, pairs, cfg, rng, cycles=obs == "cov",
                                      fk=obs == "sign-cov", currents=currents)
        if obs == "cov":
            a, b, _ = estimate_cov_series(L, beta, k_max, cfg, rng=rng, samples=samples)
            series["cov"], series["cov-surround"] = a, b
        else:
            a, b, _ = estimate_sign_cov_series(L, beta, k_max, cfg, rng=rng, samples=samples)
            series["sign-cov"], series["sign-cov-fk"] = a, b
    outdir = Path(config["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    digests = {}
    window = fit_window(n)
    for name, s in series.items():
        _write(outdir, f"{name}.csv", s.to_csv(), digests)
        rec = _fit_record(s, window, n, beta, seed)
        if rec["mass"] is None:
            notes.append(f"{name}: mass fit refused: {rec['refused']}")
        _write(outdir, f"{name}-fit.json", json.dumps(rec, indent=2, sort_keys=True) + "\n", digests)
    _manifest(outdir, "estimate", config, started, digests, notes=notes)
    for name in digests:
        print(outdir / name)
    return EXIT_OK


def cmd_demo(config):
    started = time.time()
    syn = config["synthetic"]
    synthetic = None
    if "synthetic" in config.get("_given", ()) or syn:
        synthetic = tuple(syn) if syn else (0.5, 1.0)
        if len(synthetic) != 2:
            raise UsageError("--synthetic takes two rates (XY, height) or none")
    report = main_theorem_demo(beta=config["beta"], n=config["n"], seed=config["seed"],
                               xy_sweeps=config["xy_sweeps"], height_sweeps=config["height_sweeps"],
                               synthetic=synthetic)
    outdir = Path(config["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    digests = {}
    _write(outdir, "demo-report.json", report.to_json() + "\n", digests)
    for name, s in (("two-point", report.xy), ("cov", report.cov), ("sign-cov", report.sigcov)):
        if s is not None:
            _write(outdir, f"demo-{name}.csv", s.to_csv(), digests)
    _manifest(outdir, "demo-main-theorem", {k: v for k, v in config.items() if k != "_given"},
              started, digests, notes=report.notes)
    if report.complete:
        lo, hi = report.ratio_ci
        print(f"m_Height / m_XY = {report.ratio:.4f}  (95% CI {lo:.4f} .. {hi:.4f})")
    else:
        print("ratio unavailable: " + "; ".join(report.notes))
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "estimate": cmd_estimate, "demo-main-theorem": cmd_demo}


def main(argv=None):
    parser = _parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("xylab: error: a command is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = resolve_config(args.command, args)
        if args.command == "demo-main-theorem" and args.synthetic is not None:
            config["_given"] = ("synthetic",)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](config)
    except (UsageError, ValueError) as exc:
        print(f"xylab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Refused as exc:
        print(f"xylab: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
