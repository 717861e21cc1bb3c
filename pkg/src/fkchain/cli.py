"""Command-line harness: ``fk <subcommand> [options]``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure. Errors are
reported as one JSON record on stderr. CSV outputs start with a
``schema_version`` row; JSON outputs carry a ``schema_version`` key. Output is
deterministic for a given model, arguments and ``--seed``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__
from .attractor import build_portrait, depinned_classify, kam_circle_detect
from .defects import defect_relaxation_test, defected_initializer, parse_insertions
from .dynamics import (IntegratorSettings, NotConverged, average_velocity, depinning_force_dynamic,
                       integrate, synchronization_check)
from .equilibria import depinning_force_bands, pinned_set
from .errors import (BracketInvalid, InsertionsTooDense, InsufficientSpan, NewtonDiverged,
                     StepSizeUnderflow, TooFewPoints)
from .intersect import EmpiricalEnsemble, monotonicity_series
from .model import ModelError, PeriodicConfiguration, as_fraction, standard_model
from .modelfile import ModelFile, load_configurations, load_model

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("fkchain.cli")


class ConfigError(Exception):
    pass


# -- helpers -----------------------------------------------------------------

def _rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream per purpose, split from the single run seed."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *key])
    return np.random.Generator(np.random.Philox(ss))


def _stream_ids():
    return {"inits": 1, "ensemble": 2, "pairs": 3, "bands": 4}


def _model(args) -> ModelFile:
    if args.model is None:
        return ModelFile(standard_model())
    return load_model(args.model)


def _rho(args, mf: ModelFile) -> Fraction:
    if getattr(args, "rho", None) is not None:
        return as_fraction(args.rho)
    if mf.rho is not None:
        return mf.rho
    raise ConfigError("mean spacing needed: pass --rho P/Q or set p, q in the model file")


def _settings(args, **extra) -> IntegratorSettings:
    kw = {}
    for name in ("dt_max", "error_tol", "t_burn", "t_measure"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    kw.update(extra)
    return IntegratorSettings(**kw)


def _random_init(rho: Fraction, rng, amplitude=0.1, q=None) -> PeriodicConfiguration:
    q = q or rho.denominator
    p = rho * q
    j = np.arange(q)
    return PeriodicConfiguration(j * float(rho) + rng.uniform() + rng.uniform(-amplitude, amplitude, q),
                                 int(p))


def _fnum(x) -> str:
    return repr(float(x))


def _write(args, text: str):
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema_version", SCHEMA_VERSION])
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _json(doc) -> str:
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _map(args, fn, items):
    """Ordered map, threaded when ``--threads > 1`` (kernels release the GIL)."""
    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _frac(fr: Fraction) -> str:
    return str(fr)


# -- subcommands ---------------------------------------------------------------

def cmd_sweep_velocity(args):
    mf = _model(args)
    rho = _rho(args, mf)
    spec = mf.spec
    if args.f_ac is not None or args.nu0 is not None:
        spec = spec.with_forcing(F_AC=args.f_ac, nu0=args.nu0)
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    Fs = np.linspace(args.f_min, args.f_max, args.steps)
    s = _settings(args)
    c0 = PeriodicConfiguration.uniform(rho.numerator, rho.denominator)

    def cell(F):
        sp = spec.with_forcing(F_DC=float(F))
        try:
            est = average_velocity(c0, sp, s)
        except NotConverged as exc:
            est = exc.estimate
        return (_fnum(F), _fnum(est.v), _fnum(est.confidence_halfwidth), int(est.converged))

    rows = [("F_DC", "v", "halfwidth", "converged")] + _map(args, cell, Fs)
    _write(args, _csv(rows))


def cmd_depin_dynamic(args):
    mf = _model(args)
    rho = _rho(args, mf)
    Fc = depinning_force_dynamic(mf.spec.with_forcing(F_AC=0.0), rho, F_lo=args.f_lo, F_hi=args.f_hi,
                                 v_threshold=args.v_threshold, tol=args.tol, s=_settings(args))
    _write(args, _json({"rho": _frac(rho), "F_c": Fc, "method": "dynamic", "tol": args.tol}))


def cmd_depin_bands(args):
    mf = _model(args)
    rho = _rho(args, mf)
    Fc = depinning_force_bands(mf.spec.with_forcing(F_AC=0.0), rho, q_max=args.qmax, tol=args.tol,
                               F_lo=args.f_lo, F_hi=args.f_hi, seeds_per_type=args.seeds_per_type,
                               seed=args.seed)
    _write(args, _json({"rho": _frac(rho), "F_c": Fc, "method": "bands", "q_max": args.qmax,
                        "tol": args.tol}))


def cmd_depin_compare(args):
    mf = _model(args)
    rho = _rho(args, mf)
    spec = mf.spec.with_forcing(F_AC=0.0)
    out = {"rho": _frac(rho), "q_max": args.qmax, "errors": {}}

    def run(name, fn):
        try:
            out[name] = fn()
        except (BracketInvalid, NotConverged, NewtonDiverged, StepSizeUnderflow) as exc:
            out[name] = None
            out["errors"][name] = f"{type(exc).__name__}: {exc}"

    run("F_c_dynamic", lambda: depinning_force_dynamic(spec, rho, v_threshold=args.v_threshold,
                                                       tol=args.tol, s=_settings(args)))
    run("F_c_bands", lambda: depinning_force_bands(spec, rho, q_max=args.qmax, tol=args.tol,
                                                   seeds_per_type=args.seeds_per_type, seed=args.seed))
    a, b = out["F_c_dynamic"], out["F_c_bands"]
    out["abs_diff"] = None if a is None or b is None else abs(a - b)
    _write(args, _json(out))


def cmd_pinned_set(args):
    mf = _model(args)
    ps = pinned_set(mf.spec.with_forcing(F_AC=0.0), q_max=args.qmax,
                    seeds_per_type=args.seeds_per_type, seed=args.seed)
    _write(args, _json({"F_DC": ps.F_DC, "q_max": ps.q_max, "intervals": ps.to_json()}))


def _inits(args, mf, stream):
    if getattr(args, "inits", None):
        return load_configurations(args.inits)
    if getattr(args, "rhos", None):
        rhos = [as_fraction(r) for r in args.rhos.split(",")]
    else:
        rhos = [_rho(args, mf)]
    rng = _rng(args.seed, stream)
    return [_random_init(r, rng, args.perturb) for r in rhos]


def cmd_portrait(args):
    mf = _model(args)
    inits = _inits(args, mf, _stream_ids()["inits"])
    s = _settings(args, t_burn=args.burn)
    P = build_portrait(inits, mf.spec, s, samples=args.samples, retain_every=args.retain_every)
    if args.csv:
        _write(args, _csv(P.csv_rows()))
    else:
        doc = json.loads(P.to_json())
        summary = []
        for i, c in enumerate(inits):
            try:
                circ = kam_circle_detect(P, inits=[i]).is_circle
            except TooFewPoints:
                circ = None
            summary.append({"init": i, "rho": _frac(c.rho), "circle": circ,
                            "coverage": depinned_classify(P, c.rho, inits=[i])})
        doc["summary"] = summary
        _write(args, _json(doc))


def cmd_lyapunov(args):
    mf = _model(args)
    if args.ensemble:
        confs = load_configurations(args.ensemble)
    else:
        rho = _rho(args, mf)
        rng = _rng(args.seed, _stream_ids()["ensemble"])
        confs = [_random_init(rho, rng, args.perturb) for _ in range(args.size)]
    e = EmpiricalEnsemble.closed(confs)
    times = np.linspace(0.0, args.t_max, args.n_times)
    series = monotonicity_series(e, mf.spec, times, _settings(args))
    rows = [("time", "I_hat")] + [(_fnum(t), _fnum(v)) for t, v in zip(times, series)]
    _write(args, _csv(rows))


def _int_range(text):
    lo, _, hi = text.partition(":")
    return range(int(lo), int(hi) + 1) if hi else range(int(lo), int(lo) + 1)


def cmd_sync_check(args):
    mf = _model(args)
    inits = _inits(args, mf, _stream_ids()["inits"])
    if len(inits) != 1:
        raise ConfigError("sync-check runs a single initial condition")
    s = _settings(args, t_burn=args.burn)
    strobe = s.resolved(mf.spec).strobe_period
    c = integrate(inits[0], mf.spec, s, t_span=args.burn).final if args.burn > 0 else inits[0]
    traj = integrate(c, mf.spec, s, t_span=strobe * (args.samples - 1), t0=args.burn)
    shifts = [(m, n, k) for m in _int_range(args.m) for n in _int_range(args.n) for k in _int_range(args.s)]
    res = synchronization_check(traj, shifts)
    _write(args, _json({"synchronized": res.synchronized, "witness": res.witness,
                        "n_checked": res.n_checked, "shifts": len(shifts)}))


def cmd_defects(args):
    mf = _model(args)
    rho = _rho(args, mf)
    ins = parse_insertions(args.insert)
    init = defected_initializer(rho, ins, args.q_total)
    r = defect_relaxation_test(init.configuration, mf.spec.with_forcing(F_AC=0.0), _settings(args),
                               t_max=args.t_max)
    doc = {
        "background": _frac(rho),
        "insertions": [list(a) for a in ins],
        "q_total": args.q_total,
        "initial_defect_count": init.defect_count,
        "n_window": {str(m): list(w) for m, w in init.n_window.items()},
        "status": r.status,
        "t_sync": r.t_sync,
        "trend": [list(t) for t in r.trend],
        "non_increasing": r.non_increasing,
        "witnesses": [list(w) for w in r.witnesses],
    }
    _write(args, _json(doc))


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model specification file (default: standard model, k=1)")
    common.add_argument("--seed", type=int, default=0, help="single seed for all randomness")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--dt-max", dest="dt_max", type=float)
    common.add_argument("--error-tol", dest="error_tol", type=float)
    common.add_argument("--t-burn", dest="t_burn", type=float)
    common.add_argument("--t-measure", dest="t_measure", type=float)
    common.add_argument("-v", "--verbose", action="count", default=0)

    ap = argparse.ArgumentParser(prog="fk", description="Driven Frenkel-Kontorova chain experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
        return p

    p = add("sweep-velocity", cmd_sweep_velocity, "average velocity over a DC force grid")
    p.add_argument("--rho")
    p.add_argument("--f-min", dest="f_min", type=float, required=True)
    p.add_argument("--f-max", dest="f_max", type=float, required=True)
    p.add_argument("--steps", type=int, default=61)
    p.add_argument("--f-ac", dest="f_ac", type=float)
    p.add_argument("--nu0", type=float)

    for name, fn, hlp in (("depin-dynamic", cmd_depin_dynamic, "critical force from velocities"),
                          ("depin-bands", cmd_depin_bands, "critical force from rotation bands"),
                          ("depin-compare", cmd_depin_compare, "both critical-force estimators")):
        p = add(name, fn, hlp)
        p.add_argument("--rho")
        p.add_argument("--tol", type=float, default=1e-4)
        if name != "depin-bands":
            p.add_argument("--v-threshold", dest="v_threshold", type=float, default=1e-4)
        if name != "depin-compare":
            p.add_argument("--f-lo", dest="f_lo", type=float, default=0.0)
            p.add_argument("--f-hi", dest="f_hi", type=float)
        if name != "depin-dynamic":
            p.add_argument("--qmax", type=int, default=34)
            p.add_argument("--seeds-per-type", dest="seeds_per_type", type=int, default=16)

    p = add("pinned-set", cmd_pinned_set, "union of rotation bands at the model's F_DC")
    p.add_argument("--qmax", type=int, default=34)
    p.add_argument("--seeds-per-type", dest="seeds_per_type", type=int, default=16)

    p = add("portrait", cmd_portrait, "cylinder portrait of sampled attractors")
    p.add_argument("--inits", help="configuration file, one 'p q u0 ...' per line")
    p.add_argument("--rhos", help="comma-separated mean spacings for seeded initial conditions")
    p.add_argument("--rho")
    p.add_argument("--perturb", type=float, default=0.1)
    p.add_argument("--burn", type=float, default=200.0)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--retain-every", dest="retain_every", type=int, default=10)
    p.add_argument("--csv", action="store_true", help="flat x,p,orbit,t CSV instead of JSON")

    p = add("lyapunov", cmd_lyapunov, "intersection functional along the flow")
    p.add_argument("--ensemble", help="configuration file; default: seeded random ensemble")
    p.add_argument("--rho")
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--perturb", type=float, default=0.4)
    p.add_argument("--t-max", dest="t_max", type=float, default=50.0)
    p.add_argument("--n-times", dest="n_times", type=int, default=26)

    p = add("sync-check", cmd_sync_check, "synchronization of one run over a shift grid")
    p.add_argument("--inits")
    p.add_argument("--rho")
    p.add_argument("--perturb", type=float, default=0.1)
    p.add_argument("--burn", type=float, default=500.0)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--m", default="0:4", help="m range lo:hi (inclusive)")
    p.add_argument("--n", default="-2:2")
    p.add_argument("--s", default="0:4")

    p = add("defects", cmd_defects, "relaxation of a defected configuration")
    p.add_argument("--rho")
    p.add_argument("--insert", default="", help="site:winding,... e.g. 8:-1")
    p.add_argument("--q-total", dest="q_total", type=int, default=32)
    p.add_argument("--t-max", dest="t_max", type=float, default=2000.0)
    p.add_argument("--report", dest="out", help="alias of --out")
    return ap


_CONFIG_ERRORS = (ConfigError, ModelError, InsertionsTooDense, InsufficientSpan, ValueError, OSError)
_NUMERIC_ERRORS = (StepSizeUnderflow, NewtonDiverged, NotConverged, BracketInvalid, TooFewPoints,
                   FloatingPointError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except _NUMERIC_ERRORS as exc:
        _error(exc, "numerical")
        return EXIT_NUMERIC
    except _CONFIG_ERRORS as exc:
        _error(exc, "config")
        return EXIT_CONFIG
    return EXIT_OK


def _error(exc, kind):
    rec = {"error": type(exc).__name__, "kind": kind, "message": str(exc)}
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
