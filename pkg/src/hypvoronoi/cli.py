"""Command-line driver for the estimators and audits.

Every estimator needs ``--seed``.  Options may also come from a JSON file
(``--config``); flags given on the command line win.  Outputs are CSV
(LF line endings, 17 significant digits) or JSON, and always record the
seed, the trial count and the package version.

Exit codes: 0 success, 1 an audit failed its criterion, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .discretization import SectorIndex
from .events import AlwaysTrue, OneArm, OwnerBlack
from .geometry import HPoint
from .osss import (
    boolean_sweep,
    estimate_influence,
    estimate_revealment,
    lemma4_audit,
    load_osss_case,
    report_to_json,
    verify_osss_discrete,
)
from .percolation import (
    BracketError,
    InsufficientDataError,
    estimate_pc,
    fit_decay,
    fkg_audit,
    mean_field_check,
    russo_audit,
    sharpness_grid,
    sharpness_ode_check,
    theta_curve,
    theta_grid,
)


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    lam: float = 1.0
    d: int = 2
    p: float | None = None
    p_grid: list | None = None
    n: float | None = None
    n_grid: list | None = None
    epsilon: float | None = None
    k: int = 0
    trials: int = 1000
    seed: int | None = None
    tol_fail: float = 1e-6
    out: str | None = None
    csv_out: str | None = None
    workers: int | None = None
    dp: float = 0.02
    criterion: str = "conditional"
    p_tolerance: float = 0.01
    pc: float | None = None
    c: float = 1.0
    tolerance: float | None = None
    event: str = "one-arm:2"
    event_a: str = "owner-black"
    event_b: str = "one-arm:2"
    case: str | None = None
    sweep: int | None = None
    radius: float = 10.0
    plot_data: bool = False


# JSON keys accepted in a config file (``lambda`` stands for ``lam``)
_KEYS = {f.name: f.name for f in fields(ExperimentConfig)} | {"lambda": "lam"}
_KEYS.pop("lam")
_KEYS.pop("command")

ESTIMATORS = {"theta", "pc", "decay", "meanfield", "russo-audit", "fkg-audit", "reveal",
              "influence", "lemma4-audit", "sharpness"}

HELP = {
    "theta": "one-arm probability theta_n(p) = P(0 <-> S(0, n)) on a grid of p and n",
    "pc": "finite-size proxy p_c(n) for the critical parameter p_c, by bisection",
    "decay": "exponential decay rate c_p of theta_n(p) in n (subcritical p)",
    "meanfield": "mean-field constant c in theta(p) >= c (p - p_c) above p_c",
    "russo-audit": "Russo formula: d/dp P_p(A) against E_p |Piv(A)|",
    "fkg-audit": "FKG inequality P(A and B) >= P(A) P(B) for increasing A, B",
    "osss-verify": "OSSS inequality Var(f) <= sum_i delta_i Inf_i, exactly on a finite case",
    "reveal": "revealments delta_x of the sector exploration algorithm A_k",
    "influence": "sector influences Inf_x of the one-arm event",
    "lemma4-audit": "derivative of theta_n against half the sum of sector influences",
    "sharpness": "differential inequality f_n' >= c n / Sigma_n f_n on a theta_n grid",
    "sectors": "annulus-sector grid K_eps: sector counts N_k and areas",
}


def _floats(text):
    """``"0.1,0.2"`` or ``"start:stop:step"`` (inclusive) to a list of floats."""
    if isinstance(text, list):
        return [float(x) for x in text]
    text = str(text)
    if text.count(":") == 2:
        a, b, s = (float(x) for x in text.split(":"))
        if s <= 0:
            raise UsageError("grid step must be > 0")
        m = int(math.floor((b - a) / s + 1e-9))
        return [round(a + i * s, 12) for i in range(m + 1)]
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="hypvoronoi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in HELP.items():
        sp = sub.add_parser(name, help=text, description=f"Estimates the {text}.")
        sp.add_argument("--config", help="JSON config file; flags override its values")
        sp.add_argument("--lambda", dest="lam", type=float, help="intensity of the Poisson process")
        sp.add_argument("--d", type=int, help="dimension (only 2 is supported for events)")
        sp.add_argument("--p", type=float, help="colour parameter p")
        sp.add_argument("--p-grid", help="p values: 'a,b,c' or 'start:stop:step'")
        sp.add_argument("--n", type=float, help="hyperbolic distance n")
        sp.add_argument("--n-grid", help="n values: 'a,b,c' or 'start:stop:step'")
        sp.add_argument("--epsilon", type=float, help="sector scale (default depends on lambda)")
        sp.add_argument("--k", type=int, help="sphere radius k of the exploration algorithm")
        sp.add_argument("--trials", type=int, help="number of independent samples")
        sp.add_argument("--seed", type=int, help="root seed (required for estimators)")
        sp.add_argument("--tol-fail", type=float, help="per-trial failure tolerance")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--csv-out", help="second output for commands producing CSV and JSON")
        sp.add_argument("--workers", type=int, help="worker processes (default: $HYPVORONOI_WORKERS or CPU count)")
        sp.add_argument("--dp", type=float, help="half-width of the finite difference in p")
        sp.add_argument("--criterion", choices=["conditional", "unconditional"], help="p_c proxy criterion")
        sp.add_argument("--p-tolerance", type=float, help="width of the p_c bracket")
        sp.add_argument("--pc", type=float, help="p_c estimate used by meanfield")
        sp.add_argument("--c", type=float, help="constant c of the sharpness inequality")
        sp.add_argument("--tolerance", type=float, help="sharpness tolerance (default: from CIs)")
        sp.add_argument("--event", help="event: owner-black, one-arm:N, always; '@r,theta' sets the base point")
        sp.add_argument("--event-a", help="first event of the FKG audit")
        sp.add_argument("--event-b", help="second event of the FKG audit")
        sp.add_argument("--case", help="JSON file with a discrete OSSS case")
        sp.add_argument("--sweep", type=int, help="check all boolean functions on this many bits")
        sp.add_argument("--radius", type=float, help="covered radius for 'sectors'")
        sp.add_argument("--plot-data", action="store_true", default=None,
                        help="emit (x, y, y_err) rows instead of the full output")
    return parser


def parse_config(argv):
    """Flags and optional JSON file to a validated ``ExperimentConfig``."""
    args = vars(build_parser().parse_args(argv))
    values = {}
    if args.get("config"):
        try:
            with open(args["config"]) as fh:
                text = fh.read()
        except OSError as e:
            raise UsageError(f"cannot read config: {e}") from e
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise UsageError(f"malformed config at line {e.lineno}, column {e.colno}: {e.msg}") from e
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        for key, val in doc.items():
            if key not in _KEYS:
                raise UsageError(f"unknown config key {key!r}")
            values[_KEYS[key]] = val
    for key, val in args.items():
        if key in ("config", "command") or val is None:
            continue
        values[key] = val
    try:
        cfg = ExperimentConfig(command=args["command"], **values)
    except TypeError as e:
        raise UsageError(str(e)) from e
    if cfg.p_grid is not None:
        cfg.p_grid = _floats(cfg.p_grid)
    if cfg.n_grid is not None:
        cfg.n_grid = _floats(cfg.n_grid)
    validate(cfg)
    return cfg


def _check(ok, name, why):
    if not ok:
        raise UsageError(f"invalid {name}: {why}")


def validate(cfg):
    _check(cfg.lam > 0, "lambda", "must be > 0")
    _check(cfg.d >= 2, "d", "must be >= 2")
    _check(cfg.d == 2 or cfg.command == "sectors", "d", "events are implemented for d = 2 only")
    for name in ("p", "pc"):
        v = getattr(cfg, name)
        _check(v is None or 0 <= v <= 1, name, "must lie in [0, 1]")
    _check(cfg.p_grid is None or all(0 <= v <= 1 for v in cfg.p_grid), "p_grid", "values must lie in [0, 1]")
    _check(cfg.n is None or cfg.n >= 0, "n", "must be >= 0")
    _check(cfg.n_grid is None or all(v >= 0 for v in cfg.n_grid), "n_grid", "values must be >= 0")
    _check(cfg.epsilon is None or cfg.epsilon > 0, "epsilon", "must be > 0")
    _check(cfg.k >= 0, "k", "must be >= 0")
    _check(cfg.trials >= 1, "trials", "must be >= 1")
    _check(0 < cfg.tol_fail < 1, "tol_fail", "must lie in (0, 1)")
    _check(cfg.workers is None or cfg.workers >= 1, "workers", "must be >= 1")
    _check(cfg.dp > 0, "dp", "must be > 0")
    _check(cfg.p_tolerance > 0, "p_tolerance", "must be > 0")
    _check(cfg.radius > 0, "radius", "must be > 0")
    _check(cfg.criterion in ("conditional", "unconditional"), "criterion", "unknown value")
    if cfg.command in ESTIMATORS:
        _check(cfg.seed is not None, "seed", "--seed is required for estimators")
    _check(cfg.seed is None or cfg.seed >= 0, "seed", "must be >= 0")
    if cfg.command in ("theta", "russo-audit", "fkg-audit", "reveal", "influence", "lemma4-audit"):
        _check(cfg.p is not None or (cfg.command == "theta" and cfg.p_grid), "p", "is required")
    if cfg.command in ("pc", "meanfield", "reveal", "influence", "lemma4-audit", "sharpness"):
        _check(cfg.n is not None, "n", "is required")
    if cfg.command == "theta":
        _check(cfg.n is not None or cfg.n_grid, "n", "is required")
    if cfg.command in ("meanfield", "sharpness"):
        _check(cfg.p_grid, "p_grid", "is required")
    if cfg.command == "reveal":
        _check(cfg.k <= cfg.n, "k", "must be <= n")
    if cfg.command == "osss-verify":
        _check(cfg.case or cfg.sweep, "case", "a --case file or --sweep is required")
    for name in ("event", "event_a", "event_b"):
        parse_event(getattr(cfg, name), name)


def parse_event(text, name="event"):
    """``owner-black``, ``one-arm:N`` or ``always``, with optional ``@r,theta`` base point."""
    base = None
    spec = str(text)
    if "@" in spec:
        spec, loc = spec.split("@", 1)
        try:
            r, th = (float(x) for x in loc.split(","))
        except ValueError as e:
            raise UsageError(f"invalid {name}: base point must be 'r,theta'") from e
        base = tuple(HPoint.polar(r, th).coords)
    if spec == "owner-black":
        return OwnerBlack(base)
    if spec == "always":
        return AlwaysTrue()
    if spec.startswith("one-arm:"):
        try:
            n = float(spec.split(":", 1)[1])
        except ValueError as e:
            raise UsageError(f"invalid {name}: bad distance") from e
        _check(n >= 0, name, "distance must be >= 0")
        return OneArm(n, base)
    raise UsageError(f"invalid {name}: unknown event {spec!r}")


# --- output ----------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return v


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def json_text(doc):
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=True) + "\n"


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _prov(cfg):
    return {"command": cfg.command, "seed": cfg.seed, "trials": cfg.trials, "version": __version__}


def _plot(rows, series=False):
    head = ["series", "x", "y", "y_err"] if series else ["x", "y", "y_err"]
    return csv_text(head, rows)


# --- commands --------------------------------------------------------------------

def _ps(cfg):
    return cfg.p_grid if cfg.p_grid else [cfg.p]


def _ns(cfg):
    return cfg.n_grid if cfg.n_grid else [cfg.n]


def cmd_theta(cfg):
    ps, ns = _ps(cfg), _ns(cfg)
    if len(ps) == 1:
        est = {(n, ps[0]): r for n, r in theta_curve(cfg.lam, ps[0], ns, cfg.trials, cfg.seed,
                                                       cfg.epsilon, cfg.workers)}
    else:
        est = theta_grid(cfg.lam, ps, ns, cfg.trials, cfg.seed, cfg.epsilon, cfg.workers)
    if cfg.plot_data:
        rows = [(f"n={n:g}", p, est[(n, p)].mean, est[(n, p)].std_error) for n in ns for p in ps]
        return _plot(rows, series=True), 0
    rows = [(cfg.lam, p, n, cfg.trials, cfg.seed, r.mean, r.std_error, r.ci95[0], r.ci95[1], __version__)
            for (n, p), r in sorted(est.items(), key=lambda kv: (kv[0][1], kv[0][0]))]
    return csv_text(["lambda", "p", "n", "trials", "seed", "theta_hat", "std_err", "ci_lo", "ci_hi",
                     "version"], rows), 0


def cmd_pc(cfg):
    n = cfg.n
    try:
        res = estimate_pc(cfg.lam, n, cfg.trials, cfg.p_tolerance, cfg.seed, cfg.criterion,
                          cfg.epsilon, cfg.workers)
    except BracketError as e:
        return json_text({**_prov(cfg), "error": str(e)}), 1
    if cfg.plot_data:
        return _plot([(n, res.midpoint, 0.5 * (res.hi - res.lo))]), 0
    return json_text({**_prov(cfg), "lambda": cfg.lam, **res.as_dict()}), 0


def cmd_decay(cfg):
    ns = cfg.n_grid or [1, 2, 3, 4, 5, 6, 7, 8]
    p = cfg.p if cfg.p is not None else 0.1
    est = theta_curve(cfg.lam, p, ns, cfg.trials, cfg.seed, cfg.epsilon, cfg.workers)
    rows = [(cfg.lam, p, n, cfg.trials, cfg.seed, r.mean, r.std_error, r.ci95[0], r.ci95[1], __version__)
            for n, r in est]
    points = csv_text(["lambda", "p", "n", "trials", "seed", "theta_hat", "std_err", "ci_lo", "ci_hi",
                       "version"], rows)
    if cfg.csv_out:
        _emit(points, cfg.csv_out)
    if cfg.plot_data:
        return _plot([(n, r.mean, r.std_error) for n, r in est]), 0
    try:
        fit = fit_decay(est)
    except InsufficientDataError as e:
        return json_text({**_prov(cfg), "error": str(e)}), 1
    doc = {**_prov(cfg), "lambda": cfg.lam, "p": p, "slope": fit.slope, "intercept": fit.intercept,
           "r_squared": fit.r_squared, "slope_ci95": list(fit.slope_ci95),
           "decay_rate": -fit.slope, "negative_at_95": fit.slope_ci95[1] < 0}
    return json_text(doc), 0 if doc["negative_at_95"] else 1


def cmd_meanfield(cfg):
    pc = cfg.pc
    if pc is None:
        pc = estimate_pc(cfg.lam, cfg.n, cfg.trials, cfg.p_tolerance, cfg.seed, cfg.criterion,
                         cfg.epsilon, cfg.workers).midpoint
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        c_hat, rep = mean_field_check(cfg.lam, cfg.p_grid, cfg.n, cfg.trials, cfg.seed, pc,
                                      cfg.epsilon, cfg.workers)
    if cfg.plot_data:
        rows = [(r["p"], r["theta"]["mean"], r["theta"]["std_error"]) for r in rep["grid"]]
        return _plot(rows), 0
    return json_text({**_prov(cfg), **rep}), 0 if rep["passed"] else 1


def cmd_russo(cfg):
    ev = parse_event(cfg.event)
    rep = russo_audit(cfg.lam, ev, cfg.p, cfg.dp, cfg.trials, cfg.seed, cfg.epsilon, cfg.workers)
    if cfg.plot_data:
        rows = [("derivative", cfg.p, rep["derivative"]["mean"], rep["derivative"]["std_error"]),
                ("pivotal", cfg.p, rep["pivotal"]["mean"], rep["pivotal"]["std_error"])]
        return _plot(rows, series=True), 0
    return json_text({**_prov(cfg), **rep}), 0 if rep["passed"] else 1


def cmd_fkg(cfg):
    rep = fkg_audit(cfg.lam, cfg.p, parse_event(cfg.event_a, "event_a"), parse_event(cfg.event_b, "event_b"),
                    cfg.trials, cfg.seed, cfg.epsilon, cfg.workers)
    if cfg.plot_data:
        return _plot([(cfg.p, rep["gap"], rep["std_error"])]), 0
    return json_text({**_prov(cfg), **rep}), 0 if rep["passed"] else 1


def cmd_osss(cfg):
    if cfg.sweep:
        rep = boolean_sweep(cfg.sweep)
        return json_text({"command": cfg.command, "version": __version__, **rep}), 0 if rep["violations"] == 0 else 1
    try:
        with open(cfg.case) as fh:
            case = load_osss_case(fh.read())
    except (OSError, ValueError, KeyError) as e:
        raise UsageError(f"invalid case: {e}") from e
    rep = verify_osss_discrete(case)
    text = report_to_json({"command": cfg.command, "version": __version__, **rep})
    return text, 0 if rep["holds"] else 1


def _sector_csv(cfg, est, eps):
    index = SectorIndex(eps)
    rows = []
    for sid in sorted(est):
        r = est[sid]
        rows.append((sid[0], sid[1], 2.0 * sid[0] * eps, index.angles(sid)[0] if sid[0] else 0.0,
                     r.mean, r.std_error, cfg.trials, cfg.seed, __version__))
    return csv_text(["k", "l", "rep_radius", "rep_angle", "estimate", "std_err", "trials", "seed",
                     "version"], rows)


def _eps(cfg):
    from .sampling import default_epsilon
    return cfg.epsilon if cfg.epsilon is not None else default_epsilon(cfg.lam)


def cmd_reveal(cfg):
    eps = _eps(cfg)
    est = estimate_revealment(cfg.lam, cfg.p, eps, cfg.n, cfg.k, cfg.trials, cfg.seed, cfg.workers)
    if cfg.plot_data:
        return _plot([(2.0 * s[0] * eps, r.mean, r.std_error) for s, r in sorted(est.items())]), 0
    return _sector_csv(cfg, est, eps), 0


def cmd_influence(cfg):
    eps = _eps(cfg)
    est = estimate_influence(cfg.lam, cfg.p, eps, cfg.n, cfg.trials, cfg.seed, cfg.workers)
    if cfg.plot_data:
        return _plot([(2.0 * s[0] * eps, r.mean, r.std_error) for s, r in sorted(est.items())]), 0
    return _sector_csv(cfg, est, eps), 0


def cmd_lemma4(cfg):
    rep = lemma4_audit(cfg.lam, cfg.p, _eps(cfg), cfg.n, cfg.dp, cfg.trials, cfg.seed, cfg.workers)
    if cfg.plot_data:
        rows = [("derivative", cfg.p, rep["derivative"]["mean"], rep["derivative"]["std_error"]),
                ("half_influence_sum", cfg.p, rep["half_influence_sum"],
                 0.5 * rep["influence_sum"]["std_error"])]
        return _plot(rows, series=True), 0
    return json_text({**_prov(cfg), **rep}), 0 if rep["passed"] else 1


def cmd_sharpness(cfg):
    n_max = int(cfg.n)
    check = sharpness_grid(cfg.lam, cfg.p_grid, n_max, cfg.trials, cfg.seed, cfg.epsilon, cfg.workers)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = sharpness_ode_check(check, cfg.c, cfg.tolerance)
    if cfg.plot_data:
        rows = [(f"n={n}", p, check.f[n][i], check.std_error[n][i])
                for n in range(n_max + 1) for i, p in enumerate(check.grid)]
        return _plot(rows, series=True), 0
    rep["std_error"] = check.std_error.tolist()
    return json_text({**_prov(cfg), "lambda": cfg.lam, **rep}), 0 if not rep["violations"] else 1


def cmd_sectors(cfg):
    eps = cfg.epsilon if cfg.epsilon is not None else 0.5
    index = SectorIndex(eps, max(cfg.radius, 2.0 * eps))
    rows = index.summary_rows()
    if cfg.plot_data:
        return _plot([(k, a, 0.0) for k, _, a in rows]), 0
    return csv_text(["k", "N_k", "sector_area", "epsilon", "version"],
                    [(k, n, a, eps, __version__) for k, n, a in rows]), 0


COMMANDS = {
    "theta": cmd_theta, "pc": cmd_pc, "decay": cmd_decay, "meanfield": cmd_meanfield,
    "russo-audit": cmd_russo, "fkg-audit": cmd_fkg, "osss-verify": cmd_osss, "reveal": cmd_reveal,
    "influence": cmd_influence, "lemma4-audit": cmd_lemma4, "sharpness": cmd_sharpness,
    "sectors": cmd_sectors,
}


def run_command(cfg):
    """Run one command; returns ``(exit_code, text)`` and writes ``cfg.out``."""
    text, code = COMMANDS[cfg.command](cfg)
    _emit(text, cfg.out)
    return code, text


def main(argv=None):
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        code, _ = run_command(cfg)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        # argparse reports usage errors with status 2
        return int(e.code) if e.code is not None else 0
    return code


if __name__ == "__main__":
    sys.exit(main())
