"""Command line interface.

Subcommands: simulate, params, bound, block, estimate-mu, audit, rate-experiment.
Configuration comes from a YAML file (``--config``); command-line flags override
file values. Exit codes: 0 success, 2 configuration error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, rng
from .blocking import block_reduce, blocked_sigmas, verify_m_dependence
from .bounds import corollary_bound, epsilon_star, theorem_bound
from .core import MomentParams
from .distance import FamilyConfig, build_rectangle_family, estimate_mu
from .errors import ConfigError, InsufficientDataError, MdcltError
from .experiments import (DEFAULT_N_GRID, RateConfig, audit_from_simulation, fit_loglog_slope,
                          loglog_svg, overlay_check, run_rate_experiment)
from .gaussian import sample_sum_gaussian
from .params import moment_params
from .procgen import load_batch, make_ma_process, sample_paths, sample_sums, save_batch, sum_covariance

log = logging.getLogger("mdclt")

THREADS_ENV = "MDCLT_THREADS"

DEFAULTS = {
    "seed": 0,
    "process": {"p": 1, "m": 0, "coeffs": [1.0], "innovation": "rademacher"},
    "family": {},
    "simulate": {"n": 64, "replicates": 1000},
    "params": {"n": 64, "m": None, "n_mc": 100_000},
    "bound": {"params": None, "n": 1, "p": None, "m": 1, "C": 1.0},
    "block": {"input": None, "m": 2, "remainder": "absorb", "n": 64, "replicates": 1000},
    "estimate_mu": {"n": 64, "replicates": 10_000, "bootstrap": 0},
    "audit": {"n": 64, "replicates": 10_000, "grid": None, "delta": 0.5, "eps": 1.0,
              "C": 1.0, "c_delta": 1.0, "n_mc": 100_000, "m": None},
    "rate_experiment": {
        "n_grid": list(DEFAULT_N_GRID),
        "replicates": 10_000,
        "n_mc": 100_000,
        "C": 1.0,
        "coupling": "paired",
        "fit": True,
        "svg": True,
        "experiments": None,
    },
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path):
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return _merge(DEFAULTS, data)


def config_digest(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def spec_from_config(d):
    try:
        return make_ma_process(int(d["p"]), int(d["m"]), list(d["coeffs"]),
                               d.get("innovation", "gaussian"), float(d.get("rate", 1.0)))
    except KeyError as exc:
        raise ConfigError(f"process section is missing {exc}") from exc


def family_from_config(d):
    try:
        return FamilyConfig(**(d or {}))
    except TypeError as exc:
        raise ConfigError(f"bad family section: {exc}") from exc


def resolve_threads(flag, cfg):
    if flag is not None:
        t = flag
    elif cfg.get("threads") is not None:
        t = cfg["threads"]
    else:
        t = os.environ.get(THREADS_ENV, 1)
    try:
        t = int(t)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"thread count must be an integer, got {t!r}") from exc
    if t < 1:
        raise ConfigError("thread count must be >= 1")
    return t


class Output:
    """Collects rows and writes them as CSV or JSON, to ``--out`` or stdout."""

    def __init__(self, command, fmt, out_dir, cfg):
        self.command = command
        self.fmt = fmt
        self.out_dir = Path(out_dir) if out_dir else None
        self.cfg = cfg
        self.digest = config_digest(cfg)
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    def stem(self):
        return self.command.replace("-", "_")

    def emit(self, rows, extra=None):
        rows = [dict(r, config_digest=self.digest) for r in rows]
        if self.fmt == "json":
            doc = {"command": self.command, "version": __version__, "config": self.cfg,
                   "config_digest": self.digest, "rows": rows}
            if extra:
                doc.update(extra)
            text = json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"
        else:
            text = _csv_text(rows)
        if self.out_dir:
            (self.out_dir / f"{self.stem()}.{self.fmt}").write_text(text)
            if self.fmt == "csv":
                side = {"command": self.command, "config": self.cfg, "config_digest": self.digest}
                if extra:
                    side.update(extra)
                (self.out_dir / f"{self.stem()}.meta.json").write_text(
                    json.dumps(side, indent=2, sort_keys=True, default=_json_default) + "\n")
        else:
            sys.stdout.write(text)

    def write_file(self, name, text):
        if self.out_dir:
            (self.out_dir / name).write_text(text)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True, default=_json_default)
    return v


def _csv_text(rows):
    buf = io.StringIO()
    if rows:
        keys = list(rows[0].keys())
        for r in rows[1:]:
            keys += [k for k in r if k not in keys]
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r.get(k, "")) for k in keys})
    return buf.getvalue()


def cmd_simulate(cfg, threads, out, args):
    spec = spec_from_config(cfg["process"])
    s = cfg["simulate"]
    n, R, seed = int(s["n"]), int(s["replicates"]), int(cfg["seed"])
    batch = sample_paths(spec, n, R, seed, threads)
    if out.out_dir:
        save_batch(batch, out.out_dir / "batch.bin")
    total = batch.data.sum(axis=1)
    rows = [{"n": n, "R": R, "p": spec.p, "m": spec.m, "seed": seed, "spec_digest": spec.digest,
             "coord": k, "mean_of_sum": float(total[:, k].mean()),
             "var_of_sum": float(total[:, k].var(ddof=1)),
             "exact_var_of_sum": float(sum_covariance(spec, 1, n)[k, k])}
            for k in range(spec.p)]
    out.emit(rows)


def cmd_params(cfg, threads, out, args):
    spec = spec_from_config(cfg["process"])
    s = cfg["params"]
    m = s.get("m")
    m = max(spec.m, 1) if m is None else int(m)
    mp = moment_params(spec, int(s["n"]), m, int(s["n_mc"]), int(cfg["seed"]), threads)
    row = mp.to_dict()
    meta = row.pop("meta")
    row.update(meta)
    row["seed"] = int(cfg["seed"])
    out.emit([row])


def _params_for_bound(cfg, threads):
    b = cfg["bound"]
    if b.get("params"):
        try:
            return MomentParams.from_dict(b["params"])
        except KeyError as exc:
            raise ConfigError(f"bound.params is missing {exc}") from exc
    p = cfg["params"]
    spec = spec_from_config(cfg["process"])
    m = p.get("m")
    m = max(spec.m, 1) if m is None else int(m)
    return moment_params(spec, int(p["n"]), m, int(p["n_mc"]), int(cfg["seed"]), threads)


def cmd_bound(cfg, threads, out, args):
    b = cfg["bound"]
    params = _params_for_bound(cfg, threads)
    p = int(b["p"]) if b.get("p") is not None else int(cfg["process"]["p"])
    n, m, C = float(b["n"]), int(b["m"]), float(b["C"])
    eps = epsilon_star(params, n / m, p, C)
    row = {"n": n, "m": m, "n_eff": n / m, "p": p, "C": C,
           "theorem_bound": theorem_bound(params, n, p, C),
           "corollary_bound": corollary_bound(params, n, m, p, C),
           "epsilon_star": eps.value, "epsilon_star_raw": eps.raw,
           "epsilon_star_clamped": eps.clamped, "seed": int(cfg["seed"])}
    row.update({k: v for k, v in params.to_dict().items() if k not in ("n", "m", "meta")})
    out.emit([row])


def cmd_block(cfg, threads, out, args):
    b = cfg["block"]
    m, remainder = int(b["m"]), b.get("remainder", "absorb")
    if b.get("input"):
        batch = load_batch(b["input"])
    else:
        spec = spec_from_config(cfg["process"])
        batch = sample_paths(spec, int(b["n"]), int(b["replicates"]), int(cfg["seed"]), threads)
    blocked = block_reduce(batch, m, remainder)
    if out.out_dir:
        save_batch(blocked, out.out_dir / "blocked.bin")
    check = verify_m_dependence(blocked, 1, seed=int(cfg["seed"]))
    base = blocked.spec.base
    sig = blocked_sigmas(base, batch.n, m, remainder)
    orig = batch.data.sum(axis=1)
    new = blocked.data.sum(axis=1) * m
    rows = [{"n": batch.n, "m": m, "n_blocks": blocked.n, "R": batch.R, "remainder": remainder,
             "seed": int(batch.master_seed),
             "max_sum_identity_error": float(np.max(np.abs(orig - new))),
             "lag2_stat": check.statistic, "lag2_null_q95": check.null_q95,
             "one_dependent": bool(check.passed), "sigma_min": sig.sigma_min,
             "sigma_lower": sig.sigma_lower, "sigma_upper": sig.sigma_upper}]
    out.emit(rows)


def cmd_estimate_mu(cfg, threads, out, args):
    spec = spec_from_config(cfg["process"])
    e = cfg["estimate_mu"]
    n, R, seed = int(e["n"]), int(e["replicates"]), int(cfg["seed"])
    sx = sample_sums(spec, n, R, rng.derive_key(seed, "estimate-mu-x"), threads)
    sy = sample_sum_gaussian(sum_covariance(spec, 1, n), R, rng.derive_key(seed, "estimate-mu-y"),
                             threads)
    fcfg = family_from_config(cfg["family"])
    est = estimate_mu(sx, sy, build_rectangle_family(sx, sy, fcfg), int(e.get("bootstrap", 0)),
                      seed, threads)
    out.emit([est.to_row(n=n, p=spec.p, seed=seed, family_cfg=fcfg.to_dict())])


def cmd_audit(cfg, threads, out, args):
    spec = spec_from_config(cfg["process"])
    a = cfg["audit"]
    n = int(a["n"])
    grid = a.get("grid")
    if grid is None:
        grid = sorted({int(v) for v in np.unique(np.geomspace(1, n, 12).round())} | {n})
    rep = audit_from_simulation(spec, n, int(a["replicates"]), int(cfg["seed"]), list(grid),
                                float(a["delta"]), float(a["eps"]), family_from_config(cfg["family"]),
                                float(a["C"]), float(a["c_delta"]), int(a["n_mc"]), a.get("m"),
                                threads)
    rows = [{"i": i, "c1_ratio": r} for i, r in sorted(rep.c1_ratios.items())]
    out.emit(rows, extra={"audit": rep.to_dict()})
    if out.fmt == "csv" and out.out_dir is None:
        sys.stderr.write(f"c1={rep.c1!r} lemma2_rhs={rep.lemma2_rhs!r}\n")


def _rate_experiments(cfg):
    r = cfg["rate_experiment"]
    exps = r.get("experiments")
    if not exps:
        exps = [{"label": "main", "process": cfg["process"], "family": cfg["family"],
                 "block": r.get("block")}]
    return exps


def cmd_rate_experiment(cfg, threads, out, args):
    r = cfg["rate_experiment"]
    rows, fits, overlays, series = [], {}, {}, {}
    nu_cache = {}
    for k, e in enumerate(_rate_experiments(cfg)):
        label = e.get("label", f"exp{k}")
        spec = spec_from_config(e.get("process", cfg["process"]))
        fam = family_from_config(_merge(cfg["family"], e.get("family")))
        base = dict(spec=spec, n_grid=tuple(int(n) for n in e.get("n_grid", r["n_grid"])),
                    replicates=int(e.get("replicates", r["replicates"])), seed=int(cfg["seed"]),
                    family=fam, n_mc=int(r["n_mc"]), C=float(r["C"]), m=e.get("m"),
                    coupling=e.get("coupling", r.get("coupling", "paired")))
        main = run_rate_experiment(RateConfig(label=label, **base), threads, args.force, nu_cache)
        rows += main
        series[f"{label} (m={main[0]['m']})"] = [(x["n_eff"], x["mu_hat"]) for x in main]
        if r.get("fit", True):
            try:
                fits[label] = fit_loglog_slope(main).to_dict()
            except InsufficientDataError as exc:
                log.warning("%s: no slope fit: %s", label, exc)
                fits[label] = {"error": str(exc)}
        if e.get("block"):
            blab = f"{label}-block{int(e['block'])}"
            blk = run_rate_experiment(RateConfig(label=blab, block=int(e["block"]), **base),
                                      threads, args.force, nu_cache)
            rows += blk
            series[f"{blab} (m={int(e['block'])})"] = [(x["n_eff"], x["mu_hat"]) for x in blk]
            overlays[label] = [{"n_eff": a, "mu_m1": b, "mu_blocked": c, "combined_stderr": s,
                                "within_3se": w} for a, b, c, s, w in overlay_check(main, blk)]
    out.emit(rows, extra={"fits": fits, "overlays": overlays})
    if out.out_dir:
        if out.fmt == "csv":
            out.write_file("rate_fit.json", json.dumps({"fits": fits, "overlays": overlays},
                                                       indent=2, sort_keys=True) + "\n")
        if r.get("svg", True):
            out.write_file("rate_experiment.svg", loglog_svg(series, "Rectangle distance vs n_eff"))
    for label, f in fits.items():
        if "slope" in f:
            log.info("%s: slope %.3f (r2 %.3f)", label, f["slope"], f["r2"])


COMMANDS = {
    "simulate": cmd_simulate,
    "params": cmd_params,
    "bound": cmd_bound,
    "block": cmd_block,
    "estimate-mu": cmd_estimate_mu,
    "audit": cmd_audit,
    "rate-experiment": cmd_rate_experiment,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int,
                        help=f"worker threads (default: config, then ${THREADS_ENV}, then 1)")
    common.add_argument("--out", metavar="DIR", help="write outputs into DIR instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--force", action="store_true",
                        help="run rate experiments even with Gaussian innovations")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="mdclt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "bound":
            sp.add_argument("--n", type=float)
            sp.add_argument("--p", type=int)
            sp.add_argument("--m", type=int)
            sp.add_argument("--C", type=float)
            sp.add_argument("--params-json", metavar="PATH", help="MomentParams JSON file")
        if name == "block":
            sp.add_argument("--input", metavar="PATH", help="batch container to block")
            sp.add_argument("--m", type=int)
    return parser


def _apply_flags(cfg, args):
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cfg["seed"] = args.seed
    if args.command == "bound":
        for k in ("n", "p", "m", "C"):
            v = getattr(args, k, None)
            if v is not None:
                cfg["bound"][k] = v
        if args.params_json:
            try:
                cfg["bound"]["params"] = json.loads(Path(args.params_json).read_text())
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read params JSON: {exc}") from exc
    if args.command == "block":
        if args.input:
            cfg["block"]["input"] = args.input
        if args.m is not None:
            cfg["block"]["m"] = args.m
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_flags(load_config(args.config), args)
        threads = resolve_threads(args.threads, cfg)
        cfg.pop("threads", None)
        fmt = args.format or cfg.pop("format", None) or "csv"
        cfg.pop("format", None)
        out = Output(args.command, fmt, args.out or cfg.pop("out", None), cfg)
        cfg.pop("out", None)
        COMMANDS[args.command](cfg, threads, out, args)
    except MdcltError as exc:
        print(f"mdclt {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
