"""Command-line front end.

    tvburgers [--config PATH] [--out-dir DIR] [--sweep KEY=V1,V2 ...] [--quiet] \
        SUBCOMMAND [ACTION] [--key value ...]

Trailing ``--key value`` pairs override keys of the subcommand's config
section.  Every run writes its CSV outputs, a gnuplot script per table
and ``manifest.json`` (config echo, timings, output hashes).  Exit codes:
0 success, 1 failed check or solver guard, 2 usage error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import copy
import datetime as _dt
import hashlib
import itertools
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ParseError, SolverError, TvBurgersError, TypeMismatch, UnknownKey
from .report import csv_text

log = logging.getLogger("tvburgers")

DUMP_HEADER_BYTES = 64
MAX_WORKERS = 4

# section -> key -> default; the default's type is the key's type
SCHEMA = {
    "profile": {"family": "psi", "i": 1, "k": 2, "a": 1.0, "stable_a": 0.0, "j": 0, "ell": 0, "s": 10.0, "z": 0.0,
                "x_min": -10.0, "x_max": 10.0, "n": 201},
    "spectral": {"n_points": 2001, "j_max": 6, "ell_max": 6, "seed": 0, "bounds_k": 2, "bounds_n": 10000},
    "dss": {"lam": 2.0, "alpha": 1.5, "x0": -8.0, "steps": 20, "seed_kind": "psi1", "amplitude": 0.05},
    "shock1d": {"data": "minus_sin", "domain_lo": -math.pi, "domain_hi": math.pi, "m_min": 2, "m_max": 12,
                "window": 1.0},
    "heat1d": {"case": "flat", "k": 2, "s0": 10.0, "s_end": 20.0, "a0": 1.0, "delta_g": 0.1, "ds": 0.01,
               "cadence": 0.5, "shoot": True},
    "burgers2d": {"k": 2, "s0": 10.0, "s_end": 14.0, "ds": 0.01, "nx": 513, "nz": 257, "cadence": 0.5,
                  "shoot": True, "dump": False},
    "verify": {"criteria": ""},
}

ACTIONS = {
    "profile": ("table",), "spectral": ("matrix", "bounds"), "dss": ("build",), "shock1d": ("run",),
    "heat1d": ("run",), "burgers2d": ("run",), "verify": ("all",),
}


# --------------------------------------------------------------------------
# config


@dataclass
class Config:
    sections: dict = field(default_factory=lambda: copy.deepcopy(SCHEMA))

    def __getitem__(self, section):
        return self.sections[section]

    def __eq__(self, other):
        return isinstance(other, Config) and self.sections == other.sections

    def set(self, section, key, raw, line=None):
        if section not in SCHEMA:
            raise UnknownKey(f"unknown section [{section}]", line)
        if key not in SCHEMA[section]:
            raise UnknownKey(f"unknown key {key!r} in [{section}]", line)
        self.sections[section][key] = _coerce(raw, SCHEMA[section][key], f"{section}.{key}", line)


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _coerce(raw, default, name, line=None):
    if not isinstance(raw, str):
        raw = _emit_value(raw)
    text = raw.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        kind = type(default).__name__
        raise TypeMismatch(f"{name} expects {kind}, got {text!r}", line) from None
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    return text


def _emit_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config_text(text: str) -> Config:
    cfg = Config()
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ParseError(f"malformed section header {raw.strip()!r}", n)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise UnknownKey(f"unknown section [{section}]", n)
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", n)
        if section is None:
            raise ParseError("key outside of any section", n)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ParseError("empty key", n)
        cfg.set(section, key, value, n)
    return cfg


def parse_config(path) -> Config:
    return parse_config_text(Path(path).read_text())


def emit_config(cfg: Config) -> str:
    out = []
    for section, kv in cfg.sections.items():
        out.append(f"[{section}]")
        out.extend(f"{k} = {_emit_value(v)}" for k, v in kv.items())
        out.append("")
    return "\n".join(out)


# --------------------------------------------------------------------------
# outputs


class Outputs:
    """Collects files written by one run, for the manifest."""

    def __init__(self, out_dir: Path):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def write_text(self, name: str, text: str):
        p = self.dir / name
        with open(p, "w", newline="\n") as fh:
            fh.write(text)
        self.files.append(p)
        return p

    def write_bytes(self, name: str, data: bytes):
        p = self.dir / name
        p.write_bytes(data)
        self.files.append(p)
        return p

    def table(self, name: str, header, rows, meta=None, plot=True):
        self.write_text(f"{name}.csv", csv_text(header, rows, meta))
        if plot and len(header) >= 2:
            self.write_text(f"{name}.gp", _plot_script(name, header))


def _plot_script(name, header):
    cols = ", ".join(f"'{name}.csv' using 1:{j + 1} with lines title '{h}'"
                     for j, h in enumerate(header[1:], start=1))
    return ("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n"
            f"set xlabel '{header[0]}'\nset terminal pngcairo size 900,600\nset output '{name}.png'\n"
            f"plot {cols}\n")


def write_dump(outputs: Outputs, name: str, field2d, meta: str = ""):
    """Little-endian float64, row-major, after a 64-byte ASCII header."""
    a = np.ascontiguousarray(field2d, dtype="<f8")
    head = f"TVB2 f8 le rowmajor {a.shape[0]} {a.shape[1]} {meta}".encode("ascii")
    if len(head) > DUMP_HEADER_BYTES - 1:
        raise ValueError("dump header metadata too long")
    head = head.ljust(DUMP_HEADER_BYTES - 1, b" ") + b"\n"
    return outputs.write_bytes(name, head + a.tobytes())


def read_dump(path):
    raw = Path(path).read_bytes()
    head = raw[:DUMP_HEADER_BYTES].decode("ascii").split()
    if head[:4] != ["TVB2", "f8", "le", "rowmajor"]:
        raise ValueError("not a field dump")
    shape = (int(head[4]), int(head[5]))
    return np.frombuffer(raw[DUMP_HEADER_BYTES:], dtype="<f8").reshape(shape), head[6:]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --------------------------------------------------------------------------
# subcommands


def _profile(c, out: Outputs, action):
    from . import profiles as P

    fam = c["family"]
    x = np.linspace(c["x_min"], c["x_max"], c["n"])
    frame = P.SelfSimilarFrame(i=c["i"], k=c["k"])
    evals = {
        "psi": (("X", "Psi", "dPsi"), lambda m: P.psi(c["i"], x, m)),
        "psi1_closed": (("X", "Psi", "dPsi"), lambda m: P.psi1_closed_form(x) if m == 0 else P.psi(1, x, m)),
        "f_k": (("Z", "F", "dF"), lambda m: P.f_k(c["k"], c["a"], x, m)),
        "phi_X": (("X", "phi", "dphi"), lambda m: P.phi_x(c["i"], c["j"], x, m)),
        "phi_Z": (("Z", "phi", "dphi"), lambda m: P.phi_z(c["k"], c["a"], c["ell"], x, m)),
        "psi_ell": (("Z", "psi", "dpsi"), lambda m: P.psi_ell(c["k"], c["a"], c["ell"], x, m)),
        "hermite": (("Y", "h", "dh"), lambda m: P.hermite(c["ell"], x, m)),
        "approx_F": (("Y", "F", "dF"), lambda m: P.approx_profile_F(c["k"], c["a"], c["s"], x, m)),
        "stable_F": (("Y", "F", "dF"), lambda m: P.stable_profile_F(c["s"], c["stable_a"], x, m)),
        "theta_2d": (("X", "Theta", "dTheta"), lambda m: P.theta_2d(frame, x, np.full_like(x, c["z"]), m)),
    }
    if fam not in evals:
        raise ConfigError(f"unknown profile family {fam!r}; choose from {', '.join(evals)}")
    header, f = evals[fam]
    rows = zip(x, np.broadcast_to(f(0), x.shape), np.broadcast_to(f(1), x.shape))
    out.table(f"profile_{fam}", header, rows, {"family": fam, **{k: c[k] for k in ("i", "k", "a", "j", "ell", "s", "z")}})
    return 0


def _spectral(c, out: Outputs, action):
    from . import spectral as S

    if action == "bounds":
        reps = S.sampled_bounds(c["bounds_k"], c["bounds_n"], c["seed"])
        out.table("spectral_bounds", ("bound", "min", "max", "c_lo", "c_hi", "passed"),
                  [(r.name, r.lo, r.hi, r.c_lo, r.c_hi, r.passed) for r in reps], {"k": c["bounds_k"]}, plot=False)
        return 0 if all(r.passed for r in reps) else 1
    rows = S.eigen_matrix(c["n_points"], c["j_max"], c["ell_max"], c["seed"])
    out.table("spectral_eigen_matrix", ("operator", "eigenfunction", "nu", "residual_analytic", "residual_fd",
                                        "passed"),
              [(r.operator, r.eigenfunction, r.nu, r.analytic, r.fd, r.passed) for r in rows],
              {"n_points": c["n_points"]}, plot=False)
    return 0 if all(r.passed for r in rows) else 1


def _dss(c, out: Outputs, action):
    from . import dss as D

    p = D.DssParams(c["lam"], c["alpha"])
    if c["seed_kind"] == "psi1":
        seed = D.psi1_seed(p, c["x0"])
    elif c["seed_kind"] == "perturbed":
        seed = D.perturbed_seed(p, c["x0"], c["amplitude"])
    else:
        raise ConfigError(f"seed_kind must be psi1 or perturbed, got {c['seed_kind']!r}")
    st = D.dss_extend(seed, p, c["steps"])
    meta = {"lam": p.lam, "alpha": p.alpha, "seed_kind": c["seed_kind"], "steps": c["steps"]}
    out.table("dss_breakpoints", ("k", "X_k"), list(enumerate(st.breakpoints)), meta)
    out.table("dss_table", ("segment", "X", "W", "W_X"), st.table(), meta, plot=False)
    h = D.dss_holder_ratio(st)
    out.table("dss_holder", ("segment", "ratio_min", "ratio_max"), h.per_segment,
              {**meta, "spread": h.spread, "degenerate": h.degenerate})
    return 0


def _shock1d(c, out: Outputs, action):
    from . import burgers1d as B1

    data = {"minus_sin": B1.minus_sin, "psi1": B1.psi1_data}
    if c["data"] not in data:
        raise ConfigError(f"data must be one of {', '.join(data)}")
    U0 = data[c["data"]]()
    rep = B1.shock_detect(U0, (c["domain_lo"], c["domain_hi"]))
    out.table("shock1d_report", ("quantity", "value"), rep.as_rows(), {"data": c["data"]}, plot=False)
    table = B1.convergence_table(U0, rep, range(c["m_min"], c["m_max"] + 1), window=(-c["window"], c["window"]))
    out.table("shock1d_convergence", ("t", "ratio_sup", "raw_sup"),
              [(r.t, r.ratio_sup, r.raw_sup) for r in table], {"data": c["data"], "T": rep.T})
    return 0


def _heat1d(c, out: Outputs, action):
    from . import parabolic1d as Q

    if c["case"] == "flat":
        run = Q.run_flat(k=c["k"], s0=c["s0"], s_end=c["s_end"], a0=c["a0"], delta_g=c["delta_g"],
                         ds=c["ds"], cadence=c["cadence"], shoot=c["shoot"])
    elif c["case"] == "stable":
        run = Q.run_stable(s0=c["s0"], s_end=c["s_end"], ds=c["ds"], cadence=c["cadence"], shoot=c["shoot"])
    else:
        raise ConfigError(f"case must be flat or stable, got {c['case']!r}")
    name = f"heat1d_{c['case']}"
    out.table(f"{name}_series", run.columns, run.trajectory, run.report.meta)
    out.write_text(f"{name}_report.csv", run.report.to_csv())
    return 0


def _burgers2d(c, out: Outputs, action):
    from . import burgers2d as B2

    scheme = B2.Scheme2D(ds=c["ds"], nx=c["nx"], nz=c["nz"])
    rep = B2.run_2d(k=c["k"], s0=c["s0"], s_end=c["s_end"], cadence=c["cadence"], scheme=scheme, shoot=c["shoot"])
    out.write_text("burgers2d_series.csv", rep.to_csv())
    out.write_text("burgers2d_series.gp", _plot_script("burgers2d_series", rep.columns))
    if c["dump"]:
        st = rep.state
        write_dump(out, "burgers2d_w.bin", st.w, f"s={st.s:.6g}")
        write_dump(out, "burgers2d_X.bin", st.X[:, None])
        write_dump(out, "burgers2d_Z.bin", st.Z[:, None])
    return 0


def _verify(c, out: Outputs, action, echo=print):
    from . import acceptance as A

    sel = {int(t) for t in c["criteria"].replace(" ", "").split(",") if t} or None
    res = A.run_all(sel, echo=echo)
    out.table("verify_summary", ("criterion", "title", "passed", "seconds"),
              [(r.number, r.title, r.passed, r.seconds) for r in res], plot=False)
    out.write_text("verify_details.txt", "\n".join(r.line() for r in res) + "\n")
    n_ok = sum(r.passed for r in res)
    echo(f"{n_ok}/{len(res)} criteria passed")
    return 0 if n_ok == len(res) else 1


HANDLERS = {"profile": _profile, "spectral": _spectral, "dss": _dss, "shock1d": _shock1d, "heat1d": _heat1d,
            "burgers2d": _burgers2d, "verify": _verify}


def run_subcommand(name: str, config: Config, out_dir, action=None, argv=None, quiet=False) -> int:
    """Run one subcommand into out_dir and write its manifest; returns the exit code."""
    if name not in HANDLERS:
        raise ConfigError(f"unknown subcommand {name!r}")
    action = action or ACTIONS[name][0]
    if action not in ACTIONS[name]:
        raise ConfigError(f"{name} has no action {action!r}; choose from {', '.join(ACTIONS[name])}")
    out = Outputs(out_dir)
    start = _dt.datetime.now(_dt.timezone.utc)
    error = None
    try:
        if name == "verify":
            code = _verify(config[name], out, action, echo=(lambda s: None) if quiet else print)
        else:
            code = HANDLERS[name](config[name], out, action)
    except SolverError as exc:
        error = f"{type(exc).__name__}: {exc}"
        out.write_text(f"{name}_error.txt", error + "\n")
        code = 1
    end = _dt.datetime.now(_dt.timezone.utc)
    manifest = {
        "command_line": list(argv) if argv is not None else [name, action],
        "subcommand": name,
        "action": action,
        "version": __version__,
        "config": config.sections,
        "config_text": emit_config(config),
        "start": start.isoformat(),
        "end": end.isoformat(),
        "exit_code": code,
        "error": error,
        "outputs": [{"file": p.name, "sha256": _sha256(p)} for p in out.files],
    }
    (out.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    if error and not quiet:
        print(error, file=sys.stderr)
    return code


# --------------------------------------------------------------------------
# argument handling


def _apply_overrides(cfg: Config, section: str, extra):
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise ConfigError(f"missing value for {tok}")
        cfg.set(section, key, value)


def _sweep_points(cfg: Config, section: str, specs):
    axes = []
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"sweep spec {spec!r} is not KEY=V1,V2,...")
        key, values = spec.split("=", 1)
        sec, _, k = key.rpartition(".")
        sec = sec or section
        axes.append([(sec, k, v) for v in values.split(",") if v])
    for combo in itertools.product(*axes):
        point = copy.deepcopy(cfg)
        for sec, k, v in combo:
            point.set(sec, k, v)
        label = "_".join(f"{k}={v}" for _, k, v in combo)
        yield label, point


def _run_point(args):
    name, point, out_dir, action, argv, quiet = args
    return run_subcommand(name, point, out_dir, action, argv, quiet)


def build_parser():
    # no abbreviations: "--s" or "--c" are section keys, not --sweep or --config
    p = argparse.ArgumentParser(prog="tvburgers", description=__doc__.split("\n\n")[0], allow_abbrev=False)
    p.add_argument("--config", type=Path, help="config file ([section] / key = value)")
    p.add_argument("--out-dir", type=Path, default=Path("tvburgers_out"))
    p.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2",
                   help="cross-product sweep over config keys, one subdirectory per point")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("subcommand", choices=sorted(HANDLERS))
    p.add_argument("action", nargs="?")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if args.action is not None and args.action.startswith("--"):
        extra.insert(0, args.action)
        args.action = None
    try:
        cfg = parse_config(args.config) if args.config else Config()
        _apply_overrides(cfg, args.subcommand, extra)
        if args.sweep:
            points = list(_sweep_points(cfg, args.subcommand, args.sweep))
            jobs = [(args.subcommand, pt, args.out_dir / label, args.action, argv, True) for label, pt in points]
            workers = min(MAX_WORKERS, len(jobs), os.cpu_count() or 1)
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                codes = list(pool.map(_run_point, jobs))
            for (label, _), code in zip(points, codes):
                log.info("%s: exit %d", label, code)
            return max(codes) if codes else 0
        code = run_subcommand(args.subcommand, cfg, args.out_dir, args.action, argv, args.quiet)
    except (ConfigError, OSError) as exc:
        print(f"tvburgers: {exc}", file=sys.stderr)
        return 2
    except TvBurgersError as exc:
        print(f"tvburgers: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    log.info("wrote %s", args.out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
