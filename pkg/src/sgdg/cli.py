"""Experiment runner: projection and solver studies as CSV tables.

Two modes. `project` L2-projects the exact solution of a builtin problem
onto the chosen space and tabulates the errors; `solve` assembles the
penalized system, runs CG, and tabulates errors plus sparsity/conditioning
columns. Each run writes a display CSV (3 significant digits) and a parallel
full-precision CSV next to it, and appends rows as they finish so a failed
run keeps its partial table.
"""

import argparse
import math
import os
import sys

import numpy as np

from .assembly import (AssemblyError, Constant, SchemeParams,
                       assemble_system, export_matrix_market,
                       l2_project_function)
from .linalg import IndefiniteSystemError, cond_estimate, pcg, pin_threads
from .postproc import DiscreteFunction, convergence_orders, error_norms
from .problems import DEFAULT_SIGMA, get_problem, problem_names
from .quadrature import QuadConfig
from .spaces import DimensionCapError, SpaceSpec, full_grid_dim


class CliError(Exception):
    pass


ERROR_COLS = ("l1", "l2", "linf", "h1")
HEADER = ["N", "SGDOF", "FGDOF",
          "L1", "order", "L2", "order", "Linf", "order", "H1", "order"]
SOLVE_EXTRA = ["NNZ", "Order", "Cond"]


def parse_nrange(text):
    parts = str(text).split("..")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise CliError("bad N range %r (use A or A..B)" % text)
    if hi < lo:
        raise CliError("empty N range %r" % text)
    return list(range(lo, hi + 1))


def load_config_file(path):
    out = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as e:
        raise CliError("cannot read config file: %s" % e)
    for ln, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError("%s:%d: expected key=value, got %r"
                           % (path, ln, raw))
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


_BOOL = {"1": True, "true": True, "yes": True,
         "0": False, "false": False, "no": False}


def merge_config(args):
    """Config file values first, command-line flags override."""
    cfg = {
        "mode": None, "problem": None, "d": None, "k": 1, "N": "3..6",
        "kind": "vhat", "sigma": None, "iquad": 7, "merr": None,
        "out": None, "export_matrix": False, "threads": None,
        "cond": None, "tol": 1e-12,
    }
    if args.config:
        file_cfg = load_config_file(args.config)
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise CliError("unknown config keys: %s" % ", ".join(sorted(unknown)))
        for key, val in file_cfg.items():
            if key in ("d", "k", "iquad", "merr", "threads"):
                cfg[key] = int(val)
            elif key in ("sigma", "tol"):
                cfg[key] = float(val)
            elif key in ("export_matrix", "cond"):
                if val.lower() not in _BOOL:
                    raise CliError("bad boolean %r for %s" % (val, key))
                cfg[key] = _BOOL[val.lower()]
            else:
                cfg[key] = val
    for key in cfg:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            cfg[key] = cli_val
    if args.no_cond:
        cfg["cond"] = False
    return cfg


def validate(cfg):
    if cfg["mode"] not in ("project", "solve"):
        raise CliError("mode must be project or solve, got %r" % cfg["mode"])
    if not cfg["problem"]:
        raise CliError("no problem given; builtins: %s"
                       % ", ".join(problem_names()))
    if cfg["kind"] not in ("vhat", "vtilde", "vhathat"):
        raise CliError("kind must be vhat, vtilde or vhathat")
    if cfg["mode"] == "solve" and cfg["kind"] == "vhathat":
        raise CliError("solve mode needs an orthonormal space "
                       "(vhat or vtilde)")
    if cfg["k"] < 0 or cfg["k"] > 9:
        raise CliError("k outside supported range 0..9")
    if cfg["merr"] is not None and cfg["merr"] < 1:
        raise CliError("merr must be a positive lattice density")
    cfg["nrange"] = parse_nrange(cfg["N"])


def fmt_display(x, kind):
    if x is None:
        return ""
    if kind == "err":
        return "%.2E" % x
    if kind == "ord":
        return "%.2f" % x
    if kind == "int":
        return "%d" % x
    return str(x)


def fmt_full(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return "%d" % x
    return "%.16e" % x


class TableWriter:
    """Incremental display + full-precision CSV pair."""

    def __init__(self, out_path, header):
        self.header = header
        self.display_rows = []
        self.display_path = out_path
        self.full_path = None
        self.display_file = None
        self.full_file = None
        if out_path:
            root, ext = os.path.splitext(out_path)
            self.full_path = root + "_full" + (ext or ".csv")
            self.display_file = open(out_path, "w")
            self.full_file = open(self.full_path, "w")
            for f in (self.display_file, self.full_file):
                f.write(",".join(header) + "\n")
                f.flush()

    def add(self, display_row, full_row):
        self.display_rows.append(display_row)
        if self.display_file:
            self.display_file.write(",".join(display_row) + "\n")
            self.display_file.flush()
            self.full_file.write(",".join(full_row) + "\n")
            self.full_file.flush()

    def close(self):
        for f in (self.display_file, self.full_file):
            if f:
                f.close()

    def echo(self, stream):
        widths = [max(len(h), *(len(r[i]) for r in self.display_rows))
                  if self.display_rows else len(h)
                  for i, h in enumerate(self.header)]
        def line(cells):
            return "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        print(line(self.header), file=stream)
        for row in self.display_rows:
            print(line(row), file=stream)


def pick_sigma(cfg, d):
    if cfg["sigma"] is not None:
        return float(cfg["sigma"])
    key = (d, cfg["k"])
    if key not in DEFAULT_SIGMA:
        raise CliError("no default penalty for d=%d, k=%d; pass --sigma"
                       % key)
    return DEFAULT_SIGMA[key]


def run(cfg, stream=None):
    if stream is None:
        stream = sys.stdout
    validate(cfg)
    threads = pin_threads(cfg["threads"])
    prob = get_problem(cfg["problem"], d=cfg["d"])
    d, k = prob.d, cfg["k"]
    mode = cfg["mode"]
    sigma = pick_sigma(cfg, d) if mode == "solve" else None
    quad = QuadConfig(iquad=cfg["iquad"])
    want_cond = cfg["cond"]
    if want_cond is None:
        coeff = prob.coefficient
        want_cond = isinstance(coeff, Constant) and np.ndim(coeff.value) == 0

    header = HEADER + (SOLVE_EXTRA if mode == "solve" else [])
    writer = TableWriter(cfg["out"], header)
    prev = None
    status = 0
    try:
        for N in cfg["nrange"]:
            spec = SpaceSpec(cfg["kind"], d, N, k)
            extras = []
            if mode == "project":
                coef = l2_project_function(prob.exact, spec, quad=quad,
                                           u_terms=prob.exact_terms)
                u_h = DiscreteFunction(spec, coef)
            else:
                params = SchemeParams(sigma=sigma, quad=quad)
                system, rhs = assemble_system(spec, prob, params)
                if cfg["export_matrix"]:
                    stem = os.path.splitext(cfg["out"])[0] if cfg["out"] \
                        else "%s_%s_k%d" % (mode, cfg["problem"], k)
                    export_matrix_market("%s_N%d.mtx" % (stem, N), system)
                report = pcg(system, rhs, tol=cfg["tol"])
                u_h = DiscreteFunction(spec, report.solution)
                nnz = system.nnz_full
                nnz_order = math.log(nnz) / math.log(spec.dim)
                cond = cond_estimate(system) if want_cond else None
                extras = [(nnz, "int"), (nnz_order, "ord"), (cond, "err")]
            er = error_norms(u_h, prob.exact, prob.exact_grad,
                             m=cfg["merr"], with_energy=False)
            orders = {c: None for c in ERROR_COLS}
            if prev is not None:
                ords = convergence_orders([prev, er])
                orders = {c: ords[c][0] for c in ERROR_COLS}
            prev = er

            cells = [(N, "int"), (spec.dim, "int"),
                     (full_grid_dim(d, N, k), "int")]
            for c in ERROR_COLS:
                cells.append((getattr(er, c), "err"))
                cells.append((orders[c], "ord"))
            cells.extend(extras)
            writer.add([fmt_display(v, t) for v, t in cells],
                       [fmt_full(v) for v, _ in cells])
    except (IndefiniteSystemError, DimensionCapError) as e:
        print("error: %s" % e, file=sys.stderr)
        status = 1
    finally:
        writer.close()
    writer.echo(stream)
    if cfg["out"]:
        print("wrote %s and %s (threads=%d)"
              % (cfg["out"], writer.full_path, threads), file=stream)
    return status


def build_parser():
    p = argparse.ArgumentParser(
        prog="sgdg",
        description="Sparse-grid DG experiment runner (projection and "
                    "solver convergence tables).")
    p.add_argument("mode", nargs="?", choices=("project", "solve"))
    p.add_argument("problem", nargs="?",
                   help="builtin problem name: %s" % ", ".join(problem_names()))
    p.add_argument("--config", help="key=value config file; flags override")
    p.add_argument("--d", type=int, help="dimension (needed by exp_prod)")
    p.add_argument("--k", type=int, help="polynomial degree (default 1)")
    p.add_argument("--N", help="refinement range A..B (default 3..6)")
    p.add_argument("--kind", choices=("vhat", "vtilde", "vhathat"))
    p.add_argument("--sigma", type=float, help="penalty (default per d,k)")
    p.add_argument("--iquad", type=int, help="quadrature accuracy knob")
    p.add_argument("--merr", type=int,
                   help="error-lattice Gauss points per cell per direction "
                        "(default 6 for d<=2, 3 for d>=3)")
    p.add_argument("--tol", type=float, help="CG relative tolerance")
    p.add_argument("--out", help="display CSV path; *_full.csv written too")
    p.add_argument("--export-matrix", dest="export_matrix",
                   action="store_const", const=True, default=None)
    p.add_argument("--threads", type=int,
                   help="BLAS thread cap (default SGDG_THREADS or all cores)")
    p.add_argument("--cond", dest="cond", action="store_const", const=True,
                   default=None, help="force condition-number column")
    p.add_argument("--no-cond", action="store_true",
                   help="skip condition-number column")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(args)
        return run(cfg)
    except (CliError, AssemblyError, ValueError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
