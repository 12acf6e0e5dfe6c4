#!/usr/bin/env python3
"""Regenerate every published convergence/sparsity table via the CLI.

Writes one display CSV (plus the *_full.csv twin) per table into --outdir.
The full run takes roughly 15 minutes on one core; the variable-coefficient
3D and 4D solves dominate.  Use --only to restrict to a substring, e.g.
--only ex2d or --only project.
"""

import argparse
import os
import sys
import time

from sgdg.cli import main as cli_main

PROJ_KINDS = ("vtilde", "vhat", "vhathat")
SOLVE_2D3D = ("ex2d_const", "ex2d_smooth", "ex2d_discont",
              "ex3d_const", "ex3d_smooth")


def jobs():
    out = []
    for d in (2, 3):
        for kind in PROJ_KINDS:
            argv = ["project", "exp_prod", "--d", str(d), "--k", "2",
                    "--N", "2..6", "--kind", kind]
            if d == 3 and kind != "vhathat":
                # these reference tables sample the 6-point lattice; the
                # d=3 default of 3 points underreads smooth projection
                # errors (per-cell remainder vanishes at the Gauss nodes)
                argv += ["--merr", "6"]
            out.append(("project_d%d_%s_k2" % (d, kind), argv))
    for name in SOLVE_2D3D:
        for k in (1, 2):
            out.append(("solve_%s_k%d" % (name, k),
                        ["solve", name, "--k", str(k), "--N", "3..6"]))
    for name in ("ex4d_const", "ex4d_smooth"):
        out.append(("solve_%s_k1" % name,
                    ["solve", name, "--k", "1", "--N", "3..5"]))
        out.append(("solve_%s_k2" % name,
                    ["solve", name, "--k", "2", "--N", "2..4"]))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="tables")
    ap.add_argument("--only", default="", help="substring filter on names")
    args = ap.parse_args(argv)
    os.makedirs(args.outdir, exist_ok=True)

    t0 = time.time()
    for name, argv_job in jobs():
        if args.only and args.only not in name:
            continue
        path = os.path.join(args.outdir, name + ".csv")
        t1 = time.time()
        rc = cli_main(argv_job + ["--out", path])
        if rc != 0:
            print("FAILED (%d): %s" % (rc, name), file=sys.stderr)
            return rc
        print("%-28s %6.1fs" % (name, time.time() - t1))
    print("total %.1fs" % (time.time() - t0))
    return 0


if __name__ == "__main__":
    sys.exit(main())
