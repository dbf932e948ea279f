"""Command-line entry points.

Three commands:

  simulate   dump matrix/eigenvalue/particle paths as JSON lines or CSV
  verify     run a named verification scenario, emit a JSON report,
             exit 0 iff every check passes
  density    tabulate an analytic density on a grid (CSV)

All numeric CSV output uses 17-significant-digit formatting so files
round-trip bit-exactly.  Every command is deterministic given its flags;
the worker count (--workers / RMT_FLOW_THREADS) never changes results.
"""

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import tolerances as tol
from .ensembles import EnsembleSpec, density, exponent_psi
from .errors import ChamberMismatch, RmtFlowError
from .haar import hciz_report
from .kernels import (MeanderSpec, banana_density, noncoll_probability,
                      star_density, watermelon_density)
from .matproc import (KINDS, MatrixProcessSpec, PathGrid, build_process,
                      dump_paths, eigen_path, sample_matrices,
                      terminal_eigenvalues)
from .schur import expansion_check, selberg_quadrature, selberg_value
from .sde import SdeSpec, integrate
from .stats import (chamber_chi2, chi2_report, imhof_reweight, ks_report,
                    ks_test, quadrature_cdf)

_FMT = "%.17g"

# lowercase CLI aliases for the matrix-process kinds
_KIND_ALIASES = {k.lower().replace("_", "-"): k for k in KINDS}
_KIND_ALIASES.update({"gue": "GUE_H", "goe": "GOE_S", "gse": "Xi2plus"})
_SDE_FAMILIES = {"dyson", "radial", "bessel", "meander", "laguerre-ev"}


def _workers(args):
    if getattr(args, "workers", None):
        return max(1, args.workers)
    env = os.environ.get("RMT_FLOW_THREADS")
    return max(1, int(env)) if env else 1


def _map_chunks(args):
    n = _workers(args)
    if n == 1:
        return map
    pool = ThreadPoolExecutor(max_workers=n)
    return pool.map


def _open_out(args):
    if args.out and args.out != "-":
        return open(args.out, "w")
    return sys.stdout


def _csv_row(fileobj, values):
    fileobj.write(",".join(_FMT % v if isinstance(v, float) else str(v)
                           for v in values) + "\n")


# ---------------------------------------------------------------------------
# simulate


def _simulate_sde(args, out):
    fam = {"dyson": "Dyson", "radial": "Radial", "bessel": "Bessel",
           "meander": "Meander", "laguerre-ev": "LaguerreEV"}[args.kind]
    kw = {}
    if fam in ("Dyson", "Radial", "LaguerreEV"):
        kw["beta"] = args.beta
    if fam == "Radial":
        kw["gamma"] = args.gamma
    if fam in ("Bessel", "Meander", "LaguerreEV"):
        kw["nu"] = args.nu
    if fam == "Meander":
        kw["kappa"] = args.kappa
    spec = SdeSpec(fam, args.n, PathGrid(args.bigT or args.t, args.steps or 100),
                   seed=args.seed, **kw)
    times, paths = integrate(spec, count=args.samples)
    if args.format == "csv":
        _csv_row(out, ["sample", "time", "coordinate", "value"])
        for i in range(paths.shape[0]):
            for k, t in enumerate(times):
                for c in range(paths.shape[2]):
                    _csv_row(out, [i, float(t), c, float(paths[i, k, c])])
    else:
        tl = [float(t) for t in times]
        for i in range(paths.shape[0]):
            out.write(json.dumps({"kind": args.kind, "seed": args.seed,
                                  "sample": i, "times": tl,
                                  "path": paths[i].tolist()}) + "\n")
    term = paths[:, -1, :]
    print(f"{args.samples} paths, terminal mean {term.mean():.6g} "
          f"std {term.std():.6g}", file=sys.stderr)
    return 0


def cmd_simulate(args):
    out = _open_out(args)
    try:
        if args.kind in _SDE_FAMILIES:
            return _simulate_sde(args, out)
        kind = _KIND_ALIASES.get(args.kind)
        if kind is None:
            raise RmtFlowError(
                f"unknown kind {args.kind!r}; choose an SDE family "
                f"{sorted(_SDE_FAMILIES)} or a matrix kind "
                f"{sorted(_KIND_ALIASES)}")
        nu = int(args.nu) if kind in ("Laguerre", "Wishart", "Interp_LW") else None
        spec = MatrixProcessSpec(kind, args.n, args.seed, nu=nu, T=args.bigT)
        t = args.t if args.t is not None else (args.bigT or 1.0)
        if kind in ("Laguerre", "Wishart", "Interp_LW"):
            # rectangular kinds: dump the terminal factor matrices
            M = sample_matrices(spec, t, args.samples)
            for i in range(args.samples):
                rec = {"kind": args.kind, "seed": args.seed, "sample": i,
                       "t": t, "matrix_real": np.real(M[i]).tolist(),
                       "matrix_imag": np.imag(M[i]).tolist()}
                out.write(json.dumps(rec) + "\n")
            print(f"{args.samples} matrices, max |imag| "
                  f"{np.max(np.abs(np.imag(M))):.3g}", file=sys.stderr)
        else:
            dump_paths(out, spec, PathGrid(args.bigT or t, args.steps or 100),
                       args.samples)
            print(f"{args.samples} eigenvalue paths written", file=sys.stderr)
        return 0
    finally:
        if out is not sys.stdout:
            out.close()


# ---------------------------------------------------------------------------
# verify scenarios; each returns a list of JSON-ready report dicts


def _masked(fn):
    """Zero-extend a chamber density so grid cells outside its domain
    contribute no expected mass instead of raising."""
    def dens(p):
        try:
            return fn(p)
        except ChamberMismatch:
            return 0.0
    return dens


def _verify_hciz(args):
    defaults = {
        "A": ([-0.5, 0.8][: args.n], [0.2, 1.5][: args.n]),
        "chiral": ([0.4, 1.3][: args.n], [0.6, 1.8][: args.n]),
        "CD": ([0.4, 1.2][: args.n], [0.7, 1.5][: args.n]),
        "banana": ([-1.0, -0.2, 0.5, 1.3][: 2 * args.n], [0.0, 0.8][: args.n]),
        "DIII": ([0.2, 0.7, 1.4, 2.0][: 2 * args.n], [0.5, 1.2][: args.n]),
    }
    x, y = defaults[args.kind]
    rep = hciz_report(args.kind, x, y, args.sigma, args.samples,
                      seed=args.seed, nu=args.nu, branch=args.branch,
                      map_chunks=_map_chunks(args))
    rep["test"] = f"hciz-{rep.pop('kind')}"
    rep["n"] = rep.pop("N")
    thr = tol.ACC_MC_SIGMAS
    rep["pass"] = bool(abs(rep["zscore"]) < thr
                       or abs(rep["lhs"] - rep["rhs"]) < 1e-12)
    return [rep]


_EQUIV_PARAMS = {"C": (0.5, 1.0), "D": (-0.5, 0.0)}


def _verify_equivalence(args):
    T = args.bigT or 1.0
    t = T / 2.0
    which = args.which
    if which == "A":
        spec = SdeSpec("Dyson", args.n, PathGrid(T, args.steps or 100),
                       seed=args.seed)
        _, paths = integrate(spec, count=args.samples)
        top = paths[:, -1, -1]
        mspec = MatrixProcessSpec("GUE_H", args.n, args.seed + 1)
        lam = terminal_eigenvalues(mspec, T, args.samples)[:, -1]
        es = EnsembleSpec("GUE", args.n, T)
        if args.n == 1:
            cdf = quadrature_cdf(lambda v: density(es, [v]),
                                 -8 * math.sqrt(T), 8 * math.sqrt(T))
            return [ks_report("equivalence-A-sde", ks_test(top, cdf)),
                    ks_report("equivalence-A-matrix", ks_test(lam, cdf))]
        r = chamber_chi2(paths[:, -1, :], _masked(lambda p: density(es, p)),
                         bins=args.bins)
        r2 = chamber_chi2(terminal_eigenvalues(mspec, T, args.samples),
                          _masked(lambda p: density(es, p)), bins=args.bins)
        return [chi2_report("equivalence-A-sde", r, args.samples),
                chi2_report("equivalence-A-matrix", r2, args.samples)]
    if which in ("C", "D", "LW"):
        if which == "LW":
            nu, kappa = float(args.nu), float(args.nu) + 1.0
            kind = "Interp_LW"
            mspec = MatrixProcessSpec(kind, args.n, args.seed,
                                      nu=int(args.nu), T=T)
        else:
            nu, kappa = _EQUIV_PARAMS[which]
            kind = "Interp_" + which
            mspec = MatrixProcessSpec(kind, args.n, args.seed, T=T)
        ms = MeanderSpec(nu, kappa, T)
        lam = terminal_eigenvalues(mspec, t, args.samples)
        if args.n == 1:
            cdf = quadrature_cdf(
                lambda v: star_density(ms, 1, 0.0, 0.0, t, [v])
                if v > 0 else 0.0, 0.0, 10.0 * math.sqrt(T))
            return [ks_report(f"equivalence-{which}", ks_test(lam[:, 0], cdf))]
        r = chamber_chi2(
            lam, _masked(lambda p: star_density(ms, args.n, 0.0, 0.0, t, p)),
            bins=args.bins)
        return [chi2_report(f"equivalence-{which}", r, args.samples)]
    # banana: terminal pairwise degeneracy + distinct values vs GSE(T/2)
    mspec = MatrixProcessSpec("Banana_A", args.n, args.seed, T=T)
    lam = terminal_eigenvalues(mspec, T, args.samples)
    pairs = lam.reshape(lam.shape[0], -1, 2)
    gap = float(np.max(np.abs(pairs[:, :, 1] - pairs[:, :, 0])))
    rep = [{"test": "equivalence-banana-degeneracy", "n": args.samples,
            "statistic": gap, "pvalue": None,
            "pass": bool(gap < tol.PAIRING_TOL)}]
    distinct = pairs.mean(axis=2)
    es = EnsembleSpec("GSE", args.n, T / 2.0)
    if args.n == 1:
        cdf = quadrature_cdf(lambda v: density(es, [v]),
                             -8 * math.sqrt(T), 8 * math.sqrt(T))
        rep.append(ks_report("equivalence-banana-gse",
                             ks_test(distinct[:, 0], cdf)))
    else:
        r = chamber_chi2(distinct, _masked(lambda p: density(es, p)),
                         bins=args.bins)
        rep.append(chi2_report("equivalence-banana-gse", r, args.samples))
    return rep


def _verify_imhof(args):
    T = args.bigT or 1.0
    nu, kappa = args.nu, args.kappa
    # the 1/h^(kappa) weights amplify the near-wall region, where the
    # Euler scheme's bias decays slowly; default to a fine grid
    steps = args.steps or (12800 if args.n == 1 else 3200)
    if args.n == 1:
        spec = SdeSpec("Bessel", 1, PathGrid(T, steps),
                       seed=args.seed, nu=nu)
    else:
        spec = SdeSpec("Radial", args.n, PathGrid(T, steps),
                       seed=args.seed, gamma=(2 * nu + 1) / 2.0)
    _, paths = integrate(spec, count=args.samples)
    es = imhof_reweight(paths[:, -1, :], nu, kappa, T)
    ms = MeanderSpec(nu, kappa, T)
    reports = []
    if args.n == 1:
        cdf = quadrature_cdf(
            lambda v: star_density(ms, 1, 0.0, 0.0, T, [v]) if v > 0 else 0.0,
            0.0, 10.0 * math.sqrt(T))
        r = ks_test(es.points, cdf, weights=es.weights)
        reports.append(ks_report(f"imhof-nu{nu}-kappa{kappa}", r))
    else:
        r = chamber_chi2(
            es.points, _masked(lambda p: star_density(ms, args.n, 0.0, 0.0, T, p)),
            bins=args.bins, weights=es.weights)
        reports.append(chi2_report(f"imhof-nu{nu}-kappa{kappa}", r,
                                   args.samples))
    reports.append({"test": "imhof-ess", "n": args.samples,
                    "statistic": es.ess, "pvalue": None,
                    "pass": bool(es.ess > tol.ESS_FRACTION * args.samples)})
    return reports


def _verify_schur(args):
    reports = []
    for kind, x, y, nu in [("exp", [0.3, 0.7], [0.2, 0.9], None),
                           ("bessel", [0.3, 0.7], [0.2, 0.9], 0.5)]:
        kw = {} if nu is None else {"nu": nu}
        approx, exact, resid = expansion_check(kind, x, y,
                                              cutoff=args.cutoff, **kw)
        reports.append({"test": f"schur-{kind}", "n": args.cutoff,
                        "statistic": resid, "pvalue": None,
                        "pass": bool(resid < tol.ACC_SCHUR_RESID)})
    return reports


def _verify_selberg(args):
    v = selberg_value(args.n, args.alpha, args.gamma)
    q = selberg_quadrature(args.n, args.alpha, args.gamma)
    rel = abs(v - q) / abs(v)
    return [{"test": "selberg", "n": args.n, "closed_form": v,
             "quadrature": q, "statistic": rel, "pvalue": None,
             "pass": bool(rel < tol.ACC_SELBERG_REL)}]


def _verify_densities(args):
    t = args.t if args.t is not None else 1.0
    es = EnsembleSpec(args.tag, args.n, t,
                      nu=args.nu if args.tag.startswith("ch") else None)
    kind = {"GUE": "GUE_H", "GOE": "GOE_S", "GSE": "Xi2plus", "chGUE": "Laguerre",
            "chGOE": "Wishart", "C": "XiC", "D": "XiD", "CI": "XiCprime",
            "Dprime": "XiDprime"}[args.tag]
    nu = int(args.nu) if kind in ("Laguerre", "Wishart") else None
    mspec = MatrixProcessSpec(kind, args.n, args.seed, nu=nu)
    lam = terminal_eigenvalues(mspec, t, args.samples)
    top = lam[:, -1]
    hi = float(np.max(np.abs(lam))) * 1.5
    if args.n == 1:
        cdf = quadrature_cdf(lambda v: density(es, [v]),
                             -hi if args.tag in ("GUE", "GOE", "GSE") else 0.0,
                             hi)
        r = ks_test(top, cdf)
        return [ks_report(f"density-{args.tag}", r)]
    grid = np.linspace(-hi if args.tag in ("GUE", "GOE", "GSE") else 1e-9,
                       hi, 2001)

    def marginal(v):
        # largest-coordinate marginal by quadrature over the others
        return _top_marginal(es, grid, v)

    cdf = quadrature_cdf(marginal, grid[0], hi, npts=1024)
    return [ks_report(f"density-{args.tag}", ks_test(top, cdf))]


def _top_marginal(es, grid, v):
    if es.N != 2:
        raise RmtFlowError("top-coordinate marginal implemented for N <= 2")
    lo = grid[grid < v]
    if lo.size < 2:
        return 0.0
    vals = np.array([density(es, [u, v]) for u in lo])
    return float(np.trapezoid(vals, lo))


def _verify_asymptotics(args):
    cls = args.which
    x = np.arange(1, args.n + 1, dtype=float)
    ts = np.geomspace(1e2, 1e4, 7)
    vals = np.array([noncoll_probability(cls, t, x) for t in ts])
    slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
    psi = float(exponent_psi(cls, args.n))
    rel = abs(-slope - psi) / psi
    return [{"test": f"asymptotics-{cls}-N{args.n}", "n": args.n,
             "statistic": rel, "slope": -slope, "psi": psi, "pvalue": None,
             "pass": bool(rel < tol.ACC_PSI_REL)}]


_VERIFIERS = {"hciz": _verify_hciz, "equivalence": _verify_equivalence,
              "imhof": _verify_imhof, "schur": _verify_schur,
              "selberg": _verify_selberg, "densities": _verify_densities,
              "asymptotics": _verify_asymptotics}


def cmd_verify(args):
    reports = _VERIFIERS[args.scenario](args)
    out = _open_out(args)
    try:
        for rep in reports:
            out.write(json.dumps(rep) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0 if all(r["pass"] for r in reports) else 1


# ---------------------------------------------------------------------------
# density tables


def cmd_density(args):
    out = _open_out(args)
    T = args.bigT or 1.0
    t = args.t if args.t is not None else T / 2.0
    grid = np.linspace(args.lo, args.hi, args.points)
    try:
        _csv_row(out, ["x", "density"])
        for v in grid:
            if args.which == "q":
                es = EnsembleSpec(args.tag, 1, t,
                                  nu=args.nu if args.tag.startswith("ch") else None)
                try:
                    d = density(es, [v])
                except RmtFlowError:
                    d = 0.0
            elif args.which == "watermelon":
                d = watermelon_density("A", 1, T, t, [v])
            elif args.which == "star":
                ms = MeanderSpec(args.nu, args.kappa, T)
                d = star_density(ms, 1, 0.0, 0.0, t, [v]) if v > 0 else 0.0
            else:  # banana, marginal representation of a degenerate pair
                d = banana_density("A", 2, T, 0.0, 0.0, t, [v, v + args.eps]) \
                    if t < T else _banana_terminal(T, v)
            _csv_row(out, [float(v), float(d)])
        return 0
    finally:
        if out is not sys.stdout:
            out.close()


def _banana_terminal(T, v):
    # terminal law of the distinct value of a degenerate pair: GSE at T/2
    es = EnsembleSpec("GSE", 1, T / 2.0)
    return density(es, [v])


# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--n", type=int, default=1, help="particle count N")
    p.add_argument("--steps", type=int, default=None,
                   help="time-grid steps (default 100; imhof verify uses "
                        "a finer wall-resolving grid unless overridden)")
    p.add_argument("--bigT", type=float, default=None, help="horizon T")
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--out", "-o", default="-")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config", default=None,
                   help="JSON file of flag defaults; explicit flags win")


def build_parser():
    ap = argparse.ArgumentParser(prog="rmtflow")
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="dump paths / matrices")
    _add_common(ps)
    ps.add_argument("--kind", required=True)
    ps.add_argument("--beta", type=float, default=2.0)
    ps.add_argument("--gamma", type=float, default=0.5)
    ps.add_argument("--nu", type=float, default=0.5)
    ps.add_argument("--kappa", type=float, default=0.0)
    ps.set_defaults(func=cmd_simulate, nu_opt=None)

    pv = sub.add_parser("verify", help="run a verification scenario")
    pv.add_argument("scenario", choices=sorted(_VERIFIERS))
    _add_common(pv)
    pv.add_argument("--kind", default="A", help="hciz kind")
    pv.add_argument("--branch", choices=("C", "D"), default="C")
    pv.add_argument("--which", default="C",
                    help="equivalence member / asymptotics class")
    pv.add_argument("--tag", default="GUE", help="ensemble tag")
    pv.add_argument("--sigma", type=float, default=1.0)
    pv.add_argument("--nu", type=float, default=1.0)
    pv.add_argument("--kappa", type=float, default=1.0)
    pv.add_argument("--alpha", type=float, default=1.0)
    pv.add_argument("--gamma", type=float, default=0.5)
    pv.add_argument("--cutoff", type=int, default=12)
    pv.add_argument("--bins", type=int, default=6)
    pv.set_defaults(func=cmd_verify)

    pd = sub.add_parser("density", help="tabulate a density")
    _add_common(pd)
    pd.add_argument("--which", choices=("q", "star", "watermelon", "banana"),
                    default="q")
    pd.add_argument("--tag", default="GUE")
    pd.add_argument("--nu", type=float, default=0.5)
    pd.add_argument("--kappa", type=float, default=0.0)
    pd.add_argument("--lo", type=float, default=-5.0)
    pd.add_argument("--hi", type=float, default=5.0)
    pd.add_argument("--points", type=int, default=201)
    pd.add_argument("--eps", type=float, default=1e-6)
    pd.set_defaults(func=cmd_density)
    return ap


def _apply_config(ap, argv, args):
    if not args.config:
        return args
    with open(args.config) as fh:
        conf = json.load(fh)
    unknown = [k for k in conf if not hasattr(args, k)]
    if unknown:
        raise RmtFlowError(f"config keys not recognized: {unknown}")
    # flags explicitly present on the command line win over the file
    given = {a.lstrip("-").split("=")[0].replace("-", "_")
             for a in argv if a.startswith("--")}
    for k, v in conf.items():
        if k not in given:
            setattr(args, k, v)
    return args


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args = _apply_config(ap, argv, args)
        return args.func(args)
    except RmtFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
