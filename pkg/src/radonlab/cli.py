"""Experiment runner: one subcommand per capability, CSV outputs.

Every run is driven by an ExperimentConfig (file plus flag overrides)
and a single seed; identical config and seed produce byte-identical
CSVs. Timings go to report.log only, so the data files stay
reproducible. Exit codes: 0 success, 2 usage, 3 kernel class
violation, 4 coverage, 5 failed threshold.
"""

import argparse
import os
import sys
import time

import numpy as np

from .config import load_config
from .errors import (
    ContractionError,
    CoverageError,
    FitError,
    KernelClassError,
    RadonlabError,
    UsageError,
)
from .estimates import (
    NeumannConfig,
    bootstrap_pset,
    build_UM_RM,
    build_VM,
    decay_fit_csv,
    l2_opnorm,
    lp_opnorm_lower,
    make_B_family,
    norm_estimates_csv,
    orthogonality_decay,
    probe_function,
    sample_pairs,
    vector_valued_decay,
)
from .fields import DilationExponents, FormalDegree, GammaSpec, VectorFieldSpec, WeightedField
from .flows import ball_estimates_csv, ball_volume, doubling_ratio
from .grid import Grid, GridFunction, dump_grid_function, grid_function_csv, load_grid_function_csv
from .heisenberg import (
    dilation_covariance_check,
    heis_exponents,
    heis_fields,
    heis_gamma,
    xst_experiment,
    xst_factory,
)
from .kernels import (
    default_family,
    index_set,
    kernel_manifest,
    make_bump,
    make_delta0_family,
    parse_kernel_manifest,
    product_estimate_check,
    synth_kernel,
)
from .operators import (
    CutoffChain,
    LinearOperatorHandle,
    OperatorFactory,
    build_gamma_hat,
    default_delta_grid,
)
from .poly import Poly
from .util import rng_for, sobol_points, write_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_KERNEL = 3
EXIT_COVERAGE = 4
EXIT_THRESHOLD = 5


# -- scenario assembly -------------------------------------------------------


def unit_degree(nu, mu):
    return tuple(1 if i == mu else 0 for i in range(nu))


def coordinate_field(n, k):
    polys = [Poly.constant(n, 1.0 if i == k else 0.0) for i in range(n)]
    return VectorFieldSpec.from_polys(polys, label="d/dx%d" % (k + 1))


def zero_field(n):
    polys = [Poly.constant(n, 0.0) for _ in range(n)]
    return VectorFieldSpec.from_polys(polys, label="zero")


def scenario_setup(cfg):
    """Weighted fields, dilation exponents, and the family map for a scenario."""
    n, nu = cfg.n, cfg.nu
    name = cfg.gamma
    if name == "trivial":
        fields = [WeightedField(zero_field(n), unit_degree(nu, mu)) for mu in range(nu)]
        e = DilationExponents([unit_degree(nu, mu) for mu in range(nu)])
        gamma = GammaSpec(nu, n, lambda t, x: np.array(x, dtype=float, copy=True), label="trivial")
        return fields, e, gamma
    if name == "translation":
        if nu > n:
            raise UsageError("translation scenario needs nu <= n")
        fields = [WeightedField(coordinate_field(n, mu), unit_degree(nu, mu)) for mu in range(nu)]
        e = DilationExponents([unit_degree(nu, mu) for mu in range(nu)])

        def evaluator(t, x):
            out = np.array(x, dtype=float, copy=True)
            out[..., :nu] += t
            return out

        return fields, e, GammaSpec(nu, n, evaluator, label="translation")
    if name in ("heisenberg", "exp-list"):
        if n != 3:
            raise UsageError("heisenberg scenarios need a 3-d grid")
        if nu not in (2, 3):
            raise UsageError("heisenberg scenarios support nu = 2 or 3")
        strong = nu == 3
        fields = list(heis_fields(strong=strong))
        e = heis_exponents(strong)
        if name == "heisenberg":
            gamma = heis_gamma()
        else:
            gamma = build_gamma_hat([wf.field for wf in fields], label="exp-list")
        return fields, e, gamma
    if name == "xst":
        raise UsageError("the xst scenario is assembled through its own factory")
    raise UsageError("unknown gamma %r" % name)


def build_factory(cfg, P=None):
    grid = Grid(cfg.n, cfg.L, P or cfg.grid_P)
    if cfg.scenario == "xst":
        return xst_factory(grid, a=cfg.a, t_nodes=cfg.t_nodes)
    fields, e, gamma = scenario_setup(cfg)
    return OperatorFactory(
        grid,
        CutoffChain(grid),
        fields,
        e,
        gamma=gamma,
        a=cfg.a,
        t_nodes=cfg.t_nodes,
        grouping=cfg.grouping,
    )


def build_kernel(cfg, factory):
    """Kernel from the manifest parameters if given, else synthesized."""
    e, mu0, J, a = factory.e, cfg.mu0, cfg.J, cfg.a
    if cfg.manifest:
        with open(cfg.manifest, encoding="utf-8") as fh:
            head = parse_kernel_manifest(fh.read())
        e = DilationExponents([FormalDegree.loads(r) for r in head["e"]])
        mu0, J, a = head["mu0"], head["J"], head["a"]
    if cfg.kernel_profile == "delta0":
        if mu0 != e.nu:
            raise UsageError("delta0 kernels need the product index set (mu0 = nu)")
        phis = [make_bump("poly4", 1, a) for _ in range(e.nu)]
        return make_delta0_family(phis, J, a)
    return synth_kernel(default_family(e, a, mu0, cfg.seed), mu0, e.nu, J, e, a)


def gaussian_probe(grid, seed, index=1):
    return GridFunction(grid, probe_function(grid, rng_for(seed, index), "gauss"))


def probe_set(grid, count, seed):
    return [GridFunction(grid, probe_function(grid, rng_for(seed, 100 + i))) for i in range(count)]


# -- run report --------------------------------------------------------------


class RunReport:
    """Named checks with pass/fail/info status; one record per check."""

    def __init__(self):
        self.records = []
        self._names = set()

    def add(self, name, status, measured, threshold, runtime=0.0):
        if name in self._names:
            raise ValueError("duplicate check name %r" % name)
        self._names.add(name)
        self.records.append(
            {
                "name": name,
                "status": status,
                "measured": measured,
                "threshold": threshold,
                "runtime": runtime,
            }
        )

    @property
    def failures(self):
        return [r for r in self.records if r["status"] == "fail"]

    def write(self, out_dir):
        rows = [[r["name"], r["status"], r["measured"], r["threshold"]] for r in self.records]
        write_csv(
            os.path.join(out_dir, "report.csv"),
            ["name", "status", "measured", "threshold"],
            rows,
        )
        with open(os.path.join(out_dir, "report.log"), "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(
                    "%s: %s measured=%.17g threshold=%.17g runtime=%.3fs\n"
                    % (r["name"], r["status"], r["measured"], r["threshold"], r["runtime"])
                )

    def echo(self):
        for r in self.records:
            print(
                "%-28s %-4s measured=%.6g threshold=%.6g"
                % (r["name"], r["status"], r["measured"], r["threshold"])
            )


def ensure_out(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


# -- subcommands -------------------------------------------------------------


def cmd_ball(cfg):
    out = ensure_out(cfg)
    fields, _, _ = scenario_setup(cfg)
    x0 = np.zeros(cfg.n)
    deltas = [(s,) * cfg.nu for s in (1.0, 0.5, 0.25)]
    estimates = [ball_volume(fields, d, x0, cfg.samples, cfg.seed) for d in deltas]
    ball_estimates_csv(estimates, os.path.join(out, "ball.csv"))
    ratio, predicted, est1, est2 = doubling_ratio(fields, deltas[1], x0, cfg.samples, cfg.seed)
    write_csv(
        os.path.join(out, "doubling.csv"),
        ["delta", "ratio", "predicted", "relative_error", "samples", "seed"],
        [[deltas[1][0], ratio, predicted, abs(ratio / predicted - 1.0), cfg.samples, cfg.seed]],
    )
    failed = False
    tol = cfg.tol["ball_ratio"]
    for est in estimates:
        ok = abs(est.ratio - 1.0) <= tol if cfg.gamma == "translation" else est.ratio > 0
        print("ball delta=%s volume=%.6g ratio=%.4f %s" % (est.delta, est.volume, est.ratio, "ok" if ok else "FAIL"))
        failed = failed or not ok
    ok = abs(ratio / predicted - 1.0) <= cfg.tol["doubling"]
    print("doubling ratio=%.4f predicted=%.4f %s" % (ratio, predicted, "ok" if ok else "FAIL"))
    return EXIT_THRESHOLD if failed or not ok else EXIT_OK


def cmd_kernel(cfg):
    out = ensure_out(cfg)
    factory = build_factory(cfg)
    kernel = build_kernel(cfg, factory)
    kernel_manifest(kernel, os.path.join(out, "kernel_manifest.txt"))
    rows = []
    if kernel.mu0 == kernel.nu:
        samples = sobol_points(64, kernel.N, cfg.a) + 1e-3
        for order in range(3):
            worst = product_estimate_check(kernel, order, samples)
            rows.append([order, worst])
    write_csv(os.path.join(out, "kernel_checks.csv"), ["order", "worst_constant"], rows)
    print(
        "kernel ok: %d pieces, J=%d, mu0=%d, nu=%d"
        % (len(kernel.indices), kernel.J, kernel.mu0, kernel.nu)
    )
    return EXIT_OK


def cmd_apply(cfg, op_name, index_text, input_path):
    out = ensure_out(cfg)
    factory = build_factory(cfg)
    grid = factory.grid
    if index_text:
        j = tuple(int(c) for c in index_text.split(","))
    else:
        j = (0,) * cfg.nu
    if len(j) != cfg.nu:
        raise UsageError("index needs %d components" % cfg.nu)
    if input_path:
        with open(input_path, encoding="utf-8") as fh:
            f = load_grid_function_csv(fh.read(), cfg.L)
        if not f.grid.same_as(grid):
            raise UsageError("input grid does not match the configured grid")
    else:
        f = gaussian_probe(grid, cfg.seed)
    if op_name == "T":
        handle = factory.T_full(build_kernel(cfg, factory))
    elif op_name == "D":
        handle = factory.D_full(j)
    elif op_name == "B":
        handle = factory.B_handle(j, cfg.mu0)
    elif op_name == "S":
        handle = factory.S_handle(0, j[0])
    elif op_name == "UM":
        handle, _, _ = build_UM_RM(
            factory, cfg.M, index_set(cfg.mu0, cfg.nu, cfg.J), measure_discrepancy=False
        )
    else:
        raise UsageError("unknown operator %r" % op_name)
    g = handle.apply(f)
    grid_function_csv(g, os.path.join(out, "apply_output.csv"))
    dump_grid_function(g, os.path.join(out, "apply_output.bin"))
    print("applied %s: output l2 norm %.6g" % (op_name, g.lp_norm(2)))
    return EXIT_OK


def cmd_norms(cfg):
    out = ensure_out(cfg)
    report = RunReport()
    factory = build_factory(cfg)
    kernel = build_kernel(cfg, factory)
    indices = index_set(cfg.mu0, cfg.nu, cfg.J)
    seps = list(range(1, cfg.J + 1))
    fits = []
    for mode in ("DD*", "D*D", "BD", "TD"):
        t0 = time.perf_counter()
        pairs = sample_pairs(indices, seps, per_group=3, seed=cfg.seed)
        if mode == "TD":
            pairs = [(j, k, j) for j, k in pairs]
        try:
            fit = orthogonality_decay(
                factory, mode, pairs, p=2, seed=cfg.seed, kernel=kernel, mu0=cfg.mu0
            )
            fits.append(fit)
            status = "info" if fit.zero_family else ("pass" if fit.eps > 0 else "fail")
            report.add("decay-%s" % mode, status, fit.eps, 0.0, time.perf_counter() - t0)
        except FitError as exc:
            report.add("decay-%s" % mode, "info", 0.0, 0.0, time.perf_counter() - t0)
            print("decay %s: %s" % (mode, exc))
    decay_fit_csv(fits, os.path.join(out, "decay_fits.csv"))

    t0 = time.perf_counter()
    shifts = [((s, 0) if cfg.nu == 2 else (s,) + (0,) * (cfg.nu - 1)) for s in range(3)]
    bk_fit = vector_valued_decay(
        lambda k: make_B_family(factory, indices, k, cfg.mu0),
        shifts,
        factory.grid,
        p=2,
        trials=4,
        seed=cfg.seed,
        mode="BD-seq",
    )
    report.add("decay-BD-seq", "info", bk_fit.eps, 0.0, time.perf_counter() - t0)
    decay_fit_csv([bk_fit], os.path.join(out, "decay_fits_seq.csv"))

    # the cutoff identity needs every scale combination, so the
    # near-diagonal calculus runs on the full product set even when
    # the kernel class is a proper chain
    product_indices = index_set(cfg.nu, cfg.nu, cfg.J)
    rm_rows = []
    boundary = None
    t0 = time.perf_counter()
    for M in range(1, max(cfg.M, 1) + 1):
        U, R, disc = build_UM_RM(
            factory, M, product_indices, measure_discrepancy=(M == 1), seed=cfg.seed
        )
        if disc is not None:
            boundary = disc.value
        est = l2_opnorm(R, tol=cfg.tol["power"], seed=cfg.seed, label="R[M=%d]" % M)
        rm_rows.append([M, est.value, est.iters, est.residual, boundary])
    write_csv(
        os.path.join(out, "rm_series.csv"),
        ["M", "norm", "iters", "residual", "boundary"],
        rm_rows,
    )
    report.add("rm-final", "info", rm_rows[-1][1], rm_rows[0][1], time.perf_counter() - t0)

    psi = factory.chain.psim3.values
    t0 = time.perf_counter()
    c_est = l2_opnorm(
        R @ LinearOperatorHandle.multiplication(factory.grid, psi),
        tol=cfg.tol["power"],
        seed=cfg.seed,
        label="R psi",
    )
    estimates = [c_est]
    status = EXIT_OK
    if c_est.value < 1.0:
        ncfg = NeumannConfig(cfg.M, cfg.m_max, contraction=c_est.value)
        V = build_VM(ncfg, R, psi)
        psim2 = factory.chain.psim2.values
        worst = 0.0
        for f in probe_set(factory.grid, cfg.probe_count, cfg.seed):
            lhs = psim2 * f.values - psim2 * U(V(f.values))
            res = float(np.linalg.norm(lhs)) * factory.grid.cell_volume() ** 0.5
            bound = ncfg.tail_bound * f.lp_norm(2) + (boundary or 0.0) * f.lp_norm(2)
            worst = max(worst, res / max(bound, 1e-300))
        ok = worst <= 1.0 + 1e-9
        report.add("reproducing", "pass" if ok else "fail", worst, 1.0, time.perf_counter() - t0)
        if not ok:
            status = EXIT_THRESHOLD
    else:
        report.add("reproducing", "fail", c_est.value, 1.0, time.perf_counter() - t0)
        status = EXIT_THRESHOLD
    for p in cfg.p_list:
        if p == 2:
            continue
        est = lp_opnorm_lower(factory.D_full((0,) * cfg.nu), float(p), cfg.trials, cfg.seed, "D0")
        estimates.append(est)
    norm_estimates_csv(estimates, os.path.join(out, "norms.csv"))
    report.write(out)
    report.echo()
    return EXIT_THRESHOLD if status != EXIT_OK or report.failures else EXIT_OK


def cmd_maximal(cfg):
    out = ensure_out(cfg)
    factory = build_factory(cfg)
    grid = factory.grid
    rows = []
    if cfg.scenario == "xst":
        result = xst_experiment(
            grid, list(range(1, cfg.J + 1)), p=2, a=cfg.a, trials=cfg.trials, seed=cfg.seed,
            t_nodes=cfg.t_nodes,
        )
        write_csv(
            os.path.join(out, "norm_series.csv"),
            ["J", "maximal_ratio", "tnorm", "tnorm_iters"],
            [[r["J"], r["maximal_ratio"], r["tnorm"], r["tnorm_iters"]] for r in result["rows"]],
        )
        slope = result["maximal_slope"]
        ok = slope <= cfg.tol["maximal_slope"]
        print("xst maximal slope %.4f %s" % (slope, "ok" if ok else "FAIL"))
        write_csv(
            os.path.join(out, "maximal_ratios.csv"),
            ["probe", "ratio"],
            [[i, r["maximal_ratio"]] for i, r in enumerate(result["rows"])],
        )
        return EXIT_OK if ok else EXIT_THRESHOLD
    # 3-d scenarios get a shallower scale grid and fewer probes; the
    # per-delta quadrature sweep dominates the cost there.
    depth = 1 if cfg.n >= 3 else min(cfg.J, 3)
    count = min(cfg.probe_count, 3) if cfg.n >= 3 else cfg.probe_count
    deltas = default_delta_grid(factory.e, depth, cfg.mu0)
    for i, f in enumerate(probe_set(grid, count, cfg.seed)):
        m = factory.maximal(f, deltas)
        denom = f.lp_norm(2)
        rows.append([i, m.lp_norm(2) / denom if denom > 0 else 0.0, float(np.min(m.values))])
    write_csv(os.path.join(out, "maximal_ratios.csv"), ["probe", "ratio", "min_value"], rows)
    if cfg.scenario == "heisenberg":
        cov_rows = covariance_rows(cfg)
        write_csv(
            os.path.join(out, "covariance.csv"),
            ["r", "p", "ncap", "P", "discrepancy", "budget"],
            cov_rows,
        )
    print("maximal ratios written for %d probes" % len(rows))
    return EXIT_OK


def covariance_rows(cfg, ncap=0.4):
    grid = Grid(3, cfg.L, cfg.grid_P)
    f = heis_covariance_probe(grid)
    rows = []
    for r in (1.0, 2.0):
        grid_r = Grid(3, cfg.L / r, cfg.grid_P) if r != 1.0 else grid
        d, budget = dilation_covariance_check(
            f, r, 2.0, ncap, (grid, grid_r), kmax=1, nodes_per_axis=8
        )
        rows.append([r, 2.0, ncap, cfg.grid_P, d, budget])
    return rows


def heis_covariance_probe(grid):
    # The t-width is wider than the spatial widths so the dilate, whose
    # t-profile contracts by r^2, stays resolved on the coarser grid.
    pts = grid.points()
    width = np.array([0.20, 0.20, 0.32]) * grid.L
    vals = np.exp(-np.sum((pts / width) ** 2 / 2.0, axis=1))
    return GridFunction(grid, vals)


def cmd_heisenberg(cfg):
    out = ensure_out(cfg)
    if cfg.n != 3:
        raise UsageError("the heisenberg command needs a 3-d grid")
    rows = covariance_rows(cfg)
    write_csv(
        os.path.join(out, "covariance.csv"),
        ["r", "p", "ncap", "P", "discrepancy", "budget"],
        rows,
    )
    xcfg_grid = Grid(1, cfg.L, max(cfg.grid_P, 64))
    result = xst_experiment(xcfg_grid, list(range(1, min(cfg.J, 4) + 1)), seed=cfg.seed)
    write_csv(
        os.path.join(out, "norm_series.csv"),
        ["J", "maximal_ratio", "tnorm", "tnorm_iters"],
        [[r["J"], r["maximal_ratio"], r["tnorm"], r["tnorm_iters"]] for r in result["rows"]],
    )
    print("covariance discrepancies: %s" % ", ".join("%.3g" % r[4] for r in rows))
    return EXIT_OK


def cmd_report(cfg):
    out = ensure_out(cfg)
    report = RunReport()
    checks = cfg.checks or ["ball", "doubling", "kernel", "telescoping", "adjoint", "bootstrap"]
    for name in checks:
        t0 = time.perf_counter()
        fn = REPORT_CHECKS.get(name)
        if fn is None:
            raise UsageError("unknown check %r" % name)
        measured, threshold, ok = fn(cfg)
        report.add(name, "pass" if ok else "fail", measured, threshold, time.perf_counter() - t0)
    report.write(out)
    report.echo()
    return EXIT_THRESHOLD if report.failures else EXIT_OK


# Check implementations double as the documented acceptance criteria;
# the test suite runs the full versions, these are the fast spot runs.


def check_ball(cfg):
    fields = [WeightedField(coordinate_field(2, k), unit_degree(2, k)) for k in range(2)]
    est = ball_volume(fields, (0.5, 0.5), np.zeros(2), cfg.samples, cfg.seed)
    target = np.pi / 4.0
    return est.volume, target, abs(est.volume - target) <= 0.05 * target


def check_doubling(cfg):
    fields = [WeightedField(coordinate_field(2, k), unit_degree(2, k)) for k in range(2)]
    ratio, predicted, _, _ = doubling_ratio(fields, (0.5, 0.5), np.zeros(2), cfg.samples, cfg.seed)
    return ratio, predicted, abs(ratio / predicted - 1.0) <= 0.10


def check_kernel(cfg):
    factory = build_factory(cfg)
    kernel = build_kernel(cfg, factory)
    worst = 0.0
    for j in kernel.indices:
        piece = kernel.pieces[j]
        lam = [2.0 ** sum(float(jm) * float(c) for jm, c in zip(j, row.components)) for row in kernel.e.rows]
        worst = max(worst, abs(piece.dilated(lam).integral() - piece.integral()))
    return worst, 1e-8, worst <= 1e-8


def check_telescoping(cfg):
    grid = Grid(1, 4.0, 64)
    factory = OperatorFactory(
        grid,
        CutoffChain(grid),
        [WeightedField(coordinate_field(1, 0), (1,))],
        DilationExponents(((1,),)),
        gamma=GammaSpec(1, 1, lambda t, x: x + t, label="translation"),
        a=cfg.a,
        t_nodes=16,
    )
    f = gaussian_probe(grid, cfg.seed)
    total = None
    for j in range(5):
        out = factory.D_handle(0, j)(f.values)
        total = out if total is None else total + out
    direct = factory.S_handle(0, 4)(f.values)
    worst = float(np.max(np.abs(total - direct)))
    return worst, 1e-6, worst <= 1e-6


def check_adjoint(cfg):
    factory = build_factory(cfg)
    handle = factory.D_full((0,) * cfg.nu)
    worst = 0.0
    for i in range(5):
        rng = rng_for(cfg.seed, 600 + i)
        f = rng.standard_normal(factory.grid.size)
        g = rng.standard_normal(factory.grid.size)
        lhs = float(np.dot(handle(f), g))
        rhs = float(np.dot(f, handle.T(g)))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(f) * np.linalg.norm(g)))
    return worst, cfg.tol["adjoint"], worst <= cfg.tol["adjoint"]


def check_bootstrap(cfg):
    qs = bootstrap_pset(2, 6)
    worst = 0.0
    expected = [2.0, 4.0 / 3.0, 8.0 / 7.0, 16.0 / 15.0, 32.0 / 31.0, 64.0 / 63.0, 128.0 / 127.0]
    for q, ref in zip(qs, expected):
        worst = max(worst, abs(float(q) - ref))
    return worst, 1e-15, worst <= 1e-15


REPORT_CHECKS = {
    "ball": check_ball,
    "doubling": check_doubling,
    "kernel": check_kernel,
    "telescoping": check_telescoping,
    "adjoint": check_adjoint,
    "bootstrap": check_bootstrap,
}


# -- entry point -------------------------------------------------------------


def add_common(sub):
    sub.add_argument("--config", default=None, help="experiment config file")
    sub.add_argument("--seed", type=int, default=None, help="run seed")
    sub.add_argument("--jobs", type=int, default=None, help="worker count")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--refine", type=int, default=None, help="grid refinement factor")


def build_parser():
    parser = argparse.ArgumentParser(prog="radonlab", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("ball", "kernel", "norms", "maximal", "heisenberg", "report"):
        add_common(subs.add_parser(name))
    ap = subs.add_parser("apply")
    add_common(ap)
    ap.add_argument("--op", default="D", help="operator: T, D, B, S, or UM")
    ap.add_argument("--index", default="", help="scale index, comma separated")
    ap.add_argument("--input", default="", help="grid function CSV to read")
    return parser


def dispatch(args):
    overrides = {
        "run": {
            "seed": args.seed,
            "jobs": args.jobs,
            "out": args.out,
            "refine": args.refine,
        }
    }
    cfg = load_config(args.config, overrides)
    if args.command == "ball":
        return cmd_ball(cfg)
    if args.command == "kernel":
        return cmd_kernel(cfg)
    if args.command == "apply":
        return cmd_apply(cfg, args.op, args.index, args.input)
    if args.command == "norms":
        return cmd_norms(cfg)
    if args.command == "maximal":
        return cmd_maximal(cfg)
    if args.command == "heisenberg":
        return cmd_heisenberg(cfg)
    if args.command == "report":
        return cmd_report(cfg)
    raise UsageError("unknown command %r" % args.command)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return dispatch(args)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except KernelClassError as exc:
        print(
            "kernel class violation at index %s, group %s: %s" % (exc.index, exc.group, exc),
            file=sys.stderr,
        )
        return EXIT_KERNEL
    except CoverageError as exc:
        print("coverage failure at %s (%s): %s" % (exc.point, exc.where, exc), file=sys.stderr)
        return EXIT_COVERAGE
    except ContractionError as exc:
        print("contraction failure (measured %s): %s" % (exc.measured, exc), file=sys.stderr)
        return EXIT_THRESHOLD
    except FitError as exc:
        print("fit failure: %s" % exc, file=sys.stderr)
        return EXIT_THRESHOLD
    except RadonlabError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_THRESHOLD


if __name__ == "__main__":
    sys.exit(main())
