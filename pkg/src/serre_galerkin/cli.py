"""``serre-bench``: command-line driver for the convergence and Picard studies.

Every subcommand writes a CSV (header row plus ``#`` comment rows carrying the
git revision and the resolved configuration, closed by a ``# STATUS`` line).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np

from .functions import TrigPoly
from .manufactured import ManufacturedProblem, SelfCheckError
from .picard import consistency_residual, iterate_error, l2_h1_norms, run_picard
from .quasiinterp import derive_mask, probe_product, probe_superconvergence, quasi_interpolate
from .rates import ConvergenceReport, spline_errors, superconvergence_order
from .serre import SolverConfig, simulate
from .splines import SplineSpace

logger = logging.getLogger("serre_galerkin.cli")

QI_TARGET = TrigPoly(((1.0, 1, 0.0), (0.3, 2, np.pi / 2)))  # sin 2pi x + 0.3 cos 4pi x
QI_WEIGHT = TrigPoly(((1.0, 1, np.pi / 2),), const=2.0)  # 2 + cos 2pi x


class UsageError(ValueError):
    pass


def _git_hash() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else f"{float(v):.10e}"
    return str(v)


class CsvOut:
    """Buffered CSV output with ``#`` comment rows around the data."""

    def __init__(self, args, header):
        self.header = list(header)
        self.pre = [["# git", _git_hash()]]
        self.pre += [["# config", f"{k}={_fmt(v)}"] for k, v in sorted(vars(args).items()) if k != "func"]
        self.rows: list = []
        self.post: list = []
        self.status = "fail"

    def row(self, *values):
        self.rows.append([_fmt(v) for v in values])

    def note(self, *values):
        self.post.append(["# " + str(values[0])] + [_fmt(v) for v in values[1:]])

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerows(self.pre)
        w.writerow(self.header)
        w.writerows(self.rows)
        w.writerows(self.post)
        w.writerow([f"# STATUS {self.status}"])
        return buf.getvalue()


def _meshes(text: str) -> list[int]:
    try:
        vals = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"mesh list must be comma-separated integers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("mesh list is empty")
    return vals


def _ints(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")


def _floats(text: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("list is empty")
    return vals


def _spaces(args) -> list[SplineSpace]:
    Ns = sorted(set(args.meshes))
    try:
        return [SplineSpace(args.r, N) for N in Ns]
    except ValueError as exc:
        raise UsageError(str(exc))


def _problem(args) -> ManufacturedProblem:
    try:
        mp = ManufacturedProblem(args.a, args.b)
    except ValueError as exc:
        raise UsageError(str(exc))
    mp.self_check(seed=args.seed)
    return mp


def _c0(args, mp: ManufacturedProblem) -> float:
    return mp.c0 if args.c0 is None else args.c0


def _cfg(args, sp: SplineSpace, c0: float, forcing=None) -> SolverConfig:
    return SolverConfig(c0=c0, dt=args.dt_scale * sp.h, t_end=args.t_end, forcing=forcing)


# ---------------------------------------------------------------- commands


def cmd_qi_probe(args) -> CsvOut:
    nus, kappas = args.nu, args.kappa
    if len(nus) != len(kappas):
        raise UsageError("--nu and --kappa lists must have equal length")
    if any(n < 0 or k < 0 or n + k > args.r - 1 for n, k in zip(nus, kappas)):
        raise UsageError(f"need nu, kappa >= 0 and nu + kappa <= r - 1 = {args.r - 1}")
    spaces = _spaces(args)
    mask = derive_mask(args.r, args.degree)
    out = CsvOut(args, ["r", "N", "nu", "kappa", "max_b", "max_beta", "qh_l2_err"])
    qh = []
    per_pair = {p: ([], []) for p in zip(nus, kappas)}
    for sp in spaces:
        qh_err = spline_errors(quasi_interpolate(sp, lambda x: QI_TARGET(x), mask), QI_TARGET)[0]
        qh.append(qh_err)
        for nu, kappa in per_pair:
            b = probe_superconvergence(sp, mask, QI_TARGET, nu, kappa)
            beta = probe_product(sp, mask, QI_WEIGHT, QI_TARGET, nu, kappa)
            per_pair[(nu, kappa)][0].append(b)
            per_pair[(nu, kappa)][1].append(beta)
            out.row(args.r, sp.N, nu, kappa, b, beta, qh_err)
    Ns = [sp.N for sp in spaces]
    rep = ConvergenceReport(Ns, expected={"qh_l2_err": args.r - 0.25}, upper={"qh_l2_err": args.r + 0.5})
    rep.add("qh_l2_err", qh)
    for (nu, kappa), (bs, betas) in per_pair.items():
        rep.add(f"max_b[{nu},{kappa}]", bs)
        rep.add(f"max_beta[{nu},{kappa}]", betas)
        if args.r >= 3 and mask.degree >= 2 * args.r - 2:
            order = superconvergence_order(args.r, nu, kappa)
            rep.expected[f"max_b[{nu},{kappa}]"] = order - 0.5
            rep.expected[f"max_beta[{nu},{kappa}]"] = order - 0.5
    _summarize(out, rep)
    return out


def _summarize(out: CsvOut, rep: ConvergenceReport) -> None:
    rep.fit()
    for name in rep.errors:
        out.note("slope", name, rep.slopes.get(name), rep.residuals.get(name), rep.expected.get(name))
    status = rep.status
    if status == "insufficient-levels":
        out.note("status", "insufficient-levels")
        status = "degenerate"
    out.status = status


def cmd_converge(args) -> CsvOut:
    mp = _problem(args)
    spaces = _spaces(args)
    c0 = _c0(args, mp)
    r = args.r
    cols = ["N", "h", "eta_l2", "u_l2", "u_h1"]
    if args.mode == "picard":
        cols += ["theta", "xi", "theta_t", "xi_t", "last_delta"]
    out = CsvOut(args, cols + ["min_depth", "status"])
    errs: dict = {c: [] for c in cols[2:]}
    for sp in spaces:
        cfg = _cfg(args, sp, c0, mp.forcing)
        T = args.t_end
        row = {}
        if args.mode == "direct":
            res = simulate(sp, mp.initial(), cfg)
            status = "ok" if res.violation is None else "positivity-violation"
            eta, u, depth = res.final.eta, res.final.u, float(res.min_depth.min())
        else:
            rep, traj = run_picard(sp, mp.initial(), args.iters, cfg)
            status = rep.status
            depth = min(rep.min_depths) if rep.min_depths else float("nan")
            st = traj.state(traj.K)
            eta, u = st.eta, st.u
            e = iterate_error(traj, mp)
            row.update(theta=e.theta, xi=e.xi, theta_t=e.theta_t, xi_t=e.xi_t,
                       last_delta=rep.deltas[-1] if rep.deltas else float("nan"))
        if status == "ok":
            row["eta_l2"] = spline_errors(eta, lambda x, d: mp.eta(x, T, d))[0]
            ul2, uh1 = spline_errors(u, lambda x, d: mp.u(x, T, d))
            row.update(u_l2=ul2, u_h1=uh1)
        for c in cols[2:]:
            errs[c].append(row.get(c, float("nan")))
        out.row(sp.N, sp.h, *[row.get(c, float("nan")) for c in cols[2:]], depth, status)
    Ns = [sp.N for sp in spaces]
    rep = ConvergenceReport(Ns)
    if args.mode == "direct":
        rep.add("eta_l2", errs["eta_l2"])
        rep.add("u_h1", errs["u_h1"])
        rep.expected = {"eta_l2": r - 0.4, "u_h1": r - 1 - 0.4}
    else:
        rep.add("theta+xi", np.add(errs["theta"], errs["xi"]))
        rep.add("theta_t+xi_t", np.add(errs["theta_t"], errs["xi_t"]))
        rep.expected = {"theta+xi": 2 * r - 3 - 0.5, "theta_t+xi_t": 2 * r - 4 - 0.5}
    _summarize(out, rep)
    return out


def _initial_data(a: float, b: float):
    return (lambda x: 1.0 + a * np.sin(2 * np.pi * x), lambda x: b * np.sin(2 * np.pi * x))


def _single_space(args) -> SplineSpace:
    if len(args.meshes) != 1:
        raise UsageError("this command takes a single mesh (e.g. --meshes 32)")
    return _spaces(args)[0]


def cmd_picard(args) -> CsvOut:
    sp = _single_space(args)
    if args.forced:
        mp = _problem(args)
        init, forcing, c0 = mp.initial(), mp.forcing, _c0(args, mp)
    else:
        init, forcing = _initial_data(args.a, args.b), None
        c0 = (1.0 - args.a) if args.c0 is None else args.c0
    cfg = _cfg(args, sp, c0, forcing)
    rep, traj = run_picard(sp, init, args.iters, cfg)
    out = CsvOut(args, ["n", "sup_delta", "alpha_n", "min_depth", "status"])
    for n, d, a, m in rep.rows():
        out.row(n + 1, d, a, m, rep.status)
    if rep.violation is not None:
        out.note("violation", *[f"{k}={v}" for k, v in rep.violation.items()])
    direct = simulate(sp, init, cfg)
    if direct.violation is None and rep.violation is None:
        de, _ = l2_h1_norms(sp, direct.final.eta.coeffs - traj.eta[-1])
        _, du = l2_h1_norms(sp, direct.final.u.coeffs - traj.u[-1])
        out.row("direct", float(np.hypot(de[0], du[0])), None, float(direct.min_depth.min()), "limit-vs-direct")
    d = np.asarray(rep.deltas)
    if len(d) and np.all(d <= 1e-12):
        out.status = "degenerate"
    else:
        alphas = [a for a in rep.alphas[1:] if a is not None]
        decreasing = bool(np.all(np.diff(d[1:]) < 0)) if len(d) > 2 else True
        ok = rep.status == "ok" and all(a < 1 for a in alphas) and decreasing
        out.status = "pass" if ok else "fail"
    return out


def cmd_residual(args) -> CsvOut:
    mp = _problem(args)
    spaces = _spaces(args)
    r = args.r
    out = CsvOut(args, ["N", "t", "psi_l2", "delta_l2"])
    psi, dl = [], []
    for sp in spaces:
        vals = []
        for t in args.times:
            p, d = consistency_residual(sp, None, mp, t, mp.forcing)
            vals.append((p, d))
            out.row(sp.N, t, p, d)
        psi.append(max(v[0] for v in vals))
        dl.append(max(v[1] for v in vals))
    rep = ConvergenceReport([sp.N for sp in spaces], degenerate_tol=1e-12)
    rep.add("psi_l2", psi)
    rep.add("delta_l2", dl)
    rep.expected = {"psi_l2": 2 * r - 3 - 0.5, "delta_l2": 2 * r - 3 - 0.5}
    _summarize(out, rep)
    s = rep.slopes.get("psi_l2")
    if s is not None and not s >= 2 * r - 1 - 0.5:
        out.note("flag", "psi slope below the sharper 2r-1 rate")
    return out


def cmd_simulate(args) -> CsvOut:
    sp = _single_space(args)
    if args.forced:
        mp = _problem(args)
        init, forcing, c0 = mp.initial(), mp.forcing, _c0(args, mp)
    else:
        init, forcing = _initial_data(args.a, args.b), None
        c0 = (1.0 - args.a) if args.c0 is None else args.c0
    cfg = _cfg(args, sp, c0, forcing)
    res = simulate(sp, init, cfg)
    out = CsvOut(args, ["step", "t", "min_depth", "energy", "mass"])
    for k, (t, m, e, ms) in enumerate(zip(res.times, res.min_depth, res.energy, res.mass)):
        out.row(k, t, m, e, ms)
    drift = float(np.max(np.abs(res.mass - res.mass[0])))
    out.note("mass_drift", drift)
    if res.violation is not None:
        out.note("violation", *[f"{k}={v}" for k, v in res.violation.items()])
    ok = res.violation is None and (forcing is not None or drift <= 1e-10)
    out.status = "pass" if ok else "fail"
    return out


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser, meshes=(16, 32, 64, 128), t_end: float = 0.2) -> None:
    p.add_argument("--r", type=int, default=3, help="spline order (degree r-1)")
    p.add_argument("--meshes", type=_meshes, default=list(meshes), help="comma list of N")
    p.add_argument("--t-end", type=float, default=t_end, help="final time")
    p.add_argument("--dt-scale", type=float, default=0.1, help="dt = dt_scale * h")
    p.add_argument("--c0", type=float, default=None, help="depth constant (default 1 - a)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None, help="CSV path (default stdout)")
    p.add_argument("--mode", choices=("direct", "picard"), default="direct")
    p.add_argument("--a", type=float, default=0.1, help="depth amplitude")
    p.add_argument("--b", type=float, default=0.1, help="velocity amplitude")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="serre-bench", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("qi-probe", help="quasiinterpolant accuracy and superconvergence")
    _add_common(q)
    q.add_argument("--nu", type=_ints, default=[0])
    q.add_argument("--kappa", type=_ints, default=[0])
    q.add_argument("--degree", type=int, default=None, help="mask symbol degree (default 2r-2)")
    q.set_defaults(func=cmd_qi_probe)

    c = sub.add_parser("converge", help="manufactured-solution convergence study")
    _add_common(c)
    c.add_argument("--iters", type=int, default=8, help="Picard iterations (picard mode)")
    c.set_defaults(func=cmd_converge)

    pc = sub.add_parser("picard", help="Picard contraction diagnostics")
    _add_common(pc, meshes=(32,), t_end=0.1)
    pc.add_argument("--iters", type=int, default=8)
    pc.add_argument("--forced", action="store_true", help="use the manufactured problem and forcing")
    pc.set_defaults(func=cmd_picard)

    rs = sub.add_parser("residual", help="consistency residuals of Q_h of the exact pair")
    _add_common(rs)
    rs.add_argument("--times", type=_floats, default=[0.0, 0.05, 0.1])
    rs.set_defaults(func=cmd_residual)

    sm = sub.add_parser("simulate", help="single run with diagnostics")
    _add_common(sm, meshes=(64,))
    sm.add_argument("--forced", action="store_true")
    sm.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.r < 2:
        parser.error("--r must be at least 2")
    if args.command in ("converge", "picard", "simulate") and args.r < 3:
        parser.error(f"{args.command} needs --r >= 3")
    if not args.dt_scale > 0 or not args.t_end > 0:
        parser.error("--dt-scale and --t-end must be positive")
    if getattr(args, "iters", 2) < 2:
        parser.error("--iters must be at least 2")
    try:
        out = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except SelfCheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        logger.exception("internal error")
        return 1
    text = out.render()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
