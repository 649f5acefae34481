"""Command-line entry point.

Subcommands: solve (full pipeline plus certificates), sweep (epsilon grid to
CSV/SVG), winf (infinity-Wasserstein distance between the class measures),
attack (emit the distribution-level universal attack), verify (re-check a
stored result), oracle (brute-force reference values for tiny fixtures).

Exit codes: 0 success, 2 parse/validation failure, 3 nonconvergence or an
uncertified gap, 4 certificate mismatch in verify.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import io as adio
from .certify import TOL_EXP, TOL_UNIVERSAL, universality_check
from .dualsolve import DualConfig, DualSolution, brute_dual, dual_objective, solve_dual
from .errors import AdvdualError, InstanceTooLarge, ParseError, ValidationError
from .ground import build_ground
from .losses import get_loss
from .measures import Coupling, pushforward, winf_distance
from .primalsolve import PrimalConfig, brute_primal, eta_hat, solve_exp_primal

LOSS_CHOICES = ("exp", "logistic", "hinge", "zero-one")
ALL_LOSSES = list(LOSS_CHOICES)


def _add_shared(p: argparse.ArgumentParser, loss_default="exp") -> None:
    p.add_argument("--tol", type=float, default=None,
                   help="gap tolerance (default 1e-4 exp, 1e-3 other losses)")
    p.add_argument("--seed", type=int, default=0, help="solver seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker-thread bound for risk/objective evaluation "
                        "(results are independent of this value)")
    p.add_argument("--loss", choices=LOSS_CHOICES + ("all",),
                   default=loss_default, help="surrogate loss")
    p.add_argument("--out", default=None, help="output path")
    p.add_argument("--format", choices=("json", "csv", "svg", "both"),
                   default=None, help="output format (sweep: csv|svg|both)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="advdual",
        description="Adversarial surrogate risk and its transport dual on "
                    "finite ground sets, with optimality certificates.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve primal and dual, certify, write result")
    p.add_argument("instance")
    _add_shared(p)

    p = sub.add_parser("sweep", help="solve across an epsilon grid, emit CSV")
    p.add_argument("instance")
    p.add_argument("--eps", required=True,
                   help="comma-separated epsilon grid, e.g. 0,0.3,0.6")
    _add_shared(p, loss_default="all")

    p = sub.add_parser("winf", help="infinity-Wasserstein distance between "
                                    "the normalized class measures")
    p.add_argument("instance")
    _add_shared(p)

    p = sub.add_parser("attack", help="emit the universal distribution-level attack")
    p.add_argument("instance")
    _add_shared(p)

    p = sub.add_parser("verify", help="re-check a stored result against its instance")
    p.add_argument("instance")
    p.add_argument("result")
    _add_shared(p)

    p = sub.add_parser("oracle", help="brute-force reference values (tiny instances)")
    p.add_argument("instance")
    p.add_argument("--grid-steps", type=int, default=60)
    _add_shared(p)
    return ap


def _loss_tol(name: str, tol) -> float:
    if tol is not None:
        return float(tol)
    return TOL_EXP if name == "exp" else TOL_UNIVERSAL


def _requested_losses(arg: str) -> list[str]:
    return ALL_LOSSES if arg == "all" else [arg]


def _pipeline(g, measure, seed: int, tol: float):
    """Exponential primal, dual warm-started from the attack extraction, and
    a Polyak-polished primal when the first gap is loose."""
    t0 = time.perf_counter()
    pcfg = PrimalConfig(seed=seed)
    ps = solve_exp_primal(g, measure, pcfg)
    exp = get_loss("exp")
    dcfg = DualConfig(seed=seed, tol=min(tol, 1e-6), max_iters=4000)
    ds = solve_dual(exp, g, measure, dcfg, f_hint=ps.f)
    scale = max(1.0, abs(ps.risk))
    if ps.risk - ds.objective > 0.25 * tol * scale:
        # loose gap: polish the primal against the dual bound, then
        # re-extract the dual from the sharper score field (a better field
        # pins down the near-optimal support the dual polish restricts to)
        ps2 = solve_exp_primal(g, measure, pcfg, lower_bound=ds.objective)
        if ps2.risk < ps.risk:
            ps = ps2
        ds2 = solve_dual(exp, g, measure, dcfg, f_hint=ps.f)
        if ds2.objective > ds.objective:
            ds = ds2
            ps3 = solve_exp_primal(g, measure, pcfg, lower_bound=ds.objective)
            if ps3.risk < ps.risk:
                ps = ps3
    runtime_ms = int(round(1000.0 * (time.perf_counter() - t0)))
    return ps, ds, runtime_ms


def _result_dict(instance_path, g, measure, ps, ds, certs, seed, tol,
                 runtime_ms) -> dict:
    eta = eta_hat(ps.f)
    return {
        "schema_version": adio.SCHEMA_VERSION,
        "instance": {
            "path": os.path.basename(instance_path),
            "n_points": int(g.n),
            "norm": g.norm,
            "epsilon": float(g.epsilon),
        },
        "provenance": {
            "seed": int(seed),
            "tol": float(tol),
            "primal_iterations": int(ps.iterations),
            "dual_iterations": int(ds.iterations),
            "runtime_ms": int(runtime_ms),
        },
        "f": ps.f,
        "eta_hat": eta,
        "m0": ds.m0,
        "m1": ds.m1,
        "couplings": {
            "class0": ds.coupling0.triples(),
            "class1": ds.coupling1.triples(),
        },
        "certificates": {name: c.as_dict() for name, c in certs.items()},
    }


def _print_cert_line(name: str, cert) -> None:
    tag = "  DIAGNOSTIC" if cert.diagnostic else ""
    print(f"{name}: primal={cert.primal_value:.12g} "
          f"dual={cert.dual_value:.12g} gap={cert.gap:.6g}{tag}")


def cmd_solve(args) -> int:
    g, measure, _ = adio.load_instance(args.instance)
    tol = _loss_tol(args.loss, args.tol)
    ps, ds, runtime_ms = _pipeline(g, measure, args.seed, tol)
    eta = eta_hat(ps.f)
    names = sorted(set(_requested_losses(args.loss)) | {"exp"})
    certs = universality_check(eta, ds, names, g, measure)
    result = _result_dict(args.instance, g, measure, ps, ds, certs,
                          args.seed, tol, runtime_ms)
    out = args.out or os.path.splitext(args.instance)[0] + "_result.json"
    adio.save_result(out, result)

    code = 0
    for loss_name in _requested_losses(args.loss):
        kind = get_loss(loss_name).kind
        cert = certs[kind]
        _print_cert_line(loss_name, cert)
        if cert.diagnostic:
            print("warning: zero-one gap is diagnostic only; optimality of "
                  "the thresholded classifier is not certified")
            continue
        if cert.gap > _loss_tol(loss_name, args.tol):
            code = 3
    if not (ps.converged and ds.converged):
        code = 3
    print(f"result written to {out}")
    return code


def cmd_sweep(args) -> int:
    g, measure, _ = adio.load_instance(args.instance)
    try:
        eps_grid = [float(tok) for tok in args.eps.split(",") if tok.strip()]
    except ValueError as e:
        raise ValidationError(f"bad --eps value: {e}") from e
    if not eps_grid:
        raise ValidationError("empty epsilon grid")
    uniq = sorted(set(eps_grid))
    if len(uniq) < len(eps_grid):
        print("warning: duplicate epsilon values removed", file=sys.stderr)
    losses = _requested_losses(args.loss)
    rows = []
    code = 0
    for eps in uniq:
        t0 = time.perf_counter()
        try:
            ge = build_ground(g.points, g.norm, eps)
            tol = _loss_tol("exp", args.tol)
            ps, ds, _ = _pipeline(ge, measure, args.seed, tol)
            certs = universality_check(eta_hat(ps.f), ds, losses, ge, measure)
        except AdvdualError as e:
            print(f"warning: eps={eps:g} failed: {e}", file=sys.stderr)
            for loss_name in losses:
                rows.append(dict(eps=eps, loss=loss_name, primal=float("nan"),
                                 dual=float("nan"), gap=float("nan"),
                                 iters=0, runtime_ms=0))
            code = 3
            continue
        ms = int(round(1000.0 * (time.perf_counter() - t0)))
        for loss_name in losses:
            cert = certs[get_loss(loss_name).kind]
            rows.append(dict(eps=eps, loss=loss_name, primal=cert.primal_value,
                             dual=cert.dual_value, gap=cert.gap,
                             iters=ps.iterations + ds.iterations,
                             runtime_ms=ms))
    stem = args.out or os.path.splitext(args.instance)[0] + "_sweep"
    stem = os.path.splitext(stem)[0] if stem.endswith(".csv") else stem
    fmt = args.format or "csv"
    if fmt in ("csv", "both"):
        adio.save_sweep_csv(stem + ".csv", rows)
        print(f"sweep written to {stem}.csv")
    if fmt in ("svg", "both"):
        adio.save_sweep_svg(stem + ".svg", rows)
        print(f"chart written to {stem}.svg")
    return code


def cmd_winf(args) -> int:
    g, measure, _ = adio.load_instance(args.instance)
    t0, t1 = float(measure.mass0.sum()), float(measure.mass1.sum())
    if t0 <= 0 or t1 <= 0:
        raise ValidationError("both classes need positive mass")
    d = winf_distance(g, measure.mass0 / t0, measure.mass1 / t1)
    print(f"winf={d:.17g}")
    return 0


def cmd_attack(args) -> int:
    g, measure, _ = adio.load_instance(args.instance)
    tol = _loss_tol("exp", args.tol)
    ps, ds, runtime_ms = _pipeline(g, measure, args.seed, tol)
    for label, c in (("class0", ds.coupling0), ("class1", ds.coupling1)):
        for i, j, w in c.triples():
            print(f"{label} {i} -> {j} mass {w:.17g}")
    if args.out:
        adio.save_result(args.out, {
            "couplings": {"class0": ds.coupling0.triples(),
                          "class1": ds.coupling1.triples()},
            "m0": ds.m0, "m1": ds.m1,
            "provenance": {"seed": int(args.seed), "runtime_ms": runtime_ms},
        })
        print(f"attack written to {args.out}")
    return 0


def cmd_verify(args) -> int:
    g, measure, _ = adio.load_instance(args.instance)
    data = adio.load_result(args.result)

    def fail(msg: str) -> int:
        print(f"verify FAILED: {msg}")
        return 4

    try:
        f = np.asarray(data["f"], dtype=float)
        eta = np.asarray(data["eta_hat"], dtype=float)
        tr0 = data["couplings"]["class0"]
        tr1 = data["couplings"]["class1"]
        m0 = np.asarray(data["m0"], dtype=float)
        m1 = np.asarray(data["m1"], dtype=float)
        stored = data["certificates"]
    except KeyError as e:
        raise ValidationError(f"result file missing field {e}") from e
    if f.shape != (g.n,) or eta.shape != (g.n,):
        return fail(f"field length {f.shape[0]} does not match the "
                    f"instance ground set ({g.n} points)")
    try:
        c0 = Coupling.build([t[0] for t in tr0], [t[1] for t in tr0],
                            [t[2] for t in tr0], g.n)
        c1 = Coupling.build([t[0] for t in tr1], [t[1] for t in tr1],
                            [t[2] for t in tr1], g.n)
    except AdvdualError as e:
        return fail(f"stored couplings invalid: {e}")
    p0, p1 = pushforward(c0), pushforward(c1)
    if np.max(np.abs(p0 - m0)) > 1e-9 or np.max(np.abs(p1 - m1)) > 1e-9:
        return fail("stored masses do not match the pushforward of the "
                    "stored couplings")
    exp = get_loss("exp")
    dual = DualSolution(coupling0=c0, coupling1=c1, m0=m0, m1=m1,
                        objective=dual_objective(exp, m0, m1),
                        iterations=0, converged=True, history=[])
    try:
        fresh = universality_check(eta, dual, list(stored), g, measure)
    except AdvdualError as e:
        return fail(str(e))
    for kind, cert in stored.items():
        if kind not in fresh:
            return fail(f"unknown certificate entry {kind!r}")
        got = fresh[kind].as_dict()
        for key in ("primal_value", "dual_value", "gap", "slack_sup_r1",
                    "slack_sup_r0", "slack_pointwise", "support_violation"):
            a, b = cert.get(key), got.get(key)
            if (a is None) != (b is None):
                return fail(f"{kind}.{key}: stored {a!r} vs recomputed {b!r}")
            if a is not None and abs(float(a) - float(b)) > 1e-9:
                return fail(f"{kind}.{key}: stored {a!r} vs recomputed {b!r}")
        if not cert.get("diagnostic", False):
            tol = TOL_EXP if kind == "exponential" else TOL_UNIVERSAL
            if float(cert["gap"]) > tol:
                return fail(f"{kind}.gap {cert['gap']!r} exceeds tolerance {tol}")
    print("verify OK")
    return 0


def cmd_oracle(args) -> int:
    g, measure, _ = adio.load_instance(args.instance)
    names = _requested_losses(args.loss)
    for loss_name in names:
        loss = get_loss(loss_name)
        dual = brute_dual(loss, g, measure, args.grid_steps)
        line = f"{loss_name}: brute_dual={dual:.12g}"
        if loss.kind != "zero_one_dual":
            primal = brute_primal(loss, g, measure)
            line += f" brute_primal={primal:.12g}"
        print(line)
    return 0


_COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "winf": cmd_winf,
    "attack": cmd_attack,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads < 1:
        ap.error("--threads must be at least 1")
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except InstanceTooLarge as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except AdvdualError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
