"""opx command line: every verification path as a subcommand with
machine-readable output.

Output contract: stdout carries the report only, byte-identical across
runs for identical (command, seed, precision); the header echoes the fully
resolved configuration. Wall time goes to stderr. CSV cells use
full-precision decimal strings; JSON numbers that exceed binary64 are
emitted as decimal strings. Exit codes: 0 success, 2 validation error,
3 numerical failure (diagnostic JSON on stderr).
"""

import argparse
import json
import math
import os
import sys
import time

from . import detproc, mop, opcore, painleve, rmt
from .errors import NumericalError, OpxError, ValidationError
from .precision import to_decimal_string
from .weights import Weight, compute_moments

_SENTINEL = object()


def _build_parser():
    # global flags are accepted both before and after the subcommand; the
    # trailing copy uses SUPPRESS so an omitted flag never clobbers one
    # given up front
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="flat key=value file supplying flag defaults")
    common.add_argument("--precision-bits", type=int,
                        default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--format", choices=("csv", "json"),
                        default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="opx",
                                description="orthogonal-polynomial / "
                                "random-matrix / Painleve toolkit")
    p.add_argument("--config", default=None,
                   help="flat key=value file supplying flag defaults")
    p.add_argument("--precision-bits", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    sub = p.add_subparsers(dest="command", required=True)

    def add_family(sp, default=None):
        sp.add_argument("--family", default=default, required=default is None)
        sp.add_argument("--alpha", type=float, default=0.0)
        sp.add_argument("--beta", type=float, default=0.0)
        sp.add_argument("--s", type=float, default=1.0)
        sp.add_argument("--c", type=float, default=1.0)
        sp.add_argument("--t", type=float, default=0.0)
        sp.add_argument("--support", default="01", choices=("01", "pm1"))

    sp = sub.add_parser(parents=[common], name="moments", help="moment table of a weight")
    add_family(sp)
    sp.add_argument("--n", type=int, required=True)

    sp = sub.add_parser(parents=[common], name="recurrence", help="recurrence coefficients")
    add_family(sp)
    sp.add_argument("--n", type=int, required=True)

    sp = sub.add_parser(parents=[common], name="kernel", help="Christoffel-Darboux kernel value")
    add_family(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--y", type=float, required=True)
    sp.add_argument("--weighted", action="store_true")

    sp = sub.add_parser(parents=[common], name="gap", help="gap probability (Fredholm determinant)")
    add_family(sp, default="hermite")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--interval", required=True, help="a,b")
    sp.add_argument("--order", type=int, default=40)

    sp = sub.add_parser(parents=[common], name="rmt", help="random-matrix ensembles")
    rsub = sp.add_subparsers(dest="rmt_command", required=True)
    rp = rsub.add_parser(parents=[common], name="avg-char", help="MC average characteristic "
                                          "polynomial vs exact prediction")
    rp.add_argument("--kind", required=True, choices=rmt.KINDS)
    rp.add_argument("--n", type=int, required=True)
    rp.add_argument("--m", type=int)
    rp.add_argument("--k", type=int)
    rp.add_argument("--sigma", type=float)
    rp.add_argument("--a-eigs", help="comma list, external source only")
    rp.add_argument("--samples", type=int, required=True)

    sp = sub.add_parser(parents=[common], name="mop", help="multiple orthogonal polynomials")
    msub = sp.add_subparsers(dest="mop_command", required=True)
    mp_ = msub.add_parser(parents=[common], name="nnrr", help="nearest-neighbor recurrence table")
    mp_.add_argument("--family", required=True,
                     choices=("mhermite", "mlaguerre1", "mlaguerre2",
                              "jacobi_pineiro"))
    mp_.add_argument("--c", help="comma list of c_j")
    mp_.add_argument("--alphas", help="comma list of alpha_j")
    mp_.add_argument("--alpha", type=float, default=0.0)
    mp_.add_argument("--beta", type=float, default=0.0)
    mp_.add_argument("--box", default="3x3", help="N1xN2")

    sp = sub.add_parser(parents=[common], name="dp1", help="positive discrete Painleve I solution")
    sp.add_argument("--t", type=float, default=0.0)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--tol", type=float, default=1e-12)

    sp = sub.add_parser(parents=[common], name="dp2", help="Verblunsky sequence and d-PII residual")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)

    sp = sub.add_parser(parents=[common], name="lattice", help="Toda-type lattice flow cross-check")
    sp.add_argument("--family", required=True,
                    choices=("freud", "gaussian", "laguerre", "opuc_bessel"))
    sp.add_argument("--lattice", required=True,
                    choices=("toda", "langmuir", "ablowitz_ladik"))
    sp.add_argument("--span", required=True, help="t0,t1")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--steps", type=int, default=160)

    sp = sub.add_parser(parents=[common], name="ode", help="Painleve ODE residual")
    sp.add_argument("--quantity", required=True,
                    choices=painleve.ODE_QUANTITIES)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--h", type=float, default=1e-3)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--beta", type=float, default=0.0)

    sp = sub.add_parser(parents=[common], name="probe", help="d-PI singularity confinement probe")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--xref", type=float, required=True)

    sp = sub.add_parser(parents=[common], name="wronskian", help="Wronskian vs moment recurrence "
                                          "coefficients")
    sp.add_argument("--base", required=True, choices=("gaussian", "freud"))
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    return p


def _load_config(path):
    cfg = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"bad config line: {line!r}")
            key, val = line.split("=", 1)
            cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def _resolve_globals(args):
    cfg = _load_config(args.config) if args.config else {}
    if args.precision_bits is None:
        if "precision_bits" in cfg:
            args.precision_bits = int(cfg["precision_bits"])
        elif os.environ.get("OPX_PRECISION_BITS"):
            args.precision_bits = int(os.environ["OPX_PRECISION_BITS"])
        else:
            args.precision_bits = 256
    if args.seed is None:
        args.seed = int(cfg.get("seed", 0))
    if args.format is None:
        args.format = cfg.get("format", None)
    return args


def _weight_from_args(args):
    fam = args.family
    if fam == "hermite":
        return Weight.hermite(args.s)
    if fam == "hermite_shifted":
        return Weight.hermite_shifted(args.c)
    if fam == "laguerre":
        return Weight.laguerre(args.alpha, args.c)
    if fam == "jacobi":
        return Weight.jacobi(args.alpha, args.beta, args.support)
    if fam == "freud":
        return Weight.freud(args.t)
    if fam == "chen_its":
        return Weight.chen_its(args.alpha, args.t)
    if fam == "bce_jacobi":
        return Weight.bce_jacobi(args.alpha, args.beta, args.t)
    raise ValidationError(f"unknown weight family {fam!r}")


def _absorb_negative_values(argv):
    """Merge '--flag -1,1' into '--flag=-1,1' so argparse does not read the
    negative value as an option."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) \
                and len(argv[i + 1]) > 1 and argv[i + 1][0] == "-" \
                and (argv[i + 1][1].isdigit() or argv[i + 1][1] == "."):
            out.append(tok + "=" + argv[i + 1])
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def _num(x, bits):
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, (int,)):
        return str(x)
    if isinstance(x, float):
        return repr(float(x))
    return to_decimal_string(x, bits)


def _jsonable(x, bits):
    if isinstance(x, (int, float)) or x is None or isinstance(x, (str, bool)):
        return x
    if isinstance(x, (list, tuple)):
        return [_jsonable(v, bits) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v, bits) for k, v in x.items()}
    return to_decimal_string(x, bits)   # mpf and friends become strings


def _parse_pair(text, name):
    parts = text.split(",")
    if len(parts) != 2:
        raise ValidationError(f"--{name} expects two comma-separated values")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ValidationError(f"--{name} expects numeric values, got {text!r}")


# ---------------------------------------------------------------- commands

def _cmd_moments(args):
    w = _weight_from_args(args)
    mom = compute_moments(w, args.n, args.precision_bits)
    rows = [(k, mom[k]) for k in range(args.n)]
    payload = w.to_json_dict(args.precision_bits, moments=mom)
    return ("k,m_k", rows, payload, "csv")


def _cmd_recurrence(args):
    w = _weight_from_args(args)
    rec = opcore.recurrence_for(w, args.n, args.precision_bits)
    rows = [(n, rec.a_sq[n - 1], rec.b[n - 1]) for n in range(1, args.n + 1)]
    payload = {"family": args.family,
               "a_sq": list(rec.a_sq[:args.n]),
               "b": list(rec.b[:args.n]),
               "m0": rec.m0}
    return ("n,a_sq,b", rows, payload, "csv")


def _cmd_kernel(args):
    w = _weight_from_args(args)
    mode = "weighted" if args.weighted else "plain"
    kern = opcore.kernel_for(w, args.n, mode, args.precision_bits)
    val = opcore.cd_kernel(kern, args.x, args.y)
    rows = [(args.x, args.y, val)]
    payload = {"n": args.n, "mode": mode, "x": args.x, "y": args.y,
               "value": val}
    return ("x,y,K_n", rows, payload, "csv")


def _cmd_gap(args):
    a, b = _parse_pair(args.interval, "interval")
    w = _weight_from_args(args)
    kern = opcore.kernel_for(w, args.n, "weighted", args.precision_bits)
    g = detproc.gap_probability(kern, (a, b), args.order)
    payload = {"interval": list(g.interval),
               "order_sequence": list(g.order_sequence),
               "values": list(g.values),
               "converged": g.converged}
    rows = [(o, v) for o, v in zip(g.order_sequence, g.values)]
    return ("order,det", rows, payload, "json")


def _cmd_rmt(args):
    if args.rmt_command != "avg-char":
        raise ValidationError("unknown rmt subcommand")
    kw = {}
    if args.kind == "wigner":
        kw["sigma"] = args.sigma
    if args.kind == "wishart":
        kw["m"] = args.m
    if args.kind == "truncated_unitary":
        kw["m"], kw["k"] = args.m, args.k
    if args.kind == "external_source":
        if not args.a_eigs:
            raise ValidationError("external_source needs --a-eigs")
        kw["a_eigs"] = tuple(float(v) for v in args.a_eigs.split(","))
    spec = rmt.EnsembleSpec(args.kind, args.n, **kw)
    est = rmt.avg_char_poly_mc(spec, args.samples, args.seed)
    exact = rmt.exact_avg_char_poly(spec)
    rows = []
    for i in range(spec.n + 1):
        z = 0.0 if est.coeff_stderrs[i] == 0 else \
            (est.coeff_means[i] - exact[i]) / est.coeff_stderrs[i]
        rows.append((i, est.coeff_means[i], est.coeff_stderrs[i], exact[i], z))
    payload = {"kind": args.kind, "n": spec.n, "samples": est.samples,
               "coeff_means": list(est.coeff_means),
               "coeff_stderrs": list(est.coeff_stderrs),
               "exact": list(exact)}
    return ("coeff_index,mc_mean,mc_stderr,exact,z_score", rows, payload,
            "csv")


def _cmd_mop(args):
    if args.mop_command != "nnrr":
        raise ValidationError("unknown mop subcommand")
    fam = args.family
    if fam == "mhermite":
        cs = tuple(float(v) for v in (args.c or "-1,1").split(","))
        system = mop.MOPSystem.multiple_hermite(cs, args.precision_bits)
    elif fam == "mlaguerre2":
        cs = tuple(float(v) for v in (args.c or "1,2").split(","))
        system = mop.MOPSystem.multiple_laguerre2(args.alpha, cs,
                                                  args.precision_bits)
    elif fam == "mlaguerre1":
        alphas = tuple(float(v) for v in (args.alphas or "0,0.5").split(","))
        system = mop.MOPSystem.multiple_laguerre1(alphas, args.precision_bits)
    else:
        alphas = tuple(float(v) for v in (args.alphas or "0,0.5").split(","))
        system = mop.MOPSystem.jacobi_pineiro(alphas, args.beta,
                                              args.precision_bits)
    box = tuple(int(v) for v in args.box.lower().split("x"))
    if len(box) != system.r:
        raise ValidationError(f"--box must have {system.r} extents")
    field = mop.nnrr_field(system, box)
    per_index = mop.compatibility_residual_field(field, system.r)
    rows = []
    for idx in sorted(field):
        cf = field[idx]
        for j in range(system.r):
            rows.append(idx + (j + 1, cf.a[j], cf.b[j],
                               per_index.get(idx, 0.0)))
    header = ",".join(f"n{i + 1}" for i in range(system.r)) \
        + ",j,a_nj,b_nj,pde_residual"
    payload = {"family": fam, "box": list(box),
               "max_pde_residual": float(mop.compatibility_residual(
                   field, system.r))}
    return (header, rows, payload, "csv")


def _cmd_dp1(args):
    sol = painleve.dp1_positive_solution(args.t, args.n, args.tol)
    rows = []
    for n in range(1, args.n + 1):
        x = sol.x[n - 1]
        a = math.sqrt(x)
        rows.append((n, x, a, a / n ** 0.25))
    payload = {"t": sol.t, "N": sol.N, "iterations": sol.iterations,
               "residual": sol.residual, "x": list(sol.x)}
    return ("n,x_n,a_n,a_n_over_n4", rows, payload, "csv")


def _cmd_dp2(args):
    seq = painleve.verblunsky_sequence(args.t, args.n, args.precision_bits)
    worst = painleve.dp2_residual(seq)
    rows = [(n, seq.alphas[n]) for n in range(len(seq))]
    payload = {"t": seq.t, "source": seq.source,
               "alpha_minus_1": seq.alpha_minus_1,
               "alphas": list(seq.alphas), "max_dp2_residual": worst}
    return ("n,alpha_n", rows, payload, "csv")


def _cmd_lattice(args):
    t0, t1 = _parse_pair(args.span, "span")
    params = {"alpha": args.alpha} if args.family == "laguerre" else {}
    fam = painleve.SemiclassicalFamily(args.family, params)
    rep = painleve.lattice_flow(fam, args.lattice, t0, t1, args.n,
                                steps=args.steps,
                                precision_bits=args.precision_bits)
    rows = []
    for st in rep.states:
        for n, a2 in enumerate(st.a_sq, start=1):
            bval = st.b[n - 1] if n - 1 < len(st.b) else ""
            rows.append((st.t, n, a2, bval))
    payload = {"family": rep.family, "lattice": rep.lattice,
               "grid_t": list(rep.grid_t),
               "fd_residual_max": rep.fd_residual_max,
               "fd_h": rep.fd_h,
               "route_discrepancy": rep.route_discrepancy,
               "steps": rep.steps}
    return ("t,n,a_sq,b", rows, payload, "csv")


def _cmd_ode(args):
    kw = {}
    if args.quantity in ("p3_chen_its",):
        kw["alpha"] = args.alpha
    if args.quantity in ("p5_bce",):
        kw["alpha"], kw["beta"] = args.alpha, args.beta
    if args.quantity == "p5_charlier":
        kw["beta"] = args.beta if args.beta > 0 else 1.0
    rep = painleve.painleve_ode_residual(args.quantity, args.n, args.t,
                                         args.h, **kw)
    payload = {"quantity": rep.quantity, "n": rep.n, "t": rep.t, "h": rep.h,
               "residual": rep.residual, "stencil_values": list(rep.values)}
    rows = [(rep.quantity, rep.n, rep.t, rep.h, rep.residual)]
    return ("quantity,n,t,h,residual", rows, payload, "json")


def _cmd_probe(args):
    r = painleve.singularity_probe(args.n, args.eps, args.xref,
                                   args.precision_bits)
    rows = [(args.n + 1 + i, v) for i, v in enumerate(r.iterates)]
    payload = {"n": r.n, "eps": r.eps, "x_ref": r.x_ref,
               "iterates": list(r.iterates),
               "recovery_dev": r.recovery_dev, "memory_dev": r.memory_dev}
    return ("k,x_k", rows, payload, "csv")


def _cmd_wronskian(args):
    rep = painleve.wronskian_identities(args.base, args.t, args.n,
                                        args.precision_bits)
    rows = []
    for i in range(rep.n):
        rows.append((i + 1, rep.a_sq_wronskian[i], rep.a_sq_moment[i],
                     rep.b_wronskian[i], rep.b_moment[i]))
    payload = {"base": rep.base, "t": rep.t, "n": rep.n,
               "a_sq_wronskian": list(rep.a_sq_wronskian),
               "a_sq_moment": list(rep.a_sq_moment),
               "b_wronskian": list(rep.b_wronskian),
               "b_moment": list(rep.b_moment),
               "max_difference": rep.max_difference}
    return ("n,a_sq_wronskian,a_sq_moment,b_wronskian,b_moment", rows,
            payload, "csv")


_HANDLERS = {
    "moments": _cmd_moments, "recurrence": _cmd_recurrence,
    "kernel": _cmd_kernel, "gap": _cmd_gap, "rmt": _cmd_rmt,
    "mop": _cmd_mop, "dp1": _cmd_dp1, "dp2": _cmd_dp2,
    "lattice": _cmd_lattice, "ode": _cmd_ode, "probe": _cmd_probe,
    "wronskian": _cmd_wronskian,
}


def _config_echo(args):
    echo = {}
    for key, val in sorted(vars(args).items()):
        if key in ("config",) or val is None:
            continue
        echo[key] = val
    return echo


def run(argv, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    args = parser.parse_args(_absorb_negative_values(list(argv)))
    args = _resolve_globals(args)
    started = time.monotonic()
    header, rows, payload, natural = _HANDLERS[args.command](args)
    fmt = args.format or natural
    bits = args.precision_bits
    echo = _config_echo(args)
    if fmt == "csv":
        for key, val in echo.items():
            stdout.write(f"# {key}={val}\n")
        stdout.write(header + "\n")
        for row in rows:
            stdout.write(",".join(_num(v, bits) if v != "" else ""
                                  for v in row) + "\n")
    else:
        doc = {"config": _jsonable(echo, bits),
               "result": _jsonable(payload, bits),
               "precision_bits": bits}
        stdout.write(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    stderr.write(f"wall_time_s={time.monotonic() - started:.3f}\n")
    return 0


def main(argv=None):
    try:
        return run(argv if argv is not None else sys.argv[1:])
    except SystemExit as exc:            # argparse validation path
        code = exc.code if isinstance(exc.code, int) else 2
        return 2 if code != 0 else 0
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(json.dumps(
            {"error": str(exc), "diagnostics": _jsonable(exc.diagnostics, 64)},
            sort_keys=True) + "\n")
        return 3
    except OpxError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (ValueError, OverflowError) as exc:   # malformed numeric input
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
