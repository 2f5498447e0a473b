"""Command-line front end.

Subcommands: spectra, solve, dissipation, concentration, simulate,
structure, lln.  Every output file starts with comment lines carrying the
model hash, seed, package version and the echoed configuration, and floats
are printed with 17 significant digits, so outputs are byte-identical
across runs with the same seed and configuration.

Exit codes: 0 success, 1 numeric failure, 2 configuration error.
"""

import os

# Cap worker pools before numpy loads; only effective as an entry point.
if "RCM_THREADS" in os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["RCM_THREADS"])

import argparse
import json
import sys

import numpy as np

from . import __version__
from .coefficients import RcmModel, lambda_family, model_from_dict
from .solution import ConstantSolution, pullback
from .coefficients import GeneralCoefficients

_FLOAT = "%.17g"


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return _FLOAT % float(x)


def _header(model: RcmModel | None, seed, config: dict) -> list[str]:
    lines = [f"# treeshell {__version__}"]
    if model is not None:
        lines.append(f"# model_hash={model.hash()}")
    lines.append(f"# seed={seed}")
    lines.append("# config=" + json.dumps(config, sort_keys=True))
    return lines


def _write_csv(path, header_lines, columns, rows):
    text = "\n".join(header_lines + [",".join(columns)]
                     + [",".join(_fmt(x) for x in row) for row in rows]) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse {what}: {text!r}") from None


def _model_from_args(args) -> RcmModel:
    try:
        if args.config:
            with open(args.config) as fh:
                return model_from_dict(json.load(fh))
        cfg = {"d": args.dim, "alpha": args.alpha, "f": args.forcing}
        if args.deltas:
            cfg["deltas"] = _parse_floats(args.deltas, "--deltas")
        elif args.lam is not None:
            cfg["lambda"] = args.lam
        else:
            raise ConfigError("provide --deltas, --lambda or --config")
        return model_from_dict(cfg)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None


def _add_model_args(sub):
    sub.add_argument("--config", help="JSON model file")
    sub.add_argument("--dim", type=int, default=1)
    sub.add_argument("--alpha", type=float, default=None)
    sub.add_argument("--forcing", type=float, default=1.0)
    sub.add_argument("--deltas", help="comma-separated coefficients")
    sub.add_argument("--lambda", dest="lam", type=float,
                     help="lambda-family parameter")
    sub.add_argument("--out", help="output path (default: stdout)")
    sub.add_argument("--seed", type=int, default=0)


def _default_alpha(args):
    if args.alpha is None:
        args.alpha = args.dim / 2 + 1


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_spectra(args) -> int:
    from . import spectra

    p_grid = np.arange(args.p_min, args.p_max + 1e-9, args.p_step)
    lams = _parse_floats(args.lambdas, "--lambdas")
    rows = []
    summary = {}
    for lam in lams:
        model = lambda_family(lam, d=3, alpha=2.5)
        name = f"rcm_lambda={lam:g}"
        z = spectra.zeta(model, p_grid, check_h=False)
        rows += [(name, p, v) for p, v in zip(p_grid, z)]
        slope, intercept = spectra.asymptote(model)
        summary[name] = {
            "h": slope,
            "asymptote": [slope, intercept],
            "delta": spectra.dim_delta(model),
            "zeta3": float(spectra.zeta(model, 3.0, check_h=False)),
        }
    for name in spectra.REFERENCE_MODELS:
        z = spectra.reference_zeta(name, p_grid, mu=args.mu, D=args.D)
        rows += [(name, p, v) for p, v in zip(p_grid, z)]
    config = {"lambdas": lams, "mu": args.mu, "D": args.D,
              "p": [args.p_min, args.p_max, args.p_step]}
    _write_csv(args.out, _header(None, args.seed, config),
               ["model_name", "p", "zeta"], rows)
    if args.summary:
        _write_json(args.summary, summary)
    return 0


def cmd_solve(args) -> int:
    model = _model_from_args(args)
    run = pullback(GeneralCoefficients.from_rcm(model), model.alpha, model.d,
                   depth=args.depth, seed=args.x)
    a, b = run.band
    rows = [(g, lo, hi, mean, a, b, run.residual_max())
            for g, lo, hi, mean in run.summary()]
    config = {"model": model.to_dict(), "depth": args.depth, "x": args.x}
    _write_csv(args.out, _header(model, args.seed, config),
               ["generation", "q_min", "q_max", "q_mean",
                "band_lo", "band_hi", "residual_max"], rows)
    return 0


def cmd_dissipation(args) -> int:
    from . import dissipation

    model = _model_from_args(args)
    mu = dissipation.measure(model, args.n)
    rows = [(args.n, s, lm) for s, lm in zip(mu.sigma, mu.log2_mass)]
    config = {"model": model.to_dict(), "n": args.n}
    header = _header(model, args.seed, config)
    if args.band is not None:
        lo, hi = _band_from_args(args, model)
        header.append("# band=[%s,%s] mass_in_band=%s"
                      % (_fmt(lo), _fmt(hi), _fmt(mu.mass_in(lo, hi))))
    _write_csv(args.out, header, ["n", "sigma_atom", "log2_mass"], rows)
    return 0


def _band_from_args(args, model) -> tuple[float, float]:
    if args.band == "auto":
        center = model.phi(1.5)
        return center - args.band_width, center + args.band_width
    vals = _parse_floats(args.band, "--band")
    if len(vals) != 2:
        raise ConfigError(f"--band needs 'auto' or 'lo,hi', got {args.band!r}")
    return vals[0], vals[1]


def cmd_concentration(args) -> int:
    from . import dissipation

    model = _model_from_args(args)
    band = _band_from_args(args, model)
    ns = [int(x) for x in _parse_floats(args.n_list, "--n-list")]
    curve = dissipation.concentration_curve(model, band, ns)
    rows = [(n, m, 2.0**t, pr, sr, curve.theoretical_rate)
            for n, m, t, pr, sr in zip(curve.n, curve.mass_in, curve.log2_tail,
                                       curve.point_rate, curve.slope_rate)]
    config = {"model": model.to_dict(), "band": list(band), "n_list": ns}
    _write_csv(args.out, _header(model, args.seed, config),
               ["n", "mass_in_B", "tail", "point_rate", "slope_rate",
                "theoretical_rate"], rows)
    return 0


def cmd_lln(args) -> int:
    from . import dissipation

    model = _model_from_args(args)
    rep = dissipation.lln_sample(model, args.n, args.samples, args.seed)
    config = {"model": model.to_dict(), "n": args.n, "samples": args.samples}
    _write_csv(args.out, _header(model, args.seed, config),
               ["n", "samples", "sigma_mean", "sigma_std", "standard_error",
                "ell_zero", "log_ratio_rate_mean", "log_ratio_rate_limit"],
               [(rep.n, rep.samples, rep.sigma_mean, rep.sigma_std,
                 rep.standard_error, rep.ell_zero, rep.log_ratio_rate_mean,
                 rep.log_ratio_rate_limit)])
    return 0


def cmd_simulate(args) -> int:
    from . import dynamics

    model = _model_from_args(args)
    solution = ConstantSolution(model)
    if args.init == "zero":
        state = dynamics.TruncatedState.zeros(model, args.depth, args.closure)
    elif args.init == "constant":
        state = dynamics.TruncatedState.from_constant(solution, args.depth,
                                                      args.closure)
    elif args.init.startswith("perturbed:"):
        eps = float(args.init.split(":", 1)[1])
        state = dynamics.TruncatedState.from_constant(solution, args.depth,
                                                      args.closure,
                                                      scale=1.0 + eps)
    else:
        raise ConfigError(f"unknown init {args.init!r}")

    steps = int(round(args.t_end / args.dt))
    traj = dynamics.integrate(state, args.dt, steps,
                              record_every=args.record_every)
    u = np.concatenate([np.exp2(r) for r in solution.log2_u_rows(args.depth)])
    rows = []
    for t, v in zip(traj.times, traj.states):
        rows.append((t, float(v @ v), float(v[0]),
                     float(((v - u) ** 2).sum()), traj.clamp_total))
    config = {"model": model.to_dict(), "depth": args.depth, "dt": args.dt,
              "t_end": args.t_end, "closure": args.closure, "init": args.init}
    _write_csv(args.out, _header(model, args.seed, config),
               ["t", "energy", "v_root", "distance_to_u", "clamp_total"], rows)
    return 0


def cmd_structure(args) -> int:
    from . import field as field_mod

    model = _model_from_args(args)
    solution = ConstantSolution(model)
    wf = field_mod.synthesize(solution, dim=model.d, depth=args.depth,
                              mother=args.mother)
    ps = _parse_floats(args.p_list, "--p-list")
    window = None
    if args.fit_window:
        lo, hi = (int(x) for x in _parse_floats(args.fit_window, "--fit-window"))
        window = (lo, hi)
    est = field_mod.structure_function(wf, ps, m_range=window)
    rows = []
    for i, p in enumerate(est.p):
        for k, m in enumerate(est.m):
            rows.append((p, m, 2.0 ** est.log2_S[i, k]))
    config = {"model": model.to_dict(), "depth": args.depth,
              "p_list": ps, "fit_window": list(est.fit_window),
              "mother": args.mother}
    _write_csv(args.out, _header(model, args.seed, config),
               ["p", "m", "S_p"], rows)
    if args.summary:
        payload = []
        for i, p in enumerate(est.p):
            formula = float(min(p, field_mod.xi(solution, float(p))))
            zh = float(est.zeta_hat[i])
            payload.append({"p": float(p), "zeta_hat": zh,
                            "zeta_formula": formula,
                            "rel_err": abs(zh - formula) / formula
                            if formula else float("nan")})
        _write_json(args.summary, payload)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="treeshell",
        description="Constant solutions and multifractal analysis of the "
                    "tree dyadic model with repeated coefficients")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectra", help="zeta curves for RCM and reference models")
    sp.add_argument("--lambdas", default="0.1,0.2,0.2307")
    sp.add_argument("--mu", type=float, default=0.2)
    sp.add_argument("--D", type=float, default=2.8)
    sp.add_argument("--p-min", type=float, default=0.0)
    sp.add_argument("--p-max", type=float, default=20.0)
    sp.add_argument("--p-step", type=float, default=0.1)
    sp.add_argument("--out")
    sp.add_argument("--summary", help="also write a JSON summary here")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_spectra)

    so = sub.add_parser("solve", help="pull-back construction summary")
    _add_model_args(so)
    so.add_argument("--depth", type=int, default=8)
    so.add_argument("-x", type=float, default=0.0, help="boundary seed value")
    so.set_defaults(func=cmd_solve)

    di = sub.add_parser("dissipation", help="the measure mu_n atom by atom")
    _add_model_args(di)
    di.add_argument("--n", type=int, default=100)
    di.add_argument("--band", default=None,
                    help="report the band mass too: 'auto' or 'lo,hi'")
    di.add_argument("--band-width", type=float, default=0.1)
    di.set_defaults(func=cmd_dissipation)

    co = sub.add_parser("concentration", help="mu_n(B) along generations")
    _add_model_args(co)
    co.add_argument("--band", default="auto",
                    help="'auto' (centered at phi(3/2)) or 'lo,hi'")
    co.add_argument("--band-width", type=float, default=0.1)
    co.add_argument("--n-list", default="50,100,200,400")
    co.set_defaults(func=cmd_concentration)

    ll = sub.add_parser("lln", help="law of large numbers along random paths")
    _add_model_args(ll)
    ll.add_argument("--n", type=int, default=10000)
    ll.add_argument("--samples", type=int, default=1000)
    ll.set_defaults(func=cmd_lln)

    si = sub.add_parser("simulate", help="integrate the truncated dynamics")
    _add_model_args(si)
    si.add_argument("--depth", type=int, default=5)
    si.add_argument("--dt", type=float, default=1e-4)
    si.add_argument("--t-end", type=float, default=0.1)
    si.add_argument("--closure", choices=["zero", "stationary"],
                    default="stationary")
    si.add_argument("--init", default="constant",
                    help="zero | constant | perturbed:EPS")
    si.add_argument("--record-every", type=int, default=10)
    si.set_defaults(func=cmd_simulate)

    st = sub.add_parser("structure", help="empirical structure function")
    _add_model_args(st)
    st.add_argument("--depth", type=int, default=16)
    st.add_argument("--p-list", default="1,2,3")
    st.add_argument("--fit-window", help="override 'm_lo,m_hi'")
    st.add_argument("--mother", choices=["haar", "hat"], default="haar")
    st.add_argument("--summary", help="also write a JSON summary here")
    st.set_defaults(func=cmd_structure)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "dim") and hasattr(args, "alpha"):
        _default_alpha(args)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, KeyError, json.JSONDecodeError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
