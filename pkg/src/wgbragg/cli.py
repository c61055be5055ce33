"""Command-line interface: subcommand dispatch, config ingestion, CSV/JSON output.

Exit codes: 0 success, 1 validation or usage error, 2 numerical or capability
error.  Only light modules are imported at load time so that --threads (or the
WGBRAGG_THREADS environment variable) can pin the BLAS thread count before
numpy is first imported.
"""

import argparse
import json
import os
import re
import sys
import tempfile

from .errors import CapabilityError, NumericalError, ValidationError

THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                   "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")

GAMMA_KEYS = ("gamma_r", "gamma_l", "gamma_u")
BD_KEYS = ("beta", "d")

DEFAULT_COUPLING = {"gamma_r": 0.0707, "gamma_l": 0.0, "gamma_u": 0.9293}


class _Parser(argparse.ArgumentParser):
    """argparse normally exits 2 on usage problems; we treat those as validation.

    The widened negative-number matcher lets values like -4:4:161 or -2 follow
    a flag without being mistaken for an option string.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = re.compile(r"^-[\d.]")

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _apply_thread_env(argv):
    """Pin BLAS thread-count env vars from --threads or WGBRAGG_THREADS.

    Only effective if numpy has not been imported yet in this process, which
    holds for console-script invocation.
    """
    n = os.environ.get("WGBRAGG_THREADS")
    for i, tok in enumerate(argv):
        if tok == "--threads" and i + 1 < len(argv):
            n = argv[i + 1]
        elif tok.startswith("--threads="):
            n = tok.split("=", 1)[1]
    if n:
        for var in THREAD_ENV_VARS:
            os.environ.setdefault(var, str(n))


def load_config(path):
    """Read a JSON config file; a result file's metadata.config block also works."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"config parse error in {path} at line {exc.lineno}, column "
            f"{exc.colno}: {exc.msg}") from exc
    if isinstance(data, dict) and isinstance(data.get("metadata"), dict) \
            and isinstance(data["metadata"].get("config"), dict):
        data = data["metadata"]["config"]
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return data


def _coupling_form(source, label):
    has_bd = any(source.get(k) is not None for k in BD_KEYS)
    has_g = any(source.get(k) is not None for k in GAMMA_KEYS)
    if has_bd and has_g:
        raise ValidationError(
            f"{label} mixes (beta, d) with explicit gamma rates; pick one form")
    if has_bd:
        return "bd"
    if has_g:
        return "g"
    return None


def _resolve_coupling(flags, config):
    """Merge coupling options.  Within one source the two forms must not mix;
    across sources the form used by the flags wins entirely."""
    fform = _coupling_form(flags, "command line")
    cform = _coupling_form(config, "config file")
    form = fform or cform
    if form is None:
        return dict(DEFAULT_COUPLING)
    keys = BD_KEYS if form == "bd" else GAMMA_KEYS
    merged = {}
    if cform == form:
        merged.update({k: config[k] for k in keys if config.get(k) is not None})
    for k in keys:
        if flags.get(k) is not None:
            merged[k] = flags[k]
    if form == "bd":
        from .model import rates_from_beta_d

        gr, gl, gu = rates_from_beta_d(float(merged.get("beta", 0.0707)),
                                       float(merged.get("d", 1.0)))
        return {"gamma_r": gr, "gamma_l": gl, "gamma_u": gu}
    missing = [k for k in GAMMA_KEYS if k not in merged]
    if missing:
        raise ValidationError(
            f"explicit coupling needs all of gamma-r/gamma-l/gamma-u; missing {missing}")
    return {k: float(merged[k]) for k in GAMMA_KEYS}


def _parse_grid(text, name, integer=False):
    import numpy as np

    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValidationError(f"{name} grid must be start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ValidationError(f"bad {name} grid {text!r}: {exc}") from exc
    if count < 1:
        raise ValidationError(f"{name} grid count must be >= 1, got {count}")
    if count > 1 and stop <= start:
        raise ValidationError(f"{name} grid needs stop > start, got {text!r}")
    grid = np.linspace(start, stop, count)
    if integer:
        grid = np.unique(np.round(grid).astype(int))
    return grid


def _parse_theta(token, params, m, delta):
    """Angle input: radians, or gb / gb+x / gb-x / mb resolved for order m."""
    from .closed_form import geometric_bragg_angle, modified_bragg_angle

    s = str(token).strip()
    try:
        return float(s)
    except ValueError:
        pass
    if s == "mb":
        return modified_bragg_angle(m, delta, params)
    if s.startswith("gb"):
        rest = s[2:]
        offset = 0.0
        if rest:
            try:
                offset = float(rest)
            except ValueError as exc:
                raise ValidationError(f"bad theta token {token!r}") from exc
        return geometric_bragg_angle(m, params) + offset
    raise ValidationError(
        f"bad theta {token!r}: expected radians, 'gb', 'gb+x', 'gb-x' or 'mb'")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(metadata, columns):
    lines = [f"# wgbragg {metadata.get('version', '')}".rstrip()]
    for key, val in metadata.items():
        if key == "version":
            continue
        lines.append(f"# {key}: {json.dumps(val, separators=(',', ':'))}")
    names = [name for name, _ in columns]
    lines.append(",".join(names))
    n_rows = len(columns[0][1]) if columns else 0
    for i in range(n_rows):
        lines.append(",".join(_fmt(float(col[i])) for _, col in columns))
    return "\n".join(lines) + "\n"


def _json_text(metadata, columns, extra=None):
    doc = {"metadata": metadata,
           "columns": {name: [float(v) for v in col] for name, col in columns}}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1) + "\n"


def _emit(out, fmt, metadata, columns, extra_json=None):
    if fmt == "json":
        _write_text(out, _json_text(metadata, columns, extra_json))
    else:
        _write_text(out, _csv_text(metadata, columns))


def _resolve(args, config, key, default=None):
    val = getattr(args, key, None)
    if val is not None:
        return val
    if config.get(key) is not None:
        return config[key]
    return default


def _add_common(sp, n_default=None):
    sp.add_argument("--config", help="JSON config file; flags override it")
    sp.add_argument("--a", type=float, help="lattice constant in wavelengths (default 1.0)")
    sp.add_argument("--neff", type=float, help="guided-mode effective index (default 1.2)")
    sp.add_argument("--omega", type=float, help="Rabi frequency in Gamma (default 0.01)")
    sp.add_argument("--delta", type=float, help="detuning in Gamma (default 0)")
    sp.add_argument("--beta", type=float, help="guided fraction (with --d)")
    sp.add_argument("--d", type=float, help="directionality (with --beta)")
    sp.add_argument("--gamma-r", dest="gamma_r", type=float)
    sp.add_argument("--gamma-l", dest="gamma_l", type=float)
    sp.add_argument("--gamma-u", dest="gamma_u", type=float)
    sp.add_argument("--m", type=int, help="Bragg order (default 2)")
    sp.add_argument("--n", help="atom number" if n_default is None else None)
    sp.add_argument("--seed", type=int, help="master seed (default 7)")
    sp.add_argument("--tier", choices=["closed", "linear", "lindblad"])
    sp.add_argument("--out", help="output path (default: stdout)")
    sp.add_argument("--format", choices=["csv", "json"], dest="fmt")
    sp.add_argument("--threads", type=int, help="BLAS thread bound")


def _build_parser():
    parser = _Parser(prog="wgbragg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("spectrum", help="guided rate vs detuning at fixed angle")
    _add_common(sp)
    sp.add_argument("--theta", help="radians or gb/gb+x/gb-x/mb (default gb)")
    sp.add_argument("--delta-grid", dest="delta_grid", help="start:stop:count")

    sp = sub.add_parser("map", help="guided rate on a (theta, delta) grid")
    _add_common(sp)
    sp.add_argument("--theta-grid", dest="theta_grid", help="start:stop:count (radians)")
    sp.add_argument("--delta-grid", dest="delta_grid", help="start:stop:count")

    sp = sub.add_parser("scaling", help="peak detuning and rate vs atom number")
    _add_common(sp)
    sp.add_argument("--policy", choices=["gb", "mb", "fixed"])
    sp.add_argument("--theta", help="drive angle for --policy fixed")

    sp = sub.add_parser("bragg", help="Bragg orders, angles, mismatch and regime")
    _add_common(sp)
    sp.add_argument("--theta", help="angle for the mismatch report (default: gb)")

    sp = sub.add_parser("voids", help="seeded void ensembles (single, beta sweep or n sweep)")
    _add_common(sp)
    sp.add_argument("--eta", type=float, help="filling factor (default 0.5)")
    sp.add_argument("--configs", type=int, help="ensemble size (default 1000)")
    sp.add_argument("--sweep", choices=["beta", "n"])
    sp.add_argument("--beta-grid", dest="beta_grid", help="start:stop:count")
    sp.add_argument("--n-grid", dest="n_grid", help="start:stop:count (atom numbers)")
    sp.add_argument("--theta", help="drive angle for --sweep n")

    sp = sub.add_parser("oracle-check", help="compare weak-drive solver with the exact steady state")
    _add_common(sp)
    sp.add_argument("--draws", type=int, help="random parameter draws (default 20)")
    sp.add_argument("--tol", type=float, help="relative tolerance (default 1e-3)")

    return parser


def _base_metadata(command, res):
    from . import __version__

    config = {k: v for k, v in res.items() if k != "fmt"}
    return {"version": __version__, "generator": "wgbragg",
            "subcommand": command, "seed": res["seed"], "config": config}


def _resolve_common(args, config, n_default, n_grid=False):
    coupling = _resolve_coupling(
        {k: getattr(args, k, None) for k in BD_KEYS + GAMMA_KEYS}, config)
    res = {
        "a": float(_resolve(args, config, "a", 1.0)),
        "neff": float(_resolve(args, config, "neff", 1.2)),
        "omega": float(_resolve(args, config, "omega", 0.01)),
        "delta": float(_resolve(args, config, "delta", 0.0)),
        "m": int(_resolve(args, config, "m", 2)),
        "seed": int(_resolve(args, config, "seed", 7)),
        "tier": _resolve(args, config, "tier", "closed"),
        "fmt": _resolve(args, config, "fmt", "csv"),
    }
    res.update(coupling)
    n = _resolve(args, config, "n", n_default)
    if n is not None:
        if n_grid:
            res["n"] = str(n)
        else:
            try:
                res["n"] = int(n)
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"--n must be an integer, got {n!r}") from exc
    return res


def _params_for(res, n_sites, theta=0.0):
    from .model import make_params

    return make_params(n_sites=n_sites, a=res["a"], n_eff=res["neff"],
                       omega=res["omega"], delta=res["delta"], theta=theta,
                       gamma_r=res["gamma_r"], gamma_l=res["gamma_l"],
                       gamma_u=res["gamma_u"])


def _gamma_tilde_0(res):
    beta = res["gamma_r"] + res["gamma_l"]
    return 4.0 * res["omega"] ** 2 * beta


def _cmd_spectrum(args, config):
    from .experiments import spectrum_scan

    res = _resolve_common(args, config, n_default=144)
    res["theta"] = str(_resolve(args, config, "theta", "gb"))
    res["delta_grid"] = str(_resolve(args, config, "delta_grid", "-4:4:161"))
    params = _params_for(res, res["n"])
    theta = _parse_theta(res["theta"], params, res["m"], res["delta"])
    params = params.replace(theta=theta)
    grid = _parse_grid(res["delta_grid"], "delta")
    scan = spectrum_scan(theta, grid, res["tier"], params)
    meta = _base_metadata("spectrum", res)
    meta["theta_radians"] = theta
    meta["gamma_tilde_0"] = _gamma_tilde_0(res)
    cols = [("delta", grid), ("rate_r", scan.values["rate_r"])]
    _emit(args.out, res["fmt"], meta, cols)
    return 0


def _cmd_map(args, config):
    import numpy as np

    from .closed_form import geometric_bragg_angle, modified_bragg_angle
    from .errors import NumericalError as NErr
    from .experiments import map_scan

    res = _resolve_common(args, config, n_default=144)
    params = _params_for(res, res["n"])
    theta_gb = geometric_bragg_angle(res["m"], params)
    tg_default = f"{theta_gb - 0.08:.6f}:{theta_gb + 0.08:.6f}:81"
    res["theta_grid"] = str(_resolve(args, config, "theta_grid", tg_default))
    res["delta_grid"] = str(_resolve(args, config, "delta_grid", "-4:4:81"))
    tgrid = _parse_grid(res["theta_grid"], "theta")
    dgrid = _parse_grid(res["delta_grid"], "delta")
    scan = map_scan(tgrid, dgrid, res["tier"], params)

    th, dl = np.meshgrid(tgrid, dgrid, indexing="ij")
    cols = [("theta", th.ravel()), ("delta", dl.ravel()),
            ("rate_r", scan.values["rate_r"].ravel())]
    meta = _base_metadata("map", res)
    meta["theta_gb"] = theta_gb
    meta["gamma_tilde_0"] = _gamma_tilde_0(res)

    ov_delta, ov_theta = [], []
    for d in dgrid:
        try:
            ov_theta.append(modified_bragg_angle(res["m"], float(d), params))
            ov_delta.append(float(d))
        except NErr:
            continue
    overlay_cols = [("delta", np.asarray(ov_delta)), ("theta_mb", np.asarray(ov_theta))]

    out = args.out
    if res["fmt"] == "json":
        _emit(out, "json", meta, cols,
              extra_json={"overlay": {n: [float(v) for v in c] for n, c in overlay_cols}})
        return 0
    overlay_path = None
    if out is not None:
        stem, ext = os.path.splitext(out)
        overlay_path = f"{stem}_overlay{ext or '.csv'}"
        meta["overlay_file"] = os.path.basename(overlay_path)
    _emit(out, "csv", meta, cols)
    ov_meta = _base_metadata("map-overlay", res)
    ov_meta["theta_gb"] = theta_gb
    if overlay_path is not None:
        _write_text(overlay_path, _csv_text(ov_meta, overlay_cols))
    return 0


def _cmd_scaling(args, config):
    from .experiments import AtGB, AtMB, FixedPoint, fit_power_law, n_scaling

    res = _resolve_common(args, config, n_default="50:500:10", n_grid=True)
    res["policy"] = _resolve(args, config, "policy", "mb")
    n_list = _parse_grid(res["n"], "n", integer=True)
    params = _params_for(res, int(n_list[-1]))

    if res["policy"] == "gb":
        policy = AtGB(m=res["m"])
    elif res["policy"] == "mb":
        policy = AtMB(m=res["m"])
    else:
        theta_tok = _resolve(args, config, "theta")
        if theta_tok is None:
            raise ValidationError("--policy fixed needs --theta (and --delta)")
        res["theta"] = str(theta_tok)
        theta = _parse_theta(res["theta"], params, res["m"], res["delta"])
        policy = FixedPoint(theta=theta, delta=res["delta"])

    scan = n_scaling(policy, n_list, res["tier"], params)
    meta = _base_metadata("scaling", res)
    meta["gamma_tilde_0"] = _gamma_tilde_0(res)
    if isinstance(policy, FixedPoint):
        cols = [("n", n_list), ("rate_r", scan.values["rate_r"])]
    else:
        cols = [("n", n_list), ("delta_max", scan.values["delta_max"]),
                ("rate_max", scan.values["rate_max"]),
                ("boundary_flag", scan.values["boundary_flag"])]
        try:
            fit_d = fit_power_law(n_list, scan.values["delta_max"])
            fit_r = fit_power_law(n_list, scan.values["rate_max"])
        except ValidationError:
            fit_d = fit_r = None
        if fit_d is not None:
            meta["fit_delta_max"] = {"exponent": fit_d.exponent,
                                     "prefactor": fit_d.prefactor,
                                     "r_squared": fit_d.r_squared}
            meta["fit_rate_max"] = {"exponent": fit_r.exponent,
                                    "prefactor": fit_r.prefactor,
                                    "r_squared": fit_r.r_squared}
    _emit(args.out, res["fmt"], meta, cols)
    return 0


def _cmd_bragg(args, config):
    from .closed_form import bragg_orders, bragg_solution, classify_regime

    res = _resolve_common(args, config, n_default=100)
    params = _params_for(res, res["n"])
    orders = bragg_orders(params)
    if not orders:
        print("no Bragg order satisfies |m/a - n_eff| <= 1 for these parameters")
        return 0
    theta_tok = _resolve(args, config, "theta")
    rows = {k: [] for k in ("m", "theta_gb", "cos_theta_gb", "theta_mb",
                            "cos_theta_mb", "b", "b_alias", "period")}
    meta = _base_metadata("bragg", res)
    meta["gamma_tilde_0"] = _gamma_tilde_0(res)
    lines = []
    for m, theta_gb in orders:
        theta = theta_gb if theta_tok is None else _parse_theta(
            str(theta_tok), params, m, res["delta"])
        sol = bragg_solution(m, params, delta=res["delta"], theta=theta)
        regime = classify_regime(res["n"], theta, res["delta"], params)
        for k in rows:
            rows[k].append(float(getattr(sol, k)))
        meta[f"regime_m{m}"] = regime.label
        lines.append(
            f"m={m}: theta_gb={sol.theta_gb:.10g} rad (cos {sol.cos_theta_gb:.10g}), "
            f"theta_mb={sol.theta_mb:.10g} rad (cos {sol.cos_theta_mb:.10g}), "
            f"b={sol.b:.10g}, alias={sol.b_alias:.10g}, period={sol.period:.10g}, "
            f"regime={regime.label}")
    print("\n".join(lines))
    if args.out is not None:
        import numpy as np

        cols = [(k, np.asarray(v)) for k, v in rows.items()]
        _emit(args.out, res["fmt"], meta, cols)
    return 0


def _cmd_voids(args, config):
    import numpy as np

    from .experiments import void_beta_sweep, void_n_sweep

    res = _resolve_common(args, config, n_default=50)
    res["eta"] = float(_resolve(args, config, "eta", 0.5))
    res["configs"] = int(_resolve(args, config, "configs", 1000))
    res["sweep"] = _resolve(args, config, "sweep", "beta")
    if not (0.0 < res["eta"] <= 1.0):
        raise ValidationError(f"eta must lie in (0, 1], got {res['eta']}")
    params = _params_for(res, max(res["n"], 1))
    meta = _base_metadata("voids", res)
    meta["gamma_tilde_0"] = _gamma_tilde_0(res)
    meta["eta"] = res["eta"]
    meta["n_configs"] = res["configs"]

    if res["sweep"] == "beta":
        bg = _resolve(args, config, "beta_grid")
        if bg is None:
            betas = np.array([res["gamma_r"] + res["gamma_l"]])
        else:
            res["beta_grid"] = str(bg)
            betas = _parse_grid(res["beta_grid"], "beta")
        scan = void_beta_sweep(betas, res["n"], res["eta"], res["configs"],
                               res["seed"], params, m=res["m"], tier=res["tier"])
        meta["reference"] = "perfect-chain envelope peak per beta"
        cols = [("beta_or_n", betas)]
    else:
        res["n_grid"] = str(_resolve(args, config, "n_grid", "10:209:200"))
        theta_tok = _resolve(args, config, "theta")
        if theta_tok is None:
            raise ValidationError("--sweep n needs --theta (fixed drive angle)")
        res["theta"] = str(theta_tok)
        theta = _parse_theta(res["theta"], params, res["m"], res["delta"])
        params = params.replace(theta=theta)
        n_values = _parse_grid(res["n_grid"], "n", integer=True)
        scan = void_n_sweep(n_values, res["eta"], res["configs"], res["seed"],
                            params, tier=res["tier"])
        meta["reference"] = "perfect chain at the same drive point per n"
        meta["theta_radians"] = theta
        cols = [("beta_or_n", n_values.astype(float))]

    cols += [("mean_rate", scan.values["mean_rate"]),
             ("std_rate", scan.values["std_rate"]),
             ("robustness_r", scan.values["robustness_r"])]
    _emit(args.out, res["fmt"], meta, cols)
    return 0


def _cmd_oracle_check(args, config):
    import numpy as np

    from .experiments import _rate_point
    from .model import make_params, rates_from_beta_d

    res = _resolve_common(args, config, n_default=3)
    res["draws"] = int(_resolve(args, config, "draws", 20))
    res["tol"] = float(_resolve(args, config, "tol", 1e-3))
    res["omega"] = float(_resolve(args, config, "omega", 1e-3))
    if res["n"] > 3:
        raise CapabilityError(
            f"oracle-check compares at N <= 3 (got --n {res['n']}); larger N is "
            "out of the exact tier's CLI budget")
    if res["draws"] < 1:
        raise ValidationError("--draws must be >= 1")

    rows = {k: [] for k in ("draw", "rate_linear", "rate_lindblad", "rel_diff")}
    worst = 0.0
    for k in range(res["draws"]):
        rng = np.random.default_rng([res["seed"], k])
        beta = rng.uniform(0.05, 0.5)
        dval = rng.uniform(-1.0, 1.0)
        gr, gl, gu = rates_from_beta_d(beta, dval)
        pp = make_params(n_sites=res["n"], a=res["a"], n_eff=res["neff"],
                         omega=res["omega"], delta=rng.uniform(-3, 3),
                         theta=rng.uniform(0, np.pi), gamma_r=gr, gamma_l=gl,
                         gamma_u=gu)
        r_lin = _rate_point(pp.theta, pp.delta, pp, "linear")
        r_exact = _rate_point(pp.theta, pp.delta, pp, "lindblad")
        rel = abs(r_lin - r_exact) / max(abs(r_exact), 1e-300)
        worst = max(worst, rel)
        rows["draw"].append(float(k))
        rows["rate_linear"].append(r_lin)
        rows["rate_lindblad"].append(r_exact)
        rows["rel_diff"].append(rel)

    meta = _base_metadata("oracle-check", res)
    meta["max_rel_diff"] = worst
    if args.out is not None:
        cols = [(k, np.asarray(v)) for k, v in rows.items()]
        _emit(args.out, res["fmt"], meta, cols)
    print(f"oracle-check: {res['draws']} draws at N={res['n']}, "
          f"max relative difference {worst:.3e} (tol {res['tol']:.3e})")
    if worst > res["tol"]:
        raise NumericalError(
            f"weak-drive solver deviates from the exact steady state by "
            f"{worst:.3e} > tol {res['tol']:.3e}")
    return 0


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "map": _cmd_map,
    "scaling": _cmd_scaling,
    "bragg": _cmd_bragg,
    "voids": _cmd_voids,
    "oracle-check": _cmd_oracle_check,
}


def run(argv):
    parser = _build_parser()
    args = parser.parse_args(argv)
    config = load_config(args.config) if getattr(args, "config", None) else {}
    return _COMMANDS[args.command](args, config)


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    _apply_thread_env(argv)
    try:
        return run(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CapabilityError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
