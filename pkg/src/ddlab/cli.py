"""``ddlab`` command line: rates, solve, mc, compare, levy.

Every command reads an optional INI config (``[model]``, ``[query]``,
``[solver]``, ``[mc]``, ``[output]``); command-line flags override it.
Exit codes: 0 success, 1 runtime or numerical failure, 2 configuration or
validation error.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import click
import numpy as np

from . import errors
from .kernel_exit import jd_rates, pemp_rates
from .mc.oracle import MCConfig, estimate
from .model import (
    BrownianLevySpec,
    CramerLundbergSpec,
    DiffusionSpec,
    DrawdownQuery,
    GenPempSpec,
    JumpComponent,
    PempSpec,
    RefractedSpec,
    validate,
)
from .ratefield import RateField
from .snlp_exit import diffusion_rate_field, refracted_rate_field, snlp_rate_field
from .solver import SolverConfig, check_rate_inequality, levy_joint_lt, solve

__all__ = ["main", "RunConfig", "build_model", "build_rates", "load_config"]

MODELS = ("pemp", "jd", "bm", "cl", "diffusion", "refracted")
EXACT_MODELS = ("pemp",)

_MODEL_KEYS = {
    "pemp": {"drift_coef", "jump_rate", "jump_mix"},
    "jd": {"drift_slope", "volatility", "jump_rate", "up_jump_rate"},
    "bm": {"drift", "volatility"},
    "cl": {"premium", "claim_rate", "claim_mean"},
    "diffusion": {"diffusion_family", "mu", "sigma", "kappa", "theta"},
    "refracted": {"base", "drift", "volatility", "premium", "claim_rate", "claim_mean", "refraction", "threshold"},
}
_SECTION_KEYS = {
    "query": {"q", "s", "delta", "a", "K", "x0", "x_from", "x_to", "x_step"},
    "solver": {"grid_step", "picard_tol", "picard_max_iter", "method", "x_min"},
    "mc": {"paths", "seed", "dt", "chunk_size", "substeps", "monitor", "threshold", "slack"},
    "output": {"out", "gnuplot"},
}


class ConfigError(errors.DdlabError, ValueError):
    """Malformed or unknown configuration entry."""


@dataclass
class RunConfig:
    model: str = "pemp"
    model_params: dict = field(default_factory=dict)
    query: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    mc: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)


def load_config(path: Optional[str]) -> RunConfig:
    cfg = RunConfig()
    if not path:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "model":
            cfg.model = items.pop("family", cfg.model)
            cfg.model_params.update(items)
        elif section in _SECTION_KEYS:
            unknown = set(items) - _SECTION_KEYS[section]
            if unknown:
                raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
            getattr(cfg, section).update(items)
        else:
            raise ConfigError(f"unknown config section [{section}]")
    return cfg


def _f(params: dict, key: str, default: float) -> float:
    raw = params.get(key, default)
    try:
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number (got {raw!r})") from exc


def _parse_mix(text: str) -> tuple[JumpComponent, ...]:
    """``weight:rate:direction`` entries separated by commas."""
    comps = []
    for part in text.split(","):
        bits = part.strip().split(":")
        if len(bits) != 3:
            raise ConfigError(f"jump_mix entry {part!r} is not weight:rate:direction")
        w, r, d = bits
        try:
            weight = float(w) if "/" not in w else float(w.split("/")[0]) / float(w.split("/")[1])
            comps.append(JumpComponent(weight, float(r), d.strip()))
        except ValueError as exc:
            raise ConfigError(f"bad jump_mix entry {part!r}") from exc
    return tuple(comps)


def build_model(name: str, params: dict):
    if name not in MODELS:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")
    unknown = set(params) - _MODEL_KEYS[name]
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {name}: {', '.join(sorted(unknown))}")
    p = params
    if name == "pemp":
        ref = PempSpec()
        mix = _parse_mix(p["jump_mix"]) if "jump_mix" in p else ref.jump_mix
        return PempSpec(_f(p, "drift_coef", ref.drift_coef), _f(p, "jump_rate", ref.jump_rate), mix)
    if name == "jd":
        ref = GenPempSpec()
        return GenPempSpec(_f(p, "drift_slope", ref.drift_slope), _f(p, "volatility", ref.volatility),
                           _f(p, "jump_rate", ref.jump_rate), _f(p, "up_jump_rate", ref.up_jump_rate))
    if name == "bm":
        return BrownianLevySpec(_f(p, "drift", 0.0), _f(p, "volatility", 1.0))
    if name == "cl":
        return CramerLundbergSpec(_f(p, "premium", 1.0), _f(p, "claim_rate", 1.0), _f(p, "claim_mean", 0.5))
    if name == "diffusion":
        fam = p.get("diffusion_family", "ou")
        if fam == "constant":
            return DiffusionSpec.constant(_f(p, "mu", 0.0), _f(p, "sigma", 1.0))
        if fam == "ou":
            return DiffusionSpec.ou(_f(p, "kappa", 1.0), _f(p, "sigma", 1.0), _f(p, "theta", 0.0))
        if fam == "gbm":
            return DiffusionSpec.gbm(_f(p, "mu", 0.0), _f(p, "sigma", 1.0))
        return DiffusionSpec(fam, {})
    base_name = p.get("base", "bm")
    if base_name == "bm":
        base = BrownianLevySpec(_f(p, "drift", 0.0), _f(p, "volatility", 1.0))
    elif base_name == "cl":
        base = CramerLundbergSpec(_f(p, "premium", 1.0), _f(p, "claim_rate", 1.0), _f(p, "claim_mean", 0.5))
    else:
        raise ConfigError(f"refracted base must be bm or cl (got {base_name!r})")
    return RefractedSpec(base, _f(p, "refraction", 0.0), _f(p, "threshold", 0.0))


def build_rates(model, query: DrawdownQuery) -> RateField:
    """Rate field for ``model`` at the query's (q, s, a)."""
    if isinstance(model, PempSpec):
        _need(query.q == 0.0, "the PEMP kernel is available at q = 0 only")
        return pemp_rates(query.a, query.s, spec=model)
    if isinstance(model, GenPempSpec):
        _need(query.q == 0.0, "the jump-diffusion kernel is available at q = 0 only")
        return jd_rates(query.a, query.s, spec=model)
    if isinstance(model, (BrownianLevySpec, CramerLundbergSpec)):
        return snlp_rate_field(model, query.q, query.s, query.a)
    if isinstance(model, DiffusionSpec):
        _need(query.q == 0.0 and query.s == 0.0, "diffusion rates are available at q = s = 0 only")
        return diffusion_rate_field(model, query.a)
    if isinstance(model, RefractedSpec):
        _need(query.s == 0.0, "refracted rates are available at s = 0 only")
        return refracted_rate_field(model, query.q, query.a)
    raise errors.UnsupportedArgumentError(f"no rates for {type(model).__name__}")


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise errors.UnsupportedArgumentError(msg)


# --- shared option handling ------------------------------------------------


def _common(fn):
    opts = [
        click.option("--model", "model_name", type=str, default=None, help="pemp, jd, bm, cl, diffusion, refracted"),
        click.option("--param", "params", multiple=True, metavar="KEY=VALUE", help="model parameter override"),
        click.option("--config", "config_path", type=click.Path(), default=None, help="INI config file"),
        click.option("--out", type=click.Path(), default=None, help="output CSV path (default stdout)"),
        click.option("--seed", type=int, default=None),
        click.option("--q", type=str, default=None),
        click.option("--s", type=str, default=None),
        click.option("--delta", type=str, default=None),
        click.option("--a", type=float, default=None),
        click.option("--K", "K", type=float, default=None),
        click.option("--x0", type=float, default=None),
        click.option("--x-from", "x_from", type=float, default=None),
        click.option("--x-to", "x_to", type=float, default=None),
        click.option("--x-step", "x_step", type=float, default=None),
        click.option("--method", type=click.Choice(["backward_rk4", "picard", "both"]), default=None),
        click.option("--tol", type=float, default=None, help="Picard tolerance (sup norm)"),
        click.option("--grid-step", "grid_step", type=float, default=None),
        click.option("--paths", type=int, default=None),
        click.option("--dt", type=float, default=None),
        click.option("--monitor", type=click.Choice(["bridge", "grid"]), default=None,
                     help="barrier monitoring for Euler models"),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@dataclass
class _Ctx:
    model_name: str
    model: object
    query: DrawdownQuery
    xs: np.ndarray
    solver: SolverConfig
    mc: MCConfig
    out: Optional[str]
    gnuplot: Optional[str]
    extra: dict


def _floats(text) -> list[float]:
    if text is None:
        return []
    return [float(t) for t in str(text).split(",") if t.strip()]


def _sweep(x_from, x_to, x_step) -> np.ndarray:
    if x_step is None or x_to is None:
        return np.array([x_from])
    if not x_step > 0 or x_to < x_from:
        raise ConfigError("x sweep needs x_step > 0 and x_to >= x_from")
    n = int(math.floor((x_to - x_from) / x_step + 1e-9)) + 1
    return np.round(x_from + x_step * np.arange(n), 12)


def _resolve(kw: dict, *, need_sweep: bool = True, cfg: Optional[RunConfig] = None) -> _Ctx:
    cfg = cfg or load_config(kw.get("config_path"))
    name = kw.get("model_name") or cfg.model
    params = dict(cfg.model_params)
    for item in kw.get("params") or ():
        if "=" not in item:
            raise ConfigError(f"--param expects KEY=VALUE (got {item!r})")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    model = build_model(name, params)

    qd = dict(cfg.query)

    def pick(key, flag):
        v = kw.get(flag)
        return v if v is not None else qd.get(key)

    def num(key, flag, default):
        v = pick(key, flag)
        if v is None:
            return default
        vals = _floats(v)
        if len(vals) != 1:
            raise ConfigError(f"{key} takes a single value here")
        return vals[0]

    a = num("a", "a", 1.0)
    K = num("K", "K", {"pemp": 20.0, "jd": 6.0}.get(name, math.inf))
    x_from = num("x_from", "x_from", None)
    x0 = num("x0", "x0", None)
    if x_from is None:
        x_from = x0 if x0 is not None else (a if name == "pemp" else 0.0)
    x_to = num("x_to", "x_to", None)
    x_step = num("x_step", "x_step", None)
    xs = _sweep(x_from, x_to, x_step)
    query = DrawdownQuery(q=num("q", "q", 0.0), s=num("s", "s", 0.0), delta=num("delta", "delta", 0.0),
                          a=a, K=K, x0=float(xs[0]))
    for x in (xs if need_sweep else xs[:1]):
        rep = validate(model, DrawdownQuery(query.q, query.s, query.delta, a, K, float(x)))
        rep.raise_if_failed()

    sd = dict(cfg.solver)
    method = kw.get("method") or sd.get("method", "backward_rk4")
    solver = SolverConfig(
        grid_step=kw.get("grid_step") or (float(sd["grid_step"]) if "grid_step" in sd else None),
        picard_tol=kw.get("tol") or float(sd.get("picard_tol", 1e-10)),
        picard_max_iter=int(sd.get("picard_max_iter", 200)),
        method=method,
        x_min=float(sd["x_min"]) if "x_min" in sd else None,
    )
    md = dict(cfg.mc)
    monitor = kw.get("monitor") or md.get("monitor", "bridge")
    mc = MCConfig(
        n_paths=kw.get("paths") or int(md.get("paths", 100_000)),
        seed=kw.get("seed") if kw.get("seed") is not None else int(md.get("seed", 0)),
        dt=kw.get("dt") or float(md.get("dt", 1e-3)),
        chunk_size=int(md.get("chunk_size", 4096)),
        substeps=int(md.get("substeps", 1)),
        bridge=(monitor == "bridge"),
    )
    od = dict(cfg.output)
    return _Ctx(name, model, query, xs, solver, mc, kw.get("out") or od.get("out"),
                kw.get("gnuplot") or od.get("gnuplot"), {"cfg": cfg, "raw_query": qd, "kw": kw})


def _write_csv(path: Optional[str], header: list[str], rows, comments: list[str] = ()) -> None:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if path and path != "-":
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v)) if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))


def _gnuplot(path: str, csv_path: Optional[str], columns: list[tuple[int, str]], ylabel: str) -> None:
    data = csv_path or "data.csv"
    plots = ", ".join(f"'{data}' using 1:{c} with lines title '{t}'" for c, t in columns)
    with open(path, "w") as fh:
        fh.write("set datafile separator ','\nset key autotitle columnhead\n")
        fh.write(f"set xlabel 'x'\nset ylabel '{ylabel}'\nset grid\nplot {plots}\n")


def _run(fn):
    """Map library exceptions to exit codes."""
    try:
        fn()
    except (errors.ValidationError, errors.PreconditionError, errors.DomainError,
            errors.UnsupportedArgumentError, ConfigError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except (ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except (errors.DdlabError, ArithmeticError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)


@click.group()
@click.version_option(package_name="artifact", prog_name="ddlab")
def cli():
    """Drawdown first-passage laws from local drawdown rates."""


@cli.command("rates")
@_common
def cmd_rates(**kw):
    """Tabulate b1, b2_amp and c over the x sweep."""

    def go():
        ctx = _resolve(kw)
        rf = build_rates(ctx.model, ctx.query)
        b1, b2, c = rf.evaluate(ctx.xs)
        rep = check_rate_inequality(rf, ctx.xs)
        _write_csv(ctx.out, ["x", "b1", "b2_amp", "c"], zip(ctx.xs, b1, b2, c))
        if not rep.ok:
            v = rep.violations[0]
            raise errors.NonFiniteRateError(
                f"rate inequality violated at {len(rep.violations)} point(s); first x={v.x} ({v.kind}, margin {v.margin:.3g})"
            )

    _run(go)


def _solve_query(ctx: _Ctx) -> DrawdownQuery:
    return DrawdownQuery(ctx.query.q, ctx.query.s, 0.0, ctx.query.a, ctx.query.K, float(np.min(ctx.xs)))


@cli.command("solve")
@_common
@click.option("--gnuplot", type=click.Path(), default=None, help="also write a gnuplot script")
def cmd_solve(**kw):
    """Solve for h on a grid and write x,h."""

    def go():
        ctx = _resolve(kw)
        rf = build_rates(ctx.model, ctx.query)
        q = _solve_query(ctx)
        res = solve(rf, q, ctx.solver)
        sweep = len(ctx.xs) > 1
        if ctx.solver.method == "both":
            hb, hp = res
            xs = ctx.xs if sweep else hb.xs
            a, b = (hb.at(xs), hp.at(xs)) if sweep else (hb.hs, hp.hs)
            diff = float(np.max(np.abs(hb.hs - hp.hs)))
            comments = [f"method=both, iterations={hp.meta.iterations}, contraction={hp.meta.contraction_estimate:.6g}, "
                        f"bound={hp.meta.contraction_bound:.6g}, max_abs_diff={diff:.3e}"]
            _write_csv(ctx.out, ["x", "h_backward", "h_picard"], zip(xs, a, b), comments)
            click.echo(f"max|h_backward - h_picard| = {diff:.3e}", err=ctx.out is None)
            cols = [(2, "backward"), (3, "picard")]
        else:
            xs = ctx.xs if sweep else res.xs
            hs = res.at(xs) if sweep else res.hs
            m = res.meta
            contraction = f"{m.contraction_estimate:.6g}" if m.method == "picard" else "na"
            comments = [f"method={m.method}, iterations={m.iterations}, contraction={contraction}"]
            _write_csv(ctx.out, ["x", "h"], zip(xs, hs), comments)
            cols = [(2, "h")]
        if ctx.gnuplot:
            _gnuplot(ctx.gnuplot, ctx.out, cols, "h(x)")

    _run(go)


def _functional(q: DrawdownQuery) -> str:
    return "indicator" if q.q == 0 and q.s == 0 and q.delta == 0 else "laplace"


@cli.command("mc")
@_common
def cmd_mc(**kw):
    """Monte Carlo estimates of h at each x in the sweep."""

    def go():
        ctx = _resolve(kw)
        fn = _functional(ctx.query)
        rows = []
        for x in ctx.xs:
            q = DrawdownQuery(ctx.query.q, ctx.query.s, ctx.query.delta, ctx.query.a, ctx.query.K, float(x))
            est = estimate(ctx.model, q, ctx.mc, fn)
            rows.append((x, est.mean, est.std_err, est.n))
        meta = f"model={ctx.model_name}, functional={fn}, seed={ctx.mc.seed}, paths={ctx.mc.n_paths}"
        if ctx.model_name not in EXACT_MODELS:
            meta += f", dt={ctx.mc.dt}, monitor={'bridge' if ctx.mc.bridge else 'grid'}"
        _write_csv(ctx.out, ["x", "mean", "std_err", "n"], rows, [meta])

    _run(go)


@cli.command("compare")
@_common
@click.option("--threshold", type=float, default=None, help="max |z| allowed (default 3)")
@click.option("--slack", type=float, default=None, help="absolute slack for Euler models (default 0.02)")
@click.option("--c-scale", "c_scale", type=float, default=1.0, help="scale c before solving (gate self-test)")
@click.option("--gnuplot", type=click.Path(), default=None)
def cmd_compare(threshold, slack, c_scale, **kw):
    """Solver versus Monte Carlo; exits 1 if any point fails the gate."""
    outcome = {}

    def go():
        ctx = _resolve(kw)
        md = ctx.extra["cfg"].mc
        thr = threshold if threshold is not None else float(md.get("threshold", 3.0))
        exact = ctx.model_name in EXACT_MODELS
        slk = slack if slack is not None else float(md.get("slack", 0.0 if exact else 0.02))
        rf = build_rates(ctx.model, ctx.query)
        if c_scale != 1.0:
            rf = rf.with_c_scaled(c_scale)
        h = solve(rf, _solve_query(ctx), ctx.solver)
        h = h[0] if isinstance(h, tuple) else h
        fn = "indicator" if ctx.query.q == 0 and ctx.query.s == 0 else "laplace"
        rows, worst, ok = [], 0.0, True
        for x in ctx.xs:
            q = DrawdownQuery(ctx.query.q, ctx.query.s, 0.0, ctx.query.a, ctx.query.K, float(x))
            est = estimate(ctx.model, q, ctx.mc, fn)
            hs = float(h.at(x))
            z = (hs - est.mean) / est.std_err if est.std_err > 0 else (0.0 if hs == est.mean else math.inf)
            worst = max(worst, abs(z))
            ok &= abs(hs - est.mean) <= thr * est.std_err + slk
            rows.append((x, hs, est.mean, est.std_err, z))
        meta = [f"model={ctx.model_name}, seed={ctx.mc.seed}, paths={ctx.mc.n_paths}, threshold={thr}, slack={slk}"]
        if not exact:
            meta[0] += f", dt={ctx.mc.dt}"
        _write_csv(ctx.out, ["x", "h_solver", "h_mc", "std_err", "z"], rows, meta)
        click.echo(f"max|z| = {worst:.3f} ({'pass' if ok else 'FAIL'})", err=ctx.out is None)
        if ctx.gnuplot:
            _gnuplot(ctx.gnuplot, ctx.out, [(2, "solver"), (3, "mc")], "h(x)")
        outcome["ok"] = ok

    _run(go)
    if not outcome.get("ok", False):
        sys.exit(1)


@cli.command("levy")
@_common
def cmd_levy(**kw):
    """Joint transform of (tau, overshoot, maximum) for bm or cl over a (q, s, delta) grid."""

    def go():
        lists = {k: kw.pop(k) for k in ("q", "s", "delta")}
        cfg = load_config(kw.get("config_path"))
        for k in lists:
            if lists[k] is None:
                lists[k] = cfg.query.pop(k, None)
        ctx = _resolve(kw, need_sweep=False, cfg=cfg)
        if ctx.model_name not in ("bm", "cl"):
            raise errors.UnsupportedArgumentError("levy needs --model bm or cl")
        qs, ss, ds = (_floats(lists[k] or "0") for k in ("q", "s", "delta"))
        for name, vals in (("q", qs), ("s", ss), ("delta", ds)):
            if any(v < 0 for v in vals):
                raise errors.ValidationError([_violation(f"{name} ≥ 0", f"{name}={vals}")])
        a = ctx.query.a
        lines = [f"{'q':>10} {'s':>10} {'delta':>10} {'value':>12}"]
        for q in qs:
            for s in ss:
                rf = snlp_rate_field(ctx.model, q, s, a)
                b1 = float(rf.b1(0.0))
                c = float(rf.c(0.0))
                for d in ds:
                    try:
                        val = f"{levy_joint_lt(b1, 0.0, rf.b2_laplace, c, d):.6f}"
                    except errors.SingularError:
                        val = "singular"
                    lines.append(f"{q:>10g} {s:>10g} {d:>10g} {val:>12}")
        text = "\n".join(lines) + "\n"
        if ctx.out:
            with open(ctx.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)

    _run(go)


def _violation(name, msg):
    from .model import Violation

    return Violation(name, msg)


def main(argv=None):
    cli.main(args=argv, prog_name="ddlab", standalone_mode=True)


if __name__ == "__main__":
    main()
