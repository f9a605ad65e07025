"""Command-line front end tying the modules into reproducible experiments.

Conventions: complex flags use the ``x+yi`` syntax, continued fractions the
``a0;d1,d2,[t1,t2]`` digit-string syntax; artifacts are written atomically
(temp file + rename); every run ends with one machine-readable line
``status=... key=value ...`` on stdout; exit codes are 0 (success),
2 (precondition violations, including unknown flags) and 3 (numeric
failures).  A flat ``key = value`` config file supplies defaults that
explicit flags override.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import pickle
import re
import sys
import tempfile
import warnings
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Optional

from . import cfrac, circle, herman, render, siegel
from .cfrac import CFExpansion
from .errors import HermankitError, NumericError, PreconditionError
from .maps import BlaschkeMap, CubicHermanMap, QuadraticSiegelMap, periodic_points
from .numkit import make_context

CACHE_ENV = "HERMANKIT_CACHE"

def parse_complex(text: str) -> complex:
    """Parse the 'x+yi' flag syntax, e.g. '2+0.1i', '-3.9+3.2i', '0.5', 'i'."""
    s = str(text).strip().replace(" ", "")
    if not s:
        raise PreconditionError("empty complex literal")
    if not s.endswith("i"):
        try:
            return complex(float(s), 0.0)
        except ValueError as exc:
            raise PreconditionError(f"bad complex literal {text!r}") from exc
    body = s[:-1]
    # split into real part and imaginary coefficient at the last +/- that is
    # not an exponent sign
    split = -1
    for k in range(len(body) - 1, 0, -1):
        if body[k] in "+-" and body[k - 1] not in "eE":
            split = k
            break
    if split == -1:
        re_part, im_part = "", body
    else:
        re_part, im_part = body[:split], body[split:]
    if im_part in ("", "+"):
        im = 1.0
    elif im_part == "-":
        im = -1.0
    else:
        try:
            im = float(im_part)
        except ValueError as exc:
            raise PreconditionError(f"bad complex literal {text!r}") from exc
    if re_part == "":
        return complex(0.0, im)
    try:
        return complex(float(re_part), im)
    except ValueError as exc:
        raise PreconditionError(f"bad complex literal {text!r}") from exc


def format_complex(z: complex) -> str:
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def parse_real(text: str):
    """Real literal: Fraction when it contains '/', else float."""
    s = str(text).strip()
    if "/" in s:
        try:
            return Fraction(s)
        except ValueError as exc:
            raise PreconditionError(f"bad rational literal {text!r}") from exc
    try:
        return float(s)
    except ValueError as exc:
        raise PreconditionError(f"bad real literal {text!r}") from exc


# ---------------------------------------------------------------------------
# atomic artifacts and the cache


def atomic_write_bytes(path: str, data: bytes):
    """Temp file + rename: a killed run never leaves a partial artifact."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path: str, text: str):
    atomic_write_bytes(path, text.encode())


def cache_root(explicit: Optional[str] = None) -> str:
    if explicit:
        return explicit
    env = os.environ.get(CACHE_ENV)
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "hermankit")


def cache_get_or_compute(key: str, producer, cache_dir: Optional[str] = None):
    """Producer result cached under the canonical key; corrupted entries are
    recomputed and rewritten, an unwritable cache degrades to compute-through."""
    root = cache_root(cache_dir)
    name = hashlib.sha256(key.encode()).hexdigest()[:40] + ".pkl"
    path = os.path.join(root, name)
    try:
        with open(path, "rb") as fh:
            return pickle.load(fh)
    except (OSError, pickle.PickleError, EOFError, AttributeError, ValueError):
        pass
    value = producer()
    try:
        atomic_write_bytes(path, pickle.dumps(value))
    except OSError as exc:
        warnings.warn(f"cache unwritable ({exc}); computing through", stacklevel=2)
    return value


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Defaults shared by the subcommands; every field has a default and the
    canonical echo reparses to an identical config."""

    command: str = ""
    alpha: str = "0;[1]"
    x: str = "0.6180339887498949"
    terms: int = 400
    bits: int = 256
    n: int = 30
    iters: int = 200000
    theta0: float = 0.12345
    t: float = 0.0
    blaschke_a: float = 4.0
    a: str = "2+0.1i"
    u: str = "-3.98404183+3.28819628i"
    tol: float = 1e-8
    modes: int = 512
    p_max: int = 4
    rho_factor: float = 0.5
    k_max: int = 128
    ratio: str = "13/10"
    tail_digit: int = 1
    n_list: str = "4,6,8"
    center: str = "0+0i"
    width: float = 4.2
    height: float = 4.2
    nx: int = 512
    ny: int = 512
    max_iter: int = 256
    budget: int = 2000
    refine: int = 0
    filter: str = "bounded"
    out: str = ""
    csv: str = ""
    cache_dir: str = ""

    def canonical(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        cfg = cls()
        casts = {f.name: f.type for f in fields(cls)}
        for key, raw in mapping.items():
            if key not in casts:
                raise PreconditionError(f"unknown config key {key!r}")
            current = getattr(cfg, key)
            if isinstance(current, int):
                setattr(cfg, key, int(raw))
            elif isinstance(current, float):
                setattr(cfg, key, float(raw))
            else:
                setattr(cfg, key, str(raw))
        return cfg


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise PreconditionError(f"config line {lineno}: expected 'key = value'")
        key, val = body.split("=", 1)
        out[key.strip()] = val.strip()
    return out


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hermankit",
        description="Numerics for Herman rings, Siegel disks and continued fractions.",
    )
    parser.add_argument("--config", help="flat key = value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--cache-dir", dest="cache_dir")
        return p

    p = add("cf", help="continued-fraction expansion of a real number")
    p.add_argument("--x")
    p.add_argument("--terms", type=int)
    p.add_argument("--csv", help="write the convergent table as CSV")

    p = add("brjuno", help="Brjuno partial sum of a continued fraction")
    p.add_argument("--alpha")
    p.add_argument("--n", type=int)

    p = add("siegel-radius", help="conformal-radius estimate from the linearizer")
    p.add_argument("--alpha")
    p.add_argument("--terms", type=int)
    p.add_argument("--bits", type=int)

    p = add("rotnum", help="rotation number of a circle-preserving Blaschke map")
    p.add_argument("--t", type=float)
    p.add_argument("--a", dest="blaschke_a", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--theta0", type=float)

    p = add("solve-t", help="solve t so the Blaschke rotation number hits alpha")
    p.add_argument("--alpha")
    p.add_argument("--a", dest="blaschke_a", type=float)
    p.add_argument("--tol", type=float)

    p = add("render-julia", help="classify a dynamical plane and write a P6 image")
    p.add_argument("--map", choices=("quadratic", "cubic"), default="cubic")
    p.add_argument("--alpha")
    p.add_argument("--a")
    p.add_argument("--u")
    _raster_flags(p)
    p.add_argument("--out")

    p = add("render-param", help="classify the u-parameter plane for fixed a")
    p.add_argument("--a")
    _raster_flags(p)
    p.add_argument("--out")

    p = add("herman-rot", help="find a ring orbit and measure its rotation number")
    p.add_argument("--a")
    p.add_argument("--u")
    p.add_argument("--iters", type=int)
    p.add_argument("--budget", type=int)

    p = add("herman-curve", help="solve the invariant-curve conjugacy")
    p.add_argument("--a")
    p.add_argument("--u")
    p.add_argument("--alpha")
    p.add_argument("--modes", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--refine", type=int, help="pattern-search u toward alpha first (budget)")
    p.add_argument("--out", help="curve dump CSV (k,re,im)")

    p = add("abc-table", help="perturbation rows: A_n, alpha_n and radius estimates")
    p.add_argument("--alpha")
    p.add_argument("--ratio")
    p.add_argument("--N", dest="tail_digit", type=int)
    p.add_argument("--n-list", dest="n_list")
    p.add_argument("--terms", type=int)
    p.add_argument("--bits", type=int)
    p.add_argument("--out")

    p = add("area", help="pixel-counting area of a classified region")
    p.add_argument("--map", choices=("quadratic", "cubic"), default="quadratic")
    p.add_argument("--alpha")
    p.add_argument("--a")
    p.add_argument("--u")
    p.add_argument("--filter", dest="filter")
    p.add_argument("--refine", type=int, help="1: compare against half resolution")
    _raster_flags(p)
    p.add_argument("--csv")

    p = add("cycles", help="periodic points, multipliers and curve proximity")
    p.add_argument("--map", choices=("quadratic", "cubic"), default="cubic")
    p.add_argument("--alpha")
    p.add_argument("--a")
    p.add_argument("--u")
    p.add_argument("--p-max", dest="p_max", type=int)
    p.add_argument("--curve", help="curve dump CSV to compute proximity against")
    return parser


def _raster_flags(p):
    p.add_argument("--center")
    p.add_argument("--width", type=float)
    p.add_argument("--height", type=float)
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--max-iter", dest="max_iter", type=int)


def _merge_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = parse_config_text(fh.read())
        cfg = RunConfig.from_mapping({**_as_mapping(cfg), **file_cfg})
    for f in fields(RunConfig):
        if hasattr(args, f.name) and getattr(args, f.name) is not None:
            setattr(cfg, f.name, getattr(args, f.name))
    cfg.command = args.command
    if not cfg.cache_dir:
        cfg.cache_dir = ""
    return cfg


def _as_mapping(cfg: RunConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}


def _summary(**kv) -> str:
    parts = [f"{k}={v}" for k, v in kv.items()]
    return " ".join(parts)


def _alpha_from(cfg: RunConfig) -> CFExpansion:
    return cfrac.parse_cf(cfg.alpha)


def _raster_spec(cfg: RunConfig) -> render.RasterSpec:
    return render.RasterSpec(
        center=parse_complex(cfg.center),
        width=cfg.width,
        height=cfg.height,
        nx=cfg.nx,
        ny=cfg.ny,
        max_iter=cfg.max_iter,
    )


def _cubic_from(cfg: RunConfig) -> CubicHermanMap:
    return CubicHermanMap(a=parse_complex(cfg.a), u=parse_complex(cfg.u))


def _dynamical_map(cfg: RunConfig, which: str):
    if which == "quadratic":
        alpha = cfrac.to_float(_alpha_from(cfg))
        return QuadraticSiegelMap.from_alpha(alpha)
    return _cubic_from(cfg)


# ---------------------------------------------------------------------------
# handlers


def _cmd_cf(cfg: RunConfig) -> str:
    x = parse_real(cfg.x)
    cf = cfrac.expand(x, cfg.terms)
    if cfg.csv:
        n = len(cf.digits)
        atomic_write_text(cfg.csv, cfrac.convergents(cf, n).to_csv())
    digits = ",".join(str(d) for d in cf.digits)
    return _summary(status="ok", cmd="cf", a0=cf.a0, digits=digits,
                    terminated=int(cf.terminated))


def _cmd_brjuno(cfg: RunConfig) -> str:
    cf = _alpha_from(cfg)
    s = cfrac.brjuno_partial_sum(cf, cfg.n)
    return _summary(status="ok", cmd="brjuno", n=cfg.n, partial_sum=repr(s))


def _cmd_siegel_radius(cfg: RunConfig) -> str:
    ctx = make_context(cfg.bits)
    cf = _alpha_from(cfg)
    cache = cfg.cache_dir or None
    series = siegel.linearizer_coeffs(cf, cfg.terms, ctx, cache_dir=cache)
    est = siegel.conformal_radius_estimate(series)
    return _summary(
        status="ok", cmd="siegel-radius", r_hat=repr(est.value),
        uncertainty=repr(est.uncertainty), diverging=int(est.diverging),
        terms=cfg.terms, bits=cfg.bits,
    )


def _cmd_rotnum(cfg: RunConfig) -> str:
    fam = BlaschkeMap(t=cfg.t, a=cfg.blaschke_a)
    est = circle.rotation_number(fam, cfg.theta0, cfg.iters)
    return _summary(status="ok", cmd="rotnum", rho=repr(est.value),
                    err=repr(est.error_bound), iters=est.iterations)


def _cmd_solve_t(cfg: RunConfig) -> str:
    fam = BlaschkeMap(t=0.0, a=cfg.blaschke_a)
    alpha = _alpha_from(cfg)
    t, diag = circle.solve_param_for_rotation(fam, alpha, cfg.tol, full_output=True)
    est = circle.rotation_number(BlaschkeMap(t=t, a=cfg.blaschke_a), cfg.theta0, 400000)
    resid = circle.circular_distance(est.value, cfrac.to_float(alpha))
    return _summary(status="ok", cmd="solve-t", t=repr(t), residual=repr(resid),
                    evaluations=diag.evaluations)


def _cmd_render_julia(cfg: RunConfig, which: str) -> str:
    mapping = _dynamical_map(cfg, which)
    spec = _raster_spec(cfg)
    raster = render.classify_dynamical(mapping, spec)
    out = cfg.out or "julia.ppm"
    atomic_write_bytes(out, render.encode_image(raster))
    est = render.area_from_raster(raster, render.CODE_BOUNDED)
    return _summary(status="ok", cmd="render-julia", out=out,
                    bounded_area=repr(est.value), nx=spec.nx, ny=spec.ny)


def _cmd_render_param(cfg: RunConfig) -> str:
    spec = _raster_spec(cfg)
    raster = render.classify_parameter(parse_complex(cfg.a), spec)
    out = cfg.out or "param.ppm"
    atomic_write_bytes(out, render.encode_image(raster))
    est = render.area_from_raster(raster, 0)
    return _summary(status="ok", cmd="render-param", out=out,
                    bounded_bounded_area=repr(est.value), nx=spec.nx, ny=spec.ny)


def _cmd_herman_rot(cfg: RunConfig) -> str:
    mapping = _cubic_from(cfg)
    seed = herman.find_ring_seed(mapping, budget=max(cfg.budget, 1000))
    est = herman.winding_rotation_number(mapping, seed, cfg.iters)
    return _summary(status="ok", cmd="herman-rot", rho=repr(est.value),
                    err=repr(est.error_bound), seed=format_complex(seed),
                    iters=est.iterations)


def _cmd_herman_curve(cfg: RunConfig) -> str:
    mapping = _cubic_from(cfg)
    alpha = _alpha_from(cfg)
    refined = ""
    if cfg.refine:
        result = herman.refine_u(mapping, alpha, budget=cfg.refine)
        mapping = CubicHermanMap(a=mapping.a, u=result.u)
        refined = format_complex(result.u)
    seed = herman.find_ring_seed(mapping, budget=max(cfg.budget, 1000))
    curve = herman.invariant_curve_newton(mapping, alpha, seed, M=cfg.modes, tol=cfg.tol)
    out = cfg.out or "curve.csv"
    atomic_write_text(out, herman.curve_csv(curve))
    kv = dict(status="ok", cmd="herman-curve", residual=repr(curve.residual),
              modes=curve.M, out=out)
    if refined:
        kv["refined_u"] = refined
    return _summary(**kv)


def _cmd_abc_table(cfg: RunConfig) -> str:
    ctx = make_context(cfg.bits)
    alpha = _alpha_from(cfg)
    ratio = parse_real(cfg.ratio)
    ns = [int(v) for v in cfg.n_list.split(",") if v.strip()]
    cache = cfg.cache_dir or None
    result = herman.abc_experiment(alpha, ratio, cfg.tail_digit, ns,
                                   series_len=cfg.terms, ctx=ctx, cache_dir=cache)
    out = cfg.out or "abc.csv"
    atomic_write_text(out, herman.abc_csv(result))
    gaps = ",".join(repr(abs(r.r_estimate - result.r0_hat)) for r in result.rows)
    return _summary(status="ok", cmd="abc-table", out=out,
                    r_alpha_hat=repr(result.r_alpha_hat),
                    r0_hat=repr(result.r0_hat), gaps=gaps)


_FILTER_NAMES = {
    "bounded": render.CODE_BOUNDED,
    "to_inf": render.CODE_TO_INFINITY,
    "to_zero": render.CODE_TO_ZERO,
}


def _cmd_area(cfg: RunConfig, which: str) -> str:
    mapping = _dynamical_map(cfg, which)
    spec = _raster_spec(cfg)
    code = _FILTER_NAMES.get(cfg.filter)
    if code is None:
        try:
            code = int(cfg.filter)
        except ValueError as exc:
            raise PreconditionError(f"unknown filter {cfg.filter!r}") from exc
    previous = None
    if cfg.refine:
        half = render.classify_dynamical(mapping, spec.halved())
        previous = render.area_from_raster(half, code)
    raster = render.classify_dynamical(mapping, spec)
    est = render.area_from_raster(raster, code, previous=previous)
    if cfg.csv:
        rows = []
        if previous is not None:
            rows.append((cfg.filter, previous))
        rows.append((cfg.filter, est))
        atomic_write_text(cfg.csv, render.area_csv(rows))
    kv = dict(status="ok", cmd="area", filter=cfg.filter, value=repr(est.value),
              pixels=est.pixel_count, nx=spec.nx, ny=spec.ny)
    if est.refinement_delta is not None:
        kv["delta"] = repr(est.refinement_delta)
    return _summary(**kv)


def _cmd_cycles(cfg: RunConfig, which: str, curve_path: Optional[str]) -> str:
    mapping = _dynamical_map(cfg, which)
    records = []
    for p in range(1, cfg.p_max + 1):
        records.extend(periodic_points(mapping, p))
    uniq = {}
    for rec in records:
        rep = rec.points[0]
        uniq[(round(rep.real, 9), round(rep.imag, 9), rec.period)] = rec
    lines = []
    for rec in sorted(uniq.values(), key=lambda r: (r.period, r.points[0].real)):
        lines.append(
            f"period={rec.period} z={format_complex(rec.points[0])} "
            f"multiplier={format_complex(rec.multiplier)} repelling={int(rec.is_repelling)}"
        )
    if lines:
        print("\n".join(lines))
    n_rep = sum(1 for r in uniq.values() if r.is_repelling)
    kv = dict(status="ok", cmd="cycles", cycles=len(uniq), repelling=n_rep)
    if curve_path:
        with open(curve_path, "r", encoding="utf-8") as fh:
            curve = herman.curve_from_csv(fh.read(), cfrac.to_float(_alpha_from(cfg)))
        prox = herman.cycle_proximity(mapping, cfg.p_max, curve)
        for cp in prox:
            print(
                f"proximity period={cp.cycle.period} side={cp.side} "
                f"distance={cp.distance!r}"
            )
        kv["sides"] = ",".join(sorted({cp.side for cp in prox}))
    return _summary(**kv)


def run(argv) -> int:
    """Entry point used by tests: parse, dispatch, print the summary line."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return code

    try:
        cfg = _merge_config(args)
        which = getattr(args, "map", None) or "cubic"
        handler = {
            "cf": lambda: _cmd_cf(cfg),
            "brjuno": lambda: _cmd_brjuno(cfg),
            "siegel-radius": lambda: _cmd_siegel_radius(cfg),
            "rotnum": lambda: _cmd_rotnum(cfg),
            "solve-t": lambda: _cmd_solve_t(cfg),
            "render-julia": lambda: _cmd_render_julia(cfg, which),
            "render-param": lambda: _cmd_render_param(cfg),
            "herman-rot": lambda: _cmd_herman_rot(cfg),
            "herman-curve": lambda: _cmd_herman_curve(cfg),
            "abc-table": lambda: _cmd_abc_table(cfg),
            "area": lambda: _cmd_area(cfg, which),
            "cycles": lambda: _cmd_cycles(cfg, which, getattr(args, "curve", None)),
        }[args.command]
        summary = handler()
    except PreconditionError as exc:
        print(_summary(status="precondition_error", cmd=args.command, msg=_quote(exc)))
        return 2
    except NumericError as exc:
        print(_summary(status="numeric_error", cmd=args.command, msg=_quote(exc)))
        return 3
    except HermankitError as exc:
        print(_summary(status="error", cmd=args.command, msg=_quote(exc)))
        return 3
    print(summary)
    return 0


def _quote(exc: BaseException) -> str:
    return '"' + str(exc).replace('"', "'") + '"'


def main() -> None:
    sys.exit(run(sys.argv[1:]))
