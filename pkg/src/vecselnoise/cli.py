"""Command-line interface: ``vecselnoise steady|spectrum|sweep|validate|toy-verify``."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .fluctuation import BACKEND, FluctuationSystem, build_system, linear_grid, log_grid
from .model import (
    ConfigError,
    ModelParams,
    NumericalError,
    ParameterError,
    check_validity,
    derive_rates,
    format_params,
    hierarchy_violations,
    load_config,
)
from .steadystate import closed_form_steady, refine_steady, threshold

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

SWEEP_VARS = ("pump_ratio", "xi", "p", "g")
COLUMNS = ("Omega", "C_aa", "C_bb", "C_ab", "d_aa", "d_bb", "d_ab")


class Abort(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _load(config_path, dichroism_sign) -> ModelParams:
    try:
        params = load_config(config_path).params if config_path else ModelParams()
        if dichroism_sign is not None:
            params = params.replace(dichroism_sign_a=1 if dichroism_sign == "plus" else -1)
    except (ConfigError, ParameterError) as exc:
        raise Abort(EXIT_CONFIG, f"config error: {exc}") from None
    except OSError as exc:
        raise Abort(EXIT_CONFIG, f"cannot read config: {exc}") from None
    return params


def _run(fn):
    try:
        code = fn()
    except Abort as exc:
        click.echo(exc.message, err=True)
        code = exc.code
    sys.exit(code)


def _grid(omega_min, omega_max, omega_points, log):
    if not (2 <= omega_points <= 1_000_000):
        raise Abort(EXIT_CONFIG, "omega-points must lie in [2, 1e6]")
    if not (0 < omega_min < omega_max):
        raise Abort(EXIT_CONFIG, "need 0 < omega-min < omega-max")
    return log_grid(omega_min, omega_max, omega_points) if log else linear_grid(omega_min, omega_max, omega_points)


def _header(params: ModelParams, system: FluctuationSystem | None, extra: dict) -> list[str]:
    lines = [f"# vecselnoise {__version__}", f"# kernel = {BACKEND}"]
    lines += [f"# {line}" for line in format_params(params)]
    for key, value in extra.items():
        lines.append(f"# {key} = {value}")
    if system is not None:
        st = system.steady
        lines.append(f"# steady.refined = {st.refined}")
        lines.append(f"# steady.I_a = {_fmt(st.I_a)}")
        lines.append(f"# steady.I_b = {_fmt(st.I_b)}")
        lines.append(f"# steady.lasing = {st.lasing}")
        lines.append(f"# stability_margin = {_fmt(system.stability_margin())}")
    return lines


def _render(sweep, header, fmt: str) -> str:
    if fmt == "csv":
        out = header + [",".join(COLUMNS)]
        out += [",".join(_fmt(v) for v in row) for row in sweep.rows()]
        return "\n".join(out) + "\n"
    out = []
    for row in sweep.rows():
        items = ", ".join(f'"{k}": {_fmt(v) if math.isfinite(v) else "null"}' for k, v in zip(COLUMNS, row))
        out.append("{" + items + "}")
    return "\n".join(out) + "\n"


def _meta_json(header: list[str]) -> str:
    meta = {}
    for line in header:
        body = line[2:]
        if " = " in body:
            k, v = body.split(" = ", 1)
            meta[k] = v
    return json.dumps(meta, indent=1, sort_keys=True) + "\n"


def _emit(text: str, out: str | None):
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _system(params, closed_form: bool, lower):
    try:
        return build_system(params, refine=not closed_form, lower_populations=lower)
    except NumericalError as exc:
        raise Abort(EXIT_NUMERICAL, f"numerical failure: {exc}") from None


def _spectrum_text(params, grid, fmt, closed_form, allow_unstable, threads, lower, extra):
    system = _system(params, closed_form, lower)
    try:
        sweep = system.sweep(grid, allow_unstable=allow_unstable, num_threads=threads)
    except NumericalError as exc:
        ev = sorted(np.linalg.eigvals(system.D), key=lambda z: (-z.real, z.imag))
        top = ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in ev[:4])
        raise Abort(EXIT_NUMERICAL, f"numerical failure: {exc}\nleading eigenvalues: {top}") from None
    header = _header(params, system, extra)
    if not system.steady.lasing:
        header.append("# note = non-lasing steady state")
    return _render(sweep, header, fmt), header


# ---------------------------------------------------------------- click wiring

config_opt = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                          help="key = value parameter file (defaults to the reference set)")
sign_opt = click.option("--dichroism-sign", type=click.Choice(["plus", "minus"]), default=None,
                        help="sign of the a-mode circular coupling term")
out_opt = click.option("--out", type=click.Path(), default=None, help="output path (stdout if omitted)")
fmt_opt = click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="csv")


def grid_opts(f):
    f = click.option("--omega-min", type=float, default=1e-2, show_default=True)(f)
    f = click.option("--omega-max", type=float, default=1e4, show_default=True)(f)
    f = click.option("--omega-points", type=int, default=400, show_default=True)(f)
    f = click.option("--log/--linear", "log", default=True, show_default=True)(f)
    return f


def numerics_opts(f):
    f = click.option("--closed-form", is_flag=True,
                     help="linearize around the closed-form state instead of the Newton-refined one")(f)
    f = click.option("--allow-unstable", is_flag=True,
                     help="diagnostic: evaluate spectra even if the drift matrix is unstable")(f)
    f = click.option("--threads", type=int, default=1, show_default=True)(f)
    f = click.option("--lower-populations", default=None,
                     help="six comma-separated lower-level populations M1+,M1-,N1+,N1-,L1+,L1-")(f)
    return f


def _parse_lower(text):
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise Abort(EXIT_CONFIG, "lower-populations must be six numbers") from None
    if len(vals) != 6:
        raise Abort(EXIT_CONFIG, "lower-populations must be six numbers")
    return np.array(vals)


@click.group()
@click.version_option(__version__)
def main():
    """Steady states and photocurrent noise spectra of two coupled VECSELs."""


@main.command()
@config_opt
@sign_opt
def steady(config_path, dichroism_sign):
    """Print thresholds, stationary intensities, populations and validity."""

    def body():
        params = _load(config_path, dichroism_sign)
        dr = derive_rates(params)
        Ra, Rb = threshold(params, dr)
        cf = closed_form_steady(params, dr)
        lines = [f"threshold R_a = {_fmt(Ra)}", f"threshold R_b = {_fmt(Rb)}",
                 f"pump R_a = {_fmt(params.R_a)} (ratio {_fmt(params.pump_ratio)})",
                 f"R_b = {_fmt(dr.R_b)}, R_1 = {_fmt(dr.R_1)}, R_2 = {_fmt(dr.R_2)}, R_3 = {_fmt(dr.R_3)}"]
        for msg in hierarchy_violations(params):
            lines.append(f"warning: {msg}")
        lines.append("closed form:")
        lines += _steady_lines(cf)
        lines += ["  " + s for s in check_validity(params, cf, dr).lines()]
        code = EXIT_OK
        if cf.lasing:
            try:
                ref, info = refine_steady(cf, params, dr, return_info=True)
                lines.append(f"refined (residual {info.residual:.3e}, scale {info.scale:.3e}, "
                             f"continuation steps {info.continuation_steps}):")
                lines += _steady_lines(ref)
                pol = ref.polarization_intensities()
                lines.append("  linear components: " + ", ".join(f"{k} = {_fmt(v)}" for k, v in pol.items()))
                lines += ["  " + s for s in check_validity(params, ref, dr).lines()]
            except NumericalError as exc:
                lines.append(f"refinement failed: {exc}")
                code = EXIT_NUMERICAL
        else:
            lines.append("not lasing: both modes below threshold")
        click.echo("\n".join(lines))
        return code

    _run(body)


def _steady_lines(st) -> list[str]:
    return [
        f"  lasing_a = {st.lasing_a}, lasing_b = {st.lasing_b}",
        f"  I_a = {_fmt(st.I_a)}",
        f"  I_b = {_fmt(st.I_b)}",
        f"  M2 = {_fmt(st.M2_plus)}, {_fmt(st.M2_minus)}",
        f"  N2 = {_fmt(st.N2_plus)}, {_fmt(st.N2_minus)}",
        f"  L2 = {_fmt(st.L2_plus)}, {_fmt(st.L2_minus)}",
    ]


@main.command()
@config_opt
@sign_opt
@out_opt
@fmt_opt
@grid_opts
@numerics_opts
def spectrum(config_path, dichroism_sign, out, fmt, omega_min, omega_max, omega_points, log,
             closed_form, allow_unstable, threads, lower_populations):
    """Write C_aa, C_bb, C_ab and raw densities on a frequency grid."""

    def body():
        params = _load(config_path, dichroism_sign)
        grid = _grid(omega_min, omega_max, omega_points, log)
        lower = _parse_lower(lower_populations)
        extra = {"grid": f"{'log' if log else 'linear'} {_fmt(omega_min)} {_fmt(omega_max)} {omega_points}",
                 "linearization": "closed-form" if closed_form else "refined",
                 "stability_gate": "off" if allow_unstable else "on"}
        text, header = _spectrum_text(params, grid, fmt, closed_form, allow_unstable, threads, lower, extra)
        _emit(text, out)
        if fmt == "jsonl" and out is not None:
            Path(str(out) + ".meta.json").write_text(_meta_json(header), encoding="utf-8")
        return EXIT_OK

    _run(body)


def _parse_sweep(spec: str):
    if "=" not in spec:
        raise Abort(EXIT_CONFIG, "--sweep expects VAR=v1,v2,...")
    var, raw = (s.strip() for s in spec.split("=", 1))
    if var not in SWEEP_VARS:
        raise Abort(EXIT_CONFIG, f"sweep variable must be one of {', '.join(SWEEP_VARS)}")
    vals = [v.strip() for v in raw.split(",") if v.strip()]
    if not vals:
        raise Abort(EXIT_CONFIG, "sweep value list is empty")
    try:
        return var, [float(v) for v in vals]
    except ValueError:
        raise Abort(EXIT_CONFIG, f"non-numeric sweep value in {raw!r}") from None


def _apply(params: ModelParams, var: str, value: float) -> ModelParams:
    ratio = params.pump_ratio
    if var == "pump_ratio":
        return params.with_pump_ratio(value)
    if var == "xi":
        return params.replace(xi_a=value, xi_b=value).with_pump_ratio(ratio)
    if var == "p":
        return params.replace(p=value)
    return params.replace(g_a=value, g_b=value).with_pump_ratio(ratio)


@main.command(name="sweep")
@config_opt
@sign_opt
@click.option("--out", type=click.Path(file_okay=False), required=True, help="output directory")
@fmt_opt
@grid_opts
@numerics_opts
@click.option("--sweep", "sweep_spec", required=True, help="VAR=v1,v2,... with VAR in pump_ratio, xi, p, g")
def sweep_cmd(config_path, dichroism_sign, out, fmt, omega_min, omega_max, omega_points, log,
              closed_form, allow_unstable, threads, lower_populations, sweep_spec):
    """Repeat the spectrum for each value of one parameter (one file per value plus index.csv).

    pump_ratio, xi and g sweeps keep the pump ratio to threshold fixed.
    """

    def body():
        base = _load(config_path, dichroism_sign)
        var, values = _parse_sweep(sweep_spec)
        grid = _grid(omega_min, omega_max, omega_points, log)
        lower = _parse_lower(lower_populations)
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        ext = "csv" if fmt == "csv" else "jsonl"
        index = ["# vecselnoise sweep index", f"# variable = {var}", "index,value,file,status"]
        code = EXIT_OK
        for k, value in enumerate(values):
            name = f"{var}_{k:03d}.{ext}"
            try:
                params = _apply(base, var, value)
            except ParameterError as exc:
                raise Abort(EXIT_CONFIG, f"config error for {var}={value}: {exc}") from None
            extra = {"sweep": f"{var} = {_fmt(value)}",
                     "grid": f"{'log' if log else 'linear'} {_fmt(omega_min)} {_fmt(omega_max)} {omega_points}",
                     "linearization": "closed-form" if closed_form else "refined",
                     "stability_gate": "off" if allow_unstable else "on"}
            try:
                text, header = _spectrum_text(params, grid, fmt, closed_form, allow_unstable, threads, lower, extra)
            except Abort as exc:
                if exc.code != EXIT_NUMERICAL:
                    raise
                click.echo(f"{var}={_fmt(value)}: {exc.message}", err=True)
                index.append(f"{k},{_fmt(value)},,{exc.message.splitlines()[0].replace(',', ';')}")
                code = EXIT_NUMERICAL
                continue
            (outdir / name).write_text(text, encoding="utf-8")
            if fmt == "jsonl":
                (outdir / (name + ".meta.json")).write_text(_meta_json(header), encoding="utf-8")
            index.append(f"{k},{_fmt(value)},{name},ok")
        (outdir / "index.csv").write_text("\n".join(index) + "\n", encoding="utf-8")
        return code

    _run(body)


@main.command()
@config_opt
@sign_opt
@click.option("--out", type=click.Path(), default=None, help="write the JSON report here")
@click.option("--lyapunov-points", type=int, default=100_000, show_default=True)
@click.option("--omega-max", type=float, default=1e6, show_default=True)
def validate(config_path, dichroism_sign, out, lyapunov_points, omega_max):
    """Run the independent oracles; exit 0 only if all pass."""
    from .verification import run_suite

    def body():
        params = _load(config_path, dichroism_sign)
        rep = run_suite(params, lyapunov_points=lyapunov_points, omega_max=omega_max)
        click.echo("\n".join(rep.lines()))
        click.echo(f"overall: {'PASS' if rep.passed else 'FAIL'}")
        if out is not None:
            Path(out).write_text(json.dumps(rep.record(), indent=1, sort_keys=True, default=str) + "\n",
                                 encoding="utf-8")
        return EXIT_OK if rep.passed else EXIT_VALIDATION

    _run(body)


@main.command(name="toy-verify")
@click.option("--g", "gs", type=float, multiple=True, help="coupling (repeatable; default 0.01 and 0.02)")
@click.option("--gamma-perp", type=float, default=1.0, show_default=True)
@click.option("--gamma-2", type=float, default=0.1, show_default=True)
@click.option("--fock-cutoff", type=int, default=6, show_default=True)
@click.option("--window", type=float, default=None, help="fit window after the 5/gamma_2 transient")
def toy_verify(gs, gamma_perp, gamma_2, fock_cutoff, window):
    """Fit dispersive and Kerr coefficients of the single-emitter two-mode model."""
    from .toymodel import ToyConfig, extract_effective_coefficients

    def body():
        try:
            configs = [ToyConfig(g=g, gamma_perp=gamma_perp, gamma_2=gamma_2, fock_cutoff=fock_cutoff)
                       for g in (gs or (0.01, 0.02))]
        except ValueError as exc:
            raise Abort(EXIT_CONFIG, f"config error: {exc}") from None
        ok = True
        for cfg in configs:
            try:
                fit = extract_effective_coefficients(cfg, window=window)
            except NumericalError as exc:
                raise Abort(EXIT_NUMERICAL, f"numerical failure: {exc}") from None
            e1, e2 = fit.relative_errors()
            good = fit.conclusive and e1 <= 0.05 and e2 <= 0.20
            ok = ok and good
            click.echo("\n".join(fit.lines()))
            click.echo(f"within tolerance (5% / 20%): {'yes' if good else 'no'}")
        return EXIT_OK if ok else EXIT_VALIDATION

    _run(body)


if __name__ == "__main__":  # pragma: no cover
    main()
