"""Command-line front end: parameter sweeps to figure-ready CSV.

One subcommand per analysis family:

  steady       fixed points along a parameter sweep
  bistability  all-branch sweep with fold detection
  stability    max Re(eigenvalue) of the followed branch
  gain         net gain, simple and corrected gain, threshold flag
  potential    two-dimensional scalar potential on a (u1, u2) grid
  potential1d  one-dimensional potential
  flow         planar flow field on a (u1, u2) grid
  g2           second-order coherence along a drive sweep

Physical subcommands read the flat key=value parameter file; potential,
potential1d and flow read coefficient-injection files instead (the
figure captions specify coefficients, not drives).  Exit status: 0 on
success, 2 when some sweep points produced no result (gaps), 1 on hard
errors.  Primary CSV output is byte-identical for any worker count.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import coherence, lasing, steady
from . import stability as stab
from .constants import angular_to_hz, hz_to_angular
from .csvio import write_csv, write_metadata
from .params import (ParameterFileError, SystemParams, params_from_text,
                     PHYSICAL_KEYS, OPTIONAL_PHYSICAL_KEYS)

__version__ = "0.1.0"

EXIT_OK = 0
EXIT_HARD = 1
EXIT_PARTIAL = 2

PHYSICAL_SUBCOMMANDS = ("steady", "bistability", "stability", "gain", "g2")
INJECTION_SUBCOMMANDS = ("potential", "potential1d", "flow")

STABILITY_COLUMNS = ("omega_drive_hz", "max_re_hz", "stable") + tuple(
    f"{part}_eig{i}_hz" for i in range(1, 7) for part in ("re", "im"))


class CliError(RuntimeError):
    """Hard usage or input error; maps to exit status 1."""


@dataclass(frozen=True)
class SweepSpec:
    key: str
    lo: float
    hi: float
    n: int

    @property
    def grid(self):
        return np.linspace(self.lo, self.hi, self.n)


def parse_sweep(text) -> SweepSpec:
    parts = text.split(":")
    if len(parts) != 4:
        raise CliError(f"--sweep expects key:min:max:n, got {text!r}")
    key, lo, hi, n = parts
    try:
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise CliError(f"bad sweep bounds in {text!r}: {exc}") from None
    if n < 2:
        raise CliError("sweep needs n_points >= 2")
    if not lo < hi:
        raise CliError("sweep needs min < max")
    return SweepSpec(key=key, lo=lo, hi=hi, n=n)


def parse_overrides(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise CliError(f"--override expects key=value, got {pair!r}")
        key, _, val = pair.partition("=")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise CliError(f"--override value not a number: {pair!r}") from None
    return out


def resolve_threads(flag_value):
    if flag_value is not None:
        return max(1, int(flag_value))
    env = os.environ.get("PHONOLASE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"PHONOLASE_THREADS is not an integer: {env!r}") from None
    return os.cpu_count() or 1


def pool_map(fn, items, threads):
    """Deterministic map: results gathered in item order regardless of pool."""
    items = list(items)
    if threads <= 1 or len(items) < 3:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        chunk = max(1, len(items) // (threads * 4))
        return list(pool.map(fn, items, chunksize=chunk))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="phonolase",
        description="Coupled-cavity phonon-laser analysis sweeps")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in PHYSICAL_SUBCOMMANDS + INJECTION_SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--params", required=True, help="parameter file path")
        p.add_argument("--sweep", required=True,
                       help="sweep spec key:min:max:n")
        p.add_argument("--sweep2", default=None,
                       help="second grid axis for potential/flow (u2:min:max:n)")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--override", action="append", default=[],
                       help="key=value parameter override (repeatable)")
        p.add_argument("--branch", choices=("continuation", "all"),
                       default="continuation")
        p.add_argument("--threads", type=int, default=None)
    return parser


def load_physical_params(path, overrides) -> SystemParams:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read parameter file: {exc}") from exc
    return params_from_text(text, source=str(path), overrides=overrides)


def params_at(params_base_text, source, overrides, key, value) -> SystemParams:
    merged = dict(overrides)
    merged[key] = value
    return params_from_text(params_base_text, source=source, overrides=merged)


def metadata_payload(args, sweep, extra=None):
    payload = {
        "tool": "phonolase",
        "version": __version__,
        "subcommand": args.subcommand,
        "sweep": {"key": sweep.key, "min": sweep.lo, "max": sweep.hi,
                  "n_points": sweep.n},
        "overrides": parse_overrides(args.override),
        "branch_policy": args.branch,
        "threads": resolve_threads(args.threads),
    }
    if extra:
        payload.update(extra)
    return payload


# --- workers (top level so the process pool can pickle them) --------------

def _g2_point(item):
    """(params, amplitudes) -> basis integrals or None on failure."""
    params, amplitudes = item
    branch = steady.SteadyStateBranch(a1=amplitudes[0], a2=amplitudes[1],
                                      b=amplitudes[2], residual=0.0)
    try:
        report = stab.classify(branch, params)
        if report.marginal:
            return ("marginal", None)
        basis = coherence.spectral_basis(branch, params)
        return ("ok", basis)
    except (coherence.PoleAtFrequency, coherence.TailDivergence):
        return ("marginal", None)
    except Exception:
        return ("gap", None)


def _enumerate_item(item):
    return steady._enumerate_point(item)


# --- subcommand drivers ----------------------------------------------------

def run_steady(args, text, overrides, sweep, threads):
    rows, gaps = [], 0
    carried = None
    followed = None
    for val in sweep.grid:
        params = params_at(text, args.params, overrides, sweep.key, val)
        try:
            branches = steady.solve_fixed_points(params, seeds=carried)
        except steady.NoConvergence:
            gaps += 1
            continue
        carried = [tuple(b.amplitudes) for b in branches]
        if args.branch == "continuation":
            followed = steady.nearest_branch(
                branches, followed if followed is not None else (0j, 0j, 0j))
            branches = [followed]
        drive_hz = angular_to_hz(params.drive_mod)
        for idx, br in enumerate(branches):
            rows.append((drive_hz, idx,
                         br.a1.real, br.a1.imag, br.a2.real, br.a2.imag,
                         br.b.real, br.b.imag, abs(br.b), br.residual,
                         bool(br.stable)))
    write_csv(args.out, steady.STEADY_COLUMNS, rows)
    return gaps, {}


def run_bistability(args, text, overrides, sweep, threads):
    if sweep.key != "omega_drive_hz":
        raise CliError("bistability sweeps omega_drive_hz")
    params = params_from_text(text, source=args.params, overrides=overrides)
    result = steady.sweep_bistability(
        params, hz_to_angular(sweep.lo), hz_to_angular(sweep.hi), sweep.n,
        map_fn=lambda f, xs: pool_map(_enumerate_item, xs, threads))
    rows, gaps = [], 0
    for om, branches in zip(result.control_values, result.branches_per_point):
        if not branches:
            gaps += 1
            continue
        rows.extend(steady.branch_rows(om, branches))
    write_csv(args.out, steady.STEADY_COLUMNS, rows)
    extra = {"fold_points_hz": [angular_to_hz(f) for f in result.fold_points]}
    return gaps, extra


def run_stability(args, text, overrides, sweep, threads):
    if sweep.key != "omega_drive_hz":
        raise CliError("stability sweeps omega_drive_hz")
    params = params_from_text(text, source=args.params, overrides=overrides)
    grid = [hz_to_angular(v) for v in sweep.grid]
    result = stab.stability_sweep(params, grid)
    rows = []
    for pt in result.points:
        row = [angular_to_hz(pt.omega_drive_abs),
               angular_to_hz(pt.report.max_re),
               bool(pt.report.stable)]
        for ev in pt.report.eigenvalues:
            row.extend([angular_to_hz(ev.real), angular_to_hz(ev.imag)])
        rows.append(tuple(row))
    write_csv(args.out, STABILITY_COLUMNS, rows)
    extra = {"max_re_zero_crossings_hz":
             [angular_to_hz(x) for x in result.zero_crossings]}
    return 0, extra


def run_gain(args, text, overrides, sweep, threads):
    if sweep.key != "omega_drive_hz":
        raise CliError("gain sweeps omega_drive_hz")
    params = params_from_text(text, source=args.params, overrides=overrides)
    rows = []
    followed = None
    for val in sweep.grid:
        p = params.with_drive(hz_to_angular(val))
        followed = steady.follow_to(params, hz_to_angular(val), followed)
        coeffs = lasing.cubic_coefficients(p)
        jz = (abs(followed.a1) ** 2 - abs(followed.a2) ** 2) / 2.0
        b_abs2 = abs(followed.b) ** 2
        gprime = lasing.gain_simple(p, jz)
        gfull = lasing.gain_full(p, jz, b_abs2)
        rows.append((val, angular_to_hz(coeffs.alpha_prime),
                     angular_to_hz(gprime), angular_to_hz(gfull),
                     gfull > p.gamma_m))
    write_csv(args.out, lasing.GAIN_COLUMNS, rows)
    return 0, {}


def run_g2(args, text, overrides, sweep, threads):
    if sweep.key != "omega_drive_hz":
        raise CliError("g2 sweeps omega_drive_hz")
    params = params_from_text(text, source=args.params, overrides=overrides)

    # serial continuation pre-pass, then parallel spectral integrals
    per_point = []
    followed = None
    carried = None
    for val in sweep.grid:
        p = params.with_drive(hz_to_angular(val))
        try:
            branches = steady.solve_fixed_points(p, seeds=carried)
        except steady.NoConvergence:
            per_point.append((p, []))
            continue
        carried = [tuple(b.amplitudes) for b in branches]
        if args.branch == "continuation":
            followed = steady.nearest_branch(
                branches, followed if followed is not None else (0j, 0j, 0j))
            per_point.append((p, [followed]))
        else:
            per_point.append((p, branches))

    items, index = [], []
    for i, (p, branches) in enumerate(per_point):
        for br in branches:
            items.append((p, tuple(br.amplitudes)))
            index.append(i)
    results = pool_map(_g2_point, items, threads)

    rows, gaps = [], 0
    cursor = 0
    for i, (p, branches) in enumerate(per_point):
        if not branches:
            gaps += 1
            continue
        for br in branches:
            status, basis = results[cursor]
            cursor += 1
            drive_hz = angular_to_hz(p.drive_mod)
            b_abs2 = abs(br.b) ** 2
            if status == "gap":
                gaps += 1
                continue
            if status == "marginal":
                rows.append((drive_hz, "na", "na", "na", "na", b_abs2))
                continue
            moments = coherence.combine_basis(
                basis,
                n_b=_thermal(p), gamma_c=p.gamma_c)
            g2 = coherence.g2_zero(br, moments)
            rows.append((drive_hz, g2, moments.y_nb,
                         moments.y_bb.real, moments.y_bb.imag, b_abs2))
    write_csv(args.out, coherence.G2_COLUMNS, rows)
    extra = {"stability_policy":
             "moments evaluated along the followed branch; marginal points "
             "are reported as na"}
    return gaps, extra


def _thermal(params):
    from .params import thermal_occupation
    return thermal_occupation(params.omega_m, params.temperature)


def load_injection_values(args, overrides):
    """Resolved coefficient-file values in Hz, for building and metadata."""
    from .params import parse_key_values
    try:
        with open(args.params, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read coefficient file: {exc}") from exc
    values = parse_key_values(text, set(lasing.INJECTION_KEYS),
                              source=str(args.params))
    for key, val in (overrides or {}).items():
        if key not in lasing.INJECTION_KEYS:
            raise CliError(f"unknown coefficient key {key!r}")
        values[key] = float(val)
    return values


def load_coefficients(args, overrides):
    values = load_injection_values(args, overrides)
    try:
        return values, lasing.injected_coefficients(**values)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _u_grids(args, sweep):
    if sweep.key != "u1":
        raise CliError(f"{args.subcommand} sweeps u1 (got {sweep.key!r})")
    if args.sweep2:
        sweep2 = parse_sweep(args.sweep2)
        if sweep2.key != "u2":
            raise CliError("--sweep2 must use key u2")
    else:
        sweep2 = SweepSpec(key="u2", lo=sweep.lo, hi=sweep.hi, n=sweep.n)
    return sweep, sweep2


def run_potential(args, text, overrides, sweep, threads):
    values, coeffs = load_coefficients(args, overrides)
    s1, s2 = _u_grids(args, sweep)
    surface = lasing.potential_2d((s1.lo, s1.hi), (s2.lo, s2.hi), coeffs,
                                  n1=s1.n, n2=s2.n)
    rows = []
    for i, u1 in enumerate(surface.u1):
        for j, u2 in enumerate(surface.u2):
            rows.append((u1, u2, surface.values[i, j]))
    write_csv(args.out, ("u1", "u2", "v"), rows)
    extra = {
        "coefficients_hz": values,
        "minima": [{"u1": m[0], "u2": m[1], "v": m[2]} for m in surface.minima],
        "symmetry_broken": surface.symmetry_broken,
        "u1_dominant_regime": surface.u1_dominant,
    }
    return 0, extra


def run_potential1d(args, text, overrides, sweep, threads):
    values, coeffs = load_coefficients(args, overrides)
    if sweep.key != "u1":
        raise CliError("potential1d sweeps u1")
    table = lasing.potential_1d((sweep.lo, sweep.hi), coeffs, n=sweep.n)
    write_csv(args.out, ("u1", "v"), [tuple(r) for r in table])
    extra = {"coefficients_hz": values,
             "minima_u1": lasing.potential_1d_minima(coeffs)}
    return 0, extra


def run_flow(args, text, overrides, sweep, threads):
    values, coeffs = load_coefficients(args, overrides)
    s1, s2 = _u_grids(args, sweep)
    rows = []
    for u1 in s1.grid:
        for u2 in s2.grid:
            du1, du2 = lasing.flow_field((u1, u2), coeffs)
            rows.append((u1, u2, du1, du2))
    write_csv(args.out, ("u1", "u2", "du1_dt", "du2_dt"), rows)
    return 0, {"coefficients_hz": values}


RUNNERS = {
    "steady": run_steady,
    "bistability": run_bistability,
    "stability": run_stability,
    "gain": run_gain,
    "g2": run_g2,
    "potential": run_potential,
    "potential1d": run_potential1d,
    "flow": run_flow,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        sweep = parse_sweep(args.sweep)
        overrides = parse_overrides(args.override)
        threads = resolve_threads(args.threads)
        if args.subcommand in PHYSICAL_SUBCOMMANDS:
            allowed = set(PHYSICAL_KEYS) | set(OPTIONAL_PHYSICAL_KEYS)
            if sweep.key not in allowed:
                raise CliError(f"unknown sweep key {sweep.key!r}")
            with open(args.params, "r", encoding="utf-8") as fh:
                text = fh.read()
            # validate the base file once, before sweeping
            params_from_text(text, source=args.params,
                             overrides={**overrides, sweep.key: sweep.lo})
        else:
            text = None
        gaps, extra = RUNNERS[args.subcommand](args, text, overrides, sweep,
                                               threads)
        payload = metadata_payload(args, sweep, extra)
        if args.subcommand in PHYSICAL_SUBCOMMANDS:
            base = params_from_text(text, source=args.params,
                                    overrides=overrides)
            payload["params_hz"] = base.to_hz_dict()
        write_metadata(args.out, payload)
        return EXIT_PARTIAL if gaps else EXIT_OK
    except (CliError, ParameterFileError) as exc:
        print(f"phonolase: error: {exc}", file=sys.stderr)
        return EXIT_HARD
    except OSError as exc:
        print(f"phonolase: error: {exc}", file=sys.stderr)
        return EXIT_HARD


if __name__ == "__main__":
    sys.exit(main())
