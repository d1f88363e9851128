"""Command-line interface: ``qfiw {ed,cft,qfi,fit,ingest}``.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
Energies and temperatures are in units of J throughout.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import re
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from scipy.constants import physical_constants

from . import __version__
from .analysis import exclude_lowest_temperature, exclude_points, extrapolate, fit_log_scaling, load_series
from .cft import CftParams, cft_curve, t_q_cft
from .errors import NumericalError, ValidationError
from .ingest import (
    load_correlations,
    normalize_moment,
    read_spectral_csv,
    remove_elastic,
    transform_to_dsf,
    write_spectral_csv,
)
from .lattice import ChainSpec, OperatorSpec, diagonalize, operator_matrix, thermal_ensemble
from .qfi import make_report, qfi_direct, spectral_report
from .spectral import broaden, lehmann_dsf, momentum_set, static_structure_direct

log = logging.getLogger("qfiw")

K_B_MEV = physical_constants["Boltzmann constant in eV/K"][0] * 1e3

_Q_RE = re.compile(r"^\s*(?P<num>\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(?P<den>\d*\.?\d+))?\s*$")


def parse_wavenumber(text: str) -> float:
    """``pi``, ``pi/2``, ``2pi/3``, ``2*pi/3`` or a plain float."""
    m = _Q_RE.match(text.lower())
    if m:
        num = float(m["num"]) if m["num"] else 1.0
        den = float(m["den"]) if m["den"] else 1.0
        return num * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse wavenumber {text!r}") from None


def _fmt(x) -> str:
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_manifest(path: Path, args: argparse.Namespace, inputs=()) -> None:
    """Sidecar run manifest. Output payloads themselves carry no wall-clock data."""
    params = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    manifest = {
        "subcommand": args.command,
        "parameters": params,
        "inputs": {str(p): _digest(p) for p in inputs},
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _emit(text: str, out, args, inputs=()):
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    write_manifest(out.with_name(out.name + ".manifest.json"), args, inputs)


def _material_extras(t: float, j_mev):
    if j_mev is None:
        return {}
    return {"j_mev": j_mev, "temperature_kelvin": t * j_mev / K_B_MEV}


def cmd_ed(args) -> int:
    spec = ChainSpec(args.n, args.j, args.anisotropy, args.boundary)
    op = OperatorSpec.for_chain(spec, args.q)
    es = diagonalize(spec)
    ens = thermal_ensemble(es, args.beta)
    ms = operator_matrix(es, op)
    f_direct = qfi_direct(es, ens, op, ms)
    s_direct = static_structure_direct(es, ens, op)
    direct = make_report(f_direct, s_direct, 4 * s_direct - f_direct, args.beta, "direct", True, op.q, args.n)
    ls = lehmann_dsf(es, ens, op, ms)
    spectral = spectral_report(ls)
    extras = _material_extras(1.0 / args.beta, args.j_mev)
    direct.extras.update(extras)
    spectral.extras.update(extras)
    payload = {
        "reports": [direct.to_dict(), spectral.to_dict()],
        "route_difference": abs(direct.f_q - spectral.f_q),
        "ground_energy": es.ground_energy,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(text)
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(text)
    lo, hi, step = args.omega_range
    grid = broaden(ls, args.eta, lo, hi, step)
    write_spectral_csv(grid, out / "spectrum.csv")
    write_manifest(out / "manifest.json", args)
    return 0


def _cft_temps(args):
    if args.temp:
        return sorted(args.temp)
    return list(np.geomspace(args.tmin, args.tmax, args.nt))


def cmd_cft(args) -> int:
    p = CftParams(args.d, args.t0)
    temps = _cft_temps(args)
    points = cft_curve(temps, p)
    tq = t_q_cft(p, bracket=tuple(args.tq_bracket)) if args.tq_bracket else None
    cols = ["T", "S_pi", "epsilon", "f_q", "depth", "t_q"]
    if args.j_mev is not None:
        cols.append("T_kelvin")
    lines = [",".join(cols)]
    for pt in points:
        row = [pt.t, pt.s_pi, pt.epsilon, pt.f_q, pt.depth, tq.t_q if tq and tq.crossed else float("nan")]
        if args.j_mev is not None:
            row.append(pt.t * args.j_mev / K_B_MEV)
        lines.append(",".join(_fmt(v) for v in row))
    if tq is not None and not tq.crossed:
        log.warning("epsilon(T) = 1 has no crossing on %s; t_q column is nan", args.tq_bracket)
    _emit("\n".join(lines) + "\n", args.out, args)
    return 0


def cmd_qfi(args) -> int:
    grid = read_spectral_csv(args.input)
    if args.elastic_window:
        grid, removed = remove_elastic(grid, args.elastic_window)
    else:
        removed = 0.0
    report = spectral_report(grid, n_sites=args.n_sites)
    report.extras["removed_elastic_mass"] = removed
    report.extras.update(_material_extras(1.0 / grid.beta, args.j_mev))
    _emit(report.to_json(indent=2) + "\n", args.out, args, [args.input])
    return 0


def cmd_fit(args) -> int:
    series = load_series(args.input)
    if args.exclude_lowest:
        series = exclude_lowest_temperature(series)
    if args.exclude_beta:
        series = exclude_points(series, betas=args.exclude_beta)
    fit = fit_log_scaling(series, beta_min=args.beta_min, weighted=args.weighted)
    preds = []
    for t in args.target_temp or []:
        if fit.slope > 0:
            e = extrapolate(fit, t)
            preds.append({
                "t_target": e.t_target, "f_q_pred": e.f_q_pred, "depth": e.depth,
                "extrapolated": e.extrapolated, "far_extrapolation": e.far_extrapolation,
                **_material_extras(t, args.j_mev),
            })
    payload = {"fit": fit.to_dict(), "predictions": preds}
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out, args, [args.input])
    return 0


def cmd_ingest(args) -> int:
    tab = load_correlations(args.input)
    qs = list(momentum_set(tab.n_sites)) if args.all_q else args.q
    if not qs:
        raise ValidationError("give --q at least once or --all-q")
    grids, reports = [], []
    for q in qs:
        g, rep = transform_to_dsf(tab, q, args.eta, tuple(args.omega_range))
        grids.append(g)
        reports.append(rep)
    scale = None
    if args.normalize:
        grids, scale = normalize_moment(grids)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for k, (g, rep) in enumerate(zip(grids, reports)):
        removed = 0.0
        if args.elastic_window:
            g, removed = remove_elastic(g, args.elastic_window)
        name = f"spectrum_{k:03d}.csv"
        write_spectral_csv(g, out / name)
        summary.append({
            "file": name, "q": g.q, "eta_used": rep.eta_used,
            "negativity": rep.negativity, "removed_elastic_mass": removed,
        })
    (out / "ingest.json").write_text(
        json.dumps({"scale_factor": scale, "spectra": summary}, indent=2, sort_keys=True) + "\n"
    )
    write_manifest(out / "manifest.json", args, [args.input])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfiw", description="Finite-temperature entanglement witnesses for spin-1/2 chains.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def material(p):
        p.add_argument("--j-mev", type=float, default=None, help="exchange J in meV; adds kelvin conversions")

    p = sub.add_parser("ed", help="exact diagonalization: direct and spectral QFI")
    p.add_argument("--n", type=int, required=True, help="number of sites")
    p.add_argument("--beta", type=float, default=8.0)
    p.add_argument("--q", type=parse_wavenumber, default=math.pi, help="wavenumber, e.g. pi or pi/2")
    p.add_argument("--anisotropy", type=float, default=1.0)
    p.add_argument("--boundary", choices=("periodic", "open"), default="periodic")
    p.add_argument("--j", type=float, default=1.0, help="coupling J")
    p.add_argument("--eta", type=float, default=0.01, help="broadening for the exported spectrum")
    p.add_argument("--omega-range", type=float, nargs=3, default=(-5.0, 5.0, 0.005), metavar=("MIN", "MAX", "STEP"))
    p.add_argument("--out", type=Path, default=None, help="output directory")
    material(p)
    p.set_defaults(func=cmd_ed)

    p = sub.add_parser("cft", help="Luttinger-liquid curves S(pi,T), epsilon(T), f_Q(T)")
    p.add_argument("--d", type=float, default=0.075)
    p.add_argument("--t0", type=float, default=4.5)
    p.add_argument("--temp", type=float, action="append", help="temperature (repeatable)")
    p.add_argument("--tmin", type=float, default=0.005)
    p.add_argument("--tmax", type=float, default=0.2)
    p.add_argument("--nt", type=int, default=24)
    p.add_argument("--tq-bracket", type=float, nargs=2, default=(0.005, 0.2), metavar=("LO", "HI"))
    p.add_argument("--out", type=Path, default=None, help="output CSV file")
    material(p)
    p.set_defaults(func=cmd_cft)

    p = sub.add_parser("qfi", help="QFI report from a spectral CSV")
    p.add_argument("input", type=Path)
    p.add_argument("--elastic-window", type=float, default=0.0, help="zero |omega| below this value")
    p.add_argument("--n-sites", type=int, default=None, help="chain length, for the divisor caveat")
    p.add_argument("--out", type=Path, default=None)
    material(p)
    p.set_defaults(func=cmd_qfi)

    p = sub.add_parser("fit", help="fit f_Q^(2/3) against log(beta)")
    p.add_argument("input", type=Path, help="CSV with columns beta,f_q[,sigma]")
    p.add_argument("--beta-min", type=float, default=4.0)
    p.add_argument("--exclude-lowest", action="store_true", help="drop the lowest-temperature point")
    p.add_argument("--exclude-beta", type=float, action="append", help="drop the point at this beta")
    p.add_argument("--target-temp", type=float, action="append", help="extrapolate to this T")
    p.add_argument("--weighted", action="store_true", help="weight by the sigma column")
    p.add_argument("--out", type=Path, default=None)
    material(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ingest", help="G(x,t) table to S(q,omega) spectral CSVs")
    p.add_argument("input", type=Path)
    p.add_argument("--q", type=parse_wavenumber, action="append", default=[])
    p.add_argument("--all-q", action="store_true", help="all lattice momenta")
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--normalize", action="store_true", help="apply the 1/4 moment sum rule (needs --all-q)")
    p.add_argument("--elastic-window", type=float, default=0.0)
    p.add_argument("--omega-range", type=float, nargs=3, default=(-5.0, 5.0, 0.005), metavar=("MIN", "MAX", "STEP"))
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)
    return ap


def _thread_limit():
    n = os.environ.get("QFIW_THREADS")
    if not n:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return nullcontext()
    return threadpool_limits(limits=max(1, int(n)))


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
