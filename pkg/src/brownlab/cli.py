"""Batch command-line front end.

Every subcommand writes its artifacts plus a manifest.json recording the
exact argument vector, parameter set, seed, tool version, wall-clock
duration, and a sha256 digest per output file. Re-running the same
arguments reproduces byte-identical outputs regardless of --threads, and
`brownlab replay manifest.json -o DIR` re-executes a manifest and verifies
the digests.

Exit codes: 0 success, 1 validation error (bad flags, malformed
polynomial, unsatisfiable grid), 2 numerical backend failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._pool import default_threads
from .brown import brown_estimate, compare_esd_brown, log_potential, stieltjes
from .linearize import SingularFactorError, assemble_Lz, build_linearization, verify_schur
from .ncpoly import ParseError, evaluate, free_moment, parse, parse_star_word
from .pseudospec import GridSpec, pseudospectrum_area, smin_map_full, tail_estimate
from .rmtcore import STREAM_GINIBRE, DecompositionError, esd, ginibre_tuple, stream
from .walks import (
    DegenerateDrawError,
    block_column,
    delta_report,
    det_tail_experiment,
    orthocomplement_basis,
)

__all__ = ["main", "dispatch"]


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the artifact reserves 2
    # for backend failures, so route usage errors through exit code 1.
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # values like "-2,2,-2,2,41,41" or "-0.5i" start with a dash; widen
        # the negative-number matcher so they pass as values, not flags
        self._negative_number_matcher = re.compile(r"^-\d")

    def error(self, message):
        raise CliError(message)


_COMPLEX_RE = re.compile(
    r"^\s*(?P<re>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?"
    r"(?P<im>[+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?i?\s*$"
)


def parse_complex(text):
    """Parse 'a+bi' style complex input; 'a' and 'bi' alone also work."""
    t = text.strip().replace(" ", "")
    if t.endswith("i"):
        body = t[:-1]
        m = re.fullmatch(
            r"(?P<re>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
            r"(?P<im>[+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)",
            body,
        )
        if m:
            return complex(float(m.group("re")), float(m.group("im")))
        m = re.fullmatch(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?", body)
        if m:
            return complex(0.0, float(body))
        raise CliError(f"cannot parse complex number {text!r}")
    try:
        return complex(float(t), 0.0)
    except ValueError:
        raise CliError(f"cannot parse complex number {text!r}") from None


def parse_ladder(text, default_count=10):
    """'lo:hi:log10[:count]' log-spaced ladder, or a comma list of values."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (3, 4) or parts[2] != "log10":
            raise CliError(f"ladder must look like lo:hi:log10[:count], got {text!r}")
        lo, hi = float(parts[0]), float(parts[1])
        count = int(parts[3]) if len(parts) == 4 else default_count
        if lo <= 0 or hi <= lo or count < 1:
            raise CliError("ladder needs 0 < lo < hi and count >= 1")
        return np.logspace(np.log10(lo), np.log10(hi), count)
    vals = np.array([float(v) for v in text.split(",")])
    if np.any(vals <= 0) or np.any(np.diff(vals) <= 0):
        raise CliError("ladder values must be positive and increasing")
    return vals


def parse_grid(text):
    parts = text.split(",")
    if len(parts) != 6:
        raise CliError("grid must be re_min,re_max,im_min,im_max,nx,ny")
    try:
        return GridSpec(
            re_min=float(parts[0]),
            re_max=float(parts[1]),
            im_min=float(parts[2]),
            im_max=float(parts[3]),
            nx=int(parts[4]),
            ny=int(parts[5]),
        )
    except ValueError as exc:
        raise CliError(f"unsatisfiable grid: {exc}") from exc


def _sha256(path):
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def _write_manifest(outdir, command, argv, params, seed, t0, outputs):
    manifest = {
        "command": command,
        "argv": list(argv),
        "params": params,
        "master_seed": seed,
        "version": __version__,
        "duration_s": round(time.time() - t0, 6),
        "outputs": {name: _sha256(path) for name, path in outputs.items()},
    }
    path = Path(outdir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    return path


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _poly(args):
    try:
        return parse(args.poly, num_vars=args.n)
    except ParseError as exc:
        raise CliError(f"malformed polynomial: {exc}") from exc


def _json_dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True), encoding="utf-8")


def cmd_spectrum(args, argv):
    t0 = time.time()
    p = _poly(args)
    out = _outdir(args)
    rows = []
    for t in range(args.trials):
        X = ginibre_tuple(p.num_vars, args.N, stream(args.seed, STREAM_GINIBRE, t))
        rows.append(esd(evaluate(p, X)).eigenvalues)
    lam = np.concatenate(rows)
    csv = out / "spectrum.csv"
    with open(csv, "w", encoding="utf-8") as fh:
        fh.write("re,im\n")
        for z in lam:
            fh.write(f"{z.real:.17g},{z.imag:.17g}\n")
    _write_manifest(out, "spectrum", argv, _params(args), args.seed, t0,
                    {"spectrum.csv": csv})
    print(f"spectrum: {len(lam)} eigenvalues -> {csv}")
    return 0


def cmd_linearize_check(args, argv):
    t0 = time.time()
    p = _poly(args)
    out = _outdir(args)
    lin = build_linearization(p)
    X = ginibre_tuple(p.num_vars, args.N, stream(args.seed, STREAM_GINIBRE, 0))
    residual = verify_schur(lin, X, args.z)
    ok = residual <= args.tol
    (out / "linearization.json").write_text(lin.to_json(), encoding="utf-8")
    _json_dump(out / "check.json",
               {"residual": residual, "tol": args.tol, "ok": bool(ok),
                "rank": lin.rank, "z": [args.z.real, args.z.imag]})
    _write_manifest(out, "linearize-check", argv, _params(args), args.seed, t0,
                    {"linearization.json": out / "linearization.json",
                     "check.json": out / "check.json"})
    print(f"linearize-check: residual={residual:.3e} tol={args.tol:g} ok={ok}")
    return 0


def cmd_smin_map(args, argv):
    t0 = time.time()
    p = _poly(args)
    out = _outdir(args)
    med, mean, mn, failures = smin_map_full(
        p, args.N, args.grid, args.trials, args.seed, threads=args.threads
    )
    csv = out / "smin_map.csv"
    med.to_csv(csv, extras={"mean": mean.values, "min": mn.values})
    _write_manifest(out, "smin-map", argv, _params(args), args.seed, t0,
                    {"smin_map.csv": csv})
    if failures:
        print(f"smin-map: {failures} backend failures across trials/nodes")
    print(f"smin-map: {args.grid.nx}x{args.grid.ny} grid -> {csv}")
    return 0


def cmd_tail(args, argv):
    t0 = time.time()
    p = _poly(args)
    out = _outdir(args)
    est = tail_estimate(p, args.N, args.z, args.eps, args.trials, args.seed,
                        threads=args.threads)
    path = out / "tail.json"
    path.write_text(est.to_json(), encoding="utf-8")
    _write_manifest(out, "tail", argv, _params(args), args.seed, t0,
                    {"tail.json": path})
    slope = "undefined" if est.slope is None else f"{est.slope:.3f}"
    print(f"tail: slope={slope} -> {path}")
    return 0


def cmd_area(args, argv):
    t0 = time.time()
    p = _poly(args)
    out = _outdir(args)
    area = pseudospectrum_area(p, args.N, args.eps, args.grid, args.trials,
                               args.seed, threads=args.threads)
    path = out / "area.json"
    _json_dump(path, {"eps": args.eps, "area": area,
                      "omega": args.grid.to_dict(), "N": args.N,
                      "trials": args.trials})
    _write_manifest(out, "area", argv, _params(args), args.seed, t0,
                    {"area.json": path})
    print(f"area: E Leb = {area:.6g} -> {path}")
    return 0


def cmd_brown(args, argv):
    t0 = time.time()
    p = _poly(args)
    out = _outdir(args)
    fld = log_potential(p, args.N, args.grid, args.trials, floor=args.floor,
                        seed=args.seed, threads=args.threads)
    est = brown_estimate(fld)
    logpot_csv = out / "logpot.csv"
    fld.h_field().to_csv(logpot_csv,
                         extras={"truncated_fraction": fld.truncated_fraction})
    g = fld.grid
    interior = GridSpec(
        re_min=g.re_min + g.dx, re_max=g.re_max - g.dx,
        im_min=g.im_min + g.dy, im_max=g.im_max - g.dy,
        nx=g.nx - 2, ny=g.ny - 2,
    )
    from .pseudospec import GridField

    density_csv = out / "density.csv"
    GridField(interior, est.density).to_csv(density_csv)
    side = out / "brown.json"
    _json_dump(side, {
        "N": args.N, "trials": args.trials, "floor": fld.floor,
        "seed": args.seed, "total_mass": est.total_mass,
        "truncated_fraction_summary": fld.truncation_summary(),
    })
    _write_manifest(out, "brown", argv, _params(args), args.seed, t0,
                    {"logpot.csv": logpot_csv, "density.csv": density_csv,
                     "brown.json": side})
    print(f"brown: total_mass={est.total_mass:.4f} -> {density_csv}")
    return 0


def cmd_stieltjes(args, argv):
    t0 = time.time()
    p = _poly(args)
    out = _outdir(args)
    g = stieltjes(p, args.N, args.z, args.eta, args.trials, args.seed,
                  threads=args.threads)
    path = out / "stieltjes.json"
    _json_dump(path, {
        "z": [args.z.real, args.z.imag], "N": args.N, "trials": args.trials,
        "values": [{"eta": float(e), "re": v.real, "im": v.imag}
                   for e, v in zip(args.eta, g)],
    })
    _write_manifest(out, "stieltjes", argv, _params(args), args.seed, t0,
                    {"stieltjes.json": path})
    print(f"stieltjes: {len(args.eta)} rungs -> {path}")
    return 0


def _walk_setup(args):
    p = _poly(args)
    lin = build_linearization(p)
    X = ginibre_tuple(p.num_vars, args.N, stream(args.seed, STREAM_GINIBRE, 0))
    Lz = assemble_Lz(lin, X, args.z)
    U = orthocomplement_basis(Lz, args.j, args.seed, lin.rank)
    return p, lin, Lz, U


def cmd_walks_delta(args, argv):
    t0 = time.time()
    out = _outdir(args)
    p, lin, Lz, U = _walk_setup(args)
    threshold = args.threshold if args.threshold else float(args.N) ** (-lin.rank / 2 - 10)
    rep = delta_report(U, lin.s_matrix(), threshold)
    path = out / "delta.json"
    path.write_text(rep.to_json(), encoding="utf-8")
    U.save(out / "walkbasis.bin", out / "walkbasis.json")
    _write_manifest(out, "walks-delta", argv, _params(args), args.seed, t0,
                    {"delta.json": path, "walkbasis.bin": out / "walkbasis.bin",
                     "walkbasis.json": out / "walkbasis.json"})
    print(f"walks-delta: structured={rep.structured} "
          f"max1={rep.max_abs_delta1:.3e} max2={rep.max_abs_delta2:.3e} -> {path}")
    return 0


def cmd_walks_dettail(args, argv):
    t0 = time.time()
    out = _outdir(args)
    p, lin, Lz, U = _walk_setup(args)
    from .linearize import BlockShift

    K = BlockShift(z=args.z, gamma=lin.gamma, dim=lin.dim).matrix
    M = U.blocks[args.j].conj().T @ K
    est = det_tail_experiment(U, lin.s_matrix(), M, args.eps, args.trials, args.seed)
    path = out / "dettail.json"
    path.write_text(est.to_json(), encoding="utf-8")
    _write_manifest(out, "walks-dettail", argv, _params(args), args.seed, t0,
                    {"dettail.json": path})
    slope = "undefined" if est.slope is None else f"{est.slope:.3f}"
    print(f"walks-dettail: slope={slope} -> {path}")
    return 0


def cmd_free_moment(args, argv):
    t0 = time.time()
    word = parse_star_word(args.word)
    value = free_moment(word)
    print(value)
    if args.out:
        out = _outdir(args)
        path = out / "freemoment.json"
        _json_dump(path, {"word": str(word), "moment": value})
        _write_manifest(out, "free-moment", argv, _params(args), 0, t0,
                        {"freemoment.json": path})
    return 0


def cmd_replay(args, argv):
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    recorded = manifest["argv"]
    # swap the recorded output directory for the replay target
    new_argv = []
    skip = False
    for i, tok in enumerate(recorded):
        if skip:
            skip = False
            continue
        if tok in ("-o", "--out"):
            skip = True
            continue
        new_argv.append(tok)
    new_argv += ["-o", args.out]
    code = dispatch(new_argv)
    if code != 0:
        print(f"replay: command failed with exit code {code}")
        return code
    ok = True
    for name, digest in manifest["outputs"].items():
        got = _sha256(Path(args.out) / name)
        match = got == digest
        ok = ok and match
        print(f"replay: {name} {'OK' if match else 'MISMATCH'}")
    return 0 if ok else 1


def _params(args):
    skip = {"func"}
    out = {}
    for key, val in vars(args).items():
        if key in skip:
            continue
        if isinstance(val, complex):
            out[key] = [val.real, val.imag]
        elif isinstance(val, np.ndarray):
            out[key] = [float(v) for v in val]
        elif isinstance(val, GridSpec):
            out[key] = val.to_dict()
        else:
            out[key] = val
    return out


def _add_common(sp, poly=True, grid=False, z=False, eps_ladder=False,
                trials_default=None, floor=False, eta=False):
    if poly:
        sp.add_argument("--poly", required=True, help="polynomial, e.g. 'x1*x2+x2*x1'")
        sp.add_argument("--n", type=int, default=None, help="declared number of variables")
        sp.add_argument("--N", type=int, required=True, help="matrix size")
    if z:
        sp.add_argument("--z", type=parse_complex, default=0j, help="shift, as a+bi")
    if grid:
        sp.add_argument("--grid", type=parse_grid, required=True,
                        help="re_min,re_max,im_min,im_max,nx,ny")
    if eps_ladder:
        sp.add_argument("--eps", type=parse_ladder, required=True,
                        help="ladder lo:hi:log10[:count] or comma list")
    if trials_default is not None:
        sp.add_argument("--trials", type=int, default=trials_default)
    if floor:
        sp.add_argument("--floor", type=float, default=None,
                        help="singular value floor (default N^-6)")
    if eta:
        sp.add_argument("--eta", type=parse_ladder, required=True,
                        help="eta ladder lo:hi:log10[:count] or comma list")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (default $BROWNLAB_THREADS or 1)")
    sp.add_argument("-o", "--out", default="brownlab-out", help="output directory")


def build_parser():
    ap = _Parser(prog="brownlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="eigenvalue samples of p(X)")
    _add_common(sp, trials_default=1)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("linearize-check", help="Schur resolvent identity residual")
    _add_common(sp, z=True)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_linearize_check)

    sp = sub.add_parser("smin-map", help="grid map of smin(P - z)")
    _add_common(sp, grid=True, trials_default=1)
    sp.set_defaults(func=cmd_smin_map)

    sp = sub.add_parser("tail", help="small-ball tail of smin(P - z)")
    _add_common(sp, z=True, eps_ladder=True, trials_default=1000)
    sp.set_defaults(func=cmd_tail)

    sp = sub.add_parser("area", help="expected pseudospectrum area in a rectangle")
    _add_common(sp, grid=True, trials_default=1)
    sp.add_argument("--eps", type=float, required=True)
    sp.set_defaults(func=cmd_area)

    sp = sub.add_parser("brown", help="log-potential and Brown density estimate")
    _add_common(sp, grid=True, trials_default=1, floor=True)
    sp.set_defaults(func=cmd_brown)

    sp = sub.add_parser("stieltjes", help="Stieltjes transform of the hermitization")
    _add_common(sp, z=True, eta=True, trials_default=10)
    sp.set_defaults(func=cmd_stieltjes)

    sp = sub.add_parser("walks-delta", help="Delta determinant report for a drawn basis")
    _add_common(sp, z=True)
    sp.add_argument("--threshold", type=float, default=None,
                    help="structured threshold (default N^(-r/2-10))")
    sp.add_argument("--j", type=int, default=0, help="block column index")
    sp.set_defaults(func=cmd_walks_delta)

    sp = sub.add_parser("walks-dettail", help="determinant small-ball experiment")
    _add_common(sp, z=True, eps_ladder=True, trials_default=1000)
    sp.add_argument("--j", type=int, default=0, help="block column index")
    sp.set_defaults(func=cmd_walks_dettail)

    sp = sub.add_parser("free-moment", help="free moment of a star word")
    sp.add_argument("--word", required=True, help="e.g. 'c1 c1* c2 c2*'")
    sp.add_argument("-o", "--out", default=None)
    sp.set_defaults(func=cmd_free_moment)

    sp = sub.add_parser("replay", help="re-run a manifest and verify digests")
    sp.add_argument("manifest")
    sp.add_argument("-o", "--out", required=True)
    sp.set_defaults(func=cmd_replay)

    return ap


def dispatch(argv):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if getattr(args, "threads", None) is None and hasattr(args, "threads"):
            args.threads = default_threads()
        return args.func(args, argv)
    except (CliError, ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DecompositionError, DegenerateDrawError, SingularFactorError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical backend failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
