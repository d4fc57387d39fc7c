"""Command-line surface tying the modules into reproducible experiments.

Subcommands: minimize, residuals, epsreg, monotonicity, concentrate, blowup,
synth, check.  Conventions shared by all of them:

* every tabular output embeds its resolved parameters as leading '#' comment
  lines, so a result file identifies the run that produced it;
* all floating-point output uses %.17g, which round-trips float64 exactly;
* identical arguments (and seed) give byte-identical outputs whatever
  DTIL_THREADS says, because every parallel reduction has a fixed order.

Exit codes: 0 success, 1 a requested check failed (monotonicity violations,
identity sweep failure), 2 the operation could not run (parse errors, no
admissible blow-up ball).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .concentration import (
    StateSequence,
    blowup_rescale,
    extract_atoms,
    select_blowup_scale,
    synthetic_bump_density,
    synthetic_bump_state,
    synthetic_sequence,
)
from .config import load_config
from .energy import density, energy
from .fields import FieldState
from .lattice import Ball, LatticeSpec
from .operators import dt_residuals
from .regularity import eps_regularity_scan, monotonicity_scan, top_density_sites
from .snapshot import Snapshot, read_snapshot, write_snapshot
from .solve import minimize, random_band_limited_state
from .su2 import quartic_inequality_check, random_traceless, trace_free_identity_check


def _radii(text: str) -> tuple:
    try:
        values = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one radius")
    return values


def _coords(text: str, cast) -> tuple:
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError(f"expected 6 comma-separated coordinates, got {text!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse coordinates {text!r}")


def _site(text: str) -> tuple:
    return _coords(text, int)


def _position(text: str) -> tuple:
    return _coords(text, float)


def _comment_block(pairs) -> str:
    lines = []
    for key, value in pairs:
        if isinstance(value, float):
            value = "%.17g" % value
        elif isinstance(value, (tuple, list)):
            value = ",".join("%.17g" % v for v in value)
        lines.append(f"# {key} = {value}")
    return "\n".join(lines) + "\n"


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(text)


def _load_state(path) -> FieldState:
    snap = read_snapshot(path)
    return snap.state()


def _read_centers(arg: str, state: FieldState, top: int) -> list:
    if arg == "auto":
        return top_density_sites(density(state), state.spec, top)
    centers = []
    with open(arg, "r", encoding="ascii") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValueError(f"{arg}:{lineno}: expected 6 site coordinates, got {raw!r}")
            centers.append(tuple(int(p) for p in parts))
    if not centers:
        raise ValueError(f"{arg}: no centers found")
    return centers


# ---------------------------------------------------------------------------
# subcommands

def cmd_minimize(args) -> int:
    cfg = load_config(args.config)
    state0 = random_band_limited_state(
        cfg.lattice(), cfg.amplitude, seed=cfg.seed,
        kmax=cfg.kmax, higgs_amplitude=cfg.higgs_amplitude,
    )
    final, trace = minimize(state0, cfg.flow())
    write_snapshot(args.out, final)
    header = "".join("# " + line + "\n" for line in cfg.to_text().splitlines())
    _write_text(args.trace, header + trace.csv_text())
    print(f"status = {trace.status}")
    print(f"steps = {len(trace.rows) - 1}")
    print("L = %.17g" % trace.L[-1])
    return 0


def cmd_residuals(args) -> int:
    state = _load_state(args.infile)
    res = dt_residuals(state.A, state.phi, state.spec, kappa=args.kappa)
    bd = energy(state)
    for key, value in (
        ("holomorphic_residual", res.holomorphic_norm),
        ("contracted_residual", res.contracted_norm),
        ("L", bd.total),
        ("curvature_term", bd.curvature_term),
        ("codifferential_term", bd.codifferential_term),
        ("bracket_term", bd.bracket_term),
        ("det_integral", bd.det_integral),
    ):
        print("%s = %.17g" % (key, value))
    return 0


def cmd_epsreg(args) -> int:
    state = _load_state(args.infile)
    centers = _read_centers(args.centers, state, args.top)
    report = eps_regularity_scan(
        state, centers, args.radii, epsilon=args.epsilon, c_config=args.c_config
    )
    header = _comment_block(
        (
            ("n_per_axis", state.spec.n_per_axis),
            ("spacing", state.spec.spacing),
            ("centers", len(centers)),
            ("radii", args.radii),
            ("epsilon", "" if args.epsilon is None else "%.17g" % args.epsilon),
            ("c_config", "" if args.c_config is None else "%.17g" % args.c_config),
        )
    )
    _write_text(args.out, header + report.csv_text())
    c1, c2 = report.max_implied()
    print("implied_c1 = %.17g" % c1)
    print("implied_c2 = %.17g" % c2)
    print(f"all_pass = {report.all_pass()}")
    return 0


def cmd_monotonicity(args) -> int:
    state = _load_state(args.infile)
    report = monotonicity_scan(state, args.center, args.radii, c_tol=args.c_tol)
    header = _comment_block(
        (
            ("n_per_axis", state.spec.n_per_axis),
            ("spacing", state.spec.spacing),
            ("center", ",".join(str(c) for c in report.center)),
            ("radii", args.radii),
            ("c_tol", args.c_tol),
        )
    )
    _write_text(args.out, header + report.csv_text())
    print(f"violations = {len(report.violations)}")
    return 1 if report.violations else 0


def cmd_concentrate(args) -> int:
    snaps = [read_snapshot(p) for p in args.seq.split(",")]
    seq = StateSequence(snaps[0].spec, tuple(s.entry for s in snaps))
    limit = read_snapshot(args.limit).entry if args.limit else None
    report = extract_atoms(seq, args.epsilon, radii=args.radii, limit=limit)
    text = report.to_text()
    if args.out:
        _write_text(args.out, text)
    else:
        print(text, end="")
    if args.counts:
        _write_text(args.counts, report.counts_csv())
    print(f"atoms = {len(report.atoms)}")
    print(f"rejected = {len(report.rejected)}")
    return 0


def cmd_blowup(args) -> int:
    state = _load_state(args.infile)
    spec = state.spec
    if args.search_center is None:
        peak = top_density_sites(density(state), spec, 1)[0]
        center = spec.site_position(peak)
    else:
        center = args.search_center
    radius = args.search_radius if args.search_radius is not None else 1.5 * spec.spacing
    sel = select_blowup_scale(state, Ball(center, radius), args.epsilon, args.snap_tolerance)
    if sel is None:
        print("no admissible ball: local mass below 3/4 epsilon", file=sys.stderr)
        return 2
    # zoom so the selected ball fills the unit ball; a ball already wider than
    # unit scale is cropped without rescaling
    window_radius = max(1.0, sel.radius)
    scale = sel.radius / window_radius
    out = blowup_rescale(state, sel.position, scale, window_radius, refinement=args.refinement)
    write_snapshot(args.out, out)
    print("site = " + ",".join(str(c) for c in sel.site))
    print("radius = %.17g" % sel.radius)
    print("mass = %.17g" % sel.mass)
    print("target = %.17g" % sel.target)
    print("error = %.17g" % sel.error)
    print(f"within_tolerance = {sel.within_tolerance}")
    print("scale = %.17g" % scale)
    print("window_radius = %.17g" % window_radius)
    print(f"n_out = {out.spec.n_per_axis}")
    return 0


def cmd_synth(args) -> int:
    spec = LatticeSpec(args.n, args.spacing)
    if args.what == "bump":
        if args.kind == "density":
            snap = Snapshot.from_density(
                spec, synthetic_bump_density(spec, args.center, args.width, args.mass)
            )
        else:
            snap = Snapshot.from_state(
                synthetic_bump_state(spec, args.center, args.width, args.mass)
            )
        write_snapshot(args.out, snap)
        print(f"wrote {args.out}")
        return 0

    atoms = []
    for item in args.atoms.split(";"):
        coords, _, mass = item.partition(":")
        if not mass:
            raise ValueError(f"expected center:mass, got {item!r}")
        atoms.append((_position(coords), float(mass)))
    seq = synthetic_sequence(spec, atoms, args.widths, kind=args.kind)
    for i, entry in enumerate(seq.entries):
        path = f"{args.out_prefix}{i}.snap"
        snap = entry if isinstance(entry, FieldState) else Snapshot.from_density(spec, entry)
        write_snapshot(path, snap)
        print(f"wrote {path}")
    return 0


def cmd_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    m = random_traceless(rng, (args.samples,))
    lhs, rhs = trace_free_identity_check(m)
    identity_max = float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(lhs))))
    ql, qr = quartic_inequality_check(m)
    violations = int(np.count_nonzero(ql > qr + 1e-10 * (1.0 + np.abs(qr))))
    print(f"samples = {args.samples}")
    print("identity_max_rel = %.17g" % identity_max)
    print(f"inequality_violations = {violations}")
    ok = identity_max <= 1e-10 and violations == 0
    print(f"all_pass = {ok}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtil", description="Lattice gauge-Higgs flows and concentration analysis."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("minimize", help="descend the action from a seeded random state")
    p.add_argument("--config", required=True, help="key = value experiment config file")
    p.add_argument("--out", required=True, help="final state snapshot path")
    p.add_argument("--trace", required=True, help="per-step CSV trace path")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("residuals", help="print residual norms and the energy breakdown")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--kappa", type=float, default=1.0, help="bracket coupling (default 1)")
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("epsreg", help="local-energy regularity scan to CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--centers", required=True, help="'auto' or a file of site rows i,j,k,l,m,n")
    p.add_argument("--radii", type=_radii, required=True, help="comma-separated ball radii")
    p.add_argument("--out", required=True)
    p.add_argument("--top", type=int, default=5, help="centers picked by 'auto' (default 5)")
    p.add_argument("--epsilon", type=float, default=None, help="arm the small-energy bound check")
    p.add_argument("--c-config", type=float, default=None, help="constant for the bound check")
    p.set_defaults(func=cmd_epsreg)

    p = sub.add_parser("monotonicity", help="scaled ball-energy ladder; exit 1 on violations")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--center", type=_site, required=True, help="site i,j,k,l,m,n")
    p.add_argument("--radii", type=_radii, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--c-tol", type=float, default=5.0, help="boundary-drop tolerance (default 5)")
    p.set_defaults(func=cmd_monotonicity)

    p = sub.add_parser("concentrate", help="detect and price concentration atoms")
    p.add_argument("--seq", required=True, help="comma-separated snapshot paths, given order")
    p.add_argument("--limit", default=None, help="limit snapshot whose share is subtracted")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--radii", type=_radii, default=None, help="override the default ladder")
    p.add_argument("--out", default=None, help="report path (default: stdout)")
    p.add_argument("--counts", default=None, help="optional per-entry counts CSV path")
    p.set_defaults(func=cmd_concentrate)

    p = sub.add_parser("blowup", help="select a zoom ball holding epsilon/2 and rescale into it")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out", required=True, help="rescaled window snapshot path")
    p.add_argument("--search-center", type=_position, default=None,
                   help="window search center (default: densest site)")
    p.add_argument("--search-radius", type=float, default=None,
                   help="candidate-center ball radius (default: 1.5 spacings)")
    p.add_argument("--snap-tolerance", type=float, default=0.02)
    p.add_argument("--refinement", type=float, default=1.0,
                   help="output sites per source spacing (default 1; analysis uses 4)")
    p.set_defaults(func=cmd_blowup)

    p = sub.add_parser("synth", help="emit synthetic ground-truth snapshots")
    p.add_argument("what", choices=("bump", "sequence"))
    p.add_argument("--n", type=int, required=True, help="sites per axis")
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--kind", choices=("density", "higgs"), default="density")
    p.add_argument("--out", help="bump: output snapshot path")
    p.add_argument("--center", type=_position, help="bump: center position")
    p.add_argument("--width", type=float, help="bump: support radius")
    p.add_argument("--mass", type=float, help="bump: concentration mass")
    p.add_argument("--out-prefix", help="sequence: paths become PREFIX<i>.snap")
    p.add_argument("--atoms", help="sequence: 'x1,..,x6:mass;...'")
    p.add_argument("--widths", type=_radii, help="sequence: one entry per width")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("check", help="randomized self-checks; exit 1 on any failure")
    p.add_argument("what", choices=("identities",))
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth":
        required = ("out", "center", "width", "mass") if args.what == "bump" else (
            "out_prefix", "atoms", "widths")
        missing = [name for name in required if getattr(args, name) is None]
        if missing:
            flags = ", ".join("--" + name.replace("_", "-") for name in missing)
            build_parser().error(f"synth {args.what} requires {flags}")
    try:
        return args.func(args)
    except MemoryError:
        print("error: request exceeds available memory "
              "(lower --refinement or the window size)", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
