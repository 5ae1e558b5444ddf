"""Command-line driver for the convergence benchmarks.

Two subcommands: `run` executes one test with one interface-assembly method
and element choice over a sequence of levels, printing the error table and
writing it as CSV; `overlay-stats` reports how the mapped solid mesh
decomposes against the fluid mesh (piece counts, area conservation) with an
optional dump of the overlay polygons.

Levels are given as `A:B` in terms of the coarse fluid mesh size 1/A down
to 1/B over the 4 x 4 fluid box, doubling each step: `4:64` runs meshes of
size 1/4, 1/8, ..., 1/64 (coarse subdivisions 16 to 256).

Exit codes: 0 success, 1 configuration or domain error, 2 violated internal
invariant (failed residual or conservation check).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .geometry import CoverageError, PointLocationError, coverage_defect
from .mesh import MeshError
from .solver import SolverError
from . import verification as ver

__all__ = ["main", "build_parser", "cmd_run", "cmd_overlay_stats"]

_METHOD_TOKENS = {"intersect": "intersect", "noint-q2": "noint_q2", "noint-q3": "noint_q3"}

_CSV_COLUMNS = (
    ["level", "h_fluid", "h_solid"]
    + [f"err_{c}" for c in ver.ERROR_COLUMNS]
    + [f"rate_{c}" for c in ver.ERROR_COLUMNS]
)


class _Parser(argparse.ArgumentParser):
    """argparse's default usage-error exit code is 2; this project reserves
    2 for internal invariant violations, so usage errors exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdcoupling",
                     description="Fictitious-domain coupling benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[], help="run one convergence study",
                         description="Run one test/method/element combination.")
    run.add_argument("--test", type=int, required=True, help="test id, 1..8")
    run.add_argument("--method", default="intersect",
                     help="intersect | noint-q2 | noint-q3")
    run.add_argument("--element", default="bp", help="bp | bp_p0")
    run.add_argument("--levels", default="4:16",
                     help="first:last inverse coarse mesh sizes, doubling (e.g. 4:64)")
    run.add_argument("--coupling", default="h1", choices=("h1", "l2"),
                     help="coupling form: full H1 inner product or L2 only")
    run.add_argument("--out", default=".", help="output directory for the CSV")
    run.add_argument("--seed", type=int, default=0,
                     help="recorded for reproducibility; the pipeline is deterministic")
    run.set_defaults(func=cmd_run)

    stats = sub.add_parser("overlay-stats", help="inspect the mesh overlay",
                           description="Report overlay piece counts and area conservation.")
    stats.add_argument("--test", type=int, required=True, help="test id, 1..8")
    stats.add_argument("--level", type=int, default=4,
                       help="inverse coarse fluid mesh size (e.g. 4 for h=1/4)")
    stats.add_argument("--element", default="bp", help="bp | bp_p0")
    stats.add_argument("--dump", default=None,
                       help="write overlay piece vertices to this CSV file")
    stats.set_defaults(func=cmd_overlay_stats)
    return parser


def _parse_levels(text: str) -> list:
    try:
        first_s, last_s = text.split(":")
        first, last = int(first_s), int(last_s)
    except ValueError:
        raise ValueError(f"levels must look like '4:64', got {text!r}") from None
    return [(4 * d, 4 * d) for d, _ in ver.doubling_levels(first, last)]


def _check_element(element: str) -> str:
    element = element.lower()
    if element not in ver.ELEMENTS:
        raise ValueError(f"unknown element {element!r}; use bp or bp_p0")
    return element


def _check_method(token: str) -> str:
    try:
        return _METHOD_TOKENS[token]
    except KeyError:
        raise ValueError(
            f"unknown method {token!r}; use intersect, noint-q2 or noint-q3"
        ) from None


def _format_cell(key: str, value) -> str:
    if key == "level":
        return str(int(value))
    if key.startswith("h_"):
        return f"{value:.6g}"
    if key.startswith("rate_"):
        return "" if not np.isfinite(value) else f"{value:.2f}"
    return f"{value:.3e}"


def _rows_to_lines(rows) -> list:
    lines = [",".join(_CSV_COLUMNS)]
    for row in rows:
        # The level column reports 1/h_fluid, matching the --levels tokens.
        printed = dict(row)
        printed["level"] = row["level"] // 4
        lines.append(",".join(_format_cell(c, printed[c]) for c in _CSV_COLUMNS))
    return lines


def cmd_run(args) -> int:
    method = _check_method(args.method)
    element = _check_element(args.element)
    levels = _parse_levels(args.levels)
    study = ver.run_test(args.test, method, element, levels, coupling=args.coupling)
    lines = _rows_to_lines(study.rows())

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"test{args.test}_{element}_{args.method}.csv"
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")

    print(f"test {args.test}  method {args.method}  element {element}  "
          f"coupling {args.coupling}  seed {args.seed}")
    widths = [max(len(c), 10) for c in _CSV_COLUMNS]
    for line in lines:
        cells = line.split(",")
        print("  ".join(c.rjust(w) for c, w in zip(cells, widths)))
    print(f"wrote {path}")
    return 0


def cmd_overlay_stats(args) -> int:
    element = _check_element(args.element)
    case = ver.make_test(args.test)
    n = 4 * args.level
    disc = ver.build_level(case, n, n, element)
    overlay = disc.overlay
    counts = np.bincount(overlay.solid_tri, minlength=disc.solid_mesh.num_triangles)
    defect = coverage_defect(overlay, disc.mapped_coords)
    total_area = float(overlay.areas.sum())

    print(f"test {args.test}  level {args.level}  element {element}")
    print(f"solid triangles: {disc.solid_mesh.num_triangles}")
    print(f"fluid triangles: {disc.pair.fine.num_triangles}")
    print(f"overlay pieces:  {overlay.num_pieces}")
    print("pieces per solid triangle:")
    for k in np.flatnonzero(np.bincount(counts)):
        print(f"  {k:3d} pieces: {int((counts == k).sum())} triangles")
    print(f"total mapped solid area: {total_area:.12g}")
    print(f"area conservation defect: max {defect.max():.3e}, "
          f"relative {defect.max() / disc.solid_mesh.areas.max():.3e}")

    if args.dump:
        lines = ["piece,solid_tri,fluid_tri,x0,y0,x1,y1,x2,y2"]
        for m in range(overlay.num_pieces):
            tri = overlay.sub_coords[m]
            coords = ",".join(f"{v:.17g}" for v in tri.ravel())
            lines.append(f"{m},{overlay.solid_tri[m]},{overlay.fluid_tri[m]},{coords}")
        Path(args.dump).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
        print(f"wrote {args.dump}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, MeshError, CoverageError, PointLocationError,
            FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
