"""Command-line interface.

Subcommands::

    catclust within  --data X.csv --schema S.yaml --out-dir out/
    catclust between --data X.csv --schema S.yaml --clusters 5 --out-dir out/
    catclust assign  --data X.csv --schema S.yaml --definitions out/clusters.json
    catclust render  --input out/bidendrogram.json --percent-axis --threshold 0.003

Exit status: 0 success, 2 usage error, 3 validation error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .between import (
    RESIDUAL,
    RESISTANCE,
    ClusterSet,
    assign_observations,
    cluster_of_clusters,
    cluster_profile_table,
    indicator_for,
    residual_block_matrix,
    residual_linkage_clustering,
    resistance_linkage_clustering,
)
from .dataset import IndicatorMatrix, drop_missing_rows, load_dataset
from .dendrogram import BiDendrogram, export_tree, fmt
from .errors import CatClustError, TreeFormatError, UsageError
from .inertia import correspondence_analysis, total_inertia
from .render import RenderOptions, render_bidendrogram
from .within import assemble_bidendrogram, variable_clustering, within_variable_clustering

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

log = logging.getLogger("catclust")


def _num(x) -> str:
    return fmt(float(x))


def _write_bytes(path: Path, data: bytes):
    path.write_bytes(data)
    log.info("wrote %s", path)


def _write_text(path: Path, text: str):
    _write_bytes(path, text.encode("utf-8"))


def _write_json(path: Path, obj):
    _write_text(path, json.dumps(obj, indent=2) + "\n")


def _write_csv(path: Path, header, rows, delimiter=","):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    log.info("wrote %s", path)


def _write_tree(out: Path, stem: str, tree):
    _write_bytes(out / f"{stem}.json", export_tree(tree, "structured"))
    _write_bytes(out / f"{stem}.nwk", export_tree(tree, "newick"))


def _render_options(args) -> RenderOptions:
    return RenderOptions(percent_axis=args.percent_axis, hanging=args.hanging,
                         threshold=args.threshold)


def _load(args):
    if not args.data or not args.schema:
        raise UsageError("--data and --schema are required")
    d = load_dataset(args.data, args.schema, delimiter=args.delimiter)
    if args.drop_missing:
        before = d.n
        d = drop_missing_rows(d)
        log.info("dropped %d rows with missing codes, %d remain", before - d.n, d.n)
    return d


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_within(args) -> int:
    d = _load(args)
    out = _out_dir(args)
    z = IndicatorMatrix.from_dataset(d)
    summary = total_inertia(z)
    categories, _ = within_variable_clustering(z)
    variables = variable_clustering(summary)
    leaf_vars = [q for q, _ in z.block_index]
    bi = assemble_bidendrogram(categories, variables, leaf_vars)

    _write_tree(out, "category_tree", categories)
    _write_tree(out, "variable_tree", variables)
    _write_json(out / "bidendrogram.json", bi.to_dict())
    _write_text(out / "bidendrogram.svg", render_bidendrogram(bi, _render_options(args)))

    # merged label of every original category after each number of merges
    rows = []
    current = {(q, p): z.column_label(q, c) for q, c in z.block_index for p in z.groups[q][c]}
    members = {leaf: [(q, z.groups[q][c][0])] for leaf, (q, c) in enumerate(z.block_index)}

    def emit(level, height):
        for q, schema in enumerate(d.schemas):
            for p, code in enumerate(schema.codes):
                rows.append([level, _num(height), schema.name, code, current[(q, p)]])

    emit(0, 0.0)
    L = categories.n_leaves
    for k, m in enumerate(categories.merges):
        merged = members.pop(m.left) + members.pop(m.right)
        members[L + k] = merged
        for key in merged:
            current[key] = m.info["label"]
        emit(k + 1, m.height)
    _write_csv(out / "merged_categories.csv",
               ["level", "height", "variable", "code", "merged_label"], rows, args.delimiter)

    names = list(d.names)
    _write_csv(out / "pairwise_inertia.csv", ["variable"] + names,
               [[names[q]] + [_num(x) for x in summary.pairwise[q]] for q in range(d.Q)],
               args.delimiter)
    _write_json(out / "summary.json", {
        "n": d.n, "Q": d.Q, "J": d.J,
        "total_inertia": float(_num(summary.in_tot)),
        "category_merges": len(categories.merges),
        "variable_merges": len(variables.merges),
    })
    print(f"within: n={d.n} Q={d.Q} J={d.J} total inertia={_num(summary.in_tot)}")
    return EXIT_OK


def _write_assignment(out: Path, a, delimiter: str):
    rows = [[i + 1] + [_num(x) for x in row] for i, row in enumerate(a.memberships)]
    _write_csv(out / "assignment.csv", ["row"] + list(a.labels), rows, delimiter)


def _write_profile(out: Path, profile, delimiter: str):
    rows = [[lab] + [_num(x) for x in row] for lab, row in zip(profile.row_labels, profile.counts)]
    _write_csv(out / "profile.csv", ["cluster"] + list(profile.col_labels), rows, delimiter)


def _sizes_summary(clusters, a):
    return [
        {"label": lab, "size": float(_num(float(s))), "members": clusters.member_labels(g)}
        for g, (lab, s) in enumerate(zip(clusters.labels, a.exact_cluster_sizes))
    ]


def cmd_between(args) -> int:
    if args.clusters is None:
        raise UsageError("--clusters is required for 'between'")
    d = _load(args)
    out = _out_dir(args)
    z = IndicatorMatrix.from_dataset(d)
    method = args.method
    linkage = args.linkage or ("complete" if method == RESISTANCE else "average")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if method == RESIDUAL:
            clusters, tree = residual_linkage_clustering(residual_block_matrix(z), linkage,
                                                         args.clusters)
        else:
            clusters, tree = resistance_linkage_clustering(z, args.clusters, linkage,
                                                           args.missing_distance)
    for w in caught:
        print(f"notice: {w.message}", file=sys.stderr)
    if args.missing_distance is not None and clusters.missing_distance is None:
        clusters = ClusterSet(clusters.schemas, clusters.columns, clusters.clusters,
                              clusters.method, clusters.labels, args.missing_distance)

    a = assign_observations(d, clusters)
    profile = cluster_profile_table(a, z)
    _write_tree(out, "category_tree", tree)
    _write_json(out / "clusters.json", clusters.to_dict())
    _write_assignment(out, a, args.delimiter)
    _write_profile(out, profile, args.delimiter)

    g = clusters.G
    n_merges = min(z.J - g, len(tree.merges))
    sizes = tuple(float(s) for s in a.exact_cluster_sizes)
    upper = None
    nonempty = sum(1 for s in sizes if s > 0)
    if g >= 2 and nonempty >= 2:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            upper = cluster_of_clusters(profile, linkage)
        for w in caught:
            print(f"notice: {w.message}", file=sys.stderr)
        _write_tree(out, "cluster_tree", upper)
        ca = correspondence_analysis(profile, dims=min(args.dims, g - 1))
        _ca_files(out, ca, args.delimiter)
    else:
        print("notice: fewer than two non-empty clusters; cluster-of-clusters skipped",
              file=sys.stderr)
    groups = tuple(tree.roots(n_merges))
    if len(groups) != g:
        # degenerate G=1 cut: draw the full forest without an upper tree
        bi = BiDendrogram(tree, None, groups, n_merges, shared=False)
    elif upper is None or upper.n_leaves != g:
        bi = BiDendrogram(tree, None, groups, n_merges, shared=False, sizes=sizes)
    else:
        bi = BiDendrogram(tree, upper, groups, n_merges, shared=False, sizes=sizes)
    _write_json(out / "bidendrogram.json", bi.to_dict())
    _write_text(out / "bidendrogram.svg", render_bidendrogram(bi, _render_options(args)))
    _write_json(out / "summary.json", {
        "n": d.n, "J": z.J, "method": method, "linkage": linkage, "G": g,
        "category_merges_to_cut": n_merges, "fuzzy_observations": a.n_fuzzy,
        "clusters": _sizes_summary(clusters, a),
    })
    print(f"between: method={method} linkage={linkage} G={g} sizes="
          + ", ".join(_num(s) for s in sizes))
    return EXIT_OK


def _ca_files(out: Path, ca, delimiter: str):
    dims = [f"dim{k + 1}" for k in range(ca.dims)]
    _write_csv(out / "ca_rows.csv", ["label", "mass"] + dims,
               [[lab, _num(m)] + [_num(x) for x in row]
                for lab, m, row in zip(ca.row_labels, ca.row_masses, ca.row_coordinates)],
               delimiter)
    _write_csv(out / "ca_columns.csv", ["label", "mass"] + dims,
               [[lab, _num(m)] + [_num(x) for x in row]
                for lab, m, row in zip(ca.col_labels, ca.col_masses, ca.col_coordinates)],
               delimiter)


def cmd_assign(args) -> int:
    if not args.definitions:
        raise UsageError("--definitions is required for 'assign'")
    d = _load(args)
    out = _out_dir(args)
    with open(args.definitions, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TreeFormatError(f"cluster definitions are not valid JSON: {exc}") from exc
    clusters = ClusterSet.from_dict(obj)
    a = assign_observations(d, clusters)
    z = indicator_for(d, clusters)
    _write_assignment(out, a, args.delimiter)
    _write_profile(out, cluster_profile_table(a, z), args.delimiter)
    _write_json(out / "summary.json", {"n": d.n, "G": clusters.G,
                                       "fuzzy_observations": a.n_fuzzy,
                                       "clusters": _sizes_summary(clusters, a)})
    print("assign: sizes=" + ", ".join(_num(s) for s in a.cluster_sizes))
    return EXIT_OK


def cmd_render(args) -> int:
    if not args.input:
        raise UsageError("--input is required for 'render'")
    text = Path(args.input).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeFormatError(f"not valid JSON: {exc}", field="<root>") from exc
    bi = BiDendrogram.from_dict(obj)
    output = Path(args.output) if args.output else Path(args.out_dir) / "bidendrogram.svg"
    output.parent.mkdir(parents=True, exist_ok=True)
    _write_text(output, render_bidendrogram(bi, _render_options(args)))
    print(f"render: wrote {output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--delimiter", default=",", help="field delimiter for tabular files")
    common.add_argument("--threshold", type=float, help="height of a dashed cut line")
    common.add_argument("--percent-axis", action="store_true",
                        help="label inertia axes as a percentage of the total")
    common.add_argument("--hanging", action="store_true",
                        help="hanging leaves with a dotted zero line")
    common.add_argument("-v", "--verbose", action="store_true")
    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="delimited file of integer category codes")
    data.add_argument("--schema", help="YAML or JSON schema file")
    data.add_argument("--drop-missing", action="store_true",
                      help="drop rows with any missing code")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("within", parents=[common, data],
                       help="merge categories within variables, then cluster variables")
    p.set_defaults(func=cmd_within)

    p = sub.add_parser("between", parents=[common, data],
                       help="cluster categories across variables and assign observations")
    p.add_argument("--method", choices=[RESIDUAL, RESISTANCE], default=RESIDUAL)
    p.add_argument("--linkage", choices=["average", "complete"],
                   help="default: average for residual, complete for resistance")
    p.add_argument("--clusters", type=int, help="number of category clusters G")
    p.add_argument("--dims", type=int, default=2, help="CA dimensions to export")
    p.add_argument("--missing-distance", type=float,
                   help="resistance between a missing and a substantive answer")
    p.set_defaults(func=cmd_between)

    p = sub.add_parser("assign", parents=[common, data],
                       help="assign observations to previously defined clusters")
    p.add_argument("--definitions", help="clusters.json written by 'between'")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("render", parents=[common], help="re-render a saved bi-dendrogram")
    p.add_argument("--input", help="bidendrogram.json written by 'within' or 'between'")
    p.add_argument("--output", help="SVG path (default: OUT_DIR/bidendrogram.svg)")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TreeFormatError as exc:
        where = f" (field {exc.field})" if exc.field else ""
        print(f"parse error{where}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CatClustError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
