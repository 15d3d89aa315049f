"""Command-line interface: extract, graph, check, status, convert."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .build import Project, extract, load_project
from .config import load_config
from .convert import (
    ConversionOptions,
    _TexScanner,
    apply_plan,
    parse_legacy_blueprint,
    plan_conversion,
)
from .errors import BlueprintError
from .graph import LintFinding, build_graph, emit_dot, graph_json_data, run_lints
from .infer import is_upstream, part_status
from .latex import first_placement
from .store import NodeStore


def _dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False)


# ---------------------------------------------------------------------------
# extract


def cmd_extract(args: argparse.Namespace) -> int:
    config = load_config()
    project = load_project(config)
    out = Path(args.out) if args.out else None
    result = extract(project, out_dir=out, force=args.force)
    for line in result.summary_lines():
        print(line)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.strict and result.warnings:
        return 2
    return 0


# ---------------------------------------------------------------------------
# graph


def cmd_graph(args: argparse.Namespace) -> int:
    config = load_config()
    project = load_project(config)
    graph = build_graph(project.store)
    if args.format == "json":
        payload = _dump_json(graph_json_data(graph)) + "\n"
    else:
        payload = emit_dot(graph)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return 0


# ---------------------------------------------------------------------------
# check


_CROSS_SEVERITY = {
    "unknown-label": "error",
    "unknown-module": "error",
    "unreferenced-label": "warning",
}


def blueprint_cross_findings(project: Project) -> list[LintFinding]:
    """Cross-check configured blueprint .tex files against the store."""

    store = project.store
    referenced_labels: set[str] = set()
    referenced_modules: set[str] = set()
    findings: list[LintFinding] = []

    for path in project.config.blueprint_tex_files:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise BlueprintError(f"cannot read blueprint file '{path}': {exc}") from exc
        sc = _TexScanner(text, str(path))
        for macro, bag in (
            ("inputleannode", referenced_labels),
            ("inputleanmodule", referenced_modules),
        ):
            pos = 0
            while True:
                i = sc.find_macro(macro, pos)
                if i == -1:
                    break
                arg, past = sc.balanced_arg(i + 1 + len(macro))
                bag.add(arg.strip())
                pos = past

    if not project.config.blueprint_tex_files:
        return findings

    module_names = {str(m) for m in store.modules}
    for label in sorted(referenced_labels - set(store.by_label)):
        findings.append(
            LintFinding(
                "unknown-label",
                label,
                "\\inputleannode names a label with no blueprint node",
                "error",
            )
        )
    for module in sorted(referenced_modules - module_names):
        findings.append(
            LintFinding(
                "unknown-module",
                module,
                "\\inputleanmodule names an unknown module",
                "error",
            )
        )
    for label in sorted(store.by_label):
        if label in referenced_labels:
            continue
        anchor_module, _ = first_placement(store, label)
        if str(anchor_module) in referenced_modules:
            continue
        findings.append(
            LintFinding(
                "unreferenced-label",
                label,
                "node is never pulled into the blueprint by \\inputleannode or \\inputleanmodule",
                "warning",
            )
        )
    return findings


def cmd_check(args: argparse.Namespace) -> int:
    config = load_config()
    project = load_project(config)
    findings = run_lints(project.store, strict=args.strict)
    findings.extend(blueprint_cross_findings(project))
    findings.sort(key=lambda f: (f.code, f.label))
    for finding in findings:
        print(str(finding))
    if any(f.severity == "error" for f in findings):
        return 1
    if args.strict and findings:
        return 1
    return 0


# ---------------------------------------------------------------------------
# status


def status_counts(store: NodeStore) -> dict:
    nodes = list(store.by_name.values())
    with_proof = [n for n in nodes if n.proof is not None]
    proofs_ok = sum(1 for n in with_proof if part_status(store, n, "proof").lean_ok)
    return {
        "nodes": len(nodes),
        "labels": len(store.by_label),
        "statementsLeanOk": sum(
            1 for n in nodes if part_status(store, n, "statement").lean_ok
        ),
        "proofsTotal": len(with_proof),
        "proofsLeanOk": proofs_ok,
        "sorriedProofs": len(with_proof) - proofs_ok,
        "upstreamNodes": sum(1 for n in nodes if is_upstream(store, n.name)),
        "notReadyNodes": sum(1 for n in nodes if n.not_ready),
    }


def cmd_status(args: argparse.Namespace) -> int:
    config = load_config()
    project = load_project(config)
    counts = status_counts(project.store)
    if args.json:
        print(_dump_json(counts))
        return 0
    print(f"nodes: {counts['nodes']} ({counts['labels']} labels)")
    print(f"statements leanOk: {counts['statementsLeanOk']} of {counts['nodes']}")
    print(f"proofs leanOk: {counts['proofsLeanOk']} of {counts['proofsTotal']}")
    print(f"sorried proofs: {counts['sorriedProofs']}")
    print(f"upstream nodes: {counts['upstreamNodes']}")
    print(f"notReady nodes: {counts['notReadyNodes']}")
    return 0


# ---------------------------------------------------------------------------
# convert


def _describe_legacy(node) -> str:
    what = node.label if node.label else f"unlabeled {node.env}"
    return f"{what} ({node.path}:{node.span.line})"


def cmd_convert(args: argparse.Namespace) -> int:
    config = load_config()
    project = load_project(config)
    legacy = parse_legacy_blueprint(args.blueprint)
    options = ConversionOptions(
        only_lean_nodes=not args.all_nodes,
        drop_uses_when_lean_ok=not args.keep_uses,
        docstring_width=config.docstring_width,
    )
    root_path = None
    if config.root_modules:
        root = project.module_paths.get(config.root_modules[0])
        if root is not None:
            root_path = str(root)
    plan = plan_conversion(legacy, project.store, options, root_path)

    for node, reason in plan.skipped:
        print(f"skipped {_describe_legacy(node)}: {reason}")
    if args.dry_run:
        for edit in plan.source_edits:
            head = edit.text.strip().splitlines()[0] if edit.text.strip() else ""
            print(f"would insert at {edit.path}@{edit.insert_at}: {head}")
        for edit in plan.latex_edits:
            print(
                f"would replace {edit.path}@{edit.start}..{edit.end} with {edit.replacement}"
            )
    summary = apply_plan(plan, dry_run=args.dry_run)
    print(str(summary))
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="archforge",
        description="Extract and synchronize LaTeX blueprints from annotated proof sources.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="render blueprint artifacts incrementally")
    p.add_argument("--force", action="store_true", help="rebuild every module")
    p.add_argument("--strict", action="store_true", help="exit 2 when warnings occur")
    p.add_argument("--out", help="output directory (overrides config)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("graph", help="emit the dependency graph")
    p.add_argument("--format", choices=("dot", "json"), default="dot")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("check", help="run lints and blueprint cross-checks")
    p.add_argument("--strict", action="store_true", help="treat warnings as failures")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("status", help="print formalization progress counts")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("convert", help="convert a legacy LaTeX blueprint")
    p.add_argument(
        "--blueprint", nargs="+", required=True, help="legacy blueprint .tex files"
    )
    p.add_argument("--all-nodes", action="store_true", help="also convert nodes without \\lean")
    p.add_argument("--keep-uses", action="store_true", help="keep uses lists for leanOk parts")
    p.add_argument("--dry-run", action="store_true", help="print the plan, write nothing")
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BlueprintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
