"""Label-level dependency graph, DOT/JSON emission, and lint checks."""

from __future__ import annotations

from dataclasses import dataclass

from .infer import effective_uses, part_status
from .store import NodeStore, is_upstream, merged_nodes


@dataclass(frozen=True)
class VertexInfo:
    env: str
    statement_ok: bool
    proof_ok: bool | None  # None when no constituent carries a proof part
    upstream: bool
    not_ready: bool
    dangling: bool = False  # referenced by some `uses` but never declared


@dataclass(frozen=True)
class Edge:
    src: str  # the dependency
    dst: str  # the dependent
    kind: str  # "statement" | "proof"


@dataclass(frozen=True)
class DepGraph:
    vertices: dict[str, VertexInfo]
    edges: tuple[Edge, ...]


@dataclass(frozen=True)
class LintFinding:
    code: str
    label: str
    message: str
    severity: str = "warning"

    def __str__(self) -> str:
        return f"{self.severity} {self.code} {self.label}: {self.message}"


LINT_SEVERITY = {
    "isolated-node": "warning",
    "unused-node": "warning",
    "empty-proof-uses": "warning",
    "dangling-label": "warning",
    "env-mismatch": "error",
}


def build_graph(store: NodeStore) -> DepGraph:
    """One vertex per label; an edge u->v when v uses u in some part."""

    vertices: dict[str, VertexInfo] = {}
    edges: set[Edge] = set()

    for label in sorted(store.by_label):
        nodes = merged_nodes(store, label)
        proved = [n for n in nodes if n.proof is not None]
        vertices[label] = VertexInfo(
            env=nodes[0].statement.latex_env,
            statement_ok=all(part_status(store, n, "statement").lean_ok for n in nodes),
            proof_ok=(
                all(part_status(store, n, "proof").lean_ok for n in proved)
                if proved
                else None
            ),
            upstream=any(is_upstream(store, n.name) for n in nodes),
            not_ready=any(n.not_ready for n in nodes),
        )

    for label in sorted(store.by_label):
        for node in merged_nodes(store, label):
            parts = ["statement"] + (["proof"] if node.proof is not None else [])
            for part in parts:
                for dep in effective_uses(store, node, part):
                    if dep == label:
                        continue
                    if dep not in vertices:
                        vertices[dep] = VertexInfo(
                            env="",
                            statement_ok=False,
                            proof_ok=None,
                            upstream=False,
                            not_ready=False,
                            dangling=True,
                        )
                    edges.add(Edge(src=dep, dst=label, kind=part))

    ordered = tuple(sorted(edges, key=lambda e: (e.src, e.dst, e.kind)))
    return DepGraph(vertices=vertices, edges=ordered)


def _vertex_color(info: VertexInfo) -> str:
    done = info.statement_ok and (info.proof_ok is None or info.proof_ok)
    return "green" if done else "blue"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_dot(graph: DepGraph) -> str:
    """Deterministic Graphviz rendering of the dependency graph."""

    lines = ["digraph blueprint {"]
    for label in sorted(graph.vertices):
        info = graph.vertices[label]
        shape = "box" if info.env == "definition" else "ellipse"
        color = _vertex_color(info)
        lines.append(
            f"  {_quote(label)} [shape={shape}, style=filled, fillcolor={_quote(color)}];"
        )
    for edge in graph.edges:
        style = "dashed" if edge.kind == "proof" else "solid"
        lines.append(f"  {_quote(edge.src)} -> {_quote(edge.dst)} [style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_json_data(graph: DepGraph) -> dict:
    return {
        "vertices": [
            {
                "label": label,
                "env": info.env,
                "statementOk": info.statement_ok,
                "proofOk": info.proof_ok,
                "upstream": info.upstream,
                "notReady": info.not_ready,
                "dangling": info.dangling,
            }
            for label, info in sorted(graph.vertices.items())
        ],
        "edges": [
            {"from": e.src, "to": e.dst, "kind": e.kind} for e in graph.edges
        ],
    }


def run_lints(store: NodeStore, graph: DepGraph | None = None, strict: bool = False) -> list[LintFinding]:
    """Structural health checks over the label graph.

    Findings come back sorted by (code, label).  `strict` also reports
    upstream nodes that nothing depends on.
    """

    if graph is None:
        graph = build_graph(store)

    has_outgoing = {e.src for e in graph.edges}
    has_incoming = {e.dst for e in graph.edges}

    findings: list[LintFinding] = []

    def add(code: str, label: str, message: str) -> None:
        findings.append(LintFinding(code, label, message, LINT_SEVERITY[code]))

    for label, info in graph.vertices.items():
        if info.dangling:
            dependents = sorted(e.dst for e in graph.edges if e.src == label)
            add(
                "dangling-label",
                label,
                "used by " + ", ".join(dependents) + " but no declaration carries it",
            )
            continue

        nodes = merged_nodes(store, label)
        envs = sorted({n.statement.latex_env for n in nodes})
        if len(envs) > 1:
            names = ", ".join(str(n.name) for n in nodes)
            add(
                "env-mismatch",
                label,
                f"environments {envs} conflict across declarations {names}",
            )

        incoming = label in has_incoming
        outgoing = label in has_outgoing
        if not incoming and not outgoing:
            add("isolated-node", label, "no dependencies in either direction")
        elif incoming and not outgoing:
            if not (info.upstream and not strict):
                add("unused-node", label, "nothing depends on this node")

        proved = [n for n in nodes if n.proof is not None]
        if proved and not info.upstream:
            proof_ok = all(part_status(store, n, "proof").lean_ok for n in proved)
            union = [lbl for n in proved for lbl in effective_uses(store, n, "proof")]
            if proof_ok and not union:
                add(
                    "empty-proof-uses",
                    label,
                    "proof is complete but no dependencies were inferred or declared",
                )

    findings.sort(key=lambda f: (f.code, f.label))
    return findings
