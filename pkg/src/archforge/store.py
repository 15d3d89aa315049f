"""Blueprint node store: collects tagged declarations across a module set."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import NotFoundError, StoreError
from .names import LabelRef, Name
from .source import (
    AttributeSpec,
    Declaration,
    ModuleUnit,
    RawComment,
    UpstreamAttribution,
)

DEFAULT_UPSTREAM_PREFIXES = ("Init", "Std", "Batteries", "Mathlib")

PROOF_KINDS = frozenset({"theorem", "lemma"})

SORRY_AX = Name(("sorryAx",))


@dataclass(frozen=True)
class NodePart:
    """One half of a node: its statement or its proof."""

    text: str
    uses: tuple[Name | LabelRef, ...]
    excludes: tuple[Name | LabelRef, ...]
    uses_labels: tuple[str, ...]
    excludes_labels: tuple[str, ...]
    latex_env: str


@dataclass(frozen=True)
class Node:
    """A blueprint node produced by one tagged declaration or attribution."""

    name: Name
    latex_label: str
    statement: NodePart
    proof: NodePart | None
    not_ready: bool
    discussion: int | None
    title: str | None
    origin: str  # "project" | "upstream"
    module: Name  # defining module (for upstream nodes, derived from the name)
    placement_module: Name  # module whose item list carries the node
    placement_index: int  # index into that module's items


@dataclass
class NodeStore:
    """Everything later stages need, precomputed once per module set."""

    modules: dict[Name, ModuleUnit]
    by_name: dict[Name, Node]
    by_label: dict[str, tuple[Name, ...]]
    import_graph: dict[Name, tuple[Name, ...]]
    topo_order: tuple[Name, ...]
    declarations: dict[Name, Declaration]
    decl_module: dict[Name, Name]
    placements: dict[tuple[Name, int], Name]  # (module, item index) -> node name
    upstream_index: frozenset[Name]
    upstream_prefixes: tuple[str, ...]
    warnings: tuple[str, ...] = ()
    _infer_cache: object = field(default=None, repr=False, compare=False)

    def topo_index(self, module: Name) -> int:
        try:
            return self.topo_order.index(module)
        except ValueError:
            return len(self.topo_order)

    def node(self, name: Name) -> Node:
        node = self.by_name.get(name)
        if node is None:
            raise NotFoundError(f"no blueprint node for declaration '{name}'")
        return node

    def labels(self) -> list[str]:
        return sorted(self.by_label)


def load_upstream_index(path: str | Path) -> frozenset[Name]:
    """Read a newline-separated list of fully qualified upstream constants."""

    out: set[Name] = set()
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        out.add(Name.parse(line))
    return frozenset(out)


def _topo_sort(modules: dict[Name, ModuleUnit]) -> tuple[tuple[Name, ...], dict[Name, tuple[Name, ...]]]:
    graph = {
        name: tuple(imp for imp in unit.imports if imp in modules)
        for name, unit in modules.items()
    }
    indeg = {name: 0 for name in modules}
    dependents: dict[Name, list[Name]] = {name: [] for name in modules}
    for name, imps in graph.items():
        for imp in set(imps):
            indeg[name] += 1
            dependents[imp].append(name)
    ready = sorted(n for n, d in indeg.items() if d == 0)
    order: list[Name] = []
    while ready:
        cur = ready.pop(0)
        order.append(cur)
        changed = False
        for dep in dependents[cur]:
            indeg[dep] -= 1
            if indeg[dep] == 0:
                ready.append(dep)
                changed = True
        if changed:
            ready.sort()
    if len(order) != len(modules):
        cyclic = sorted(str(n) for n, d in indeg.items() if d > 0)
        raise StoreError("import cycle among modules: " + ", ".join(cyclic))
    return tuple(order), graph


def _split_dep_entries(
    entries: Iterable[Name | LabelRef],
) -> tuple[tuple[Name, ...], tuple[str, ...]]:
    names: list[Name] = []
    labels: list[str] = []
    for e in entries:
        if isinstance(e, LabelRef):
            labels.append(e.label)
        else:
            names.append(e)
    return tuple(names), tuple(labels)


def _default_env(kind: str | None, origin: str) -> str:
    if origin == "upstream":
        return "theorem"
    return "theorem" if kind in PROOF_KINDS else "definition"


def _make_node(
    *,
    name: Name,
    spec: AttributeSpec,
    decl: Declaration | None,
    origin: str,
    module: Name,
    placement_module: Name,
    placement_index: int,
) -> Node:
    label = spec.label if spec.label is not None else str(name)
    kind = decl.kind if decl is not None else None

    stmt_text = spec.statement
    if stmt_text is None:
        stmt_text = decl.docstring if decl is not None and decl.docstring else ""
    uses, uses_labels = _split_dep_entries(spec.uses)
    excl, excl_labels = _split_dep_entries(spec.excludes)
    statement = NodePart(
        text=stmt_text,
        uses=uses,
        excludes=excl,
        uses_labels=uses_labels,
        excludes_labels=excl_labels,
        latex_env=spec.latex_env if spec.latex_env else _default_env(kind, origin),
    )

    if spec.has_proof is not None:
        has_proof = spec.has_proof
    elif origin == "upstream":
        has_proof = False
    else:
        has_proof = kind in PROOF_KINDS

    proof = None
    if has_proof:
        proof_text = spec.proof
        if proof_text is None:
            docs = decl.tactic_docstrings if decl is not None else ()
            proof_text = " ".join(d for d in docs if d)
        p_uses, p_uses_labels = _split_dep_entries(spec.proof_uses)
        proof = NodePart(
            text=proof_text,
            uses=p_uses,
            excludes=excl,
            uses_labels=p_uses_labels,
            excludes_labels=excl_labels,
            latex_env="proof",
        )

    return Node(
        name=name,
        latex_label=label,
        statement=statement,
        proof=proof,
        not_ready=spec.not_ready,
        discussion=spec.discussion,
        title=spec.title,
        origin=origin,
        module=module,
        placement_module=placement_module,
        placement_index=placement_index,
    )


def build_store(
    modules: Iterable[ModuleUnit],
    upstream_index: frozenset[Name] = frozenset(),
    upstream_prefixes: tuple[str, ...] = DEFAULT_UPSTREAM_PREFIXES,
) -> NodeStore:
    """Assemble the node store for a set of parsed modules.

    Modules are visited in import-topological order so that merged labels
    keep a stable, dependency-respecting order.
    """

    module_map: dict[Name, ModuleUnit] = {}
    for unit in modules:
        if unit.name in module_map:
            raise StoreError(f"duplicate module name '{unit.name}'")
        module_map[unit.name] = unit

    topo, import_graph = _topo_sort(module_map)

    declarations: dict[Name, Declaration] = {}
    decl_module: dict[Name, Name] = {}
    for mod_name in topo:
        for item in module_map[mod_name].items:
            if isinstance(item, Declaration):
                if item.name in declarations:
                    raise StoreError(
                        f"declaration '{item.name}' defined in both "
                        f"'{decl_module[item.name]}' and '{mod_name}'"
                    )
                if item.name == SORRY_AX:
                    raise StoreError("'sorryAx' is reserved and cannot be declared")
                declarations[item.name] = item
                decl_module[item.name] = mod_name

    by_name: dict[Name, Node] = {}
    by_label: dict[str, list[Name]] = {}
    placements: dict[tuple[Name, int], Name] = {}
    warnings: list[str] = []

    def register(node: Node) -> None:
        if node.name in by_name:
            raise StoreError(f"declaration '{node.name}' carries more than one blueprint tag")
        by_name[node.name] = node
        by_label.setdefault(node.latex_label, []).append(node.name)
        placements[(node.placement_module, node.placement_index)] = node.name

    for mod_name in topo:
        unit = module_map[mod_name]
        for idx, item in enumerate(unit.items):
            if isinstance(item, Declaration):
                if item.attribute is None:
                    continue
                register(
                    _make_node(
                        name=item.name,
                        spec=item.attribute,
                        decl=item,
                        origin="project",
                        module=mod_name,
                        placement_module=mod_name,
                        placement_index=idx,
                    )
                )
            elif isinstance(item, UpstreamAttribution):
                target = _resolve_attribution_target(
                    item, declarations, upstream_index
                )
                if target is None:
                    raise StoreError(
                        f"attribute command in '{mod_name}' names unknown constant "
                        f"'{item.target}'"
                    )
                if target in declarations:
                    register(
                        _make_node(
                            name=target,
                            spec=item.attribute,
                            decl=declarations[target],
                            origin="project",
                            module=decl_module[target],
                            placement_module=mod_name,
                            placement_index=idx,
                        )
                    )
                else:
                    defining = target.parent() or target
                    register(
                        _make_node(
                            name=target,
                            spec=item.attribute,
                            decl=None,
                            origin="upstream",
                            module=defining,
                            placement_module=mod_name,
                            placement_index=idx,
                        )
                    )

    return NodeStore(
        modules=module_map,
        by_name=by_name,
        by_label={label: tuple(names) for label, names in by_label.items()},
        import_graph=import_graph,
        topo_order=topo,
        declarations=declarations,
        decl_module=decl_module,
        placements=placements,
        upstream_index=upstream_index,
        upstream_prefixes=tuple(upstream_prefixes),
        warnings=tuple(warnings),
    )


def _resolve_attribution_target(
    item: UpstreamAttribution,
    declarations: dict[Name, Declaration],
    upstream_index: frozenset[Name],
) -> Name | None:
    def known(name: Name) -> bool:
        return name in declarations or name in upstream_index

    ctx = item.namespace_context
    for i in range(len(ctx), 0, -1):
        cand = Name(ctx[:i] + item.target.segments)
        if known(cand):
            return cand
    for opened in item.opens:
        cand = opened.join(item.target)
        if known(cand):
            return cand
    if known(item.target):
        return item.target
    return None


def merged_nodes(store: NodeStore, label: str) -> list[Node]:
    """All nodes sharing a label, ordered by (module topo index, placement)."""

    names = store.by_label.get(label)
    if not names:
        raise NotFoundError(f"no blueprint node with label '{label}'")
    nodes = [store.by_name[n] for n in names]
    nodes.sort(key=lambda n: (store.topo_index(n.placement_module), n.placement_index))
    return nodes


def is_upstream(store: NodeStore, name: Name) -> bool:
    """Whether a node's defining module lives in an upstream tree."""

    node = store.by_name.get(name)
    if node is None:
        raise NotFoundError(f"no blueprint node for declaration '{name}'")
    return node.module.head in store.upstream_prefixes
