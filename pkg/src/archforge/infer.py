"""Dependency inference: reference resolution, closures, and part status."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import NotFoundError, ResolutionError
from .names import LabelRef, Name
from .source import Declaration, scan_identifiers
from .store import Node, NodePart, NodeStore, PROOF_KINDS, SORRY_AX, is_upstream


@dataclass(frozen=True)
class RefSets:
    """Resolved references of one declaration, deduped in source order."""

    statement_refs: tuple[Name, ...]
    body_refs: tuple[Name, ...]

    def all_refs(self) -> tuple[Name, ...]:
        out: list[Name] = list(self.statement_refs)
        seen = set(out)
        for n in self.body_refs:
            if n not in seen:
                seen.add(n)
                out.append(n)
        return tuple(out)


@dataclass(frozen=True)
class PartStatus:
    inferred_uses: tuple[Name, ...]
    lean_ok: bool
    mathlib_ok: bool


@dataclass
class _InferCache:
    refs: dict[Name, RefSets] = field(default_factory=dict)
    status: dict[tuple[Name, str], PartStatus] = field(default_factory=dict)
    effective: dict[tuple[Name, str], tuple[str, ...]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _cache(store: NodeStore) -> _InferCache:
    if store._infer_cache is None:
        store._infer_cache = _InferCache()
    return store._infer_cache  # type: ignore[return-value]


def resolve_name(
    raw: Name,
    context: tuple[str, ...],
    opens: tuple[Name, ...],
    known: Callable[[Name], bool],
) -> Name | None:
    """Resolve a written name against enclosing namespaces and opens.

    Innermost namespace prefixes win, then opened namespaces in order, then
    the bare name.  Dotted names that still miss retry with their leading
    segment stripped, which covers projection-style calls like `b.zero_add`.
    """

    probe: Name | None = raw
    while probe is not None:
        for i in range(len(context), 0, -1):
            cand = Name(context[:i] + probe.segments)
            if known(cand):
                return cand
        for opened in opens:
            cand = opened.join(probe)
            if known(cand):
                return cand
        if known(probe):
            return probe
        probe = probe.drop_head()
    return None


def resolve_references(decl: Declaration, store: NodeStore) -> RefSets:
    """Resolve every lexical reference in a declaration to known constants.

    Unknown identifiers (local variables, binders) silently drop out.  Names
    written in `sorry_using` must resolve; labels there must exist.
    """

    cache = _cache(store)
    cached = cache.refs.get(decl.name)
    if cached is not None:
        return cached

    def known(name: Name) -> bool:
        return name in store.declarations or name in store.by_name or name in store.upstream_index

    def resolve_many(text: str) -> list[Name]:
        out: list[Name] = []
        for tok in scan_identifiers(text):
            hit = resolve_name(Name.parse(tok), decl.namespace_context, decl.opens, known)
            if hit is not None:
                out.append(hit)
        return out

    def dedup(names: Iterable[Name]) -> tuple[Name, ...]:
        seen: set[Name] = set()
        out: list[Name] = []
        for n in names:
            if n != decl.name and n not in seen:
                seen.add(n)
                out.append(n)
        return tuple(out)

    statement_refs = dedup(resolve_many(decl.signature_text))

    body: list[Name] = []
    if decl.body_text:
        body.extend(resolve_many(decl.body_text))
    for marker in decl.sorry_markers:
        for entry in marker.using:
            if isinstance(entry, LabelRef):
                targets = store.by_label.get(entry.label)
                if not targets:
                    raise ResolutionError(
                        f"sorry_using in '{decl.name}' names unknown label '{entry.label}'"
                    )
                body.extend(targets)
            else:
                hit = resolve_name(entry, decl.namespace_context, decl.opens, known)
                if hit is None:
                    raise ResolutionError(
                        f"sorry_using in '{decl.name}' names unknown constant '{entry}'"
                    )
                body.append(hit)
        body.append(SORRY_AX)

    refs = RefSets(statement_refs=statement_refs, body_refs=dedup(body))
    cache.refs[decl.name] = refs
    return refs


def reference_closure(
    start: Iterable[Name],
    store: NodeStore,
    refs_of: Callable[[Name], tuple[Name, ...]] | None = None,
) -> tuple[Name, ...]:
    """Breadth-first closure that stops at blueprint-tagged constants.

    Tagged constants and `sorryAx` are collected; untagged project constants
    are traversed transparently; anything else is ignored.  Output keeps
    first-discovery order.
    """

    if refs_of is None:

        def refs_of(name: Name) -> tuple[Name, ...]:
            decl = store.declarations.get(name)
            if decl is None:
                return ()
            return resolve_references(decl, store).all_refs()

    seen: set[Name] = set()
    out: list[Name] = []
    queue: deque[Name] = deque(start)
    while queue:
        cur = queue.popleft()
        if cur in seen:
            continue
        seen.add(cur)
        if cur == SORRY_AX or cur in store.by_name:
            out.append(cur)
            continue
        for ref in refs_of(cur):
            if ref not in seen:
                queue.append(ref)
    return tuple(out)


def part_status(store: NodeStore, node: Node, part: str) -> PartStatus:
    """Status of one node part: inferred uses, leanOk, mathlibOk."""

    if part not in ("statement", "proof"):
        raise ValueError(f"unknown part {part!r}")
    if part == "proof" and node.proof is None:
        raise NotFoundError(f"node '{node.name}' has no proof part")

    cache = _cache(store)
    key = (node.name, part)
    cached = cache.status.get(key)
    if cached is not None:
        return cached

    upstream = is_upstream(store, node.name)
    if node.origin == "upstream":
        status = PartStatus(
            inferred_uses=(),
            lean_ok=True,
            mathlib_ok=upstream and part == "statement",
        )
        cache.status[key] = status
        return status

    decl = store.declarations[node.name]
    refs = resolve_references(decl, store)
    if part == "statement":
        start = list(refs.statement_refs)
        if decl.kind not in PROOF_KINDS:
            # a definition's value is part of what it states
            seen = set(start)
            for n in refs.body_refs:
                if n not in seen:
                    seen.add(n)
                    start.append(n)
    else:
        start = list(refs.body_refs)

    collected = reference_closure(start, store)
    inferred = tuple(n for n in collected if n != SORRY_AX and n != node.name)
    status = PartStatus(
        inferred_uses=inferred,
        lean_ok=SORRY_AX not in collected,
        mathlib_ok=upstream and part == "statement",
    )
    cache.status[key] = status
    return status


def effective_uses(store: NodeStore, node: Node, part: str) -> tuple[str, ...]:
    """Final `\\uses` label list for one node part.

    Inferred dependencies come first, then explicit names, then explicit
    labels; excludes and the node's own label are removed; duplicates keep
    their first position.
    """

    cache = _cache(store)
    key = (node.name, part)
    cached = cache.effective.get(key)
    if cached is not None:
        return cached

    part_obj: NodePart | None = node.statement if part == "statement" else node.proof
    if part_obj is None:
        raise NotFoundError(f"node '{node.name}' has no proof part")

    status = part_status(store, node, part)

    decl = store.declarations.get(node.name)
    context = decl.namespace_context if decl is not None else ()
    opens = decl.opens if decl is not None else ()

    def known(name: Name) -> bool:
        return name in store.by_name

    def resolve_explicit(entry: Name, what: str) -> Name:
        hit = resolve_name(entry, context, opens, known)
        if hit is None:
            raise ResolutionError(
                f"{what} entry '{entry}' on node '{node.name}' does not name a blueprint node"
            )
        return hit

    labels: list[str] = [store.by_name[n].latex_label for n in status.inferred_uses]
    for entry in part_obj.uses:
        labels.append(store.by_name[resolve_explicit(entry, "uses")].latex_label)
    for lbl in part_obj.uses_labels:
        if lbl not in store.by_label:
            warning = (
                f"node '{node.name}' ({part}) uses label '{lbl}' that no declaration carries"
            )
            if warning not in cache.warnings:
                cache.warnings.append(warning)
        labels.append(lbl)

    excluded: set[str] = {node.latex_label, "sorryAx"}
    for entry in part_obj.excludes:
        hit = resolve_name(entry, context, opens, known)
        if hit is None:
            warning = f"excludes entry '{entry}' on node '{node.name}' does not name a blueprint node"
            if warning not in cache.warnings:
                cache.warnings.append(warning)
            continue
        excluded.add(store.by_name[hit].latex_label)
    excluded.update(part_obj.excludes_labels)

    seen: set[str] = set()
    out: list[str] = []
    for lbl in labels:
        if lbl in excluded or lbl in seen:
            continue
        seen.add(lbl)
        out.append(lbl)

    result = tuple(out)
    cache.effective[key] = result
    return result


def warm_statuses(store: NodeStore) -> None:
    """Precompute every status and effective-uses set in store order.

    Keeps warning order deterministic no matter which consumer runs first.
    """

    for label in sorted(store.by_label):
        for name in store.by_label[label]:
            node = store.by_name[name]
            part_status(store, node, "statement")
            effective_uses(store, node, "statement")
            if node.proof is not None:
                part_status(store, node, "proof")
                effective_uses(store, node, "proof")


def inference_warnings(store: NodeStore) -> tuple[str, ...]:
    return tuple(_cache(store).warnings)
