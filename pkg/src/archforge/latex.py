"""LaTeX fragment rendering for blueprint nodes and modules."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from .errors import RenderError
from .infer import effective_uses, part_status
from .names import Name
from .store import Node, NodeStore, is_upstream, merged_nodes
from .source import Declaration, RawComment, UpstreamAttribution


@dataclass(frozen=True)
class RenderOptions:
    emit_leanok_with_mathlibok: bool = False


@dataclass(frozen=True)
class RenderedNode:
    label: str
    names: tuple[str, ...]
    env: str
    statement_tex: str
    proof_tex: str | None

    @property
    def tex(self) -> str:
        if self.proof_tex is None:
            return self.statement_tex
        return self.statement_tex + "\n\n" + self.proof_tex


def sanitize_label(label: str) -> str:
    """Filesystem-safe base name for a label."""

    return re.sub(r"[^A-Za-z0-9_-]", "_", label)


def fragment_paths(store: NodeStore) -> dict[str, str]:
    """Map each label to its node fragment path, disambiguating collisions.

    The first label (in sorted order) of a colliding group keeps the plain
    sanitized name; the rest get an 8-hex-digit content suffix.
    """

    groups: dict[str, list[str]] = {}
    for label in sorted(store.by_label):
        groups.setdefault(sanitize_label(label), []).append(label)
    out: dict[str, str] = {}
    for base, labels in groups.items():
        for i, label in enumerate(labels):
            if i == 0:
                out[label] = f"nodes/{base}.tex"
            else:
                suffix = hashlib.sha256(label.encode("utf-8")).hexdigest()[:8]
                out[label] = f"nodes/{base}-{suffix}.tex"
    return out


def _dedup(seq) -> list:
    seen = set()
    out = []
    for x in seq:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out


def _merge_texts(texts) -> str:
    return "\n".join(_dedup([t for t in texts if t]))


def _status_line(tokens: list[str]) -> list[str]:
    return ["  " + " ".join(tokens)] if tokens else []


def _body_lines(text: str) -> list[str]:
    return [("  " + line).rstrip() for line in text.split("\n")] if text else []


def render_node(store: NodeStore, label: str, options: RenderOptions = RenderOptions()) -> RenderedNode:
    """Render the merged LaTeX fragment for one label."""

    nodes = merged_nodes(store, label)

    envs = _dedup(n.statement.latex_env for n in nodes)
    if len(envs) > 1:
        names = ", ".join(str(n.name) for n in nodes)
        raise RenderError(
            f"label '{label}' maps to conflicting environments {envs} (declarations: {names})"
        )
    env = envs[0]

    names = [str(n.name) for n in nodes]
    title = next((n.title for n in nodes if n.title is not None), None)
    discussion = next((n.discussion for n in nodes if n.discussion is not None), None)
    not_ready = any(n.not_ready for n in nodes)
    upstream = any(is_upstream(store, n.name) for n in nodes)
    stmt_ok = all(part_status(store, n, "statement").lean_ok for n in nodes)
    stmt_uses = _dedup(
        lbl for n in nodes for lbl in effective_uses(store, n, "statement")
    )
    stmt_text = _merge_texts(n.statement.text for n in nodes)

    header = f"\\begin{{{env}}}"
    if title is not None:
        header += f"[{title}]"
    lines = [header, f"  \\label{{{label}}} \\lean{{{', '.join(names)}}}"]

    status: list[str] = []
    if upstream:
        status.append("\\mathlibok")
        if options.emit_leanok_with_mathlibok and stmt_ok:
            status.append("\\leanok")
    elif stmt_ok:
        status.append("\\leanok")
    if stmt_uses:
        status.append("\\uses{" + ", ".join(stmt_uses) + "}")
    if not_ready:
        status.append("\\notready")
    if discussion is not None:
        status.append(f"\\discussion{{{discussion}}}")
    lines += _status_line(status)
    lines += _body_lines(stmt_text)
    lines.append(f"\\end{{{env}}}")
    statement_tex = "\n".join(lines)

    proved = [n for n in nodes if n.proof is not None]
    proof_tex = None
    if proved:
        proof_ok = all(part_status(store, n, "proof").lean_ok for n in proved)
        proof_uses = _dedup(
            lbl for n in proved for lbl in effective_uses(store, n, "proof")
        )
        proof_text = _merge_texts(n.proof.text for n in proved)
        plines = ["\\begin{proof}"]
        pstatus: list[str] = []
        if proof_ok:
            pstatus.append("\\leanok")
        if proof_uses:
            pstatus.append("\\uses{" + ", ".join(proof_uses) + "}")
        plines += _status_line(pstatus)
        plines += _body_lines(proof_text)
        plines.append("\\end{proof}")
        proof_tex = "\n".join(plines)

    rendered = RenderedNode(
        label=label,
        names=tuple(names),
        env=env,
        statement_tex=statement_tex,
        proof_tex=proof_tex,
    )
    if "sorryAx" in rendered.tex:
        raise RenderError(f"fragment for '{label}' leaked a sorry axiom reference")
    return rendered


def first_placement(store: NodeStore, label: str) -> tuple[Name, int]:
    """Module and item index where a label's fragment is anchored."""

    head = merged_nodes(store, label)[0]
    return head.placement_module, head.placement_index


def render_module_fragment(
    store: NodeStore, module: Name, options: RenderOptions = RenderOptions()
) -> str:
    """Concatenate a module's comments and node fragments in source order.

    A label renders where its first constituent is placed; later placements
    leave a pointer comment so the fragment appears exactly once.
    """

    unit = store.modules.get(module)
    if unit is None:
        raise RenderError(f"unknown module '{module}'")

    blocks: list[str] = []
    for idx, item in enumerate(unit.items):
        if isinstance(item, RawComment):
            blocks.append(item.text)
            continue
        name = store.placements.get((module, idx))
        if name is None:
            continue
        node = store.by_name[name]
        label = node.latex_label
        anchor_module, anchor_idx = first_placement(store, label)
        if (anchor_module, anchor_idx) == (module, idx):
            blocks.append(render_node(store, label, options).tex)
        else:
            blocks.append(f"% node {label} appears in module {anchor_module}")
    if not blocks:
        return ""
    return "\n\n".join(blocks) + "\n"


def module_fragment_path(module: Name) -> str:
    return f"modules/{module}.tex"


def render_macros(store: NodeStore, node_paths: dict[str, str]) -> str:
    """The macro header wiring labels and modules to their fragment files."""

    lines = [
        "% Generated by archforge; do not edit.",
        "\\makeatletter",
        "\\newcommand{\\inputleannode}[1]{%",
        "  \\ifcsname archforge@node@#1\\endcsname",
        "    \\input{\\csname archforge@node@#1\\endcsname}%",
        "  \\else",
        "    \\PackageError{archforge}{Unknown blueprint node '#1'}{}%",
        "  \\fi",
        "}",
        "\\newcommand{\\inputleanmodule}[1]{%",
        "  \\ifcsname archforge@module@#1\\endcsname",
        "    \\input{\\csname archforge@module@#1\\endcsname}%",
        "  \\else",
        "    \\PackageError{archforge}{Unknown blueprint module '#1'}{}%",
        "  \\fi",
        "}",
    ]
    for label in sorted(node_paths):
        target = node_paths[label][: -len(".tex")]
        lines.append(
            f"\\expandafter\\def\\csname archforge@node@{label}\\endcsname{{{target}}}"
        )
    for module in sorted(store.modules, key=str):
        target = module_fragment_path(module)[: -len(".tex")]
        lines.append(
            f"\\expandafter\\def\\csname archforge@module@{module}\\endcsname{{{target}}}"
        )
    lines.append("\\makeatother")
    return "\n".join(lines) + "\n"


def blueprint_json_data(
    store: NodeStore, node_paths: dict[str, str], options: RenderOptions = RenderOptions()
) -> dict:
    """Machine-readable summary of every rendered label."""

    nodes = []
    for label in sorted(store.by_label):
        merged = merged_nodes(store, label)
        rendered = render_node(store, label, options)
        stmt_ok = all(part_status(store, n, "statement").lean_ok for n in merged)
        proved = [n for n in merged if n.proof is not None]
        proof_entry = None
        if proved:
            proof_entry = {
                "leanOk": all(part_status(store, n, "proof").lean_ok for n in proved),
                "uses": _dedup(
                    lbl for n in proved for lbl in effective_uses(store, n, "proof")
                ),
                "text": _merge_texts(n.proof.text for n in proved),
            }
        nodes.append(
            {
                "label": label,
                "names": [str(n.name) for n in merged],
                "env": rendered.env,
                "title": next((n.title for n in merged if n.title is not None), None),
                "statement": {
                    "leanOk": stmt_ok,
                    "mathlibOk": any(is_upstream(store, n.name) for n in merged),
                    "uses": _dedup(
                        lbl for n in merged for lbl in effective_uses(store, n, "statement")
                    ),
                    "text": _merge_texts(n.statement.text for n in merged),
                },
                "proof": proof_entry,
                "notReady": any(n.not_ready for n in merged),
                "discussion": next(
                    (n.discussion for n in merged if n.discussion is not None), None
                ),
                "file": node_paths[label],
                "module": str(merged[0].placement_module),
            }
        )
    return {
        "formatVersion": 1,
        "nodes": nodes,
        "modules": [str(m) for m in sorted(store.modules, key=str)],
    }
