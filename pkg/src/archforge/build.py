"""Project loading, incremental extraction, and artifact management."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__ as TOOL_VERSION
from .config import ProjectConfig
from .errors import LockError, StoreError
from .graph import build_graph, emit_dot, graph_json_data
from .infer import inference_warnings, warm_statuses
from .latex import (
    RenderOptions,
    blueprint_json_data,
    fragment_paths,
    module_fragment_path,
    render_macros,
    render_module_fragment,
    render_node,
)
from .names import Name
from .source import ModuleUnit, parse_module
from .store import NodeStore, build_store, load_upstream_index

MANIFEST_NAME = "manifest.json"
LOCK_NAME = ".lock"
GLOBAL_FILES = ("macros.tex", "blueprint.json", "graph.dot", "graph.json")


@dataclass
class Project:
    config: ProjectConfig
    store: NodeStore
    module_paths: dict[Name, Path]

    @property
    def warnings(self) -> list[str]:
        out = [str(w) for name in self.store.topo_order for w in self.store.modules[name].warnings]
        out.extend(inference_warnings(self.store))
        return out


def discover_modules(config: ProjectConfig) -> list[tuple[Name, Path]]:
    """All .lean files under the source roots, named by their relative path."""

    found: dict[Name, Path] = {}
    for root in config.source_roots:
        if not root.is_dir():
            raise StoreError(f"source root '{root}' is not a directory")
        for path in sorted(root.rglob("*.lean")):
            rel = path.relative_to(root)
            segments = rel.parts[:-1] + (rel.stem,)
            name = Name(tuple(segments))
            if name in found and found[name] != path:
                raise StoreError(
                    f"module '{name}' found in two source roots: {found[name]} and {path}"
                )
            found[name] = path
    return sorted(found.items(), key=lambda kv: str(kv[0]))


def load_project(config: ProjectConfig) -> Project:
    """Parse every module, build the store, and warm all statuses."""

    units: list[ModuleUnit] = []
    paths: dict[Name, Path] = {}
    for name, path in discover_modules(config):
        units.append(parse_module(path, name))
        paths[name] = path
    upstream = frozenset()
    if config.upstream_index_path is not None:
        upstream = load_upstream_index(config.upstream_index_path)
    store = build_store(units, upstream, config.upstream_prefixes)
    warm_statuses(store)
    return Project(config=config, store=store, module_paths=paths)


# ---------------------------------------------------------------------------
# Manifest and staleness


def _env_fingerprint(config: ProjectConfig, store: NodeStore) -> str:
    """Non-source inputs that invalidate artifacts when they change."""

    h = hashlib.blake2b(digest_size=8)
    h.update(TOOL_VERSION.encode())
    h.update(repr(sorted(config.upstream_prefixes)).encode())
    h.update(repr(config.emit_leanok_with_mathlibok).encode())
    h.update(repr(sorted(str(n) for n in store.upstream_index)).encode())
    return h.hexdigest()


def transitive_hashes(store: NodeStore, fingerprint: str) -> dict[Name, str]:
    """Per-module hash folding in the module source, imports, and environment."""

    out: dict[Name, str] = {}
    for name in store.topo_order:
        unit = store.modules[name]
        h = hashlib.blake2b(digest_size=8)
        h.update(fingerprint.encode())
        h.update(unit.source_hash.encode())
        for imp in unit.imports:
            if imp in out:
                h.update(str(imp).encode())
                h.update(out[imp].encode())
        out[name] = h.hexdigest()
    return out


def load_manifest(out_dir: Path) -> dict | None:
    path = out_dir / MANIFEST_NAME
    if not path.is_file():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return None
    if not isinstance(data, dict) or not isinstance(data.get("entries"), dict):
        return None
    return data


def compute_staleness(
    manifest: dict | None,
    store: NodeStore,
    transitive: dict[Name, str],
    artifacts: dict[Name, list[str]],
    out_dir: Path,
) -> set[Name]:
    """Modules whose artifacts cannot be trusted and must be rewritten."""

    all_modules = set(store.topo_order)
    if manifest is None or manifest.get("toolVersion") != TOOL_VERSION:
        return all_modules

    entries = manifest["entries"]
    stale: set[Name] = set()
    for name in store.topo_order:
        entry = entries.get(str(name))
        if not isinstance(entry, dict):
            stale.add(name)
            continue
        if entry.get("transitiveHash") != transitive[name]:
            stale.add(name)
            continue
        for rel in artifacts[name]:
            if not (out_dir / rel).is_file():
                stale.add(name)
                break

    # a stale import conservatively invalidates every importer
    changed = True
    while changed:
        changed = False
        for name in store.topo_order:
            if name in stale:
                continue
            if any(imp in stale for imp in store.import_graph[name]):
                stale.add(name)
                changed = True
    return stale


# ---------------------------------------------------------------------------
# Rendering plan


@dataclass
class RenderPlan:
    files: dict[str, str]  # relative path -> content
    owners: dict[str, Name | None]  # relative path -> owning module (None = global)
    node_paths: dict[str, str]
    artifacts: dict[Name, list[str]]  # module -> owned artifact paths


def render_project(store: NodeStore, options: RenderOptions) -> RenderPlan:
    """Render every artifact in memory, deterministically."""

    node_paths = fragment_paths(store)
    files: dict[str, str] = {}
    owners: dict[str, Name | None] = {}
    artifacts: dict[Name, list[str]] = {name: [] for name in store.topo_order}

    for label in sorted(store.by_label):
        rel = node_paths[label]
        rendered = render_node(store, label, options)
        files[rel] = rendered.tex + "\n"
        first = min(
            (store.by_name[n] for n in store.by_label[label]),
            key=lambda n: (store.topo_index(n.placement_module), n.placement_index),
        )
        owners[rel] = first.placement_module
        artifacts[first.placement_module].append(rel)

    for name in store.topo_order:
        rel = module_fragment_path(name)
        files[rel] = render_module_fragment(store, name, options)
        owners[rel] = name
        artifacts[name].append(rel)

    graph = build_graph(store)
    files["macros.tex"] = render_macros(store, node_paths)
    files["graph.dot"] = emit_dot(graph)
    files["graph.json"] = _dump_json(graph_json_data(graph))
    files["blueprint.json"] = _dump_json(blueprint_json_data(store, node_paths, options))
    for rel in GLOBAL_FILES:
        owners[rel] = None

    for name in artifacts:
        artifacts[name].sort()
    return RenderPlan(files=files, owners=owners, node_paths=node_paths, artifacts=artifacts)


def _dump_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Extraction


@dataclass
class ExtractResult:
    stale: set[Name]
    fresh: set[Name]
    written: list[str]
    deleted: list[str]
    warnings: list[str]
    node_count: int

    def summary_lines(self) -> list[str]:
        lines = []
        for name in sorted(self.stale | self.fresh, key=str):
            state = "stale (rebuilt)" if name in self.stale else "fresh"
            lines.append(f"module {name}: {state}")
        lines.append(f"wrote {len(self.written)} files, deleted {len(self.deleted)}")
        return lines


class _BuildLock:
    """Advisory exclusive lock so concurrent extracts cannot interleave."""

    def __init__(self, out_dir: Path):
        self.path = out_dir / LOCK_NAME
        self.handle = None

    def __enter__(self) -> "_BuildLock":
        import fcntl

        self.handle = open(self.path, "w")
        try:
            fcntl.flock(self.handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError as exc:
            self.handle.close()
            self.handle = None
            raise LockError(
                f"another archforge invocation holds the build lock at '{self.path}'"
            ) from exc
        return self

    def __exit__(self, *exc_info) -> None:
        if self.handle is not None:
            import fcntl

            fcntl.flock(self.handle.fileno(), fcntl.LOCK_UN)
            self.handle.close()
            self.handle = None


def extract(project: Project, out_dir: Path | None = None, force: bool = False) -> ExtractResult:
    """Render all artifacts and synchronize the output directory.

    Content is always rendered in memory; staleness decides what gets
    reported as rebuilt, and on-disk byte comparison guarantees the tree
    matches a clean build exactly (including merged labels that cross
    module boundaries).
    """

    store = project.store
    config = project.config
    out = out_dir if out_dir is not None else config.resolved_out_dir()
    out.mkdir(parents=True, exist_ok=True)

    with _BuildLock(out):
        options = RenderOptions(
            emit_leanok_with_mathlibok=config.emit_leanok_with_mathlibok
        )
        plan = render_project(store, options)

        fingerprint = _env_fingerprint(config, store)
        transitive = transitive_hashes(store, fingerprint)
        manifest = load_manifest(out)
        stale = compute_staleness(manifest, store, transitive, plan.artifacts, out)
        if force:
            stale = set(store.topo_order)

        written: list[str] = []
        for rel in sorted(plan.files):
            content = plan.files[rel].encode("utf-8")
            target = out / rel
            owner = plan.owners[rel]
            if force or (owner is not None and owner in stale):
                write = True
            else:
                # byte-level safety net: fresh files must already match
                on_disk = target.read_bytes() if target.is_file() else None
                write = on_disk != content
            if not write:
                continue
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(content)
            written.append(rel)

        deleted: list[str] = []
        for sub in ("nodes", "modules"):
            base = out / sub
            if not base.is_dir():
                continue
            for path in sorted(base.rglob("*")):
                if path.is_file():
                    rel = str(path.relative_to(out)).replace("\\", "/")
                    if rel not in plan.files:
                        path.unlink()
                        deleted.append(rel)

        entries = {
            str(name): {
                "sourceHash": store.modules[name].source_hash,
                "transitiveHash": transitive[name],
                "artifactPaths": plan.artifacts[name],
            }
            for name in store.topo_order
        }
        manifest_data = {"toolVersion": TOOL_VERSION, "entries": entries}
        (out / MANIFEST_NAME).write_text(_dump_json(manifest_data), encoding="utf-8")

    fresh = set(store.topo_order) - stale
    return ExtractResult(
        stale=stale,
        fresh=fresh,
        written=written,
        deleted=deleted,
        warnings=project.warnings,
        node_count=len(store.by_label),
    )
