"""Legacy blueprint parsing, conversion planning, and edit application."""

from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from archforge.convert import (
    ConversionOptions,
    apply_plan,
    parse_legacy_blueprint,
    plan_conversion,
)
from archforge.errors import ConversionError, StaleSourceError
from archforge.infer import warm_statuses
from archforge.names import Name
from archforge.source import parse_module_text
from archforge.store import build_store


def write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return path


def store_of(texts: dict[str, str], upstream: frozenset[Name] = frozenset()):
    units = [
        parse_module_text(textwrap.dedent(t), Name.parse(n), path=f"{n}.lean")
        for n, t in texts.items()
    ]
    store = build_store(units, upstream)
    warm_statuses(store)
    return store


BASIC_TEX = r"""
Intro prose.

\begin{theorem}\label{thm:x}\lean{A.b}\leanok\uses{def:y}
T
\end{theorem}
\begin{proof}\uses{lem:z}
P
\end{proof}

Trailing prose.
"""


# ---------------------------------------------------------------------------
# parsing


def test_parse_basic_node(tmp_path):
    tex = write(tmp_path / "ch.tex", BASIC_TEX)
    nodes = parse_legacy_blueprint([tex])
    assert len(nodes) == 1
    n = nodes[0]
    assert n.env == "theorem"
    assert n.label == "thm:x"
    assert n.lean_names == (Name.parse("A.b"),)
    assert n.statement_uses == ("def:y",)
    assert n.statement_lean_ok is True
    assert n.statement_text == "T"
    assert n.proof.uses == ("lem:z",)
    assert n.proof.lean_ok is False
    assert n.proof.text == "P"


def test_parse_span_covers_trailing_proof(tmp_path):
    tex = write(tmp_path / "ch.tex", BASIC_TEX)
    n = parse_legacy_blueprint([tex])[0]
    covered = tex.read_text(encoding="utf-8")[n.span.start : n.span.end]
    assert covered.startswith("\\begin{theorem}")
    assert covered.endswith("\\end{proof}")


def test_parse_no_envs(tmp_path):
    tex = write(tmp_path / "plain.tex", "Just prose, no environments.\n")
    assert parse_legacy_blueprint([tex]) == []


def test_parse_title_and_flags(tmp_path):
    tex = write(
        tmp_path / "t.tex",
        r"""
        \begin{lemma}[Main bound]\label{lem:m}\lean{f}\mathlibok\notready
        \discussion{12}
        Body.
        \end{lemma}
        """,
    )
    n = parse_legacy_blueprint([tex])[0]
    assert n.env == "lemma" and n.title == "Main bound"
    assert n.mathlib_ok is True and n.not_ready is True and n.discussion == 12
    assert n.statement_text == "Body."


def test_parse_multiple_lean_names(tmp_path):
    tex = write(
        tmp_path / "t.tex",
        "\\begin{definition}\\label{d}\\lean{a, B.c}\nX\n\\end{definition}\n",
    )
    n = parse_legacy_blueprint([tex])[0]
    assert n.lean_names == (Name.parse("a"), Name.parse("B.c"))


def test_parse_text_collapses_whitespace_and_comments(tmp_path):
    tex = write(
        tmp_path / "t.tex",
        "\\begin{theorem}\\label{t}\n"
        "First   line\n"
        "% editorial note\n"
        "  second line\n"
        "\\end{theorem}\n",
    )
    n = parse_legacy_blueprint([tex])[0]
    assert n.statement_text == "First line second line"


def test_parse_commented_env_ignored(tmp_path):
    tex = write(
        tmp_path / "t.tex",
        "% \\begin{theorem}\\label{ghost}\n"
        "% \\end{theorem}\n"
        "\\begin{lemma}\\label{real}\nX\n\\end{lemma}\n",
    )
    nodes = parse_legacy_blueprint([tex])
    assert [n.label for n in nodes] == ["real"]


def test_parse_nested_same_env(tmp_path):
    tex = write(
        tmp_path / "t.tex",
        "\\begin{theorem}\\label{outer}\n"
        "\\begin{theorem}\\label{inner}\nY\n\\end{theorem}\n"
        "\\end{theorem}\n",
    )
    # the scanner takes the outer environment whole: one node, full span
    nodes = parse_legacy_blueprint([tex])
    assert len(nodes) == 1
    covered = tex.read_text(encoding="utf-8")[nodes[0].span.start : nodes[0].span.end]
    assert covered.count("\\begin{theorem}") == 2


def test_parse_unclosed_env_raises(tmp_path):
    tex = write(tmp_path / "t.tex", "\\begin{theorem}\\label{t}\nX\n")
    with pytest.raises(ConversionError, match="never closed"):
        parse_legacy_blueprint([tex])


def test_parse_unbalanced_macro_arg_raises(tmp_path):
    tex = write(tmp_path / "t.tex", "\\begin{theorem}\\label{t\nX\n\\end{theorem}\n")
    with pytest.raises(ConversionError, match="unbalanced"):
        parse_legacy_blueprint([tex])


def test_parse_order_across_files(tmp_path):
    a = write(tmp_path / "a.tex", "\\begin{theorem}\\label{one}\nX\n\\end{theorem}\n")
    b = write(tmp_path / "b.tex", "\\begin{lemma}\\label{two}\nY\n\\end{lemma}\n")
    nodes = parse_legacy_blueprint([a, b])
    assert [n.label for n in nodes] == ["one", "two"]
    assert nodes[0].path == str(a) and nodes[1].path == str(b)


def test_parse_all_five_envs(tmp_path):
    body = "".join(
        f"\\begin{{{env}}}\\label{{l:{env}}}\nX\n\\end{{{env}}}\n"
        for env in ("theorem", "lemma", "definition", "corollary", "proposition")
    )
    tex = write(tmp_path / "t.tex", body)
    assert len(parse_legacy_blueprint([tex])) == 5


# ---------------------------------------------------------------------------
# planning


CORE_SRC = """\
import Architect

def zero := 1

theorem t_main (x : Slot) : Rel zero x := by
  apply zero
  sorry
"""

CORE_TEX = r"""
\begin{definition}\label{def:zero}\lean{zero}\leanok
Zero def.
\end{definition}

\begin{theorem}\label{thm:main}\lean{t_main}\uses{def:zero}
Main claim text.
\end{theorem}
\begin{proof}\uses{def:zero}
Proof prose.
\end{proof}
"""


def project(tmp_path, src_text=CORE_SRC, tex_text=CORE_TEX):
    src = write(tmp_path / "Core.lean", src_text)
    tex = write(tmp_path / "bp.tex", tex_text)
    unit = parse_module_text(
        src.read_text(encoding="utf-8"), Name.parse("Core"), path=str(src)
    )
    store = build_store([unit])
    warm_statuses(store)
    legacy = parse_legacy_blueprint([tex])
    return src, tex, store, legacy


def test_plan_counts(tmp_path):
    src, tex, store, legacy = project(tmp_path)
    plan = plan_conversion(legacy, store)
    assert len(plan.source_edits) == 2
    assert len(plan.latex_edits) == 2
    assert plan.skipped == []


def test_plan_drops_uses_when_lean_ok(tmp_path):
    # def:zero is leanOk, so its one would-be uses list would be dropped;
    # thm:main is not leanOk and keeps both lists
    src, tex, store, legacy = project(tmp_path)
    plan = plan_conversion(legacy, store)
    edits = {e.insert_at: e.text for e in plan.source_edits}
    main_edit = next(t for t in edits.values() if "thm:main" in t)
    assert '(uses := ["def:zero"])' in main_edit
    assert '(proofUses := ["def:zero"])' in main_edit


def test_plan_keep_uses_option(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        tex_text=r"""
        \begin{definition}\label{def:zero}\lean{zero}\leanok\uses{thm:main}
        Zero def.
        \end{definition}

        \begin{theorem}\label{thm:main}\lean{t_main}
        Main.
        \end{theorem}
        """,
    )
    dropped = plan_conversion(legacy, store)
    kept = plan_conversion(
        legacy, store, ConversionOptions(drop_uses_when_lean_ok=False)
    )
    text_d = next(t for t in (e.text for e in dropped.source_edits) if "def:zero" in t)
    text_k = next(t for t in (e.text for e in kept.source_edits) if "def:zero" in t)
    assert "uses" not in text_d
    assert '(uses := ["thm:main"])' in text_k


def test_plan_statement_docstring(tmp_path):
    src, tex, store, legacy = project(tmp_path)
    plan = plan_conversion(legacy, store)
    main_edit = next(t for t in (e.text for e in plan.source_edits) if "thm:main" in t)
    assert "(statement := /-- Main claim text. -/)" in main_edit
    assert "(proof := /-- Proof prose. -/)" in main_edit


def test_plan_inserts_before_keyword_line(tmp_path):
    src, tex, store, legacy = project(tmp_path)
    plan = plan_conversion(legacy, store)
    text = src.read_text(encoding="utf-8")
    for edit in plan.source_edits:
        assert edit.path == str(src)
        # insertion lands at the start of a line
        assert edit.insert_at == 0 or text[edit.insert_at - 1] == "\n"
        line = text[edit.insert_at :].split("\n", 1)[0]
        assert line.startswith(("def ", "theorem "))


def test_plan_latex_replacements(tmp_path):
    src, tex, store, legacy = project(tmp_path)
    plan = plan_conversion(legacy, store)
    repls = sorted(e.replacement for e in plan.latex_edits)
    assert repls == [
        "\\inputleannode{def:zero}",
        "\\inputleannode{thm:main}",
    ]


def test_plan_skips_unlean_node_by_default(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        tex_text="\\begin{theorem}\\label{prose:only}\nNo formal twin.\n\\end{theorem}\n",
    )
    plan = plan_conversion(legacy, store)
    assert plan.source_edits == [] and plan.latex_edits == []
    assert len(plan.skipped) == 1
    node, reason = plan.skipped[0]
    assert node.label == "prose:only"
    assert "skipped by default" in reason


def test_plan_all_nodes_still_skips_unlean_with_other_reason(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        tex_text="\\begin{theorem}\\label{prose:only}\nX\n\\end{theorem}\n",
    )
    plan = plan_conversion(legacy, store, ConversionOptions(only_lean_nodes=False))
    _, reason = plan.skipped[0]
    assert "attach" in reason


def test_plan_skips_unknown_names(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        tex_text="\\begin{theorem}\\label{t}\\lean{ghost_thm}\nX\n\\end{theorem}\n",
    )
    plan = plan_conversion(legacy, store)
    _, reason = plan.skipped[0]
    assert "no declaration or upstream entry for: ghost_thm" == reason


def test_plan_skips_unembeddable_text(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        tex_text="\\begin{theorem}\\label{t}\\lean{t_main}\nBad -/ text.\n\\end{theorem}\n",
    )
    plan = plan_conversion(legacy, store)
    _, reason = plan.skipped[0]
    assert "cannot be embedded" in reason
    assert plan.source_edits == []


def test_plan_double_claim_raises(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        tex_text=(
            "\\begin{theorem}\\label{one}\\lean{t_main}\nX\n\\end{theorem}\n"
            "\\begin{lemma}\\label{two}\\lean{t_main}\nY\n\\end{lemma}\n"
        ),
    )
    with pytest.raises(ConversionError, match="claimed by two legacy nodes"):
        plan_conversion(legacy, store)


def test_plan_explicit_label_omitted_when_defaultable(tmp_path):
    # unlabeled env with a single lean name: the attribute needs no label
    src, tex, store, legacy = project(
        tmp_path,
        tex_text="\\begin{theorem}\\lean{t_main}\nX\n\\end{theorem}\n",
    )
    plan = plan_conversion(legacy, store)
    text = plan.source_edits[0].text
    assert "@[blueprint" in text and '"' not in text.split("\n")[0]
    repl = plan.latex_edits[0].replacement
    assert repl == "\\inputleannode{t_main}"


def test_plan_inline_merge_into_existing_attr(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        src_text="import Architect\n\n@[simp]\ndef zero := 1\n",
        tex_text="\\begin{definition}\\label{d:z}\\lean{zero}\\leanok\nZ.\n\\end{definition}\n",
    )
    plan = plan_conversion(legacy, store)
    assert len(plan.source_edits) == 1
    edit = plan.source_edits[0]
    assert edit.text.startswith(", blueprint")
    # lands right before the closing bracket of @[simp]
    text = src.read_text(encoding="utf-8")
    assert text[edit.insert_at] == "]"


def test_plan_already_tagged_same_label_skips_source_edit(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        src_text='import Architect\n\n@[blueprint "d:z"]\ndef zero := 1\n',
        tex_text="\\begin{definition}\\label{d:z}\\lean{zero}\\leanok\nZ.\n\\end{definition}\n",
    )
    plan = plan_conversion(legacy, store)
    assert plan.source_edits == []
    assert len(plan.latex_edits) == 1


def test_plan_already_tagged_conflicting_label_raises(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        src_text='import Architect\n\n@[blueprint "other"]\ndef zero := 1\n',
        tex_text="\\begin{definition}\\label{d:z}\\lean{zero}\\leanok\nZ.\n\\end{definition}\n",
    )
    with pytest.raises(ConversionError, match="already carries"):
        plan_conversion(legacy, store)


def test_plan_shared_label_secondary_gets_bare_attribute(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        src_text=(
            "import Architect\n\n"
            "theorem half_a : x := by sorry\n\n"
            "theorem half_b : y := by sorry\n"
        ),
        tex_text=(
            "\\begin{theorem}\\label{thm:both}\\lean{half_a, half_b}\nX\n\\end{theorem}\n"
        ),
    )
    plan = plan_conversion(legacy, store)
    assert len(plan.source_edits) == 2
    texts = sorted(e.text for e in plan.source_edits)
    # one rich attribute, one bare label claim
    assert sum('"thm:both"' in t for t in texts) == 2
    assert any("statement" in t for t in texts)
    bare = [t for t in texts if "statement" not in t]
    assert len(bare) == 1


def test_plan_upstream_attribution_before_first_dependent(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        src_text=CORE_SRC,
        tex_text=(
            "\\begin{lemma}\\label{ml:fact}\\lean{Mathlib.A.b}\\mathlibok\nF.\n\\end{lemma}\n"
            "\\begin{theorem}\\label{thm:main}\\lean{t_main}\\uses{ml:fact}\nM.\n\\end{theorem}\n"
        ),
    )
    unit = parse_module_text(
        (tmp_path / "Core.lean").read_text(encoding="utf-8"),
        Name.parse("Core"),
        path=str(tmp_path / "Core.lean"),
    )
    store = build_store([unit], frozenset({Name.parse("Mathlib.A.b")}))
    warm_statuses(store)
    plan = plan_conversion(legacy, store)
    attr_cmd = next(
        e for e in plan.source_edits if e.text.startswith("attribute [blueprint")
    )
    assert '"ml:fact"' in attr_cmd.text
    assert "Mathlib.A.b" in attr_cmd.text
    # anchored at the dependent theorem, so applied text puts it before t_main
    text = (tmp_path / "Core.lean").read_text(encoding="utf-8")
    line = text[attr_cmd.insert_at :].split("\n", 1)[0]
    assert line.startswith("theorem t_main")


def test_plan_upstream_without_dependent_appends_to_root(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        src_text=CORE_SRC,
        tex_text="\\begin{lemma}\\label{ml:fact}\\lean{Mathlib.A.b}\\mathlibok\nF.\n\\end{lemma}\n",
    )
    unit = parse_module_text(
        (tmp_path / "Core.lean").read_text(encoding="utf-8"),
        Name.parse("Core"),
        path=str(tmp_path / "Core.lean"),
    )
    store = build_store([unit], frozenset({Name.parse("Mathlib.A.b")}))
    warm_statuses(store)
    plan = plan_conversion(legacy, store, root_path=str(tmp_path / "Core.lean"))
    edit = plan.source_edits[0]
    assert edit.insert_at == len((tmp_path / "Core.lean").read_text(encoding="utf-8"))
    assert edit.text.startswith("attribute [blueprint")


# ---------------------------------------------------------------------------
# applying


def test_apply_end_to_end(tmp_path):
    src, tex, store, legacy = project(tmp_path)
    plan = plan_conversion(legacy, store)
    summary = apply_plan(plan)
    assert str(summary) == "source insertions: 2, latex replacements: 2, skipped nodes: 0"

    new_src = src.read_text(encoding="utf-8")
    assert '@[blueprint "def:zero"' in new_src
    assert '@[blueprint "thm:main"' in new_src
    new_tex = tex.read_text(encoding="utf-8")
    assert "\\inputleannode{def:zero}" in new_tex
    assert "\\inputleannode{thm:main}" in new_tex
    assert "\\begin{theorem}" not in new_tex
    # surrounding prose survives
    assert new_tex.startswith("\n")

    # converted source re-parses and carries the expected metadata
    unit = parse_module_text(new_src, Name.parse("Core"), path=str(src))
    assert unit.warnings == ()
    store2 = build_store([unit])
    warm_statuses(store2)
    assert set(store2.labels()) == {"def:zero", "thm:main"}
    node = store2.by_name[Name.parse("t_main")]
    assert node.statement.text == "Main claim text."
    assert node.proof.text == "Proof prose."


def test_apply_preserves_declaration_bodies(tmp_path):
    src, tex, store, legacy = project(tmp_path)
    before = src.read_text(encoding="utf-8")
    apply_plan(plan_conversion(legacy, store))
    after = src.read_text(encoding="utf-8")
    # insert-only edits: every original line is still present verbatim
    for line in before.splitlines():
        assert line in after.splitlines()


def test_apply_dry_run_writes_nothing(tmp_path):
    src, tex, store, legacy = project(tmp_path)
    before_src = src.read_bytes()
    before_tex = tex.read_bytes()
    plan = plan_conversion(legacy, store)
    summary = apply_plan(plan, dry_run=True)
    assert src.read_bytes() == before_src
    assert tex.read_bytes() == before_tex
    assert "source insertions: 2" in str(summary)


def test_apply_stale_source_aborts_without_edits(tmp_path):
    src, tex, store, legacy = project(tmp_path)
    plan = plan_conversion(legacy, store)
    src.write_text(src.read_text(encoding="utf-8") + "\n-- drift\n", encoding="utf-8")
    drifted = src.read_bytes()
    tex_before = tex.read_bytes()
    with pytest.raises(StaleSourceError, match="changed since the conversion was planned"):
        apply_plan(plan)
    assert src.read_bytes() == drifted
    assert tex.read_bytes() == tex_before


def test_apply_empty_plan(tmp_path):
    src, tex, store, legacy = project(
        tmp_path, tex_text="No environments here.\n"
    )
    plan = plan_conversion(legacy, store)
    summary = apply_plan(plan)
    assert str(summary) == "source insertions: 0, latex replacements: 0, skipped nodes: 0"


def test_apply_skipped_nodes_left_in_place(tmp_path):
    src, tex, store, legacy = project(
        tmp_path,
        tex_text=(
            "\\begin{theorem}\\label{keep:me}\nProse only.\n\\end{theorem}\n"
            "\\begin{definition}\\label{def:zero}\\lean{zero}\\leanok\nZ.\n\\end{definition}\n"
        ),
    )
    plan = plan_conversion(legacy, store)
    apply_plan(plan)
    new_tex = tex.read_text(encoding="utf-8")
    assert "\\begin{theorem}\\label{keep:me}" in new_tex
    assert "\\inputleannode{def:zero}" in new_tex
