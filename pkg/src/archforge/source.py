"""Front end for the annotated proof-source dialect.

Tokenizes source text, parses top-level commands into module units, and
extracts blueprint attributes, docstrings, and sorry markers.  Parsing is
purely lexical: no type checking or elaboration happens here.
"""

from __future__ import annotations

import hashlib
import textwrap
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError
from .names import LabelRef, Name, SourceSpan

# ---------------------------------------------------------------------------
# Keyword tables

DECL_KEYWORDS = frozenset(
    {"def", "abbrev", "theorem", "lemma", "inductive", "structure", "instance", "axiom"}
)

# Commands that may only begin at the start of a line at top level.
COMMAND_KEYWORDS = frozenset(
    {"import", "namespace", "end", "open", "attribute", "blueprint_comment"}
) | DECL_KEYWORDS

# Term/tactic-level words that must never be reported as identifiers.
_TERM_KEYWORDS = frozenset(
    {
        "by", "match", "with", "where", "fun", "do", "let", "in", "have",
        "show", "from", "if", "then", "else", "calc", "at", "exact",
        "intro", "intros", "rfl", "rw", "simp", "induction", "cases",
        "constructor", "apply", "trivial", "deriving", "mutual", "variable",
        "section", "Type", "Prop", "Sort", "sorry", "sorry_using",
    }
)

RESERVED_WORDS = COMMAND_KEYWORDS | _TERM_KEYWORDS

ATTRIBUTE_KEYS = (
    "statement", "hasProof", "proof", "uses", "proofUses", "excludes",
    "title", "notReady", "discussion", "latexEnv",
)

# ---------------------------------------------------------------------------
# Tokens


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "string" | "number" | "docstring" | "symbol"
    text: str
    value: str
    start: int
    end: int
    byte_start: int
    byte_end: int
    line: int
    col: int
    first_on_line: bool

    def span(self) -> SourceSpan:
        return SourceSpan(self.start, self.end, self.byte_start, self.byte_end, self.line)


def _is_ident_start(ch: str) -> bool:
    if ch == "_":
        return True
    cat = unicodedata.category(ch)
    return cat.startswith("L")


def _is_ident_cont(ch: str) -> bool:
    if ch in "_'!?":
        return True
    cat = unicodedata.category(ch)
    return cat.startswith("L") or cat in ("Nd", "No", "Mn")


class _Scanner:
    """Character cursor with line/column and byte-offset bookkeeping."""

    def __init__(self, text: str, path: str | None):
        self.text = text
        self.path = path
        self.pos = 0
        self.line = 1
        self.col = 0
        # byte offset of each char offset; one extra entry for EOF
        offsets = [0] * (len(text) + 1)
        total = 0
        for i, ch in enumerate(text):
            offsets[i] = total
            total += len(ch.encode("utf-8"))
        offsets[len(text)] = total
        self.byte_of = offsets

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self, ahead: int = 0) -> str:
        i = self.pos + ahead
        return self.text[i] if i < len(self.text) else ""

    def startswith(self, s: str) -> bool:
        return self.text.startswith(s, self.pos)

    def advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos >= len(self.text):
                return
            if self.text[self.pos] == "\n":
                self.line += 1
                self.col = 0
            else:
                self.col += 1
            self.pos += 1

    def error(self, message: str, line: int | None = None) -> ParseError:
        return ParseError(message, path=self.path, line=line if line is not None else self.line)


def tokenize(text: str, *, path: str | None = None, lenient: bool = False) -> list[Token]:
    """Split source text into tokens, dropping comments.

    Docstrings survive as tokens because blueprint extraction consumes them.
    With ``lenient=True`` unterminated constructs swallow the rest of the
    input instead of raising.
    """

    sc = _Scanner(text, path)
    tokens: list[Token] = []
    line_of_last_token = 0

    def emit(kind: str, start: int, start_line: int, start_col: int, value: str | None = None) -> None:
        nonlocal line_of_last_token
        raw = text[start : sc.pos]
        tokens.append(
            Token(
                kind=kind,
                text=raw,
                value=raw if value is None else value,
                start=start,
                end=sc.pos,
                byte_start=sc.byte_of[start],
                byte_end=sc.byte_of[sc.pos],
                line=start_line,
                col=start_col,
                first_on_line=start_line != line_of_last_token,
            )
        )
        line_of_last_token = start_line

    while not sc.eof():
        ch = sc.peek()
        if ch in " \t\r\n":
            sc.advance()
            continue

        start, start_line, start_col = sc.pos, sc.line, sc.col

        if sc.startswith("--"):
            while not sc.eof() and sc.peek() != "\n":
                sc.advance()
            continue

        if sc.startswith("/--") and not sc.startswith("/--/"):
            sc.advance(3)
            body_start = sc.pos
            depth = 1
            while depth:
                if sc.eof():
                    if lenient:
                        break
                    raise sc.error("unterminated docstring", start_line)
                if sc.startswith("/-"):
                    depth += 1
                    sc.advance(2)
                elif sc.startswith("-/"):
                    depth -= 1
                    if depth:
                        sc.advance(2)
                else:
                    sc.advance()
            body = text[body_start : sc.pos]
            if not sc.eof():
                sc.advance(2)
            emit("docstring", start, start_line, start_col, value=_clean_docstring(body))
            continue

        if sc.startswith("/-"):
            sc.advance(2)
            depth = 1
            while depth:
                if sc.eof():
                    if lenient:
                        break
                    raise sc.error("unterminated block comment", start_line)
                if sc.startswith("/-"):
                    depth += 1
                    sc.advance(2)
                elif sc.startswith("-/"):
                    depth -= 1
                    sc.advance(2)
                else:
                    sc.advance()
            continue

        if ch == '"':
            sc.advance()
            buf: list[str] = []
            while True:
                if sc.eof() or sc.peek() == "\n":
                    if lenient:
                        break
                    raise sc.error("unterminated string literal", start_line)
                c = sc.peek()
                if c == '"':
                    sc.advance()
                    break
                if c == "\\":
                    sc.advance()
                    esc = sc.peek()
                    mapped = {"n": "\n", "t": "\t", '"': '"', "\\": "\\", "'": "'"}.get(esc)
                    if mapped is None:
                        if lenient:
                            mapped = esc
                        else:
                            raise sc.error(f"unsupported string escape '\\{esc}'", sc.line)
                    buf.append(mapped)
                    sc.advance()
                else:
                    buf.append(c)
                    sc.advance()
            emit("string", start, start_line, start_col, value="".join(buf))
            continue

        if _is_ident_start(ch):
            sc.advance()
            while not sc.eof() and _is_ident_cont(sc.peek()):
                sc.advance()
            # dotted names stay one token: `MyNat.add`, `b.zero_add`
            while sc.peek() == "." and sc.peek(1) and _is_ident_start(sc.peek(1)):
                sc.advance()
                sc.advance()
                while not sc.eof() and _is_ident_cont(sc.peek()):
                    sc.advance()
            emit("ident", start, start_line, start_col)
            continue

        if ch.isdigit():
            sc.advance()
            while not sc.eof() and sc.peek().isdigit():
                sc.advance()
            emit("number", start, start_line, start_col)
            continue

        if sc.startswith(":="):
            sc.advance(2)
            emit("symbol", start, start_line, start_col)
            continue

        sc.advance()
        emit("symbol", start, start_line, start_col)

    return tokens


def _clean_docstring(body: str) -> str:
    """Normalize a docstring body: strip the common indent and outer blanks."""

    body = body.replace("\r\n", "\n")
    lines = body.split("\n")
    if len(lines) == 1:
        return lines[0].strip()
    first, rest = lines[0], lines[1:]
    dedented = textwrap.dedent("\n".join(rest)).split("\n")
    out = [first.strip()] + [ln.rstrip() for ln in dedented]
    while out and not out[0]:
        out.pop(0)
    while out and not out[-1]:
        out.pop()
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Parsed structures


@dataclass(frozen=True)
class AttributeSpec:
    """Everything a blueprint attribute can carry, fully defaulted to None."""

    label: str | None = None
    statement: str | None = None
    has_proof: bool | None = None
    proof: str | None = None
    uses: tuple[Name | LabelRef, ...] = ()
    proof_uses: tuple[Name | LabelRef, ...] = ()
    excludes: tuple[Name | LabelRef, ...] = ()
    title: str | None = None
    not_ready: bool = False
    discussion: int | None = None
    latex_env: str | None = None


@dataclass(frozen=True)
class SorryMarker:
    """A `sorry` or `sorry_using [...]` occurrence inside a proof body."""

    using: tuple[Name | LabelRef, ...]
    span: SourceSpan


@dataclass(frozen=True)
class Declaration:
    name: Name
    kind: str
    docstring: str | None
    attribute: AttributeSpec | None
    other_attributes: tuple[str, ...]
    signature_text: str
    body_text: str | None
    tactic_docstrings: tuple[str, ...]
    sorry_markers: tuple[SorryMarker, ...]
    namespace_context: tuple[str, ...]
    opens: tuple[Name, ...]
    span: SourceSpan
    keyword_line_byte: int  # byte offset where an attribute block may be inserted
    attr_close_byte: int | None  # byte offset of `]` closing an existing `@[...]`


@dataclass(frozen=True)
class RawComment:
    """Free-form LaTeX passed through verbatim via ``blueprint_comment``."""

    text: str
    span: SourceSpan
    namespace_context: tuple[str, ...] = ()


@dataclass(frozen=True)
class UpstreamAttribution:
    """An ``attribute [blueprint ...] Name`` command tagging a foreign constant."""

    target: Name
    attribute: AttributeSpec
    span: SourceSpan
    namespace_context: tuple[str, ...] = ()
    opens: tuple[Name, ...] = ()


@dataclass(frozen=True)
class OpenCommand:
    """Names opened at some point of the file; anchored before item `index`."""

    names: tuple[Name, ...]
    index: int
    namespace_context: tuple[str, ...]


@dataclass(frozen=True)
class ParseWarning:
    message: str
    path: str | None
    line: int

    def __str__(self) -> str:
        where = f"{self.path}:{self.line}" if self.path else f"line {self.line}"
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class ModuleUnit:
    name: Name
    imports: tuple[Name, ...]
    items: tuple[Declaration | RawComment | UpstreamAttribution, ...]
    source_hash: str
    warnings: tuple[ParseWarning, ...] = ()
    open_commands: tuple[OpenCommand, ...] = ()
    source_text: str = ""
    path: str | None = None


def source_hash(data: bytes) -> str:
    """64-bit content hash used for incremental builds."""

    return hashlib.blake2b(data, digest_size=8).hexdigest()


# ---------------------------------------------------------------------------
# Attribute configuration parsing


def parse_attribute_config(text: str, *, path: str | None = None, line: int | None = None) -> AttributeSpec:
    """Parse the text after ``blueprint`` inside an attribute list."""

    tokens = tokenize(text, path=path)
    return _parse_attribute_tokens(tokens, path=path, line=line)


def _parse_attribute_tokens(
    tokens: list[Token], *, path: str | None = None, line: int | None = None
) -> AttributeSpec:
    pos = 0

    def err(message: str, tok: Token | None = None) -> ParseError:
        at = tok.line if tok is not None else line
        return ParseError(message, path=path, line=at)

    def peek() -> Token | None:
        return tokens[pos] if pos < len(tokens) else None

    def take() -> Token:
        nonlocal pos
        tok = peek()
        if tok is None:
            raise err("unexpected end of blueprint attribute")
        pos += 1
        return tok

    def expect_symbol(sym: str) -> Token:
        tok = take()
        if tok.kind != "symbol" or tok.text != sym:
            raise err(f"expected '{sym}' in blueprint attribute, got {tok.text!r}", tok)
        return tok

    fields: dict[str, object] = {}

    tok = peek()
    if tok is not None and tok.kind == "string":
        take()
        if not tok.value:
            raise err("blueprint label must be nonempty", tok)
        fields["label"] = tok.value

    def parse_dep_list() -> tuple[Name | LabelRef, ...]:
        expect_symbol("[")
        out: list[Name | LabelRef] = []
        while True:
            tok = peek()
            if tok is None:
                raise err("unterminated dependency list")
            if tok.kind == "symbol" and tok.text == "]":
                take()
                break
            if tok.kind == "ident":
                take()
                out.append(Name.parse(tok.text))
            elif tok.kind == "string":
                take()
                if not tok.value:
                    raise err("empty label in dependency list", tok)
                out.append(LabelRef(tok.value))
            else:
                raise err(f"expected name or label string, got {tok.text!r}", tok)
            tok = peek()
            if tok is not None and tok.kind == "symbol" and tok.text == ",":
                take()
        return tuple(out)

    seen: set[str] = set()
    while (tok := peek()) is not None:
        if tok.kind != "symbol" or tok.text != "(":
            raise err(f"unexpected token {tok.text!r} in blueprint attribute", tok)
        take()
        key_tok = take()
        if key_tok.kind != "ident":
            raise err(f"expected option name, got {key_tok.text!r}", key_tok)
        key = key_tok.text
        if key not in ATTRIBUTE_KEYS:
            raise err(f"unknown blueprint option '{key}'", key_tok)
        if key in seen:
            raise err(f"duplicate blueprint option '{key}'", key_tok)
        seen.add(key)
        expect_symbol(":=")

        if key in ("statement", "proof", "title"):
            val = take()
            if val.kind != "docstring":
                raise err(f"option '{key}' expects a /-- ... -/ docstring", val)
            fields[key] = val.value
        elif key in ("hasProof", "notReady"):
            val = take()
            if val.kind != "ident" or val.text not in ("true", "false"):
                raise err(f"option '{key}' expects true or false", val)
            fields[key] = val.text == "true"
        elif key in ("uses", "proofUses", "excludes"):
            fields[key] = parse_dep_list()
        elif key == "discussion":
            val = take()
            if val.kind != "number":
                raise err("option 'discussion' expects an issue number", val)
            num = int(val.text)
            if num < 1:
                raise err("option 'discussion' expects a number >= 1", val)
            fields[key] = num
        elif key == "latexEnv":
            val = take()
            if val.kind != "string" or not val.value:
                raise err("option 'latexEnv' expects a nonempty string", val)
            fields[key] = val.value
        expect_symbol(")")

    return AttributeSpec(
        label=fields.get("label"),  # type: ignore[arg-type]
        statement=fields.get("statement"),  # type: ignore[arg-type]
        has_proof=fields.get("hasProof"),  # type: ignore[arg-type]
        proof=fields.get("proof"),  # type: ignore[arg-type]
        uses=fields.get("uses", ()),  # type: ignore[arg-type]
        proof_uses=fields.get("proofUses", ()),  # type: ignore[arg-type]
        excludes=fields.get("excludes", ()),  # type: ignore[arg-type]
        title=fields.get("title"),  # type: ignore[arg-type]
        not_ready=fields.get("notReady", False),  # type: ignore[arg-type]
        discussion=fields.get("discussion"),  # type: ignore[arg-type]
        latex_env=fields.get("latexEnv"),  # type: ignore[arg-type]
    )


# ---------------------------------------------------------------------------
# Module parsing


@dataclass
class _AttrItem:
    name: str
    config_tokens: list[Token]
    start_tok: Token


class _ModuleParser:
    def __init__(self, text: str, module_name: Name, path: str | None):
        self.text = text
        self.module_name = module_name
        self.path = path
        self.tokens = tokenize(text, path=path)
        self.pos = 0
        self.namespaces: list[tuple[str, ...]] = []
        self.opens: list[tuple[int, Name]] = []  # (namespace depth, opened name)
        self.imports: list[Name] = []
        self.items: list[Declaration | RawComment | UpstreamAttribution] = []
        self.open_commands: list[OpenCommand] = []
        self.warnings: list[ParseWarning] = []
        line_starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                line_starts.append(i + 1)
        self._line_starts = line_starts
        self._byte_of = _Scanner(text, path).byte_of

    # -- helpers

    def peek(self, ahead: int = 0) -> Token | None:
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of file", path=self.path)
        self.pos += 1
        return tok

    def warn(self, message: str, line: int) -> None:
        self.warnings.append(ParseWarning(message, self.path, line))

    def context(self) -> tuple[str, ...]:
        out: list[str] = []
        for entry in self.namespaces:
            out.extend(entry)
        return tuple(out)

    def visible_opens(self) -> tuple[Name, ...]:
        return tuple(name for _, name in self.opens)

    def line_start_byte(self, tok: Token) -> int:
        return self._byte_of[self._line_starts[tok.line - 1]]

    def span_between(self, first: Token, last: Token) -> SourceSpan:
        return SourceSpan(first.start, last.end, first.byte_start, last.byte_end, first.line)

    # -- top-level loop

    def parse(self) -> ModuleUnit:
        while (tok := self.peek()) is not None:
            if tok.kind == "docstring":
                self.parse_docstring_block()
                continue
            if tok.kind == "symbol" and tok.text == "@":
                nxt = self.peek(1)
                if nxt is not None and nxt.kind == "symbol" and nxt.text == "[":
                    self.parse_attributed_block()
                    continue
                self.skip_unrecognized(tok)
                continue
            if tok.kind != "ident":
                self.skip_unrecognized(tok)
                continue
            word = tok.text
            if word == "import":
                self.parse_import()
            elif word == "namespace":
                self.parse_namespace()
            elif word == "end":
                self.parse_end()
            elif word == "open":
                self.parse_open()
            elif word == "attribute":
                self.parse_attribute_command()
            elif word == "blueprint_comment":
                self.parse_blueprint_comment()
            elif word in DECL_KEYWORDS:
                self.parse_declaration([], None, tok)
            else:
                self.skip_unrecognized(tok)

        if self.namespaces:
            open_names = ".".join(".".join(e) for e in self.namespaces)
            self.warn(f"namespace '{open_names}' not closed at end of file", self.tokens[-1].line)

        return ModuleUnit(
            name=self.module_name,
            imports=tuple(self.imports),
            items=tuple(self.items),
            source_hash=source_hash(self.text.encode("utf-8")),
            warnings=tuple(self.warnings),
            open_commands=tuple(self.open_commands),
            source_text=self.text,
            path=self.path,
        )

    def skip_unrecognized(self, tok: Token) -> None:
        self.warn(f"unrecognized top-level command starting at {tok.text!r}", tok.line)
        line = tok.line
        while (tok := self.peek()) is not None:
            if tok.col == 0 and tok.line != line and self.is_block_start(tok):
                break
            self.take()

    def is_block_start(self, tok: Token) -> bool:
        """Whether the token at self.peek() can begin a new top-level block."""

        if tok.kind == "docstring":
            return True
        if tok.kind == "ident" and tok.text in COMMAND_KEYWORDS:
            return True
        if tok.kind == "symbol" and tok.text == "@":
            nxt = self.peek(1)
            return nxt is not None and nxt.kind == "symbol" and nxt.text == "["
        return False

    # -- commands

    def parse_import(self) -> None:
        kw = self.take()
        tok = self.peek()
        if tok is None or tok.kind != "ident" or tok.line != kw.line:
            self.warn("import without module name", kw.line)
            return
        self.take()
        self.imports.append(Name.parse(tok.text))

    def parse_namespace(self) -> None:
        kw = self.take()
        tok = self.peek()
        if tok is None or tok.kind != "ident":
            self.warn("namespace without name", kw.line)
            return
        self.take()
        self.namespaces.append(tuple(tok.text.split(".")))

    def parse_end(self) -> None:
        kw = self.take()
        tok = self.peek()
        name = None
        if tok is not None and tok.kind == "ident" and tok.line == kw.line:
            self.take()
            name = tuple(tok.text.split("."))
        if not self.namespaces:
            self.warn("'end' without open namespace", kw.line)
            return
        top = self.namespaces[-1]
        if name is not None and name != top:
            self.warn(f"'end {'.'.join(name)}' does not match namespace '{'.'.join(top)}'", kw.line)
        self.namespaces.pop()
        depth = len(self.namespaces)
        self.opens = [(d, n) for d, n in self.opens if d <= depth]

    def parse_open(self) -> None:
        kw = self.take()
        names: list[Name] = []
        while (tok := self.peek()) is not None and tok.kind == "ident" and tok.line == kw.line:
            self.take()
            names.append(Name.parse(tok.text))
        if not names:
            self.warn("'open' without names", kw.line)
            return
        depth = len(self.namespaces)
        for n in names:
            self.opens.append((depth, n))
        self.open_commands.append(
            OpenCommand(names=tuple(names), index=len(self.items), namespace_context=self.context())
        )

    def parse_blueprint_comment(self) -> None:
        kw = self.take()
        tok = self.peek()
        if tok is None or tok.kind != "docstring":
            self.warn("blueprint_comment must be followed by a docstring", kw.line)
            return
        self.take()
        self.items.append(
            RawComment(text=tok.value, span=self.span_between(kw, tok), namespace_context=self.context())
        )

    def parse_attribute_command(self) -> None:
        kw = self.take()
        tok = self.peek()
        if tok is None or tok.kind != "symbol" or tok.text != "[":
            self.warn("'attribute' without '[...]' list", kw.line)
            return
        attrs, _close = self.parse_attr_list()
        tok = self.peek()
        if tok is None or tok.kind != "ident":
            self.warn("'attribute [...]' without target name", kw.line)
            return
        self.take()
        blueprint = [a for a in attrs if a.name == "blueprint"]
        if not blueprint:
            self.warn("attribute command carries no blueprint attribute; ignored", kw.line)
            return
        if len(blueprint) > 1:
            self.warn("duplicate blueprint attribute; keeping the first", kw.line)
        try:
            spec = _parse_attribute_tokens(
                blueprint[0].config_tokens, path=self.path, line=blueprint[0].start_tok.line
            )
        except ParseError as exc:
            self.warn(f"invalid blueprint attribute; command ignored: {exc.message}", kw.line)
            return
        self.items.append(
            UpstreamAttribution(
                target=Name.parse(tok.text),
                attribute=spec,
                span=self.span_between(kw, tok),
                namespace_context=self.context(),
                opens=self.visible_opens(),
            )
        )

    # -- attribute lists and declarations

    def parse_attr_list(self) -> tuple[list[_AttrItem], Token]:
        open_tok = self.take()  # '['
        items: list[_AttrItem] = []
        depth = 0
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError("unterminated attribute list", path=self.path, line=open_tok.line)
            if tok.kind == "symbol" and tok.text == "]" and depth == 0:
                close = self.take()
                return items, close
            if tok.kind == "symbol" and tok.text == "," and depth == 0:
                self.take()
                continue
            if tok.kind != "ident":
                self.warn(f"unexpected token {tok.text!r} in attribute list; skipped", tok.line)
                self.take()
                continue
            name_tok = self.take()
            config: list[Token] = []
            while (tok := self.peek()) is not None:
                if tok.kind == "symbol":
                    if tok.text in ("[", "("):
                        depth += 1
                    elif tok.text in ("]", ")"):
                        if depth == 0:
                            break
                        depth -= 1
                    elif tok.text == "," and depth == 0:
                        break
                config.append(self.take())
            items.append(_AttrItem(name=name_tok.text, config_tokens=config, start_tok=name_tok))

    def parse_docstring_block(self) -> None:
        doc = self.take()
        tok = self.peek()
        if tok is not None and tok.kind == "symbol" and tok.text == "@":
            nxt = self.peek(1)
            if nxt is not None and nxt.kind == "symbol" and nxt.text == "[":
                self.parse_attributed_block(doc)
                return
        if tok is not None and tok.kind == "ident" and tok.text in DECL_KEYWORDS:
            self.parse_declaration([], doc, doc)
            return
        self.warn("docstring is not attached to a declaration; ignored", doc.line)

    def parse_attributed_block(self, doc: Token | None = None) -> None:
        at = self.take()  # '@'
        first = doc if doc is not None else at
        attrs, close = self.parse_attr_list()
        tok = self.peek()
        if doc is None and tok is not None and tok.kind == "docstring":
            doc = self.take()
            tok = self.peek()
        if tok is None or tok.kind != "ident" or tok.text not in DECL_KEYWORDS:
            self.warn("attribute block is not attached to a declaration; ignored", at.line)
            return
        self.parse_declaration(attrs, doc, first, attr_close=close)

    def parse_declaration(
        self,
        attrs: list[_AttrItem],
        doc: Token | None,
        first_tok: Token,
        attr_close: Token | None = None,
    ) -> None:
        kw = self.take()
        name_tok = self.peek()
        if name_tok is None or name_tok.kind != "ident":
            self.warn(f"'{kw.text}' without a name; skipped", kw.line)
            return
        self.take()

        blueprint = [a for a in attrs if a.name == "blueprint"]
        if len(blueprint) > 1:
            self.warn("duplicate blueprint attribute; keeping the first", kw.line)
        spec = None
        if blueprint:
            try:
                spec = _parse_attribute_tokens(
                    blueprint[0].config_tokens, path=self.path, line=blueprint[0].start_tok.line
                )
            except ParseError as exc:
                self.warn(
                    f"invalid blueprint attribute on '{name_tok.text}'; ignored: {exc.message}",
                    kw.line,
                )
                spec = None
        others = tuple(a.name for a in attrs if a.name != "blueprint")

        takes_body = kw.text not in ("inductive", "structure")
        sig_tokens: list[Token] = []
        body_tokens: list[Token] = []
        in_body = False
        depth = 0
        last = name_tok
        unbalanced_warned = False
        while (tok := self.peek()) is not None:
            if tok.col == 0 and self.is_block_start(tok):
                if depth != 0 and not unbalanced_warned:
                    self.warn(
                        f"unbalanced brackets in declaration '{name_tok.text}'", kw.line
                    )
                break
            if tok.kind == "symbol":
                if tok.text in ("(", "[", "{"):
                    depth += 1
                elif tok.text in (")", "]", "}"):
                    depth -= 1
                elif tok.text == ":=" and depth == 0 and not in_body and takes_body:
                    self.take()
                    in_body = True
                    last = tok
                    continue
            self.take()
            (body_tokens if in_body else sig_tokens).append(tok)
            last = tok

        signature_text = self.slice_tokens(sig_tokens)
        body_text = self.slice_tokens(body_tokens) if in_body else None

        tactic_docs: list[str] = []
        markers: list[SorryMarker] = []
        saw_by = False
        i = 0
        while i < len(body_tokens):
            tok = body_tokens[i]
            if tok.kind == "ident" and tok.text == "by":
                saw_by = True
            elif tok.kind == "docstring":
                if saw_by:
                    tactic_docs.append(tok.value)
                else:
                    self.warn(
                        f"docstring outside a tactic block in '{name_tok.text}'; ignored", tok.line
                    )
            elif tok.kind == "ident" and tok.text == "sorry":
                markers.append(SorryMarker(using=(), span=tok.span()))
            elif tok.kind == "ident" and tok.text == "sorry_using":
                try:
                    using, i = self.parse_sorry_using(body_tokens, i)
                except ParseError as exc:
                    self.warn(f"malformed sorry_using treated as sorry: {exc.message}", tok.line)
                    markers.append(SorryMarker(using=(), span=tok.span()))
                else:
                    end_tok = body_tokens[i]
                    markers.append(
                        SorryMarker(using=using, span=self.span_between(tok, end_tok))
                    )
            i += 1

        full_name = Name(self.context() + tuple(name_tok.text.split(".")))
        self.items.append(
            Declaration(
                name=full_name,
                kind=kw.text,
                docstring=doc.value if doc is not None else None,
                attribute=spec,
                other_attributes=others,
                signature_text=signature_text,
                body_text=body_text,
                tactic_docstrings=tuple(tactic_docs),
                sorry_markers=tuple(markers),
                namespace_context=self.context(),
                opens=self.visible_opens(),
                span=self.span_between(first_tok, last),
                keyword_line_byte=self.line_start_byte(kw),
                attr_close_byte=attr_close.byte_start if attr_close is not None else None,
            )
        )

    def parse_sorry_using(
        self, toks: list[Token], i: int
    ) -> tuple[tuple[Name | LabelRef, ...], int]:
        kw = toks[i]
        j = i + 1
        if j >= len(toks) or toks[j].text != "[":
            raise ParseError("sorry_using expects '[...]'", path=self.path, line=kw.line)
        j += 1
        out: list[Name | LabelRef] = []
        while True:
            if j >= len(toks):
                raise ParseError("unterminated sorry_using list", path=self.path, line=kw.line)
            tok = toks[j]
            if tok.kind == "symbol" and tok.text == "]":
                return tuple(out), j
            if tok.kind == "ident":
                out.append(Name.parse(tok.text))
            elif tok.kind == "string":
                if not tok.value:
                    raise ParseError("empty label in sorry_using", path=self.path, line=tok.line)
                out.append(LabelRef(tok.value))
            elif tok.kind == "symbol" and tok.text == ",":
                pass
            else:
                raise ParseError(
                    f"expected name or label in sorry_using, got {tok.text!r}",
                    path=self.path,
                    line=tok.line,
                )
            j += 1

    def slice_tokens(self, toks: list[Token]) -> str:
        if not toks:
            return ""
        return self.text[toks[0].start : toks[-1].end].strip()


def parse_module_text(text: str, module_name: Name, *, path: str | None = None) -> ModuleUnit:
    """Parse a module from an in-memory string."""

    return _ModuleParser(text, module_name, path).parse()


def parse_module(path: str | Path, module_name: Name) -> ModuleUnit:
    """Parse a module from disk.  Decoding errors surface as ParseError."""

    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}", path=str(p)) from exc
    return parse_module_text(text, module_name, path=str(p))


# ---------------------------------------------------------------------------
# Identifier scanning


def scan_identifiers(text: str) -> list[str]:
    """All candidate constant references in a code fragment, in source order.

    Strings, comments, docstrings, numbers, and reserved words never appear.
    Dotted names are kept intact.  Never raises; garbage yields fewer tokens.
    """

    out: list[str] = []
    for tok in tokenize(text, lenient=True):
        if tok.kind != "ident":
            continue
        if tok.text in RESERVED_WORDS:
            continue
        if tok.text in ("true", "false"):
            continue
        out.append(tok.text)
    return out


# ---------------------------------------------------------------------------
# Module printing (canonical source reconstruction)


def module_source(unit: ModuleUnit) -> str:
    """Reconstruct compilable source for a parsed module.

    Items are emitted verbatim from their original spans, wrapped in the
    namespace and open commands they were parsed under.  Reparsing the result
    yields an equivalent unit (spans and hashes aside).
    """

    text = unit.source_text
    lines: list[str] = [f"import {imp}" for imp in unit.imports]

    ctx: tuple[str, ...] = ()

    def shift(target: tuple[str, ...]) -> None:
        nonlocal ctx
        common = 0
        while common < len(ctx) and common < len(target) and ctx[common] == target[common]:
            common += 1
        for seg in reversed(ctx[common:]):
            lines.append(f"end {seg}")
            lines.append("")
        for seg in target[common:]:
            lines.append(f"namespace {seg}")
            lines.append("")
        ctx = target

    events: list[tuple[int, int, object]] = []
    for oc in unit.open_commands:
        events.append((oc.index, 0, oc))
    for idx, item in enumerate(unit.items):
        events.append((idx, 1, item))
    events.sort(key=lambda e: (e[0], e[1]))

    if lines:
        lines.append("")
    for _, _, obj in events:
        if isinstance(obj, OpenCommand):
            shift(obj.namespace_context)
            lines.append("open " + " ".join(str(n) for n in obj.names))
            lines.append("")
        else:
            item = obj  # Declaration | RawComment | UpstreamAttribution
            shift(item.namespace_context)  # type: ignore[union-attr]
            span = item.span  # type: ignore[union-attr]
            lines.append(text[span.start : span.end])
            lines.append("")
    shift(())
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines) + "\n" if lines else ""


def units_equivalent(a: ModuleUnit, b: ModuleUnit) -> bool:
    """Structural equality that ignores spans, hashes, and file paths."""

    if a.name != b.name or a.imports != b.imports:
        return False
    if len(a.items) != len(b.items):
        return False
    for x, y in zip(a.items, b.items):
        if type(x) is not type(y):
            return False
        if isinstance(x, RawComment):
            if x.text != y.text:
                return False
        elif isinstance(x, UpstreamAttribution):
            if (x.target, x.attribute, x.namespace_context) != (
                y.target,
                y.attribute,
                y.namespace_context,
            ):
                return False
        else:
            assert isinstance(x, Declaration) and isinstance(y, Declaration)
            key = lambda d: (
                d.name,
                d.kind,
                d.docstring,
                d.attribute,
                d.other_attributes,
                d.signature_text,
                d.body_text,
                d.tactic_docstrings,
                tuple(m.using for m in d.sorry_markers),
                d.namespace_context,
                d.opens,
            )
            if key(x) != key(y):
                return False
    return True
