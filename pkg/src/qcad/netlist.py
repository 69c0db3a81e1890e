"""Line-oriented netlist text format.

::

    # comment
    qubit a
    qubit anc zero            # optional kind: data | zero | tanc
    module maj (x, y, z) {
        cnot z,y
        cnot z,x
        toffoli x,y,z
    }
    inst maj (a, b, anc)
    h a

Gate mnemonics are lowercase: x z h s t tdag cnot toffoli prepz measure correct.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .circuit import (
    Circuit,
    CircuitError,
    GateStmt,
    InstStmt,
    ModuleDef,
    Qubit,
    QubitKind,
    build_hierarchical,
    flatten,
    gate_mnemonics,
    parse_kind,
)

HEADER = "# qcad netlist v1"

_KIND_WORDS = {"data": QubitKind.DATA, "zero": QubitKind.ZERO_ANCILLA, "tanc": QubitKind.T_ANCILLA}
_KIND_NAMES = {v: k for k, v in _KIND_WORDS.items()}
_KEYWORDS = {"qubit", "module", "inst"}

_TOKEN = re.compile(r"\s*(?:(?P<id>[A-Za-z_][\w.\[\]]*)|(?P<punct>[(),{}])|(?P<bad>\S))")


class NetlistError(CircuitError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass
class _Tok:
    text: str
    kind: str  # "id", "punct" or "nl"
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        pos = 0
        while True:
            m = _TOKEN.match(line, pos)
            if m is None or m.end() == pos:
                break
            col = m.start(m.lastgroup) + 1
            if m.lastgroup == "bad":
                raise NetlistError(f"unexpected character {m.group('bad')!r}", lineno, col)
            toks.append(_Tok(m.group(m.lastgroup), m.lastgroup, lineno, col))
            pos = m.end()
        toks.append(_Tok("\n", "nl", lineno, len(raw) + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.qubits: list[Qubit] = []
        self.names: dict[str, int] = {}
        self.modules: dict[str, ModuleDef] = {}
        self.body: list = []

    # token helpers
    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("", "nl", 1, 1)
            raise NetlistError("unexpected end of input", last.line, last.col)
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            shown = "end of line" if tok.kind == "nl" else repr(tok.text)
            raise NetlistError(f"expected {text!r}, found {shown}", tok.line, tok.col)
        return tok

    def ident(self, what: str) -> _Tok:
        tok = self.next()
        if tok.kind != "id":
            shown = "end of line" if tok.kind == "nl" else repr(tok.text)
            raise NetlistError(f"expected {what}, found {shown}", tok.line, tok.col)
        return tok

    def end_of_statement(self):
        tok = self.peek()
        if tok is None or tok.kind == "nl":
            if tok is not None:
                self.i += 1
            return
        if tok.text == "}":
            return
        raise NetlistError(f"unexpected {tok.text!r} after statement", tok.line, tok.col)

    def skip_newlines(self):
        while (tok := self.peek()) is not None and tok.kind == "nl":
            self.i += 1

    def name_list(self, what: str, parens: bool) -> list[_Tok]:
        names: list[_Tok] = []
        if parens:
            self.expect("(")
            if (tok := self.peek()) is not None and tok.text == ")":
                self.i += 1
                return names
        while True:
            names.append(self.ident(what))
            tok = self.peek()
            if tok is not None and tok.text == ",":
                self.i += 1
                continue
            break
        if parens:
            self.expect(")")
        return names

    # grammar
    def parse(self) -> Circuit:
        while True:
            self.skip_newlines()
            tok = self.peek()
            if tok is None:
                break
            if tok.text == "qubit":
                self.qubit_decl()
            elif tok.text == "module":
                self.module_def()
            else:
                self.body.append(self.statement(self.names, None))
        try:
            c = build_hierarchical(self.qubits, list(self.modules.values()), self.body)
            return flatten(c) if not self.modules else c
        except CircuitError as exc:  # pragma: no cover - statements are pre-checked
            raise NetlistError(str(exc), 1, 1) from exc

    def qubit_decl(self):
        self.next()
        name = self.ident("qubit name")
        if name.text in self.names:
            raise NetlistError(f"duplicate qubit declaration {name.text!r}", name.line, name.col)
        if name.text in _KEYWORDS or name.text in gate_mnemonics():
            raise NetlistError(f"reserved word {name.text!r} used as qubit name", name.line, name.col)
        kind = QubitKind.DATA
        tok = self.peek()
        if tok is not None and tok.kind == "id":
            self.i += 1
            if tok.text not in _KIND_WORDS:
                raise NetlistError(f"unknown qubit kind {tok.text!r}", tok.line, tok.col)
            kind = _KIND_WORDS[tok.text]
        self.names[name.text] = len(self.qubits)
        self.qubits.append(Qubit(len(self.qubits), kind, name.text))
        self.end_of_statement()

    def module_def(self):
        self.next()
        name = self.ident("module name")
        if name.text in self.modules:
            raise NetlistError(f"duplicate module {name.text!r}", name.line, name.col)
        ports = self.name_list("port name", parens=True)
        scope: dict[str, int] = {}
        for p in ports:
            if p.text in scope:
                raise NetlistError(f"duplicate port {p.text!r}", p.line, p.col)
            scope[p.text] = len(scope)
        self.skip_newlines()
        self.expect("{")
        body = []
        while True:
            self.skip_newlines()
            tok = self.peek()
            if tok is None:
                raise NetlistError(f"module {name.text!r} is missing '}}'", name.line, name.col)
            if tok.text == "}":
                self.i += 1
                break
            if tok.text in ("qubit", "module"):
                raise NetlistError(f"{tok.text!r} not allowed inside a module", tok.line, tok.col)
            body.append(self.statement(scope, name.text))
        self.end_of_statement()
        self.modules[name.text] = ModuleDef(name.text, tuple(p.text for p in ports), tuple(body))

    def statement(self, scope: dict[str, int], inside: str | None):
        head = self.ident("statement")
        if head.text == "inst":
            mname = self.ident("module name")
            mod = self.modules.get(mname.text)
            if mod is None:
                why = "recursive instantiation of" if mname.text == inside else "unknown module"
                raise NetlistError(f"{why} {mname.text!r}", mname.line, mname.col)
            args = self.name_list("argument", parens=True)
            self.check_args(args, scope)
            if len(args) != len(mod.ports):
                raise NetlistError(
                    f"module {mod.name!r} expects {len(mod.ports)} argument(s), got {len(args)}",
                    mname.line,
                    mname.col,
                )
            self.end_of_statement()
            return InstStmt(mname.text, tuple(a.text for a in args))
        try:
            kind, inverse = parse_kind(head.text)
        except CircuitError:
            raise NetlistError(f"unknown gate kind {head.text!r}", head.line, head.col) from None
        args = self.name_list("qubit", parens=False)
        if len(args) != kind.arity:
            raise NetlistError(
                f"{head.text} takes {kind.arity} operand(s), got {len(args)}", head.line, head.col
            )
        self.check_args(args, scope)
        self.end_of_statement()
        return GateStmt(kind, tuple(a.text for a in args), inverse)

    @staticmethod
    def check_args(args: list[_Tok], scope: dict[str, int]):
        seen = set()
        for a in args:
            if a.text not in scope:
                raise NetlistError(f"undeclared qubit {a.text!r}", a.line, a.col)
            if a.text in seen:
                raise NetlistError(f"repeated operand {a.text!r}", a.line, a.col)
            seen.add(a.text)


def parse_netlist(text: str) -> Circuit:
    """Parse netlist text into a validated :class:`Circuit`.

    Raises
    ------
    NetlistError
        With 1-based ``line`` and ``col`` of the offending token.
    """
    return _Parser(text).parse()


def _stmt_text(st) -> str:
    if isinstance(st, InstStmt):
        return f"inst {st.module} ({', '.join(st.args)})"
    word = "tdag" if st.inverse else st.kind.value
    return f"{word} {','.join(st.args)}"


def emit_netlist(c: Circuit) -> str:
    """Serialize ``c``; hierarchical circuits keep their modules."""
    lines = [HEADER]
    for q in c.qubits:
        suffix = "" if q.kind is QubitKind.DATA else " " + _KIND_NAMES[q.kind]
        lines.append(f"qubit {q.label}{suffix}")
    for m in c.modules:
        lines.append(f"module {m.name} ({', '.join(m.ports)}) {{")
        lines.extend("    " + _stmt_text(st) for st in m.body)
        lines.append("}")
    if c.body is not None:
        lines.extend(_stmt_text(st) for st in c.body)
    else:
        labels = [q.label for q in c.qubits]
        for g in c.gates:
            lines.append(f"{g.mnemonic} {','.join(labels[o] for o in g.operands)}")
    return "\n".join(lines) + "\n"
