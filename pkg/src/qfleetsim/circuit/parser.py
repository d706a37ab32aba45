"""Recursive-descent parser for the OPENQASM 2.0 subset.

Grammar (complete accepted language):

    program   := "OPENQASM" "2.0" ";" include* stmt*
    include   := "include" STRING ";"
    stmt      := qreg | creg | gate | measure | barrier
    qreg      := "qreg" ID "[" INT "]" ";"
    creg      := "creg" ID "[" INT "]" ";"
    gate      := GATENAME params? arglist ";"      params := "(" REAL ")"
    arglist   := qubit ("," qubit)*                qubit  := ID "[" INT "]"
    measure   := "measure" qubit "->" cbit ";"
    barrier   := "barrier" arglist? ";"

"//" comments run to end of line; whitespace is insignificant. ``include``
lines are accepted and ignored. Multiple qreg/creg declarations are flattened
to global indices in declaration order. No gate definitions, conditionals, or
loops.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..errors import QFleetError
from .ir import GateKind, GateIR, CircuitIR, ROTATION_GATES, TWO_QUBIT_GATES

GATE_NAMES = {k.value: k for k in GateKind if k not in (GateKind.MEASURE, GateKind.BARRIER)}

_PUNCT = {";", ",", "[", "]", "(", ")"}


class ParseError(QFleetError):
    """Lexical or syntactic failure, with source position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class SemanticError(QFleetError):
    """Well-formed syntax with invalid meaning (bad register, index, arity)."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str  # ID | NUMBER | STRING | ARROW | punctuation | EOF
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if source.startswith("->", i):
            tokens.append(Token("ARROW", "->", line, start_col))
            i += 2
            col += 2
            continue
        if c in _PUNCT:
            tokens.append(Token(c, c, line, start_col))
            i += 1
            col += 1
            continue
        if c == '"':
            j = source.find('"', i + 1)
            if j < 0:
                raise ParseError("unterminated string", line, start_col)
            text = source[i : j + 1]
            tokens.append(Token("STRING", text, line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit() or (c in "+-." and i + 1 < n and (source[i + 1].isdigit() or source[i + 1] == ".")):
            j = i
            if source[j] in "+-":
                j += 1
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            tokens.append(Token("NUMBER", text, line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            tokens.append(Token("ID", text, line, start_col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", line, start_col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.text if tok.kind != "EOF" else "end of input"
            raise ParseError(f"expected {what or kind!r}, found {shown!r}", tok.line, tok.column)
        return self.advance()

    def expect_id(self, value: str) -> Token:
        tok = self.expect("ID", f"'{value}'")
        if tok.text != value:
            raise ParseError(f"expected '{value}', found {tok.text!r}", tok.line, tok.column)
        return tok

    # grammar productions -------------------------------------------------

    def program(self) -> CircuitIR:
        self.expect_id("OPENQASM")
        ver = self.expect("NUMBER", "version '2.0'")
        if ver.text != "2.0":
            raise ParseError(f"unsupported version {ver.text!r}, expected '2.0'", ver.line, ver.column)
        self.expect(";")
        while self.peek().kind == "ID" and self.peek().text == "include":
            self.advance()
            self.expect("STRING", "include filename string")
            self.expect(";")

        qregs: dict[str, tuple[int, int]] = {}  # name -> (offset, size)
        cregs: dict[str, tuple[int, int]] = {}
        num_qubits = 0
        num_cbits = 0
        gates: list[GateIR] = []

        while self.peek().kind != "EOF":
            tok = self.expect("ID", "'qreg', 'creg', a gate name, 'measure', or 'barrier'")
            if tok.text == "qreg":
                name, size = self._register_decl(tok)
                if name in qregs or name in cregs:
                    raise SemanticError(f"register {name!r} redeclared", tok.line, tok.column)
                qregs[name] = (num_qubits, size)
                num_qubits += size
            elif tok.text == "creg":
                name, size = self._register_decl(tok)
                if name in qregs or name in cregs:
                    raise SemanticError(f"register {name!r} redeclared", tok.line, tok.column)
                cregs[name] = (num_cbits, size)
                num_cbits += size
            elif tok.text == "measure":
                q = self._operand(qregs, "quantum")
                self.expect("ARROW", "'->'")
                c = self._operand(cregs, "classical")
                self.expect(";")
                gates.append(GateIR(GateKind.MEASURE, (q,), cbit=c))
            elif tok.text == "barrier":
                if self.peek().kind == "ID":
                    self._arglist(qregs, tok)  # validated, then discarded: barriers are global
                self.expect(";")
                gates.append(GateIR(GateKind.BARRIER))
            elif tok.text in GATE_NAMES:
                gates.append(self._gate(tok, qregs))
            else:
                raise ParseError(
                    f"expected 'qreg', 'creg', a gate name, 'measure', or 'barrier', found {tok.text!r}",
                    tok.line,
                    tok.column,
                )

        if num_qubits == 0:
            eof = self.peek()
            raise SemanticError("program declares no qubits", eof.line, eof.column)
        return CircuitIR(num_qubits=num_qubits, num_cbits=num_cbits, gates=tuple(gates))

    def _register_decl(self, kw: Token) -> tuple[str, int]:
        name = self.expect("ID", "register name").text
        self.expect("[")
        size_tok = self.expect("NUMBER", "register size")
        self.expect("]")
        self.expect(";")
        try:
            size = int(size_tok.text)
        except ValueError:
            raise ParseError(f"register size must be an integer, found {size_tok.text!r}", size_tok.line, size_tok.column)
        if size < 1:
            raise SemanticError(f"register size must be >= 1, got {size}", size_tok.line, size_tok.column)
        return name, size

    def _operand(self, regs: dict[str, tuple[int, int]], space: str) -> int:
        name_tok = self.expect("ID", f"{space} register name")
        self.expect("[")
        idx_tok = self.expect("NUMBER", "index")
        self.expect("]")
        if name_tok.text not in regs:
            raise SemanticError(f"undeclared {space} register {name_tok.text!r}", name_tok.line, name_tok.column)
        try:
            idx = int(idx_tok.text)
        except ValueError:
            raise ParseError(f"index must be an integer, found {idx_tok.text!r}", idx_tok.line, idx_tok.column)
        offset, size = regs[name_tok.text]
        if not 0 <= idx < size:
            raise SemanticError(
                f"index {idx} out of range for register {name_tok.text!r} of size {size}",
                idx_tok.line,
                idx_tok.column,
            )
        return offset + idx

    def _arglist(self, qregs: dict[str, tuple[int, int]], at: Token) -> list[int]:
        args = [self._operand(qregs, "quantum")]
        while self.peek().kind == ",":
            self.advance()
            args.append(self._operand(qregs, "quantum"))
        return args

    def _gate(self, name_tok: Token, qregs: dict[str, tuple[int, int]]) -> GateIR:
        kind = GATE_NAMES[name_tok.text]
        param: float | None = None
        if self.peek().kind == "(":
            if kind not in ROTATION_GATES:
                raise SemanticError(
                    f"gate {kind.value!r} takes no parameter", name_tok.line, name_tok.column
                )
            self.advance()
            num = self.expect("NUMBER", "rotation angle")
            self.expect(")")
            param = float(num.text)
        elif kind in ROTATION_GATES:
            tok = self.peek()
            raise ParseError(f"expected '(' with rotation angle after {kind.value!r}", tok.line, tok.column)
        args = self._arglist(qregs, name_tok)
        self.expect(";")
        want = 2 if kind in TWO_QUBIT_GATES else 1
        if len(args) != want:
            raise SemanticError(
                f"gate {kind.value!r} expects {want} operand(s), got {len(args)}",
                name_tok.line,
                name_tok.column,
            )
        if len(set(args)) != len(args):
            raise SemanticError(f"gate {kind.value!r} has duplicate operands", name_tok.line, name_tok.column)
        return GateIR(kind, tuple(args), param=param)


def parse_qasm(source: str) -> CircuitIR:
    """Parse QASM source into a CircuitIR with flattened global indices."""
    return _Parser(_tokenize(source)).program()


@lru_cache(maxsize=4096)
def parse_qasm_cached(source: str) -> CircuitIR:
    """Memoized parse for hot paths; safe because the IR is immutable."""
    return parse_qasm(source)
