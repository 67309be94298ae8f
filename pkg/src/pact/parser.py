"""Concrete syntax for ``.pact`` files.

The surface grammar::

    file      ::= decl* proto
    decl      ::= "param" IDENT ":" IDENT "@" IDENT
                | "domain" IDENT "=" "{" literal ("," literal)* "}"
    proto     ::= "protocol" IDENT "{" stmt* "}"
    stmt      ::= "send" "(" IDENT "," IDENT ")"
                | IDENT "=" IDENT "." "choose" "(" IDENT ")"
                | IDENT "." IDENT "<-" "world" "." "choose" "(" IDENT ")"
                | IDENT "." "values" "(" expr ")"
                | "if" "broadcast" "(" rvalue ")" block ("else" block)?
                | "exchange" "(" IDENT "," IDENT "," expr "," expr ")"
                | IDENT "=" expr ("@" IDENT)?
    rvalue    ::= (IDENT "=")? IDENT "." "choose" "(" IDENT ")"
                | (IDENT "=")? expr ("@" IDENT)?
    literal   ::= "-"? INT | "true" | "false" | IDENT ("=" "-"? INT)?

Statements end at a newline; ``(* ... *)`` comments nest.  A guard may name
the variable holding its value (``accept = buyer.choose(Bool)``); unnamed
guards get ``choice``, ``choice2``, ... .  ``@ role`` pins where a local
computation or expression guard runs.  A plain ``if expr { ... }`` parses
so that the checker can report it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .ast import (
    BUILTIN_DOMAINS,
    BinOp,
    Choose,
    Domain,
    Exchange,
    IfBroadcast,
    Label,
    Lit,
    Local,
    NatureChoose,
    Param,
    Protocol,
    Send,
    UnOp,
    Values,
    Var,
    format_value,
    free_vars,
    walk,
)
from .diagnostics import Diagnostic, SourceSpan, error

KEYWORDS = {
    "param", "domain", "protocol", "send", "if", "broadcast", "else",
    "exchange", "true", "false", "and", "or", "not",
}
PUNCT = ["<-", "==", "!=", "<=", ">=", "(", ")", "{", "}", ",", ".", "=",
         "<", ">", "+", "-", "*", "@", ":"]


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, NEWLINE, EOF, or the keyword/punctuation itself
    text: str
    span: SourceSpan

    def describe(self) -> str:
        if self.kind == "IDENT":
            return f"identifier '{self.text}'"
        if self.kind == "INT":
            return f"integer {self.text}"
        if self.kind == "NEWLINE":
            return "end of line"
        if self.kind == "EOF":
            return "end of file"
        return f"'{self.text}'"


def tokenize(text: str, file: str = "<input>") -> tuple[list[Token], list[Diagnostic]]:
    toks: list[Token] = []
    diags: list[Diagnostic] = []
    i, line, col = 0, 1, 1
    depth = 0  # parenthesis nesting; newlines inside parentheses are insignificant
    n = len(text)

    def newline_token(ln, cl):
        if depth == 0 and toks and toks[-1].kind != "NEWLINE":
            toks.append(Token("NEWLINE", "\n", SourceSpan(file, ln, cl, 1)))

    while i < n:
        c = text[i]
        if c == "\n":
            newline_token(line, col)
            i, line, col = i + 1, line + 1, 1
            continue
        if c in " \t\r":
            i, col = i + 1, col + 1
            continue
        if text.startswith("(*", i):
            start = SourceSpan(file, line, col, 2)
            nest, saw_newline = 0, False
            while i < n:
                if text.startswith("(*", i):
                    nest += 1
                    i, col = i + 2, col + 2
                elif text.startswith("*)", i):
                    nest -= 1
                    i, col = i + 2, col + 2
                    if nest == 0:
                        break
                elif text[i] == "\n":
                    saw_newline = True
                    i, line, col = i + 1, line + 1, 1
                else:
                    i, col = i + 1, col + 1
            if nest:
                diags.append(error("P002", "unterminated comment", start))
            elif saw_newline:
                newline_token(line, col)
            continue
        span_line, span_col = line, col
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("INT", text[i:j], SourceSpan(file, line, col, j - i)))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = word if word in KEYWORDS else "IDENT"
            toks.append(Token(kind, word, SourceSpan(file, line, col, j - i)))
            col += j - i
            i = j
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                toks.append(Token(p, p, SourceSpan(file, span_line, span_col, len(p))))
                if p == "(":
                    depth += 1
                elif p == ")":
                    depth = max(0, depth - 1)
                elif p in "{}":
                    depth = 0
                i += len(p)
                col += len(p)
                break
        else:
            diags.append(error("P002", f"unexpected character {c!r}", SourceSpan(file, line, col, 1)))
            i, col = i + 1, col + 1
    toks.append(Token("EOF", "", SourceSpan(file, line, col, 0)))
    return toks, diags


class _Abort(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


_CMP = ("==", "!=", "<", "<=", ">", ">=")


class _Parser:
    def __init__(self, toks: list[Token], file: str):
        self.toks = toks
        self.pos = 0
        self.file = file
        self.diags: list[Diagnostic] = []
        self.labels: dict[str, Label] = {}

    # -- token plumbing --

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, kind: str, k: int = 0) -> bool:
        return self.peek(k).kind == kind

    def advance(self) -> Token:
        t = self.peek()
        if t.kind != "EOF":
            self.pos += 1
        return t

    def expect(self, kind: str, what: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind:
            want = what or (f"'{kind}'" if kind not in ("IDENT", "INT") else kind.lower())
            self.fail(f"expected {want} but found {t.describe()}", t)
        return self.advance()

    def fail(self, message: str, tok: Token | None = None, code: str = "P001"):
        raise _Abort(error(code, message, (tok or self.peek()).span))

    def skip_newlines(self):
        while self.at("NEWLINE"):
            self.advance()

    def end_of_statement(self):
        if self.at("NEWLINE"):
            self.advance()
        elif not (self.at("}") or self.at("EOF")):
            self.fail(f"expected end of line but found {self.peek().describe()}")

    def synchronize(self):
        """Skip to the start of the next statement after an error."""
        depth = 0
        while not self.at("EOF"):
            t = self.peek()
            if t.kind == "{":
                depth += 1
            elif t.kind == "}":
                if depth == 0:
                    return
                depth -= 1
            elif t.kind == "NEWLINE" and depth == 0:
                self.advance()
                return
            self.advance()

    # -- file level --

    def parse_file(self) -> Protocol | None:
        params, domains = [], []
        self.skip_newlines()
        while self.at("param") or self.at("domain"):
            try:
                if self.at("param"):
                    params.append(self.parse_param())
                else:
                    d = self.parse_domain(domains)
                    if d is not None:
                        domains.append(d)
                self.end_of_statement()
            except _Abort as e:
                self.diags.append(e.diag)
                self.synchronize()
            self.skip_newlines()
        try:
            start = self.expect("protocol", "'protocol'")
            name = self.expect("IDENT", "protocol name").text
            self.expect("{")
        except _Abort as e:
            self.diags.append(e.diag)
            return None
        body = self.parse_stmts()
        try:
            self.expect("}")
            self.skip_newlines()
            self.expect("EOF", "end of file")
        except _Abort as e:
            self.diags.append(e.diag)
        return Protocol(name, tuple(params), tuple(domains), body, span=start.span)

    def parse_param(self) -> Param:
        start = self.advance()
        name = self.expect("IDENT", "parameter name").text
        self.expect(":")
        typ = self.expect("IDENT", "type name").text
        self.expect("@")
        role = self.expect("IDENT", "role name").text
        return Param(name, typ, role, span=start.span)

    def parse_literal(self):
        t = self.peek()
        if t.kind in ("true", "false"):
            self.advance()
            return t.kind == "true"
        if t.kind in ("INT", "-"):
            return self.parse_int()
        if t.kind == "IDENT":
            self.advance()
            magnitude = None
            if self.at("="):
                self.advance()
                magnitude = self.parse_int()
            return Label(t.text, magnitude)
        self.fail(f"expected literal but found {t.describe()}")

    def parse_int(self) -> int:
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        v = int(self.expect("INT", "integer").text)
        return -v if neg else v

    def parse_domain(self, existing) -> Domain | None:
        start = self.advance()
        name_tok = self.expect("IDENT", "domain name")
        self.expect("=")
        self.expect("{")
        values = [self.parse_literal()]
        while self.at(","):
            self.advance()
            values.append(self.parse_literal())
        self.expect("}")
        name = name_tok.text
        if name in BUILTIN_DOMAINS or any(d.name == name for d in existing):
            self.diags.append(error("P004", f"domain {name} is already declared", name_tok.span))
            return None
        kinds = {type(v) for v in values}
        if len(kinds) > 1:
            self.diags.append(error("P004", f"domain {name} mixes literal kinds", start.span))
            return None
        if len(set(map(format_value, values))) != len(values):
            self.diags.append(error("P004", f"domain {name} has duplicate values", start.span))
            return None
        for v in values:
            if isinstance(v, Label):
                prev = self.labels.get(v.name)
                if prev is not None and prev != v:
                    self.diags.append(error(
                        "P004", f"label {v.name} redeclared with a different magnitude", start.span))
                    return None
                self.labels[v.name] = v
        return Domain(name, tuple(values))

    # -- statements --

    def parse_stmts(self) -> tuple:
        out = []
        while True:
            self.skip_newlines()
            if self.at("}") or self.at("EOF"):
                return tuple(out)
            try:
                out.append(self.parse_stmt())
                self.end_of_statement()
            except _Abort as e:
                self.diags.append(e.diag)
                self.synchronize()

    def parse_block(self) -> tuple:
        self.skip_newlines()
        self.expect("{")
        body = self.parse_stmts()
        self.expect("}")
        return body

    def parse_stmt(self):
        t = self.peek()
        if t.kind == "send":
            self.advance()
            self.expect("(")
            v = self.expect("IDENT", "variable")
            self.expect(",")
            to = self.expect("IDENT", "role name").text
            self.expect(")")
            return Send(Var(v.text, span=v.span), None, to, span=t.span)
        if t.kind == "if":
            return self.parse_if()
        if t.kind == "exchange":
            self.advance()
            self.expect("(")
            a = self.expect("IDENT", "role name").text
            self.expect(",")
            b = self.expect("IDENT", "role name").text
            self.expect(",")
            item = self.parse_expr()
            self.expect(",")
            pay = self.parse_expr()
            self.expect(")")
            return Exchange(a, b, item, pay, span=t.span)
        if t.kind == "IDENT":
            if self.at("=", 1):
                target = self.advance()
                self.advance()
                if self.looks_like_choose():
                    return replace(self.parse_choose(target.text), span=target.span)
                expr = self.parse_expr()
                owner = self.parse_location()
                return Local(target.text, owner, expr, span=target.span)
            if self.at(".", 1) and self.at("IDENT", 2):
                if self.at("<-", 3):
                    base = self.advance()
                    self.advance()
                    attr = self.advance()
                    self.advance()
                    w = self.expect("IDENT", "'world'")
                    if w.text != "world":
                        self.fail(f"expected 'world' but found {w.describe()}", w)
                    self.expect(".")
                    self.expect_word("choose")
                    self.expect("(")
                    dom = self.expect("IDENT", "domain name").text
                    self.expect(")")
                    return NatureChoose(f"{base.text}.{attr.text}", dom, span=base.span)
                if self.peek(2).text == "values":
                    role = self.advance()
                    self.advance()
                    self.advance()
                    self.expect("(")
                    term = self.parse_expr()
                    self.expect(")")
                    return Values(role.text, term, span=role.span)
        self.fail(f"expected statement but found {t.describe()}", t)

    def expect_word(self, word: str) -> Token:
        t = self.peek()
        if t.kind != "IDENT" or t.text != word:
            self.fail(f"expected '{word}' but found {t.describe()}", t)
        return self.advance()

    def looks_like_choose(self) -> bool:
        return (self.at("IDENT") and self.at(".", 1) and self.peek(2).kind == "IDENT"
                and self.peek(2).text == "choose" and self.at("(", 3))

    def parse_choose(self, target: str) -> Choose:
        role = self.advance()
        self.advance()
        self.advance()
        self.expect("(")
        dom = self.expect("IDENT", "domain name").text
        self.expect(")")
        return Choose(target, role.text, dom, span=role.span)

    def parse_location(self) -> str | None:
        if self.at("@"):
            self.advance()
            return self.expect("IDENT", "role name").text
        return None

    def parse_if(self):
        start = self.advance()
        if self.at("broadcast"):
            self.advance()
            self.expect("(")
            var = None
            if self.at("IDENT") and self.at("=", 1):
                var = self.advance().text
                self.advance()
            if self.looks_like_choose():
                choice = self.parse_choose(var)
                guard, broadcaster = choice, choice.chooser
            else:
                guard = self.parse_expr()
                broadcaster = self.parse_location()
            self.expect(")")
            broadcast = True
        else:
            guard, var, broadcaster, broadcast = self.parse_expr(), None, None, False
        then = self.parse_block()
        orelse = ()
        k = 0
        while self.at("NEWLINE", k):
            k += 1
        if self.at("else", k):
            self.pos += k + 1
            orelse = self.parse_block()
        return IfBroadcast(guard, var, broadcaster, then, orelse, broadcast, span=start.span)

    # -- expressions --

    def parse_expr(self):
        left = self.parse_and()
        while self.at("or"):
            op = self.advance()
            left = BinOp("or", left, self.parse_and(), span=op.span)
        return left

    def parse_and(self):
        left = self.parse_not()
        while self.at("and"):
            op = self.advance()
            left = BinOp("and", left, self.parse_not(), span=op.span)
        return left

    def parse_not(self):
        if self.at("not"):
            op = self.advance()
            return UnOp("not", self.parse_not(), span=op.span)
        return self.parse_cmp()

    def parse_cmp(self):
        left = self.parse_add()
        if self.peek().kind in _CMP:
            op = self.advance()
            left = BinOp(op.kind, left, self.parse_add(), span=op.span)
            if self.peek().kind in _CMP:
                self.fail("comparisons do not chain; add parentheses")
        return left

    def parse_add(self):
        left = self.parse_mul()
        while self.peek().kind in ("+", "-"):
            op = self.advance()
            left = BinOp(op.kind, left, self.parse_mul(), span=op.span)
        return left

    def parse_mul(self):
        left = self.parse_unary()
        while self.at("*"):
            op = self.advance()
            left = BinOp("*", left, self.parse_unary(), span=op.span)
        return left

    def parse_unary(self):
        if self.at("-"):
            op = self.advance()
            return UnOp("-", self.parse_unary(), span=op.span)
        return self.parse_primary()

    def parse_primary(self):
        t = self.peek()
        if t.kind == "INT":
            self.advance()
            return Lit(int(t.text), span=t.span)
        if t.kind in ("true", "false"):
            self.advance()
            return Lit(t.kind == "true", span=t.span)
        if t.kind == "IDENT":
            self.advance()
            if self.at(".") and self.at("IDENT", 1):
                self.advance()
                attr = self.advance()
                return Var(f"{t.text}.{attr.text}", span=t.span)
            if t.text in self.labels:
                return Lit(self.labels[t.text], span=t.span)
            return Var(t.text, span=t.span)
        if t.kind == "(":
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        self.fail(f"expected expression but found {t.describe()}", t)


def _name_guards(p: Protocol) -> Protocol:
    used = {prm.name for prm in p.params}
    for d in p.domains:
        used.update(format_value(v) for v in d.values)
    for s in walk(p.body):
        for attr in ("target", "var"):
            name = getattr(s, attr, None)
            if name:
                used.add(name)
        for attr in ("expr", "term", "item", "payment", "guard"):
            e = getattr(s, attr, None)
            if e is not None and not isinstance(e, Choose):
                used.update(free_vars(e))

    def fresh():
        k = 1
        while True:
            name = "choice" if k == 1 else f"choice{k}"
            if name not in used:
                used.add(name)
                return name
            k += 1

    def fix(stmts):
        out = []
        for s in stmts:
            if isinstance(s, IfBroadcast):
                var = s.var or fresh()
                guard = s.guard
                if isinstance(guard, Choose) and guard.target is None:
                    guard = replace(guard, target=var)
                s = replace(s, guard=guard, var=var, then=fix(s.then), orelse=fix(s.orelse))
            out.append(s)
        return tuple(out)

    return replace(p, body=fix(p.body))


def parse_protocol(text: str, file: str = "<input>") -> Protocol | list[Diagnostic]:
    """Parse ``.pact`` source; returns the protocol or its error diagnostics."""
    toks, diags = tokenize(text, file)
    parser = _Parser(toks, file)
    proto = parser.parse_file()
    if not any(d.message == "unterminated comment" for d in diags):
        # an open comment runs to end of file; what the parser says then is noise
        diags = diags + parser.diags
    if diags or proto is None:
        return diags
    return _name_guards(proto)


# -- rendering --------------------------------------------------------------

_PREC = {"or": 1, "and": 2, "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6}


def _literal_text(v) -> str:
    if isinstance(v, Label) and v.magnitude is not None:
        return f"{v.name}={v.magnitude}"
    return format_value(v)


def render_expr(e, min_prec: int = 0) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        text = format_value(e.value)
        if isinstance(e.value, int) and not isinstance(e.value, bool) and e.value < 0:
            return text if min_prec <= 7 else f"({text})"
        return text
    if isinstance(e, UnOp):
        if e.op == "not":
            text, prec = f"not {render_expr(e.operand, 3)}", 3
        else:
            text, prec = f"-{render_expr(e.operand, 7)}", 7
    else:
        prec = _PREC[e.op]
        right_prec = prec + 1
        left_prec = prec + 1 if prec == 4 else prec
        text = f"{render_expr(e.left, left_prec)} {e.op} {render_expr(e.right, right_prec)}"
    return f"({text})" if prec < min_prec else text


def _render_guard(s: IfBroadcast) -> str:
    if isinstance(s.guard, Choose):
        return f"{s.var} = {s.guard.chooser}.choose({s.guard.domain})"
    loc = f" @ {s.broadcaster}" if s.broadcaster else ""
    return f"{s.var} = {render_expr(s.guard)}{loc}"


def _render_stmts(stmts, indent: int, lines: list[str]):
    pad = "  " * indent
    for s in stmts:
        if isinstance(s, Send):
            lines.append(f"{pad}send({render_expr(s.expr)}, {s.to})")
        elif isinstance(s, Choose):
            lines.append(f"{pad}{s.target} = {s.chooser}.choose({s.domain})")
        elif isinstance(s, NatureChoose):
            lines.append(f"{pad}{s.target} <- world.choose({s.domain})")
        elif isinstance(s, Values):
            lines.append(f"{pad}{s.role}.values({render_expr(s.term)})")
        elif isinstance(s, Exchange):
            lines.append(f"{pad}exchange({s.a}, {s.b}, {render_expr(s.item)}, {render_expr(s.payment)})")
        elif isinstance(s, Local):
            loc = f" @ {s.owner}" if s.owner else ""
            lines.append(f"{pad}{s.target} = {render_expr(s.expr)}{loc}")
        elif isinstance(s, IfBroadcast):
            head = f"broadcast({_render_guard(s)})" if s.broadcast else render_expr(s.guard)
            lines.append(f"{pad}if {head} {{")
            _render_stmts(s.then, indent + 1, lines)
            if s.orelse:
                lines.append(f"{pad}}} else {{")
                _render_stmts(s.orelse, indent + 1, lines)
            lines.append(f"{pad}}}")
        else:
            raise TypeError(f"cannot render {s!r}")


def render_protocol(p: Protocol) -> str:
    """Canonical source text; parsing it yields ``p`` again (spans aside)."""
    lines = [f"param {prm.name} : {prm.type} @ {prm.role}" for prm in p.params]
    for d in p.domains:
        lines.append(f"domain {d.name} = {{{', '.join(_literal_text(v) for v in d.values)}}}")
    if lines:
        lines.append("")
    lines.append(f"protocol {p.name} {{")
    _render_stmts(p.body, 1, lines)
    lines.append("}")
    return "\n".join(lines) + "\n"
