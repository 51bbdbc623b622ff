"""Parser and printer for the ``.karb`` rule/fact language.

Grammar (one statement per ``.``; ``#`` starts a comment):

    statement := domain | fact | rule
    domain    := "domain" NAME "=" "{" NAME ("," NAME)* "}"
    fact      := [INT "*"] term
    rule      := [NUM "*"] conj "=>" [NUM "*"] conj
    conj      := quantterm ("and" quantterm)*
    quantterm := ("exists"|"forall") VAR "in" NAME "." quantterm | term
    term      := "not" term | "O" "(" term ")" | "P" "(" term ")"
               | NAME ["(" term ("," term)* ")"] | METAVAR "(" term ")"

Lexical rules: variables are ALL-CAPS identifiers, metavariables are
``$``+ALL-CAPS, anything else is a symbol/constant; an identifier directly
followed by ``(`` is always a head symbol.  ``domain``, ``exists``,
``forall``, ``in``, ``and``, ``not``, ``O`` and ``P`` are reserved.

Compliance-model metadata rides on pragma comments so plain tools can still
read the files:

    #@ concern NAME
    #@ requirement NAME "free text" concern=NAME
    #@ rule NAME requirement=NAME        (names and links the next rule)
    #@ concept NAME symbol=NAME

``parse_program(print_program(p))`` reproduces ``p`` structurally, and a
file with one bad statement still yields every other statement plus a
located diagnostic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .terms import (
    ComplianceModel,
    Concept,
    Concern,
    FiniteDomain,
    MetaApp,
    Pattern,
    Quant,
    Requirement,
    Rule,
    RuleLink,
    Term,
    Var,
    pattern_metavars,
    pattern_vars,
    render,
)

RESERVED = {"domain", "exists", "forall", "in", "and", "not", "O", "P"}
_ALL_CAPS = re.compile(r"[A-Z][A-Z0-9_]*\Z")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_METAVAR = re.compile(r"\$([A-Z][A-Z0-9_]*)")
_NUMBER = re.compile(r"\d+(\.\d+)?")


def is_variable_name(name: str) -> bool:
    return bool(_ALL_CAPS.match(name)) and name not in RESERVED


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "error" | "warning"
    line: int
    column: int
    message: str
    text: str = ""

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass(frozen=True)
class Fact:
    pattern: Pattern
    count: int = 1


@dataclass(frozen=True)
class Program:
    domains: tuple[FiniteDomain, ...] = ()
    facts: tuple[Fact, ...] = ()
    rules: tuple[Rule, ...] = ()
    model: ComplianceModel | None = None

    def domain_table(self) -> dict[str, list[str]]:
        return {d.name: list(d.members) for d in self.domains}

    def unary_heads(self) -> list[str]:
        """Sorted unary head symbols occurring anywhere in the program."""
        heads: set[str] = set()

        def walk(p: Pattern):
            if isinstance(p, Term):
                if len(p.args) == 1 and p.head not in ("not", "O", "P"):
                    heads.add(p.head)
                for a in p.args:
                    walk(a)
            elif isinstance(p, MetaApp):
                walk(p.arg)
            elif isinstance(p, Quant):
                walk(p.body)

        for f in self.facts:
            walk(f.pattern)
        for r in self.rules:
            for p in r.lhs + r.rhs:
                walk(p)
        return sorted(heads)


@dataclass
class ParseResult:
    program: Program
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)


@dataclass(frozen=True)
class _Token:
    kind: str  # NAME METAVAR NUMBER PUNCT EOF
    text: str
    line: int
    col: int


_PUNCT = ("=>", ".", ",", "(", ")", "{", "}", "=", "*")


def _tokenize(source: str, diags: list[ParseDiagnostic]) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    col = 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch == "$":
            m = _METAVAR.match(source, i)
            if m:
                tokens.append(_Token("METAVAR", m.group(1), line, col))
                col += m.end() - i
                i = m.end()
                continue
            diags.append(ParseDiagnostic("error", line, col, "metavariable must be '$' + ALL-CAPS name", ch))
            i += 1
            col += 1
            continue
        m = _NAME.match(source, i)
        if m:
            tokens.append(_Token("NAME", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _NUMBER.match(source, i)
        if m:
            tokens.append(_Token("NUMBER", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        two = source[i : i + 2]
        if two == "=>":
            tokens.append(_Token("PUNCT", "=>", line, col))
            i += 2
            col += 2
            continue
        if ch in ".,(){}=*":
            tokens.append(_Token("PUNCT", ch, line, col))
            i += 1
            col += 1
            continue
        diags.append(ParseDiagnostic("error", line, col, f"unexpected character {ch!r}", ch))
        i += 1
        col += 1
    tokens.append(_Token("EOF", "", line, col))
    return tokens


@dataclass
class _Pragma:
    kind: str
    line: int
    args: list[str]


_PRAGMA_RE = re.compile(r"^\s*#@\s*(\w+)\s*(.*)$")


def _scan_pragmas(source: str, diags: list[ParseDiagnostic]) -> list[_Pragma]:
    pragmas = []
    for lineno, text in enumerate(source.splitlines(), start=1):
        m = _PRAGMA_RE.match(text)
        if not m:
            continue
        kind, rest = m.group(1), m.group(2).strip()
        if kind not in ("concern", "requirement", "rule", "concept"):
            diags.append(ParseDiagnostic("error", lineno, 1, f"unknown pragma '#@ {kind}'", text))
            continue
        args: list[str] = []
        pos = 0
        while pos < len(rest):
            if rest[pos].isspace():
                pos += 1
                continue
            if rest[pos] == '"':
                end = rest.find('"', pos + 1)
                if end < 0:
                    diags.append(ParseDiagnostic("error", lineno, pos + 1, "unterminated string in pragma", text))
                    break
                args.append(rest[pos : end + 1])
                pos = end + 1
            else:
                end = pos
                while end < len(rest) and not rest[end].isspace():
                    end += 1
                args.append(rest[pos:end])
                pos = end
        pragmas.append(_Pragma(kind, lineno, args))
    return pragmas


class _Parser:
    def __init__(self, tokens: list[_Token], diags: list[ParseDiagnostic]):
        self.tokens = tokens
        self.pos = 0
        self.diags = diags

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, tok: _Token, message: str):
        self.diags.append(ParseDiagnostic("error", tok.line, tok.col, message, tok.text))
        raise _SyntaxBail()

    def expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            self.error(tok, f"expected {want!r}, found {tok.text!r}" if tok.text else f"expected {want!r}")
        return self.next()

    def sync_to_statement_end(self):
        while True:
            tok = self.next()
            if tok.kind == "EOF" or (tok.kind == "PUNCT" and tok.text == "."):
                return

    # statement parsing --------------------------------------------------

    def parse_domain(self) -> FiniteDomain:
        self.expect("NAME", "domain")
        name = self.expect("NAME").text
        self.expect("PUNCT", "=")
        self.expect("PUNCT", "{")
        members = [self.expect("NAME").text]
        while self.peek().text == ",":
            self.next()
            members.append(self.expect("NAME").text)
        self.expect("PUNCT", "}")
        self.expect("PUNCT", ".")
        if len(set(members)) != len(members):
            self.diags.append(
                ParseDiagnostic("error", self.peek().line, self.peek().col, f"domain {name} has duplicate members")
            )
        return FiniteDomain(name, tuple(dict.fromkeys(members)))

    def parse_number(self) -> float:
        tok = self.expect("NUMBER")
        return float(tok.text) if "." in tok.text else int(tok.text)

    def parse_term(self) -> Pattern:
        tok = self.peek()
        if tok.kind == "METAVAR":
            self.next()
            self.expect("PUNCT", "(")
            arg = self.parse_term()
            self.expect("PUNCT", ")")
            return MetaApp(tok.text, arg)
        if tok.kind != "NAME":
            self.error(tok, f"expected a term, found {tok.text!r}")
        name = self.next().text
        if name == "not":
            return Term("not", (self.parse_term(),))
        if name in ("O", "P"):
            self.expect("PUNCT", "(")
            arg = self.parse_term()
            self.expect("PUNCT", ")")
            return Term(name, (arg,))
        if name in RESERVED:
            self.error(tok, f"reserved word {name!r} cannot be used as a symbol")
        if self.peek().text == "(":
            self.next()
            args = [self.parse_term()]
            while self.peek().text == ",":
                self.next()
                args.append(self.parse_term())
            self.expect("PUNCT", ")")
            return Term(name, tuple(args))
        if is_variable_name(name):
            return Var(name)
        return Term(name)

    def parse_quantterm(self) -> Pattern:
        tok = self.peek()
        if tok.kind == "NAME" and tok.text in ("exists", "forall"):
            kind = self.next().text
            var_tok = self.expect("NAME")
            if not is_variable_name(var_tok.text):
                self.error(var_tok, f"quantified variable must be ALL-CAPS, found {var_tok.text!r}")
            self.expect("NAME", "in")
            domain = self.expect("NAME").text
            self.expect("PUNCT", ".")
            body = self.parse_quantterm()
            return Quant(kind, var_tok.text, domain, body)
        return self.parse_term()

    def parse_conj(self) -> list[Pattern]:
        items = [self.parse_quantterm()]
        while self.peek().kind == "NAME" and self.peek().text == "and":
            self.next()
            items.append(self.parse_quantterm())
        return items

    def parse_fact_or_rule(self) -> tuple[str, object]:
        start = self.peek()
        weight: float | None = None
        if self.peek().kind == "NUMBER":
            weight = self.parse_number()
            self.expect("PUNCT", "*")
        lhs = self.parse_conj()
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.text == "=>":
            self.next()
            beta: float = 1
            if self.peek().kind == "NUMBER":
                beta = self.parse_number()
                self.expect("PUNCT", "*")
            rhs = self.parse_conj()
            self.expect("PUNCT", ".")
            alpha = 1 if weight is None else weight
            if alpha <= 0:
                self.diags.append(ParseDiagnostic("error", start.line, start.col, "rule weight alpha must be > 0"))
                raise _SyntaxBail()
            return "rule", (alpha, tuple(lhs), beta, tuple(rhs), start.line)
        self.expect("PUNCT", ".")
        if len(lhs) != 1:
            self.diags.append(
                ParseDiagnostic("error", start.line, start.col, "a fact must be a single term (no 'and')")
            )
            raise _SyntaxBail()
        count = 1
        if weight is not None:
            if weight != int(weight) or weight < 1:
                self.diags.append(
                    ParseDiagnostic("error", start.line, start.col, "fact multiplicity must be a positive integer")
                )
                raise _SyntaxBail()
            count = int(weight)
        return "fact", (lhs[0], count, start.line)


class _SyntaxBail(Exception):
    pass


def parse_program(source: str, filename: str = "<input>") -> ParseResult:
    """Parse a program; recover at statement boundaries on errors."""
    diags: list[ParseDiagnostic] = []
    pragmas = _scan_pragmas(source, diags)
    tokens = _tokenize(source, diags)
    parser = _Parser(tokens, diags)

    domains: list[FiniteDomain] = []
    raw_facts: list[tuple[Pattern, int, int]] = []
    raw_rules: list[tuple[float, tuple, float, tuple, int]] = []

    while parser.peek().kind != "EOF":
        tok = parser.peek()
        try:
            if tok.kind == "NAME" and tok.text == "domain":
                domains.append(parser.parse_domain())
            else:
                kind, payload = parser.parse_fact_or_rule()
                if kind == "fact":
                    raw_facts.append(payload)  # type: ignore[arg-type]
                else:
                    raw_rules.append(payload)  # type: ignore[arg-type]
        except _SyntaxBail:
            parser.sync_to_statement_end()

    domain_names = {d.name for d in domains}
    seen_domains: set[str] = set()
    for d in domains:
        if d.name in seen_domains:
            diags.append(ParseDiagnostic("error", 1, 1, f"domain {d.name} declared twice"))
        seen_domains.add(d.name)

    facts: list[Fact] = []
    for pattern, count, line in raw_facts:
        if _validate_fact(pattern, domain_names, diags, line):
            facts.append(Fact(pattern, count))

    naming = sorted((p for p in pragmas if p.kind == "rule" and p.args), key=lambda p: p.line)
    rules: list[Rule] = []
    auto_id = 0
    for alpha, lhs, beta, rhs, line in raw_rules:
        auto_id += 1
        rule_id = f"r{auto_id}"
        preceding = [p for p in naming if p.line < line]
        if preceding:
            rule_id = preceding[-1].args[0]
            naming.remove(preceding[-1])
            for stale in preceding[:-1]:
                diags.append(
                    ParseDiagnostic("warning", stale.line, 1, f"rule pragma {stale.args[0]} shadowed before use")
                )
                naming.remove(stale)
        if _validate_rule(rule_id, lhs, rhs, domain_names, diags, line):
            rules.append(Rule(rule_id, lhs, rhs, alpha, beta))
    for stale in naming:
        diags.append(ParseDiagnostic("warning", stale.line, 1, f"rule pragma {stale.args[0]} names no rule"))
    seen_rule_ids: set[str] = set()
    for r in rules:
        if r.id in seen_rule_ids:
            diags.append(ParseDiagnostic("error", 1, 1, f"duplicate rule id {r.id}"))
        seen_rule_ids.add(r.id)

    model = _build_model(pragmas, rules, diags)
    program = Program(tuple(domains), tuple(facts), tuple(rules), model)
    return ParseResult(program, diags)


def _quant_domains_declared(p: Pattern, domain_names: set[str], diags, line: int) -> bool:
    ok = True
    if isinstance(p, Quant):
        if p.domain not in domain_names:
            diags.append(ParseDiagnostic("error", line, 1, f"quantifier over undeclared domain {p.domain}"))
            ok = False
        ok = _quant_domains_declared(p.body, domain_names, diags, line) and ok
    elif isinstance(p, Term):
        for a in p.args:
            ok = _quant_domains_declared(a, domain_names, diags, line) and ok
    elif isinstance(p, MetaApp):
        ok = _quant_domains_declared(p.arg, domain_names, diags, line) and ok
    return ok


def _validate_fact(pattern: Pattern, domain_names: set[str], diags, line: int) -> bool:
    if not _quant_domains_declared(pattern, domain_names, diags, line):
        return False
    if pattern_metavars(pattern):
        diags.append(ParseDiagnostic("error", line, 1, "facts cannot contain metavariables"))
        return False
    free = pattern_vars(pattern)
    if free:
        diags.append(
            ParseDiagnostic("error", line, 1, f"fact is not ground: unquantified variable(s) {', '.join(sorted(free))}")
        )
        return False
    return True


def _lhs_exists_vars(p: Pattern, under_forall: bool = False) -> set[str]:
    """Existential variables usable on the RHS (not nested under a forall)."""
    if isinstance(p, Quant):
        if p.kind == "exists" and not under_forall:
            return {p.var} | _lhs_exists_vars(p.body, under_forall)
        return _lhs_exists_vars(p.body, under_forall or p.kind == "forall")
    return set()


def _validate_rule(rule_id: str, lhs: tuple, rhs: tuple, domain_names: set[str], diags, line: int) -> bool:
    ok = True
    for p in lhs + rhs:
        ok = _quant_domains_declared(p, domain_names, diags, line) and ok
    if not ok:
        return False
    bound: set[str] = set()
    exists_seen: set[str] = set()
    for p in lhs:
        bound |= pattern_vars(p)
        for v in _lhs_exists_vars(p):
            if v in exists_seen:
                diags.append(
                    ParseDiagnostic("error", line, 1, f"rule {rule_id}: existential variable {v} bound twice")
                )
                ok = False
            exists_seen.add(v)
            bound.add(v)
    for p in rhs:
        rhs_bound = _rhs_exists_vars(p)
        free = pattern_vars(p) - bound - rhs_bound
        if free:
            diags.append(
                ParseDiagnostic(
                    "error",
                    line,
                    1,
                    f"rule {rule_id}: right-hand variable(s) {', '.join(sorted(free))} not bound on the left",
                )
            )
            ok = False
        for v in _forall_vars(p):
            diags.append(
                ParseDiagnostic("warning", line, 1, f"rule {rule_id}: right-hand forall over {v} expands at grounding")
            )
    lmeta = set()
    for p in lhs:
        lmeta |= pattern_metavars(p)
    for p in rhs:
        extra = pattern_metavars(p) - lmeta
        if extra:
            diags.append(
                ParseDiagnostic(
                    "error", line, 1, f"rule {rule_id}: right-hand metavariable(s) {', '.join(sorted(extra))} unbound"
                )
            )
            ok = False
    clash = lmeta & bound
    if clash:
        diags.append(
            ParseDiagnostic(
                "error", line, 1, f"rule {rule_id}: name(s) {', '.join(sorted(clash))} used as both variable and metavariable"
            )
        )
        ok = False
    return ok


def _rhs_exists_vars(p: Pattern) -> set[str]:
    if isinstance(p, Quant):
        inner = _rhs_exists_vars(p.body)
        return ({p.var} | inner) if p.kind == "exists" else inner
    return set()


def _forall_vars(p: Pattern) -> set[str]:
    if isinstance(p, Quant):
        inner = _forall_vars(p.body)
        return ({p.var} | inner) if p.kind == "forall" else inner
    return set()


def _build_model(pragmas: list[_Pragma], rules: list[Rule], diags) -> ComplianceModel | None:
    relevant = [
        p
        for p in pragmas
        if p.kind in ("concern", "requirement", "concept")
        or (p.kind == "rule" and any(a.startswith("requirement=") and a != "requirement=" for a in p.args[1:]))
    ]
    if not relevant:
        return None
    concerns = []
    requirements = []
    concepts = []
    links = []
    for p in relevant:
        if p.kind == "concern":
            if len(p.args) != 1:
                diags.append(ParseDiagnostic("error", p.line, 1, "usage: #@ concern NAME"))
                continue
            concerns.append(Concern(p.args[0]))
        elif p.kind == "requirement":
            name, text, concern = None, "", None
            if p.args:
                name = p.args[0]
            for a in p.args[1:]:
                if a.startswith('"') and a.endswith('"'):
                    text = a[1:-1]
                elif a.startswith("concern="):
                    concern = a[len("concern=") :]
            if not name or concern is None:
                diags.append(ParseDiagnostic("error", p.line, 1, 'usage: #@ requirement NAME "text" concern=NAME'))
                continue
            requirements.append(Requirement(name, text, concern))
        elif p.kind == "concept":
            name, symbol = None, None
            if p.args:
                name = p.args[0]
            for a in p.args[1:]:
                if a.startswith("symbol="):
                    symbol = a[len("symbol=") :]
            if not name or symbol is None:
                diags.append(ParseDiagnostic("error", p.line, 1, "usage: #@ concept NAME symbol=NAME"))
                continue
            concepts.append(Concept(name, symbol))
        elif p.kind == "rule":
            if not p.args:
                diags.append(ParseDiagnostic("error", p.line, 1, "usage: #@ rule NAME [requirement=NAME]"))
                continue
            req = None
            for a in p.args[1:]:
                if a.startswith("requirement="):
                    req = a[len("requirement=") :]
            if req:  # a bare '#@ rule NAME' only names the statement
                links.append(RuleLink(p.args[0], req))
    model = ComplianceModel(tuple(concerns), tuple(requirements), tuple(links), tuple(concepts))
    for problem in model.validate([r.id for r in rules]):
        diags.append(ParseDiagnostic("error", 1, 1, f"compliance model: {problem}"))
    return model


# printing ---------------------------------------------------------------


def _format_weight(w: float) -> str:
    return str(int(w)) if float(w) == int(w) else repr(float(w))


def print_program(program: Program) -> str:
    """Canonical text for a program; re-parsing it reproduces the program."""
    lines: list[str] = []
    model = program.model
    if model is not None:
        for c in model.concerns:
            lines.append(f"#@ concern {c.name}")
        for r in model.requirements:
            lines.append(f'#@ requirement {r.name} "{r.text}" concern={r.concern}')
        for c in model.concepts:
            lines.append(f"#@ concept {c.name} symbol={c.symbol}")
        if lines:
            lines.append("")
    for d in program.domains:
        lines.append(f"domain {d.name} = {{{', '.join(d.members)}}}.")
    if program.domains and (program.facts or program.rules):
        lines.append("")
    for f in program.facts:
        prefix = f"{f.count} * " if f.count != 1 else ""
        lines.append(f"{prefix}{render(f.pattern)}.")
    links = {l.rule_id: l.requirement for l in model.rule_links} if model else {}
    auto_id = 0
    for r in program.rules:
        auto_id += 1
        if r.id in links:
            lines.append(f"#@ rule {r.id} requirement={links[r.id]}")
        elif r.id != f"r{auto_id}":
            lines.append(f"#@ rule {r.id}")
        alpha = f"{_format_weight(r.alpha)} * " if r.alpha != 1 else ""
        beta = f"{_format_weight(r.beta)} * " if r.beta != 1 else ""
        lhs = " and ".join(render(p) for p in r.lhs)
        rhs = " and ".join(render(p) for p in r.rhs)
        lines.append(f"{alpha}{lhs} => {beta}{rhs}.")
    return "\n".join(lines) + ("\n" if lines else "")
