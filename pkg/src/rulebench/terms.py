"""Symbolic terms, patterns, rules, working memory and the derivation lattice.

A ground ``Term`` is a head symbol applied to zero or more ground terms.
The modal/negation wrappers ``not``, ``O`` (obligation) and ``P``
(permission) are ordinary unary constructors: the engine gives them no
special meaning, rules do.  In particular nothing is normalized away --
``P(P(x))`` and ``P(x)`` are different terms, ``not not x`` is not ``x``.

Patterns reuse the ``Term`` node shape but may additionally contain
variable leaves (``Var``), predicate-metavariable applications
(``MetaApp``, a variable standing for a unary head symbol) and quantifier
prefixes (``Quant``).  Matching never mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

NOT = "not"
OBLIGATION = "O"
PERMISSION = "P"
WRAPPERS = frozenset((NOT, OBLIGATION, PERMISSION))

FALSE_HEAD = "false"


class TermError(Exception):
    """Bad term construction."""


class MatchError(Exception):
    """A pattern that cannot be matched directly (e.g. still quantified)."""


class SubstitutionError(Exception):
    """Substitution hit an unbound variable or an unskolemizable quantifier."""


class ModeViolationError(Exception):
    """Multiset operation not allowed in classical (set-semantics) mode."""


@dataclass(frozen=True)
class Term:
    """A symbol applied to argument terms.  Ground iff all leaves are ground."""

    head: str
    args: tuple["Pattern", ...] = ()

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class Var:
    """A pattern variable; with ``domain`` set it only binds members of it."""

    name: str
    domain: str | None = None

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class MetaApp:
    """Application of a predicate metavariable to one argument pattern."""

    meta: str
    arg: "Pattern"

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class Quant:
    """A ``forall``/``exists`` prefix binding ``var`` over a finite domain."""

    kind: str  # "forall" | "exists"
    var: str
    domain: str
    body: "Pattern"

    def __str__(self) -> str:
        return render(self)


Pattern = Union[Term, Var, MetaApp, Quant]

# Bindings map variable names to Terms and metavariable names to head symbols.
Bindings = dict[str, "Term | str"]


def make_term(head: str, args: "list | tuple" = (), wrappers: "list | tuple" = ()) -> Term:
    """Build a ground term, then apply wrappers in list order (last = outermost)."""
    if not isinstance(head, str) or not head:
        raise TermError("term head must be a non-empty string")
    fixed = []
    for a in args:
        if isinstance(a, str):
            a = Term(a)
        if not isinstance(a, Term) or not is_ground(a):
            raise TermError(f"term argument {a!r} is not ground")
        fixed.append(a)
    t = Term(head, tuple(fixed))
    for w in wrappers:
        w = NOT if isinstance(w, str) and w.upper() == "NOT" else w
        if w not in WRAPPERS:
            raise TermError(f"unknown wrapper {w!r}; expected one of {sorted(WRAPPERS)}")
        t = Term(w, (t,))
    return t


def is_ground(p: Pattern) -> bool:
    if isinstance(p, Term):
        return all(is_ground(a) for a in p.args)
    return False


def pattern_vars(p: Pattern, bound: frozenset[str] = frozenset()) -> set[str]:
    """Free variable names of a pattern (quantified ones excluded)."""
    if isinstance(p, Var):
        return set() if p.name in bound else {p.name}
    if isinstance(p, Term):
        out: set[str] = set()
        for a in p.args:
            out |= pattern_vars(a, bound)
        return out
    if isinstance(p, MetaApp):
        return pattern_vars(p.arg, bound)
    if isinstance(p, Quant):
        return pattern_vars(p.body, bound | {p.var})
    raise TypeError(f"not a pattern: {p!r}")


def pattern_metavars(p: Pattern) -> set[str]:
    if isinstance(p, MetaApp):
        return {p.meta} | pattern_metavars(p.arg)
    if isinstance(p, Term):
        out: set[str] = set()
        for a in p.args:
            out |= pattern_metavars(a)
        return out
    if isinstance(p, Quant):
        return pattern_metavars(p.body)
    return set()


def render(p: Pattern) -> str:
    """Canonical text for a term/pattern; the DSL parses this back."""
    if isinstance(p, Var):
        return p.name
    if isinstance(p, MetaApp):
        return f"${p.meta}({render(p.arg)})"
    if isinstance(p, Quant):
        return f"{p.kind} {p.var} in {p.domain} . {render(p.body)}"
    if isinstance(p, Term):
        if p.head == NOT:
            return f"not {render(p.args[0])}"
        if not p.args:
            return p.head
        return f"{p.head}({', '.join(render(a) for a in p.args)})"
    raise TypeError(f"not a pattern: {p!r}")


def match(
    pattern: Pattern,
    term: Term,
    bindings: Bindings | None = None,
    domains: dict[str, list[str]] | None = None,
) -> Bindings | None:
    """Extend ``bindings`` so that the pattern equals the ground term, or None.

    Domain-bounded variables only bind constants that are members of their
    domain (looked up in ``domains``).  Metavariables bind unary head symbols
    (never the ``not``/``O``/``P`` wrappers).  The input map is never mutated.
    """
    return _match(pattern, term, dict(bindings or {}), domains or {})


def _match(pattern: Pattern, term: Term, bindings: Bindings, domains: dict[str, list[str]]) -> Bindings | None:
    if isinstance(pattern, Quant):
        raise MatchError("quantified patterns must be grounded before matching")
    if isinstance(pattern, Var):
        if pattern.name in bindings:
            return bindings if bindings[pattern.name] == term else None
        if pattern.domain is not None:
            if term.args or term.head not in domains.get(pattern.domain, ()):
                return None
        bindings[pattern.name] = term
        return bindings
    if isinstance(pattern, MetaApp):
        if len(term.args) != 1 or term.head in WRAPPERS:
            return None
        if pattern.meta in bindings:
            if bindings[pattern.meta] != term.head:
                return None
        else:
            bindings[pattern.meta] = term.head
        return _match(pattern.arg, term.args[0], bindings, domains)
    if isinstance(pattern, Term):
        if pattern.head != term.head or len(pattern.args) != len(term.args):
            return None
        for pa, ta in zip(pattern.args, term.args):
            if _match(pa, ta, bindings, domains) is None:
                return None
        return bindings
    raise TypeError(f"not a pattern: {pattern!r}")


class SkolemEnv:
    """Counter + mutable domain table used when grounding existentials."""

    def __init__(self, domains: dict[str, list[str]] | None = None):
        self.domains: dict[str, list[str]] = domains if domains is not None else {}
        self._next = 1

    def fresh(self, domain: str) -> str:
        name = f"sk_{self._next}"
        self._next += 1
        self.domains.setdefault(domain, []).append(name)
        return name


def substitute(template: Pattern, bindings: Bindings, skolem_env: SkolemEnv | None = None) -> Term:
    """Instantiate a template to a ground term under ``bindings``.

    ``exists``-quantified templates are skolemized when a ``SkolemEnv`` is
    supplied (fresh constant appended to the quantified domain); a
    ``forall`` template or an unbound variable is an error here.
    """
    if isinstance(template, Quant):
        if template.kind != "exists" or skolem_env is None:
            raise SubstitutionError(f"cannot instantiate quantifier {template.kind!r} here")
        if template.var in bindings:
            return substitute(template.body, bindings, skolem_env)
        sk = skolem_env.fresh(template.domain)
        inner = dict(bindings)
        inner[template.var] = Term(sk)
        return substitute(template.body, inner, skolem_env)
    if isinstance(template, Var):
        value = bindings.get(template.name)
        if not isinstance(value, Term):
            raise SubstitutionError(f"unbound variable {template.name}")
        return value
    if isinstance(template, MetaApp):
        head = bindings.get(template.meta)
        if not isinstance(head, str):
            raise SubstitutionError(f"unbound metavariable ${template.meta}")
        return Term(head, (substitute(template.arg, bindings, skolem_env),))
    if isinstance(template, Term):
        if not template.args:
            return template
        return Term(template.head, tuple(substitute(a, bindings, skolem_env) for a in template.args))
    raise TypeError(f"not a pattern: {template!r}")


@dataclass(frozen=True)
class FiniteDomain:
    """A named, ordered set of constants quantifiers can range over."""

    name: str
    members: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.members)) != len(self.members):
            raise TermError(f"domain {self.name} has duplicate members")


@dataclass(frozen=True)
class Rule:
    """A weighted generative rule: alpha * lhs => beta * rhs."""

    id: str
    lhs: tuple[Pattern, ...]
    rhs: tuple[Pattern, ...]
    alpha: float = 1
    beta: float = 1

    def __post_init__(self):
        if not self.lhs:
            raise TermError(f"rule {self.id}: empty left-hand side")
        if not self.alpha > 0:
            raise TermError(f"rule {self.id}: alpha must be positive")
        if self.beta < 0:
            raise TermError(f"rule {self.id}: beta must be non-negative")


@dataclass(frozen=True)
class Concern:
    name: str


@dataclass(frozen=True)
class Requirement:
    name: str
    text: str
    concern: str


@dataclass(frozen=True)
class RuleLink:
    rule_id: str
    requirement: str


@dataclass(frozen=True)
class Concept:
    name: str
    symbol: str


@dataclass(frozen=True)
class ComplianceModel:
    """Concern -> requirement -> rule traceability plus concept/symbol table."""

    concerns: tuple[Concern, ...] = ()
    requirements: tuple[Requirement, ...] = ()
    rule_links: tuple[RuleLink, ...] = ()
    concepts: tuple[Concept, ...] = ()

    def validate(self, rule_ids: list[str]) -> list[str]:
        """Return human-readable inconsistencies (empty when well-formed)."""
        problems = []
        concern_names = {c.name for c in self.concerns}
        req_names = [r.name for r in self.requirements]
        if len(set(req_names)) != len(req_names):
            problems.append("duplicate requirement names")
        for r in self.requirements:
            if r.concern not in concern_names:
                problems.append(f"requirement {r.name} references unknown concern {r.concern}")
        linked: dict[str, int] = {}
        for link in self.rule_links:
            if link.requirement not in set(req_names):
                problems.append(f"rule {link.rule_id} references unknown requirement {link.requirement}")
            if link.rule_id not in rule_ids:
                problems.append(f"rule link references unknown rule {link.rule_id}")
            linked[link.rule_id] = linked.get(link.rule_id, 0) + 1
        if self.requirements:
            for rid in rule_ids:
                if linked.get(rid, 0) != 1:
                    problems.append(f"rule {rid} must be linked to exactly one requirement")
        seen_concepts: dict[str, str] = {}
        for c in self.concepts:
            if c.name in seen_concepts and seen_concepts[c.name] != c.symbol:
                problems.append(f"concept {c.name} maps to more than one symbol")
            seen_concepts[c.name] = c.symbol
        return problems


class WorkingMemory:
    """Multiset of ground terms with stable insertion indices.

    Classical mode keeps set semantics (all multiplicities 1); weighted mode
    allows counts.  Iteration order is insertion order.
    """

    def __init__(self, mode: str = "classical"):
        if mode not in ("classical", "weighted"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self._entries: dict[Term, list[int]] = {}  # term -> [count, index]

    def insert(self, term: Term, count: int = 1) -> "WorkingMemory":
        if count < 1:
            raise ModeViolationError("insert count must be >= 1")
        if self.mode == "classical" and count != 1:
            raise ModeViolationError("multiplicity > 1 is not allowed in classical mode")
        if not isinstance(term, Term) or not is_ground(term):
            raise TermError(f"working memory only holds ground terms, got {term!r}")
        entry = self._entries.get(term)
        if entry is None:
            self._entries[term] = [count, len(self._entries)]
        elif self.mode == "classical":
            pass  # set semantics: already present
        else:
            entry[0] += count
        return self

    def __contains__(self, term: Term) -> bool:
        return term in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def count(self, term: Term) -> int:
        entry = self._entries.get(term)
        return entry[0] if entry else 0

    def index(self, term: Term) -> int:
        return self._entries[term][1]

    def terms(self) -> list[Term]:
        return list(self._entries)

    def items(self) -> Iterator[tuple[Term, int, int]]:
        for term, (count, idx) in self._entries.items():
            yield term, count, idx

    def as_set(self) -> frozenset[Term]:
        return frozenset(self._entries)


def wm_insert(wm: WorkingMemory, term: Term, count: int = 1) -> WorkingMemory:
    """Functional-style alias for :meth:`WorkingMemory.insert`."""
    return wm.insert(term, count)


@dataclass(frozen=True)
class Edge:
    """One rule application: premise node ids -> conclusion node id."""

    premises: tuple[int, ...]
    rule_id: str
    conclusion: int


class DerivationLattice:
    """DAG of term derivations; axioms are roots, every edge is a rule firing.

    Node ids follow working-memory insertion order, and an edge is only
    recorded when all premises have smaller ids than the conclusion, so the
    graph is acyclic by construction and node-id order is topological.
    """

    def __init__(self):
        self._ids: dict[Term, int] = {}
        self._terms: list[Term] = []
        self.edges: list[Edge] = []
        self._edge_keys: set[tuple] = set()
        self._in_edges: dict[int, list[int]] = {}  # node id -> edge positions

    def add_node(self, term: Term) -> int:
        nid = self._ids.get(term)
        if nid is None:
            nid = len(self._terms)
            self._ids[term] = nid
            self._terms.append(term)
        return nid

    def node_id(self, term: Term) -> int | None:
        return self._ids.get(term)

    def term(self, nid: int) -> Term:
        return self._terms[nid]

    def __len__(self) -> int:
        return len(self._terms)

    def add_edge(self, premises: tuple[int, ...], rule_id: str, conclusion: int) -> bool:
        """Record a derivation; drops re-derivations that would break acyclicity."""
        if any(p >= conclusion for p in premises):
            return False
        key = (premises, rule_id, conclusion)
        if key in self._edge_keys:
            return False
        self._edge_keys.add(key)
        self._in_edges.setdefault(conclusion, []).append(len(self.edges))
        self.edges.append(Edge(premises, rule_id, conclusion))
        return True

    def in_edges(self, nid: int) -> list[Edge]:
        return [self.edges[i] for i in self._in_edges.get(nid, [])]

    def first_edge(self, nid: int) -> Edge | None:
        positions = self._in_edges.get(nid)
        return self.edges[positions[0]] if positions else None

    def is_axiom(self, nid: int) -> bool:
        return nid not in self._in_edges

    def axioms(self) -> list[int]:
        return [nid for nid in range(len(self._terms)) if self.is_axiom(nid)]

    def nodes(self) -> list[tuple[int, Term]]:
        return list(enumerate(self._terms))
