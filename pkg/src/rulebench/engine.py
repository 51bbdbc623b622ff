"""Forward-chaining saturation over a parsed program.

Grounding happens once, up front: existential facts are skolemized first
(fresh ``sk_N`` constants joining their domain), then universal facts and
rule quantifiers expand over the domain members known at that point.  A
left-hand ``exists`` becomes one rule variant per member; a left-hand
``forall`` becomes a conjunction over members; metavariables expand over
the unary head symbols of the program.

Each pass matches every ground rule against the snapshot taken at the
start of the pass (breadth-first), so classical-mode saturation reaches the
same final set for any rule order.  Terms are never removed.  After every
pass the working memory is checked for a contradiction: some term together
with its ``not``-wrapped form, or the bare atom ``false``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .dsl import Program
from .terms import (
    DerivationLattice,
    MetaApp,
    Pattern,
    Quant,
    Rule,
    SkolemEnv,
    Term,
    Var,
    WorkingMemory,
    is_ground,
    match,
    pattern_metavars,
    render,
    substitute,
)


class GroundingError(Exception):
    """Program cannot be grounded (undeclared domain, ungroundable fact...)."""


class BudgetError(Exception):
    """Term or rule expansion budget exceeded."""


class NotDerivedError(Exception):
    """explain() was asked about a term that is not in the lattice."""


@dataclass(frozen=True)
class EngineConfig:
    mode: str = "classical"  # "classical" | "weighted"
    max_passes: int = 100
    max_terms: int = 100_000
    contradiction_halts: bool = True

    def __post_init__(self):
        if self.max_passes < 1 or self.max_terms < 1:
            raise ValueError("engine budgets must be positive")
        if self.mode not in ("classical", "weighted"):
            raise ValueError(f"unknown mode {self.mode!r}")


class VerdictKind(Enum):
    SATURATED = "Saturated"
    CONTRADICTION = "Contradiction"
    BUDGET_EXHAUSTED = "BudgetExhausted"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    witness: tuple[Term, Term] | None = None
    passes_used: int = 0

    def __post_init__(self):
        if (self.witness is not None) != (self.kind is VerdictKind.CONTRADICTION):
            raise ValueError("witness must be present exactly for contradictions")


@dataclass(frozen=True)
class GroundRule:
    """A rule with quantifiers and metavariables already expanded away.

    ``lhs`` patterns contain only free variables; ``rhs`` templates may still
    hold ``exists`` nodes whose witness is skolemized (memoized per firing).
    """

    id: str
    lhs: tuple[Pattern, ...]
    rhs: tuple[Pattern, ...]
    alpha: float = 1
    beta: float = 1
    origin: str = ""


@dataclass
class GroundProgram:
    rules: list[GroundRule]
    wm: WorkingMemory
    lattice: DerivationLattice
    skolems: SkolemEnv

    @property
    def domains(self) -> dict[str, list[str]]:
        return self.skolems.domains


def _has_exists(p: Pattern) -> bool:
    if isinstance(p, Quant):
        return p.kind == "exists" or _has_exists(p.body)
    if isinstance(p, Term):
        return any(_has_exists(a) for a in p.args)
    if isinstance(p, MetaApp):
        return _has_exists(p.arg)
    return False


def _expand_fact(p: Pattern, binding: dict, skolems: SkolemEnv) -> list[Term]:
    if isinstance(p, Quant):
        if p.domain not in skolems.domains:
            raise GroundingError(f"quantifier over undeclared domain {p.domain}")
        if p.kind == "forall":
            out: list[Term] = []
            for member in list(skolems.domains[p.domain]):
                inner = dict(binding)
                inner[p.var] = Term(member)
                out.extend(_expand_fact(p.body, inner, skolems))
            return out
        sk = skolems.fresh(p.domain)
        inner = dict(binding)
        inner[p.var] = Term(sk)
        return _expand_fact(p.body, inner, skolems)
    term = substitute(p, binding)
    if not is_ground(term):
        raise GroundingError(f"fact did not ground: {render(term)}")
    return [term]


def _expand_lhs(p: Pattern, binding: dict, skolems: SkolemEnv) -> list[tuple[list[Pattern], dict]]:
    """Alternatives for one LHS conjunct: (patterns, existential bindings)."""
    if isinstance(p, Quant):
        if p.domain not in skolems.domains:
            raise GroundingError(f"quantifier over undeclared domain {p.domain}")
        members = list(skolems.domains[p.domain])
        if p.kind == "forall":
            # conjunction over members: cross-combine their alternatives
            combos: list[tuple[list[Pattern], dict]] = [([], {})]
            for member in members:
                inner = dict(binding)
                inner[p.var] = Term(member)
                branch = _expand_lhs(p.body, inner, skolems)
                combos = [
                    (pats + bpats, {**ex, **bex})
                    for pats, ex in combos
                    for bpats, bex in branch
                ]
            return combos
        alts: list[tuple[list[Pattern], dict]] = []
        for member in members:
            inner = dict(binding)
            inner[p.var] = Term(member)
            for pats, ex in _expand_lhs(p.body, inner, skolems):
                alts.append((pats, {p.var: Term(member), **ex}))
        return alts
    return [([_apply_binding(p, binding)], {})]


def _apply_binding(p: Pattern, binding: dict) -> Pattern:
    """Substitute bound variables/metavariables, leaving the rest symbolic."""
    if isinstance(p, Var):
        value = binding.get(p.name)
        return value if isinstance(value, Term) else p
    if isinstance(p, MetaApp):
        head = binding.get(p.meta)
        arg = _apply_binding(p.arg, binding)
        if isinstance(head, str):
            return Term(head, (arg,))
        return MetaApp(p.meta, arg)
    if isinstance(p, Term):
        if not p.args:
            return p
        return Term(p.head, tuple(_apply_binding(a, binding) for a in p.args))
    if isinstance(p, Quant):
        return Quant(p.kind, p.var, p.domain, _apply_binding(p.body, binding))
    raise TypeError(f"not a pattern: {p!r}")


def _expand_rhs(p: Pattern, binding: dict, skolems: SkolemEnv) -> list[Pattern]:
    if isinstance(p, Quant):
        if p.domain not in skolems.domains:
            raise GroundingError(f"quantifier over undeclared domain {p.domain}")
        if p.kind == "forall":
            out: list[Pattern] = []
            for member in list(skolems.domains[p.domain]):
                inner = dict(binding)
                inner[p.var] = Term(member)
                out.extend(_expand_rhs(p.body, inner, skolems))
            return out
        if p.var in binding:
            return _expand_rhs(p.body, binding, skolems)
        # unbound witness: kept for per-firing skolemization
        return [Quant("exists", p.var, p.domain, _apply_binding(p.body, binding))]
    return [_apply_binding(p, binding)]


def ground(program: Program, config: EngineConfig | None = None) -> GroundProgram:
    """Expand a program into ground facts plus quantifier-free rule variants."""
    config = config or EngineConfig()
    skolems = SkolemEnv(program.domain_table())
    wm = WorkingMemory(mode=config.mode)
    lattice = DerivationLattice()

    # Existential facts first so their skolem constants are visible to every
    # universal expansion; then the rest, both in file order.
    ordered = [f for f in program.facts if _has_exists(f.pattern)]
    ordered += [f for f in program.facts if not _has_exists(f.pattern)]
    for fact in ordered:
        for term in _expand_fact(fact.pattern, {}, skolems):
            if len(wm) >= config.max_terms and term not in wm:
                raise BudgetError(f"fact expansion exceeded max_terms={config.max_terms}")
            wm.insert(term, fact.count)
            lattice.add_node(term)

    unary_heads = program.unary_heads()
    rules: list[GroundRule] = []
    for rule in program.rules:
        metas = set()
        for p in rule.lhs + rule.rhs:
            metas |= pattern_metavars(p)
        assignments: list[dict] = [{}]
        for meta in sorted(metas):
            assignments = [{**a, meta: head} for a in assignments for head in unary_heads]
        for assignment in assignments:
            # cross-product of per-conjunct alternatives
            variants: list[tuple[list[Pattern], dict]] = [([], {})]
            for conjunct in rule.lhs:
                branch = _expand_lhs(conjunct, dict(assignment), skolems)
                variants = [
                    (pats + bpats, {**ex, **bex})
                    for pats, ex in variants
                    for bpats, bex in branch
                ]
                if len(variants) > config.max_terms:
                    raise BudgetError(f"rule {rule.id} expansion exceeded max_terms={config.max_terms}")
            for pats, exbinds in variants:
                rhs_binding = {**assignment, **exbinds}
                rhs: list[Pattern] = []
                for conjunct in rule.rhs:
                    rhs.extend(_expand_rhs(conjunct, rhs_binding, skolems))
                tags = {**{k: v for k, v in sorted(assignment.items())}}
                tags.update({k: v.head if isinstance(v, Term) else v for k, v in sorted(exbinds.items())})
                suffix = "{" + ",".join(f"{k}={v}" for k, v in tags.items()) + "}" if tags else ""
                rules.append(
                    GroundRule(
                        id=rule.id + suffix,
                        lhs=tuple(pats),
                        rhs=tuple(rhs),
                        alpha=rule.alpha,
                        beta=rule.beta,
                        origin=rule.id,
                    )
                )
        if len(rules) > config.max_terms:
            raise BudgetError(f"ground rule set exceeded max_terms={config.max_terms}")
    if config.mode == "weighted":
        for gr in rules:
            if float(gr.beta) != int(gr.beta):
                raise GroundingError(f"rule {gr.origin}: beta must be an integer multiplicity in weighted mode")
    return GroundProgram(rules, wm, lattice, skolems)


def _candidates(pattern: Pattern, snapshot: list[Term]) -> list[Term]:
    if isinstance(pattern, Term):
        return [t for t in snapshot if t.head == pattern.head and len(t.args) == len(pattern.args)]
    return snapshot


def _match_rule(rule: GroundRule, snapshot: list[Term], domains: dict[str, list[str]]) -> list[tuple[dict, tuple[Term, ...]]]:
    """All distinct bindings of the rule's LHS against the snapshot, in order."""
    results: list[tuple[dict, tuple[Term, ...]]] = []
    seen: set[tuple] = set()
    pools = [_candidates(p, snapshot) for p in rule.lhs]

    def go(i: int, binding: dict, premises: tuple[Term, ...]):
        if i == len(rule.lhs):
            key = tuple(sorted((k, v) for k, v in binding.items()))
            if key not in seen:
                seen.add(key)
                results.append((binding, premises))
            return
        for term in pools[i]:
            extended = match(rule.lhs[i], term, binding, domains)
            if extended is not None:
                go(i + 1, extended, premises + (term,))

    go(0, {}, ())
    return results


class _EngineState:
    """Cross-pass state: weighted-mode refraction and per-firing skolems."""

    def __init__(self, skolems: SkolemEnv):
        self.fired: set[tuple] = set()
        self.skolems = skolems
        self.skolem_memo: dict[tuple, Term] = {}

    def binding_key(self, rule_id: str, binding: dict) -> tuple:
        return (rule_id, tuple(sorted((k, str(v)) for k, v in binding.items())))


def _instantiate_rhs(template: Pattern, binding: dict, state: _EngineState, firing_key: tuple, pos: int) -> Term:
    if isinstance(template, Quant):
        memo_key = firing_key + (pos,)
        witness = state.skolem_memo.get(memo_key)
        if witness is None:
            witness = Term(state.skolems.fresh(template.domain))
            state.skolem_memo[memo_key] = witness
        inner = dict(binding)
        inner[template.var] = witness
        return substitute(template.body, inner)
    return substitute(template, binding)


def step(
    wm: WorkingMemory,
    rules: list[GroundRule],
    lattice: DerivationLattice,
    state: _EngineState | None = None,
    max_terms: int = 100_000,
) -> list[tuple[Term, int]]:
    """Fire every rule against the pass-start snapshot; return new derivations.

    Classical mode produces each absent conclusion once (re-derivations only
    add lattice edges); weighted mode fires each (rule, binding) at most once,
    when the number of distinct LHS instance tuples reaches the rule's alpha,
    inserting each conclusion with multiplicity beta.
    """
    if state is None:
        state = _EngineState(SkolemEnv({}))
    snapshot = wm.terms()
    counts = {t: wm.count(t) for t in snapshot}
    domains = state.skolems.domains
    news: list[tuple[Term, int]] = []
    weighted = wm.mode == "weighted"
    for rule in rules:
        matches = _match_rule(rule, snapshot, domains)
        if not matches:
            continue
        if weighted:
            # distinct instance tuples: pick one occurrence per conjunct
            tuple_count = 0
            for binding, premises in matches:
                product = 1
                for premise in premises:
                    product *= counts[premise]
                tuple_count += product
            if tuple_count < rule.alpha:
                continue
        for binding, premises in matches:
            firing_key = state.binding_key(rule.id, binding)
            if weighted:
                if firing_key in state.fired:
                    continue
                state.fired.add(firing_key)
                if rule.beta == 0:
                    continue
            for pos, template in enumerate(rule.rhs):
                conclusion = _instantiate_rhs(template, binding, state, firing_key, pos)
                fresh = conclusion not in wm
                if fresh and len(wm) >= max_terms:
                    raise BudgetError(f"working memory exceeded max_terms={max_terms}")
                if weighted:
                    wm.insert(conclusion, int(rule.beta))
                    news.append((conclusion, int(rule.beta)))
                elif fresh:
                    wm.insert(conclusion, 1)
                    news.append((conclusion, 1))
                nid = lattice.add_node(conclusion)
                premise_ids = tuple(lattice.add_node(p) for p in premises)
                lattice.add_edge(premise_ids, rule.id, nid)
    return news


def find_contradiction(wm: WorkingMemory, lattice: DerivationLattice) -> tuple[Term, Term] | None:
    """First (term, negated-term) pair, else the premises behind a bare ``false``."""
    for term in wm.terms():
        if term.head == "not" and len(term.args) == 1:
            positive = term.args[0]
            if isinstance(positive, Term) and positive in wm:
                return (positive, term)
    false_atom = Term("false")
    if false_atom in wm:
        nid = lattice.node_id(false_atom)
        edge = lattice.first_edge(nid) if nid is not None else None
        if edge and len(edge.premises) >= 2:
            return (lattice.term(edge.premises[0]), lattice.term(edge.premises[1]))
        return (false_atom, false_atom)
    return None


@dataclass
class SaturationResult:
    wm: WorkingMemory
    lattice: DerivationLattice
    verdict: Verdict
    rules: list[GroundRule] = field(default_factory=list)


def saturate(program: Program, config: EngineConfig | None = None) -> SaturationResult:
    """Run passes to a fixpoint, a contradiction, or a budget limit."""
    config = config or EngineConfig()
    try:
        gp = ground(program, config)
    except BudgetError:
        empty = WorkingMemory(mode=config.mode)
        return SaturationResult(empty, DerivationLattice(), Verdict(VerdictKind.BUDGET_EXHAUSTED, None, 0), [])
    wm, lattice = gp.wm, gp.lattice
    state = _EngineState(gp.skolems)

    if config.contradiction_halts:
        witness = find_contradiction(wm, lattice)
        if witness is not None:
            return SaturationResult(wm, lattice, Verdict(VerdictKind.CONTRADICTION, witness, 0), gp.rules)

    passes_used = 0
    for _ in range(config.max_passes):
        try:
            news = step(wm, gp.rules, lattice, state, config.max_terms)
        except BudgetError:
            return SaturationResult(wm, lattice, Verdict(VerdictKind.BUDGET_EXHAUSTED, None, passes_used + 1), gp.rules)
        if not news:
            witness = find_contradiction(wm, lattice)
            if witness is not None:
                return SaturationResult(wm, lattice, Verdict(VerdictKind.CONTRADICTION, witness, passes_used), gp.rules)
            return SaturationResult(wm, lattice, Verdict(VerdictKind.SATURATED, None, passes_used), gp.rules)
        passes_used += 1
        if config.contradiction_halts:
            witness = find_contradiction(wm, lattice)
            if witness is not None:
                return SaturationResult(wm, lattice, Verdict(VerdictKind.CONTRADICTION, witness, passes_used), gp.rules)
    witness = find_contradiction(wm, lattice)
    if witness is not None:
        return SaturationResult(wm, lattice, Verdict(VerdictKind.CONTRADICTION, witness, passes_used), gp.rules)
    return SaturationResult(wm, lattice, Verdict(VerdictKind.BUDGET_EXHAUSTED, None, passes_used), gp.rules)


@dataclass
class Explanation:
    """Ancestor-closed derivation subgraph for one goal term."""

    goal: int
    nodes: list[tuple[int, Term]]  # topologically ordered (by node id)
    edges: list

    def leaves(self) -> list[Term]:
        targets = {e.conclusion for e in self.edges}
        return [term for nid, term in self.nodes if nid not in targets]


def explain(lattice: DerivationLattice, goal: Term) -> Explanation:
    """Minimal ancestor-closed subgraph that derives ``goal``.

    Follows each node's first (creating) derivation, so leaves are always
    axioms of the run.
    """
    goal_id = lattice.node_id(goal)
    if goal_id is None:
        raise NotDerivedError(f"term was never derived: {render(goal)}")
    keep: set[int] = set()
    edges = []
    stack = [goal_id]
    while stack:
        nid = stack.pop()
        if nid in keep:
            continue
        keep.add(nid)
        edge = lattice.first_edge(nid)
        if edge is not None:
            edges.append(edge)
            stack.extend(edge.premises)
    nodes = [(nid, lattice.term(nid)) for nid in sorted(keep)]
    edges.sort(key=lambda e: e.conclusion)
    return Explanation(goal_id, nodes, edges)


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(graph: DerivationLattice | Explanation, title: str = "derivation") -> str:
    """Graphviz rendering of a full lattice or an explanation subgraph."""
    if isinstance(graph, Explanation):
        nodes = graph.nodes
        edges = graph.edges
        axiom_ids = {nid for nid, _ in nodes} - {e.conclusion for e in edges}
    else:
        nodes = graph.nodes()
        edges = graph.edges
        axiom_ids = set(graph.axioms())
    lines = [f'digraph "{_dot_escape(title)}" {{', "  rankdir=BT;"]
    for nid, term in nodes:
        shape = "box" if nid in axiom_ids else "ellipse"
        lines.append(f'  n{nid} [label="{_dot_escape(render(term))}", shape={shape}];')
    for e in edges:
        for p in e.premises:
            lines.append(f'  n{p} -> n{e.conclusion} [label="{_dot_escape(e.rule_id)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def result_to_json(result: SaturationResult) -> str:
    """Stable JSON for a saturation run: verdict plus the working memory."""
    witness = None
    if result.verdict.witness is not None:
        witness = [render(result.verdict.witness[0]), render(result.verdict.witness[1])]
    payload = {
        "verdict": {
            "kind": result.verdict.kind.value,
            "witness": witness,
            "passes_used": result.verdict.passes_used,
        },
        "working_memory": [
            {"term": render(term), "count": count, "index": idx} for term, count, idx in result.wm.items()
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
