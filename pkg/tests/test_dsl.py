"""Grammar coverage, diagnostics, recovery and round-trip for the rule language."""

import pytest

from rulebench.bundles import BUNDLED, bundled_text
from rulebench.dsl import parse_program, print_program
from rulebench.terms import MetaApp, Quant, Term, Var


def t(head, *args):
    return Term(head, tuple(args))


class TestParseBasics:
    def test_deontic_rule(self):
        rule = parse_program("O(X) => not P(not X).").program.rules[0]
        assert rule.lhs == (t("O", Var("X")),)
        assert rule.rhs == (t("not", t("P", t("not", Var("X")))),)
        assert rule.alpha == 1 and rule.beta == 1

    def test_empty_program(self):
        result = parse_program("")
        assert result.ok
        assert result.program.domains == ()
        assert result.program.facts == ()
        assert result.program.rules == ()

    def test_comments_only(self):
        assert parse_program("# nothing here\n   # more\n").ok

    def test_weighted_rule(self):
        rule = parse_program("2 * edge(X, Y) => 3 * path(X, Y).").program.rules[0]
        assert rule.alpha == 2 and rule.beta == 3
        # survives printing and re-parsing
        text = print_program(parse_program("2 * edge(X, Y) => 3 * path(X, Y).").program)
        again = parse_program(text).program.rules[0]
        assert again.alpha == 2 and again.beta == 3

    def test_fractional_rule_weights(self):
        rule = parse_program("0.25 * f(X) => 0.5 * g(X).").program.rules[0]
        assert rule.alpha == 0.25 and rule.beta == 0.5

    def test_fact_multiplicity(self):
        fact = parse_program("3 * hit(a).").program.facts[0]
        assert fact.count == 3

    def test_domain_declaration(self):
        domain = parse_program("domain SMS = {msg1, msg2}.").program.domains[0]
        assert domain.name == "SMS" and domain.members == ("msg1", "msg2")

    def test_quantified_fact(self):
        fact = parse_program("domain D = {a}.\nforall X in D . forall Y in D . p(X, Y).").program.facts[0]
        assert fact.pattern == Quant("forall", "X", "D", Quant("forall", "Y", "D", t("p", Var("X"), Var("Y"))))

    def test_metavariable(self):
        source = "domain K = {a}.\ndomain Q = {b}.\nforall X in K . $A(X) and exists Y in Q . p(Y) => $A(Y)."
        rule = parse_program(source).program.rules[0]
        assert rule.lhs[0] == Quant("forall", "X", "K", MetaApp("A", Var("X")))

    def test_case_classification(self):
        # ALL-CAPS bare = variable; anything applied = head symbol
        fact = parse_program("Confidential(m1).").program.facts[0]
        assert fact.pattern == t("Confidential", t("m1"))
        rule = parse_program("Access(APP, M) => Breach(M).").program.rules[0]
        assert rule.lhs[0] == t("Access", Var("APP"), Var("M"))

    def test_conjunction_binds_outside_quantifier(self):
        source = "domain D = {a}.\nforall X in D . p(X) and q(Y) => r(Y)."
        rule = parse_program(source).program.rules[0]
        assert len(rule.lhs) == 2
        assert rule.lhs[1] == t("q", Var("Y"))


class TestPrintRoundTrip:
    @pytest.mark.parametrize("name", [n for n in BUNDLED if n.endswith(".karb")])
    def test_bundled_round_trip(self, name):
        program = parse_program(bundled_text(name)).program
        assert parse_program(print_program(program)).program == program

    def test_quantified_fact_prints_unchanged(self):
        source = "domain SMS = {msg1}.\nexists M in SMS . O(Confidential(M)).\n"
        program = parse_program(source).program
        text = print_program(program)
        assert "exists M in SMS . O(Confidential(M))." in text
        assert parse_program(text).program == program

    def test_empty_program_prints_empty(self):
        assert print_program(parse_program("").program) == ""

    def test_custom_rule_id_survives(self):
        source = "#@ rule CRUL1\nf(X) => g(X).\n"
        program = parse_program(source).program
        assert program.rules[0].id == "CRUL1"
        assert parse_program(print_program(program)).program.rules[0].id == "CRUL1"

    def test_determinism(self):
        source = bundled_text("sms_banking.karb")
        first = parse_program(source)
        second = parse_program(source)
        assert first.program == second.program
        assert first.diagnostics == second.diagnostics


class TestDiagnostics:
    def test_syntax_error_located(self):
        result = parse_program("f(a.\n")
        assert not result.ok
        diag = result.diagnostics[0]
        assert diag.severity == "error" and diag.line == 1

    def test_recovery_keeps_other_statements(self):
        result = parse_program("f(a).\ng(((.\nh(b).\n")
        assert not result.ok
        assert [f.pattern for f in result.program.facts] == [t("f", t("a")), t("h", t("b"))]
        assert len(result.diagnostics) >= 1

    def test_unknown_domain(self):
        result = parse_program("forall X in Nope . p(X).")
        assert not result.ok
        assert any("undeclared domain" in d.message for d in result.diagnostics)

    def test_unbound_rhs_variable(self):
        result = parse_program("p(X) => q(Y).")
        assert not result.ok
        assert any("not bound" in d.message for d in result.diagnostics)

    def test_fact_must_be_ground(self):
        result = parse_program("p(X).")
        assert not result.ok
        assert any("not ground" in d.message for d in result.diagnostics)

    def test_fact_cannot_hold_metavariable(self):
        result = parse_program("$A(a).")
        assert not result.ok

    def test_fractional_fact_multiplicity_rejected(self):
        result = parse_program("2.5 * p(a).")
        assert not result.ok

    def test_conjunction_fact_rejected(self):
        result = parse_program("p(a) and q(b).")
        assert not result.ok

    def test_rhs_metavariable_needs_lhs(self):
        result = parse_program("p(X) => $A(X).")
        assert not result.ok
        assert any("metavariable" in d.message for d in result.diagnostics)

    def test_duplicate_rule_ids(self):
        source = "#@ rule SAME\nf(X) => g(X).\n#@ rule SAME\nh(X) => i(X).\n"
        result = parse_program(source)
        assert any("duplicate rule id" in d.message for d in result.diagnostics)

    def test_format_contains_location(self):
        result = parse_program("f(a.\n")
        formatted = result.diagnostics[0].format("prog.karb")
        assert formatted.startswith("prog.karb:1:")
        assert ": error: " in formatted

    def test_reserved_word_not_a_symbol(self):
        assert not parse_program("in(a).").ok

    def test_unexpected_character(self):
        result = parse_program("f(a) ! .")
        assert not result.ok


class TestModelPragmas:
    def test_zoo_model(self):
        program = parse_program(bundled_text("zoo_violation.karb")).program
        model = program.model
        assert [c.name for c in model.concerns] == ["Safety"]
        assert model.requirements[0].name == "CR1"
        assert {l.rule_id for l in model.rule_links} == {"CRUL1", "CRUL2"}
        assert {c.name: c.symbol for c in model.concepts}["cage"] == "CE"

    def test_unlinked_rule_rejected_when_model_present(self):
        source = (
            '#@ concern Safety\n#@ requirement CR1 "text" concern=Safety\n'
            "#@ rule CRUL1 requirement=CR1\nf(X) => g(X).\nh(X) => i(X).\n"
        )
        result = parse_program(source)
        assert any("exactly one requirement" in d.message for d in result.diagnostics)

    def test_no_pragmas_means_no_model(self):
        assert parse_program("f(a).").program.model is None

    def test_unknown_pragma_flagged(self):
        result = parse_program("#@ banana split\nf(a).")
        assert any("unknown pragma" in d.message for d in result.diagnostics)


def test_unary_heads_excludes_wrappers_and_binaries():
    source = "domain D = {a}.\nO(Confidential(a)).\nAccess(a, a).\nBreach(a).\n"
    assert parse_program(source).program.unary_heads() == ["Breach", "Confidential"]
