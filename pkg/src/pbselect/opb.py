"""Pseudo-Boolean instance model and OPB competition-format support.

The text format, as used by the pseudo-Boolean competitions:

    * #variable= 4 #constraint= 2
    min: +1 x1 +2 x2 x3 ;
    +1 x1 +1 ~x2 >= 1 ;
    +3 x2 x4 = 3 ;

Lines whose first non-blank character is ``*`` are comments; the first
comment matching the standard header shape declares the variable and
constraint counts.  An optional objective line starts with ``min:`` and is
minimized.  Each term is an integer coefficient followed by one or more
literals (``x<i>`` or its negation ``~x<i>``), and every statement ends
with ``;``.  Relations ``>=``, ``<=`` and ``=`` are accepted on input;
``<=`` is rewritten to ``>=`` by negating both sides, so stored
constraints only ever use ``>=`` and ``=``.

Coefficients and right-hand sides are Python ints, so arbitrary-precision
("BIGINT") instances round-trip without truncation.  All model types are
immutable and safe to share across threads.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

GEQ = ">="
EQ = "="

_COEFF_RE = re.compile(r"[+-]?\d+\Z")
_LITERAL_RE = re.compile(r"(~?)x(\d+)\Z")
_HEADER_RE = re.compile(r"\*\s*#variable=\s*(\d+)\s+#constraint=\s*(\d+)")


class OpbParseError(ValueError):
    """Raised for malformed OPB input, with 1-based line/column position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.reason = message
        self.line = line
        self.column = column


class MissingObjectiveError(ValueError):
    """The operation needs an objective but the instance has none."""


@dataclass(frozen=True)
class Term:
    """A signed coefficient times a product of literals.

    ``literals`` is a tuple of ``(variable index, negated)`` pairs sorted by
    strictly increasing variable index; a negated literal evaluates to
    ``1 - x``.  The coefficient is never zero (zero-coefficient terms are
    dropped during parsing).
    """

    coefficient: int
    literals: tuple[tuple[int, bool], ...]

    def __post_init__(self):
        if self.coefficient == 0:
            raise ValueError("term coefficient must be nonzero")
        if not self.literals:
            raise ValueError("term must have at least one literal")
        indices = [v for v, _ in self.literals]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("term literals must have strictly increasing variable indices")
        if any(v < 1 for v in indices):
            raise ValueError("variable indices must be >= 1")

    @property
    def degree(self) -> int:
        return len(self.literals)

    def value(self, assignment: Sequence[bool]) -> int:
        """Evaluate under a 0-based assignment (``assignment[i-1]`` is x_i)."""
        for var, negated in self.literals:
            bit = bool(assignment[var - 1])
            if negated:
                bit = not bit
            if not bit:
                return 0
        return self.coefficient


@dataclass(frozen=True)
class Constraint:
    terms: tuple[Term, ...]
    relation: str  # GEQ or EQ
    rhs: int

    def __post_init__(self):
        if self.relation not in (GEQ, EQ):
            raise ValueError(f"unsupported relation {self.relation!r}")

    def satisfied(self, assignment: Sequence[bool]) -> bool:
        lhs = sum(t.value(assignment) for t in self.terms)
        return lhs >= self.rhs if self.relation == GEQ else lhs == self.rhs


@dataclass(frozen=True)
class Instance:
    """A parsed pseudo-Boolean optimization instance.

    ``objective`` is ``None`` when the document has no ``min:`` line; an
    empty tuple means an explicit but empty objective.  ``num_variables``
    comes from the header when present, otherwise it is the largest index
    used.  ``source_name`` and ``benchmark_id`` are identity metadata and
    do not participate in equality.
    """

    objective: tuple[Term, ...] | None
    constraints: tuple[Constraint, ...]
    num_variables: int
    declared_constraints: int
    source_name: str = field(default="", compare=False)
    benchmark_id: str = field(default="", compare=False)

    def __post_init__(self):
        used = [v for t in self.all_terms() for v, _ in t.literals]
        if used and max(used) > self.num_variables:
            raise ValueError(
                f"variable x{max(used)} exceeds declared count {self.num_variables}"
            )

    def all_terms(self):
        """Objective terms first, then constraint terms in document order."""
        if self.objective is not None:
            yield from self.objective
        for c in self.constraints:
            yield from c.terms

    def objective_value(self, assignment: Sequence[bool]) -> int:
        if self.objective is None:
            raise MissingObjectiveError(f"instance {self.source_name!r} has no objective")
        return sum(t.value(assignment) for t in self.objective)

    def satisfied(self, assignment: Sequence[bool]) -> bool:
        return all(c.satisfied(assignment) for c in self.constraints)


def is_linear(inst: Instance) -> bool:
    """True iff no term (objective or constraints) has two or more literals."""
    return all(t.degree == 1 for t in inst.all_terms())


@dataclass
class _Token:
    text: str
    line: int
    column: int


def _tokenize(text: str):
    """Yield statement token lists; ``;`` terminates a statement.

    Also returns the header counts, if a standard header comment was seen.
    Raises on a trailing unterminated statement.
    """
    header: tuple[int, int] | None = None
    pending: list[_Token] = []
    statements: list[list[_Token]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.lstrip()
        if not stripped:
            continue
        if stripped.startswith("*"):
            if header is None:
                m = _HEADER_RE.match(stripped)
                if m:
                    header = (int(m.group(1)), int(m.group(2)))
            continue
        for m in re.finditer(r"\S+", raw):
            tok, col = m.group(), m.start() + 1
            if tok != ";" and tok.endswith(";"):
                pending.append(_Token(tok[:-1], lineno, col))
                tok, col = ";", col + len(tok) - 1
            if tok == ";":
                if not pending:
                    raise OpbParseError("empty statement", lineno, col)
                statements.append(pending)
                pending = []
            else:
                pending.append(_Token(tok, lineno, col))
    if pending:
        last = pending[-1]
        raise OpbParseError(
            "statement missing ';' terminator", last.line, last.column
        )
    return statements, header


class _TermParser:
    """Parses term lists and tracks the largest variable index seen."""

    def __init__(self):
        self.max_var = 0
        self.max_var_token: _Token | None = None

    def parse(self, tokens: list[_Token], where: _Token) -> tuple[Term, ...]:
        terms: list[Term] = []
        raw_count = 0
        i = 0
        while i < len(tokens):
            head = tokens[i]
            if not _COEFF_RE.match(head.text):
                raise OpbParseError(
                    f"expected coefficient, got {head.text!r}", head.line, head.column
                )
            coeff = int(head.text)
            i += 1
            lits: list[tuple[int, bool]] = []
            seen: set[int] = set()
            while i < len(tokens):
                m = _LITERAL_RE.match(tokens[i].text)
                if not m:
                    break
                var = int(m.group(2))
                if var < 1:
                    raise OpbParseError(
                        "variable index must be >= 1", tokens[i].line, tokens[i].column
                    )
                if var in seen:
                    raise OpbParseError(
                        f"variable x{var} appears twice in one term",
                        tokens[i].line,
                        tokens[i].column,
                    )
                seen.add(var)
                if var > self.max_var:
                    self.max_var = var
                    self.max_var_token = tokens[i]
                lits.append((var, m.group(1) == "~"))
                i += 1
            if not lits:
                if i < len(tokens):
                    bad = tokens[i]
                    raise OpbParseError(
                        f"expected literal, got {bad.text!r}", bad.line, bad.column
                    )
                raise OpbParseError(
                    f"term with coefficient {head.text} has no literals",
                    head.line,
                    head.column,
                )
            raw_count += 1
            if coeff != 0:  # zero-coefficient terms are normalized away
                terms.append(Term(coeff, tuple(sorted(lits))))
        if raw_count == 0:
            raise OpbParseError("statement has no terms", where.line, where.column)
        return tuple(terms)


def parse_opb(text: str | bytes, source_name: str = "", benchmark_id: str = "") -> Instance:
    """Parse an OPB document into a validated :class:`Instance`."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    statements, header = _tokenize(text)

    tp = _TermParser()
    objective: tuple[Term, ...] | None = None
    constraints: list[Constraint] = []
    for stmt in statements:
        first = stmt[0]
        if first.text == "min:":
            if objective is not None:
                raise OpbParseError("multiple objective lines", first.line, first.column)
            if len(stmt) > 1:
                objective = tp.parse(stmt[1:], first)
            else:
                objective = ()
            continue
        rel_positions = [
            i for i, t in enumerate(stmt) if t.text in (">=", "<=", "=", ">", "<")
        ]
        if not rel_positions:
            raise OpbParseError("constraint has no relation", first.line, first.column)
        if len(rel_positions) > 1:
            bad = stmt[rel_positions[1]]
            raise OpbParseError("multiple relations in one constraint", bad.line, bad.column)
        ri = rel_positions[0]
        rel_tok = stmt[ri]
        if rel_tok.text in (">", "<"):
            raise OpbParseError(
                f"relation {rel_tok.text!r} not allowed (use >=, <= or =)",
                rel_tok.line,
                rel_tok.column,
            )
        if ri != len(stmt) - 2:
            raise OpbParseError(
                "expected a single right-hand side after the relation",
                rel_tok.line,
                rel_tok.column,
            )
        rhs_tok = stmt[-1]
        if not _COEFF_RE.match(rhs_tok.text):
            raise OpbParseError(
                f"malformed right-hand side {rhs_tok.text!r}", rhs_tok.line, rhs_tok.column
            )
        rhs = int(rhs_tok.text)
        terms = tp.parse(stmt[:ri], first)
        if rel_tok.text == "<=":
            terms = tuple(Term(-t.coefficient, t.literals) for t in terms)
            rhs = -rhs
            relation = GEQ
        else:
            relation = rel_tok.text
        constraints.append(Constraint(terms, relation, rhs))

    if header is not None:
        num_vars, declared_cons = header
        if tp.max_var > num_vars:
            bad = tp.max_var_token
            raise OpbParseError(
                f"undeclared variable x{tp.max_var} (header declares {num_vars})",
                bad.line,
                bad.column,
            )
    else:
        num_vars, declared_cons = tp.max_var, len(constraints)

    return Instance(
        objective=objective,
        constraints=tuple(constraints),
        num_variables=num_vars,
        declared_constraints=declared_cons,
        source_name=source_name,
        benchmark_id=benchmark_id,
    )


def parse_opb_file(path: str | Path, benchmark_id: str | None = None) -> Instance:
    """Parse an OPB file; the benchmark defaults to the parent directory name."""
    path = Path(path)
    if benchmark_id is None:
        benchmark_id = path.parent.name or "default"
    return parse_opb(path.read_text(), source_name=str(path), benchmark_id=benchmark_id)


def _literal_str(lit: tuple[int, bool]) -> str:
    var, negated = lit
    return f"~x{var}" if negated else f"x{var}"


def _term_str(term: Term) -> str:
    return f"{term.coefficient:+d} " + " ".join(_literal_str(l) for l in term.literals)


def serialize(inst: Instance) -> str:
    """Canonical OPB text: header, objective, one constraint per line."""
    lines = [f"* #variable= {inst.num_variables} #constraint= {inst.declared_constraints}"]
    if inst.objective is not None:
        body = " ".join(_term_str(t) for t in inst.objective)
        lines.append(f"min: {body} ;" if body else "min: ;")
    for c in inst.constraints:
        body = " ".join(_term_str(t) for t in c.terms)
        lines.append(f"{body} {c.relation} {c.rhs} ;")
    return "\n".join(lines) + "\n"


def linearize(inst: Instance) -> Instance:
    """Replace every product of k >= 2 literals with a fresh variable.

    Each distinct product gets one auxiliary variable (shared across all
    occurrences, numbered n+1, n+2, ... in first-occurrence order) plus the
    usual AND encoding: ``y <= l_i`` for each of the k literals and
    ``y >= sum(l_i) - (k - 1)``, appended after the original constraints.
    Linear instances are returned unchanged, which makes the operation
    idempotent.
    """
    if is_linear(inst):
        return inst

    aux: dict[tuple[tuple[int, bool], ...], int] = {}
    next_var = inst.num_variables

    def rewrite(term: Term) -> Term:
        nonlocal next_var
        if term.degree == 1:
            return term
        var = aux.get(term.literals)
        if var is None:
            next_var += 1
            var = next_var
            aux[term.literals] = var
        return Term(term.coefficient, ((var, False),))

    objective = None
    if inst.objective is not None:
        objective = tuple(rewrite(t) for t in inst.objective)
    constraints = [
        Constraint(tuple(rewrite(t) for t in c.terms), c.relation, c.rhs)
        for c in inst.constraints
    ]
    for literals, var in aux.items():
        k = len(literals)
        for lit in literals:
            constraints.append(
                Constraint((Term(1, (lit,)), Term(-1, ((var, False),))), GEQ, 0)
            )
        lower = (Term(1, ((var, False),)),) + tuple(Term(-1, (lit,)) for lit in literals)
        constraints.append(Constraint(lower, GEQ, 1 - k))

    return Instance(
        objective=objective,
        constraints=tuple(constraints),
        num_variables=next_var,
        declared_constraints=len(constraints),
        source_name=inst.source_name,
        benchmark_id=inst.benchmark_id,
    )
