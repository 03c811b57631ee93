"""Resource-bounded models and the agent-logic formula language.

A model is a concurrent game structure whose actions carry an integer
effect on a single shared resource pool.  Negative effects consume from
the pool, positive effects produce into it.  Propositions are labelled
over (state, endowment) pairs through small endowment predicates, so a
labelling denotes a regular set of configurations.

Text formats live here too: the line-oriented ``.rbm`` model format and
the formula grammar (``p``, ``!f``, ``f & g``, ``f | g``, ``<<a,b>>X f``,
``<<a,b>>G f``, ``<<a,b>>(f U g)``, ``<<a,b>>F f``).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

TRUE_PROP = "$true"
FALSE_PROP = "$false"


class RalError(Exception):
    """Base class for everything this package raises on purpose."""


class RbmSyntaxError(RalError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {msg}" if line else msg)


class RbmValidationError(RalError):
    pass


class FormulaSyntaxError(RalError):
    def __init__(self, msg: str, col: int = 0):
        self.col = col
        super().__init__(f"col {col}: {msg}" if col else msg)


class CheckError(RalError):
    pass


# ---------------------------------------------------------------------------
# Endowment predicates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EndowmentPredicate:
    """One atom of a labelling: ``any``, ``eta==k``, ``eta>=k``, ``eta<k``
    or ``eta%m==c``."""

    kind: str  # "any" | "eq" | "ge" | "lt" | "mod"
    k: int = 0
    m: int = 1

    def holds(self, eta: int) -> bool:
        if self.kind == "any":
            return True
        if self.kind == "eq":
            return eta == self.k
        if self.kind == "ge":
            return eta >= self.k
        if self.kind == "lt":
            return eta < self.k
        if self.kind == "mod":
            return eta % self.m == self.k
        raise ValueError(f"unknown predicate kind {self.kind!r}")

    def text(self) -> str:
        if self.kind == "any":
            return "any"
        if self.kind == "eq":
            return f"eta=={self.k}"
        if self.kind == "ge":
            return f"eta>={self.k}"
        if self.kind == "lt":
            return f"eta<{self.k}"
        return f"eta%{self.m}=={self.k}"

    # Every predicate is an ultimately periodic subset of the naturals.
    def bitvector(self) -> tuple[int, int, tuple[bool, ...]]:
        """Return (threshold, period, bits) with bits of length threshold+period."""
        if self.kind == "any":
            return 0, 1, (True,)
        if self.kind == "eq":
            return self.k + 1, 1, tuple(i == self.k for i in range(self.k + 1)) + (False,)
        if self.kind == "ge":
            return self.k, 1, tuple([False] * self.k) + (True,)
        if self.kind == "lt":
            return self.k, 1, tuple([True] * self.k) + (False,)
        return 0, self.m, tuple(i % self.m == self.k for i in range(self.m))


def _lcm(a: int, b: int) -> int:
    import math

    return a * b // math.gcd(a, b)


def predicate_union_bits(preds: Iterable[EndowmentPredicate]) -> tuple[int, int, tuple[bool, ...]]:
    """Union of predicates as one ultimately periodic bitvector."""
    preds = list(preds)
    if not preds:
        return 0, 1, (False,)
    parts = [p.bitvector() for p in preds]
    thr = max(t for t, _, _ in parts)
    per = 1
    for _, length, _ in parts:
        per = _lcm(per, length)

    def bit_at(part, i):
        t, length, bits = part
        return bits[i] if i < t else bits[t + (i - t) % length]

    bits = tuple(any(bit_at(p, i) for p in parts) for i in range(thr + per))
    return thr, per, bits


def bits_at(vec: tuple[int, int, tuple[bool, ...]], eta: int) -> bool:
    thr, per, bits = vec
    return bits[eta] if eta < thr else bits[thr + (eta - thr) % per]


# ---------------------------------------------------------------------------
# The model
# ---------------------------------------------------------------------------

Profile = tuple  # actions aligned with an agent tuple


@dataclass
class Rbm:
    """A resource-bounded arena over exactly one shared unbounded resource.

    ``effects[a]`` is the signed pool effect of action ``a``; ``avail`` maps
    (agent, state) to the nonempty tuple of actions available there;
    ``trans`` is total on the full action profiles available at each state.
    """

    name: str
    agents: tuple[str, ...]
    states: tuple[str, ...]
    actions: tuple[str, ...]
    effects: dict[str, int]
    avail: dict[tuple[str, str], tuple[str, ...]]  # (agent, state) -> actions
    trans: dict[tuple[str, Profile], str]  # (state, full profile) -> state
    initial: str
    props: dict[str, tuple[tuple[str, EndowmentPredicate], ...]] = field(default_factory=dict)
    resources: tuple[str, ...] = ("res",)

    # -- profile helpers ----------------------------------------------------

    def avail_for(self, agent: str, q: str) -> tuple[str, ...]:
        return self.avail[(agent, q)]

    def profiles(self, agents: tuple[str, ...], q: str) -> Iterator[Profile]:
        """All joint actions of ``agents`` at ``q`` (one empty profile if none)."""
        pools = [self.avail[(a, q)] for a in agents]
        return itertools.product(*pools)

    def full_profiles(self, q: str) -> Iterator[Profile]:
        return self.profiles(self.agents, q)

    def coalition(self, names: Iterable[str]) -> tuple[str, ...]:
        chosen = set(names)
        unknown = chosen - set(self.agents)
        if unknown:
            raise CheckError(f"unknown agent name(s): {', '.join(sorted(unknown))}")
        return tuple(a for a in self.agents if a in chosen)

    def opponents(self, coalition: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(a for a in self.agents if a not in set(coalition))

    def combine(self, coalition: tuple[str, ...], alpha_a: Profile,
                opponents: tuple[str, ...], alpha_o: Profile) -> Profile:
        by_agent = dict(zip(coalition, alpha_a))
        by_agent.update(zip(opponents, alpha_o))
        return tuple(by_agent[a] for a in self.agents)

    def cons(self, profile: Profile) -> int:
        return sum(max(0, -self.effects[a]) for a in profile)

    def prod(self, profile: Profile) -> int:
        return sum(max(0, self.effects[a]) for a in profile)

    def prop_holds(self, prop: str, q: str, eta: int) -> bool:
        if prop == TRUE_PROP:
            return True
        if prop == FALSE_PROP:
            return False
        if prop not in self.props:
            raise CheckError(f"unknown proposition name: {prop}")
        return any(s == q and pred.holds(eta) for s, pred in self.props[prop])

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        if len(self.resources) > 1:
            raise RbmValidationError(
                "more than one resource declared: only 1-unbounded models are "
                "supported (model checking is undecidable for k>=2)")
        if not self.agents:
            raise RbmValidationError("model has no agents")
        if self.initial not in self.states:
            raise RbmValidationError(f"unknown initial state {self.initial}")
        for a in self.agents:
            for q in self.states:
                acts = self.avail.get((a, q))
                if not acts:
                    raise RbmValidationError(f"empty avail set for agent {a} at {q}")
                for act in acts:
                    if act not in self.effects:
                        raise RbmValidationError(f"unknown action {act} in avail of {a} at {q}")
        seen = set()
        for q in self.states:
            for prof in self.full_profiles(q):
                if (q, prof) not in self.trans:
                    raise RbmValidationError(f"trans not total at {q}")
                if self.trans[(q, prof)] not in self.states:
                    raise RbmValidationError(f"trans target missing for {q}")
                seen.add((q, prof))
        extra = set(self.trans) - seen
        if extra:
            q, prof = sorted(extra)[0]
            raise RbmValidationError(f"trans defined outside d({q}): {prof}")
        for p, atoms in self.props.items():
            for s, _pred in atoms:
                if s not in self.states:
                    raise RbmValidationError(f"prop {p} names unknown state {s}")


def validate_irbm(m: Rbm) -> bool:
    """True iff every agent everywhere has some available zero-effect action."""
    return all(
        any(m.effects[a] == 0 for a in m.avail[(agent, q)])
        for agent in m.agents for q in m.states)


# ---------------------------------------------------------------------------
# Resource accounting and the one-step game semantics
# ---------------------------------------------------------------------------
#
# cons is kept as the nonnegative magnitude max(0, -effect): that is the only
# reading under which the feasibility and update rules below are consistent
# with each other.

def delta_max(m: Rbm, coalition: tuple[str, ...], q: str) -> int:
    """Worst-case opponent consumption at q (0 for an empty opponent set)."""
    opp = m.opponents(coalition)
    if not opp:
        return 0
    return max(m.cons(alpha) for alpha in m.profiles(opp, q))


def delta_con(m: Rbm, coalition: tuple[str, ...], q: str, alpha_a: Profile) -> int:
    """Pessimistic consumption of playing alpha_a at q."""
    return m.cons(alpha_a) + delta_max(m, coalition, q)


def delta_prd(m: Rbm, coalition: tuple[str, ...], q: str,
              alpha_a: Profile, alpha_opp: Profile) -> int:
    """Pool correction pushed back once the opponents' actual move is known."""
    full = m.combine(coalition, alpha_a, m.opponents(coalition), alpha_opp)
    return delta_max(m, coalition, q) - m.cons(alpha_opp) + m.prod(full)


def step(m: Rbm, q: str, eta: int, profile: Profile) -> tuple[str, int] | None:
    """One neutral full-profile step; None when the pool cannot fund it."""
    if eta < 0:
        raise CheckError("endowment must be a natural number")
    if (q, profile) not in m.trans:
        raise CheckError(f"profile {profile} not available at {q}")
    need = m.cons(profile)
    if eta < need:
        return None
    return m.trans[(q, profile)], eta + m.prod(profile) - need


def coalition_step(m: Rbm, coalition: tuple[str, ...], q: str, eta: int,
                   alpha_a: Profile, alpha_opp: Profile) -> tuple[str, int] | None:
    """One step of the coalition game: feasible only when the pool covers
    the coalition's consumption plus the worst case the opponents could
    claim (the opponents' own move is then always funded)."""
    if eta < delta_con(m, coalition, q, alpha_a):
        return None
    full = m.combine(coalition, alpha_a, m.opponents(coalition), alpha_opp)
    return m.trans[(q, full)], eta + m.prod(full) - m.cons(full)


# ---------------------------------------------------------------------------
# Formula AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RalFormula:
    pass


@dataclass(frozen=True)
class RProp(RalFormula):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class RNot(RalFormula):
    sub: RalFormula

    def __str__(self):
        return f"!{self.sub}"


@dataclass(frozen=True)
class RAnd(RalFormula):
    left: RalFormula
    right: RalFormula

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class ROr(RalFormula):
    left: RalFormula
    right: RalFormula

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class RCoop(RalFormula):
    """``<<agents>> op ...`` with op one of X, U, G.  F is parsed away as
    ``$true U phi``."""

    agents: frozenset[str]
    op: str  # "X" | "U" | "G"
    left: RalFormula
    right: RalFormula | None = None  # only for U

    def __str__(self):
        names = ",".join(sorted(self.agents))
        if self.op == "U":
            return f"<<{names}>>({self.left} U {self.right})"
        return f"<<{names}>>{self.op} {self.left}"


TRUE = RProp(TRUE_PROP)


def formula_props(f: RalFormula) -> set[str]:
    if isinstance(f, RProp):
        return {f.name}
    if isinstance(f, RNot):
        return formula_props(f.sub)
    if isinstance(f, (RAnd, ROr)):
        return formula_props(f.left) | formula_props(f.right)
    if isinstance(f, RCoop):
        out = formula_props(f.left)
        if f.right is not None:
            out |= formula_props(f.right)
        return out
    raise TypeError(f"not a formula: {f!r}")


def formula_coalitions(f: RalFormula) -> set[frozenset[str]]:
    if isinstance(f, RProp):
        return set()
    if isinstance(f, RNot):
        return formula_coalitions(f.sub)
    if isinstance(f, (RAnd, ROr)):
        return formula_coalitions(f.left) | formula_coalitions(f.right)
    if isinstance(f, RCoop):
        out = {f.agents} | formula_coalitions(f.left)
        if f.right is not None:
            out |= formula_coalitions(f.right)
        return out
    raise TypeError(f"not a formula: {f!r}")


class _FormulaParser:
    """Recursive descent over the grammar; | binds weakest, then &, then !."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str):
        raise FormulaSyntaxError(msg, self.pos + 1)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, tok: str):
        self.skip_ws()
        if not self.text.startswith(tok, self.pos):
            self.error(f"expected {tok!r}")
        self.pos += len(tok)

    def ident(self) -> str:
        self.skip_ws()
        match = re.match(r"[A-Za-z_][A-Za-z0-9_]*", self.text[self.pos:])
        if not match:
            self.error("expected identifier")
        self.pos += match.end()
        return match.group()

    def parse(self) -> RalFormula:
        f = self.parse_or()
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing input")
        return f

    def parse_or(self) -> RalFormula:
        f = self.parse_and()
        while self.peek() == "|":
            self.eat("|")
            f = ROr(f, self.parse_and())
        return f

    def parse_and(self) -> RalFormula:
        f = self.parse_unary()
        while self.peek() == "&":
            self.eat("&")
            f = RAnd(f, self.parse_unary())
        return f

    def parse_unary(self) -> RalFormula:
        ch = self.peek()
        if ch == "!":
            self.eat("!")
            return RNot(self.parse_unary())
        if ch == "(":
            self.eat("(")
            f = self.parse_or()
            self.eat(")")
            return f
        if self.text.startswith("<<", self.pos):
            return self.parse_coop()
        return RProp(self.ident())

    def parse_coop(self) -> RalFormula:
        self.eat("<<")
        agents: set[str] = set()
        if self.peek() != ">":
            agents.add(self.ident())
            while self.peek() == ",":
                self.eat(",")
                agents.add(self.ident())
        self.eat(">>")
        self.skip_ws()
        if self.pos >= len(self.text):
            self.error("expected temporal operator after coalition")
        op = self.text[self.pos]
        coal = frozenset(agents)
        if op in ("X", "G", "F"):
            self.pos += 1
            body = self.parse_unary()
            if op == "F":
                return RCoop(coal, "U", TRUE, body)
            return RCoop(coal, op, body)
        if op == "(":
            # <<A>>(f U g)
            self.eat("(")
            left = self.parse_or()
            self.skip_ws()
            self.eat("U")
            right = self.parse_or()
            self.eat(")")
            return RCoop(coal, "U", left, right)
        self.error("expected X, G, F or (f U g) after coalition")


def parse_formula(text: str) -> RalFormula:
    """Parse the formula grammar; names starting with $ are reserved."""
    if "$" in text:
        raise FormulaSyntaxError("'$' is reserved for internal propositions")
    return _FormulaParser(text).parse()


# ---------------------------------------------------------------------------
# .rbm parsing and serialization
# ---------------------------------------------------------------------------

_PRED_RE = re.compile(
    r"any|eta==(\d+)|eta>=(\d+)|eta<(\d+)|eta%(\d+)==(\d+)")


def _parse_pred(text: str, line_no: int) -> EndowmentPredicate:
    text = text.strip()
    m = _PRED_RE.fullmatch(text)
    if not m:
        raise RbmSyntaxError(f"bad endowment predicate {text!r}", line_no, 1)
    if text == "any":
        return EndowmentPredicate("any")
    if m.group(1) is not None:
        return EndowmentPredicate("eq", int(m.group(1)))
    if m.group(2) is not None:
        return EndowmentPredicate("ge", int(m.group(2)))
    if m.group(3) is not None:
        return EndowmentPredicate("lt", int(m.group(3)))
    mod, cls = int(m.group(4)), int(m.group(5))
    if mod <= 0:
        raise RbmSyntaxError("modulus must be positive", line_no, 1)
    return EndowmentPredicate("mod", cls % mod, mod)


def parse_rbm(text: str) -> Rbm:
    """Parse and validate a .rbm document; wildcard transition rules are
    expanded first-match-wins into a total transition map."""
    name = ""
    agents: list[str] = []
    states: list[str] = []
    actions: list[str] = []
    effects: dict[str, int] = {}
    avail: dict[tuple[str, str], tuple[str, ...]] = {}
    props: dict[str, list[tuple[str, EndowmentPredicate]]] = {}
    trans_rules: list[tuple[str, tuple[str, ...], str, int]] = []
    resources: list[str] = []
    initial = ""

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        kw = words[0]
        rest = line[len(kw):].strip()
        if kw == "model":
            if len(words) != 2:
                raise RbmSyntaxError("model line needs one name", line_no, 1)
            name = words[1]
        elif kw == "agents":
            agents.extend(words[1:])
        elif kw == "states":
            states.extend(words[1:])
        elif kw == "resources":
            resources.extend(words[1:])
        elif kw == "init":
            if len(words) != 2:
                raise RbmSyntaxError("init line needs one state", line_no, 1)
            initial = words[1]
        elif kw == "action":
            if len(words) != 4 or words[2] != "effect":
                raise RbmSyntaxError("expected: action NAME effect INT", line_no, 1)
            try:
                eff = int(words[3])
            except ValueError:
                raise RbmSyntaxError(f"bad effect {words[3]!r}", line_no, 1) from None
            if words[1] in effects:
                raise RbmSyntaxError(f"duplicate action {words[1]}", line_no, 1)
            actions.append(words[1])
            effects[words[1]] = eff
        elif kw == "avail":
            if ":" not in rest:
                raise RbmSyntaxError("expected: avail STATE AGENT : ACTIONS", line_no, 1)
            head, _, tail = rest.partition(":")
            parts = head.split()
            if len(parts) != 2:
                raise RbmSyntaxError("expected: avail STATE AGENT : ACTIONS", line_no, 1)
            q, agent = parts
            acts = tuple(tail.split())
            if (agent, q) in avail:
                raise RbmSyntaxError(f"duplicate avail for {agent} at {q}", line_no, 1)
            avail[(agent, q)] = acts
        elif kw == "prop":
            if ":" not in rest:
                raise RbmSyntaxError("expected: prop NAME : STATE PRED ; ...", line_no, 1)
            head, _, tail = rest.partition(":")
            pname = head.strip()
            if not pname or pname.startswith("$"):
                raise RbmSyntaxError("bad proposition name", line_no, 1)
            atoms = props.setdefault(pname, [])
            for chunk in tail.split(";"):
                chunk = chunk.strip()
                if not chunk:
                    continue
                bits = chunk.split(None, 1)
                if len(bits) != 2:
                    raise RbmSyntaxError(f"bad prop atom {chunk!r}", line_no, 1)
                atoms.append((bits[0], _parse_pred(bits[1], line_no)))
        elif kw == "trans":
            m = re.fullmatch(r"(\S+)\s*\(([^)]*)\)\s*->\s*(\S+)", rest)
            if not m:
                raise RbmSyntaxError("expected: trans STATE (a,b,...) -> STATE", line_no, 1)
            src, pat, dst = m.group(1), m.group(2), m.group(3)
            pattern = tuple(p.strip() for p in pat.split(","))
            trans_rules.append((src, pattern, dst, line_no))
        else:
            raise RbmSyntaxError(f"unknown directive {kw!r}", line_no, 1)

    if not agents:
        raise RbmSyntaxError("missing agents line")
    if not states:
        raise RbmSyntaxError("missing states line")
    if not initial:
        raise RbmSyntaxError("missing init line")

    for (agent, q) in avail:
        if agent not in agents:
            raise RbmValidationError(f"avail names unknown agent {agent}")
        if q not in states:
            raise RbmValidationError(f"avail names unknown state {q}")

    # Expand wildcard rules, first match wins, into a total map.
    rules_by_state: dict[str, list[tuple[tuple[str, ...], str, int]]] = {}
    for src, pattern, dst, line_no in trans_rules:
        if src not in states:
            raise RbmValidationError(f"trans names unknown state {src}")
        if dst not in states:
            raise RbmValidationError(f"trans target unknown state {dst}")
        if len(pattern) != len(agents):
            raise RbmSyntaxError(
                f"pattern arity {len(pattern)} != {len(agents)} agents", line_no, 1)
        for p in pattern:
            if p != "_" and p not in effects:
                raise RbmSyntaxError(f"pattern names unknown action {p!r}", line_no, 1)
        rules_by_state.setdefault(src, []).append((pattern, dst, line_no))

    model = Rbm(
        name=name or "model",
        agents=tuple(agents),
        states=tuple(states),
        actions=tuple(actions),
        effects=effects,
        avail=avail,
        trans={},
        initial=initial,
        props={p: tuple(sorted(atoms, key=lambda a: (a[0], a[1].text())))
               for p, atoms in props.items()},
        resources=tuple(resources) if resources else ("res",),
    )
    for a in agents:
        for q in states:
            if (a, q) not in avail:
                raise RbmValidationError(f"empty avail set for agent {a} at {q}")

    for q in states:
        for prof in model.full_profiles(q):
            for pattern, dst, _ in rules_by_state.get(q, []):
                if all(p == "_" or p == act for p, act in zip(pattern, prof)):
                    model.trans[(q, prof)] = dst
                    break
            else:
                raise RbmValidationError(f"trans not total at {q}")

    model.validate()
    return model


def serialize_rbm(m: Rbm) -> str:
    """Canonical text form; transitions are written one explicit line per
    profile, so parse_rbm(serialize_rbm(m)) == m."""
    out = [f"model {m.name}"]
    out.append("agents " + " ".join(m.agents))
    out.append("states " + " ".join(m.states))
    out.append("resources " + " ".join(m.resources))
    out.append(f"init {m.initial}")
    for a in m.actions:
        out.append(f"action {a} effect {m.effects[a]}")
    for q in m.states:
        for agent in m.agents:
            out.append(f"avail {q} {agent} : " + " ".join(m.avail[(agent, q)]))
    for p in sorted(m.props):
        atoms = " ; ".join(f"{s} {pred.text()}" for s, pred in m.props[p])
        out.append(f"prop {p} : {atoms}")
    for q in m.states:
        for prof in m.full_profiles(q):
            out.append(f"trans {q} ({','.join(prof)}) -> {m.trans[(q, prof)]}")
    return "\n".join(out) + "\n"
