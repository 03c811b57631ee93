"""CTL over (compact) alternating Büchi pushdown systems.

Formulae are normalized to negation normal form with release as a
first-class operator; G is ``false R .`` and F is ``true U .``.  The
checker builds a product system over control states (p, subformula)
together with the labelling automata of the propositions that occur,
expands it to a plain system and asks the Büchi engine for membership.

Release-rooted product controls are accepting ("never released" runs
are accepted); until-rooted controls are not, so runs that postpone an
until forever are rejected.  Literal controls hand off to the labelling
automaton of the proposition (the complemented one for a negative
literal), which is simulated by single-symbol pops and kept alive on
the empty stack by a loop on the bottom marker at its final states.

Universal operators branch over the transitions grouped by read word.
On a plain base system that grouping is per top symbol and matches the
game semantics exactly, including a vacuous-truth reading at
configurations with no successor.  On a compact base with mixed read
widths the per-word grouping is coarser than the per-configuration game
reading; the flat-formula pipeline of this package only ever produces
existential operators, so it is unaffected.

Truth constants are reserved propositions with full and empty labelling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable

from .automata import (Ama, BOTTOM, ConfigSet, ama_complement, compile_predicate,
                       empty_configset, full_configset, prune)
from .model import (CheckError, EndowmentPredicate, FALSE_PROP, TRUE_PROP)
from .pushdown import Cabpds, Configuration, Rule, expand_compact
from .saturation import SaturationStats, buchi_language


# ---------------------------------------------------------------------------
# Formula AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CtlFormula:
    def __str__(self):  # pragma: no cover - overridden
        return "?"


@dataclass(frozen=True)
class Lit(CtlFormula):
    name: str
    neg: bool = False

    def __str__(self):
        return f"!{self.name}" if self.neg else self.name


@dataclass(frozen=True)
class Not(CtlFormula):
    sub: CtlFormula

    def __str__(self):
        return f"!({self.sub})"


@dataclass(frozen=True)
class And(CtlFormula):
    left: CtlFormula
    right: CtlFormula

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or(CtlFormula):
    left: CtlFormula
    right: CtlFormula

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class EX(CtlFormula):
    sub: CtlFormula

    def __str__(self):
        return f"EX {self.sub}"


@dataclass(frozen=True)
class AX(CtlFormula):
    sub: CtlFormula

    def __str__(self):
        return f"AX {self.sub}"


@dataclass(frozen=True)
class EU(CtlFormula):
    left: CtlFormula
    right: CtlFormula

    def __str__(self):
        return f"E({self.left} U {self.right})"


@dataclass(frozen=True)
class AU(CtlFormula):
    left: CtlFormula
    right: CtlFormula

    def __str__(self):
        return f"A({self.left} U {self.right})"


@dataclass(frozen=True)
class ER(CtlFormula):
    left: CtlFormula
    right: CtlFormula

    def __str__(self):
        return f"E({self.left} R {self.right})"


@dataclass(frozen=True)
class AR(CtlFormula):
    left: CtlFormula
    right: CtlFormula

    def __str__(self):
        return f"A({self.left} R {self.right})"


@dataclass(frozen=True)
class EG(CtlFormula):
    sub: CtlFormula


@dataclass(frozen=True)
class AG(CtlFormula):
    sub: CtlFormula


@dataclass(frozen=True)
class EF(CtlFormula):
    sub: CtlFormula


@dataclass(frozen=True)
class AF(CtlFormula):
    sub: CtlFormula


TRUE_LIT = Lit(TRUE_PROP)
FALSE_LIT = Lit(FALSE_PROP)


def to_nnf(f: CtlFormula) -> CtlFormula:
    """Equivalent formula in negation normal form (literals, and/or,
    EX/AX, E/A until, E/A release)."""
    if isinstance(f, Lit):
        return f
    if isinstance(f, And):
        return And(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Or):
        return Or(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, EX):
        return EX(to_nnf(f.sub))
    if isinstance(f, AX):
        return AX(to_nnf(f.sub))
    if isinstance(f, EU):
        return EU(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, AU):
        return AU(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, ER):
        return ER(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, AR):
        return AR(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, EG):
        return ER(FALSE_LIT, to_nnf(f.sub))
    if isinstance(f, AG):
        return AR(FALSE_LIT, to_nnf(f.sub))
    if isinstance(f, EF):
        return EU(TRUE_LIT, to_nnf(f.sub))
    if isinstance(f, AF):
        return AU(TRUE_LIT, to_nnf(f.sub))
    if isinstance(f, Not):
        return _negate(f.sub)
    raise TypeError(f"not a CTL formula: {f!r}")


def _negate(f: CtlFormula) -> CtlFormula:
    if isinstance(f, Lit):
        if f.name == TRUE_PROP:
            return Lit(FALSE_PROP, False) if not f.neg else TRUE_LIT
        if f.name == FALSE_PROP:
            return Lit(TRUE_PROP, False) if not f.neg else FALSE_LIT
        return Lit(f.name, not f.neg)
    if isinstance(f, Not):
        return to_nnf(f.sub)
    if isinstance(f, And):
        return Or(_negate(f.left), _negate(f.right))
    if isinstance(f, Or):
        return And(_negate(f.left), _negate(f.right))
    if isinstance(f, EX):
        return AX(_negate(f.sub))
    if isinstance(f, AX):
        return EX(_negate(f.sub))
    if isinstance(f, EU):
        return AR(_negate(f.left), _negate(f.right))
    if isinstance(f, AU):
        return ER(_negate(f.left), _negate(f.right))
    if isinstance(f, ER):
        return AU(_negate(f.left), _negate(f.right))
    if isinstance(f, AR):
        return EU(_negate(f.left), _negate(f.right))
    if isinstance(f, EG):
        return AU(TRUE_LIT, _negate(f.sub))
    if isinstance(f, AG):
        return EU(TRUE_LIT, _negate(f.sub))
    if isinstance(f, EF):
        return AR(FALSE_LIT, _negate(f.sub))
    if isinstance(f, AF):
        return ER(FALSE_LIT, _negate(f.sub))
    raise TypeError(f"not a CTL formula: {f!r}")


@dataclass(frozen=True)
class Closure:
    cl: frozenset
    cl_r: frozenset
    pos: frozenset  # positively occurring proposition names
    neg: frozenset  # negatively occurring proposition names


def closure(f: CtlFormula) -> Closure:
    """All subformulae of an NNF formula, its release-rooted members and
    the polarities of its propositions."""
    cl: set[CtlFormula] = set()

    def walk(g: CtlFormula):
        if g in cl:
            return
        cl.add(g)
        if isinstance(g, Lit):
            return
        if isinstance(g, (EX, AX)):
            walk(g.sub)
        elif isinstance(g, (And, Or, EU, AU, ER, AR)):
            walk(g.left)
            walk(g.right)
        else:
            raise CheckError(f"closure needs NNF, found {g!r}")

    walk(f)
    cl_r = frozenset(g for g in cl if isinstance(g, (ER, AR)))
    pos = frozenset(g.name for g in cl if isinstance(g, Lit) and not g.neg)
    neg = frozenset(g.name for g in cl if isinstance(g, Lit) and g.neg)
    return Closure(frozenset(cl), cl_r, pos, neg)


# ---------------------------------------------------------------------------
# Regular labellings
# ---------------------------------------------------------------------------

class RegularLabelling:
    """Maps proposition names to regular configuration sets.

    User propositions are stored as (state, endowment predicate) atoms
    and compiled on demand; their complements are compiled from flipped
    bit vectors.  Synthesized propositions are stored as automata and
    complemented by dualization.  The truth constants are always
    resolvable.
    """

    def __init__(self, controls: Iterable[Hashable], alphabet: Iterable[str]):
        self.controls = frozenset(controls)
        self.alphabet = frozenset(alphabet) | {BOTTOM}
        self._atoms: dict[str, tuple[tuple[str, EndowmentPredicate], ...]] = {}
        self._automata: dict[str, ConfigSet] = {}

    @classmethod
    def from_model(cls, m) -> "RegularLabelling":
        lab = cls(m.states, {"|"})
        for prop, atoms in m.props.items():
            lab.add_atoms(prop, atoms)
        return lab

    def add_atoms(self, prop: str, atoms) -> None:
        self._atoms[prop] = tuple(atoms)

    def add_configset(self, prop: str, cs: ConfigSet) -> None:
        if not self.controls <= cs.controls:
            raise CheckError(f"labelling for {prop} does not cover all controls")
        self._automata[prop] = cs

    def knows(self, prop: str) -> bool:
        return prop in self._atoms or prop in self._automata or \
            prop in (TRUE_PROP, FALSE_PROP)

    def positive(self, prop: str) -> ConfigSet:
        if prop == TRUE_PROP:
            return full_configset(self.controls, self.alphabet)
        if prop == FALSE_PROP:
            return empty_configset(self.controls, self.alphabet)
        if prop in self._automata:
            return self._automata[prop]
        if prop in self._atoms:
            return compile_predicate(self.controls, self._atoms[prop], name=prop)
        raise CheckError(f"unresolvable proposition: {prop}")

    def negative(self, prop: str) -> ConfigSet:
        if prop == TRUE_PROP:
            return empty_configset(self.controls, self.alphabet)
        if prop == FALSE_PROP:
            return full_configset(self.controls, self.alphabet)
        if prop in self._automata:
            cs = self._automata[prop]
            pruned = prune(cs.ama, cs.controls)
            return ConfigSet(ama_complement(pruned), cs.controls)
        if prop in self._atoms:
            return compile_predicate(self.controls, self._atoms[prop],
                                     name=f"not_{prop}", negate=True)
        raise CheckError(f"unresolvable proposition: {prop}")

    def holds(self, prop: str, control, stack: str) -> bool:
        return self.positive(prop).accepts(control, stack)


# ---------------------------------------------------------------------------
# The product construction
# ---------------------------------------------------------------------------

def _lab_state(prop: str, pol: str, s) -> tuple:
    return ("lab", prop, pol, s)


def build_product(base: Cabpds, lab: RegularLabelling, f: CtlFormula,
                  name: str | None = None) -> Cabpds:
    """The product system whose control (p, psi) accepts exactly the
    configurations (p, w) satisfying psi, for every psi in the closure."""
    if not isinstance(f, (Lit, And, Or, EX, AX, EU, AU, ER, AR)):
        raise CheckError("build_product needs an NNF formula")
    info = closure(f)
    if not base.alphabet <= lab.alphabet:
        raise CheckError("labelling alphabet does not match the system")

    controls: set = set()
    finals: set = set()
    rules: list[Rule] = []

    label_sets: dict[tuple[str, str], ConfigSet] = {}
    for prop in sorted(info.pos):
        label_sets[(prop, "+")] = lab.positive(prop)
    for prop in sorted(info.neg):
        label_sets[(prop, "-")] = lab.negative(prop)
    for (prop, pol), cs in label_sets.items():
        if not base.controls <= cs.controls:
            raise CheckError(f"labelling for {prop} does not cover the system controls")
        if not cs.ama.alphabet <= (base.alphabet | {BOTTOM}):
            raise CheckError(f"labelling alphabet mismatch for {prop}")

    for p in base.controls:
        for psi in info.cl:
            controls.add((p, psi))
            if psi in info.cl_r:
                finals.add((p, psi))

    # label automata become part of the control space: one pop per symbol,
    # a re-push on the bottom marker, and an accepting loop on it at the
    # automaton's final states
    for (prop, pol), cs in sorted(label_sets.items()):
        pruned = prune(cs.ama, cs.controls & base.controls)
        for s in pruned.states:
            controls.add(_lab_state(prop, pol, s))
        for s in pruned.final:
            finals.add(_lab_state(prop, pol, s))
            rules.append(Rule(_lab_state(prop, pol, s), BOTTOM,
                              frozenset({(_lab_state(prop, pol, s), BOTTOM)})))
        for s, x, targets in pruned.triples():
            wrapped = frozenset(
                (_lab_state(prop, pol, t), BOTTOM if x == BOTTOM else "")
                for t in targets)
            rules.append(Rule(_lab_state(prop, pol, s), x, wrapped))

    def now(p, psi, read):
        """Re-push branch: stay at (p, psi) keeping the stack unchanged."""
        return ((p, psi), read)

    for p in sorted(base.controls, key=repr):
        sys_rules = base.rules_from(p)
        if base.is_plain():
            group_reads = sorted(base.alphabet) + [BOTTOM]
        else:
            group_reads = sorted({r.read for r in sys_rules})
        for psi in info.cl:
            if isinstance(psi, Lit):
                pol = "-" if psi.neg else "+"
                rules.append(Rule((p, psi), "",
                                  frozenset({(_lab_state(psi.name, pol, p), "")})))
            elif isinstance(psi, And):
                rules.append(Rule((p, psi), "", frozenset({
                    ((p, psi.left), ""), ((p, psi.right), "")})))
            elif isinstance(psi, Or):
                rules.append(Rule((p, psi), "", frozenset({((p, psi.left), "")})))
                rules.append(Rule((p, psi), "", frozenset({((p, psi.right), "")})))
            elif isinstance(psi, EX):
                for rule in sys_rules:
                    rules.append(Rule((p, psi), rule.read, frozenset(
                        ((q, psi.sub), w) for q, w in rule.targets)))
            elif isinstance(psi, AX):
                for read in group_reads:
                    union = frozenset(
                        ((q, psi.sub), w)
                        for rule in sys_rules if rule.read == read
                        for q, w in rule.targets)
                    rules.append(Rule((p, psi), read, union))
            elif isinstance(psi, EU):
                rules.append(Rule((p, psi), "", frozenset({((p, psi.right), "")})))
                for rule in sys_rules:
                    rules.append(Rule((p, psi), rule.read,
                                      frozenset({now(p, psi.left, rule.read)}) |
                                      frozenset(((q, psi), w) for q, w in rule.targets)))
            elif isinstance(psi, AU):
                rules.append(Rule((p, psi), "", frozenset({((p, psi.right), "")})))
                for read in group_reads:
                    union = frozenset(
                        ((q, psi), w)
                        for rule in sys_rules if rule.read == read
                        for q, w in rule.targets)
                    rules.append(Rule((p, psi), read,
                                      frozenset({now(p, psi.left, read)}) | union))
            elif isinstance(psi, ER):
                rules.append(Rule((p, psi), "", frozenset({
                    ((p, psi.left), ""), ((p, psi.right), "")})))
                for rule in sys_rules:
                    rules.append(Rule((p, psi), rule.read,
                                      frozenset({now(p, psi.right, rule.read)}) |
                                      frozenset(((q, psi), w) for q, w in rule.targets)))
            elif isinstance(psi, AR):
                rules.append(Rule((p, psi), "", frozenset({
                    ((p, psi.left), ""), ((p, psi.right), "")})))
                for read in group_reads:
                    union = frozenset(
                        ((q, psi), w)
                        for rule in sys_rules if rule.read == read
                        for q, w in rule.targets)
                    rules.append(Rule((p, psi), read,
                                      frozenset({now(p, psi.right, read)}) | union))

    return Cabpds(controls, base.alphabet, rules, finals, max(base.r, 1),
                  name=name or f"{base.name}_x_{f}")


# ---------------------------------------------------------------------------
# The checking pipeline
# ---------------------------------------------------------------------------

@dataclass
class CtlRun:
    formula: CtlFormula  # the NNF actually checked
    product: Cabpds
    plain: Cabpds
    lang: ConfigSet
    stats: SaturationStats = field(default_factory=SaturationStats)

    def holds(self, psi: CtlFormula, cfg: Configuration) -> bool:
        """Membership for any closure member (this is the point of the
        saturated automaton: one artifact answers them all)."""
        return self.lang.accepts((cfg.control, psi), cfg.stack)


def saturate_ctl(base: Cabpds, lab: RegularLabelling, f: CtlFormula,
                 stats: SaturationStats | None = None) -> CtlRun:
    nnf = to_nnf(f)
    stats = stats if stats is not None else SaturationStats()
    product = build_product(base, lab, nnf)
    plain = expand_compact(product)
    lang = buchi_language(plain, stats)
    return CtlRun(nnf, product, plain, lang, stats)


def ctl_check(base: Cabpds, lab: RegularLabelling, f: CtlFormula,
              cfg: Configuration, stats: SaturationStats | None = None) -> bool:
    """Does the configuration satisfy f?  Negation is allowed anywhere;
    conversion to NNF is internal."""
    if cfg.control not in base.controls:
        raise CheckError(f"unknown control {cfg.control!r}")
    run = saturate_ctl(base, lab, f, stats)
    return run.holds(run.formula, cfg)
