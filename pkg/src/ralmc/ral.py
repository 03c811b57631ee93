"""The reduction from resource agent logic to pushdown acceptance.

A model together with a coalition is encoded as a compact system over
the one-letter stack alphabet: the stack height is the shared
endowment, a rule for (state, coalition action) reads as many symbols
as the coalition pessimistically consumes (worst-case opponents
included) and each branch pushes back the correction for what the
opponents actually played plus whatever the joint action produced.
Reads of width zero arise exactly for free joint actions and use the
epsilon-read extension of compact systems.

Flat cooperation formulae then reduce to existential CTL over that
encoding; nested formulae are solved bottom-up, replacing each solved
subformula by a fresh internal proposition whose labelling is the
computed configuration set.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

from . import ctl as C
from .automata import Ama, ConfigSet
from .ctl import CtlRun, RegularLabelling, saturate_ctl
from .model import (CheckError, FALSE_PROP, RAnd, RCoop, RNot, ROr, RProp,
                    RalFormula, Rbm, TRUE_PROP, delta_con, delta_max, delta_prd)
from .pushdown import Cabpds, Rule
from .saturation import SaturationStats

FLAT_PREFIX = "$flat"


def h_encode(eta: int) -> str:
    return "|" * eta


def h_decode(stack: str) -> int:
    return len(stack)


@dataclass
class EncodedGame:
    """The compact system for (model, coalition) plus the height/endowment
    correspondence."""

    model: Rbm
    coalition: tuple[str, ...]
    system: Cabpds
    r: int

    def config(self, q: str, eta: int):
        from .pushdown import Configuration

        return Configuration(q, h_encode(eta))


def encode(m: Rbm, coalition: tuple[str, ...]) -> EncodedGame:
    """One rule per (state, coalition action); branch per opponent reply.

    Every control is accepting: acceptance of the raw encoding just says
    the play can go on forever, objectives come from the product layer.
    """
    opp = m.opponents(coalition)
    rules = []
    r = 1
    for q in m.states:
        dmax = delta_max(m, coalition, q)
        for alpha_a in m.profiles(coalition, q):
            dcon = m.cons(alpha_a) + dmax
            targets = set()
            for alpha_o in m.profiles(opp, q):
                full = m.combine(coalition, alpha_a, opp, alpha_o)
                dprd = dmax - m.cons(alpha_o) + m.prod(full)
                targets.add((m.trans[(q, full)], h_encode(dprd)))
                r = max(r, dcon, dprd)
            rules.append(Rule(q, h_encode(dcon), frozenset(targets)))
    system = Cabpds(m.states, {"|"}, rules, m.states, r,
                    name=f"{m.name}_{'+'.join(coalition) or 'empty'}")
    return EncodedGame(m, coalition, system, r)


# ---------------------------------------------------------------------------
# Flat formulae
# ---------------------------------------------------------------------------

def _propositional_to_ctl(f: RalFormula) -> C.CtlFormula:
    if isinstance(f, RProp):
        return C.Lit(f.name)
    if isinstance(f, RNot):
        return C.Not(_propositional_to_ctl(f.sub))
    if isinstance(f, RAnd):
        return C.And(_propositional_to_ctl(f.left), _propositional_to_ctl(f.right))
    if isinstance(f, ROr):
        return C.Or(_propositional_to_ctl(f.left), _propositional_to_ctl(f.right))
    if isinstance(f, RCoop):
        raise CheckError("flat check called with a nested cooperation modality")
    raise TypeError(f"not a formula: {f!r}")


def lower_body(op: str, left: RalFormula, right: RalFormula | None) -> C.CtlFormula:
    """The existential CTL body of a flat cooperation formula.  The next
    operator is evaluated under the updated endowment, like until and
    globally (see the module notes on the original next-step clause)."""
    if op == "X":
        return C.EX(_propositional_to_ctl(left))
    if op == "U":
        return C.EU(_propositional_to_ctl(left), _propositional_to_ctl(right))
    if op == "G":
        return C.ER(C.FALSE_LIT, _propositional_to_ctl(left))
    raise CheckError(f"unknown temporal operator {op!r}")


@dataclass
class FlatStage:
    coalition: tuple[str, ...]
    r: int
    rules: int
    product_controls: int
    saturation_iterations: int


def check_flat(m: Rbm, lab: RegularLabelling, coalition: tuple[str, ...],
               op: str, left: RalFormula, right: RalFormula | None = None,
               stages: list[FlatStage] | None = None) -> ConfigSet:
    """The set of (state, endowment) pairs at which the coalition can
    enforce the flat path body, as an automaton keyed by model state."""
    game = encode(m, coalition)
    body = lower_body(op, left, right)
    stats = SaturationStats()
    run = saturate_ctl(game.system, lab, body, stats)
    if stages is not None:
        stages.append(FlatStage(coalition, game.r, len(game.system.rules),
                                len(run.product.controls), stats.iterations))
    return _expose_states(run, m.states)


def _expose_states(run: CtlRun, states: tuple[str, ...]) -> ConfigSet:
    """Re-key the saturated language from (state, formula) controls to the
    bare model states."""
    lang = run.lang.ama
    delta = list(lang.triples())
    for q in states:
        for x in lang.alphabet:
            for targets in lang.row((q, run.formula), x):
                delta.append((q, x, targets))
    all_states = lang.states | set(states)
    finals = lang.final | {q for q in states if (q, run.formula) in lang.final}
    ama = Ama(all_states, lang.alphabet, delta, frozenset(states), finals,
              name=f"flat_{run.plain.name}")
    return ConfigSet(ama, frozenset(states))


# ---------------------------------------------------------------------------
# Full bottom-up checking
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    verdict: bool = False
    r: int = 0
    rules: int = 0
    product_controls: int = 0
    saturation_iterations: int = 0
    wall_ms: int = 0
    stages: list[FlatStage] = field(default_factory=list)

    def as_json_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "r": self.r,
            "rules": self.rules,
            "product_controls": self.product_controls,
            "saturation_iterations": self.saturation_iterations,
            "wall_ms": self.wall_ms,
        }


def _check_names(m: Rbm, f: RalFormula) -> None:
    from .model import formula_coalitions, formula_props

    for name in formula_props(f):
        if name.startswith("$"):
            if name not in (TRUE_PROP, FALSE_PROP):
                raise CheckError(f"reserved proposition {name} in input")
        elif name not in m.props:
            raise CheckError(f"unknown proposition name: {name}")
    for coalition in formula_coalitions(f):
        m.coalition(coalition)  # raises on unknown agents


def ral_check(m: Rbm, q: str, eta: int, f: RalFormula,
              report: CheckReport | None = None) -> bool:
    """Bottom-up model checking: innermost cooperation subformulae are
    solved flat and replaced by fresh labelled propositions, then the
    remaining propositional formula is evaluated at (q, eta)."""
    if q not in m.states:
        raise CheckError(f"unknown state {q}")
    if eta < 0:
        raise CheckError("endowment must be a natural number")
    m.validate()
    _check_names(m, f)
    report = report if report is not None else CheckReport()
    t0 = time.monotonic()
    lab = RegularLabelling.from_model(m)
    fresh = itertools.count()
    synthesized: dict[str, ConfigSet] = {}

    def eliminate(g: RalFormula) -> RalFormula:
        if isinstance(g, RProp):
            return g
        if isinstance(g, RNot):
            return RNot(eliminate(g.sub))
        if isinstance(g, RAnd):
            return RAnd(eliminate(g.left), eliminate(g.right))
        if isinstance(g, ROr):
            return ROr(eliminate(g.left), eliminate(g.right))
        if isinstance(g, RCoop):
            left = eliminate(g.left)
            right = eliminate(g.right) if g.right is not None else None
            coalition = m.coalition(g.agents)
            cs = check_flat(m, lab, coalition, g.op, left, right, report.stages)
            name = f"{FLAT_PREFIX}{next(fresh)}"
            lab.add_configset(name, cs)
            synthesized[name] = cs
            return RProp(name)
        raise TypeError(f"not a formula: {g!r}")

    def evaluate(g: RalFormula) -> bool:
        if isinstance(g, RProp):
            if g.name in synthesized:
                return synthesized[g.name].accepts(q, h_encode(eta))
            return m.prop_holds(g.name, q, eta)
        if isinstance(g, RNot):
            return not evaluate(g.sub)
        if isinstance(g, RAnd):
            return evaluate(g.left) and evaluate(g.right)
        if isinstance(g, ROr):
            return evaluate(g.left) or evaluate(g.right)
        raise TypeError(f"not propositional: {g!r}")

    verdict = evaluate(eliminate(f))
    report.verdict = verdict
    report.wall_ms = int((time.monotonic() - t0) * 1000)
    report.r = max((s.r for s in report.stages), default=0)
    report.rules = sum(s.rules for s in report.stages)
    report.product_controls = sum(s.product_controls for s in report.stages)
    report.saturation_iterations = sum(s.saturation_iterations for s in report.stages)
    return verdict
