"""Regular-set engines for plain alternating Büchi pushdown systems.

``pre_star`` is the classical alternating saturation: given a target
automaton, keep adding transitions (p, gamma, S1 | ... | Sn) whenever a
rule (p, gamma) -> {(p1,w1), ..., (pn,wn)} exists and each pi can reach
the state set Si reading wi in the current automaton.  Target sets are
kept as inclusion-minimal antichains (a smaller conjunctive target
accepts more, so dropping dominated sets preserves the language), and
are represented as bit masks internally.

``buchi_language`` computes the set of configurations from which an
accepting run exists (every infinite branch visits accepting controls
infinitely often; branches discharged by an empty successor set are
allowed).  It runs the greatest fixpoint of

    Y  |->  { c | some finite run tree from c makes at least one step,
              cuts every branch at its first entry into an accepting
              control, and all cut points lie in Y }

with one saturation pass per iterate over a control space doubled by a
seen-accepting-control bit.  Bit-one states carry no rules: they are
the target rows.  Between iterates the saturated bit-zero rows are
renamed onto the bit-one rows, so every iterate lives on one fixed
state space and the round operator is monotone on a finite lattice; the
iteration therefore reaches a fixpoint, whose row languages satisfy the
defining equation of the greatest fixpoint and hence equal the accepted
language.  A configurable round cap (RALMC_ITER_CAP) guards the
implementation; hitting it raises, it never returns a verdict.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Hashable, Iterable

from .automata import Ama, ConfigSet
from .model import RalError
from .pushdown import BOTTOM, Cabpds, Rule, normalize_alternation, normalize_pushes

State = Hashable


class SaturationError(RalError):
    pass


class IterationCapError(SaturationError):
    pass


_SINK = ("sink",)


@dataclass
class SaturationStats:
    iterations: int = 0
    transitions_added: int = 0
    prestar_passes: int = 0


def _min_masks(masks: Iterable[int]) -> tuple[int, ...]:
    """Inclusion-minimal antichain of bit masks."""
    pool = sorted(set(masks), key=lambda m: (bin(m).count("1"), m))
    keep: list[int] = []
    for m in pool:
        if not any(k & m == k for k in keep):
            keep.append(m)
    return tuple(keep)


def _fold_unions(pieces: list[tuple[int, ...]]) -> tuple[int, ...]:
    """Minimal antichain of unions picking one mask per piece.  Duplicate
    pieces collapse (picking twice from one piece is dominated by picking
    the same mask both times) and small pieces fold first to keep the
    intermediate frontier minimal."""
    uniq = sorted(set(pieces), key=len)
    acc: tuple[int, ...] = (0,)
    for piece in uniq:
        if len(piece) == 1:
            only = piece[0]
            acc = tuple(base | only for base in acc)
            continue
        acc = _min_masks(base | m for base in acc for m in piece)
    return _min_masks(acc) if len(uniq) > 1 else acc


class _Engine:
    """One saturation workspace: interned states, mask rows, reach memo."""

    def __init__(self):
        self.index: dict[State, int] = {}
        self.names: list[State] = []
        self.rows: dict[tuple[int, str], list[int]] = {}
        self.seen: dict[tuple[int, str], set[int]] = {}

    def intern(self, s: State) -> int:
        i = self.index.get(s)
        if i is None:
            i = len(self.names)
            self.index[s] = i
            self.names.append(s)
        return i

    def mask(self, states: Iterable[State]) -> int:
        m = 0
        for s in states:
            m |= 1 << self.intern(s)
        return m

    def unmask(self, m: int) -> frozenset:
        out = []
        i = 0
        while m:
            if m & 1:
                out.append(self.names[i])
            m >>= 1
            i += 1
        return frozenset(out)

    def add(self, state: int, symbol: str, targets: int) -> bool:
        key = (state, symbol)
        seen = self.seen.setdefault(key, set())
        if targets in seen:
            return False
        seen.add(targets)
        row = self.rows.setdefault(key, [])
        for have in row:
            if have & targets == have:
                return False
        row[:] = [have for have in row if targets & have != targets]
        row.append(targets)
        return True

    def reach(self, state: int, word: str,
              memo: dict[tuple[int, str], tuple[int, ...]]) -> tuple[int, ...]:
        key = (state, word)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if not word:
            result: tuple[int, ...] = (1 << state,)
        else:
            first, rest = word[0], word[1:]
            outs: set[int] = set()
            for targets in self.rows.get((state, first), ()):
                parts = []
                ok = True
                t = targets
                i = 0
                while t:
                    if t & 1:
                        sub = self.reach(i, rest, memo)
                        if not sub:
                            ok = False
                            break
                        parts.append(sub)
                    t >>= 1
                    i += 1
                if not ok:
                    continue
                # an empty target set consumes the rest of the word vacuously
                outs.update(_fold_unions(parts))
            result = _min_masks(outs)
        memo[key] = result
        return result

    def saturate(self, rules: list[tuple[int, str, tuple[tuple[int, str], ...]]],
                 stats: SaturationStats) -> int:
        """Run the saturation rule to fixpoint; terminates because the
        state space is fixed and antichains over it are finite."""
        added = 0
        changed = True
        while changed:
            changed = False
            # reads within one pass may be stale; the loop only stops after
            # a whole pass with a fresh memo adds nothing
            memo: dict[tuple[int, str], tuple[int, ...]] = {}
            stats.prestar_passes += 1
            for control, read, targets in rules:
                pieces = [self.reach(t, push, memo) for t, push in targets]
                if any(not p for p in pieces):
                    continue
                for union in _fold_unions(pieces):
                    if self.add(control, read, union):
                        added += 1
                        changed = True
        stats.transitions_added += added
        return added

    def triples(self):
        for (s, x), masks in self.rows.items():
            for m in masks:
                yield self.names[s], x, self.unmask(m)


def _intern_rules(engine: _Engine, rules: Iterable[Rule]):
    return [(engine.intern(r.control), r.read,
             tuple((engine.intern(t), w) for t, w in r.targets))
            for r in rules]


def _require_plain(system: Cabpds, op: str) -> None:
    if not system.is_plain():
        raise SaturationError(
            f"{op} needs a plain system (r = 1, no epsilon reads); run expand_compact first")


def pre_star(system: Cabpds, target: ConfigSet,
             stats: SaturationStats | None = None) -> ConfigSet:
    """Configurations that can reach, as a run tree, a finite set of
    configurations inside the target language."""
    _require_plain(system, "pre_star")
    alphabet = system.alphabet | {BOTTOM}
    if not target.ama.alphabet <= alphabet:
        raise SaturationError("target alphabet does not match the system stack alphabet")
    stats = stats if stats is not None else SaturationStats()

    # Clone the target into fresh states so saturation never rewrites a row
    # the seed depends on (control rows must have no incoming seed edges).
    def clone(s):
        return ("t", s)

    engine = _Engine()
    for s, x, targets in target.ama.triples():
        engine.add(engine.intern(clone(s)), x, engine.mask(clone(t) for t in targets))
    for q in target.controls:
        if q not in system.controls:
            continue
        for x in alphabet:
            for targets in target.ama.row(q, x):
                engine.add(engine.intern(q), x, engine.mask(clone(t) for t in targets))

    engine.saturate(_intern_rules(engine, system.rules), stats)
    stats.iterations += 1

    finals = {clone(s) for s in target.ama.final} | \
        {q for q in target.controls if q in target.ama.final and q in system.controls}
    triples = list(engine.triples())
    states = {s for s, _, _ in triples} | \
        {t for _, _, T in triples for t in T} | set(system.controls) | finals
    ama = Ama(states, alphabet, triples, frozenset(system.controls),
              finals, name=f"prestar_{system.name}")
    return ConfigSet(ama, frozenset(system.controls))


def _iteration_cap(system: Cabpds) -> int:
    env = os.environ.get("RALMC_ITER_CAP")
    if env:
        return int(env)
    gamma = max(1, len(system.alphabet) + 1)
    push = max(1, system.max_push())
    return 10 * max(1, len(system.controls)) * gamma * push + 64


def buchi_language(system: Cabpds,
                   stats: SaturationStats | None = None) -> ConfigSet:
    """An automaton for the accepting configurations of a plain system."""
    _require_plain(system, "buchi_language")
    exposed = frozenset(system.controls)
    system = normalize_pushes(normalize_alternation(system))
    stats = stats if stats is not None else SaturationStats()
    alphabet = sorted(system.alphabet | {BOTTOM})

    def bit(control, one: bool):
        return (1 if one else 0, control)

    def lift(control):
        return bit(control, control in system.finals)

    lifted = [
        Rule(bit(rule.control, False), rule.read,
             frozenset((lift(tgt), push) for tgt, push in rule.targets))
        for rule in system.rules
    ]

    # target rows: accept everything from every bit-one control
    t_rows: frozenset = frozenset(
        (bit(q, True), x, frozenset({_SINK})) for q in system.controls for x in alphabet)

    cap = _iteration_cap(system)
    rounds = 0
    seen_rows = {t_rows}
    while True:
        rounds += 1
        if rounds > cap:
            raise IterationCapError(
                f"Büchi iteration cap {cap} hit on {system.name}; "
                "set RALMC_ITER_CAP to raise it")
        engine = _Engine()
        zero_of: dict[int, int] = {}  # bit-one state index -> bit-zero index
        for q in system.controls:
            one = engine.intern(bit(q, True))
            zero_of[one] = engine.intern(bit(q, False))
        sink = engine.intern(_SINK)
        for s, x, targets in t_rows:
            engine.add(engine.intern(s), x, engine.mask(targets))
        for x in alphabet:
            engine.add(sink, x, 1 << sink)
        engine.saturate(_intern_rules(engine, lifted), stats)

        new_t = set()
        rename = {zero: one for one, zero in zero_of.items()}
        for (s, x), masks in engine.rows.items():
            name = engine.names[s]
            if not (isinstance(name, tuple) and len(name) == 2 and name[0] == 0):
                continue
            for m in masks:
                renamed = 0
                t = m
                i = 0
                while t:
                    if t & 1:
                        renamed |= 1 << rename.get(i, i)
                    t >>= 1
                    i += 1
                new_t.add(((1, name[1]), x, engine.unmask(renamed)))
        new_t = frozenset(new_t)
        if new_t == t_rows:
            break
        # representations can in principle cycle while the language is
        # already stable; any repeat is a sound stopping point
        if new_t in seen_rows:
            t_rows = new_t
            break
        seen_rows.add(new_t)
        t_rows = new_t
    stats.iterations += rounds

    def expose(state):
        return state if state == _SINK else state[1]

    delta = [(expose(s), x, frozenset(expose(t) for t in targets))
             for s, x, targets in t_rows]
    delta.extend((_SINK, x, frozenset({_SINK})) for x in alphabet)
    states = set(system.controls) | {_SINK}
    ama = Ama(states, frozenset(alphabet), delta, exposed,
              frozenset({_SINK}), name=f"lang_{system.name}")
    return ConfigSet(ama, exposed)
