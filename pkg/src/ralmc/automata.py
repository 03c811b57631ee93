"""Alternating word automata over stack alphabets.

An automaton here is the finite representation of a regular set of
pushdown configurations: a configuration (control, stack) is encoded as
the word ``stack + '#'`` read topmost symbol first, with the bottom
marker consumed last.  Transitions are triples (state, symbol, target
set); the target set is conjunctive, the choice between triples with the
same source and symbol is disjunctive, and a triple with an empty target
set is an unconditional accept of the remaining word.

Membership is evaluated backwards: the set of states that accept a given
suffix is a boolean profile, and reading one more symbol on the left is
a deterministic function on profiles.  Complementation dualizes the
transition structure (swap and/or, complement the final states); the
hitting-set expansion this needs is exponential in the worst case, which
is acceptable at the scale this package targets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product
from typing import Hashable, Iterable, Sequence

from .model import EndowmentPredicate, RalError, predicate_union_bits

State = Hashable
BOTTOM = "#"


class AmaError(RalError):
    pass


def _minimize(sets: Iterable[frozenset]) -> tuple[frozenset, ...]:
    """Keep only inclusion-minimal sets (smaller conjunctive targets
    dominate larger ones)."""
    pool = sorted(set(sets), key=len)
    keep: list[frozenset] = []
    for s in pool:
        if not any(k <= s for k in keep):
            keep.append(s)
    return tuple(keep)


class Ama:
    """Immutable alternating automaton; build once, then only query."""

    def __init__(self, states: Iterable[State], alphabet: Iterable[str],
                 delta: Iterable[tuple[State, str, frozenset]],
                 initial: Iterable[State], final: Iterable[State],
                 name: str = "ama"):
        self.name = name
        self.states = frozenset(states)
        self.alphabet = frozenset(alphabet)
        self.initial = frozenset(initial)
        self.final = frozenset(final)
        rows: dict[tuple[State, str], tuple[frozenset, ...]] = {}
        grouped: dict[tuple[State, str], set[frozenset]] = {}
        for s, x, targets in delta:
            grouped.setdefault((s, x), set()).add(frozenset(targets))
        for key, sets in grouped.items():
            rows[key] = _minimize(sets)
        self._rows = rows
        if not self.initial <= self.states or not self.final <= self.states:
            raise AmaError("initial/final states not in state set")
        for (s, x), sets in rows.items():
            if s not in self.states or x not in self.alphabet:
                raise AmaError(f"transition from unknown state/symbol ({s!r}, {x!r})")
            for t in sets:
                if not t <= self.states:
                    raise AmaError("transition target outside state set")

    def triples(self):
        for (s, x), sets in sorted(self._rows.items(), key=lambda kv: (repr(kv[0]))):
            for t in sets:
                yield s, x, t

    def row(self, s: State, x: str) -> tuple[frozenset, ...]:
        return self._rows.get((s, x), ())

    def step_profile(self, x: str, profile: frozenset) -> frozenset:
        """States accepting x·w given the states accepting w."""
        out = set()
        for s in self.states:
            for targets in self._rows.get((s, x), ()):
                if targets <= profile:
                    out.add(s)
                    break
        return frozenset(out)

    def suffix_profile(self, word: Sequence[str]) -> frozenset:
        profile = self.final
        for x in reversed(word):
            if x not in self.alphabet:
                raise AmaError(f"symbol {x!r} not in alphabet")
            profile = self.step_profile(x, profile)
        return profile


def ama_member(a: Ama, s: State, word: Sequence[str]) -> bool:
    """Does ``a`` accept (s, word)?  False whenever s is not initial."""
    if s not in a.states:
        raise AmaError(f"unknown state {s!r}")
    return s in a.initial and s in a.suffix_profile(word)


def ama_complement(a: Ama) -> Ama:
    """Dualize: per (state, symbol) swap and/or with missing rows read as
    false, and complement the final states.  Exact boolean complement on
    every (state, word) with an initial state."""
    delta: list[tuple[State, str, frozenset]] = []
    for s in a.states:
        for x in a.alphabet:
            rows = a.row(s, x)
            if not rows:
                delta.append((s, x, frozenset()))  # false dualizes to true
                continue
            if any(not t for t in rows):
                continue  # true dualizes to false: no triple at all
            for choice in product(*rows):
                delta.append((s, x, frozenset(choice)))
    return Ama(a.states, a.alphabet, delta, a.initial,
               a.states - a.final, name=f"co_{a.name}")


@dataclass(frozen=True)
class ConfigSet:
    """A regular configuration set: an Ama whose initial states include one
    state per pushdown control, named by the control itself."""

    ama: Ama
    controls: frozenset

    def __post_init__(self):
        if not self.controls <= self.ama.initial:
            raise AmaError("declared controls must be initial states")

    def accepts(self, control: State, stack: str) -> bool:
        if control not in self.controls:
            return False
        return ama_member(self.ama, control, stack + BOTTOM)

    def complement(self) -> "ConfigSet":
        return ConfigSet(ama_complement(self.ama), self.controls)


def prune(a: Ama, keep_initial: Iterable[State] | None = None) -> Ama:
    """Restrict to states reachable from the (given) initial states."""
    roots = frozenset(keep_initial) if keep_initial is not None else a.initial
    seen = set(roots)
    frontier = list(roots)
    while frontier:
        s = frontier.pop()
        for x in a.alphabet:
            for targets in a.row(s, x):
                for t in targets:
                    if t not in seen:
                        seen.add(t)
                        frontier.append(t)
    delta = [(s, x, t) for s, x, t in a.triples() if s in seen]
    return Ama(seen, a.alphabet, delta, roots & a.initial if keep_initial is None else roots,
               a.final & seen, name=a.name)


def config_lang_equal(a: ConfigSet, b: ConfigSet) -> bool:
    """Exact equality of the two configuration languages on the shared
    controls, by synchronized backward profile search (configuration words
    are exactly one bottom marker after a marker-free stack word)."""
    controls = a.controls | b.controls
    gammas = sorted((a.ama.alphabet | b.ama.alphabet) - {BOTTOM})
    start = (a.ama.suffix_profile(BOTTOM), b.ama.suffix_profile(BOTTOM))
    seen = {start}
    todo = [start]
    while todo:
        pa, pb = todo.pop()
        for c in controls:
            in_a = c in a.controls and c in a.ama.initial and c in pa
            in_b = c in b.controls and c in b.ama.initial and c in pb
            if in_a != in_b:
                return False
        for x in gammas:
            nxt = (a.ama.step_profile(x, pa) if x in a.ama.alphabet else frozenset(),
                   b.ama.step_profile(x, pb) if x in b.ama.alphabet else frozenset())
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return True


# ---------------------------------------------------------------------------
# Predicate compilation
# ---------------------------------------------------------------------------

def compile_predicate(states: Iterable[str],
                      atoms: Iterable[tuple[str, EndowmentPredicate]],
                      name: str = "lab",
                      negate: bool = False) -> ConfigSet:
    """Compile (state, endowment predicate) atoms into a counting-chain
    automaton over {|, #}: one initial state per control, a unary counter
    chain per control, and shared accept/reject sinks.  The automaton is
    total over the alphabet, so dualization never needs a completion pass.
    With ``negate`` the complement is compiled directly from the flipped
    bit vectors, which is cheaper than dualizing and recognizes the same
    language."""
    states = tuple(states)
    by_state: dict[str, list[EndowmentPredicate]] = {q: [] for q in states}
    for q, pred in atoms:
        by_state[q].append(pred)

    delta: list[tuple[State, str, frozenset]] = []
    all_states: set[State] = {"acc", "rej"}
    for x in ("|", BOTTOM):
        delta.append(("acc", x, frozenset({"acc"})))
        delta.append(("rej", x, frozenset({"rej"})))

    for q in states:
        thr, per, bits = predicate_union_bits(by_state[q])
        if negate:
            bits = tuple(not b for b in bits)
        size = thr + per

        def node(i, q=q):
            return q if i == 0 else ("chain", q, i)

        for i in range(size):
            all_states.add(node(i))
            succ = i + 1 if i + 1 < size else thr
            delta.append((node(i), "|", frozenset({node(succ)})))
            delta.append((node(i), BOTTOM, frozenset({"acc" if bits[i] else "rej"})))

    ama = Ama(all_states, {"|", BOTTOM}, delta, frozenset(states),
              frozenset({"acc"}), name=name)
    return ConfigSet(ama, frozenset(states))


def full_configset(controls: Iterable[State], alphabet: Iterable[str],
                   name: str = "all") -> ConfigSet:
    controls = frozenset(controls)
    alphabet = frozenset(alphabet) | {BOTTOM}
    delta = []
    for c in controls:
        for x in alphabet:
            delta.append((c, x, frozenset({"acc"})))
    for x in alphabet:
        delta.append(("acc", x, frozenset({"acc"})))
    ama = Ama(controls | {"acc"}, alphabet, delta, controls, {"acc"}, name=name)
    return ConfigSet(ama, controls)


def empty_configset(controls: Iterable[State], alphabet: Iterable[str],
                    name: str = "none") -> ConfigSet:
    controls = frozenset(controls)
    ama = Ama(controls, frozenset(alphabet) | {BOTTOM}, [], controls,
              frozenset(), name=name)
    return ConfigSet(ama, controls)


# ---------------------------------------------------------------------------
# Dump format
# ---------------------------------------------------------------------------

_SAFE_NAME = re.compile(r"[A-Za-z0-9_$.|]+")


def _name_states(states: Iterable[State]) -> dict[State, str]:
    ordered = sorted(states, key=repr)
    names: dict[State, str] = {}
    taken: set[str] = set()
    for s in ordered:
        if isinstance(s, str) and _SAFE_NAME.fullmatch(s) and s not in taken:
            names[s] = s
            taken.add(s)
    i = 0
    for s in ordered:
        if s in names:
            continue
        while f"s{i}" in taken:
            i += 1
        names[s] = f"s{i}"
        taken.add(f"s{i}")
    return names


def dump_ama(a: Ama) -> str:
    names = _name_states(a.states)
    lines = [f"ama {a.name}"]
    lines.append("states " + " ".join(sorted(names[s] for s in a.states)))
    lines.append("alphabet " + " ".join(sorted(a.alphabet)))
    lines.append("init " + " ".join(sorted(names[s] for s in a.initial)))
    lines.append("final " + " ".join(sorted(names[s] for s in a.final)))
    rows = []
    for s, x, targets in a.triples():
        inner = ",".join(sorted(names[t] for t in targets))
        rows.append(f"{names[s]} -{x}-> {{{inner}}}")
    lines.extend(sorted(rows))
    return "\n".join(lines) + "\n"


def parse_ama(text: str) -> Ama:
    name = "ama"
    states: list[str] = []
    alphabet: list[str] = []
    init: list[str] = []
    final: list[str] = []
    delta: list[tuple[State, str, frozenset]] = []
    arrow = re.compile(r"(\S+)\s+-(.+?)->\s+\{([^}]*)\}")
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        words = line.split()
        if words[0] == "ama":
            name = words[1] if len(words) > 1 else name
        elif words[0] == "states":
            states.extend(words[1:])
        elif words[0] == "alphabet":
            alphabet.extend(words[1:])
        elif words[0] == "init":
            init.extend(words[1:])
        elif words[0] == "final":
            final.extend(words[1:])
        else:
            m = arrow.fullmatch(line)
            if not m:
                raise AmaError(f"bad ama line: {line!r}")
            targets = frozenset(t for t in m.group(3).split(",") if t)
            delta.append((m.group(1), m.group(2), targets))
    return Ama(states, alphabet, delta, init, final, name=name)
