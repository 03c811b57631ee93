"""Alternating (Büchi) pushdown systems, compact and plain.

Stack words are strings written topmost symbol first; the bottom marker
``#`` is implicit below every stack and never stored in a configuration.
A compact rule reads a word of length 0..r off the top (length 0 is the
epsilon-read extension, enabled everywhere including on the empty
stack).  Rules may mention ``#`` only in the combination "read through
the bottom and re-establish it": a read ending in ``#`` must come with
pushes ending in ``#``, and vice versa.

``expand_compact`` rewrites a compact system into a plain one (r = 1, no
epsilon reads) by popping long reads one symbol at a time through
storage states and expanding each epsilon read into read-and-re-push
rules over every symbol including the bottom marker.  The rewrite
preserves the accepted configuration language.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Hashable, Iterable

from .model import RalError

Control = Hashable
BOTTOM = "#"


class PushdownError(RalError):
    pass


@dataclass(frozen=True)
class Configuration:
    control: Control
    stack: str  # over Gamma, topmost first, no bottom marker

    def word(self) -> str:
        return self.stack + BOTTOM

    @property
    def height(self) -> int:
        return len(self.stack)


@dataclass(frozen=True)
class Rule:
    control: Control
    read: str  # length 0..r, topmost first; may end with '#'
    targets: frozenset  # of (control, push word) pairs; may be empty

    def __post_init__(self):
        reads_bottom = BOTTOM in self.read
        if reads_bottom and not self.read.endswith(BOTTOM):
            raise PushdownError(f"bottom marker must end the read word: {self.read!r}")
        if reads_bottom and BOTTOM in self.read[:-1]:
            raise PushdownError(f"bottom marker may occur once: {self.read!r}")
        for _, push in self.targets:
            pushes_bottom = BOTTOM in push
            if pushes_bottom and (not push.endswith(BOTTOM) or BOTTOM in push[:-1]):
                raise PushdownError(f"bottom marker must end the push word: {push!r}")
            if pushes_bottom != reads_bottom:
                raise PushdownError(
                    "a rule must re-establish the bottom marker exactly when it reads it")


class Cabpds:
    """r-compact alternating Büchi pushdown system (plain ABPDS when r = 1
    and no rule has an epsilon read; plain PDS when additionally every
    target set is a singleton)."""

    def __init__(self, controls: Iterable[Control], alphabet: Iterable[str],
                 rules: Iterable[Rule], finals: Iterable[Control], r: int,
                 name: str = "system"):
        self.name = name
        self.controls = frozenset(controls)
        self.alphabet = frozenset(alphabet) - {BOTTOM}
        self.rules = tuple(dict.fromkeys(rules))
        self.finals = frozenset(finals)
        self.r = r
        if r < 1:
            raise PushdownError("r must be at least 1")
        if not self.finals <= self.controls:
            raise PushdownError("finals must be controls")
        for rule in self.rules:
            if rule.control not in self.controls:
                raise PushdownError(f"rule from unknown control {rule.control!r}")
            body = rule.read[:-1] if rule.read.endswith(BOTTOM) else rule.read
            if len(body) > r:
                raise PushdownError(f"read word longer than r: {rule.read!r}")
            if any(c not in self.alphabet for c in body):
                raise PushdownError(f"read word off the alphabet: {rule.read!r}")
            for tgt, push in rule.targets:
                if tgt not in self.controls:
                    raise PushdownError(f"rule into unknown control {tgt!r}")
                pbody = push[:-1] if push.endswith(BOTTOM) else push
                if any(c not in self.alphabet for c in pbody):
                    raise PushdownError(f"push word off the alphabet: {push!r}")

    def is_plain(self) -> bool:
        return all(len(r.read) == 1 for r in self.rules)

    def is_pds(self) -> bool:
        return self.is_plain() and all(len(r.targets) == 1 for r in self.rules)

    def rules_from(self, control: Control) -> list[Rule]:
        try:
            index = self._index
        except AttributeError:
            index = {}
            for rule in self.rules:
                index.setdefault(rule.control, []).append(rule)
            self._index = index
        return index.get(control, [])

    def max_push(self) -> int:
        longest = 0
        for rule in self.rules:
            for _, push in rule.targets:
                longest = max(longest, len(push.rstrip(BOTTOM)))
        return longest


def enabled(rule: Rule, cfg: Configuration) -> bool:
    return cfg.word().startswith(rule.read)


def apply_rule(rule: Rule, cfg: Configuration) -> frozenset[Configuration]:
    rest = cfg.word()[len(rule.read):]
    out = set()
    for tgt, push in rule.targets:
        word = push + rest
        if not word.endswith(BOTTOM) or BOTTOM in word[:-1]:
            raise PushdownError(f"rule {rule} corrupts the bottom marker at {cfg}")
        out.add(Configuration(tgt, word[:-1]))
    return frozenset(out)


def successors(c: Cabpds, cfg: Configuration) -> list[frozenset[Configuration]]:
    """One successor set per enabled rule (empty list when nothing fires;
    an enabled rule with an empty target set yields the empty set, which
    discharges its branch of a run)."""
    return [apply_rule(rule, cfg) for rule in c.rules_from(cfg.control) if enabled(rule, cfg)]


# ---------------------------------------------------------------------------
# Compact-to-plain expansion
# ---------------------------------------------------------------------------

def expand_compact(c: Cabpds, name: str | None = None) -> Cabpds:
    """Storage-state expansion to a plain ABPDS.

    Width-1 rules are copied.  A rule reading u = u0 u1 ... pops u0 and
    moves to a storage state remembering what remains of u, pops one
    symbol per step, and discharges the rule's targets on the last one.
    An epsilon read becomes one read-and-re-push rule per symbol of the
    alphabet extended with the bottom marker.  Storage states are never
    accepting, so the expansion preserves the accepted language.
    """
    rules: list[Rule] = []
    controls = set(c.controls)
    for rule in c.rules:
        if len(rule.read) == 0:
            for gamma in sorted(c.alphabet) + [BOTTOM]:
                targets = frozenset((tgt, push + gamma) for tgt, push in rule.targets)
                rules.append(Rule(rule.control, gamma, targets))
        elif len(rule.read) == 1:
            rules.append(rule)
        else:
            # storage states are keyed by (source, read word, remaining
            # suffix), so rules sharing a read word share their pop chain
            read = rule.read
            prev: Control = rule.control
            for i in range(len(read) - 1):
                sto = ("sto", rule.control, read, read[i + 1:])
                controls.add(sto)
                rules.append(Rule(prev, read[i], frozenset({(sto, "")})))
                prev = sto
            rules.append(Rule(prev, read[-1], rule.targets))
    return Cabpds(controls, c.alphabet, rules, c.finals, 1,
                  name=name or f"{c.name}_plain")


def normalize_pushes(c: Cabpds, name: str | None = None) -> Cabpds:
    """Rewrite a plain system so every push word has length at most two,
    threading longer pushes through fresh single-purpose controls (pushed
    bottom symbol first, one symbol per step).  The fresh controls are
    never accepting, so the configuration language over the original
    controls is unchanged.  Saturation favours this shape: obligation
    sets get shared through the fresh controls instead of being expanded
    per rule."""
    if not c.is_plain():
        raise PushdownError("normalize_pushes needs a plain system")
    rules: list[Rule] = []
    controls = set(c.controls)

    def ensure_chain(tgt: Control, u: str) -> None:
        # chain state ("push", tgt, u): u[:-1] remains to push, u[-1] is the
        # symbol expected on top; one rule per state, shared across rules
        while len(u) >= 2:
            state = ("push", tgt, u)
            if state in controls:
                return
            controls.add(state)
            if len(u) == 2:
                rules.append(Rule(state, u[1], frozenset({(tgt, u)})))
                return
            rules.append(Rule(state, u[-1],
                              frozenset({(("push", tgt, u[:-1]), u[-2:])})))
            u = u[:-1]

    for rule in c.rules:
        new_targets = []
        for tgt, push in rule.targets:
            marked = push.endswith(BOTTOM)
            body = push[:-1] if marked else push
            if len(body) <= 2:
                new_targets.append((tgt, push))
                continue
            ensure_chain(tgt, body[:-1])
            entry = ("push", tgt, body[:-1])
            new_targets.append((entry, body[-2:] + (BOTTOM if marked else "")))
        rules.append(Rule(rule.control, rule.read, frozenset(new_targets)))
    return Cabpds(controls, c.alphabet, rules, c.finals, 1,
                  name=name or f"{c.name}_n")


def normalize_alternation(c: Cabpds, fanout: int = 2, name: str | None = None) -> Cabpds:
    """Split wide conjunctive target sets into a binary-ish tree of
    alternating steps through fresh controls that read the top symbol and
    push it back, so the stack is untouched until the leaves fire the
    original pushes.  The fresh controls are never accepting and every
    detour through them is finite, so the accepted configuration language
    is unchanged.  Saturation is the beneficiary: obligation antichains
    get minimized at every tree node instead of being expanded per rule."""
    if not c.is_plain():
        raise PushdownError("normalize_alternation needs a plain system")
    rules: list[Rule] = []
    controls = set(c.controls)
    for idx, rule in enumerate(c.rules):
        if len(rule.targets) <= fanout:
            rules.append(rule)
            continue
        parts = sorted(rule.targets, key=repr)
        node = 0

        def split(chunk: list, depth: int) -> Control:
            nonlocal node
            me = ("alt", idx, node, rule.control)
            node += 1
            controls.add(me)
            if len(chunk) <= fanout:
                rules.append(Rule(me, rule.read, frozenset(chunk)))
                return me
            step = (len(chunk) + fanout - 1) // fanout
            kids = [split(chunk[i:i + step], depth + 1)
                    for i in range(0, len(chunk), step)]
            repush = rule.read
            rules.append(Rule(me, rule.read,
                              frozenset((k, repush) for k in kids)))
            return me

        top = split(parts, 0)
        rules.append(Rule(rule.control, rule.read,
                          frozenset({(top, rule.read)})))
    return Cabpds(controls, c.alphabet, rules, c.finals, 1,
                  name=name or f"{c.name}_a")


# ---------------------------------------------------------------------------
# Bounded run-tree prefixes (used to compare against strategy outcome trees)
# ---------------------------------------------------------------------------

def run_tree_prefixes(c: Cabpds, cfg: Configuration, depth: int) -> frozenset:
    """The set of depth-bounded run tree prefixes from cfg.

    A tree is (configuration, children) where children is either a
    frozenset of subtrees (one per distinct successor of the chosen
    rule), "cut" for a node truncated at the depth bound, or "dead" for
    a configuration with no enabled rule.  Discharged branches (a rule
    with an empty successor set) appear as an empty children set.
    """

    @lru_cache(maxsize=None)
    def go(node: Configuration, d: int) -> frozenset:
        if d == 0:
            return frozenset({(node, "cut")})
        succ = successors(c, node)
        if not succ:
            return frozenset({(node, "dead")})
        trees = set()
        for child_set in succ:
            options = [go(child, d - 1) for child in sorted(child_set, key=repr)]
            for combo in product(*options):
                trees.add((node, frozenset(combo)))
        return frozenset(trees)

    try:
        return go(cfg, depth)
    finally:
        go.cache_clear()


# ---------------------------------------------------------------------------
# Dump format
# ---------------------------------------------------------------------------

def _state_names(controls: Iterable[Control]) -> dict[Control, str]:
    from .automata import _name_states

    return _name_states(controls)


def dump_cabpds(c: Cabpds) -> str:
    names = _state_names(c.controls)
    lines = [f"cabpds r={c.r}"]
    lines.append("alphabet " + " ".join(sorted(c.alphabet)))
    lines.append("controls " + " ".join(sorted(names[s] for s in c.controls)))
    lines.append("finals " + " ".join(sorted(names[s] for s in c.finals)))
    rows = []
    for rule in c.rules:
        body = " ; ".join(f'{names[t]}:"{p}"'
                          for t, p in sorted(rule.targets, key=repr))
        rows.append(f'{names[rule.control]} / "{rule.read}" -> {{ {body} }}')
    lines.extend(sorted(rows))
    return "\n".join(lines) + "\n"


_RULE_RE = re.compile(r'(\S+)\s*/\s*"([^"]*)"\s*->\s*\{(.*)\}')
_TGT_RE = re.compile(r'(\S+)\s*:\s*"([^"]*)"')


def parse_cabpds(text: str) -> Cabpds:
    r = 1
    alphabet: list[str] = []
    controls: list[str] = []
    finals: list[str] = []
    rules: list[Rule] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("cabpds"):
            m = re.search(r"r=(\d+)", line)
            if m:
                r = int(m.group(1))
        elif line.startswith("alphabet"):
            alphabet.extend(line.split()[1:])
        elif line.startswith("controls"):
            controls.extend(line.split()[1:])
        elif line.startswith("finals"):
            finals.extend(line.split()[1:])
        else:
            m = _RULE_RE.fullmatch(line)
            if not m:
                raise PushdownError(f"bad cabpds line: {line!r}")
            targets = frozenset((t, p) for t, p in _TGT_RE.findall(m.group(3)))
            rules.append(Rule(m.group(1), m.group(2), targets))
    return Cabpds(controls, alphabet, rules, finals, r)
