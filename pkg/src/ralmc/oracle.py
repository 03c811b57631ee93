"""Independent ground truth at bounded stack height.

Everything here works on explicit finite game graphs and never touches
the saturation pipeline, so agreement between the two is meaningful.

The sandwich scheme runs every bounded game twice: once where exceeding
the height bound loses for the run-builder (an under-approximation of
the unbounded game) and once where it wins (an over-approximation).
When the two agree the verdict is exact; when they split the instance
stays unknown at that bound and the bound is grown.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Hashable, Iterable

from .model import (CheckError, RAnd, RCoop, RNot, ROr, RProp, RalFormula,
                    Rbm, delta_max)
from .pushdown import Cabpds, Configuration
from . import ctl as C

LOSES = "loses"
WINS = "wins"


@dataclass(frozen=True)
class SandwichVerdict:
    """true/false with the bound that decided it, or unknown."""

    value: bool | None
    bound: int

    @property
    def decisive(self) -> bool:
        return self.value is not None


# ---------------------------------------------------------------------------
# Generic Büchi games
# ---------------------------------------------------------------------------

class Game:
    """Explicit bipartite game; player 0 builds the run and wants to visit
    accepting nodes infinitely often.  Every node must get at least one
    outgoing edge."""

    def __init__(self):
        self.owner: list[int] = []
        self.accepting: list[bool] = []
        self.succ: list[list[int]] = []

    def node(self, owner: int, accepting: bool) -> int:
        self.owner.append(owner)
        self.accepting.append(accepting)
        self.succ.append([])
        return len(self.owner) - 1

    def edge(self, u: int, v: int) -> None:
        self.succ[u].append(v)

    def _attractor(self, player: int, targets: set[int], alive: set[int],
                   pred: list[list[int]]) -> set[int]:
        attr = set(targets)
        counts = {}
        todo = list(targets)
        while todo:
            v = todo.pop()
            for u in pred[v]:
                if u not in alive or u in attr:
                    continue
                if self.owner[u] == player:
                    attr.add(u)
                    todo.append(u)
                else:
                    need = counts.get(u)
                    if need is None:
                        need = sum(1 for w in self.succ[u] if w in alive)
                    need -= 1
                    counts[u] = need
                    if need == 0:
                        attr.add(u)
                        todo.append(u)
        return attr

    def solve_buchi(self) -> list[bool]:
        n = len(self.owner)
        for u in range(n):
            if not self.succ[u]:
                raise ValueError("game nodes need at least one move")
        pred: list[list[int]] = [[] for _ in range(n)]
        for u in range(n):
            for v in self.succ[u]:
                pred[v].append(u)
        alive = set(range(n))
        while True:
            targets = {v for v in alive if self.accepting[v]}
            reach = self._attractor(0, targets, alive, pred)
            doomed = alive - reach
            if not doomed:
                win = [False] * n
                for v in alive:
                    win[v] = True
                return win
            alive -= self._attractor(1, doomed, alive, pred)


# ---------------------------------------------------------------------------
# Bounded Büchi acceptance for plain systems
# ---------------------------------------------------------------------------

def _all_stacks(alphabet: Iterable[str], height: int) -> list[str]:
    out = [""]
    layer = [""]
    letters = sorted(alphabet)
    for _ in range(height):
        layer = [x + w for w in layer for x in letters]
        out.extend(layer)
    return out


class _BoundedBuchi:
    """The finite Büchi game on configurations of height <= H: the
    run-builder picks an enabled rule, the adversary picks the branch.
    Moves past the bound resolve by policy; a configuration with no
    enabled rule loses for the run-builder; an enabled rule with no
    successors wins its branch outright."""

    def __init__(self, system: Cabpds, height: int, policy: str):
        if not system.is_plain():
            raise CheckError("bounded acceptance needs a plain system")
        self.system = system
        self.height = height
        self.policy = policy
        game = Game()
        win = game.node(0, True)
        lose = game.node(0, False)
        game.edge(win, win)
        game.edge(lose, lose)
        index: dict[Configuration, int] = {}
        cfgs = [Configuration(p, w) for p in sorted(system.controls, key=repr)
                for w in _all_stacks(system.alphabet, height)]
        for cfg in cfgs:
            index[cfg] = game.node(0, cfg.control in system.finals)
        for cfg, u in index.items():
            moved = False
            for rule in system.rules_from(cfg.control):
                if not cfg.word().startswith(rule.read):
                    continue
                moved = True
                rest = cfg.word()[len(rule.read):]
                if not rule.targets:
                    game.edge(u, win)
                    continue
                choice = game.node(1, False)
                game.edge(u, choice)
                for tgt, push in rule.targets:
                    word = push + rest
                    child = Configuration(tgt, word[:-1])
                    if child.height > height:
                        game.edge(choice, win if policy == WINS else lose)
                    else:
                        game.edge(choice, index[child])
            if not moved:
                game.edge(u, lose)
        self.index = index
        self.win = game.solve_buchi()

    def accepts(self, cfg: Configuration) -> bool:
        return self.win[self.index[cfg]]


class SandwichOracle:
    """Shared bounded games for one system; verdicts for many starts."""

    def __init__(self, system: Cabpds, h_max: int):
        self.system = system
        self.h_max = h_max
        self._cache: dict[tuple[int, str], _BoundedBuchi] = {}

    def bounded(self, cfg: Configuration, height: int, policy: str) -> bool:
        if cfg.height > height:
            raise CheckError("configuration taller than the bound")
        key = (height, policy)
        if key not in self._cache:
            self._cache[key] = _BoundedBuchi(self.system, height, policy)
        return self._cache[key].accepts(cfg)

    def sweep(self, cfg: Configuration) -> list[int]:
        h = cfg.height + max(1, self.system.max_push()) + 1
        out = []
        while h < self.h_max:
            out.append(h)
            h *= 2
        out.append(self.h_max)
        return out

    def verdict(self, cfg: Configuration) -> SandwichVerdict:
        if cfg.height > self.h_max:
            return SandwichVerdict(None, self.h_max)
        for h in self.sweep(cfg):
            if self.bounded(cfg, h, LOSES):
                return SandwichVerdict(True, h)
            if not self.bounded(cfg, h, WINS):
                return SandwichVerdict(False, h)
        return SandwichVerdict(None, self.h_max)


def bounded_buchi(system: Cabpds, cfg: Configuration, height: int,
                  overflow: str) -> bool:
    """Does the run-builder win the height-bounded Büchi game from cfg?"""
    if overflow not in (LOSES, WINS):
        raise CheckError(f"overflow policy must be {LOSES!r} or {WINS!r}")
    return SandwichOracle(system, height).bounded(cfg, height, overflow)


def sandwich(system: Cabpds, cfg: Configuration, h_max: int) -> SandwichVerdict:
    return SandwichOracle(system, h_max).verdict(cfg)


# ---------------------------------------------------------------------------
# Direct bounded games on the model (independent of the pushdown pipeline)
# ---------------------------------------------------------------------------

Prop3 = Callable[[str, str, int], tuple[bool, bool]]


def _model_prop3(m: Rbm) -> Prop3:
    def eval3(name: str, q: str, eta: int) -> tuple[bool, bool]:
        v = m.prop_holds(name, q, eta)
        return v, v

    return eval3


def _bool3(f: RalFormula, q: str, eta: int, prop3: Prop3) -> tuple[bool, bool]:
    """Three-valued propositional evaluation as a (lower, upper) pair."""
    if isinstance(f, RProp):
        return prop3(f.name, q, eta)
    if isinstance(f, RNot):
        lo, hi = _bool3(f.sub, q, eta, prop3)
        return not hi, not lo
    if isinstance(f, RAnd):
        a, b = _bool3(f.left, q, eta, prop3), _bool3(f.right, q, eta, prop3)
        return a[0] and b[0], a[1] and b[1]
    if isinstance(f, ROr):
        a, b = _bool3(f.left, q, eta, prop3), _bool3(f.right, q, eta, prop3)
        return a[0] or b[0], a[1] or b[1]
    raise CheckError(f"not propositional: {f!r}")


class _RalGame:
    """The bounded coalition game straight from the step conditions: the
    coalition picks a fundable joint action (pool covers its own
    consumption plus the opponents' worst case), the opponents reply,
    the pool updates by the joint production minus consumption."""

    def __init__(self, m: Rbm, coalition: tuple[str, ...], op: str,
                 left: RalFormula, right: RalFormula | None,
                 height: int, policy: str, side: int, prop3: Prop3):
        # side 0 evaluates labels by their lower value, side 1 upper
        self.win_set: set[tuple[str, int]] = set()
        opp = m.opponents(coalition)
        game = Game()
        win = game.node(0, True)
        lose = game.node(0, False)
        game.edge(win, win)
        game.edge(lose, lose)

        def label(f: RalFormula, q: str, eta: int) -> bool:
            return _bool3(f, q, eta, prop3)[side]

        positions = [(q, eta) for q in m.states for eta in range(height + 1)]
        index: dict[tuple[str, int], int] = {}
        for q, eta in positions:
            if op == "U":
                if label(right, q, eta):
                    index[(q, eta)] = win
                    continue
                if not label(left, q, eta):
                    index[(q, eta)] = lose
                    continue
                index[(q, eta)] = game.node(0, False)
            elif op == "G":
                if not label(left, q, eta):
                    index[(q, eta)] = lose
                    continue
                index[(q, eta)] = game.node(0, True)
            elif op == "X":
                index[(q, eta)] = game.node(0, False)
            else:
                raise CheckError(f"unknown temporal operator {op!r}")

        overflow = win if policy == WINS else lose

        for q, eta in positions:
            u = index[(q, eta)]
            if u in (win, lose) or game.succ[u]:
                continue
            dmax = delta_max(m, coalition, q)
            moved = False
            for alpha_a in m.profiles(coalition, q):
                if eta < m.cons(alpha_a) + dmax:
                    continue
                moved = True
                choice = game.node(1, False)
                game.edge(u, choice)
                for alpha_o in m.profiles(opp, q):
                    full = m.combine(coalition, alpha_a, opp, alpha_o)
                    q2 = m.trans[(q, full)]
                    eta2 = eta + m.prod(full) - m.cons(full)
                    if eta2 > height:
                        game.edge(choice, overflow)
                    elif op == "X":
                        game.edge(choice, win if label(left, q2, eta2) else lose)
                    else:
                        game.edge(choice, index[(q2, eta2)])
            if not moved:
                game.edge(u, lose)

        solved = game.solve_buchi()
        for pos, node in index.items():
            if solved[node]:
                self.win_set.add(pos)


def _ral_flat_all(m: Rbm, coalition: tuple[str, ...], op: str,
                  left: RalFormula, right: RalFormula | None, h_cap: int,
                  prop3: Prop3) -> dict[tuple[str, int], SandwichVerdict]:
    """Sandwich verdicts for every (state, endowment <= h_cap) start."""
    out: dict[tuple[str, int], SandwichVerdict] = {}
    pending = {(q, eta) for q in m.states for eta in range(h_cap + 1)}
    max_step = max((m.prod(p) for q in m.states for p in m.full_profiles(q)),
                   default=0)
    h = max(1, max_step) + 1
    heights = []
    while h < h_cap:
        heights.append(h)
        h *= 2
    heights.append(max(h_cap, 1))
    for height in heights:
        if not pending:
            break
        under = _RalGame(m, coalition, op, left, right, height, LOSES, 0, prop3)
        over = _RalGame(m, coalition, op, left, right, height, WINS, 1, prop3)
        for pos in sorted(pending):
            if pos[1] > height:
                continue
            if pos in under.win_set:
                out[pos] = SandwichVerdict(True, height)
                pending.discard(pos)
            elif pos not in over.win_set:
                out[pos] = SandwichVerdict(False, height)
                pending.discard(pos)
    for pos in pending:
        out[pos] = SandwichVerdict(None, heights[-1])
    return out


def bounded_ral_flat(m: Rbm, coalition: Iterable[str], q: str, eta: int,
                     op: str, left: RalFormula, right: RalFormula | None = None,
                     h_cap: int = 16) -> SandwichVerdict:
    """Sandwich verdict for one flat cooperation formula, evaluated on the
    truncated (state, endowment) graph with exact labels."""
    coal = m.coalition(coalition)
    if eta > h_cap:
        raise CheckError("endowment above the oracle cap")
    table = _ral_flat_all(m, coal, op, left, right, h_cap, _model_prop3(m))
    return table[(q, eta)]


def bounded_ral(m: Rbm, q: str, eta: int, f: RalFormula,
                h_cap: int = 16) -> SandwichVerdict:
    """Bottom-up sandwich evaluation of an arbitrary formula: inner
    cooperation subformulae are tabulated over every (state, endowment)
    pair up to the cap, unknowns propagate as Kleene intervals."""
    tables: dict[str, dict[tuple[str, int], tuple[bool, bool]]] = {}
    counter = [0]

    def prop3(name: str, q2: str, eta2: int) -> tuple[bool, bool]:
        if name in tables:
            return tables[name][(q2, eta2)]
        v = m.prop_holds(name, q2, eta2)
        return v, v

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
            coal = m.coalition(g.agents)
            verdicts = _ral_flat_all(m, coal, g.op, left, right, h_cap, prop3)
            name = f"$oracle{counter[0]}"
            counter[0] += 1
            tables[name] = {
                pos: ((v.value is True), (v.value is not False))
                for pos, v in verdicts.items()}
            return RProp(name)
        raise TypeError(f"not a formula: {g!r}")

    lo, hi = _bool3(eliminate(f), q, eta, prop3)
    if lo == hi:
        return SandwichVerdict(lo, h_cap)
    return SandwichVerdict(None, h_cap)


# ---------------------------------------------------------------------------
# Direct bounded CTL evaluation over a plain system
# ---------------------------------------------------------------------------

class BoundedCtl:
    """Three-valued CTL tables over the height-bounded configuration
    graph: fixpoints per operator, with out-of-bound successors resolved
    pessimistically on the lower side and optimistically on the upper."""

    def __init__(self, system: Cabpds, lab, f: C.CtlFormula, height: int):
        if not system.is_plain():
            raise CheckError("bounded CTL needs a plain system")
        self.system = system
        self.height = height
        self.nnf = C.to_nnf(f)
        info = C.closure(self.nnf)
        cfgs = [Configuration(p, w) for p in system.controls
                for w in _all_stacks(system.alphabet, height)]
        moves: dict[Configuration, list[list[Configuration | None]]] = {}
        for cfg in cfgs:
            opts = []
            for rule in system.rules_from(cfg.control):
                if not cfg.word().startswith(rule.read):
                    continue
                rest = cfg.word()[len(rule.read):]
                children: list[Configuration | None] = []
                for tgt, push in rule.targets:
                    word = push + rest
                    child = Configuration(tgt, word[:-1])
                    children.append(child if child.height <= height else None)
                opts.append(children)
            moves[cfg] = opts
        self.cfgs = cfgs
        self.moves = moves
        self.tables: dict[tuple[C.CtlFormula, int], dict[Configuration, bool]] = {}
        order = sorted(info.cl, key=lambda g: _size(g))
        for side in (0, 1):
            for psi in order:
                self._table(psi, side, lab)

    def _kid(self, value: bool | None, side: int) -> bool:
        return bool(side) if value is None else value

    def _table(self, psi: C.CtlFormula, side: int, lab) -> dict[Configuration, bool]:
        key = (psi, side)
        if key in self.tables:
            return self.tables[key]
        t: dict[Configuration, bool] = {}
        if isinstance(psi, C.Lit):
            cs = lab.negative(psi.name) if psi.neg else lab.positive(psi.name)
            for cfg in self.cfgs:
                t[cfg] = cs.accepts(cfg.control, cfg.stack)
        elif isinstance(psi, (C.And, C.Or)):
            a = self._table(psi.left, side, lab)
            b = self._table(psi.right, side, lab)
            comb = (lambda x, y: x and y) if isinstance(psi, C.And) else (lambda x, y: x or y)
            for cfg in self.cfgs:
                t[cfg] = comb(a[cfg], b[cfg])
        elif isinstance(psi, (C.EX, C.AX)):
            a = self._table(psi.sub, side, lab)

            def val(child):
                return self._kid(None if child is None else a[child], side)

            for cfg in self.cfgs:
                opts = self.moves[cfg]
                if isinstance(psi, C.EX):
                    t[cfg] = any(all(val(c) for c in children) for children in opts)
                else:
                    t[cfg] = all(val(c) for children in opts for c in children)
        elif isinstance(psi, (C.EU, C.AU, C.ER, C.AR)):
            a = self._table(psi.left, side, lab)
            b = self._table(psi.right, side, lab)
            universal = isinstance(psi, (C.AU, C.AR))
            release = isinstance(psi, (C.ER, C.AR))
            z = {cfg: release for cfg in self.cfgs}  # lfp from 0, gfp from 1

            def cont(cfg):
                def val(child):
                    return self._kid(None if child is None else z[child], side)

                opts = self.moves[cfg]
                if universal:
                    return all(val(c) for children in opts for c in children)
                return any(all(val(c) for c in children) for children in opts)

            changed = True
            while changed:
                changed = False
                for cfg in self.cfgs:
                    if release:
                        new = b[cfg] and (a[cfg] or cont(cfg))
                    else:
                        new = b[cfg] or (a[cfg] and cont(cfg))
                    if new != z[cfg]:
                        z[cfg] = new
                        changed = True
            t = z
        else:
            raise CheckError(f"unexpected formula {psi!r}")
        self.tables[key] = t
        return t

    def verdict(self, psi: C.CtlFormula, cfg: Configuration) -> SandwichVerdict:
        lo = self.tables[(psi, 0)][cfg]
        hi = self.tables[(psi, 1)][cfg]
        if lo == hi:
            return SandwichVerdict(lo, self.height)
        return SandwichVerdict(None, self.height)


def _size(f: C.CtlFormula) -> int:
    if isinstance(f, C.Lit):
        return 1
    if isinstance(f, (C.EX, C.AX)):
        return 1 + _size(f.sub)
    return 1 + _size(f.left) + _size(f.right)
