"""Tree topology enumeration, decorated amplitudes and exact tree sums.

Topologies are nested tuples: a leaf is its integer label, an internal
vertex is the tuple of its children sorted by minimum leaf, and every
internal vertex has degree >= 3 (at least two children plus the parent
edge).  Rooted sums hang the tree below the offshell root leaf (sentinel
``ROOT``); unrooted sums designate the largest leg as a virtual root and
amputate it.

Two evaluation paths compute every sum:

* :func:`amplitude` is the per-tree reference.  It assembles the fully
  symbolic product of vertex rules and internal propagators and performs the
  onshell substitution at the end.
* :class:`TreeSumEngine` distributes the sum over shared subtrees.  Because
  the vertex rule at the top of a subtree depends only on the leg partition,
  the sum over shapes factorizes exactly; this is plain distributivity in an
  exact commutative ring, and the test suite pins the two paths against each
  other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Iterable, Iterator, Mapping, Sequence

from .algebra import (
    AlgebraError,
    Kind,
    MONO_ONE,
    Monomial,
    Polynomial,
    RationalFunction,
    RF_MINUS_I,
    RF_ONE,
    RF_ZERO,
    Scalar,
    Symbol,
    coupling,
    edge_symbol,
    rf,
)
from .rules import (
    ROOT,
    DiffeoSpec,
    Interaction,
    TheorySpec,
    canonical_subset,
    edge_var,
    generalized_vertex,
    interaction_vertex,
    propagator,
)
from .series import tree_sum_closed_form

FREE = ("F",)


def interaction_tag(s: int) -> tuple:
    return ("I", s)


def set_partitions(items: Sequence) -> Iterator[list[list]]:
    """All unordered partitions of ``items`` into nonempty blocks."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield part + [[first]]


def _min_leaf(structure) -> int:
    while isinstance(structure, tuple):
        structure = structure[0]
    return structure


@lru_cache(maxsize=None)
def _rooted_structures(labels: frozenset) -> tuple:
    """All rooted trees over a leaf set; internal vertices have >= 2 children."""
    if len(labels) == 1:
        return (next(iter(labels)),)
    out = []
    for partition in set_partitions(sorted(labels)):
        if len(partition) < 2:
            continue
        options = [_rooted_structures(frozenset(block)) for block in partition]
        for combo in itertools.product(*options):
            out.append(tuple(sorted(combo, key=_min_leaf)))
    return tuple(out)


@lru_cache(maxsize=None)
def topology_count(n_leaves: int, rooted: bool = True) -> int:
    """Number of topologies; the series functional equation is the test oracle."""
    if rooted:
        if n_leaves < 1:
            raise AlgebraError("need at least one leaf")
        return len(_rooted_structures(frozenset(range(1, n_leaves + 1))))
    if n_leaves < 3:
        raise AlgebraError("unrooted sums need at least three legs")
    return len(_rooted_structures(frozenset(range(1, n_leaves))))


@dataclass(frozen=True)
class TreeTopology:
    """A tree with labeled external legs.

    ``structure`` spans the onshell legs (rooted) or all legs except the
    virtual root (unrooted); the root/virtual-root leaf is implicit.
    """

    structure: object
    labels: frozenset[int]
    rooted: bool
    virtual_root: int | None = None

    def encoding(self) -> str:
        def render(node) -> str:
            if isinstance(node, tuple):
                return "(" + ",".join(render(c) for c in node) + ")"
            return str(node)

        head = "root" if self.rooted else f"leg{self.virtual_root}"
        return f"{head}:{render(self.structure)}"

    def universe(self) -> frozenset[int]:
        return self.labels | {ROOT} if self.rooted else self.labels

    def internal_vertices(self) -> list[tuple]:
        """Internal vertex nodes in preorder."""
        out: list[tuple] = []

        def walk(node):
            if isinstance(node, tuple):
                out.append(node)
                for child in node:
                    walk(child)

        walk(self.structure)
        return out

    def internal_edge_count(self) -> int:
        return sum(
            1
            for node in self.internal_vertices()
            for child in node
            if isinstance(child, tuple)
        )


def enumerate_trees(leaf_labels: Iterable[int], rooted: bool = True) -> list[TreeTopology]:
    """Complete duplicate-free list of tree topologies over the labels."""
    labels = frozenset(leaf_labels)
    if rooted:
        if len(labels) < 1:
            raise AlgebraError("rooted enumeration needs at least one onshell leg")
        return [TreeTopology(s, labels, True) for s in _rooted_structures(labels)]
    if len(labels) < 3:
        raise AlgebraError("unrooted enumeration needs at least three legs")
    v = max(labels)
    return [
        TreeTopology(s, labels, False, v) for s in _rooted_structures(labels - {v})
    ]


def admissible_tags(valence: int, interactions: Sequence[Interaction]) -> list[tuple]:
    tags = [FREE]
    tags.extend(interaction_tag(it.power) for it in interactions if valence >= it.power)
    return tags


def enumerate_decorations(
    topology: TreeTopology,
    interactions: Sequence[Interaction],
    *,
    exactly_one: bool = False,
) -> list[tuple]:
    """Decoration tuples (one tag per internal vertex, preorder)."""
    valences = [len(node) + 1 for node in topology.internal_vertices()]
    pools = [admissible_tags(v, interactions) for v in valences]
    decos = []
    for combo in itertools.product(*pools):
        n_int = sum(1 for tag in combo if tag[0] == "I")
        if exactly_one and n_int != 1:
            continue
        decos.append(combo)
    return decos


def _leaves(node) -> frozenset[int]:
    if isinstance(node, tuple):
        return frozenset().union(*(_leaves(c) for c in node))
    return frozenset((node,))


def amplitude(
    topology: TreeTopology,
    decoration: tuple | None,
    theory: TheorySpec,
    diffeo: DiffeoSpec = DiffeoSpec.symbolic(),
    onshell: Iterable[int] = (),
    include_root_propagator: bool = False,
) -> RationalFunction:
    """Reference amplitude of one decorated tree.

    Vertex rules and internal propagators are multiplied fully symbolically;
    the singleton variables of onshell legs are substituted to zero at the
    end.  External propagators are excluded except the root one when flagged.
    """
    onshell = frozenset(onshell)
    if not onshell <= topology.labels:
        raise AlgebraError("onshell legs must be external legs")
    if include_root_propagator and not topology.rooted:
        raise AlgebraError("only rooted sums include the root propagator")
    universe = topology.universe()
    gen = theory.generalized
    vertices = topology.internal_vertices()
    if decoration is None:
        decoration = tuple(FREE for _ in vertices)
    if len(decoration) != len(vertices):
        raise AlgebraError("decoration length does not match the vertex count")
    counter = itertools.count()

    def walk(node) -> RationalFunction:
        tag = decoration[next(counter)]
        blocks = [_leaves(child) for child in node]
        parent = universe - _leaves(node)
        valence = len(node) + 1
        if tag == FREE:
            value = generalized_vertex(
                blocks + [parent], universe, diffeo=diffeo, generalized=gen
            )
        elif tag[0] == "I":
            s = tag[1]
            if valence < s:
                raise AlgebraError(f"interaction of power {s} needs valence >= {s}")
            match = [it for it in theory.interactions if it.power == s]
            coupling_value = match[0].coupling_value if match else None
            value = interaction_vertex(valence, s, diffeo, coupling_value)
        else:
            raise AlgebraError(f"unknown decoration tag {tag!r}")
        for child in node:
            if isinstance(child, tuple):
                value = value * propagator(_leaves(child), universe, generalized=gen)
                value = value * walk(child)
        return value

    if not isinstance(topology.structure, tuple):
        value = RF_ONE  # bare offshell edge, no vertex
    else:
        value = walk(topology.structure)
    if include_root_propagator:
        value = value * propagator(topology.labels, universe, generalized=gen)
    bindings = {
        edge_symbol(frozenset((leg,)), gen): RF_ZERO
        for leg in onshell
    }
    return value.substitute(bindings)


@dataclass
class TreeSumResult:
    value: RationalFunction
    tree_count: int
    decorated_count: int
    metadata: dict = field(default_factory=dict)


_NO_INT = 0  # key for "no interaction vertex yet" in the valence-tracked sums

# A "bag" is a partial-fraction accumulator: denominator monomial -> numerator
# polynomial.  Sums of many small rational functions merge by denominator
# instead of forcing a common one, and per-entry reduction lets the edge
# cancellations collapse entries block by block.
Bag = dict


def _bag_of(value: RationalFunction) -> Bag:
    return {} if value.is_zero() else {value.den: value.num}


_BAG_ONE = _bag_of(RF_ONE)


def _bag_insert(bag: Bag, den: Monomial, num: Polynomial) -> None:
    acc = bag.get(den)
    total = num if acc is None else acc + num
    if total.is_zero():
        bag.pop(den, None)
    else:
        bag[den] = total


def _bag_add(bag: Bag | None, other: Bag) -> Bag:
    if bag is None:
        return dict(other)
    for den, num in other.items():
        _bag_insert(bag, den, num)
    return bag


def _bag_mul_rf(bag: Bag, factor: RationalFunction) -> Bag:
    if factor.is_zero():
        return {}
    out: Bag = {}
    for den, num in bag.items():
        r = RationalFunction(num * factor.num, den * factor.den)
        if not r.is_zero():
            _bag_insert(out, r.den, r.num)
    return out


def _bag_mul(b1: Bag, b2: Bag) -> Bag:
    out: Bag = {}
    for d1, n1 in b1.items():
        for d2, n2 in b2.items():
            r = RationalFunction(n1 * n2, d1 * d2)
            if not r.is_zero():
                _bag_insert(out, r.den, r.num)
    return out


def _bag_normalize(bag: Bag) -> Bag:
    """Re-reduce every entry and re-merge until stable, so numerators that
    became divisible by their denominator after accumulation collapse."""
    current = bag
    while True:
        changed = False
        nxt: Bag = {}
        for den, num in current.items():
            r = RationalFunction(num, den)
            if r.is_zero():
                changed = True
                continue
            if r.den != den:
                changed = True
            _bag_insert(nxt, r.den, r.num)
        if not changed and len(nxt) == len(current):
            return nxt
        if nxt == current:
            return nxt
        current = nxt


def _bag_total(bag: Bag) -> RationalFunction:
    """Combine a bag into one rational function over the common denominator
    in a single pass (sequential pairwise addition would be quadratic)."""
    if not bag:
        return RF_ZERO
    if len(bag) == 1:
        ((den, num),) = bag.items()
        return RationalFunction(num, den)
    lcm = MONO_ONE
    for den in bag:
        lcm = lcm.lcm(den)
    acc: dict = {}
    for den, num in bag.items():
        shift = lcm.try_div(den)
        if shift.is_one():
            for m, c in num.terms.items():
                prev = acc.get(m)
                total = c if prev is None else prev + c
                if total.is_zero():
                    acc.pop(m, None)
                else:
                    acc[m] = total
        else:
            for m, c in num.terms.items():
                mm = m * shift
                prev = acc.get(mm)
                total = c if prev is None else prev + c
                if total.is_zero():
                    acc.pop(mm, None)
                else:
                    acc[mm] = total
    return RationalFunction(Polynomial(acc, _trusted=True), lcm)


class TreeSumEngine:
    """Distributive evaluation of decorated tree sums over shared subtrees.

    The sum over all decorated trees on a leg block factorizes through the
    partition at the block's top vertex, because the vertex rule depends on
    the partition only.  ``policy`` selects the decoration family:

      * ``free``   - every vertex is a diffeomorphism vertex,
      * ``all``    - every vertex is free or any admissible interaction,
      * ``single`` - exactly one interaction vertex, values keyed by its
                     valence (for the term-by-term cancellation check).
    """

    def __init__(
        self,
        universe: frozenset[int],
        *,
        onshell: frozenset[int],
        diffeo: DiffeoSpec,
        theory: TheorySpec,
        policy: str = "free",
    ):
        if policy not in ("free", "all", "single"):
            raise AlgebraError(f"unknown decoration policy {policy!r}")
        self.universe = universe
        self.onshell = onshell
        self.diffeo = diffeo
        self.theory = theory
        self.policy = policy
        self._values: dict[frozenset, dict] = {}
        self._counts: dict[frozenset, dict] = {}

    # -- vertex factors ----------------------------------------------------

    def _vertex(self, tag: tuple, blocks: list[frozenset[int]], parent: frozenset[int]):
        if tag == FREE:
            return generalized_vertex(
                blocks + [parent],
                self.universe,
                diffeo=self.diffeo,
                generalized=self.theory.generalized,
                onshell=self.onshell,
            )
        s = tag[1]
        match = [it for it in self.theory.interactions if it.power == s]
        coupling_value = match[0].coupling_value if match else None
        return interaction_vertex(len(blocks) + 1, s, self.diffeo, coupling_value)

    def _tags(self, valence: int) -> list[tuple]:
        if self.policy == "free":
            return [FREE]
        return admissible_tags(valence, self.theory.interactions)

    # -- value sums ---------------------------------------------------------

    def _subtree_bags(self, block: frozenset[int]) -> dict:
        """Bag-valued sum over rooted decorated subtrees on ``block``, keyed
        by the policy key; includes the top vertex and child propagators, not
        the parent propagator."""
        cached = self._values.get(block)
        if cached is not None:
            return cached
        result: dict = {}
        parent = self.universe - block
        gen = self.theory.generalized
        for partition in set_partitions(sorted(block)):
            if len(partition) < 2:
                continue
            blocks = [frozenset(b) for b in partition]
            child_factors = []
            for b in blocks:
                if len(b) == 1:
                    child_factors.append({_NO_INT: _BAG_ONE})
                else:
                    prop = propagator(b, self.universe, generalized=gen)
                    child_factors.append(
                        {key: _bag_mul_rf(bag, prop) for key, bag in self._subtree_bags(b).items()}
                    )
            merged: dict = {_NO_INT: _BAG_ONE}
            for factor in child_factors:
                nxt: dict = {}
                for k1, bag1 in merged.items():
                    for k2, bag2 in factor.items():
                        if self.policy == "single" and k1 != _NO_INT and k2 != _NO_INT:
                            continue
                        key = k1 if k2 == _NO_INT else k2
                        prod = _bag_mul(bag1, bag2)
                        if prod:
                            nxt[key] = _bag_add(nxt.get(key), prod)
                merged = nxt
                if not merged:
                    break
            if not merged:
                continue
            valence = len(blocks) + 1
            for tag in self._tags(valence):
                vval = self._vertex(tag, blocks, parent)
                if vval.is_zero():
                    continue
                for key, bag in merged.items():
                    if tag[0] == "I":
                        if self.policy == "single":
                            if key != _NO_INT:
                                continue
                            new_key = valence
                        else:
                            new_key = key
                    else:
                        new_key = key
                    result[new_key] = _bag_add(result.get(new_key), _bag_mul_rf(bag, vval))
        result = {k: _bag_normalize(bag) for k, bag in result.items()}
        result = {k: bag for k, bag in result.items() if bag}
        self._values[block] = result
        return result

    def subtree_sums(self, block: frozenset[int]) -> dict:
        """Keyed rational-function sums over decorated subtrees on ``block``."""
        keyed = {k: _bag_total(bag) for k, bag in self._subtree_bags(block).items()}
        return keyed or {_NO_INT: RF_ZERO}

    def subtree_counts(self, block: frozenset[int]) -> dict:
        """Decorated-tree counts with the same keys (type admissibility only)."""
        cached = self._counts.get(block)
        if cached is not None:
            return cached
        result: dict = {}
        for partition in set_partitions(sorted(block)):
            if len(partition) < 2:
                continue
            blocks = [frozenset(b) for b in partition]
            merged = {_NO_INT: 1}
            for b in blocks:
                factor = {_NO_INT: 1} if len(b) == 1 else self.subtree_counts(b)
                nxt: dict = {}
                for k1, c1 in merged.items():
                    for k2, c2 in factor.items():
                        if self.policy == "single" and k1 != _NO_INT and k2 != _NO_INT:
                            continue
                        key = k1 if k2 == _NO_INT else k2
                        nxt[key] = nxt.get(key, 0) + c1 * c2
                merged = nxt
            valence = len(blocks) + 1
            for tag in self._tags(valence):
                for key, cnt in merged.items():
                    if tag[0] == "I":
                        if self.policy == "single":
                            if key != _NO_INT:
                                continue
                            new_key = valence
                        else:
                            new_key = key
                    else:
                        new_key = key
                    result[new_key] = result.get(new_key, 0) + cnt
        self._counts[block] = result
        return result


def _total(keyed: Mapping, *, drop_no_int: bool = False):
    total = RF_ZERO
    for key, val in keyed.items():
        if drop_no_int and key == _NO_INT:
            continue
        total = total + val
    return total


def rooted_tree_sum(
    n: int,
    diffeo: DiffeoSpec = DiffeoSpec.symbolic(),
    *,
    theory: TheorySpec | None = None,
) -> TreeSumResult:
    """Tree sum b_n: n onshell legs, one offshell root edge with propagator."""
    if n < 1:
        raise AlgebraError("tree sums are indexed from 1")
    theory = theory if theory is not None else TheorySpec.free()
    legs = frozenset(range(1, n + 1))
    meta = {"n": n, "kind": "b", "propagator": theory.kind}
    if n == 1:
        return TreeSumResult(RF_ONE, 1, 1, meta)
    engine = TreeSumEngine(
        legs | {ROOT}, onshell=legs, diffeo=diffeo, theory=theory, policy="free"
    )
    body = engine.subtree_sums(legs).get(_NO_INT, RF_ZERO)
    value = body * propagator(legs, legs | {ROOT}, generalized=theory.generalized)
    count = topology_count(n, True)
    return TreeSumResult(value, count, count, meta)


def interacting_rooted_tree_sum(
    n: int,
    s: int,
    diffeo: DiffeoSpec = DiffeoSpec.symbolic(),
    mode: str = "all_vertices",
    *,
    coupling_value: RationalFunction | None = None,
) -> TreeSumResult:
    """Tree sum b'_n of the single-interaction theory, by decoration
    enumeration (``all_vertices``) or by the reduced gluing in which only
    s-valent interaction vertices hang below diffeomorphism tree sums
    (``s_only``).  Both modes evaluate to the same rational function."""
    if mode not in ("all_vertices", "s_only"):
        raise AlgebraError(f"unknown b' mode {mode!r}")
    if n < 1:
        raise AlgebraError("tree sums are indexed from 1")
    lam = coupling_value if coupling_value is not None else rf(coupling(s))
    theory = TheorySpec(interactions=(Interaction(s, lam),))
    legs = frozenset(range(1, n + 1))
    universe = legs | {ROOT}
    meta = {"n": n, "kind": "bprime", "s": s, "mode": mode}
    if n == 1:
        return TreeSumResult(RF_ONE, 1, 1, meta)
    count = topology_count(n, True)
    if mode == "all_vertices":
        engine = TreeSumEngine(
            universe, onshell=legs, diffeo=diffeo, theory=theory, policy="all"
        )
        value = engine.subtree_sums(legs).get(_NO_INT, RF_ZERO) * propagator(legs, universe)
        decorated = engine.subtree_counts(legs).get(_NO_INT, 0)
        return TreeSumResult(value, count, decorated, meta)
    value, glued_terms = _reduced_bprime(legs, universe, s, lam, diffeo)
    meta["glued_terms"] = glued_terms
    return TreeSumResult(value, count, glued_terms, meta)


def _reduced_bprime(
    legs: frozenset[int],
    universe: frozenset[int],
    s: int,
    lam: RationalFunction,
    diffeo: DiffeoSpec,
) -> tuple[RationalFunction, int]:
    """Reduced b'_n: a diffeomorphism tree sum under the root edge with pure
    power-s interaction trees attached below through uncancelled edges."""
    b_table = {m: tree_sum_closed_form(m, diffeo.a) for m in range(1, len(legs) + 1)}
    root_prop = propagator(legs, universe)
    lambda_cache: dict[frozenset, RationalFunction] = {}

    def lambda_tree(group: frozenset[int]) -> RationalFunction:
        # Sum over pure interaction trees with leg set `group` below an
        # uncancelled edge; includes the propagator of that edge.
        cached = lambda_cache.get(group)
        if cached is not None:
            return cached
        acc = RF_ZERO
        for partition in set_partitions(sorted(group)):
            if len(partition) != s - 1:
                continue
            prod = RF_ONE
            for sub in partition:
                if len(sub) >= 2:
                    prod = prod * lambda_tree(frozenset(sub))
                    if prod.is_zero():
                        break
            else:
                acc = acc + prod
        value = propagator(group, universe) * (lam * RF_MINUS_I) * acc
        lambda_cache[group] = value
        return value

    total: Bag = {}
    glued_terms = 0
    for partition in set_partitions(sorted(legs)):
        m = len(partition)
        if m < 2:
            continue
        top = b_table[m]
        if m == s - 1:
            top = top + root_prop * (lam * RF_MINUS_I)
        factor = top
        for group in partition:
            if len(group) >= 2:
                factor = factor * lambda_tree(frozenset(group))
            if factor.is_zero():
                break
        if not factor.is_zero():
            glued_terms += 1
            _bag_insert(total, factor.den, factor.num)
    return _bag_total(total), glued_terms


def amputated_tree_sum(
    n: int,
    offshell: Iterable[int],
    theory: TheorySpec | None = None,
    diffeo: DiffeoSpec = DiffeoSpec.symbolic(),
) -> TreeSumResult:
    """Amputated sum A^j_n over all trees and admissible decorations with the
    legs outside ``offshell`` set onshell."""
    if n < 3:
        raise AlgebraError("amputated sums need at least three legs")
    theory = theory if theory is not None else TheorySpec.free()
    legs = frozenset(range(1, n + 1))
    offshell = frozenset(offshell)
    if not offshell <= legs:
        raise AlgebraError("offshell legs must be external legs")
    onshell = legs - offshell
    v = max(legs)
    policy = "all" if theory.interactions else "free"
    engine = TreeSumEngine(legs, onshell=onshell, diffeo=diffeo, theory=theory, policy=policy)
    value = _total(engine.subtree_sums(legs - {v}))
    counts = engine.subtree_counts(legs - {v})
    meta = {"n": n, "kind": "A", "offshell": sorted(offshell), "propagator": theory.kind}
    return TreeSumResult(value, topology_count(n, False), sum(counts.values()), meta)


def symmetrized_one_offshell_sum(
    n: int,
    theory: TheorySpec | None = None,
    diffeo: DiffeoSpec = DiffeoSpec.symbolic(),
) -> RationalFunction:
    """Symmetric display of A^1_n: the sum over the choice of offshell leg."""
    total = RF_ZERO
    for j in range(1, n + 1):
        total = total + amputated_tree_sum(n, {j}, theory, diffeo).value
    return total


def coupling_linear_tree_sum(
    n: int,
    s: int,
    diffeo: DiffeoSpec = DiffeoSpec.symbolic(),
    *,
    coupling_value: RationalFunction | None = None,
) -> TreeSumResult:
    """All-onshell amputated sum S^(s)_n over trees with exactly one
    interaction vertex; metadata carries the per-valence decomposition."""
    if n < 3:
        raise AlgebraError("amputated sums need at least three legs")
    lam = coupling_value if coupling_value is not None else rf(coupling(s))
    theory = TheorySpec(interactions=(Interaction(s, lam),))
    legs = frozenset(range(1, n + 1))
    v = max(legs)
    engine = TreeSumEngine(legs, onshell=legs, diffeo=diffeo, theory=theory, policy="single")
    keyed = engine.subtree_sums(legs - {v})
    by_valence = {k: val for k, val in keyed.items() if k != _NO_INT}
    value = _total(keyed, drop_no_int=True)
    counts = engine.subtree_counts(legs - {v})
    decorated = sum(c for k, c in counts.items() if k != _NO_INT)
    meta = {"n": n, "kind": "S", "s": s, "by_valence": by_valence}
    return TreeSumResult(value, topology_count(n, False), decorated, meta)


def recursive_tree_sum(
    n: int,
    diffeo: DiffeoSpec = DiffeoSpec.symbolic(),
    *,
    generalized: bool = True,
) -> RationalFunction:
    """b_n through the root-vertex recursion over leg partitions and subset
    sums at the top vertex (no tree enumeration)."""
    if n < 1:
        raise AlgebraError("tree sums are indexed from 1")
    memo: dict[int, RationalFunction] = {1: RF_ONE}

    def b(m: int) -> RationalFunction:
        if m in memo:
            return memo[m]
        legs = frozenset(range(1, m + 1))
        universe = legs | {ROOT}
        total = RF_ZERO
        for partition in set_partitions(sorted(legs)):
            k = len(partition)
            if k < 2:
                continue
            coeff = RF_ONE
            for block in partition:
                coeff = coeff * b(len(block))
                if coeff.is_zero():
                    break
            if coeff.is_zero():
                continue
            far_blocks = [frozenset(b_) for b_ in partition] + [frozenset((ROOT,))]
            vsum = RF_ZERO
            for j in range(1, k + 1):
                weight = diffeo.a(k - j) * diffeo.a(j - 1)
                if weight.is_zero():
                    continue
                subset_sum = RF_ZERO
                for choice in itertools.combinations(far_blocks, j):
                    union = frozenset().union(*choice)
                    if ROOT in union:
                        union = universe - union
                    if len(union) == 1:
                        continue  # onshell lower leg
                    subset_sum = subset_sum + edge_var(union, universe, generalized=generalized)
                if subset_sum.is_zero():
                    continue
                vsum = vsum + (weight * subset_sum).scaled(
                    Scalar(factorial(k + 1 - j) * factorial(j))
                )
            total = total + coeff * vsum
        root = edge_symbol(frozenset(range(1, m + 1)), generalized)
        value = total.scaled(Scalar(Fraction(-1, 2))).over(Monomial.of(root))
        memo[m] = value
        return value

    return b(n)


def glue_four_point(
    diffeo: DiffeoSpec = DiffeoSpec.symbolic(),
    theory: TheorySpec | None = None,
) -> RationalFunction:
    """A^4_4 (or A'^4_4 for a single power-3 interaction) assembled from tree
    sums and the three pairings of the external legs, without enumeration."""
    theory = theory if theory is not None else TheorySpec.free()
    if theory.interactions and (
        len(theory.interactions) > 1 or theory.interactions[0].power != 3
    ):
        raise AlgebraError("the four-point gluing supports a free or power-3 theory")
    lam = theory.interactions[0].coupling_value if theory.interactions else RF_ZERO
    gen = theory.generalized
    universe = frozenset(range(1, 5))
    b2 = tree_sum_closed_form(2, diffeo.a)
    b3 = tree_sum_closed_form(3, diffeo.a)
    sum_x = RF_ZERO
    for j in range(1, 5):
        sum_x = sum_x + edge_var({j}, universe, generalized=gen)
    total = RF_MINUS_I * b3 * sum_x
    for pair in ((1, 2), (1, 3), (1, 4)):
        left_pair = frozenset(pair)
        right_pair = universe - left_pair
        u = v = RF_ZERO
        for i in left_pair:
            u = u + edge_var({i}, universe, generalized=gen)
        for i in right_pair:
            v = v + edge_var({i}, universe, generalized=gen)
        left = RF_MINUS_I * (b2 * u + lam)
        right = RF_MINUS_I * (b2 * v + lam)
        total = total + left * propagator(left_pair, universe, generalized=gen) * right
    return total


def vertex_pair_edge_coefficient(
    j: int, k: int, diffeo: DiffeoSpec = DiffeoSpec.symbolic()
) -> RationalFunction:
    """Coefficient of X_e in ``v_j (i/X_e) v_k + v_{j+k-2}``.

    The two complementary subset terms of the merged vertex cancel the
    edge-cancelling summand of the vertex pair, so this vanishes for every
    pair of valences; the verifier checks 3 <= j,k <= 5.
    """
    left_legs = frozenset(range(1, j))
    right_legs = frozenset(range(j, j + k - 1))
    universe = left_legs | right_legs
    v_left = generalized_vertex(
        [frozenset((x,)) for x in sorted(left_legs)] + [right_legs],
        universe,
        diffeo=diffeo,
        generalized=True,
    )
    v_right = generalized_vertex(
        [frozenset((x,)) for x in sorted(right_legs)] + [left_legs],
        universe,
        diffeo=diffeo,
        generalized=True,
    )
    merged = generalized_vertex(
        [frozenset((x,)) for x in sorted(universe)],
        universe,
        diffeo=diffeo,
        generalized=True,
    )
    edge = edge_symbol(canonical_subset(left_legs, universe), True)
    combined = v_left * propagator(edge) * v_right + merged
    cleared = (combined * rf(edge)).as_polynomial()
    return rf(cleared.coefficient_of(edge, 2))


def random_conserving_momenta(
    n: int, dimension: int, rng, *, span: int = 6
) -> list[tuple[Fraction, ...]]:
    """n exact rational D-vectors summing to zero componentwise."""
    momenta = [
        tuple(Fraction(rng.randint(-span, span), rng.randint(1, 4)) for _ in range(dimension))
        for _ in range(n - 1)
    ]
    last = tuple(-sum(p[d] for p in momenta) for d in range(dimension))
    momenta.append(last)
    return momenta


def evaluate_at_kinematics(
    r: RationalFunction,
    momenta: Sequence[Sequence[Fraction]],
    mass_sq_value: Fraction,
    *,
    metric: Sequence[int] | None = None,
    beta: Mapping[int, Fraction] | None = None,
    bindings: Mapping[Symbol, RationalFunction] | None = None,
) -> Scalar:
    """Evaluate at exact momenta: every edge variable of a leg subset S maps
    to (sum_{i in S} p_i)^2 - msq (standard) or to the propagator polynomial
    in the squared momentum (generalized, via ``beta``)."""
    if not momenta:
        raise AlgebraError("need at least one momentum")
    dimension = len(momenta[0])
    if dimension < 2 or any(len(p) != dimension for p in momenta):
        raise AlgebraError("momenta must share a dimension >= 2")
    if metric is None:
        metric = (1,) + (-1,) * (dimension - 1)
    for d in range(dimension):
        if sum(p[d] for p in momenta):
            raise AlgebraError("momenta do not conserve: component sums must vanish")

    def momentum_sq(q: Sequence[Fraction]) -> Fraction:
        return sum(Fraction(g) * c * c for g, c in zip(metric, q))

    table: dict[Symbol, RationalFunction] = dict(bindings or {})
    for sym in sorted(r.symbols()):
        if sym in table:
            continue
        if sym.kind == Kind.EDGE:
            subset = sym.meta
            if max(subset) > len(momenta):
                raise AlgebraError(f"no momentum supplied for edge variable {sym.name}")
            q = tuple(
                sum(momenta[i - 1][d] for i in subset) for d in range(dimension)
            )
            q_sq = momentum_sq(q)
            generalized = sym.key[1] == 1
            if generalized:
                if beta is None:
                    raise AlgebraError("generalized edge variables need beta coefficients")
                value = sum((Fraction(beta[k]) * q_sq**k for k in sorted(beta)), Fraction(0))
            else:
                value = q_sq - mass_sq_value
            if not value and r.den.exponent(sym):
                raise AlgebraError(f"kinematic point annihilates the edge denominator {sym.name}")
            table[sym] = rf(value)
        elif sym.kind == Kind.MASS_SQ:
            table[sym] = rf(mass_sq_value)
        else:
            raise AlgebraError(f"unbound non-kinematic symbol {sym.name}")
    return r.substitute(table).constant_value()
