"""Tree enumeration, decorated amplitudes, exact tree sums and kinematics."""

import random
from fractions import Fraction
from itertools import combinations
from math import factorial

import pytest

from diffeorules.algebra import (
    AlgebraError,
    Kind,
    RF_MINUS_I,
    RF_ONE,
    RF_ZERO,
    Scalar,
    coupling,
    diffeo_coeff,
    edge_symbol,
    fixed_offshell,
    mass_sq,
    rf,
)
from diffeorules.rules import DiffeoSpec, TheorySpec, edge_var
from diffeorules.series import PowerSeries, compose, tree_sum_closed_form
from diffeorules.trees import (
    amplitude,
    amputated_tree_sum,
    coupling_linear_tree_sum,
    enumerate_decorations,
    enumerate_trees,
    evaluate_at_kinematics,
    glue_four_point,
    interacting_rooted_tree_sum,
    random_conserving_momenta,
    recursive_tree_sum,
    rooted_tree_sum,
    symmetrized_one_offshell_sum,
    topology_count,
    vertex_pair_edge_coefficient,
)

LAM3 = rf(coupling(3))
SYMBOLIC = DiffeoSpec.symbolic()


def xe(*legs):
    return rf(edge_symbol(frozenset(legs)))


def total_singles(n, generalized=False):
    out = RF_ZERO
    for j in range(1, n + 1):
        out = out + rf(edge_symbol(frozenset((j,)), generalized))
    return out


class TestEnumeration:
    def test_small_rooted_counts_match_figure(self):
        assert topology_count(2) == 1
        assert topology_count(3) == 4

    def test_counts_match_series_oracle(self):
        # Independent oracle: solve y = z + exp(y) - 1 - y for the exponential
        # generating function of the counts with the series module.
        order = 8
        exp_series = PowerSeries(
            [rf(Scalar(Fraction(1, factorial(k)))) for k in range(order + 1)]
        )
        y = PowerSeries.identity(order)
        for _ in range(order + 2):
            rhs = compose(exp_series, y)
            z = PowerSeries.identity(order)
            new = PowerSeries(
                [z[k] + rhs[k] - (rf(1) if k == 0 else RF_ZERO) - y[k] for k in range(order + 1)]
            )
            y = new
        for n in range(1, order + 1):
            count = y[n].scaled(Scalar(factorial(n))).constant_value()
            assert Scalar(topology_count(n)) == count, n

    def test_every_internal_vertex_has_degree_three_or_more(self):
        for topo in enumerate_trees(range(1, 6)):
            for node in topo.internal_vertices():
                assert len(node) + 1 >= 3

    def test_euler_relation(self):
        for topo in enumerate_trees(range(1, 6)):
            vertices = len(topo.internal_vertices())
            assert vertices - topo.internal_edge_count() == 1

    def test_encodings_are_unique(self):
        topos = enumerate_trees(range(1, 6))
        encodings = {t.encoding() for t in topos}
        assert len(encodings) == len(topos) == 236

    def test_unrooted_designates_largest_leg(self):
        topos = enumerate_trees(range(1, 5), rooted=False)
        assert all(t.virtual_root == 4 for t in topos)
        assert len(topos) == topology_count(4, rooted=False) == 4

    def test_unrooted_needs_three_legs(self):
        with pytest.raises(AlgebraError):
            enumerate_trees({1, 2}, rooted=False)


class TestAmplitude:
    def test_single_offshell_cherry(self):
        # i/x{1+2} * 2i a1 (x1 + x2 + x{1+2}) at x1 = x2 = 0 -> -2 a1
        [topo] = enumerate_trees({1, 2})
        value = amplitude(
            topo, None, TheorySpec.free(), onshell={1, 2}, include_root_propagator=True
        )
        assert value == rf(diffeo_coeff(1)).scaled(Scalar(-2))

    def test_onshell_substitution_happens_after_assembly(self):
        [topo] = enumerate_trees({1, 2})
        raw = amplitude(topo, None, TheorySpec.free(), onshell=())
        assert raw == rf(Scalar(0, 2)) * rf(diffeo_coeff(1)) * (xe(1) + xe(2) + xe(1, 2))
        with_prop = amplitude(topo, None, TheorySpec.free(), onshell=(), include_root_propagator=True)
        assert with_prop == raw * rf(Scalar(0, 1)) * rf(edge_symbol({1, 2})).inverse()

    def test_single_interaction_vertex(self):
        [topo] = enumerate_trees(range(1, 4), rooted=False)
        theory = TheorySpec.standard(3)
        value = amplitude(topo, (("I", 3),), theory, onshell={1, 2, 3})
        assert value == LAM3.scaled(Scalar(0, -1))

    def test_single_free_vertex_all_onshell_keeps_pair_variables(self):
        # The subset-form vertex leaves 4 i a1^2 (x{1+2}+x{1+3}+x{1+4}); the
        # display form's 4 i msq a1^2 agrees with it on every conserving
        # kinematic point (see TestKinematics) but not symbolically.
        [topo] = [t for t in enumerate_trees(range(1, 5), rooted=False) if not t.internal_edge_count()]
        value = amplitude(topo, None, TheorySpec.free(), onshell={1, 2, 3, 4})
        a1 = rf(diffeo_coeff(1))
        expect = (a1 * a1).scaled(Scalar(0, 4)) * (xe(1, 2) + xe(1, 3) + xe(1, 4))
        assert value == expect

    def test_matches_engine_across_policies(self):
        theory = TheorySpec.standard(3)
        for n in (2, 3, 4):
            total = RF_ZERO
            for topo in enumerate_trees(range(1, n + 1)):
                for deco in enumerate_decorations(topo, theory.interactions):
                    total = total + amplitude(
                        topo, deco, theory, onshell=range(1, n + 1), include_root_propagator=True
                    )
            engine = interacting_rooted_tree_sum(n, 3).value
            assert total == engine, n

    def test_matches_engine_amputated(self):
        for n in (3, 4, 5):
            total = RF_ZERO
            for topo in enumerate_trees(range(1, n + 1), rooted=False):
                total = total + amplitude(topo, None, TheorySpec.free(), onshell=range(2, n + 1))
            assert total == amputated_tree_sum(n, {1}).value, n


class TestRootedTreeSums:
    def test_worked_values(self):
        a1, a2 = rf(diffeo_coeff(1)), rf(diffeo_coeff(2))
        assert rooted_tree_sum(1).value == RF_ONE
        assert rooted_tree_sum(2).value == a1.scaled(Scalar(-2))
        assert rooted_tree_sum(3).value == (a1 * a1).scaled(Scalar(12)) + a2.scaled(Scalar(-6))

    @pytest.mark.parametrize("n", range(2, 8))
    def test_matches_closed_form_and_is_constant(self, n):
        result = rooted_tree_sum(n)
        assert result.value == tree_sum_closed_form(n)
        kinds = {s.kind for s in result.value.symbols()}
        assert kinds <= {Kind.DIFFEO}
        assert result.tree_count == topology_count(n)

    def test_recursion_agrees(self):
        for n in range(1, 7):
            assert recursive_tree_sum(n) == tree_sum_closed_form(n)
            assert recursive_tree_sum(n, generalized=False) == tree_sum_closed_form(n)


class TestAmputatedSums:
    @pytest.mark.parametrize("n", range(3, 8))
    def test_onshell_sum_vanishes(self, n):
        assert amputated_tree_sum(n, ()).value.is_zero()

    @pytest.mark.parametrize("n", range(3, 8))
    def test_one_offshell_shape(self, n):
        b = tree_sum_closed_form(n - 1)
        for j in (1, n):
            value = amputated_tree_sum(n, {j}).value
            assert value == RF_MINUS_I * b * rf(edge_symbol(frozenset((j,))))
        assert symmetrized_one_offshell_sum(n) == RF_MINUS_I * b * total_singles(n)

    def test_four_point_full_offshell(self):
        value = amputated_tree_sum(4, range(1, 5)).value
        b2, b3 = tree_sum_closed_form(2), tree_sum_closed_form(3)
        poles = RF_ZERO
        for pair in ((1, 2), (1, 3), (1, 4)):
            comp = tuple(sorted(frozenset(range(1, 5)) - frozenset(pair)))
            num = (xe(pair[0]) + xe(pair[1])) * (xe(comp[0]) + xe(comp[1]))
            poles = poles + num * rf(edge_symbol(frozenset(pair))).inverse()
        expect = RF_MINUS_I * b3 * total_singles(4) + RF_MINUS_I * (b2 * b2) * poles
        assert value == expect

    def test_four_point_degree_at_most_two_in_singletons(self):
        value = amputated_tree_sum(4, range(1, 5)).value
        singles = {edge_symbol(frozenset((j,))) for j in range(1, 5)}
        for mono in value.num.terms:
            degree = sum(e for s, e in mono.pairs if s in singles)
            assert degree <= 2

    def test_setting_legs_onshell_collapses_to_lower_j(self):
        full = amputated_tree_sum(4, range(1, 5)).value
        collapsed = full.substitute(
            {edge_symbol(frozenset((j,))): RF_ZERO for j in (2, 3, 4)}
        )
        assert collapsed == amputated_tree_sum(4, {1}).value

    def test_glued_four_point_free(self):
        assert glue_four_point() == amputated_tree_sum(4, range(1, 5)).value

    def test_glued_four_point_interacting(self):
        theory = TheorySpec.standard(3)
        glued = glue_four_point(theory=theory)
        enumerated = amputated_tree_sum(4, range(1, 5), theory).value
        assert glued == enumerated

    def test_meta_vertex_identity(self):
        # Restricting the single offshell variable to the fixed value xp gives
        # -i xp b_{l+1} for the (l+2)-point amputated sum.
        xp = rf(fixed_offshell())
        for l in range(1, 6):
            n = l + 2
            value = amputated_tree_sum(n, {1}).value
            restricted = value.substitute({edge_symbol(frozenset((1,))): xp})
            assert restricted == RF_MINUS_I * xp * tree_sum_closed_form(l + 1), l


class TestInteractingSums:
    def test_bprime_worked_values(self):
        b2 = tree_sum_closed_form(2)
        root2 = rf(edge_symbol(frozenset((1, 2))))
        assert interacting_rooted_tree_sum(2, 3).value == b2 + LAM3 * root2.inverse()
        b3 = tree_sum_closed_form(3)
        root3 = rf(edge_symbol(frozenset((1, 2, 3))))
        pair_poles = RF_ZERO
        for pair in ((1, 2), (1, 3), (2, 3)):
            pair_poles = pair_poles + rf(edge_symbol(frozenset(pair))).inverse()
        expect3 = b3 + (b2 + LAM3 * root3.inverse()) * LAM3 * pair_poles
        assert interacting_rooted_tree_sum(3, 3).value == expect3

    def test_bprime_four_point_four_block_structure(self):
        legs = frozenset(range(1, 5))
        b2, b3, b4 = (tree_sum_closed_form(k) for k in (2, 3, 4))
        root = rf(edge_symbol(legs))
        pair_sum = RF_ZERO
        for pair in combinations(sorted(legs), 2):
            pair_sum = pair_sum + rf(edge_symbol(frozenset(pair))).inverse()
        parallel = RF_ZERO
        for left, right in (((1, 2), (3, 4)), ((1, 3), (2, 4)), ((1, 4), (2, 3))):
            parallel = parallel + (
                rf(edge_symbol(frozenset(left))) * rf(edge_symbol(frozenset(right)))
            ).inverse()
        cascades = RF_ZERO
        cascade_count = 0
        for trip in combinations(sorted(legs), 3):
            for pair in combinations(trip, 2):
                cascades = cascades + (
                    rf(edge_symbol(frozenset(trip))) * rf(edge_symbol(frozenset(pair)))
                ).inverse()
                cascade_count += 1
        assert cascade_count == 12
        expect = (
            b4
            + b3 * LAM3 * pair_sum
            + (b2 + LAM3 * root.inverse()) * (LAM3 * LAM3) * (parallel + cascades)
        )
        assert interacting_rooted_tree_sum(4, 3).value == expect

    @pytest.mark.parametrize("n", range(1, 6))
    def test_modes_agree_cubic(self, n):
        enum = interacting_rooted_tree_sum(n, 3, mode="all_vertices").value
        glued = interacting_rooted_tree_sum(n, 3, mode="s_only").value
        assert enum == glued

    def test_below_threshold_reduces_to_free_sums(self):
        for s, n in ((4, 1), (4, 2), (5, 3)):
            assert interacting_rooted_tree_sum(n, s).value == tree_sum_closed_form(n), (s, n)

    def test_quartic_threshold_pole(self):
        root = rf(edge_symbol(frozenset((1, 2, 3))))
        expect = tree_sum_closed_form(3) + rf(coupling(4)) * root.inverse()
        assert interacting_rooted_tree_sum(3, 4).value == expect


class TestCouplingLinearSums:
    def test_four_point_decomposition(self):
        result = coupling_linear_tree_sum(4, 3)
        a1 = rf(diffeo_coeff(1))
        by_valence = result.metadata["by_valence"]
        assert by_valence[4] == (LAM3 * a1).scaled(Scalar(0, -12))
        assert by_valence[3] == (LAM3 * a1).scaled(Scalar(0, 12))
        assert result.value.is_zero()

    @pytest.mark.parametrize("s", (3, 4))
    def test_delta_structure(self, s):
        lam = rf(coupling(s))
        for n in range(s, 8):
            value = coupling_linear_tree_sum(n, s).value
            expect = lam.scaled(Scalar(0, -1)) if n == s else RF_ZERO
            assert value == expect, (s, n)


class TestTunedDiffeomorphism:
    def test_free_sums_collapse(self):
        tuned = DiffeoSpec.tuned(3, 6)
        lam, xp = LAM3, rf(fixed_offshell())
        assert rooted_tree_sum(2, tuned).value == lam.scaled(Scalar(-1)) * xp.inverse()
        for k in (3, 4, 5, 6):
            assert rooted_tree_sum(k, tuned).value.is_zero(), k

    def test_interacting_sum_vanishes_at_fixed_offshell(self):
        tuned = DiffeoSpec.tuned(3, 6)
        xp = rf(fixed_offshell())
        for n in (2, 3, 4, 5):
            value = interacting_rooted_tree_sum(n, 3, tuned).value
            root = edge_symbol(frozenset(range(1, n + 1)))
            assert value.substitute({root: xp}).is_zero(), n


class TestGeneralizedPropagator:
    def test_one_offshell_shape(self):
        theory = TheorySpec.generalized_free()
        for n in (3, 4, 5):
            b = tree_sum_closed_form(n - 1)
            value = amputated_tree_sum(n, {1}, theory).value
            assert value == RF_MINUS_I * b * rf(edge_symbol(frozenset((1,)), True))

    def test_vertex_pair_edge_coefficient_vanishes(self):
        for j in (3, 4, 5):
            for k in (3, 4, 5):
                assert vertex_pair_edge_coefficient(j, k).is_zero(), (j, k)

    def test_recursion_generalized(self):
        for n in range(1, 6):
            assert recursive_tree_sum(n, generalized=True) == tree_sum_closed_form(n)


class TestKinematics:
    def test_four_point_conservation_identity(self):
        rng = random.Random(11)
        universe = frozenset(range(1, 5))
        expr = (
            edge_var({1, 2}, universe)
            + edge_var({1, 3}, universe)
            + edge_var({2, 3}, universe)
            - rf(mass_sq())
        )
        for j in range(1, 5):
            expr = expr - edge_var({j}, universe)
        for _ in range(20):
            momenta = random_conserving_momenta(4, 4, rng)
            assert evaluate_at_kinematics(expr, momenta, Fraction(5, 3)).is_zero()

    def test_display_and_subset_vertices_agree_on_shell_of_conservation(self):
        from diffeorules.rules import free_vertex, generalized_vertex

        rng = random.Random(23)
        for n in (3, 4, 5):
            legs = frozenset(range(1, n + 1))
            for _ in range(15):
                bindings = {
                    j: rf(Fraction(rng.randint(-6, 6), rng.randint(1, 4)))
                    for j in range(1, n - 1)
                }
                diffeo = DiffeoSpec.from_bindings(bindings) if bindings else SYMBOLIC
                momenta = random_conserving_momenta(n, 4, rng)
                m2 = Fraction(rng.randint(0, 4), rng.randint(1, 3))
                display = free_vertex(
                    n, [rf(edge_symbol(frozenset((j,)))) for j in range(1, n + 1)], diffeo
                )
                subset = generalized_vertex(
                    [frozenset((j,)) for j in range(1, n + 1)], legs, diffeo=diffeo
                )
                assert evaluate_at_kinematics(display, momenta, m2) == evaluate_at_kinematics(
                    subset, momenta, m2
                )

    def test_generalized_edges_need_beta(self):
        rng = random.Random(4)
        momenta = random_conserving_momenta(3, 4, rng)
        x = rf(edge_symbol(frozenset((1,)), True))
        with pytest.raises(AlgebraError):
            evaluate_at_kinematics(x, momenta, Fraction(1))
        beta = {0: Fraction(-1), 1: Fraction(1), 2: Fraction(2, 7)}
        value = evaluate_at_kinematics(x, momenta, Fraction(1), beta=beta)
        q = momenta[0]
        q_sq = q[0] * q[0] - sum(c * c for c in q[1:])
        assert value == Scalar(Fraction(-1) + q_sq + Fraction(2, 7) * q_sq**2)

    def test_conservation_violation_rejected(self):
        bad = [(Fraction(1), Fraction(0), Fraction(0), Fraction(0))] * 2
        with pytest.raises(AlgebraError):
            evaluate_at_kinematics(rf(edge_symbol({1})), bad, Fraction(0))

    def test_denominator_zero_names_the_edge(self):
        r = rf(1).scaled(Scalar(1)) * rf(edge_symbol({1, 2})).inverse()
        momenta = [
            (Fraction(1), Fraction(1), Fraction(0), Fraction(0)),
            (Fraction(-1), Fraction(-1), Fraction(0), Fraction(0)),
            (Fraction(1), Fraction(0), Fraction(1), Fraction(0)),
            (Fraction(-1), Fraction(0), Fraction(-1), Fraction(0)),
        ]
        with pytest.raises(AlgebraError, match="x{1"):
            evaluate_at_kinematics(r, momenta, Fraction(0))

    def test_determinism(self):
        rng = random.Random(9)
        momenta = random_conserving_momenta(4, 4, rng)
        r = glue_four_point(DiffeoSpec.from_bindings({1: rf(Fraction(1, 2)), 2: rf(3)}))
        first = evaluate_at_kinematics(r, momenta, Fraction(2, 5))
        second = evaluate_at_kinematics(r, momenta, Fraction(2, 5))
        assert first == second
