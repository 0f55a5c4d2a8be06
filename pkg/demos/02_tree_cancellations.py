"""Watch the tree-level cancellations happen in exact arithmetic.

The substitution vertices are engineered so that every internal propagator
is cancelled in the sum over trees: the one-offshell tree sums b_n collapse
to constants, all-onshell amplitudes vanish, and in an interacting theory
the sums linear in the coupling cancel except at the original valence.
"""

from diffeorules import (
    amputated_tree_sum,
    coupling_linear_tree_sum,
    interacting_rooted_tree_sum,
    rooted_tree_sum,
    symmetrized_one_offshell_sum,
    tree_sum_closed_form,
)

print("One-offshell tree sums b_n (sum over all trees, root propagator included):")
for n in range(1, 6):
    result = rooted_tree_sum(n)
    match = "==" if result.value == tree_sum_closed_form(n) else "!="
    print(f"  b{n} over {result.tree_count:4d} trees = {result.value}   [{match} closed form]")

print("\nAll-onshell amputated sums vanish; one offshell leg leaves a linear shape:")
for n in (3, 4, 5):
    zero = amputated_tree_sum(n, ()).value
    shape = symmetrized_one_offshell_sum(n)
    print(f"  A0_{n} = {zero}    A1_{n} = {shape}")

print("\nCubic theory: the sums linear in lambda3 cancel above the original valence:")
for n in (3, 4, 5, 6):
    result = coupling_linear_tree_sum(n, 3)
    print(f"  S(3)_{n} over {result.decorated_count:4d} decorated trees = {result.value}")

print("\nInteracting tree sums keep the poles of uncancelled propagators:")
for n in (2, 3):
    print(f"  b'{n} = {interacting_rooted_tree_sum(n, 3).value}")
print("  (the reduced gluing gives the identical rational function:",
      interacting_rooted_tree_sum(3, 3, mode='s_only').value
      == interacting_rooted_tree_sum(3, 3).value, ")")
