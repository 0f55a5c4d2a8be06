"""Tune the substitution to erase a cubic interaction at one offshell value.

Choosing a_1 = lambda3/(2 xp) and a_{j} = a_1^j F_j(2,1) (Fuss-Catalan
weights) makes every interacting tree sum vanish once its offshell root
variable is held at the fixed value xp: at that momentum the transformed
field looks free, although the theory is interacting.
"""

from diffeorules import (
    DiffeoSpec,
    edge_symbol,
    fc_functional_residual,
    fixed_offshell,
    interacting_rooted_tree_sum,
    rf,
    rooted_tree_sum,
    tree_sum_closed_form,
)

S = 3
tuned = DiffeoSpec.tuned(S, max_j=6)
print("Tuned substitution coefficients (cubic interaction):")
for j in range(1, 5):
    print(f"  a{j} = {tuned.a(j)}")

print("\nFree tree sums collapse to the single surviving value:")
for k in range(2, 6):
    print(f"  b{k} = {rooted_tree_sum(k, tuned).value}")

print("\nInteracting sums vanish at the fixed offshell value xp:")
xp = rf(fixed_offshell())
for n in range(2, 6):
    value = interacting_rooted_tree_sum(n, S, tuned).value
    root = edge_symbol(frozenset(range(1, n + 1)))
    pinned = value.substitute({root: xp})
    print(f"  b'{n}(root -> xp) = {pinned}")

print("\nThe Fuss-Catalan generating series solves C = t C^2 + 1 exactly:")
print("  residual to order 10 is zero:", fc_functional_residual(S - 1, 10).is_zero())
