"""Generate the vertex rules induced by a field substitution.

Replacing a scalar field by phi = rho + a1 rho^2 + a2 rho^3 + ... turns even
a free Lagrangian into an interacting one.  This script prints the induced
vertices in both available forms: the display form (linear in the offshell
variables of the adjacent edges plus a mass-squared constant) and the
subset-sum form whose terms are offshell variables of edge subsets.
"""

from diffeorules import (
    DiffeoSpec,
    TheorySpec,
    edge_symbol,
    free_vertex,
    generalized_vertex,
    interaction_vertex,
    rf,
    total_vertex,
)


def singles(n):
    return [rf(edge_symbol(frozenset((j,)))) for j in range(1, n + 1)]


print("Substitution vertices of the free theory (display form):")
for n in (3, 4, 5):
    print(f"  iv{n} = {free_vertex(n, singles(n))}")

print("\nThe same vertices in subset-sum form (pair variables instead of msq):")
for n in (3, 4, 5):
    legs = frozenset(range(1, n + 1))
    v = generalized_vertex([frozenset((j,)) for j in legs], legs)
    print(f"  iv{n} = {v}")

print("\nVertices induced by a cubic interaction monomial:")
for n in (3, 4, 5, 6):
    print(f"  -iw{n}^(3) = {interaction_vertex(n, 3)}")

print("\nSuperposed vertex of a cubic theory at valence 3:")
print(f"  {total_vertex(3, singles(3), TheorySpec.standard(3))}")

print("\nWith rational substitution coefficients a1 = 1/2, a2 = 1/4:")
from fractions import Fraction

bound = DiffeoSpec.from_bindings({1: rf(Fraction(1, 2)), 2: rf(Fraction(1, 4))})
print(f"  iv4 = {free_vertex(4, singles(4), bound)}")
