"""fblab: numerical laboratory for segregated eigenvalue partitions.

Computes minimizers of the sum of first Dirichlet eigenvalues over
N-partitions of a planar domain and verifies, at desk scale, the
quantitative machinery governing how the free interface meets the fixed
boundary: boundary-straightening coefficient fields, Almgren/Weiss
almost-monotonicity, epiperimetric inequalities with explicit competitors,
blow-up convergence rates against Dini moduli, and the two-dimensional
structure of the interface graph.
"""

__version__ = "0.1.0"
