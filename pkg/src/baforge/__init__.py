"""baforge: a desk-scale workbench for finite Boolean algebras.

Presented algebras over two-valued evaluation families, brute-force
cardinal-invariant computation with witnesses, clause-level validators for
five kinds of structured forcing conditions, and the catalog of explicit
amalgamation constructions with machine-verified postconditions.
"""

__version__ = "0.1.0"
