"""thermobal: a desk-scale laboratory for detailed-balance thermodynamics.

The package builds deterministic Hamiltonian models with metastable
regions, estimates transition probabilities from trajectory ensembles,
computes restricted-ensemble thermodynamic functionals, and verifies the
exact identities and inequalities that relate them, classically and for
finite-dimensional quantum analogs, plus the replication growth bound.
"""

__version__ = "0.1.0"
