"""Grassmann functional integrals and clustering bounds for finite fermion systems."""

from fermicluster.model import InteractionTerm, ModelSpec, hubbard_dimer

__version__ = "0.1.0"

__all__ = ["InteractionTerm", "ModelSpec", "hubbard_dimer", "__version__"]
