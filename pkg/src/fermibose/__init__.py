"""fermibose: exact desk-scale bosonization laboratory for dense Fermi gases.

Everything is organized around small exactly-solvable instances: integer
momentum lattices (lattice), a sparse fermionic Fock engine (fock), the
quasi-bosonic excitation algebra (boson), the map between the two (bridge)
and a reproducible experiment driver (cli).
"""

__version__ = "0.1.0"

from .lattice import GasConfig, crescent, fermi_ball, magic_numbers  # noqa: F401
