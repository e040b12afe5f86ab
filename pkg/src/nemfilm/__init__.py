"""Landau-de Gennes thin films on curved substrates.

Q-tensor energies, the reduced surface elastic density and its normal
remnant, surfaces of revolution, frustum winding experiments and a
3D-versus-limit convergence harness.
"""

from nemfilm.errors import (
    FoldError,
    IllPosedError,
    InvalidInputError,
    NemfilmError,
    NotRepresentableError,
)

__version__ = "0.1.0"

__all__ = [
    "FoldError",
    "IllPosedError",
    "InvalidInputError",
    "NemfilmError",
    "NotRepresentableError",
]
