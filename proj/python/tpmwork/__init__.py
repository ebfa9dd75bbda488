"""Work statistics and the Jarzynski relation in a driven spin-bath model."""

from ._core import (
    Hamiltonian,
    ModelParams,
    PropagatorConfig,
    __version__,
    bath_dos_slope,
    bath_energies,
    build_hamiltonian,
    d_eigenstate,
    d_microcanonical,
    jr0_check,
    stiffness,
    transition_probabilities,
    window_members,
    work_pdf,
)

__all__ = [
    "Hamiltonian",
    "ModelParams",
    "PropagatorConfig",
    "__version__",
    "bath_dos_slope",
    "bath_energies",
    "build_hamiltonian",
    "d_eigenstate",
    "d_microcanonical",
    "jr0_check",
    "stiffness",
    "transition_probabilities",
    "window_members",
    "work_pdf",
]
