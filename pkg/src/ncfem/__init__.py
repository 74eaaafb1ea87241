"""Crouzeix-Raviart and Morley elements, their mixed equivalents, and K_h post-processing."""

from .mesh import (Mesh, UnsupportedMeshError, boundary_partner, build_uniform_parallelogram_mesh,
                   build_uniform_square_mesh, verify_uniformity)
from .norms import l2_error
from .plate import (ConformityError, hhj_from_morley, pi_D, plate_perturbation_check,
                    solve_hhj_direct, solve_morley)
from .poisson import (cr_perturbation_check, marini_reconstruction, solve_cr,
                      solve_rt_mixed)
from .recovery import k_h, pi_hhj, pi_rt, recovery_order_probe
from .sparse import SolverError, solve_saddle, solve_spd
from .study import (PARALLELOGRAM_PLATE, SQUARE_SINE, emit_table, run_identity_suite,
                    run_plate_study, run_poisson_study)

__all__ = [
    "ConformityError", "Mesh", "PARALLELOGRAM_PLATE", "SQUARE_SINE", "SolverError",
    "UnsupportedMeshError", "boundary_partner", "build_uniform_parallelogram_mesh",
    "build_uniform_square_mesh", "cr_perturbation_check", "emit_table", "hhj_from_morley",
    "k_h", "l2_error", "marini_reconstruction", "pi_D", "pi_hhj", "pi_rt",
    "plate_perturbation_check", "recovery_order_probe", "run_identity_suite",
    "run_plate_study", "run_poisson_study", "solve_cr", "solve_hhj_direct", "solve_morley",
    "solve_rt_mixed", "solve_saddle", "solve_spd", "verify_uniformity",
]
