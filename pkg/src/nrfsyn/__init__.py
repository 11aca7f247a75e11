"""Sparse distributed controller synthesis for descriptor-system networks."""

from .realization import (
    DescriptorRealization,
    add,
    blkdiag,
    diag_replicate,
    from_scalar_entries,
    hstack,
    lft_lower,
    series,
    vstack,
)
from .pencil import (
    PencilSpectrum,
    is_admissible,
    is_internally_stable,
    is_proper,
    is_regular_pencil,
    is_strongly_stabilizable,
    loop_realization,
    minimal_realization,
    pencil_spectrum,
    residualize,
    state_space_form,
    value_at_infinity,
)
from .norms import default_grid, hankel_singular_values, hinf_norm
from .patterns import SparsityPattern, kron_with_identity, pattern_membership, unvec, vec
from .stabilization import (
    GcareSolution,
    Nrcf,
    admissible_feedback,
    gcare_residual,
    gcare_solve,
    normalize_rcf,
    stability_radius,
)
from .factorization import (
    AffineClosedLoop,
    Dcf,
    NrfPair,
    PartitionedPlant,
    bezout_residual,
    closed_loop_affine,
    dcf_from_feedbacks,
    diagonal_part,
    nrf_extract,
    youla_controller,
)
from .robust import (
    GapCertificate,
    PerturbedPlant,
    RobustPlant,
    build_t_eps,
    gap_certificate,
    optimize_qbar,
    perturbed_plant,
    rcf_from_feedback,
    reduced_dcf,
    robust_certificate,
    sample_perturbation,
    t_eps_affine,
)
from .matching import (
    BasisColumn,
    BasisSet,
    MatchingProblem,
    basis_preprocess,
    build_tf,
    closed_loop_realization,
    kernel_basis,
    qhat_from_x,
    solve_sparsity_equation,
)
from .lmi_iter import (
    IterConfig,
    IterVariables,
    SynthesisResult,
    WellPosednessData,
    assemble_iteration,
    convex_subproblem,
    run_algorithm1,
    wellposed_data,
)

__version__ = "0.1.0"

__all__ = [
    "AffineClosedLoop",
    "BasisColumn",
    "BasisSet",
    "Dcf",
    "DescriptorRealization",
    "GapCertificate",
    "GcareSolution",
    "IterConfig",
    "IterVariables",
    "MatchingProblem",
    "Nrcf",
    "NrfPair",
    "PartitionedPlant",
    "PencilSpectrum",
    "PerturbedPlant",
    "RobustPlant",
    "SparsityPattern",
    "SynthesisResult",
    "WellPosednessData",
    "add",
    "admissible_feedback",
    "assemble_iteration",
    "basis_preprocess",
    "bezout_residual",
    "blkdiag",
    "build_t_eps",
    "build_tf",
    "closed_loop_affine",
    "closed_loop_realization",
    "convex_subproblem",
    "dcf_from_feedbacks",
    "default_grid",
    "diag_replicate",
    "diagonal_part",
    "from_scalar_entries",
    "gap_certificate",
    "gcare_residual",
    "gcare_solve",
    "hankel_singular_values",
    "hinf_norm",
    "hstack",
    "is_admissible",
    "is_internally_stable",
    "is_proper",
    "is_regular_pencil",
    "is_strongly_stabilizable",
    "kernel_basis",
    "kron_with_identity",
    "lft_lower",
    "loop_realization",
    "minimal_realization",
    "normalize_rcf",
    "nrf_extract",
    "optimize_qbar",
    "pattern_membership",
    "pencil_spectrum",
    "perturbed_plant",
    "qhat_from_x",
    "rcf_from_feedback",
    "reduced_dcf",
    "residualize",
    "robust_certificate",
    "run_algorithm1",
    "sample_perturbation",
    "series",
    "solve_sparsity_equation",
    "stability_radius",
    "state_space_form",
    "t_eps_affine",
    "unvec",
    "value_at_infinity",
    "vec",
    "vstack",
    "wellposed_data",
    "youla_controller",
]
