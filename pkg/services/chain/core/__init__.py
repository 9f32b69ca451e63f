# services/chain/core/__init__.py

# 1. 张量与态
from .tensor_core import (
    all_schmidt_spectra,
    partial_trace,
    product_state,
    random_state,
    reduced_density_matrix,
    reduced_spectrum,
    schmidt_spectrum,
    truncation_error,
    tt_canonicalize,
    tt_decompose,
    tt_ranks,
    tt_reconstruct,
)

# 2. 熵与不等式
from .spectra_entropy import (
    example_state,
    finiteness_check,
    gibbs_entropy,
    gibbs_entropy_bound,
    gibbs_state,
    majorizes,
    rank_lower_bound,
    renyi_entropy,
    renyi_lower_bound,
    renyi_upper_bound,
    von_neumann_entropy,
)

# 3. 哈密顿量
from .nni_hamiltonian import (
    assemble,
    build_model,
    diagonalize,
    ground_state,
    interaction_constants,
    lbr_split,
    spectral_system,
)

# 4. 滤波流水线
from .locality_filters import (
    approximate_ground_projector,
    estimate_velocity,
    filtered_operator,
    gaussian_projector,
    localize,
    time_ordered_ob,
    window_projector,
)

# 5. 面积律分析
from .arealaw_analysis import (
    dephasing_channel,
    eb_bound_check,
    entropy_sweep,
    expectation_E,
    fit_c5,
    mutual_information,
    relent_lower_bound,
    sl_recursion_check,
    truncation_rate_fit,
)

__all__ = [
    "all_schmidt_spectra",
    "partial_trace",
    "product_state",
    "random_state",
    "reduced_density_matrix",
    "reduced_spectrum",
    "schmidt_spectrum",
    "truncation_error",
    "tt_canonicalize",
    "tt_decompose",
    "tt_ranks",
    "tt_reconstruct",
    "example_state",
    "finiteness_check",
    "gibbs_entropy",
    "gibbs_entropy_bound",
    "gibbs_state",
    "majorizes",
    "rank_lower_bound",
    "renyi_entropy",
    "renyi_lower_bound",
    "renyi_upper_bound",
    "von_neumann_entropy",
    "assemble",
    "build_model",
    "diagonalize",
    "ground_state",
    "interaction_constants",
    "lbr_split",
    "spectral_system",
    "approximate_ground_projector",
    "estimate_velocity",
    "filtered_operator",
    "gaussian_projector",
    "localize",
    "time_ordered_ob",
    "window_projector",
    "dephasing_channel",
    "eb_bound_check",
    "entropy_sweep",
    "expectation_E",
    "fit_c5",
    "mutual_information",
    "relent_lower_bound",
    "sl_recursion_check",
    "truncation_rate_fit",
]
