"""rlwe_forge: desk-scale RLWE cryptanalysis toolkit.

Builds RLWE instances over subfields of cyclotomic fields, samples
errors with a randomized nearest-plane lattice Gaussian, and runs
chi-square distinguishing attacks (per-prime guess loop, full
search-to-decision recovery, ramified-prime and dual-circle attacks,
and the modulus-switching negative control).
"""

from .attacks import (
    AttackReport,
    chi_square_attack,
    dual_decision_attack,
    modulus_switch_experiment,
    ramified_decision_attack,
    search_attack,
    vulnerability_search,
)
from .embedding import EmbeddingData, discriminant_abs, embedding_matrix, sigma_from_sigma0
from .lattice import (
    LatticeBundle,
    babai_nearest_plane,
    gram_schmidt,
    lll_reduce,
    make_bundle,
    sample_integer_gaussian,
    sample_lattice_gaussian,
)
from .residue import (
    ResidueContext,
    build_residue_context,
    is_full_degree,
    reduce_ring_element,
    twisted_reduction_vector,
)
from .rlwe import (
    RlweInstance,
    RlweSample,
    SampleBatch,
    generate_dual_observations,
    generate_samples,
    generate_uniform_samples,
    modulus_switch,
    prime_cyclotomic_instance,
    sample_error,
    subfield_instance,
)
from .rng import Stream
from .stats import (
    BinSpec,
    TestResult,
    chi_square_cdf,
    chi_square_inv_cdf,
    chi_square_statistic,
    l2_distance,
    noncentral_chi_square_cdf,
    statistical_distance,
    success_lower_bound,
    uniformity_test,
)
from .subgroups import (
    SubgroupDescriptor,
    coset_of,
    degree_f_primes,
    extension_degree,
    galois_permutation,
    new_subgroup,
    residue_degree,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
