"""
Aligned image sets for the two-user MISO broadcast channel under
finite-precision channel knowledge at the transmitter.
"""

from .aligned import (AlignedImageSet, PairTable, analytic_expected_size_bound,
                      exact_pairwise_alignment_probability, expected_set_size,
                      kuser_alignment_test, min_max_images, pairwise_alignment_probability_bound,
                      partition_into_aligned_sets, toy_distinct_images)
from .channel import (CanonicalChannel, ChannelBoundError, ChannelDensity, CsitState,
                      DegenerateChannelError, DegenerateDensityError, GeneralChannel2x2,
                      InputTransform, PrecisionExhaustedError, UserCsit,
                      build_quantized_posterior, feedback_bits, reduce_to_canonical)
from .deterministic import (IntegerCodebook, deterministic_output, integerize, mod_reduce,
                            offset_entropy_bound, paper_floor)
from .entropy import (EntropyLedger, assemble_sum_dof_bound, difference_of_entropies,
                      entropy_bits, exact_conditional_entropy, minimize_over_mappings)
from .fitting import DofEstimate, extrapolate_limit, slope_fit
from .schemes import RatePoint, blind_ia_pn, zf_quantized_feedback

__version__ = "0.1.0"
