"""Polynomial orbits on nilmanifolds: exact group arithmetic, equidistribution
certificates and the factorization g = ε g' γ."""

__version__ = "0.1.0"

from .lie_core import (GroupElement, MalcevBasis, NilGroup, bch_product_first_kind, build_malcev_basis,
                       commutator, coord_convert, direct_product, group_invert, group_multiply, heisenberg,
                       preset, subgroup, subgroup_malcev_basis, torus, unitriangular)
from .nilmanifold import (HorizontalCharacter, Nilmanifold, VerticalCharacter, metric_estimate,
                          quotient_metric_estimate, rational_point_check, reduce_fundamental)
from .polyseq import (PolySeq, TorusPoly, compose_character, derivative_sequence, dilate_sequence,
                      extrapolate_norm, hk_factorize, nonlinear_part, polynomial_membership_test,
                      sequence_inverse, sequence_product, smoothness_norm)
from .diophantine import (DioWitness, bracket_witness, kronecker_witness, recurrence_witness,
                          vdc_correlations, weyl_sum, weyl_witness)
from .equidist import (certify_equidistribution, certify_total_equidistribution, character_spectrum,
                       lipschitz_average, orbit_sample)
from .factorize import (factorize_full, kernel_subgroup, period_of_rational_sequence, progression_decomposition,
                        relative_square, split_sequence, split_square_character, vdc_square_sequence)
