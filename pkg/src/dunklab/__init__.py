"""dunklab: elliptic Dunkl operators, flat connections and Hecke monodromy.

A verification laboratory: it builds differential-reflection operators with
theta-function coefficients for finite groups acting on complex tori, checks
their structural identities numerically (commutativity, equivariance,
flatness, holomorphy preservation), and transports the associated rank-|W|
flat connection to verify that the monodromy satisfies the deformed
cyclotomic Hecke relations with the predicted eigenvalue exponents.
"""

__version__ = "0.1.0"

from .bundles import (FlatLineBundle, SectionHandle, bundle_dual,
                      bundle_pullback, bundle_tensor, descent_parameters,
                      make_bundle, residue_at, section_f, zero_section)
from .connection import (ConnectionMatrixForm, DunklOpdamForm, apply_rho_dv,
                         build_connection, dunkl_opdam_action)
from .families import (cyclic_family, custom_family, product_torus,
                       symmetric_family, wreath_family)
from .monodromy import (CompanionSystem, FlatSectionSystem, HeckeData,
                        MonodromyMatrix, PathSpec, braid_generators,
                        companion_system, compose_paths, dual_consistency_check,
                        hecke_check, hecke_exponents, irreducibility_evidence,
                        parameter_family_probe, pick_basepoint,
                        predicted_eigenvalues, reverse_path, transport)
from .operators import (DiffReflOperator, ParameterSet,
                        assemble_reflection_section, build_dunkl,
                        check_equivariance, check_reflection_sum_identities,
                        commutator_coefficients, compose,
                        connection_shift_check, regular_points)
from .theta import (ExpKronecker, ThetaEvaluator, get_evaluator, kronecker_f,
                    kronecker_f_dt, theta, theta_dz, theta_dz0)
from .torus import (ComplexTorus, FiniteGroup, GroupElement,
                    ReflectionHypertorus, dual_action, enumerate_hypertori,
                    find_reflections, group_closure, transverse_coordinate)
