"""Duality and Hamiltonian-characteristics toolkit for discrete-time convex
Bolza optimal control.

The primal problem minimizes a sum of extended-real stage Lagrangians plus a
terminal cost over state sequences; the toolkit computes its value function,
builds the dual problem explicitly through stage conjugates, propagates value
subgradients along discrete-time Hamiltonian trajectories, and decides the
qualification conditions under which the primal and dual value functions are
conjugate to each other.  Independent grid and Riccati oracles back every
computation for verification.
"""

from .errors import (BolzaError, BoundaryNode, DegenerateInput,
                     DimensionMismatch, EmptySetError, GridTooCoarse,
                     InfeasiblePoint, ProblemFileError, PropernessViolation,
                     SingularInnerMatrix, UnsupportedClass)
from .tolerances import DEFAULT_SEED, DEFAULT_TOLS, Tolerances
from .sets import (AffineImageSet, Box, ConvexSet, EMPTY_SET, EmptySet,
                   Polyhedron, WholeSpace)
from .model import (BolzaProblem, CallableFn, LagrangianSubgradient,
                    MixedConstraintSpec, QuadraticAffine, StageSpec,
                    TerminalCost, feasible_velocity_set, lagrangian_eval,
                    lagrangian_minimizer, lagrangian_subgrad, terminal_eval,
                    terminal_subgrad)
from .conjugacy import (DualBolzaProblem, GridFunction, conjugate_quadratic,
                        dual_lagrangian_eval, dual_state_feasible,
                        dual_terminal, dual_velocity_feasible, dualize,
                        grid_conjugate)
from .solver import (DualityCertificate, SolveResult, ValueSubgradient,
                     duality_certificate, solve_dual, solve_primal,
                     value_subgradient)
from .characteristics import (CharacteristicVerdict, TrajectoryPair,
                              build_characteristic, hamiltonian,
                              hamiltonian_inclusion_residual,
                              saddle_inequality_violation,
                              transversality_residual, verify_characteristic)
from .qualification import (CertificateInput, QualificationReport,
                            check_control_qualification,
                            check_dual_strict_feasibility,
                            check_mixed_growth_certificates,
                            check_primal_strict_feasibility,
                            find_interior_trajectory,
                            relative_interior_membership)
from .oracle import (ValueTable, default_axis, dual_value_table,
                     grid_value_dp, riccati_value, subgradient_bracket)
from .io import load_problem, problem_from_dict, problem_to_dict, save_problem

__version__ = "0.1.0"
