"""Limit cycles of one-dimensional piecewise-autonomous periodic equations.

The library builds the return (Poincare) map of a scalar ODE whose right-hand
side switches between autonomous fields over a periodic schedule, computes
its first three derivatives by two independent routes, locates and classifies
limit cycles, continues them in rotated parameter families, and ships preset
builders for harvesting, cubic two-season, and mosquito-suppression models.
"""

from .field import (DomainError, FieldConstructionError, IdenticallyZeroError,
                    ScalarField, SignChangeReport, ZeroList, polynomial_field,
                    real_roots_with_multiplicity)
from .equation import (NormalizedEquation, PiecewiseEquation, ValidationError,
                       ValidationReport, normalize, validate)
from .flow import (FlowMap, OracleFailure, SingularIntegrandError, StepOutcome,
                   StepStatus, rk_flow, step_map, traverse_time)
from .poincare import (NotInDomain, PoincareJet, TrajectoryKnots,
                       constant_multiplier, derivative_discrete,
                       derivative_integral, displacement, displacement_many,
                       knots, knots_many)
from .cycles import (AnnulusError, InternalConsistencyError, Interval,
                     LimitCycle, PartitionReport, abel_diagnostics,
                     annulus_integral, classify_jet, constant_cycles,
                     find_cycles, partition, smoothness_bound)
from .continuation import (BadBracketError, Branch, Certificate, RotatedFamily,
                           certify, continue_cycle, saddle_node_threshold)
from .models import (AbelSpec, HarvestSpec, MosquitoSpec, RegimeVerdict,
                     SpecError, WrongStrategyError, abel_model,
                     cherkas_transform, classify_regime, harvesting_model,
                     mosquito_long_wait, mosquito_short_wait, t_triple_star)

__version__ = "1.0.0"
