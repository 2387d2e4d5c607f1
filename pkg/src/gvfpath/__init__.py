"""Singularity-free guiding vector fields for path following.

Submodules: ``paths`` (desired paths and implicit surfaces), ``field``
(vector fields and Jacobians), ``singular`` (singular-point search),
``guidance`` (unicycle guidance law), ``sim`` (integration), ``analysis``
(convergence diagnostics), ``scenario``/``runner``/``cli`` (scenario files
and the ``gvf`` command).
"""

from .errors import (CatalogError, DomainError, ExcludedSetError, GvfError, InsufficientDataError,
                     ParameterError, ShapeError, SingularityError, ValidationError)
from .field import (ConventionalField, FieldSample, GvfParams, SingularityFreeField, cross_n,
                    eval_conventional, eval_singularity_free, jacobian_field, normalize,
                    partial_normalize, projected_direction_jacobian)
from .guidance import GuidanceOutput, VehicleState, guidance_step, heading_error
from .paths import (AffinePose, ParametricPath, Reparameterization, SurfaceStack, apply_affine,
                    catalog_make, implicit_direct, implicit_from_parametric, implicit_make,
                    lifted_path, reparameterize)
from .sim import (Disturbance, ExtendedDynamics, ProjectionOperator, SingleIntegrator, Trajectory,
                  Unicycle, disturbance, integrate, integrate_batch)
from .singular import singular_scan

__version__ = "0.1.0"
