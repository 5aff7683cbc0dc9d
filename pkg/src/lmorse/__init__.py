"""L-geodesics, L-Jacobi fields and the Morse index of the L-length.

Backgrounds are the shrinking Ricci flow solutions ``S^k x R^(n-k)``
written in stereographic charts; see :mod:`lmorse.flowbg`.
"""

from .errors import (ChartEscape, ConjugateEndpoint, EigensolverFailure, InvalidChart,
                     LGeometryError, NegativeTau, NonMonotoneTau, NotApplicable,
                     QuadratureFailure, StepTooSmall, ToleranceNotMet, UnresolvedCluster)
from .flowbg import (ChartPoint, FlowBackground, ShrinkingCylinder, ShrinkingSphere,
                     StaticEuclidean, chart_transition, dg_dtau_at, metric_at, recenter_chart,
                     sectional_curvature, tensors_at)
from .lgeo import LGeodesicPath, lexp, llength, shoot, shoot_tau_form
from .lindex import (FieldAlong, IndexMatrix, MorseVerdict, assemble, index_form,
                     key_lemma_residual, lemma_suite, morse_index, second_variation_check,
                     verify_morse)
from .ljacobi import (ConjugatePoint, ConjugateReport, conjugate_scan, dlexp, jacobi_bvp,
                      jacobi_integrate, jacobi_matrix, variation_field_check)
from .oracle import (DiscreteCurve, discrete_llength, fd_dlexp, fd_first_variation,
                     fd_second_variation)

__version__ = "0.1.0"
