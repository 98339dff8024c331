"""Berry-Esseen toolkit for high-dimensional m-dependent sums.

Simulate moving-average processes, extract the moment and covariance constants
that enter the rectangle-distance bounds, evaluate those bounds, and estimate
the rectangle distance to the matched Gaussian by Monte Carlo.
"""
__version__ = "0.1.0"

from .core import (DistanceEstimate, MomentParams, ProcessSpec, Rectangle, SampleBatch,
                   band_membership, prefix_sum)
from .errors import (CapacityError, ConfigError, DegeneracyError, IncompleteAuditError,
                     InsufficientDataError, MdcltError, NumericError, ParameterError, RangeError,
                     ShapeError, UndefinedPointError)
from .procgen import (load_batch, make_ma_process, sample_paths, sample_sums, sample_sums_paired,
                      save_batch, sum_covariance)
from .gaussian import nazarov_bound, phi_smoothed, psd_factor, sample_sum_gaussian
from .params import estimate_nu, extract_sigmas, moment_params
from .blocking import block_average, block_reduce, blocked_nu, blocked_sigmas, verify_m_dependence
from .distance import (FamilyConfig, RectangleFamily, audit_induction_lemmas,
                       build_rectangle_family, estimate_kappa, estimate_mu, grad_f_l1,
                       smoothing_f, smoothing_lemma_check)
from .bounds import corollary_bound, epsilon_star, theorem_bound
from .kernels import BACKEND

__all__ = [name for name in dir() if not name.startswith("_")]
