"""Spectral density estimation from irregularly sampled data via quadrature weights.

Submodules: :mod:`~irrspec.sampling`, :mod:`~irrspec.models`,
:mod:`~irrspec.windows`, :mod:`~irrspec.nufourier`, :mod:`~irrspec.weights`,
:mod:`~irrspec.estimator` and :mod:`~irrspec.cli`.
"""

__version__ = "0.1.0"

from .sampling import (Domain, SampleSet, generate_gappy_grid, generate_jittered_grid,  # noqa: E402
                       generate_uniform, load_csv, save_csv)
from .models import MaternSpec, ProcessModel, SpectralLine, gp_simulate  # noqa: E402
from .windows import boxcar, concentration, kaiser, prolate_1d, prolate_2d  # noqa: E402
from .weights import (QuadratureWeights, SolverConfig, omega_guidance, solve,  # noqa: E402
                      solve_dense, solve_iterative, solve_lowrank, validate_weights)
from .estimator import (aliasing_bias, convolution_oracle, estimate, expected_estimate,  # noqa: E402
                        lomb_scargle, regrid_estimate)
