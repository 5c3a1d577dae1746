"""Counting statistics and local fluctuation theorems for harmonic networks.

The package reduces the long-time statistics of quantum exchange between a
linearly coupled oscillator network and one of its baths to a stationary
matrix problem on the 2N-dimensional quadrature space, cross-checked by an
independent truncated Fock-space construction.
"""

from .errors import (ConfigError, ConvergenceError, DegenerateCurveError,
                     DomainBoundaryError, DomainEmptyError, GaussLdtError,
                     InvalidNetworkError, NoStationaryStateError,
                     OracleResourceError)
from .ftcheck import (AnalyticSymPoint, FtReport, analytic_sympoint, find_smin,
                      ft_report, sym_criterion)
from .fock_oracle import (TruncatedGenerator, auto_truncate,
                          build_biased_generator, leading_theta)
from .ldf import (CumulantSet, ThetaCurve, ThetaEvaluator, cumulants,
                  theta_curve, theta_driven, theta_stationary, write_theta_csv)
from .model import (BathSpec, CountingSpec, CouplingSpec, DriveSpec,
                    NetworkSpec, OscillatorSpec, ValidationReport, load_config,
                    network_from_dict, thermal_bath, thermal_rates, validate)
from .phasespace import (BiasMatrices, PhaseSpaceSystem, assemble_bias,
                         assemble_drift, assemble_noise, bias_functions,
                         build_system, coupling_block, dump_matrices,
                         stability_margin)
from .solver import (BiasedCovariance, CovariancePath, FirstMomentPath,
                     integrate_covariance, integrate_first_moment,
                     solve_lyapunov, solve_riccati_stationary,
                     symplectic_eigenvalues)

__version__ = "0.1.0"
