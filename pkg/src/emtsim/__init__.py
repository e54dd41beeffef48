"""Transient simulation of circuit and power-system DAE models.

Implicit integrators using first and second derivatives, three restart
strategies for switching discontinuities, two built-in test systems, a
bus-voltage measurement chain, and a CSV-based comparison harness.
"""

from .dae import (DaeSystem, JacobianSet, SystemState, estimate_jacobians,
                  eval_f, eval_g, eval_xddot)
from .discontinuity import (DiscontinuityPolicy, Event, StepRecord, advance,
                            handle_cda, handle_improved, handle_preliminary,
                            validate_events)
from .errors import (ConvergenceError, CsvFormatError, DimensionError,
                     EmtsimError, ModelError, ParameterError, SchedulingError,
                     SingularityError, SolverError, UsageError, WindowError)
from .integrators import (IntegratorCoefficients, NewtonSettings, make_bem,
                          make_itm, make_obreshkov22, make_taylor2,
                          newton_solve, residual_first_order,
                          residual_second_order, step)
from .measurement import (MeasurementParams, MeasurementState,
                          build_measurement_bench, clarke, filter_derivative,
                          init_locked, magnitude_pre, phase_shift,
                          pll_derivatives, pll_rates)
from .networks import (AcSource, Branch, Network, SteadyPhasors,
                       ac_source_voltage, build_fig1_circuit, build_three_bus,
                       fig1_initial_state, oracle_u_bem, oracle_u_second,
                       phasor_solution, solve_steady_state,
                       three_bus_steady_signals)
from .scenarios import (ConvergenceStudy, RunDiagnostics, ScenarioConfig,
                        convergence_study, reference_config, run_scenario,
                        segment_times, simulate)
from .series import (ComparisonReport, SignalError, TimeSeries, compare,
                     read_csv, write_csv)

__version__ = "0.1.0"
