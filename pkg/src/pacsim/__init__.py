"""Pulsed-protocol simulator for phonon-added coherent states.

Simulates and cross-validates the three stages of the protocol on a
sideband-resolved optomechanical cavity: coherent-state preparation under
a strong red-detuned pump plus a weak resonant probe, single-phonon
addition by a weak blue-detuned write pulse heralded on a single-photon
click, and state readout through a red-detuned swap pulse.  Closed-form
detection statistics (Mandel Q, quadrature squeezing) are paired with an
exact truncated-Fock-space engine that serves as their oracle.
"""

from .params import (SystemParams, DriveParams, PulseSpec, PulseSequence,
                     TimingReport, PRESETS, thermal_occupation,
                     drive_amplitude, intracavity_photons, effective_coupling,
                     conversion_factor, coherent_amplitude_estimate,
                     validate_sequence)
from .meanfield import (MeanFieldState, MeanFieldTrajectory, FourierSolution,
                        FourierFitReport, integrate_meanfield,
                        analytic_fourier_solution,
                        compare_trajectory_to_fourier)
from .fluctuations import (DriftMatrix, DiffusionMatrix, CovarianceMatrix,
                           ModulationReport, build_drift_diffusion,
                           steady_covariance_lyapunov,
                           steady_covariance_spectral, periodic_modulation,
                           residual_occupation)
from .fock import (FockSpace, KetState, DensityOperator, vacuum, basis,
                   coherent, pacs_ket, displacement, thermal_coherent_state,
                   write_pulse_propagator, apply_write_pulse,
                   write_and_herald, condition_on_single_photon,
                   readout_bogoliubov, mandel_Q_numeric,
                   quadrature_variance_numeric, number_moments, mean_number,
                   rotate_phase, fidelity, converged_scalar)
from .analytics import (laguerre, output_moments, mandel_Q_analytic,
                        quadrature_variance_analytic,
                        thermal_conditional_weights, ThermalConditionalWeights,
                        truncated_conditional_matrix, thermal_mandel_Q,
                        mandel_Q_truncated_state, thermal_quadrature_variance,
                        thermal_mandel_Q_oracle,
                        thermal_quadrature_variance_oracle,
                        thermal_pipeline_oracle, pacs_readout_oracle)
from . import errors

__version__ = "0.1.0"
