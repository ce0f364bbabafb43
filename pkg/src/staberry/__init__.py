"""
Shortcut-to-adiabaticity Berry-phase simulator for a driven two-level system.

Modules: :mod:`~staberry.schedule` (fields and programs),
:mod:`~staberry.propagator` (unitary and Lindblad evolution),
:mod:`~staberry.tomography` (readout and Berry-phase extraction),
:mod:`~staberry.noise` (O-U noise ensembles), :mod:`~staberry.process`
(chi matrices and gate fidelity) and :mod:`~staberry.frame` (IQ compilation).
"""
__version__ = "0.1.0"

from .errors import (ConstructionError, DomainError, FitError, IntegrationError, SingularFieldError,
                     UndefinedPhaseError)
from .schedule import (DEFAULT_DELTA0, DEFAULT_DT, FieldVector, PulseProgram, RampSpec, RotationSpec, Segment,
                       build_echo_program, build_single_loop_program, build_trajectory_program,
                       counter_diabatic_field, reference_ramp_field, reference_rotation_field, total_field)
from .propagator import (DissipationParams, Trajectory, evolve_lindblad, evolve_unitary, instantaneous_eigenstates,
                         program_unitary, step_unitary, tracking_fidelity)
from .tomography import (BlochVector, bloch_vector, extract_berry_phase, fit_contrast, fit_slope, sample_qst,
                         solid_angle, spherical_trajectory)
from .noise import (EnsembleConfig, OUParams, analytic_nu, analytic_sigma_omega, ensemble_stats, generate_ou,
                    run_noise_ensemble)
from .process import fidelity, ideal_gate_chi, simulate_process, table_s1_runner
from .frame import IQWaveform, LabFrameSpec, compile_iq, frame_correct, rwa_deviation, simulate_lab_frame
