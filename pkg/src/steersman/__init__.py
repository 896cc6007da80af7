"""steersman: adaptive sensor steering for structural monitoring.

Modal plate models, Fisher-information configuration scoring, a
deterministic sensor-steering MDP, a categorical distributional Q-learning
agent, classical placement baselines, and an experiment harness.
"""

from .plate import (CandidateGrid, ConditionSpec, DiscreteModel, ModalBasis,
                    PlateModelError, PlateSpec, apply_condition, build_plate,
                    load_basis, mac, save_basis, solve_modes)
from .information import (CovarianceCache, FimResult, ObservationSelector,
                          SingularSelectionError, build_covariance,
                          det_via_cholesky, entropy, fim, normalizer, psi_weight,
                          reward)
from .environment import (EnvState, ModelLibrary, StepResult, SteeringEnv,
                          decode_action, initial_layout)
from .baselines import (PlacementResult, brute_force_optimum, efi_select,
                        evaluate_policy, fssp_select, random_policy)
from .agent import SupportSpec, TrainConfig, train

__version__ = "0.1.0"
