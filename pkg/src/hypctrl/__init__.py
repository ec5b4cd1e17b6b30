"""Predictive boundary control workbench for 2x2 hyperbolic PDE-ODE plants."""

from .characteristics import (
    CharCurve,
    DeterminateSet,
    Family,
    frozen_transit,
    invert_curve,
    measurement_transit,
)
from .control_quasilinear import (
    QuasilinearController,
    TargetSolution,
    VirtualInputPlan,
    design_virtual_input,
    solve_target_system,
)
from .control_semilinear import SemilinearController
from .errors import (
    CharacteristicError,
    ConfigError,
    ControlError,
    EvaluationError,
    HypctrlError,
    InputCoverageError,
    NumericsError,
    ObserverError,
    PredictionError,
    RangeError,
    UnsupportedModel,
)
from .model import (
    Grid,
    InitialData,
    Kind,
    Partials,
    Scenario,
    SystemModel,
    ValidationReport,
    initial_state,
    numeric_partials,
    validate_model,
)
from .observer import (
    ObserverLoop,
    ObserverState,
    OdeObserver,
    algebraic_ode_observer,
    differentiate_measurement,
    estimate_current,
    make_observer_state,
    observer_step,
)
from .predictor import Prediction, predict_determinate, predict_interval
from .presets import PRESET_NAMES, Preset, default_reference, get_preset
from .simulator import (
    BlowupRecord,
    ConstantInput,
    InputSegment,
    PlantState,
    SimOptions,
    StitchedInput,
    Trajectory,
    detect_blowup,
    run_closed_loop,
    simulate,
)

__version__ = "0.1.0"
