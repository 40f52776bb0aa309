"""Time-symmetric GRW collapse: forward trajectories, backward replay of the
same collapse record, Born-rule tests in both time directions, and an exact
discrete oracle for boundary-conditioned collapse probabilities."""

from .errors import (
    BoundaryLeakWarning,
    CollapseError,
    ConditioningError,
    ConfigError,
    DegenerateCollapseError,
    DegenerateStateError,
    DepletedSupportWarning,
    IncompatibleGridError,
    InvalidStateError,
    RecordFormatError,
    RecordOrderingError,
    RecordVersionError,
)
from .state import (
    Direction,
    GridSpec,
    ModelParams,
    PotentialSpec,
    WaveFunction,
    expected_energy,
    fidelity,
    gaussian_packet,
    inner_product,
    norm,
    normalize,
    position_density,
)
from .propagator import evolve, evolve_to
from .grw import (
    CollapseDensity,
    CollapseEvent,
    CollapseRecord,
    apply_jump,
    collapse_density,
    generate_trajectory,
    jump_amplitude,
    sample_center,
    schedule_jumps,
)
from .reverse import ReplayResult, backward_collapse_density, pit_value, replay_backward, replay_forward
from .stats import KSResult, direction_test, ks_two_sample, ks_uniform
from .persistence import RunConfig, parse_record, split_stream, write_record

__version__ = "0.1.0"
