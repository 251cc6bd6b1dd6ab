"""Electromechanical disturbance simulation and Db4 wavelet analysis of frequency records."""

from .analysis import (
    CoherencyPartition,
    EnergyProfile,
    LocalizationReport,
    RocofEstimate,
    coherency_groups,
    d1_energy,
    estimate_rocof,
    localize,
)
from .errors import (
    DisconnectedTopologyError,
    EmwaveError,
    InsufficientLengthError,
    NoEquilibriumError,
    NumericalError,
    SignalFormatError,
    ValidationError,
    WindowError,
)
from .grid import (
    DisturbanceEvent,
    GeneratorParams,
    SystemModel,
    build_benchmark,
    coi_frequency,
    make_model,
    simulate,
)
from .io import load_scenario, load_signals_csv, write_signals_csv
from .pipeline import PipelineConfig, emit_plotdata, run_pipeline
from .signals import SignalSet, resample
from .wavelet import (
    BandMap,
    DecompositionSet,
    FilterPair,
    band_frequencies,
    db4_filter_bank,
    decompose,
    decompose_set,
    reconstruct_bands,
)

__version__ = "0.1.0"
