"""Outcome-oriented predictive process monitoring lab.

From raw event-log CSVs to trained duration-aware sequence/graph
classifiers and classification reports, with a from-scratch autodiff core
and a hypermodel search layer.
"""

from .binning import DurationBinner, PseudoEmbedder
from .encoding import EncodedCase, EventEncoder
from .eventlog import (
    AttributeSpec,
    Case,
    Event,
    EventLog,
    SchemaSpec,
    compute_duration,
    order_events,
    parse_event_log,
    write_event_log,
)
from .metrics import ClassificationReport, classification_report, confusion_matrix, render_report
from .models import (
    InputDims,
    ModelConfig,
    OutcomeClassifier,
    build_model,
    desk_config,
    train_model,
)
from .representations import (
    CaseGraph,
    CaseSequence,
    GraphBuilder,
    SequenceBuilder,
    attach_pseudo,
    split_train_val,
)
from .synth import SynthSpec, bpi12_like_spec, generate_synthetic, patients_like_spec
from .tuning import (
    HyperSpace,
    TrialResult,
    hyperband,
    hyperband_schedule,
    make_model_trainer,
    pruned_search,
    sample_config,
    select_objective,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeSpec", "Case", "CaseGraph", "CaseSequence", "ClassificationReport",
    "DurationBinner", "EncodedCase", "Event", "EventEncoder", "EventLog",
    "GraphBuilder", "HyperSpace", "InputDims", "ModelConfig", "OutcomeClassifier",
    "PseudoEmbedder", "SchemaSpec", "SequenceBuilder", "SynthSpec", "TrialResult",
    "attach_pseudo", "bpi12_like_spec", "build_model", "classification_report",
    "compute_duration", "confusion_matrix", "desk_config", "generate_synthetic",
    "hyperband", "hyperband_schedule", "make_model_trainer", "order_events",
    "parse_event_log", "patients_like_spec", "pruned_search", "render_report",
    "sample_config", "select_objective", "split_train_val", "train_model",
    "write_event_log",
]
