"""Online continual learning with growing dual self-organizing memories."""

from .data import (DataError, EpochRecord, MetricsLog, SequenceDataset,
                   SyntheticSpec, ablation_spec, default_spec, export_metrics,
                   forgetting_spec, generate_synthetic, load_dataset,
                   parse_metrics, write_dataset, write_dataset_text)
from .harness import (EvalResult, HarnessError, RunConfig, ScenarioSchedule,
                      aggregate_logs, build_schedule, evaluate, make_model,
                      run_batch, run_incremental, run_scenario, run_trials,
                      split_train_test)
from .model import DualMemory, ReplayReport, SemanticEvent, Trajectory
from .network import (ContextCarrier, GrowingNetwork, NetworkParams,
                      StepReport, activity, habituate, semantic_params)
from .snapshot import (SnapshotError, load_model, load_network, save_model,
                       save_network)

__version__ = "0.1.0"
