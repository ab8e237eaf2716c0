"""Next-event prediction for smart-home binary sensor streams.

Pipeline: parse Table-1 style logs, correct missing motion activations
against the apartment topology, letter-encode (SPEED/ALZ text), optionally
attach elapsed-time or K-means time tokens, and predict the next event
with frequency-trie PPM models or a from-scratch LSTM.  A seeded apartment
simulator with a computable prediction ceiling stands in for field-trial
data; a transfer-learning protocol pretrains across apartments.
"""

__version__ = "0.1.0"

from .backend import active_backend
from .correction import CorrectionReport, correct_missing_motion, is_graph_valid
from .events import (ApartmentGraph, Sensor, SensorEvent, SensorRegistry,
                     load_apartment_config, parse_event_log, serialize_events,
                     validate_against_registry)
from .evaluation import EvalConfig, EvalReport, chronological_folds, evaluate, size_sweep
from .lstm import LstmConfig, RecurrentModel, backward, forward, loss, predict_joint, train
from .ppm import (FrequencyTrie, build_trie_alz, build_trie_speed,
                  ppm_distribution, predict_next)
from .simulator import RoutineModel, bayes_ceiling, build_preset, simulate
from .symbolization import SymbolSequence, Vocabulary, alz_encode, speed_encode
from .timefeatures import (BUCKETS_4, BUCKETS_8, TimeClusterModel, annotate,
                           bucketize, elbow_select, fit_time_clusters, kmeans_fit)
from .transfer import HarmonizationMap, harmonize, pretrain_finetune

__all__ = [name for name in dir() if not name.startswith("_")]
