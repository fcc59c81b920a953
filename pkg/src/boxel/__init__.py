"""Box embeddings for EL++ knowledge bases."""
from .evaluation import (RankingResult, SoundnessReport, accuracy_strict, check_soundness,
                         rank_queries, score_role, score_subsumption)
from .geometry import AffineMap, Box, VolumeConfig
from .kb import KnowledgeBase, load_kb, parse_kb, serialize_kb, validate_kb
from .losses import LossBreakdown, total_loss
from .model import EmbeddingModel, ModelConfig, init_model, load_checkpoint, save_checkpoint
from .normalize import NormalizedKB, abox_to_tbox, normalize
from .trainer import TrainConfig, TrainReport, train

__version__ = "0.1.0"
