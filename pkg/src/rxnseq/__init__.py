"""Token-sequence toolkit for reaction diagram parsing.

Reaction structures are serialized as entity boxes and role tokens, decoded
under a grammar-constrained greedy search, and scored with hard/soft match
metrics. No neural network is included: models plug in as logit sources.
"""

from .codec import OrderingPolicy, ParseStatus, TokenSequence, decode_tokens, encode, order_reactions
from .decoder import DecodeConfig, greedy_decode, postprocess, replay_oracle
from .fsm import DecodeState, accepts, allowed_tokens, step
from .metrics import MatchMode, evaluate, iou, reaction_match
from .schema import (
    BBox,
    Dataset,
    DiagramRecord,
    Entity,
    EntityType,
    Reaction,
    ReactionStructure,
    ResolvedReaction,
    Style,
    clip_bbox,
    validate_record,
)
from .vocab import Vocabulary, dequantize, quantize

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "Dataset",
    "DecodeConfig",
    "DecodeState",
    "DiagramRecord",
    "Entity",
    "EntityType",
    "MatchMode",
    "OrderingPolicy",
    "ParseStatus",
    "Reaction",
    "ReactionStructure",
    "ResolvedReaction",
    "Style",
    "TokenSequence",
    "Vocabulary",
    "accepts",
    "allowed_tokens",
    "clip_bbox",
    "decode_tokens",
    "dequantize",
    "encode",
    "evaluate",
    "greedy_decode",
    "iou",
    "order_reactions",
    "postprocess",
    "quantize",
    "reaction_match",
    "replay_oracle",
    "step",
    "validate_record",
]
