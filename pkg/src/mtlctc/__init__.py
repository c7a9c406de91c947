"""BiLSTM-CTC acoustic modelling with multitask and pre-training strategies for accented speech."""
from ._accel import USE_NUMBA
from .alphabet import Alphabet
from .ctc import ctc_loss, ctc_loss_bruteforce, expand_with_blanks, softmax_frame
from .decoder import beam_search_decode, best_path_decode, collapse_alignment, exhaustive_decode
from .metrics import cer, edit_distance, pooled_cer
from .model import (ModelDims, ModelGraph, MtlConfig, attach_new_head, build_multitask, build_single_task,
                    combined_cost, mtl_backward, truncate_for_pretraining)

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA", "Alphabet",
    "ctc_loss", "ctc_loss_bruteforce", "expand_with_blanks", "softmax_frame",
    "beam_search_decode", "best_path_decode", "collapse_alignment", "exhaustive_decode",
    "cer", "edit_distance", "pooled_cer",
    "ModelDims", "ModelGraph", "MtlConfig", "attach_new_head", "build_multitask",
    "build_single_task", "combined_cost", "mtl_backward", "truncate_for_pretraining",
]
