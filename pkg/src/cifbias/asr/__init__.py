"""Frame-level recognizer: recurrent encoder, integrate-and-fire
segmentation, character decoder, training, and embedding extraction."""

from cifbias.asr.cif import cif_integrate, confidence_index
from cifbias.asr.extract import (
    EmbeddingExtract,
    extract_embeddings,
    load_extracts,
    save_extracts,
)
from cifbias.asr.model import AsrForward, AsrModel, asr_forward
from cifbias.asr.train import asr_train, batch_loss, boundary_prior, quantity_loss

__all__ = [
    "AsrForward",
    "AsrModel",
    "EmbeddingExtract",
    "asr_forward",
    "asr_train",
    "batch_loss",
    "boundary_prior",
    "cif_integrate",
    "confidence_index",
    "extract_embeddings",
    "load_extracts",
    "quantity_loss",
    "save_extracts",
]
