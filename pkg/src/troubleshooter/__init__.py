"""Causality-aware troubleshooting over maintenance return-on-experience records."""

from .corpus import CleanText, Corpus, RoxRecord, TextCleaner, clean_text, export_jsonl, ingest, split
from .inference import (
    NoiseModel,
    RankedDistribution,
    conditional,
    intervene_solution,
    rca,
    recourse,
    transport_solution,
)
from .model import CbnModel, fit, load, load_from_path, save, save_to_path
from .quantizer import Codebook, EmbedderConfig, Quantizer, QuantizerParams, fit_quantizer

__version__ = "0.1.0"

__all__ = [
    "CleanText",
    "Corpus",
    "RoxRecord",
    "TextCleaner",
    "clean_text",
    "export_jsonl",
    "ingest",
    "split",
    "NoiseModel",
    "RankedDistribution",
    "conditional",
    "intervene_solution",
    "rca",
    "recourse",
    "transport_solution",
    "CbnModel",
    "fit",
    "load",
    "load_from_path",
    "save",
    "save_to_path",
    "Codebook",
    "EmbedderConfig",
    "Quantizer",
    "QuantizerParams",
    "fit_quantizer",
    "__version__",
]
