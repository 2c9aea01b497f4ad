"""Trace and feature extraction from open causal language models."""

__version__ = "0.1.0"

from .backend import TransformersBackend
from .canonicalize import UNPARSEABLE, canonicalize_answer, extract_answer
from .formats import (validate_feature_file, validate_trace_file,
                      write_feature_file, write_trace_file)
from .harness import (ExtractionJob, ExtractReport, SelfCheckReport, extract,
                      read_questions, selfcheck)

__all__ = [name for name in dir() if not name.startswith("_")]
