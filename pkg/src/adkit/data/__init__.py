"""Patch I/O, manifests, patient-wise splitting and synthetic cohorts."""

from .manifest import (
    Dataset,
    ManifestRecord,
    format_manifest,
    load_manifest,
    parse_manifest,
    write_manifest,
)
from .patch import Patch, decode_pgm, encode_pgm, read_patch, write_patch
from .split import split_by_patient
from .synthetic import CohortKind, generate_synthetic_cohort

__all__ = [
    "CohortKind",
    "Dataset",
    "ManifestRecord",
    "Patch",
    "decode_pgm",
    "encode_pgm",
    "format_manifest",
    "generate_synthetic_cohort",
    "load_manifest",
    "parse_manifest",
    "read_patch",
    "split_by_patient",
    "write_manifest",
    "write_patch",
]
