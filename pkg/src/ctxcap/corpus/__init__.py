"""Screenplay/subtitle corpus construction."""

from .align import AlignmentMap, align_script_to_time
from .manifest import DatasetManifest, ManifestRecord, filter_movies, read_features, write_features
from .script import ScriptDocument, ScriptParseError, parse_script
from .srt import SubtitleTrack, parse_srt, serialize_srt
from .text import compute_overlap, crop_context, tokenize

__all__ = [
    "AlignmentMap",
    "DatasetManifest",
    "ManifestRecord",
    "ScriptDocument",
    "ScriptParseError",
    "SubtitleTrack",
    "align_script_to_time",
    "compute_overlap",
    "crop_context",
    "filter_movies",
    "parse_script",
    "parse_srt",
    "read_features",
    "serialize_srt",
    "tokenize",
    "write_features",
]
