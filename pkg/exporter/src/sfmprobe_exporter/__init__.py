"""Layer-wise encoder feature extraction from pretrained speech models
into the SFMF/manifest wire formats."""

from sfmprobe_exporter.export import (
    ClipSpec,
    ExportJob,
    export,
    export_synthetic,
    load_job_csv,
    read_wav_mono,
)
from sfmprobe_exporter.registry import PHI4_TRANSCRIBE_PROMPT, get_entry, known_sfms
from sfmprobe_exporter.wire import ExportError, fnv1a64, write_feature_file, write_manifest

__version__ = "0.1.0"

__all__ = [
    "ClipSpec",
    "ExportJob",
    "ExportError",
    "PHI4_TRANSCRIBE_PROMPT",
    "export",
    "export_synthetic",
    "fnv1a64",
    "get_entry",
    "known_sfms",
    "load_job_csv",
    "read_wav_mono",
    "write_feature_file",
    "write_manifest",
    "__version__",
]
