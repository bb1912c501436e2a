"""Portable feature/manifest formats, splitting, and synthetic data."""

from sfmprobe.datastore.format import (
    LayerFeatureTensor,
    fnv1a64,
    read_feature_file,
    write_feature_file,
)
from sfmprobe.datastore.manifest import (
    Audiogram,
    Manifest,
    Sample,
    SfmAttributes,
    SfmDescriptor,
    load_manifest,
    write_manifest,
)
from sfmprobe.datastore.registry import get_sfm, register, registered_sfms
from sfmprobe.datastore.splits import (
    FoldPartition,
    FoldSplit,
    make_splits,
    read_split,
    split_from_dict,
    split_to_dict,
    write_split,
)
from sfmprobe.datastore.synth import SynthResult, synth_dataset

__all__ = [
    "Audiogram",
    "FoldPartition",
    "FoldSplit",
    "LayerFeatureTensor",
    "Manifest",
    "Sample",
    "SfmAttributes",
    "SfmDescriptor",
    "SynthResult",
    "fnv1a64",
    "get_sfm",
    "load_manifest",
    "make_splits",
    "read_feature_file",
    "read_split",
    "register",
    "registered_sfms",
    "split_from_dict",
    "split_to_dict",
    "synth_dataset",
    "write_feature_file",
    "write_manifest",
    "write_split",
]
