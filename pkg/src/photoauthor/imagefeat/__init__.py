"""Low-level image features: L*a*b* histogram, GIST, SURF bag of words."""

from ._image import load_image, to_gray
from .color import lab_histogram, srgb_to_lab
from .gist import gist_descriptor
from .surf import DescriptorSet, extract_descriptors
from .vocab import Vocabulary, bow_encode, build_vocabulary

__all__ = [
    "load_image", "to_gray", "lab_histogram", "srgb_to_lab", "gist_descriptor",
    "DescriptorSet", "extract_descriptors", "Vocabulary", "bow_encode", "build_vocabulary",
]
