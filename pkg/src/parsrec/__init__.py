"""Meta-learned selection of bibliographic reference parsers."""

from .refmodel import FieldType, LabeledReference, MetadataField, ParsedReference, normalize_value

__version__ = "0.1.0"

__all__ = ["FieldType", "LabeledReference", "MetadataField", "ParsedReference", "normalize_value"]
