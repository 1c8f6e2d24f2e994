"""Hierarchical record schemas: parsing, validation, pruning, codecs."""

from tesserflow.schema.codec import decode_record, empty_record, encode_record
from tesserflow.schema.infer import infer_stage_schema, schema_from_field_types
from tesserflow.schema.model import (
    AnnotationMismatch,
    CardinalityMismatch,
    FIELD_TYPES,
    IndexAnnotation,
    Record,
    SCALAR_TYPES,
    Schema,
    SchemaError,
    SchemaNode,
    TypeMismatch,
    UnknownColset,
    UnknownField,
    UnknownPath,
    format_path,
    parse_path,
    prune_schema,
    validate_record,
)
from tesserflow.schema.parser import parse_schema

__all__ = [
    "AnnotationMismatch",
    "CardinalityMismatch",
    "FIELD_TYPES",
    "IndexAnnotation",
    "Record",
    "SCALAR_TYPES",
    "Schema",
    "SchemaError",
    "SchemaNode",
    "TypeMismatch",
    "UnknownColset",
    "UnknownField",
    "UnknownPath",
    "decode_record",
    "empty_record",
    "encode_record",
    "format_path",
    "infer_stage_schema",
    "parse_path",
    "parse_schema",
    "prune_schema",
    "schema_from_field_types",
    "validate_record",
]
