"""Memory-augmented dialogue manager: corpus generation, training,
evaluation and turn-by-turn inference."""

from ._core import (
    ConfigError,
    DataError,
    Dataset,
    Dialogue,
    HashMismatchError,
    MadError,
    Model,
    Ontology,
    ParseError,
    config_text,
    flight_ontology,
    generate,
    load_dataset,
    restaurant_ontology,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "Dialogue",
    "HashMismatchError",
    "MadError",
    "Model",
    "Ontology",
    "ParseError",
    "config_text",
    "flight_ontology",
    "generate",
    "load_dataset",
    "restaurant_ontology",
    "train",
]
