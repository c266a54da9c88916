"""Dataset adapter: drives vision/grounding/embedding services to produce
spinseg interchange datasets."""

__version__ = "0.1.0"

from .client import OBJECT_LIST_PROMPT, embed_labels, ground, list_objects
from .export import export_dataset
from .parse import AssistantResponse, parse_object_list

__all__ = [
    "AssistantResponse",
    "OBJECT_LIST_PROMPT",
    "embed_labels",
    "export_dataset",
    "ground",
    "list_objects",
    "parse_object_list",
]
