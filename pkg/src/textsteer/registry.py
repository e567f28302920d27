"""Registry of the 15 primitive text-analysis task kinds.

Each entry carries the definition plus input/output data roles used for
pipeline compatibility checks and for rendering the conversion prompt.
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class RegistryEntry:
    kind: str
    definition: str
    input_role: str
    output_role: str


_ENTRIES = [
    RegistryEntry("Entity Extraction",
                  "Finds and categorizes entities like names, places, and dates.",
                  "Text", "Entity List"),
    RegistryEntry("Relationship Extraction",
                  "Finds relationships between entities in text.",
                  "Text", "Relationship List"),
    RegistryEntry("Sentiment Analysis",
                  "Identifies the sentiment of the text as positive, negative, or neutral.",
                  "Text", "Text (Sentiment Label)"),
    RegistryEntry("Document Classification",
                  "Assigns categories to a document based on its content.",
                  "Text", "Category Label List"),
    RegistryEntry("Label Generation",
                  "Generates keywords or labels summarizing a document.",
                  "Text", "Keyword Label List"),
    RegistryEntry("Summarization",
                  "Creates a shorter version of the text while keeping key information.",
                  "Text", "Text (Summary)"),
    RegistryEntry("Embedding Generation",
                  "Converts text into numerical vector representations for analysis.",
                  "Text", "Vector Representation"),
    RegistryEntry("Clustering Analysis",
                  "Groups similar items together based on their vector representation.",
                  "Vector Representation", "Cluster Label List"),
    RegistryEntry("Dimensionality Reduction",
                  "Reduces the number of dimensions in vector representations while "
                  "preserving important patterns.",
                  "Vector Representation", "Vector Representation"),
    RegistryEntry("Data Transformation",
                  "Converts data into a different format or structure for analysis or modeling.",
                  "Any", "Transformed Data"),
    RegistryEntry("Machine Translation",
                  "Translates text from one language to another.",
                  "Text", "Translated Text"),
    RegistryEntry("Question Answering",
                  "Finds answers to questions based on a given text.",
                  "Text", "Answer (Text)"),
    RegistryEntry("Natural Language Inference",
                  "Determines the relationship (e.g., entailment, contradiction) between "
                  "two pieces of text.",
                  "Text", "Inference Label (Text)"),
    RegistryEntry("Segmentation",
                  "Splits text into meaningful segments like sentences, paragraphs, or topics.",
                  "Text", "Text Segment List"),
    RegistryEntry("Insights Summarization",
                  "Synthesizes key insights and findings from previous analysis results "
                  "or multiple data sources.",
                  "Any", "Text (Insights Summary)"),
]

REGISTRY = {e.kind: e for e in _ENTRIES}
KINDS = tuple(e.kind for e in _ENTRIES)

# Kinds executed by filling a prompt template per mapped object.
PROMPT_KINDS = frozenset([
    "Entity Extraction", "Relationship Extraction", "Sentiment Analysis",
    "Document Classification", "Label Generation", "Summarization",
    "Machine Translation", "Question Answering", "Natural Language Inference",
    "Insights Summarization",
])

KIND_TOOL = {
    **{k: "prompt" for k in PROMPT_KINDS},
    "Embedding Generation": "embedding",
    "Clustering Analysis": "clustering",
    "Dimensionality Reduction": "dim_reduction",
    "Segmentation": "segmentation",
    "Data Transformation": "transform",
}


def kind_tool_map():
    """Mapping from registry kind to the tool that executes it."""
    return dict(KIND_TOOL)


def render_registry() -> str:
    """Human/LLM-readable listing for the conversion prompt."""
    lines = []
    for e in _ENTRIES:
        lines.append(f"- {e.kind}: {e.definition} (input: {e.input_role}, output: {e.output_role})")
    return "\n".join(lines)
