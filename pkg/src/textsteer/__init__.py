"""Human-steered text analytics: searched plans, compiled pipelines,
MapReduce execution over analysis units, and categorical LLM evaluation."""

from .decomposer import (
    Decomposer, TreeDelta, backpropagate, best_path, check_conservation, path_value,
    select,
)
from .errors import TextsteerError
from .evaluator import Evaluator, chart_data
from .executor import Executor
from .gateway import (
    CompletionRequest, CompletionResponse, FixtureStore, Gateway, ModelRef,
    extract_json, extract_tagged,
)
from .prompts import PromptCatalog
from .scripted import ScriptedTransport
from .session import Session
from .speclang import (
    CompiledSpec, EvaluatorSpec, MctsNode, Pipeline, PrimitiveTask, SearchConfig,
    SemanticTask, SessionSnapshot, Tree, parse, serialize, validate_pipeline,
)
from .store import AnalysisUnit, CorpusStore, UnitInstance

__version__ = "0.1.0"

__all__ = [
    "AnalysisUnit", "CompiledSpec", "CompletionRequest", "CompletionResponse",
    "CorpusStore", "Decomposer", "Evaluator", "EvaluatorSpec", "Executor",
    "FixtureStore", "Gateway", "MctsNode", "ModelRef", "Pipeline",
    "PrimitiveTask", "PromptCatalog", "ScriptedTransport", "SearchConfig",
    "SemanticTask", "Session", "SessionSnapshot", "TextsteerError", "Tree",
    "TreeDelta", "UnitInstance", "backpropagate", "best_path", "chart_data",
    "check_conservation", "extract_json", "extract_tagged", "parse",
    "path_value", "select", "serialize", "validate_pipeline",
]
