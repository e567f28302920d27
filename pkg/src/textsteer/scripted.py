"""A deterministic offline transport for tests, demos, and fixture recording.

ScriptedTransport answers every completion request by inspecting its tag and
content, producing plausible, well-formed responses without any network.
Running the gateway in record mode over this transport yields fixture files
that replay byte-identically, which is what the determinism tests exercise.
"""
from __future__ import annotations

import hashlib
import json
import re

from .gateway import CompletionResponse

STEP_POOL = [
    "Thematic Analysis", "Sentiment Analysis", "Keyword Extraction",
    "Entity Analysis", "Summarization", "Topic Clustering",
    "Trend Analysis", "Document Classification",
]

SENTIMENTS = ["positive", "negative", "neutral"]
CATEGORIES = ["News", "Opinion", "Review"]

_STOPWORDS = {
    "the", "and", "for", "with", "that", "this", "from", "have", "are", "was",
    "were", "will", "been", "their", "they", "them", "its", "his", "her", "our",
    "about", "into", "over", "under", "after", "before", "these", "those",
    "content", "summary", "documents", "document",
}


def _h(text: str) -> int:
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest()[:12], 16)


class ScriptedTransport:
    """Callable transport: request -> deterministic CompletionResponse."""

    def __call__(self, request) -> CompletionResponse:
        tag = request.tag.split("/retry")[0]
        category = tag.split("/", 1)[0]
        handler = getattr(self, f"_{category}", None)
        text = handler(tag, request) if handler else "{}"
        return CompletionResponse(text=text,
                                  prompt_tokens=len(request.user.split()),
                                  completion_tokens=len(text.split()))

    # -- search -------------------------------------------------------------

    def _expand(self, tag, request):
        m = re.search(r"with (\d+) possible alternatives", request.system)
        k = int(m.group(1)) if m else 2
        m = re.search(r"Steps so far \((\d+) steps\)", request.user)
        depth = int(m.group(1)) if m else 0
        steps = []
        used = set()
        for i in range(k):
            if depth >= 4 or (depth >= 2 and i == k - 1):
                steps.append({"label": "END", "description": "The analysis is complete.",
                              "explanation": "No further steps are needed.",
                              "parentIds": []})
                continue
            idx = _h(f"{tag}:{i}") % len(STEP_POOL)
            while STEP_POOL[idx] in used:
                idx = (idx + 1) % len(STEP_POOL)
            label = STEP_POOL[idx]
            used.add(label)
            steps.append({"label": label,
                          "description": f"Perform {label.lower()} on the documents.",
                          "explanation": f"{label} moves the analysis toward the goal.",
                          "parentIds": []})
        return json.dumps({"steps": steps})

    def _judge(self, tag, request):
        verdict = "Yes" if _h(tag + request.user) % 3 != 0 else "No"
        criterion = tag.split("/")[2] if len(tag.split("/")) > 2 else "quality"
        return (f"<REASONING>Considering the {criterion} of this step relative to the "
                f"goal, the answer is {verdict.lower()}.</REASONING>"
                f"<RESULT>{verdict}</RESULT>")

    def _summary(self, tag, request):
        first = request.user.split("\n---\n")[0].strip()
        return f"The judges broadly agreed: {first[:160]}"

    # -- conversion and compilation -----------------------------------------

    def _convert(self, tag, request):
        m = re.search(r"Current semantic task to convert:\n\[[^\]]*\] ([^:\n]+)",
                      request.user)
        label = (m.group(1) if m else "").lower()
        previous = request.user.split("Current semantic task")[0]
        tasks = []

        def add(kind, deps=None):
            tasks.append({"solves": "", "label": kind, "id": f"n{len(tasks) + 1}",
                          "description": f"{kind} for this step.",
                          "explanation": f"{kind} is required here.",
                          "depend_on": deps or []})

        if any(w in label for w in ("theme", "topic", "cluster")):
            m = re.search(r'"id": "(p\d+)",\s*"label": "Embedding Generation"', previous)
            if m:
                add("Clustering Analysis", [m.group(1)])
            else:
                add("Embedding Generation")
                add("Clustering Analysis", ["n1"])
        elif "sentiment" in label:
            add("Sentiment Analysis")
        elif any(w in label for w in ("keyword", "label")):
            add("Label Generation")
        elif "entit" in label:
            add("Entity Extraction")
        elif "summar" in label:
            add("Summarization")
        elif "classif" in label:
            add("Document Classification")
        elif "segment" in label:
            add("Segmentation")
        elif any(w in label for w in ("transform", "aggregat", "count")):
            add("Data Transformation")
        elif "insight" in label or "trend" in label:
            add("Insights Summarization")
        elif "translat" in label:
            add("Machine Translation")
        else:
            add("Summarization")
        return json.dumps({"primitive_tasks": tasks, "validation_check": "ok"})

    def _compile(self, tag, request):
        if tag.endswith("/input_keys"):
            return self._input_keys(request)
        return self._tool_config(request)

    @staticmethod
    def _states_from(user):
        """[(unit, key, schema)] in listed order from the rendered state blocks."""
        out = []
        unit = None
        for line in user.splitlines():
            m = re.match(r"<state>unit: (.+)", line)
            if m:
                unit = m.group(1).strip()
                continue
            m = re.match(r"\s*- key: (\S+)\s+schema: (.+)", line)
            if m and unit:
                out.append((unit, m.group(1), m.group(2).strip()))
        return out

    def _input_keys(self, request):
        desc = request.user.split("\n", 1)[0].removeprefix("Task: ").lower()
        keys = self._states_from(request.user)
        chosen = []
        if any(w in desc for w in ("cluster", "group", "dimension", "reduce")):
            vectors = [(u, k, s) for u, k, s in keys if s == "list[float]"]
            if vectors:
                chosen = [vectors[-1]]
        elif "embed" in desc:
            strs = [(u, k, s) for u, k, s in keys if s == "str"]
            if strs:
                chosen = [strs[-1]]
        elif any(w in desc for w in ("transform", "label", "aggregat")):
            last_unit = keys[-1][0] if keys else None
            chosen = [(u, k, s) for u, k, s in keys if u == last_unit]
        if not chosen:
            content = [(u, k, s) for u, k, s in keys if k == "content"]
            chosen = [content[0]] if content else keys[:1]
        return json.dumps({"required_keys": [{"key": k, "schema": s}
                                             for _, k, s in chosen]})

    def _tool_config(self, request):
        system = request.system
        desc = ""
        m = re.search(r"Task: ([^\n]*)", request.user)
        if m:
            desc = m.group(1).lower()
        if "clustering plans" in system:
            m = re.search(r"(\d+) clusters", desc) or re.search(r"k=(\d+)", desc)
            k = int(m.group(1)) if m else 3
            return json.dumps({"algorithm": "kmeans", "parameters": {"n_clusters": k},
                               "output_schema": "{ 'clusters': 'int'}"})
        if "dimensionality reduction plans" in system:
            return json.dumps({"algorithm": "pca", "parameters": {"n_components": 2},
                               "output_schema": "{ 'reduced': 'list[float]'}"})
        if "embedding plans" in system:
            return json.dumps({"provider": "hashed", "parameters": {"dim": 128},
                               "output_schema": "{ 'embedding': 'list[float]'}"})
        if "text segmentation" in system:
            return json.dumps({"strategy": "paragraph", "parameters": {},
                               "output_schema": "{ 'segments': 'list[str]'}"})
        if "data transformation plans" in system:
            return json.dumps({"operation": "transform", "parameters": {"plan": []},
                               "output_schema": "{ 'transformed': 'str'}"})
        # prompt tool; respect the instruction to avoid existing key names
        key, schema = self._output_for(desc)
        m = re.search(r"DIFFERENT from any following keys: \[([^\]]*)\]", system)
        taken = {k.strip() for k in m.group(1).split(",")} if m else set()
        base, n = key, 2
        while key in taken:
            key = f"{base}_{n}"
            n += 1
        return json.dumps({
            "prompt": {
                "Context": "The user is analyzing a collection of documents.",
                "Task": f"Analyze the given text: {desc or 'produce the requested result'}.",
                "Requirements": "Be concise and deterministic.",
                "JSON_format": json.dumps({key: schema}),
            },
            "output_schema": json.dumps({key: schema}),
        })

    @staticmethod
    def _output_for(desc):
        if "sentiment" in desc:
            return "sentiment", "str"
        if "entit" in desc:
            return "entities", "list[str]"
        if "summar" in desc:
            return "summary", "str"
        if "classif" in desc or "categor" in desc:
            return "category", "str"
        if "label" in desc or "keyword" in desc:
            return "labels", "list[str]"
        if "translat" in desc:
            return "translation", "str"
        if "answer" in desc or "question" in desc:
            return "answer", "str"
        return "result", "str"

    # -- per-object execution -----------------------------------------------

    def _exec(self, tag, request):
        m = re.search(r"Reply with this JSON format[^\n]*\n(.*)$", request.system,
                      re.DOTALL)
        key, schema = "result", "str"
        if m:
            try:
                fmt = json.loads(m.group(1).strip())
                key, schema = next(iter(fmt.items()))
            except (ValueError, StopIteration):
                pass
        if schema == "list[str]":
            value = self._salient_words(request.user)
        elif key == "sentiment":
            value = SENTIMENTS[_h(request.user) % len(SENTIMENTS)]
        elif key == "category":
            value = CATEGORIES[_h(request.user) % len(CATEGORIES)]
        elif key == "summary":
            body = request.user.split(":", 1)[-1].strip()
            value = " ".join(body.split()[:12])
        else:
            value = f"ok-{_h(request.user) % 10 ** 6}"
        return json.dumps({key: value})

    @staticmethod
    def _salient_words(user):
        words = re.findall(r"\b[A-Z][a-z]+\b", user.split(":", 1)[-1])
        seen = []
        for w in words:
            if w not in seen:
                seen.append(w)
        return seen[:5]

    # -- evaluation ---------------------------------------------------------

    def _eval(self, tag, request):
        part = tag.split("/")[1]
        if part == "recommend":
            return json.dumps({"evaluator_descriptions": [
                {"name": "Accuracy", "description": "Whether the result is faithful to the text."},
                {"name": "Summary Length", "description": "Whether the result is long or short."},
                {"name": "Clarity", "description": "Whether the result is clearly worded."},
            ]})
        if part == "generate":
            criterion = request.user.lower()
            if "length" in criterion:
                scores = ["Long", "Short"]
                name = "Summary Length Evaluator"
            else:
                scores = ["Good", "Acceptable", "Poor"]
                name = "Quality Evaluator"
            return json.dumps({"evaluator_specification": {
                "name": name,
                "definition": "Scores each result against the user's criterion.",
                "prompt_template": {
                    "Context": "The user analyzed a collection of documents.",
                    "Task": "Assign one score to the given result.",
                    "Possible Scores": scores,
                }}})
        if part == "run":
            m = re.search(r"from this list: ([^\n.]*)", request.system)
            scores = [s.strip() for s in m.group(1).split(",")] if m else ["Good"]
            pick = scores[_h(request.user) % len(scores)]
            return (f"<REASONING>Scored deterministically from the content.</REASONING>"
                    f"<RESULT>{pick}</RESULT>")
        if part == "topic":
            words = [w.lower() for w in re.findall(r"[A-Za-z]{4,}", request.user)]
            counts = {}
            for w in words:
                if w not in _STOPWORDS:
                    counts[w] = counts.get(w, 0) + 1
            if not counts:
                return "General"
            best = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
            return best.capitalize()
        return "{}"

    # -- benches ------------------------------------------------------------

    def _bench(self, tag, request):
        part = tag.split("/")[1]
        if part == "arena":
            pick = "Solution 1" if _h(request.user) % 2 == 0 else "Solution 2"
            return (f"Criteria: coverage, cost, clarity. Both solutions are workable; "
                    f"one is a better fit overall.\n<RESULT>{pick}</RESULT>")
        if part == "coverage":
            m = re.search(r"Ground-truth topic: ([^\n]*)\nGenerated concepts: (.*)",
                          request.user, re.DOTALL)
            verdict = "No"
            if m and m.group(1).strip().lower() in m.group(2).lower():
                verdict = "Yes"
            return (f"<REASONING>Checked the concept list for the topic.</REASONING>"
                    f"<RESULT>{verdict}</RESULT>")
        return "{}"
