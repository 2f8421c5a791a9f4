"""Client layer for the vision oracle that reasons about edits.

The module separates three concerns:

* prompt templates with a fixed id set and machine-readable marker
  lines (``TASK:``, ``SOURCE:``, ``STAGE:``, ``GROUND_TRUTH:``);
* transports: a deterministic ``StubClient`` for tests, a
  content-addressed ``CachingClient``, a hermetic ``ReplayClient`` and
  an ``HttpClient`` with bounded retries;
* the two service conversations: synthesizing grounded reasoning
  behind a known edit, and planning/resolving edits for a new image.

Synthesis prompts embed the answer key on a ``GROUND_TRUTH:`` line;
planning prompts never do.
"""

import base64
import hashlib
import json
import math
import os
import random
import re
import time
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import (
    RateLimited,
    SchemaError,
    SchemaViolation,
    ServiceUnavailable,
    UnresolvableTriplet,
    ValidationError,
)
from .imagecore import ColorSpace, ImageBuffer, encode
from .ops import STAGE_NAMES, Adjustment, list_ops
from .plan import (
    DEFAULT_LEGEND,
    ReasoningTriplet,
    StagePlan,
    ops_named_in,
    parse_plan,
    resolve_legend,
)

MAX_IMAGES_PER_REQUEST = 4
TRANSPORT_MAX_SIDE = 1024
DEFAULT_MAX_TOKENS = 768
_GATE_ATTEMPTS = 3
_HTTP_ATTEMPTS = 3
_BACKOFF_BASE_S = 1.0


@dataclass(frozen=True)
class CompletionRequest:
    """One prompt plus attached images bound for an oracle client."""

    prompt: str
    images: tuple = ()
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if not isinstance(self.prompt, str) or not self.prompt.strip():
            raise ValidationError("request prompt must be non-empty text")
        imgs = tuple(self.images)
        if len(imgs) > MAX_IMAGES_PER_REQUEST:
            raise ValidationError(
                f"at most {MAX_IMAGES_PER_REQUEST} images per request, "
                f"got {len(imgs)}"
            )
        for img in imgs:
            if not isinstance(img, ImageBuffer):
                raise ValidationError("request images must be ImageBuffer values")
        object.__setattr__(self, "images", imgs)
        if not 0.0 <= float(self.temperature) <= 2.0:
            raise ValidationError("temperature must sit in [0, 2]")
        if int(self.max_tokens) < 1:
            raise ValidationError("max_tokens must be positive")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    parsed: object = None
    usage: dict = field(default_factory=dict)
    attempts: int = 1


# --------------------------------------------------------------------------
# templates

TEMPLATE_IDS = (
    "reasonA",
    "reasonB",
    "reasonC",
    "planStage",
    "resolveValues",
    "noEditJustify",
)

#: Templates that feed inference and therefore must stay answer-blind.
INFERENCE_TEMPLATE_IDS = ("planStage", "resolveValues")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str

    def __post_init__(self):
        if self.template_id not in TEMPLATE_IDS:
            raise SchemaError(f"unknown template id {self.template_id!r}")

    def render(self, **fields) -> str:
        try:
            return self.body.format(**fields)
        except (KeyError, IndexError) as exc:
            raise SchemaError(
                f"template {self.template_id!r} is missing field {exc}"
            ) from exc


_REASON_A_BODY = """\
TASK: reasonA
SOURCE: {source}
You see a two-tile panel: the finished photograph on the left and a
re-edited copy on the right.  Exactly one slider was moved.
GROUND_TRUTH: {ground_truth}
{legend}
Explain the visual difference as one adjustment / issue / solution
passage of plain prose.  Name the moved slider exactly once by its
token above and describe its strength with a legend word.  Do not name
any other slider.
"""

_REASON_B_BODY = """\
TASK: reasonB
SOURCE: {source}
You see a five-tile panel.  One tile is the finished photograph; the
other four re-apply a single slider at different strengths.
GROUND_TRUTH: {ground_truth}
{legend}
Explain how to rank the tiles from weakest to strongest setting, which
tile is the finished one, and what correction would fix tile
{variant_position}.  Name the moved slider exactly once by its token
above and no other slider.
"""

_REASON_C_BODY = """\
TASK: reasonC
SOURCE: {source}
STAGE: {stage}
You see a two-tile panel: a degraded photograph on the left and the
finished version on the right.
GROUND_TRUTH: {ground_truth}
{legend}
Write an adjustment / issue / solution passage for each corrective
slider move, in the order given.  Name each corrective slider exactly
once by its token above and describe its strength with a legend word.
Do not name any slider outside the list.
"""

_NO_EDIT_BODY = """\
TASK: noEditJustify
SOURCE: {source}
STAGE: {stage}
The two tiles you see are identical: this processing stage needs no
work on this photograph.  Write one short paragraph justifying leaving
the stage untouched.  Do not name any slider token.
"""

_PLAN_STAGE_BODY = """\
TASK: planStage
SOURCE: {source}
STAGE: {stage}
{style_line}You see the current state of a photograph entering the
{stage_name} stage.  The sliders available in this stage are:
{op_menu}
{legend}
Decide which sliders to move.  Reply with JSON only, either
{{"triplets": [{{"adjustment": "...", "issue": "...", "solution": "..."}}]}}
naming exactly one slider token per adjustment sentence together with a
direction word and a legend word, or
{{"no_edit_reason": "..."}} if the stage needs no work.
"""

_RESOLVE_VALUES_BODY = """\
TASK: resolveValues
SOURCE: {source}
STAGE: {stage}
These adjustment decisions were made for the photograph you see:
{triplets}
{legend}
Pick one signed integer strength in [-100, 100] for every slider named
above.  Reply with JSON only, shaped as
{{"values": {{"<slider>": <integer>}}}}.
"""

TEMPLATES = {
    "reasonA": PromptTemplate("reasonA", _REASON_A_BODY),
    "reasonB": PromptTemplate("reasonB", _REASON_B_BODY),
    "reasonC": PromptTemplate("reasonC", _REASON_C_BODY),
    "planStage": PromptTemplate("planStage", _PLAN_STAGE_BODY),
    "resolveValues": PromptTemplate("resolveValues", _RESOLVE_VALUES_BODY),
    "noEditJustify": PromptTemplate("noEditJustify", _NO_EDIT_BODY),
}


def get_template(template_id: str) -> PromptTemplate:
    if template_id not in TEMPLATES:
        raise SchemaError(f"unknown template id {template_id!r}")
    return TEMPLATES[template_id]


_MARKER_RE = re.compile(r"^(TASK|SOURCE|STAGE|GROUND_TRUTH|STYLE):[ \t]*(.*)$", re.M)


def parse_markers(prompt: str) -> dict:
    """Machine-readable marker lines of a prompt, last occurrence wins."""
    return {key: value.strip() for key, value in _MARKER_RE.findall(prompt)}


def stage_op_menu(stage: int) -> str:
    lines = [f"- {d.name}: {d.doc}" for d in list_ops(stage)]
    return "\n".join(lines)


# --------------------------------------------------------------------------
# JSON extraction

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.S)


def extract_json(text: str):
    """Best-effort JSON payload of a reply; None when nothing parses."""
    candidates = [text.strip()]
    candidates.extend(m.strip() for m in _FENCE_RE.findall(text))
    for cand in candidates:
        try:
            return json.loads(cand)
        except json.JSONDecodeError:
            pass
    decoder = json.JSONDecoder()
    for start in (text.find("{"), text.find("[")):
        if start < 0:
            continue
        try:
            obj, _ = decoder.raw_decode(text[start:])
            return obj
        except json.JSONDecodeError:
            pass
    return None


# --------------------------------------------------------------------------
# transports


def image_fingerprint(img: ImageBuffer) -> str:
    h = hashlib.sha256()
    h.update(img.space.name.encode())
    h.update(np.asarray(img.data.shape, dtype=np.int64).tobytes())
    h.update(img.data.tobytes())
    return h.hexdigest()


def request_key(request: CompletionRequest) -> str:
    """Content hash of a request; the cache address of its completion."""
    doc = {
        "prompt": request.prompt,
        "images": [image_fingerprint(img) for img in request.images],
        "temperature": round(float(request.temperature), 6),
        "max_tokens": int(request.max_tokens),
    }
    blob = json.dumps(doc, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def downscale_for_transport(img: ImageBuffer, max_side: int = TRANSPORT_MAX_SIDE):
    """Shrink an encoded buffer so its longest side fits the transport."""
    if img.space is not ColorSpace.ENCODED_SRGB:
        raise ValidationError("transport images must be encoded sRGB")
    side = max(img.height, img.width)
    if side <= max_side:
        return img
    scale = max_side / side
    new_w = max(1, round(img.width * scale))
    new_h = max(1, round(img.height * scale))
    data = cv2.resize(img.data, (new_w, new_h), interpolation=cv2.INTER_AREA)
    return ImageBuffer(data, ColorSpace.ENCODED_SRGB)


class OracleClient:
    """Transport interface: turn a request into a completion."""

    def complete(self, request: CompletionRequest) -> CompletionResult:
        raise NotImplementedError


_DEGREE_ADVERB = {
    "slight": "slightly",
    "moderate": "moderately",
    "significant": "significantly",
    "strong": "strongly",
}


def _degree_phrase(word: str) -> str:
    return _DEGREE_ADVERB.get(word, f"by a {word} amount")


class StubClient(OracleClient):
    """Deterministic offline oracle driven by a book of known answers.

    ``plan_book`` maps source ids to fully resolved plans.  Planning
    requests are answered from the book; synthesis requests are
    answered from their own ``GROUND_TRUTH`` marker; raw style prompts
    get a canned sentence.  With ``default_no_edit`` set, sources
    missing from the book plan no edits at every stage instead of
    failing, which turns the pipeline into an identity run.
    """

    def __init__(self, plan_book=None, legend=DEFAULT_LEGEND,
                 default_no_edit=False):
        self.plan_book = dict(plan_book or {})
        self.legend = legend
        self.default_no_edit = default_no_edit

    def complete(self, request: CompletionRequest) -> CompletionResult:
        markers = parse_markers(request.prompt)
        task = markers.get("TASK")
        if task is None:
            text = self._raw(markers)
        elif task in ("reasonA", "reasonB", "reasonC"):
            text = self._reason(task, markers)
        elif task == "noEditJustify":
            text = (
                "The tones and colors already sit where they should at this "
                "stage, so the cleanest move is to leave it untouched."
            )
        elif task == "planStage":
            text = self._plan_stage(markers)
        elif task == "resolveValues":
            text = self._resolve_values(markers)
        else:
            raise ServiceUnavailable(f"stub cannot answer task {task!r}")
        usage = {
            "prompt_tokens": max(1, len(request.prompt) // 4),
            "completion_tokens": max(1, len(text) // 4),
        }
        return CompletionResult(text=text, parsed=extract_json(text), usage=usage)

    def _raw(self, markers):
        style = markers.get("STYLE")
        if style:
            return (
                f"aim for a {style} rendition: keep the palette and contrast "
                f"coherent with that look"
            )
        return "acknowledged"

    def _reason(self, task, markers):
        gt = json.loads(markers.get("GROUND_TRUTH", "{}"))
        if task == "reasonC":
            moves = [(a["op"], a["value"]) for a in gt.get("plan", [])]
        elif task == "reasonB":
            corr = gt["correction"]
            moves = [(corr["op"], corr["value"])]
        else:
            moves = [(gt["op"], gt["value"])]
        parts = []
        for op, value in moves:
            word = self.legend.word_for(value)
            verb = "increase" if value > 0 else "reduce"
            parts.append(
                f"Adjustment: {verb} {op} {_degree_phrase(word)}. "
                f"Issue: the rendition drifts away from the finished look. "
                f"Solution: that move settles the affected region back into "
                f"balance."
            )
        return "\n".join(parts)

    def _book_stage(self, markers):
        source = markers.get("SOURCE", "")
        plan = self.plan_book.get(source)
        if plan is None:
            if self.default_no_edit:
                return None
            raise ServiceUnavailable(f"stub has no plan for source {source!r}")
        try:
            stage = int(markers.get("STAGE", "0"))
        except ValueError as exc:
            raise ServiceUnavailable("stage marker is not an integer") from exc
        return plan.stage_plan(stage)

    def _plan_stage(self, markers):
        sp = self._book_stage(markers)
        if sp is None or sp.no_edit_reason is not None:
            reason = (
                sp.no_edit_reason
                if sp is not None
                else "this stage already sits where it should"
            )
            return json.dumps({"no_edit_reason": reason})
        triplets = []
        for adj in sp.adjustments:
            word = self.legend.word_for(adj.value)
            verb = "increase" if adj.value > 0 else "reduce"
            triplets.append(
                {
                    "adjustment": f"{verb} {adj.op} {_degree_phrase(word)}",
                    "issue": "the current rendition leaves this quality "
                    "short of the intended look",
                    "solution": "the move brings the affected tones in line",
                }
            )
        return json.dumps({"triplets": triplets})

    def _resolve_values(self, markers):
        sp = self._book_stage(markers)
        if sp is None or not sp.adjustments:
            return json.dumps({"values": {}})
        return json.dumps({"values": {a.op: a.value for a in sp.adjustments}})


class CachingClient(OracleClient):
    """Content-addressed completion cache around another client."""

    def __init__(self, inner: OracleClient, cache_dir):
        self.inner = inner
        self.cache_dir = str(cache_dir)

    def _path(self, key: str) -> str:
        return os.path.join(self.cache_dir, key[:2], key + ".json")

    def lookup(self, request: CompletionRequest):
        path = self._path(request_key(request))
        if not os.path.exists(path):
            return None
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return CompletionResult(
            text=doc["text"],
            parsed=doc.get("parsed"),
            usage=doc.get("usage", {}),
            attempts=doc.get("attempts", 1),
        )

    def store(self, request: CompletionRequest, result: CompletionResult):
        path = self._path(request_key(request))
        os.makedirs(os.path.dirname(path), exist_ok=True)
        doc = {
            "text": result.text,
            "parsed": result.parsed,
            "usage": result.usage,
            "attempts": result.attempts,
        }
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, ensure_ascii=False)
        os.replace(tmp, path)

    def complete(self, request: CompletionRequest) -> CompletionResult:
        hit = self.lookup(request)
        if hit is not None:
            return hit
        result = self.inner.complete(request)
        self.store(request, result)
        return result


class ReplayClient(CachingClient):
    """Hermetic client: cache hits only, misses raise ServiceUnavailable."""

    def __init__(self, cache_dir):
        super().__init__(inner=None, cache_dir=cache_dir)

    def complete(self, request: CompletionRequest) -> CompletionResult:
        hit = self.lookup(request)
        if hit is None:
            raise ServiceUnavailable(
                f"no cached completion for request {request_key(request)[:12]}"
            )
        return hit


class HttpClient(OracleClient):
    """JSON-over-HTTP client with exponential backoff.

    Endpoint and key come from ``ORACLE_ENDPOINT`` / ``ORACLE_API_KEY``
    unless given explicitly.  Images travel as base64 PNG, downscaled
    to at most 1024 px on the long side.
    """

    def __init__(self, endpoint=None, api_key=None, timeout=60.0,
                 max_attempts=_HTTP_ATTEMPTS, sleep=time.sleep):
        self.endpoint = endpoint or os.environ.get("ORACLE_ENDPOINT", "")
        self.api_key = api_key or os.environ.get("ORACLE_API_KEY", "")
        self.timeout = timeout
        self.max_attempts = max_attempts
        self._sleep = sleep
        if not self.endpoint:
            raise ServiceUnavailable(
                "no oracle endpoint configured; set ORACLE_ENDPOINT"
            )

    def _payload(self, request: CompletionRequest) -> dict:
        images = []
        for img in request.images:
            small = downscale_for_transport(img)
            images.append(base64.b64encode(encode(small)).decode("ascii"))
        return {
            "prompt": request.prompt,
            "images": images,
            "temperature": float(request.temperature),
            "max_tokens": int(request.max_tokens),
        }

    def complete(self, request: CompletionRequest) -> CompletionResult:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = self._payload(request)
        last_error = None
        rate_limited = False
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = requests.post(
                    self.endpoint, json=payload, headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = str(exc)
            else:
                if resp.status_code == 200:
                    doc = resp.json()
                    text = doc.get("text", "")
                    return CompletionResult(
                        text=text,
                        parsed=extract_json(text),
                        usage=doc.get("usage", {}),
                        attempts=attempt,
                    )
                rate_limited = resp.status_code == 429
                last_error = f"HTTP {resp.status_code}"
                if 400 <= resp.status_code < 500 and resp.status_code != 429:
                    break
            if attempt < self.max_attempts:
                delay = _BACKOFF_BASE_S * (2 ** (attempt - 1))
                self._sleep(delay + random.uniform(0, delay / 4))
        if rate_limited:
            raise RateLimited(f"oracle kept rate limiting: {last_error}")
        raise ServiceUnavailable(f"oracle unreachable: {last_error}")


def load_plan_book(path) -> dict:
    """Plan book file: a JSON list of plan documents, or {source: doc}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        docs = []
        for source, entry in doc.items():
            entry = dict(entry)
            entry.setdefault("source", source)
            docs.append(entry)
    elif isinstance(doc, list):
        docs = doc
    else:
        raise SchemaError("plan book must be a JSON list or object")
    book = {}
    for entry in docs:
        plan = parse_plan(entry)
        book[plan.source] = plan
    return book


def make_client(kind, cache_dir=None, plan_book=None, endpoint=None,
                api_key=None):
    """Build a transport by name: ``stub``, ``replay`` or ``http``."""
    if kind == "stub":
        # without a book the stub plans no edits, so runs still finish
        client = StubClient(plan_book=plan_book,
                            default_no_edit=plan_book is None)
    elif kind == "replay":
        if not cache_dir:
            raise ValidationError("replay client needs a cache directory")
        return ReplayClient(cache_dir)
    elif kind == "http":
        client = HttpClient(endpoint=endpoint, api_key=api_key)
    else:
        raise ValidationError(f"unknown client kind {kind!r}")
    if cache_dir:
        return CachingClient(client, cache_dir)
    return client


# --------------------------------------------------------------------------
# conversations


def _true_ops_of(record) -> tuple:
    gt = record.ground_truth
    if record.kind in ("A", "B"):
        return (gt["op"],)
    return tuple(a["op"] for a in gt["plan"])


def synthesize_reasoning(client, record, images=(), legend=DEFAULT_LEGEND,
                         temperature=0.7, max_tokens=DEFAULT_MAX_TOKENS,
                         max_attempts=_GATE_ATTEMPTS) -> str:
    """Ask the oracle to explain a known edit; reject hallucinations.

    The reply must name exactly the ground-truth ops (none for a
    no-edit record).  After ``max_attempts`` failures the last reply is
    surfaced in a SchemaViolation.
    """
    gt = record.ground_truth
    no_edit = record.kind == "C" and gt.get("no_edit")
    if no_edit:
        template = get_template("noEditJustify")
        prompt = template.render(source=record.record_id, stage=gt["stage"])
    else:
        fields = {
            "source": record.record_id,
            "ground_truth": json.dumps(gt, sort_keys=True),
            "legend": legend.prompt_text(),
        }
        if record.kind == "B":
            fields["variant_position"] = gt["variant_position"]
        if record.kind == "C":
            fields["stage"] = gt["stage"]
        template = get_template(f"reason{record.kind}")
        prompt = template.render(**fields)
    expected = set(_true_ops_of(record))
    text = ""
    for attempt in range(1, max_attempts + 1):
        request = CompletionRequest(
            prompt=prompt,
            images=tuple(images),
            temperature=temperature if attempt == 1 else min(temperature + 0.2, 2.0),
            max_tokens=max_tokens,
        )
        text = client.complete(request).text
        named = set(ops_named_in(text))
        if named == expected:
            return text
    raise SchemaViolation(
        f"reasoning for {record.record_id} named ops "
        f"{sorted(set(ops_named_in(text)))} instead of {sorted(expected)} "
        f"after {max_attempts} attempts",
        raw_text=text,
    )


def plan_stage(client, source, stage, images=(), legend=DEFAULT_LEGEND,
               style_line="", temperature=0.2,
               max_tokens=DEFAULT_MAX_TOKENS,
               max_attempts=_GATE_ATTEMPTS) -> StagePlan:
    """Ask the oracle which ops to move in one stage; returns triplets.

    The returned stage plan is unresolved: it carries triplets or a
    no-edit reason, never concrete values.
    """
    prompt = get_template("planStage").render(
        source=source,
        stage=stage,
        stage_name=STAGE_NAMES[stage],
        style_line=(style_line.rstrip() + "\n") if style_line else "",
        op_menu=stage_op_menu(stage),
        legend=legend.prompt_text(),
    )
    text = ""
    for attempt in range(1, max_attempts + 1):
        request = CompletionRequest(
            prompt=prompt, images=tuple(images),
            temperature=temperature, max_tokens=max_tokens,
        )
        text = client.complete(request).text
        doc = extract_json(text)
        if isinstance(doc, dict):
            try:
                if "no_edit_reason" in doc:
                    return StagePlan(
                        stage=stage, no_edit_reason=doc["no_edit_reason"]
                    )
                triplets = tuple(
                    ReasoningTriplet(t["adjustment"], t["issue"], t["solution"])
                    for t in doc.get("triplets", [])
                )
                return StagePlan(stage=stage, triplets=triplets)
            except (ValidationError, KeyError, TypeError):
                pass
    raise SchemaViolation(
        f"stage {stage} planning reply for {source!r} failed validation "
        f"after {max_attempts} attempts",
        raw_text=text,
    )


def _resolve_word_value(raw: str, triplet: ReasoningTriplet, legend) -> int:
    text = raw.strip().lower()
    sign = 0
    if text.startswith("+"):
        sign = 1
    elif text.startswith("-"):
        sign = -1
    word = None
    for w in legend.words:
        if re.search(rf"\b{re.escape(w)}\b", text):
            word = w
            break
    if word is None:
        raise UnresolvableTriplet(
            f"reply {raw!r} names no legend word for {triplet.adjustment!r}"
        )
    if sign == 0:
        if any(t in text for t in ("increase", "raise", "boost", "more")):
            sign = 1
        elif any(t in text for t in ("decrease", "reduce", "lower", "less")):
            sign = -1
        else:
            sign = triplet.direction()
    if sign == 0:
        raise UnresolvableTriplet(
            f"cannot infer a direction for {triplet.adjustment!r} "
            f"from reply {raw!r}"
        )
    return resolve_legend(word, sign, legend).default


def resolve_values(client, source, stage_plan, images=(),
                   legend=DEFAULT_LEGEND, temperature=0.0,
                   max_tokens=DEFAULT_MAX_TOKENS,
                   max_attempts=_GATE_ATTEMPTS) -> StagePlan:
    """Turn a stage plan's triplets into concrete integer adjustments.

    Integer replies out of range are clamped with a warning; degree
    word replies resolve to the legend midpoint.  A no-edit plan
    returns unchanged without any service call.
    """
    if stage_plan.no_edit_reason is not None:
        return stage_plan
    triplet_by_op = {t.op_name(): t for t in stage_plan.triplets}
    prompt = get_template("resolveValues").render(
        source=source,
        stage=stage_plan.stage,
        triplets=json.dumps(
            [
                {"adjustment": t.adjustment, "issue": t.issue,
                 "solution": t.solution}
                for t in stage_plan.triplets
            ],
            ensure_ascii=False,
        ),
        legend=legend.prompt_text(),
    )
    text = ""
    values = None
    for attempt in range(1, max_attempts + 1):
        request = CompletionRequest(
            prompt=prompt, images=tuple(images),
            temperature=temperature, max_tokens=max_tokens,
        )
        text = client.complete(request).text
        doc = extract_json(text)
        if (
            isinstance(doc, dict)
            and isinstance(doc.get("values"), dict)
            and set(triplet_by_op) <= set(doc["values"])
        ):
            values = doc["values"]
            break
    if values is None:
        raise SchemaViolation(
            f"value resolution reply for {source!r} stage "
            f"{stage_plan.stage} failed validation after {max_attempts} "
            f"attempts",
            raw_text=text,
        )
    warnings = []
    adjustments = []
    for op, triplet in triplet_by_op.items():
        raw = values[op]
        if isinstance(raw, bool):
            raise UnresolvableTriplet(f"value for {op!r} is a boolean")
        if isinstance(raw, float) and not math.isfinite(raw):
            raise UnresolvableTriplet(f"value for {op!r} is not finite")
        if isinstance(raw, (int, float)) and float(raw) == int(raw):
            value = int(raw)
            clamped = max(-100, min(100, value))
            if clamped != value:
                warnings.append(f"clamped {op} from {value} to {clamped}")
                value = clamped
        elif isinstance(raw, str):
            value = _resolve_word_value(raw, triplet, legend)
        else:
            raise UnresolvableTriplet(
                f"value for {op!r} is neither an integer nor a degree word: "
                f"{raw!r}"
            )
        adjustments.append(Adjustment(op, value))
    return StagePlan(
        stage=stage_plan.stage,
        triplets=stage_plan.triplets,
        adjustments=tuple(adjustments),
        warnings=tuple(warnings),
    )
