"""Edit plans: reasoning triplets, per-stage adjustments, serialization.

A plan document is JSON with a fixed key order so serialization is
byte-stable: ``{source, style_tag?, stages: [{stage, triplets,
adjustments, no_edit_reason?}]}``.  Every stage either carries at least
one reasoning triplet or a ``no_edit_reason``, never both.  The legend
maps degree words ("slight exposure increase") to integer value ranges.
"""

import json
import re
from dataclasses import dataclass, field

from .errors import (
    DuplicateOp,
    SchemaError,
    StageMismatch,
    UnknownDegreeWord,
)
from .ops import REGISTRY, Adjustment, stage_of

_OP_TOKEN = re.compile(
    r"\b(" + "|".join(re.escape(d.name) for d in REGISTRY) + r")\b"
)

_INCREASE_WORDS = ("increase", "raise", "boost", "lift", "brighten", "warm",
                   "add", "push", "intensify", "strengthen", "open")
_DECREASE_WORDS = ("decrease", "reduce", "lower", "darken", "cool", "cut",
                   "pull", "mute", "soften", "crush", "deepen", "desaturate")


def ops_named_in(text: str):
    """Distinct registry op names appearing as whole tokens in ``text``."""
    return tuple(dict.fromkeys(_OP_TOKEN.findall(text)))


@dataclass(frozen=True)
class ReasoningTriplet:
    """One observation: the adjustment to make, why, and what it fixes."""

    adjustment: str
    issue: str
    solution: str

    def __post_init__(self):
        for fname in ("adjustment", "issue", "solution"):
            v = getattr(self, fname)
            if not isinstance(v, str) or not v.strip():
                raise SchemaError(f"triplet field {fname!r} must be non-empty text")

    def op_name(self) -> str:
        named = ops_named_in(self.adjustment)
        if len(named) != 1:
            raise SchemaError(
                f"triplet adjustment must name exactly one op, found "
                f"{list(named) or 'none'} in {self.adjustment!r}"
            )
        return named[0]

    def direction(self) -> int:
        """+1 or -1 inferred from the triplet wording, 0 if ambiguous."""
        text = f"{self.adjustment} {self.solution}".lower()
        inc = any(w in text for w in _INCREASE_WORDS)
        dec = any(w in text for w in _DECREASE_WORDS)
        if inc == dec:
            return 0
        return 1 if inc else -1


@dataclass(frozen=True)
class StagePlan:
    """Triplets plus (once resolved) concrete adjustments for one stage."""

    stage: int
    triplets: tuple = ()
    adjustments: tuple = ()
    no_edit_reason: str = None
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.stage not in (1, 2, 3):
            raise SchemaError(f"stage must be 1, 2 or 3, got {self.stage!r}")
        object.__setattr__(self, "triplets", tuple(self.triplets))
        object.__setattr__(self, "adjustments", tuple(self.adjustments))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if self.no_edit_reason is not None:
            if not isinstance(self.no_edit_reason, str) or not self.no_edit_reason.strip():
                raise SchemaError("no_edit_reason must be non-empty text")
            if self.triplets or self.adjustments:
                raise SchemaError(
                    "a stage with a no_edit_reason cannot carry triplets "
                    "or adjustments"
                )
            return
        if not self.triplets:
            raise SchemaError(
                f"stage {self.stage} needs triplets or a no_edit_reason"
            )
        seen = set()
        triplet_ops = []
        for t in self.triplets:
            if not isinstance(t, ReasoningTriplet):
                raise SchemaError("triplets must be ReasoningTriplet values")
            op = t.op_name()
            if stage_of(op) != self.stage:
                raise StageMismatch(
                    f"op {op!r} belongs to stage {stage_of(op)}, "
                    f"not stage {self.stage}"
                )
            if op in seen:
                raise DuplicateOp(f"op {op!r} appears in two triplets")
            seen.add(op)
            triplet_ops.append(op)
        adj_ops = []
        for a in self.adjustments:
            if not isinstance(a, Adjustment):
                raise SchemaError("adjustments must be Adjustment values")
            if stage_of(a.op) != self.stage:
                raise StageMismatch(
                    f"op {a.op!r} belongs to stage {stage_of(a.op)}, "
                    f"not stage {self.stage}"
                )
            if a.op in adj_ops:
                raise DuplicateOp(f"op {a.op!r} adjusted twice")
            adj_ops.append(a.op)
        if self.adjustments and set(adj_ops) != set(triplet_ops):
            raise SchemaError(
                f"resolved adjustments {sorted(adj_ops)} do not match "
                f"triplet ops {sorted(triplet_ops)}"
            )

    @property
    def resolved(self) -> bool:
        return self.no_edit_reason is not None or bool(self.adjustments)


@dataclass(frozen=True)
class Plan:
    """A full edit plan for one source image."""

    source: str
    stages: tuple
    style_tag: str = None

    def __post_init__(self):
        if not isinstance(self.source, str) or not self.source.strip():
            raise SchemaError("plan source must be a non-empty string")
        if self.style_tag is not None and (
            not isinstance(self.style_tag, str) or not self.style_tag.strip()
        ):
            raise SchemaError("style_tag must be non-empty text when present")
        object.__setattr__(self, "stages", tuple(self.stages))
        if not 1 <= len(self.stages) <= 3:
            raise SchemaError("a plan carries one to three stages")
        nums = []
        for s in self.stages:
            if not isinstance(s, StagePlan):
                raise SchemaError("stages must be StagePlan values")
            nums.append(s.stage)
        if nums != sorted(set(nums)):
            raise SchemaError(f"stage numbers must be unique and ascending, got {nums}")

    def stage_plan(self, stage: int):
        for s in self.stages:
            if s.stage == stage:
                return s
        return None

    def all_adjustments(self):
        out = []
        for s in self.stages:
            out.extend(s.adjustments)
        return tuple(out)


# --------------------------------------------------------------------------
# legend


@dataclass(frozen=True)
class LegendResolution:
    lo: int
    hi: int
    default: int


@dataclass(frozen=True)
class Legend:
    """Ordered degree words with their positive magnitude ranges."""

    ranges: tuple = (
        ("slight", 5, 20),
        ("moderate", 21, 45),
        ("significant", 46, 74),
        ("strong", 75, 100),
    )

    def __post_init__(self):
        object.__setattr__(self, "ranges", tuple(tuple(r) for r in self.ranges))
        prev_hi = 4
        for word, lo, hi in self.ranges:
            if not isinstance(word, str) or not word:
                raise SchemaError("legend words must be non-empty strings")
            if not (5 <= lo <= hi <= 100):
                raise SchemaError(
                    f"legend range for {word!r} must sit inside [5, 100]"
                )
            if lo <= prev_hi:
                raise SchemaError("legend ranges must be disjoint and ascending")
            prev_hi = hi

    @property
    def words(self):
        return tuple(w for w, _, _ in self.ranges)

    def range_for(self, word: str):
        for w, lo, hi in self.ranges:
            if w == word:
                return lo, hi
        raise UnknownDegreeWord(f"degree word {word!r} is not in the legend")

    def word_for(self, magnitude: int) -> str:
        m = abs(int(magnitude))
        for w, lo, hi in self.ranges:
            if lo <= m <= hi:
                return w
        # off-legend magnitudes snap to the nearest range
        best = min(self.ranges, key=lambda r: min(abs(m - r[1]), abs(m - r[2])))
        return best[0]

    def prompt_text(self) -> str:
        parts = [f"{w} = {lo}..{hi}" for w, lo, hi in self.ranges]
        return (
            "value legend (magnitudes): "
            + ", ".join(parts)
            + "; negative values mirror the same words in the opposite "
            "direction"
        )

    def as_dict(self) -> dict:
        return {w: [lo, hi] for w, lo, hi in self.ranges}


DEFAULT_LEGEND = Legend()


def resolve_legend(word: str, sign, legend: Legend = DEFAULT_LEGEND) -> LegendResolution:
    """Signed value range for a degree word; default is the midpoint."""
    lo, hi = legend.range_for(word)
    mid = (lo + hi) // 2
    if sign in ("+", 1):
        return LegendResolution(lo, hi, mid)
    if sign in ("-", -1):
        return LegendResolution(-hi, -lo, -mid)
    raise SchemaError(f"sign must be '+' or '-', got {sign!r}")


# --------------------------------------------------------------------------
# wire format


def _require_keys(obj: dict, required, optional=(), where="document"):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where} must be an object, got {type(obj).__name__}")
    keys = set(obj)
    missing = set(required) - keys
    if missing:
        raise SchemaError(f"{where} is missing keys {sorted(missing)}")
    unknown = keys - set(required) - set(optional)
    if unknown:
        raise SchemaError(f"{where} has unknown keys {sorted(unknown)}")


def _coerce_int(v, where):
    if isinstance(v, bool):
        raise SchemaError(f"{where} must be an integer, got a boolean")
    if isinstance(v, int):
        return v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    raise SchemaError(f"{where} must be an integer, got {v!r}")


def _parse_stage(obj, pos) -> StagePlan:
    where = f"stages[{pos}]"
    _require_keys(
        obj,
        required=("stage", "triplets", "adjustments"),
        optional=("no_edit_reason",),
        where=where,
    )
    stage = _coerce_int(obj["stage"], f"{where}.stage")
    if not isinstance(obj["triplets"], list):
        raise SchemaError(f"{where}.triplets must be a list")
    triplets = []
    for i, t in enumerate(obj["triplets"]):
        _require_keys(
            t, ("adjustment", "issue", "solution"), where=f"{where}.triplets[{i}]"
        )
        triplets.append(
            ReasoningTriplet(t["adjustment"], t["issue"], t["solution"])
        )
    if not isinstance(obj["adjustments"], list):
        raise SchemaError(f"{where}.adjustments must be a list")
    adjustments = []
    for i, a in enumerate(obj["adjustments"]):
        aw = f"{where}.adjustments[{i}]"
        _require_keys(a, ("op", "value"), where=aw)
        if not isinstance(a["op"], str):
            raise SchemaError(f"{aw}.op must be a string")
        adjustments.append(Adjustment(a["op"], _coerce_int(a["value"], f"{aw}.value")))
    reason = obj.get("no_edit_reason")
    if "no_edit_reason" in obj and not isinstance(reason, str):
        raise SchemaError(f"{where}.no_edit_reason must be a string")
    return StagePlan(
        stage=stage,
        triplets=tuple(triplets),
        adjustments=tuple(adjustments),
        no_edit_reason=reason,
    )


def parse_plan(document) -> Plan:
    """Parse and validate a plan document (JSON text or a parsed dict)."""
    if isinstance(document, (bytes, bytearray)):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"plan document is not UTF-8: {exc}") from exc
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"plan document is not valid JSON: {exc}") from exc
    _require_keys(document, ("source", "stages"), ("style_tag",), where="plan")
    if not isinstance(document["source"], str):
        raise SchemaError("plan.source must be a string")
    style = document.get("style_tag")
    if "style_tag" in document and not isinstance(style, str):
        raise SchemaError("plan.style_tag must be a string")
    if not isinstance(document["stages"], list):
        raise SchemaError("plan.stages must be a list")
    stages = tuple(
        _parse_stage(s, i) for i, s in enumerate(document["stages"])
    )
    return Plan(source=document["source"], stages=stages, style_tag=style)


def plan_to_dict(plan: Plan) -> dict:
    """Plan as a canonically ordered plain dict."""
    doc = {"source": plan.source}
    if plan.style_tag is not None:
        doc["style_tag"] = plan.style_tag
    doc["stages"] = []
    for s in plan.stages:
        entry = {
            "stage": s.stage,
            "triplets": [
                {
                    "adjustment": t.adjustment,
                    "issue": t.issue,
                    "solution": t.solution,
                }
                for t in s.triplets
            ],
            "adjustments": [
                {"op": a.op, "value": a.value} for a in s.adjustments
            ],
        }
        if s.no_edit_reason is not None:
            entry["no_edit_reason"] = s.no_edit_reason
        doc["stages"].append(entry)
    return doc


def serialize_plan(plan: Plan) -> str:
    """Byte-stable canonical JSON for a plan."""
    return json.dumps(plan_to_dict(plan), indent=2, ensure_ascii=False) + "\n"
