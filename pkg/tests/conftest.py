"""Shared fixtures: synthetic image corpora and plan fuzzing helpers."""

import copy

import numpy as np
import pytest

from retouchkit.imagecore import ColorSpace, ImageBuffer, save_image
from retouchkit.ops import Adjustment, list_ops
from retouchkit.plan import (
    DEFAULT_LEGEND,
    Plan,
    ReasoningTriplet,
    StagePlan,
)


def synth_image(seed, height=96, width=128, lo=0.08, hi=0.72):
    """Mid-tone random image: busy enough to expose errors, rail-free."""
    rng = np.random.default_rng(seed)
    data = rng.uniform(lo, hi, size=(height, width, 3)).astype(np.float32)
    return ImageBuffer(data * 65535.0, ColorSpace.ENCODED_SRGB)


@pytest.fixture(scope="session")
def midtone():
    return synth_image(7)


@pytest.fixture(scope="session")
def corpus10():
    return [synth_image(seed) for seed in range(10)]


@pytest.fixture(scope="session")
def experts20(tmp_path_factory):
    """Twenty expert images on disk; returns (paths, buffers)."""
    root = tmp_path_factory.mktemp("experts")
    paths, buffers = [], []
    for seed in range(20):
        img = synth_image(100 + seed, height=120, width=160)
        path = root / f"expert{seed:02d}.png"
        save_image(img, path)
        paths.append(str(path))
        buffers.append(img)
    return paths, buffers


# --------------------------------------------------------------------------
# random plans and mutations

_ISSUES = (
    "the frame feels unbalanced",
    "the subject gets lost in the scene",
    "the rendition reads dull",
    "the mood is colder than intended",
    "detail hides in the dark regions",
)
_SOLUTIONS = (
    "this settles the frame",
    "the subject regains presence",
    "the look comes together",
    "the mood lands where intended",
    "the detail becomes readable",
)


def _triplet_for(op, value, rng):
    verb = "increase" if value > 0 else "reduce"
    word = DEFAULT_LEGEND.word_for(value)
    return ReasoningTriplet(
        adjustment=f"{verb} {op} by a {word} amount",
        issue=_ISSUES[int(rng.integers(len(_ISSUES)))],
        solution=_SOLUTIONS[int(rng.integers(len(_SOLUTIONS)))],
    )


def make_random_plan(rng, resolved=None):
    """A random valid plan; ``resolved`` forces adjustments on or off."""
    stage_nums = sorted(
        int(s)
        for s in rng.choice([1, 2, 3], size=int(rng.integers(1, 4)),
                            replace=False)
    )
    stages = []
    for stage in stage_nums:
        if rng.random() < 0.15:
            stages.append(
                StagePlan(stage=stage,
                          no_edit_reason="this stage already sits right")
            )
            continue
        names = [d.name for d in list_ops(stage)]
        k = int(rng.integers(1, min(4, len(names)) + 1))
        chosen = [names[int(i)] for i in rng.choice(len(names), size=k,
                                                    replace=False)]
        values = {
            op: int(rng.integers(1, 101)) * (1 if rng.random() < 0.5 else -1)
            for op in chosen
        }
        triplets = tuple(_triplet_for(op, values[op], rng) for op in chosen)
        with_values = rng.random() < 0.7 if resolved is None else resolved
        adjustments = (
            tuple(Adjustment(op, values[op]) for op in chosen)
            if with_values
            else ()
        )
        stages.append(
            StagePlan(stage=stage, triplets=triplets, adjustments=adjustments)
        )
    style = f"look-{int(rng.integers(100)):02d}" if rng.random() < 0.2 else None
    return Plan(
        source=f"img-{int(rng.integers(1_000_000)):06d}",
        stages=tuple(stages),
        style_tag=style,
    )


def _stage_with_triplets(doc):
    for entry in doc["stages"]:
        if entry["triplets"]:
            return entry
    return None


def _stage_with_adjustments(doc):
    for entry in doc["stages"]:
        if entry["adjustments"]:
            return entry
    return None


def mutate_plan_doc(doc, rng):
    """Break a valid plan document in one random way; returns the mutant.

    Every mutation yields a document that must be rejected with a typed
    error.  Mutations whose precondition fails fall through to the next
    candidate, so a mutant is always produced.
    """
    doc = copy.deepcopy(doc)

    def drop_source(d):
        del d["source"]
        return d

    def unknown_root_key(d):
        d["confidence"] = 0.9
        return d

    def source_not_text(d):
        d["source"] = 7
        return d

    def stages_not_list(d):
        d["stages"] = {}
        return d

    def no_stages(d):
        d["stages"] = []
        return d

    def duplicate_stage(d):
        d["stages"] = d["stages"] + [copy.deepcopy(d["stages"][0])]
        return d

    def stage_out_of_range(d):
        d["stages"][0]["stage"] = 4
        return d

    def stage_not_int(d):
        d["stages"][0]["stage"] = "one"
        return d

    def unknown_stage_key(d):
        d["stages"][0]["mood"] = "warm"
        return d

    def drop_triplet_field(d):
        entry = _stage_with_triplets(d)
        if entry is None:
            return None
        del entry["triplets"][0]["issue"]
        return d

    def empty_adjustment_text(d):
        entry = _stage_with_triplets(d)
        if entry is None:
            return None
        entry["triplets"][0]["adjustment"] = "   "
        return d

    def adjustment_names_no_op(d):
        entry = _stage_with_triplets(d)
        if entry is None:
            return None
        entry["triplets"][0]["adjustment"] = "make it pop a little"
        return d

    def adjustment_names_two_ops(d):
        entry = _stage_with_triplets(d)
        if entry is None:
            return None
        ops = [t["adjustment"] for t in entry["triplets"]]
        entry["triplets"][0]["adjustment"] = (
            "increase exposure and contrast together" if ops else ""
        )
        entry["stage"] = 1
        # keep adjustments consistent with the forced stage-1 wording
        entry["adjustments"] = []
        if len(entry["triplets"]) > 1:
            entry["triplets"] = entry["triplets"][:1]
        return d

    def duplicate_triplet(d):
        entry = _stage_with_triplets(d)
        if entry is None:
            return None
        entry["triplets"] = entry["triplets"] + [
            copy.deepcopy(entry["triplets"][0])
        ]
        return d

    def wrong_stage_op(d):
        entry = _stage_with_triplets(d)
        if entry is None:
            return None
        wrong = "saturation" if entry["stage"] != 2 else "exposure"
        entry["triplets"][0]["adjustment"] = f"increase {wrong} a touch"
        return d

    def unknown_op_value(d):
        entry = _stage_with_adjustments(d)
        if entry is None:
            return None
        entry["adjustments"][0]["op"] = "clarity"
        return d

    def value_out_of_range(d):
        entry = _stage_with_adjustments(d)
        if entry is None:
            return None
        entry["adjustments"][0]["value"] = 101 + int(rng.integers(500))
        return d

    def value_not_integral(d):
        entry = _stage_with_adjustments(d)
        if entry is None:
            return None
        entry["adjustments"][0]["value"] = 40.5
        return d

    def value_boolean(d):
        entry = _stage_with_adjustments(d)
        if entry is None:
            return None
        entry["adjustments"][0]["value"] = True
        return d

    def adjustments_diverge(d):
        entry = _stage_with_adjustments(d)
        if entry is None or len(entry["adjustments"]) < 2:
            return None
        entry["adjustments"] = entry["adjustments"][:-1]
        return d

    def no_edit_with_triplets(d):
        entry = _stage_with_triplets(d)
        if entry is None:
            return None
        entry["no_edit_reason"] = "leave as is"
        return d

    def triplet_not_object(d):
        entry = _stage_with_triplets(d)
        if entry is None:
            return None
        entry["triplets"][0] = "increase exposure"
        return d

    mutations = [
        drop_source, unknown_root_key, source_not_text, stages_not_list,
        no_stages, duplicate_stage, stage_out_of_range, stage_not_int,
        unknown_stage_key, drop_triplet_field, empty_adjustment_text,
        adjustment_names_no_op, adjustment_names_two_ops, duplicate_triplet,
        wrong_stage_op, unknown_op_value, value_out_of_range,
        value_not_integral, value_boolean, adjustments_diverge,
        no_edit_with_triplets, triplet_not_object,
    ]
    order = rng.permutation(len(mutations))
    for idx in order:
        mutant = mutations[int(idx)](copy.deepcopy(doc))
        if mutant is not None:
            return mutant
    raise AssertionError("no mutation applied")


@pytest.fixture(scope="session")
def plan_fuzz():
    return make_random_plan, mutate_plan_doc
