"""Seeded puzzle dataset generation from expert-retouched images.

Three record kinds:

* ``A``: one op at one value applied to an expert image; the trainee
  must name the op and value from the side-by-side pair.
* ``B``: one op at four distinct values plus the untouched expert,
  shuffled into a five-tile panel; the key is the quality ordering, the
  optimal tile, and the correction for a designated broken tile.
* ``C``: an expert image degraded by one to four inverse in-stage
  edits; the key is the corrective plan that restores it.

Every record owns an rng derived from (global seed, record index), so
datasets are reproducible record by record.  Generators verify their
own answer keys (visible change plus replay fidelity) and resample up
to ten times before raising ``DegenerateSample``.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import (
    DegenerateSample,
    SchemaError,
    SerializationError,
    SinkFull,
    ValidationError,
    WrongSpace,
)
from .imagecore import ColorSpace, ImageBuffer, encode, load_image
from .metrics import psnr_db
from .ops import (
    EXACT,
    Adjustment,
    apply,
    apply_sequence,
    canonical_order,
    get_op,
    invert,
    list_ops,
    registry_index,
)

GENERATOR_VERSION = "1.0"
TILE_HEIGHT = 512
SEPARATOR_PX = 4
#: Forward edits scoring at or above this are treated as invisible.
VISIBLE_CHANGE_CEILING_DB = 98.5
REPLAY_FLOOR_B_DB = 35.0
REPLAY_FLOOR_B_EXACT_DB = 50.0
REPLAY_FLOOR_C_DB = 30.0
_MAX_ATTEMPTS = 10

#: Desk-scale record counts per kind, a ~1% slice of the full recipe.
DESK_SCALE = {"A": 70, "B": 50, "C": 130}

_DEFAULT_GRID = tuple(
    v for v in range(-100, 101, 5) if v != 0
)


@dataclass(frozen=True)
class PerturbationPolicy:
    """Sampling rules shared by the three generators.

    ``op_pool`` restricts which ops may be drawn (curriculum and test
    hook); ``value_grid`` is filtered by ``min_magnitude`` at sample
    time.
    """

    min_magnitude: int = 15
    value_grid: tuple = _DEFAULT_GRID
    stage_op_counts: tuple = (1, 2, 3, 4)
    no_edit_fraction: float = 0.1
    op_pool: tuple = None

    def __post_init__(self):
        if self.min_magnitude < 5:
            raise SchemaError("min_magnitude below the legend floor of 5")
        grid = tuple(int(v) for v in self.value_grid)
        if any(v == 0 or abs(v) > 100 for v in grid):
            raise SchemaError("value grid entries must be non-zero in [-100, 100]")
        object.__setattr__(self, "value_grid", grid)
        object.__setattr__(
            self, "stage_op_counts", tuple(int(k) for k in self.stage_op_counts)
        )
        if any(k < 1 for k in self.stage_op_counts):
            raise SchemaError("stage_op_counts must be positive")
        if not 0.0 <= self.no_edit_fraction <= 1.0:
            raise SchemaError("no_edit_fraction must sit in [0, 1]")
        if self.op_pool is not None:
            pool = tuple(self.op_pool)
            for name in pool:
                get_op(name)
            object.__setattr__(self, "op_pool", pool)

    def values(self):
        vals = tuple(
            v for v in self.value_grid if abs(v) >= self.min_magnitude
        )
        if not vals:
            raise SchemaError("no grid values pass the magnitude floor")
        return vals

    def ops_for(self, stage=None):
        names = [d.name for d in list_ops(stage)]
        if self.op_pool is not None:
            names = [n for n in names if n in self.op_pool]
        if not names:
            raise SchemaError(f"op pool leaves no ops for stage {stage}")
        return names

    def as_dict(self):
        return {
            "min_magnitude": self.min_magnitude,
            "value_grid": list(self.value_grid),
            "stage_op_counts": list(self.stage_op_counts),
            "no_edit_fraction": self.no_edit_fraction,
            "op_pool": None if self.op_pool is None else list(self.op_pool),
        }


@dataclass(frozen=True)
class PuzzleRecord:
    kind: str
    record_id: str
    seed: int
    expert_ref: str
    image_refs: tuple
    composition: dict
    ground_truth: dict
    reasoning: str = None

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "record_id": self.record_id,
            "seed": self.seed,
            "expert_ref": self.expert_ref,
            "image_refs": list(self.image_refs),
            "composition": self.composition,
            "ground_truth": self.ground_truth,
            "reasoning": self.reasoning,
        }


def derive_seed(global_seed: int, record_index: int) -> int:
    """Stable per-record seed mixed from the run seed and the index."""
    ss = np.random.SeedSequence([int(global_seed), int(record_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def stitch(images, tile_height: int = TILE_HEIGHT) -> ImageBuffer:
    """Scale 2-5 buffers to a common height and join them left to right.

    Aspect ratios are preserved; tiles are separated by 4 white columns.
    """
    images = list(images)
    if not 2 <= len(images) <= 5:
        raise ValidationError(
            f"stitch takes two to five images, got {len(images)}"
        )
    if tile_height < 1:
        raise ValidationError("tile height must be positive")
    tiles = []
    for img in images:
        if img.space is not ColorSpace.ENCODED_SRGB:
            raise WrongSpace("stitch expects encoded-sRGB buffers")
        new_w = max(1, round(img.width * tile_height / img.height))
        interp = cv2.INTER_AREA if tile_height < img.height else cv2.INTER_LINEAR
        tiles.append(
            cv2.resize(img.data, (new_w, tile_height), interpolation=interp)
        )
    sep = np.full((tile_height, SEPARATOR_PX, 3), 65535.0, dtype=np.float32)
    joined = []
    for i, t in enumerate(tiles):
        if i:
            joined.append(sep)
        joined.append(t)
    return ImageBuffer(
        np.concatenate(joined, axis=1), ColorSpace.ENCODED_SRGB
    )


def _visible(expert, edited) -> bool:
    return psnr_db(expert, edited) < VISIBLE_CHANGE_CEILING_DB


def gen_puzzle_a(expert, policy, seed, record_id="A-00000", expert_ref="expert.png",
                 tile_height=TILE_HEIGHT):
    """Sample a single-op record; returns (record, {ref: buffer})."""
    rng = np.random.default_rng(seed)
    names = policy.ops_for()
    values = policy.values()
    # value rejection resamples values only, so it cannot shift realized op
    # frequencies off the uniform draw; the op itself is redrawn only after
    # its value budget is spent, which happens when it has no footprint on
    # this expert at all (an empty hue band, a flat tone region)
    for _ in range(_MAX_ATTEMPTS):
        op = names[int(rng.integers(len(names)))]
        for _ in range(_MAX_ATTEMPTS):
            value = int(values[int(rng.integers(len(values)))])
            edited = apply(expert, Adjustment(op, value))
            if not _visible(expert, edited):
                continue
            break
        else:
            continue
        edited_ref = f"{record_id}_edited.png"
        stitched_ref = f"{record_id}_pair.png"
        record = PuzzleRecord(
            kind="A",
            record_id=record_id,
            seed=seed,
            expert_ref=expert_ref,
            image_refs=(expert_ref, edited_ref),
            composition={
                "stitched_ref": stitched_ref,
                "order": ["source", "edited"],
                "tile_height": tile_height,
            },
            ground_truth={"op": op, "value": value},
        )
        images = {
            edited_ref: edited,
            stitched_ref: stitch([expert, edited], tile_height),
        }
        return record, images
    raise DegenerateSample(
        f"{record_id}: no visible single-op edit after {_MAX_ATTEMPTS} op draws"
    )


def _sample_b_values(rng, values):
    negs = [v for v in values if v < 0]
    poss = [v for v in values if v > 0]
    if not negs or not poss:
        raise SchemaError("puzzle B needs both signs in the value grid")
    picked = [
        int(negs[int(rng.integers(len(negs)))]),
        int(poss[int(rng.integers(len(poss)))]),
    ]
    rest = [v for v in values if v not in picked]
    if len(rest) < 2:
        raise SchemaError("puzzle B needs at least four grid values")
    idx = rng.choice(len(rest), size=2, replace=False)
    picked.extend(int(rest[i]) for i in sorted(int(j) for j in idx))
    return picked


def gen_puzzle_b(expert, policy, seed, record_id="B-00000", expert_ref="expert.png",
                 tile_height=TILE_HEIGHT):
    """Sample a five-tile ordering record; returns (record, {ref: buffer})."""
    rng = np.random.default_rng(seed)
    names = policy.ops_for()
    values = policy.values()
    # ops escalate only after the value budget is spent; see gen_puzzle_a
    for _ in range(_MAX_ATTEMPTS):
        op = names[int(rng.integers(len(names)))]
        floor = (
            REPLAY_FLOOR_B_EXACT_DB
            if get_op(op).invertibility == EXACT
            else REPLAY_FLOOR_B_DB
        )
        for _ in range(_MAX_ATTEMPTS):
            picked = _sample_b_values(rng, values)
            variants = [apply(expert, Adjustment(op, v)) for v in picked]
            if not all(_visible(expert, var) for var in variants):
                continue
            designated = int(rng.integers(4))
            restored = apply(variants[designated],
                             Adjustment(op, -picked[designated]))
            if psnr_db(restored, expert) >= floor:
                break
        else:
            continue
        # tile 0 is the expert; shuffle all five into panel positions
        tile_values = [0] + picked
        tiles = [expert] + variants
        perm = [int(p) for p in rng.permutation(5)]
        values_by_position = [tile_values[perm[p]] for p in range(5)]
        order_by_value = sorted(range(5), key=lambda p: values_by_position[p])
        optimal_position = values_by_position.index(0)
        variant_position = perm.index(designated + 1)
        refs = [f"{record_id}_tile{p}.png" for p in range(5)]
        stitched_ref = f"{record_id}_panel.png"
        record = PuzzleRecord(
            kind="B",
            record_id=record_id,
            seed=seed,
            expert_ref=expert_ref,
            image_refs=tuple(refs),
            composition={
                "stitched_ref": stitched_ref,
                "order": [f"tile{p}" for p in range(5)],
                "tile_height": tile_height,
            },
            ground_truth={
                "op": op,
                "values_by_position": values_by_position,
                "order_by_value": order_by_value,
                "optimal_position": optimal_position,
                "variant_position": variant_position,
                "correction": {"op": op, "value": -picked[designated]},
            },
        )
        panel = [tiles[perm[p]] for p in range(5)]
        images = {refs[p]: panel[p] for p in range(5)}
        images[stitched_ref] = stitch(panel, tile_height)
        return record, images
    raise DegenerateSample(
        f"{record_id}: no replayable variant set after {_MAX_ATTEMPTS} op draws"
    )


def gen_puzzle_c(expert, policy, seed, record_id="C-00000", expert_ref="expert.png",
                 tile_height=TILE_HEIGHT):
    """Sample a stage-restoration record; returns (record, {ref: buffer})."""
    rng = np.random.default_rng(seed)
    stage = int(rng.integers(1, 4))
    source_ref = f"{record_id}_source.png"
    stitched_ref = f"{record_id}_pair.png"
    if float(rng.random()) < policy.no_edit_fraction:
        record = PuzzleRecord(
            kind="C",
            record_id=record_id,
            seed=seed,
            expert_ref=expert_ref,
            image_refs=(source_ref,),
            composition={
                "stitched_ref": stitched_ref,
                "order": ["source", "expert"],
                "tile_height": tile_height,
            },
            ground_truth={"stage": stage, "no_edit": True, "plan": []},
        )
        images = {
            source_ref: expert,
            stitched_ref: stitch([expert, expert], tile_height),
        }
        return record, images
    names = policy.ops_for(stage)
    values = policy.values()
    counts = [k for k in policy.stage_op_counts if k <= len(names)]
    if not counts:
        raise SchemaError(f"stage {stage} offers fewer ops than requested")
    # the op set escalates only after the value budget is spent;
    # see gen_puzzle_a
    for _ in range(_MAX_ATTEMPTS):
        k = counts[int(rng.integers(len(counts)))]
        chosen = [names[int(i)] for i in rng.choice(len(names), size=k,
                                                    replace=False)]
        for _ in range(_MAX_ATTEMPTS):
            corrective = canonical_order(
                Adjustment(op, int(values[int(rng.integers(len(values)))]))
                for op in chosen
            )
            # the plan replays left to right, so the damage is laid down in
            # reverse plan order; each plan step unwinds the matching move
            degraded = expert
            for adj in reversed(corrective):
                degraded = apply(degraded, invert(adj))
            if not _visible(expert, degraded):
                continue
            restored = apply_sequence(degraded, corrective)
            if psnr_db(restored, expert) >= REPLAY_FLOOR_C_DB:
                break
        else:
            continue
        record = PuzzleRecord(
            kind="C",
            record_id=record_id,
            seed=seed,
            expert_ref=expert_ref,
            image_refs=(source_ref,),
            composition={
                "stitched_ref": stitched_ref,
                "order": ["source", "expert"],
                "tile_height": tile_height,
            },
            ground_truth={
                "stage": stage,
                "no_edit": False,
                "plan": [{"op": a.op, "value": a.value} for a in corrective],
            },
        )
        images = {
            source_ref: degraded,
            stitched_ref: stitch([degraded, expert], tile_height),
        }
        return record, images
    raise DegenerateSample(
        f"{record_id}: no restorable degradation after {_MAX_ATTEMPTS} op draws"
    )


_GENERATORS = {"A": gen_puzzle_a, "B": gen_puzzle_b, "C": gen_puzzle_c}

_RECORD_KEYS = (
    "kind",
    "record_id",
    "seed",
    "expert_ref",
    "image_refs",
    "composition",
    "ground_truth",
    "reasoning",
)


def validate_record_dict(doc: dict) -> None:
    """Schema-check one record document; raises SchemaError on violations."""
    if not isinstance(doc, dict):
        raise SchemaError("record must be an object")
    if set(doc) != set(_RECORD_KEYS):
        raise SchemaError(
            f"record keys {sorted(doc)} != expected {sorted(_RECORD_KEYS)}"
        )
    if doc["kind"] not in _GENERATORS:
        raise SchemaError(f"unknown record kind {doc['kind']!r}")
    if not isinstance(doc["record_id"], str) or not doc["record_id"]:
        raise SchemaError("record_id must be a non-empty string")
    if not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool):
        raise SchemaError("seed must be an integer")
    if not isinstance(doc["expert_ref"], str):
        raise SchemaError("expert_ref must be a string")
    refs = doc["image_refs"]
    if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
        raise SchemaError("image_refs must be a list of strings")
    comp = doc["composition"]
    if not isinstance(comp, dict) or set(comp) != {
        "stitched_ref",
        "order",
        "tile_height",
    }:
        raise SchemaError("composition must carry stitched_ref, order, tile_height")
    gt = doc["ground_truth"]
    kind = doc["kind"]
    if kind == "A":
        if set(gt) != {"op", "value"}:
            raise SchemaError("kind A ground truth must be {op, value}")
        Adjustment(gt["op"], gt["value"])
    elif kind == "B":
        want = {
            "op",
            "values_by_position",
            "order_by_value",
            "optimal_position",
            "variant_position",
            "correction",
        }
        if set(gt) != want:
            raise SchemaError(f"kind B ground truth keys {sorted(gt)} != {sorted(want)}")
        vals = gt["values_by_position"]
        if sorted(gt["order_by_value"]) != [0, 1, 2, 3, 4] or len(vals) != 5:
            raise SchemaError("kind B panel must describe five positions")
        if vals[gt["optimal_position"]] != 0:
            raise SchemaError("optimal position must hold the untouched tile")
        if len(set(vals)) != 5:
            raise SchemaError("kind B implicit values must be pairwise distinct")
        Adjustment(gt["correction"]["op"], gt["correction"]["value"])
        if gt["correction"]["value"] != -vals[gt["variant_position"]]:
            raise SchemaError("correction must negate the designated tile's value")
    else:
        if set(gt) != {"stage", "no_edit", "plan"}:
            raise SchemaError("kind C ground truth must be {stage, no_edit, plan}")
        if gt["stage"] not in (1, 2, 3):
            raise SchemaError("kind C stage must be 1-3")
        if bool(gt["no_edit"]) != (len(gt["plan"]) == 0):
            raise SchemaError("no_edit records carry an empty plan, others not")
        adjs = [Adjustment(a["op"], a["value"]) for a in gt["plan"]]
        if [a.op for a in adjs] != [
            a.op for a in canonical_order(adjs)
        ]:
            raise SchemaError("kind C plan must be in canonical op order")
    if doc["reasoning"] is not None and not isinstance(doc["reasoning"], str):
        raise SchemaError("reasoning must be text when present")


def write_records(records, out_dir) -> int:
    """Write records.jsonl next to the images; validates readback.

    Every referenced image must already exist under ``out_dir``.
    Returns the record count.
    """
    path = os.path.join(out_dir, "records.jsonl")
    lines = []
    for rec in records:
        doc = rec.as_dict()
        validate_record_dict(doc)
        for ref in list(doc["image_refs"]) + [
            doc["expert_ref"],
            doc["composition"]["stitched_ref"],
        ]:
            if not os.path.exists(os.path.join(out_dir, ref)):
                raise SerializationError(
                    f"record {rec.record_id} references missing image {ref}"
                )
        lines.append(json.dumps(doc, ensure_ascii=False))
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))
        os.replace(tmp, path)
    except OSError as exc:
        if exc.errno == 28:
            raise SinkFull(f"out of space writing {path}") from exc
        raise
    for doc in read_record_dicts(path):
        validate_record_dict(doc)
    return len(lines)


def read_record_dicts(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SerializationError(f"{path}:{n + 1}: bad JSON: {exc}") from exc
    return out


def read_records(path):
    docs = read_record_dicts(path)
    records = []
    for doc in docs:
        validate_record_dict(doc)
        records.append(
            PuzzleRecord(
                kind=doc["kind"],
                record_id=doc["record_id"],
                seed=doc["seed"],
                expert_ref=doc["expert_ref"],
                image_refs=tuple(doc["image_refs"]),
                composition=doc["composition"],
                ground_truth=doc["ground_truth"],
                reasoning=doc["reasoning"],
            )
        )
    return records


def _save(img: ImageBuffer, out_dir: str, ref: str) -> None:
    path = os.path.join(out_dir, ref)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    data = encode(img)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        if exc.errno == 28:
            raise SinkFull(f"out of space writing {path}") from exc
        raise


def generate_dataset(
    kind,
    expert_paths,
    count,
    out_dir,
    policy=None,
    global_seed=0,
    tile_height=TILE_HEIGHT,
    workers=1,
):
    """Generate ``count`` records of one kind into ``out_dir``.

    Expert images are cycled in order; outputs are a ``records.jsonl``,
    a ``manifest.json`` and PNG16 images under ``images/``.
    """
    if kind not in _GENERATORS:
        raise SchemaError(f"unknown puzzle kind {kind!r}")
    policy = policy or PerturbationPolicy()
    expert_paths = [str(p) for p in expert_paths]
    if not expert_paths:
        raise SchemaError("need at least one expert image")
    experts = [load_image(p) for p in expert_paths]
    expert_refs = []
    os.makedirs(out_dir, exist_ok=True)
    for p, img in zip(expert_paths, experts):
        stem = os.path.splitext(os.path.basename(p))[0]
        ref = f"images/experts/{stem}.png"
        _save(img, out_dir, ref)
        expert_refs.append(ref)

    gen = _GENERATORS[kind]

    def build(index):
        expert_idx = index % len(experts)
        seed = derive_seed(global_seed, index)
        rid = f"{kind}-{index:05d}"
        record, images = gen(
            experts[expert_idx],
            policy,
            seed,
            record_id=rid,
            expert_ref=expert_refs[expert_idx],
            tile_height=tile_height,
        )
        return record, images

    indices = range(count)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(build, indices))
    else:
        results = [build(i) for i in indices]

    records = []
    for record, images in results:
        for ref, img in images.items():
            _save(img, out_dir, f"images/{ref}")
        records.append(_rebase_record(record))
    n = write_records(records, out_dir)
    manifest = {
        "generator_version": GENERATOR_VERSION,
        "kind": kind,
        "global_seed": int(global_seed),
        "count": n,
        "tile_height": tile_height,
        "policy": policy.as_dict(),
        "experts": expert_refs,
        "records_file": "records.jsonl",
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def _rebase_record(record: PuzzleRecord) -> PuzzleRecord:
    # generator refs are written under images/
    comp = dict(record.composition)
    comp["stitched_ref"] = f"images/{comp['stitched_ref']}"
    return PuzzleRecord(
        kind=record.kind,
        record_id=record.record_id,
        seed=record.seed,
        expert_ref=record.expert_ref,
        image_refs=tuple(
            r if r.startswith("images/") else f"images/{r}"
            for r in record.image_refs
        ),
        composition=comp,
        ground_truth=record.ground_truth,
        reasoning=record.reasoning,
    )


def load_record_images(dataset_dir, record) -> tuple:
    """The stitched panel a record presents, as a one-buffer tuple."""
    path = os.path.join(dataset_dir, record.composition["stitched_ref"])
    return (load_image(path),)


def op_frequencies(records) -> dict:
    """How often each op occurs in the ground truth of the records."""
    counts = {}
    for rec in records:
        gt = rec.ground_truth
        if rec.kind in ("A", "B"):
            counts[gt["op"]] = counts.get(gt["op"], 0) + 1
        else:
            for a in gt["plan"]:
                counts[a["op"]] = counts.get(a["op"], 0) + 1
    return counts


def dataset_fingerprint(out_dir) -> str:
    """SHA-256 over records.jsonl plus every referenced image file."""
    h = hashlib.sha256()
    rec_path = os.path.join(out_dir, "records.jsonl")
    with open(rec_path, "rb") as fh:
        h.update(fh.read())
    seen = []
    for doc in read_record_dicts(rec_path):
        seen.extend(doc["image_refs"])
        seen.append(doc["composition"]["stitched_ref"])
        seen.append(doc["expert_ref"])
    for ref in sorted(set(seen)):
        with open(os.path.join(out_dir, ref), "rb") as fh:
            h.update(hashlib.sha256(fh.read()).digest())
    return h.hexdigest()
