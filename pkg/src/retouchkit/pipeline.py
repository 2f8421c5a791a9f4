"""Staged retouching runs with a resumable on-disk layout.

A run directory holds everything needed to continue or audit a run:

* ``source.png``: the decoded input, normalized to 16-bit PNG;
* ``stageN.plan.json``: the resolved plan for stage N, written before
  the stage executes so it can be hand-edited while paused;
* ``stageN.png``: the stage output, which feeds stage N+1;
* ``final.png``: a copy of the last stage output;
* ``state.json``: where the run stands (next stage and phase);
* ``events.jsonl``: an append-only event log, intentionally free of
  wall-clock timestamps so identical runs produce identical bytes.

Each stage runs in two phases: ``plan`` (ask the oracle, resolve
values, persist the plan file) and ``apply`` (re-read the plan file,
execute it, persist the output).  ``--pause`` stops between the two.
"""

import json
import os
import shutil
from dataclasses import dataclass, field

from .errors import SchemaError, ValidationError
from .imagecore import load_image, save_image
from .oracle import downscale_for_transport, plan_stage, resolve_values
from .ops import apply_sequence
from .plan import DEFAULT_LEGEND, Plan, parse_plan, serialize_plan

STATE_VERSION = 1
STAGES = (1, 2, 3)

_STYLE_PROMPT = """\
Describe, in one short sentence, the tonal and color rendition implied
by the style tag below, to guide a photo retouching plan.
STYLE: {tag}
"""


@dataclass
class PipelineState:
    """Progress record for one run directory."""

    source_id: str
    style_tag: str = None
    style_line: str = ""
    client_kind: str = None
    status: str = "running"
    next_stage: int = 1
    next_phase: str = "plan"
    stages_done: list = field(default_factory=list)
    version: int = STATE_VERSION

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "source_id": self.source_id,
            "style_tag": self.style_tag,
            "style_line": self.style_line,
            "client_kind": self.client_kind,
            "status": self.status,
            "next_stage": self.next_stage,
            "next_phase": self.next_phase,
            "stages_done": list(self.stages_done),
        }


def _state_path(run_dir):
    return os.path.join(run_dir, "state.json")


def plan_path(run_dir, stage: int) -> str:
    return os.path.join(run_dir, f"stage{stage}.plan.json")


def stage_image_path(run_dir, stage: int) -> str:
    return os.path.join(run_dir, f"stage{stage}.png")


def save_state(run_dir, state: PipelineState) -> None:
    path = _state_path(run_dir)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(state.as_dict(), fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def load_state(run_dir) -> PipelineState:
    path = _state_path(run_dir)
    if not os.path.exists(path):
        raise SchemaError(f"{run_dir} has no state.json; not a run directory")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != STATE_VERSION:
        raise SchemaError(f"unsupported run state version {doc.get('version')!r}")
    state = PipelineState(
        source_id=doc["source_id"],
        style_tag=doc.get("style_tag"),
        style_line=doc.get("style_line", ""),
        client_kind=doc.get("client_kind"),
        status=doc["status"],
        next_stage=int(doc["next_stage"]),
        next_phase=doc["next_phase"],
        stages_done=list(doc.get("stages_done", [])),
    )
    if state.status not in ("running", "paused", "finished"):
        raise SchemaError(f"unknown run status {state.status!r}")
    if state.next_phase not in ("plan", "apply"):
        raise SchemaError(f"unknown run phase {state.next_phase!r}")
    return state


def log_event(run_dir, event: str, **details) -> dict:
    """Append one event to events.jsonl; returns the logged document."""
    path = os.path.join(run_dir, "events.jsonl")
    seq = 0
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as fh:
            seq = sum(1 for line in fh if line.strip())
    doc = {"seq": seq, "event": event}
    doc.update(details)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
    return doc


def read_events(run_dir) -> list:
    path = os.path.join(run_dir, "events.jsonl")
    if not os.path.exists(path):
        return []
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def _expand_style(client, style_tag: str) -> str:
    from .oracle import CompletionRequest

    result = client.complete(
        CompletionRequest(prompt=_STYLE_PROMPT.format(tag=style_tag))
    )
    text = " ".join(result.text.split())
    return f"STYLE GUIDANCE: {text}"


def _stage_input(run_dir, stage: int):
    if stage == 1:
        return load_image(os.path.join(run_dir, "source.png"))
    return load_image(stage_image_path(run_dir, stage - 1))


def _write_stage_plan(run_dir, state: PipelineState, stage_plan) -> None:
    plan = Plan(
        source=state.source_id,
        stages=(stage_plan,),
        style_tag=state.style_tag,
    )
    with open(plan_path(run_dir, stage_plan.stage), "w", encoding="utf-8") as fh:
        fh.write(serialize_plan(plan))


def _read_stage_plan(run_dir, stage: int):
    path = plan_path(run_dir, stage)
    if not os.path.exists(path):
        raise SchemaError(f"missing plan file {path}")
    with open(path, "rb") as fh:
        plan = parse_plan(fh.read())
    sp = plan.stage_plan(stage)
    if sp is None:
        raise SchemaError(f"{path} does not contain a stage {stage} entry")
    return sp


def start_run(run_dir, source_path, client, style_tag=None,
              legend=DEFAULT_LEGEND, pause_after=None,
              client_kind=None) -> PipelineState:
    """Initialize a run directory and execute until done or paused."""
    os.makedirs(run_dir, exist_ok=True)
    if os.path.exists(_state_path(run_dir)):
        raise ValidationError(
            f"{run_dir} already holds a run; resume it or pick a new directory"
        )
    source = load_image(source_path)
    save_image(source, os.path.join(run_dir, "source.png"))
    source_id = os.path.splitext(os.path.basename(str(source_path)))[0]
    state = PipelineState(
        source_id=source_id,
        style_tag=style_tag,
        client_kind=client_kind,
    )
    log_event(run_dir, "run_started", source_id=source_id,
              source_ref="source.png")
    if style_tag:
        state.style_line = _expand_style(client, style_tag)
        log_event(run_dir, "style_expanded", style_tag=style_tag,
                  style_line=state.style_line)
    save_state(run_dir, state)
    return _drive(run_dir, state, client, legend, pause_after)


def resume_run(run_dir, client, legend=DEFAULT_LEGEND,
               pause_after=None) -> PipelineState:
    """Continue a paused or interrupted run from its state file."""
    state = load_state(run_dir)
    if state.status == "finished":
        return state
    if state.status == "paused":
        state.status = "running"
        save_state(run_dir, state)
        log_event(run_dir, "resumed", stage=state.next_stage,
                  phase=state.next_phase)
    return _drive(run_dir, state, client, legend, pause_after)


def _drive(run_dir, state, client, legend, pause_after) -> PipelineState:
    while state.next_stage <= STAGES[-1]:
        stage = state.next_stage
        if state.next_phase == "plan":
            unresolved = plan_stage(
                client,
                state.source_id,
                stage,
                images=(downscale_for_transport(_stage_input(run_dir, stage)),),
                legend=legend,
                style_line=state.style_line,
            )
            resolved = resolve_values(
                client, state.source_id, unresolved, legend=legend
            )
            _write_stage_plan(run_dir, state, resolved)
            if resolved.no_edit_reason is not None:
                log_event(run_dir, "stage_planned", stage=stage,
                          no_edit_reason=resolved.no_edit_reason)
            else:
                log_event(
                    run_dir, "stage_planned", stage=stage,
                    adjustments=[
                        {"op": a.op, "value": a.value}
                        for a in resolved.adjustments
                    ],
                    warnings=list(resolved.warnings),
                )
            state.next_phase = "apply"
            save_state(run_dir, state)
            if pause_after == stage:
                state.status = "paused"
                save_state(run_dir, state)
                log_event(run_dir, "paused", stage=stage,
                          plan_ref=f"stage{stage}.plan.json")
                return state
        sp = _read_stage_plan(run_dir, stage)
        if not sp.resolved:
            sp = resolve_values(client, state.source_id, sp, legend=legend)
            _write_stage_plan(run_dir, state, sp)
            log_event(
                run_dir, "stage_resolved", stage=stage,
                adjustments=[
                    {"op": a.op, "value": a.value} for a in sp.adjustments
                ],
                warnings=list(sp.warnings),
            )
        src = _stage_input(run_dir, stage)
        out = apply_sequence(src, sp.adjustments)
        save_image(out, stage_image_path(run_dir, stage))
        log_event(
            run_dir, "stage_applied", stage=stage,
            output_ref=f"stage{stage}.png",
            edited=bool(sp.adjustments),
        )
        state.stages_done.append(stage)
        state.next_stage = stage + 1
        state.next_phase = "plan"
        save_state(run_dir, state)
    shutil.copyfile(
        stage_image_path(run_dir, STAGES[-1]),
        os.path.join(run_dir, "final.png"),
    )
    state.status = "finished"
    save_state(run_dir, state)
    log_event(run_dir, "run_finished", final_ref="final.png")
    return state
