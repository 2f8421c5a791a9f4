"""Command line interface, driven in-process through main(argv)."""

import json
import os
import subprocess

import numpy as np
import pytest

from conftest import synth_image
from retouchkit.cli import main
from retouchkit.imagecore import load_image, save_image
from retouchkit.ops import Adjustment, apply
from retouchkit.plan import (
    Plan,
    ReasoningTriplet,
    StagePlan,
    serialize_plan,
)


@pytest.fixture()
def image_file(tmp_path):
    img = synth_image(31, height=48, width=64)
    path = tmp_path / "input.png"
    save_image(img, str(path))
    return str(path)


class TestListOps:
    def test_plain_listing(self, capsys):
        assert main(["list-ops"]) == 0
        out = capsys.readouterr().out
        assert "stage 1:" in out and "stage 3:" in out
        assert "hue_magenta" in out

    def test_json_listing(self, capsys):
        assert main(["list-ops", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc) == 33
        assert {"name", "stage", "invertibility", "identity",
                "value_range", "doc"} <= set(doc[0])

    def test_stage_filter(self, capsys):
        assert main(["list-ops", "--stage", "2", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert [d["name"] for d in doc] == ["saturation", "temperature",
                                            "tint"]


class TestApply:
    def test_adjust_flags(self, tmp_path, image_file, capsys):
        out_path = str(tmp_path / "out.png")
        code = main(["apply", image_file, "-o", out_path,
                     "--adjust", "exposure=30"])
        assert code == 0
        want = apply(load_image(image_file), Adjustment("exposure", 30))
        save_image(want, str(tmp_path / "want.png"))
        assert load_image(out_path).same_samples(
            load_image(str(tmp_path / "want.png")))

    def test_plan_file(self, tmp_path, image_file, capsys):
        plan = Plan(
            source="input",
            stages=(StagePlan(
                stage=2,
                triplets=(ReasoningTriplet("increase tint slightly",
                                           "green cast", "push magenta"),),
                adjustments=(Adjustment("tint", 12),),
            ),),
        )
        plan_file = tmp_path / "plan.json"
        plan_file.write_text(serialize_plan(plan))
        out_path = str(tmp_path / "out.png")
        assert main(["apply", image_file, "-o", out_path,
                     "--plan", str(plan_file)]) == 0
        assert os.path.exists(out_path)

    def test_unresolved_plan_fails(self, tmp_path, image_file, capsys):
        plan = Plan(
            source="input",
            stages=(StagePlan(
                stage=2,
                triplets=(ReasoningTriplet("increase tint slightly",
                                           "green cast", "push magenta"),),
            ),),
        )
        plan_file = tmp_path / "plan.json"
        plan_file.write_text(serialize_plan(plan))
        code = main(["apply", image_file, "-o", str(tmp_path / "o.png"),
                     "--plan", str(plan_file)])
        assert code == 2

    def test_adjust_xor_plan(self, tmp_path, image_file, capsys):
        out_path = str(tmp_path / "o.png")
        assert main(["apply", image_file, "-o", out_path]) == 2
        assert main(["apply", image_file, "-o", out_path,
                     "--adjust", "exposure=30", "--plan", "x.json"]) == 2

    def test_bad_adjust_values(self, tmp_path, image_file, capsys):
        out_path = str(tmp_path / "o.png")
        assert main(["apply", image_file, "-o", out_path,
                     "--adjust", "exposure:30"]) == 2
        assert main(["apply", image_file, "-o", out_path,
                     "--adjust", "sharpen=30"]) == 2
        assert main(["apply", image_file, "-o", out_path,
                     "--adjust", "exposure=400"]) == 2

    def test_missing_input_is_io_error(self, tmp_path, capsys):
        code = main(["apply", str(tmp_path / "absent.png"),
                     "-o", str(tmp_path / "o.png"),
                     "--adjust", "exposure=30"])
        assert code == 4
        assert "error" in capsys.readouterr().err


class TestEval:
    def test_single_target(self, image_file, capsys):
        assert main(["eval", "--output", image_file,
                     "--target", image_file]) == 0
        out = capsys.readouterr().out
        assert "psnr=99.0" in out

    def test_multiple_targets_add_best_row(self, tmp_path, image_file,
                                           capsys):
        other = tmp_path / "other.png"
        save_image(synth_image(99, height=48, width=64), str(other))
        assert main(["eval", "--output", image_file,
                     "--target", str(other),
                     "--target", image_file]) == 0
        out = capsys.readouterr().out
        assert "best: psnr=99.0" in out

    def test_report_files(self, tmp_path, image_file, capsys):
        json_path = tmp_path / "r.json"
        csv_path = tmp_path / "r.csv"
        assert main(["eval", "--output", image_file, "--target", image_file,
                     "--json", str(json_path), "--csv", str(csv_path)]) == 0
        rows = json.loads(json_path.read_text())
        assert rows[0]["psnr_db"] == 99.0
        header = csv_path.read_text().splitlines()[0]
        assert header.startswith("name,psnr_db,ssim")

    def _dirs(self, tmp_path, names=("a.png", "b.png")):
        pred = tmp_path / "pred"
        target = tmp_path / "target"
        pred.mkdir()
        target.mkdir()
        for i, name in enumerate(names):
            img = synth_image(i, height=48, width=64)
            save_image(img, str(pred / name))
            save_image(img, str(target / name))
        return str(pred), str(target)

    def test_directory_mode(self, tmp_path, capsys):
        pred, target = self._dirs(tmp_path)
        assert main(["eval", "--output", pred, "--target", target]) == 0
        out = capsys.readouterr().out
        assert "a.png: psnr=99.0" in out
        assert "mean: psnr=99.0" in out

    def test_directory_mismatch(self, tmp_path, capsys):
        pred, target = self._dirs(tmp_path)
        os.remove(os.path.join(target, "b.png"))
        assert main(["eval", "--output", pred, "--target", target]) == 2
        err = capsys.readouterr().err
        assert "b.png" in err

    def test_expert_subdirs_require_best(self, tmp_path, capsys):
        pred, target = self._dirs(tmp_path, names=("a.png",))
        os.makedirs(os.path.join(target, "e1"))
        os.makedirs(os.path.join(target, "e2"))
        os.rename(os.path.join(target, "a.png"),
                  os.path.join(target, "e1", "a.png"))
        save_image(synth_image(5, height=48, width=64),
                   os.path.join(target, "e2", "a.png"))
        assert main(["eval", "--output", pred, "--target", target]) == 2
        assert main(["eval", "--output", pred, "--target", target,
                     "--reduction", "best"]) == 0
        out = capsys.readouterr().out
        assert "a.png: psnr=99.0" in out


class TestVerifyInvert:
    def test_reports_all_ops(self, image_file, tmp_path, capsys):
        json_path = tmp_path / "rows.json"
        code = main(["verify-invert", image_file, "--value", "30",
                     "--json", str(json_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "33/33 round trips within floor" in out
        rows = json.loads(json_path.read_text())
        assert len(rows) == 33
        assert all(r["ok"] for r in rows)


class TestDatasetCommands:
    def test_puzzle_gen_and_reason_synth(self, tmp_path, image_file, capsys):
        out_dir = str(tmp_path / "ds")
        code = main(["puzzle-gen", "--kind", "A", "--expert", image_file,
                     "--count", "3", "--out", out_dir,
                     "--tile-height", "32", "--seed", "5"])
        assert code == 0
        assert "wrote 3 kind-A record(s)" in capsys.readouterr().out

        assert main(["reason-synth", "--dataset", out_dir]) == 0
        assert "for 3 of 3" in capsys.readouterr().out
        from retouchkit.puzzles import read_records

        records = read_records(os.path.join(out_dir, "records.jsonl"))
        assert all(rec.reasoning for rec in records)

        assert main(["reason-synth", "--dataset", out_dir]) == 0
        assert "for 0 of 3" in capsys.readouterr().out


class TestPipelineCommand:
    def test_stub_run_finishes(self, tmp_path, image_file, capsys):
        run_dir = str(tmp_path / "run")
        assert main(["pipeline", image_file, "--run-dir", run_dir]) == 0
        assert "finished" in capsys.readouterr().out
        assert os.path.exists(os.path.join(run_dir, "final.png"))

    def test_pause_and_resume(self, tmp_path, image_file, capsys):
        run_dir = str(tmp_path / "run")
        assert main(["pipeline", image_file, "--run-dir", run_dir,
                     "--pause", "1"]) == 0
        out = capsys.readouterr().out
        assert "paused" in out and "--resume" in out
        assert main(["pipeline", "--run-dir", run_dir, "--resume"]) == 0
        assert "finished" in capsys.readouterr().out

    def test_missing_input_without_resume(self, tmp_path, capsys):
        assert main(["pipeline", "--run-dir", str(tmp_path / "r")]) == 2

    def test_service_error_prints_resume_hint(self, tmp_path, image_file,
                                              capsys):
        run_dir = str(tmp_path / "run")
        cache = str(tmp_path / "cache")
        os.makedirs(cache)
        code = main(["pipeline", image_file, "--run-dir", run_dir,
                     "--client", "replay", "--cache-dir", cache])
        assert code == 3
        err = capsys.readouterr().err
        assert "--resume" in err and run_dir in err


class TestConsoleScript:
    def test_installed_entry_point(self):
        proc = subprocess.run(["retouchkit", "list-ops", "--stage", "1"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "exposure" in proc.stdout

    def test_unknown_subcommand_exits_nonzero(self):
        proc = subprocess.run(["retouchkit", "polish"],
                              capture_output=True, text=True)
        assert proc.returncode != 0
