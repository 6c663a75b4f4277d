import numpy as np
import pytest
from PIL import Image

from cornspect.cli import run
from cornspect.model import KernelLabel
from cornspect.synth import SceneSpec, generate_kernel_image, generate_scene

COUNTS = "3,3,2,2,1,1"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """generate -> train once; downstream commands reuse the artifacts."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    model = root / "model.ckpt"
    assert run(["generate", "--out", str(data), "--counts", COUNTS, "--seed", "7", "--size", "32"]) == 0
    assert (
        run(
            [
                "train", "--data", str(data), "--model", str(model), "--seed", "7",
                "--epochs", "2", "--size", "32", "--batch", "4",
            ]
        )
        == 0
    )
    return root, data, model


class TestHelp:
    @pytest.mark.parametrize("cmd", [[], ["generate"], ["train"], ["eval"], ["predict"], ["inspect"]])
    def test_help_exits_zero(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            run(cmd + ["--help"])
        assert exc.value.code == 0
        assert "--" in capsys.readouterr().out

    def test_help_lists_defaults(self, capsys):
        with pytest.raises(SystemExit):
            run(["train", "--help"])
        out = capsys.readouterr().out
        for flag in ("--data", "--model", "--seed", "--epochs", "--lr", "--batch", "--optimizer"):
            assert flag in out
        assert "default: 30" in out  # epochs default is self-documented


class TestUsageErrors:
    def test_unknown_flag_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            run(["generate", "--out", "x", "--counts", COUNTS, "--seed", "1", "--frobnicate"])
        assert exc.value.code == 1

    def test_malformed_counts_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            run(["generate", "--out", "x", "--counts", "1,2,3", "--seed", "1"])
        assert exc.value.code == 1

    def test_unknown_subcommand_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            run(["frobnicate"])
        assert exc.value.code == 1

    def test_missing_required_flag_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            run(["generate", "--out", "x", "--counts", COUNTS])  # no --seed
        assert exc.value.code == 1


class TestGenerate:
    def test_writes_tree_and_summary(self, workspace, capsys):
        root, data, _ = workspace
        assert run(["generate", "--out", str(root / "d2"), "--counts", COUNTS, "--seed", "9", "--size", "32"]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 1 and out[0].startswith("OK generate files=12 ")
        assert (root / "d2" / "manifest.jsonl").exists()
        assert len(list((root / "d2" / "train" / "normal").glob("*.png"))) == 3

    def test_idempotent_given_same_seed(self, workspace, tmp_path):
        import hashlib

        digests = []
        for sub in ("r1", "r2"):
            assert run(["generate", "--out", str(tmp_path / sub), "--counts", COUNTS, "--seed", "3", "--size", "32"]) == 0
            h = hashlib.sha256()
            for p in sorted((tmp_path / sub).rglob("*.png")):
                h.update(p.read_bytes())
            digests.append(h.hexdigest())
        assert digests[0] == digests[1]


class TestTrainCommand:
    def test_writes_checkpoint_and_metrics(self, workspace):
        root, _, model = workspace
        assert model.exists()
        assert model.with_suffix(".csv").exists()

    def test_two_runs_byte_identical(self, workspace, tmp_path):
        _, data, _ = workspace
        blobs = []
        for sub in ("m1", "m2"):
            model = tmp_path / f"{sub}.ckpt"
            assert (
                run(
                    [
                        "train", "--data", str(data), "--model", str(model), "--seed", "5",
                        "--epochs", "2", "--size", "32", "--batch", "4",
                    ]
                )
                == 0
            )
            blobs.append((model.read_bytes(), model.with_suffix(".csv").read_bytes()))
        assert blobs[0] == blobs[1]

    def test_missing_data_dir_exits_two(self, tmp_path, capsys):
        code = run(
            ["train", "--data", str(tmp_path / "nope"), "--model", str(tmp_path / "m.ckpt"), "--seed", "1"]
        )
        assert code == 2
        assert "nope" in capsys.readouterr().err


class TestEvalCommand:
    def test_reports_accuracy(self, workspace, capsys):
        root, data, model = workspace
        report = root / "eval.report.jsonl"
        assert run(["eval", "--model", str(model), "--data", str(data), "--report", str(report)]) == 0
        out = capsys.readouterr().out.strip()
        assert out.startswith("OK eval split=test images=2 accuracy=")
        assert report.exists()

    def test_missing_model_exits_three_and_names_path(self, workspace, capsys):
        _, data, _ = workspace
        code = run(["eval", "--model", "/no/such/model.ckpt", "--data", str(data)])
        assert code == 3
        assert "/no/such/model.ckpt" in capsys.readouterr().err


class TestPredictCommand:
    def test_prints_file_calculation_label(self, workspace, capsys, tmp_path):
        _, _, model = workspace
        image = generate_kernel_image(KernelLabel.ABNORMAL, 3, 32)
        path = tmp_path / "kernel.png"
        Image.fromarray(image.pixels).save(path)
        assert run(["predict", "--model", str(model), "--image", str(path)]) == 0
        out = capsys.readouterr().out.strip()
        parts = out.split()
        assert parts[0] == str(path)
        assert 0.0 <= float(parts[1]) <= 1.0
        assert parts[2] in ("Normal", "Abnormal")

    def test_missing_image_exits_three(self, workspace, capsys):
        _, _, model = workspace
        code = run(["predict", "--model", str(model), "--image", "/no/such/img.png"])
        assert code == 3
        assert "img.png" in capsys.readouterr().err

    def test_undecodable_image_exits_two(self, workspace, tmp_path, capsys):
        _, _, model = workspace
        bad = tmp_path / "junk.png"
        bad.write_bytes(b"definitely not an image")
        code = run(["predict", "--model", str(model), "--image", str(bad)])
        assert code == 2
        assert "junk.png" in capsys.readouterr().err


class TestInspectCommand:
    def test_writes_annotated_and_report(self, workspace, tmp_path, capsys):
        _, _, model = workspace
        scene, _ = generate_scene(SceneSpec.for_counts(3, 2, canvas_height=320, canvas_width=320), 4)
        scene_path = tmp_path / "scene.png"
        Image.fromarray(scene).save(scene_path)
        annotated = tmp_path / "scene.annotated.png"
        report = tmp_path / "scene.report.jsonl"
        assert (
            run(
                [
                    "inspect", "--model", str(model), "--image", str(scene_path),
                    "--out", str(annotated), "--report", str(report), "--min-area", "64",
                ]
            )
            == 0
        )
        out = capsys.readouterr().out.strip()
        assert out.startswith("OK inspect seeds=5 ")
        assert annotated.exists() and report.exists()
        assert np.asarray(Image.open(annotated)).shape == scene.shape
