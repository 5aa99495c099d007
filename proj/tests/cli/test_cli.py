import hashlib
import json
import os
import subprocess
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

MITO = os.environ.get("MITO_BIN", "mito")

TINY_NET = {"depth": 2, "base_channels": 4, "embed_dim": 8, "refine_blocks": 1, "n_domains": 2}


def run(*args, env=None, check=True):
    full_env = dict(os.environ)
    full_env.pop("MITO_SEED", None)
    full_env.update(env or {})
    proc = subprocess.run([MITO, *map(str, args)], capture_output=True, text=True, env=full_env)
    if check and proc.returncode != 0:
        raise AssertionError(f"mito {args} exited {proc.returncode}\n{proc.stdout}\n{proc.stderr}")
    return proc


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def listed_hashes(dataset):
    manifest = json.loads((dataset / "manifest.json").read_text())
    return {name: hashlib.sha256((dataset / name).read_bytes()).hexdigest() for name in manifest["files"]}


def tiny_run_config(track, dataset):
    return {
        "seed": 5,
        "dataset": str(dataset),
        "net": TINY_NET,
        "augment": {"out_size": 32, "crop_size": 46},
        "train": {
            "max_epochs": 2,
            "patience": 1,
            "warmup_epochs_nuclei": 1,
            "batch_size": 4,
            "tile_size": 64,
            "cls_patch": 32,
            "samples_per_case": 1,
            "lr_init": 1e-3,
        },
        "infer": {"cls_patch": 32},
    }


@pytest.fixture(scope="session")
def work(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="session")
def dataset(work):
    cfg = write_json(work / "synth.json", {"n_cases": 8, "n_domains": 2, "width": 128, "height": 128,
                                           "nuclei_per_image": 6, "mitosis_per_image": 2, "seed": 21})
    run("synth", "-c", cfg, "-o", work / "ds")
    return work / "ds"


@pytest.fixture(scope="session")
def track1_run(work, dataset):
    cfg = write_json(work / "t1.json", tiny_run_config(1, dataset))
    proc = run("train", "-c", cfg, "-t", 1, "-o", work / "run1", "-q")
    return work / "run1", proc


@pytest.fixture(scope="session")
def track2_run(work, dataset):
    cfg = write_json(work / "t2.json", tiny_run_config(2, dataset))
    run("train", "-c", cfg, "-t", 2, "-o", work / "run2", "-q")
    return work / "run2"


def test_no_subcommand_is_usage_error():
    assert run(check=False).returncode == 2
    assert run("train", "--bogus", check=False).returncode == 2


def test_synth_layout_and_determinism(work, dataset):
    assert (dataset / "images").is_dir() and (dataset / "masks").is_dir()
    assert (dataset / "annotations.json").is_file()
    run("synth", "-c", work / "synth.json", "-o", work / "ds_again")
    assert listed_hashes(dataset) == listed_hashes(work / "ds_again")


def test_synth_default_config(work):
    run("synth", "-o", work / "ds_default")
    manifest = json.loads((work / "ds_default" / "manifest.json").read_text())
    assert len(manifest["cases"]) == 8


def test_synth_rejects_empty_dataset(work):
    cfg = write_json(work / "empty.json", {"n_cases": 0})
    assert run("synth", "-c", cfg, "-o", work / "nothing", check=False).returncode == 2


def test_seed_override(work):
    run("synth", "-c", work / "synth.json", "-o", work / "ds_seed", env={"MITO_SEED": "77"})
    manifest = json.loads((work / "ds_seed" / "manifest.json").read_text())
    assert manifest["seed"] == 77
    proc = run("synth", "-c", work / "synth.json", "-o", work / "ds_bad", env={"MITO_SEED": "x1"}, check=False)
    assert proc.returncode == 2


def test_pseudomask_quality_and_determinism(work, dataset):
    run("pseudomask", "-i", dataset, "-o", work / "pm1", "-j", 1)
    run("pseudomask", "-i", dataset, "-o", work / "pm2", "-j", 3)
    s1 = json.loads((work / "pm1" / "summary.json").read_text())
    s2 = json.loads((work / "pm2" / "summary.json").read_text())
    assert s1 == s2
    assert s1["mean_iou"] >= 0.7
    for row in s1["images"]:
        assert (work / "pm1" / row["mask"]).read_bytes() == (work / "pm2" / row["mask"]).read_bytes()


def test_pseudomask_white_image_warns(work):
    d = work / "white"
    d.mkdir()
    Image.fromarray(np.full((96, 96, 3), 255, np.uint8)).save(d / "blank.png")
    run("pseudomask", "-i", d, "-o", work / "white_out")
    summary = json.loads((work / "white_out" / "summary.json").read_text())
    assert summary["warnings"] == 1
    assert summary["images"][0]["warning"] is True


def test_pseudomask_missing_input(work):
    assert run("pseudomask", "-i", work / "absent", "-o", work / "x", check=False).returncode == 2


def test_tile(work, dataset):
    run("tile", "-d", dataset, "-o", work / "tiles", "--tile-size", 64)
    index = json.loads((work / "tiles" / "tiles.json").read_text())
    assert len(index["cases"]) == 8
    for case in index["cases"]:
        assert len(case["tiles"]) == 9  # origins 0, 32, 64 per axis
        for t in case["tiles"]:
            assert (work / "tiles" / t["image"]).is_file()
            assert (work / "tiles" / t["target"]).is_file()


def test_train_track1_outputs(track1_run):
    run_dir, proc = track1_run
    for name in ("best.ckpt", "warmup.ckpt", "metrics.jsonl", "config.json", "split.json"):
        assert (run_dir / name).is_file(), name
    echoed = json.loads(proc.stdout[: proc.stdout.rindex("}\n{") + 1])
    assert echoed["config"]["loss"]["lambda2"] == 0.0
    assert json.loads((run_dir / "config.json").read_text())["loss"]["lambda2"] == 0.0


def test_train_is_reproducible(work, track1_run):
    run_dir, _ = track1_run
    run("train", "-c", work / "t1.json", "-t", 1, "-o", work / "run1b", "-q")
    assert (run_dir / "metrics.jsonl").read_bytes() == (work / "run1b" / "metrics.jsonl").read_bytes()
    assert (run_dir / "best.ckpt").read_bytes() == (work / "run1b" / "best.ckpt").read_bytes()


def test_train_non_finite_exit_code(work, dataset):
    cfg = tiny_run_config(1, dataset)
    # An overflowing point-loss weight turns the weighted total into inf on the first step.
    cfg["loss"] = {"lambda1": 1e300}
    proc = run("train", "-c", write_json(work / "blowup.json", cfg), "-t", 1, "-o", work / "blowup", "-q",
               check=False)
    assert proc.returncode == 3
    assert "NonFinite" in proc.stderr
    last = json.loads((work / "blowup" / "metrics.jsonl").read_text().splitlines()[-1])
    assert last["type"] == "error"


def test_eval_track1_report(work, track1_run):
    run_dir, _ = track1_run
    run("eval", "-r", run_dir, "-s", "all")
    report = json.loads((run_dir / "eval_all.json").read_text())
    det = report["detection"]
    assert set(det) >= {"overall", "per_domain", "per_case", "hit_radius_um"}
    for block in [det["overall"], *det["per_domain"].values(), *det["per_case"]]:
        p, r = block["precision"], block["recall"]
        expected = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        assert abs(block["f1"] - expected) <= 1e-9
    assert not (run_dir / "pr_curve.svg").exists()
    run("eval", "-r", run_dir, "-s", "all", "-o", work / "evalplots" / "r.json", "--plots")
    assert (work / "evalplots" / "pr_curve.svg").read_text().startswith("<svg")


def test_eval_missing_checkpoint(work):
    d = work / "emptyrun"
    d.mkdir()
    assert run("eval", "-r", d, check=False).returncode == 2


def test_eval_track2_report(work, track2_run):
    run("eval", "-r", track2_run, "-s", "all", "--plots", "-o", work / "t2eval" / "r.json")
    report = json.loads((work / "t2eval" / "r.json").read_text())
    assert report["fixed_threshold"]["threshold"] == pytest.approx(0.590)
    if not report["single_class"]:
        cls = report["classification"]
        assert set(cls) >= {"threshold", "sensitivity", "specificity", "ba", "curve"}
        assert cls["ba"] >= report["fixed_threshold"]["ba"]
        assert (work / "t2eval" / "ba_curve.svg").is_file()


def test_infer(work, track1_run, track2_run, dataset):
    run_dir, _ = track1_run
    image = dataset / "images" / "case_000.png"
    a = run("infer", "-r", run_dir, "-i", image).stdout
    b = run("infer", "-r", run_dir, "-i", image).stdout
    assert a == b
    for det in json.loads(a):
        assert set(det) == {"x", "y", "score", "subtype", "subtype_prob"}
    run("infer", "-r", track2_run, "-i", image, "-o", work / "dets2.json")
    for det in json.loads((work / "dets2.json").read_text()):
        assert det["subtype"] in ("normal", "atypical")
        assert 0.0 <= det["subtype_prob"] <= 1.0


def test_infer_empty_image(work, track1_run):
    run_dir, _ = track1_run
    Image.fromarray(np.full((96, 96, 3), 240, np.uint8)).save(work / "flat.png")
    dets = json.loads(run("infer", "-r", run_dir, "-i", work / "flat.png").stdout)
    assert isinstance(dets, list)
    bad = work / "bad.png"
    bad.write_bytes(b"not an image")
    assert run("infer", "-r", run_dir, "-i", bad, check=False).returncode == 2
    assert run("infer", "-r", run_dir, "-i", work / "missing.png", check=False).returncode == 2


def test_report(work, track1_run):
    run_dir, _ = track1_run
    run("report", "-r", run_dir, "--plots")
    report = json.loads((run_dir / "report.json").read_text())
    assert report["parameter_count"] > 0
    assert len(report["epochs"]) >= 1
    assert (run_dir / "loss_curve.svg").is_file()
    assert (run_dir / "val_curve.svg").is_file()
