import os
import re

import numpy as np
import pytest

from stripepaint.cli import main, parse_bucket
from stripepaint.errors import ConfigError
from stripepaint.imageops import Image, Mask, load_image, load_mask, save_image, save_mask


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("imgs")
    rng = np.random.default_rng(1)
    for i in range(3):
        save_image(Image(rng.uniform(0, 1, (16, 16, 3)).astype(np.float32)),
                   str(d / f"im{i}.png"))
    return str(d)


def write_cfg(path, corpus, out_dir, **over):
    lines = {
        "train_dir": corpus,
        "out_dir": out_dir,
        "image_size": 16,
        "batch_size": 2,
        "steps": 2,
        "seed": 5,
        "checkpoint_every": 1,
        "model.encoder_channels": "8,12,16",
        "model.branch_channels": 8,
        "model.heads": "2,2,2,2",
        "model.sw": "1,1,1,2",
        "model.repeats": "1,1,1,1",
        "model.rrdb_units": 1,
        "model.rdb_growth": 4,
        "model.disc_channels": "8,12,16,24",
    }
    lines.update(over)
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
    return str(path)


@pytest.fixture(scope="module")
def trained(tmp_path_factory, corpus):
    """A one-step training run shared by the inpaint tests."""
    d = tmp_path_factory.mktemp("trained")
    cfg = write_cfg(d / "run.cfg", corpus, str(d / "out"), steps=1)
    assert main(["train", "--config", cfg]) == 0
    return os.path.join(str(d / "out"), "latest.ckpt")


# ---------------------------------------------------------------------------
# argument plumbing

def test_help_exits_zero():
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0


def test_missing_arguments_one_line_error(capsys):
    assert main(["inpaint"]) == 2
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("error: arguments:")


def test_unknown_command_one_line_error(capsys):
    assert main(["polish"]) == 2
    assert capsys.readouterr().err.startswith("error: arguments:")


@pytest.mark.parametrize("spec,want", [
    ("30-40", (0.30, 0.40)),
    ("0.3-0.4", (0.3, 0.4)),
    ("5-10", (0.05, 0.10)),
])
def test_parse_bucket(spec, want):
    lo, hi = parse_bucket(spec)
    assert np.isclose(lo, want[0]) and np.isclose(hi, want[1])


@pytest.mark.parametrize("spec", ["30", "a-b", "40-30", "0-50", "30-140"])
def test_parse_bucket_rejects(spec):
    with pytest.raises(ConfigError):
        parse_bucket(spec)


# ---------------------------------------------------------------------------
# genmasks

def test_genmasks_writes_verifiable_masks(tmp_path, capsys):
    out = str(tmp_path / "masks")
    argv = ["genmasks", "--n", "3", "--size", "32", "--bucket", "20-30",
            "--seed", "9", "--out", out]
    assert main(argv) == 0
    capsys.readouterr()
    names = sorted(os.listdir(out))
    assert len(names) == 3
    for name in names:
        frac_token = re.search(r"_f(0\.\d{6})\.png$", name)
        assert frac_token, name
        stated = float(frac_token.group(1))
        measured = load_mask(os.path.join(out, name)).hole_fraction
        assert abs(stated - measured) < 1e-6
        assert 0.20 <= measured < 0.30
        assert f"seed9" in name

    before = {n: open(os.path.join(out, n), "rb").read() for n in names}
    assert main(argv) == 0
    for n in names:
        assert open(os.path.join(out, n), "rb").read() == before[n]


def test_genmasks_rejects_bad_bucket(tmp_path, capsys):
    rc = main(["genmasks", "--n", "1", "--size", "32", "--bucket", "oops",
               "--seed", "1", "--out", str(tmp_path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("error: ConfigError:")


# ---------------------------------------------------------------------------
# train

def test_train_command(tmp_path, corpus, capsys):
    cfg = write_cfg(tmp_path / "run.cfg", corpus, str(tmp_path / "out"))
    assert main(["train", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "step=1," in out and "step=2," in out
    assert "checkpoint=" in out
    assert os.path.exists(os.path.join(str(tmp_path / "out"), "latest.ckpt"))
    assert os.path.exists(os.path.join(str(tmp_path / "out"), "train.log"))


def test_train_missing_config(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "nope.cfg")]) == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "ConfigError" in err


def test_train_bad_train_dir(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "run.cfg", str(tmp_path / "absent"),
                    str(tmp_path / "out"))
    assert main(["train", "--config", cfg]) == 1
    assert "train_dir does not exist" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# inpaint

def test_inpaint_zero_mask_is_identity(tmp_path, trained, capsys):
    rng = np.random.default_rng(7)
    img_path = str(tmp_path / "in.png")
    save_image(Image(rng.uniform(0, 1, (16, 16, 3)).astype(np.float32)),
               img_path)
    mask_path = str(tmp_path / "zero.png")
    save_mask(Mask(np.zeros((16, 16), dtype=np.float32)), mask_path)
    out_path = str(tmp_path / "out.png")

    assert main(["inpaint", "--ckpt", trained, "--image", img_path,
                 "--mask", mask_path, "--out", out_path]) == 0
    capsys.readouterr()
    assert np.array_equal(load_image(out_path).data, load_image(img_path).data)
    assert open(out_path, "rb").read() == open(img_path, "rb").read()


def test_inpaint_fills_holes_deterministically(tmp_path, trained, capsys):
    rng = np.random.default_rng(8)
    img = Image(rng.uniform(0, 1, (16, 16, 3)).astype(np.float32))
    img_path = str(tmp_path / "in.png")
    save_image(img, img_path)
    hole = np.zeros((16, 16), dtype=np.float32)
    hole[4:12, 4:12] = 1.0
    mask_path = str(tmp_path / "m.png")
    save_mask(Mask(hole), mask_path)
    out_path = str(tmp_path / "out.png")

    argv = ["inpaint", "--ckpt", trained, "--image", img_path,
            "--mask", mask_path, "--out", out_path, "--gt", img_path]
    assert main(argv) == 0
    out_lines = capsys.readouterr().out.splitlines()
    assert any(line.startswith("psnr=") for line in out_lines)

    result = load_image(out_path).data
    stored = load_image(img_path).data            # u8 round trip of the input
    known = hole == 0.0
    assert np.array_equal(result[known], stored[known])
    assert not np.array_equal(result, stored)     # holes were filled

    first = open(out_path, "rb").read()
    assert main(argv) == 0
    capsys.readouterr()
    assert open(out_path, "rb").read() == first


def test_inpaint_size_mismatch_names_expected(tmp_path, trained, capsys):
    rng = np.random.default_rng(9)
    img_path = str(tmp_path / "big.png")
    save_image(Image(rng.uniform(0, 1, (32, 32, 3)).astype(np.float32)),
               img_path)
    mask_path = str(tmp_path / "m.png")
    save_mask(Mask(np.zeros((32, 32), dtype=np.float32)), mask_path)
    rc = main(["inpaint", "--ckpt", trained, "--image", img_path,
               "--mask", mask_path, "--out", str(tmp_path / "o.png")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "16x16" in err and err.startswith("error: ShapeError:")


def test_inpaint_missing_checkpoint(tmp_path, capsys):
    rc = main(["inpaint", "--ckpt", str(tmp_path / "no.ckpt"),
               "--image", "x.png", "--mask", "y.png",
               "--out", str(tmp_path / "o.png")])
    assert rc == 1
    assert "CheckpointError" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# eval

def test_eval_command(tmp_path, capsys):
    rng = np.random.default_rng(10)
    for sub in ("out", "gt", "masks"):
        os.makedirs(tmp_path / sub)
    for i in range(2):
        img = Image(rng.uniform(0, 1, (16, 16, 3)).astype(np.float32))
        save_image(img, str(tmp_path / "gt" / f"i{i}.png"))
        save_image(img, str(tmp_path / "out" / f"i{i}.png"))
        m = np.zeros(256, dtype=np.float32)
        m[:95] = 1.0
        save_mask(Mask(m.reshape(16, 16)), str(tmp_path / "masks" / f"i{i}.png"))

    rc = main(["eval", "--out", str(tmp_path / "out"),
               "--gt", str(tmp_path / "gt"), "--masks", str(tmp_path / "masks")])
    assert rc == 0
    assert "30%~40%" in capsys.readouterr().out
    assert os.path.exists(tmp_path / "out" / "report.txt")
    csv = open(tmp_path / "out" / "report.csv").read().splitlines()
    assert csv[0] == "name,bucket,hole_fraction,psnr,ssim"
    assert len(csv) == 3


def test_eval_empty_corpus(tmp_path, capsys):
    for sub in ("out", "gt", "masks"):
        os.makedirs(tmp_path / sub)
    rc = main(["eval", "--out", str(tmp_path / "out"),
               "--gt", str(tmp_path / "gt"), "--masks", str(tmp_path / "masks")])
    assert rc == 1
    assert "ParameterError" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# ablate

def test_ablate_command(tmp_path, corpus, capsys):
    out_dir = str(tmp_path / "ab")
    cfg = write_cfg(tmp_path / "run.cfg", corpus, out_dir, steps=1)
    rc = main(["ablate", "--config", cfg, "--variants", "ours,no-hsv"])
    assert rc == 0
    out = capsys.readouterr().out
    lines = [ln for ln in out.splitlines() if ln and not ln.startswith("step=")]
    variant_rows = [ln.split()[0] for ln in lines
                    if ln.split() and ln.split()[0] in ("ours", "no-hsv")]
    assert variant_rows == ["no-hsv", "ours"]     # canonical comparison order

    csv = open(os.path.join(out_dir, "ablation.csv")).read().splitlines()
    assert csv[0] == "variant,psnr,ssim,hue_mae"
    assert [row.split(",")[0] for row in csv[1:]] == ["no-hsv", "ours"]

    log_a = open(os.path.join(out_dir, "no-hsv", "train.log")).read()
    log_b = open(os.path.join(out_dir, "ours", "train.log")).read()
    assert log_a != log_b                          # distinct loss traces


def test_ablate_unknown_variant(tmp_path, corpus, capsys):
    cfg = write_cfg(tmp_path / "run.cfg", corpus, str(tmp_path / "ab"))
    rc = main(["ablate", "--config", cfg, "--variants", "ours,wat"])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error: ConfigError:") and "wat" in err
