"""End-to-end checks of the command-line tool.

ctest points PDFOLD_CLI at the built binary; the tests drive a miniature
train/predict/convert/eval/oracle-check workflow in a temp directory.
"""

import json
import os
import subprocess
import textwrap

import pytest

CLI = os.environ.get("PDFOLD_CLI")

pytestmark = pytest.mark.skipif(CLI is None, reason="PDFOLD_CLI not set")


def run(*args, expect=0):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    assert proc.returncode == expect, (proc.stdout, proc.stderr)
    return proc


HAIRPIN_CT = textwrap.dedent(
    """\
    12 hp
    1 G 0 2 12 1
    2 G 1 3 11 2
    3 G 2 4 10 3
    4 A 3 5 0 4
    5 A 4 6 0 5
    6 A 5 7 0 6
    7 A 6 8 0 7
    8 A 7 9 0 8
    9 A 8 10 0 9
    10 C 9 11 3 10
    11 C 10 12 2 11
    12 C 11 0 1 12
    """
)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data" / "hairpin"
    data.mkdir(parents=True)
    import random

    rng = random.Random(5)
    comp = {"A": "U", "U": "A", "C": "G", "G": "C"}
    for k in range(30):
        stem, loop = rng.randint(4, 7), rng.randint(4, 7)
        left = [rng.choice("AUCG") for _ in range(stem)]
        mid = [rng.choice("AUCG") for _ in range(loop)]
        seq = left + mid + [comp[b] for b in reversed(left)]
        n = len(seq)
        partner = [0] * (n + 1)
        for i in range(stem):
            partner[i + 1] = n - i
            partner[n - i] = i + 1
        lines = [f"{n} hp{k}"]
        for i in range(1, n + 1):
            lines.append(f"{i} {seq[i - 1]} {i - 1} {(i + 1) % (n + 1)} {partner[i]} {i}")
        (data / f"hp{k}.ct").write_text("\n".join(lines) + "\n")

    config = root / "train.json"
    config.write_text(
        json.dumps(
            {
                "train": {
                    "epochs_pretrain": 15,
                    "epochs_finetune": 2,
                    "batch_size": 4,
                    "learning_rate": 0.003,
                    "max_len": 40,
                    "score": {
                        "d": 6,
                        "encoder_layers": 1,
                        "heads": 2,
                        "ff_width": 16,
                        "init_seed": 5,
                    },
                    "pp": {"unroll_depth": 8},
                }
            }
        )
    )
    model = root / "model.json"
    run("--seed", 5, "--config", config, "train", "--data", root / "data", "--out", model)
    return root, model


def test_train_writes_checkpoint_and_log(workspace):
    root, model = workspace
    assert model.exists()
    assert (root / "model.json.log").exists()
    content = json.loads(model.read_text())
    assert content["format"] == "pdfold-checkpoint"
    assert content["base_order"] == "AUCG"
    assert "train_config" in content


def test_predict_and_formats(workspace):
    root, model = workspace
    fasta = root / "in.fasta"
    fasta.write_text(">h1\nGGGCGCAAAAGCGCCC\n")
    out = root / "preds"
    proc = run("predict", fasta, "--model", model, "--out", out, "--out-format", "ct", "--svg")
    assert "h1" in proc.stdout
    assert (out / "h1.ct").exists()
    assert (out / "h1.svg").exists()
    assert "config: subcommand=predict" in proc.stderr

    # classic decoding also emits a file
    run("predict", fasta, "--model", model, "--out", root / "preds2", "--classic",
        "--out-format", "dbn")
    assert (root / "preds2" / "h1.dbn").exists()


def test_predict_exit_codes(workspace):
    root, model = workspace
    fasta = root / "in2.fasta"
    fasta.write_text(">h1\nGGGGAAAACCCC\n")
    run("predict", fasta, "--model", root / "nope.json", expect=2)

    bad = root / "bad.fasta"
    bad.write_text("no header line\n")
    run("predict", bad, "--model", model, expect=3)

    empty = root / "empty.fasta"
    empty.write_text("")
    proc = run("predict", empty, "--model", model, expect=0)
    assert "warning" in proc.stderr


def test_convert_round_trip(workspace):
    root, _ = workspace
    src = root / "hp.ct"
    src.write_text(HAIRPIN_CT)
    bpseq = root / "hp.bpseq"
    run("convert", src, "--to", "bpseq", "--out", bpseq)
    back = root / "hp2.ct"
    run("convert", bpseq, "--to", "ct", "--out", back)
    orig_pairs = [l.split()[4] for l in HAIRPIN_CT.splitlines()[1:]]
    new_pairs = [l.split()[4] for l in back.read_text().splitlines()[1:]]
    assert orig_pairs == new_pairs

    proc = run("convert", src, "--to", "dbn")
    assert "(((......)))" in proc.stdout


def test_eval_perfect_predictions(workspace):
    root, _ = workspace
    pred = root / "eval_pred"
    truth = root / "eval_truth"
    pred.mkdir()
    truth.mkdir()
    (pred / "hp.ct").write_text(HAIRPIN_CT)
    (truth / "hp.ct").write_text(HAIRPIN_CT)
    proc = run("eval", "--pred", pred, "--truth", truth, "--records", root / "records.txt")
    assert "1.000" in proc.stdout
    records = (root / "records.txt").read_text()
    assert "f1=1" in records


def test_oracle_check(workspace):
    proc = run("--seed", 7, "oracle-check", "--trials", 25, "--max-len", 10)
    assert "pass_rate=" in proc.stdout
