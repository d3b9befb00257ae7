import io
import json
import subprocess
import sys

import pytest

from speechblend.cli import main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def manifest(tmp_path):
    path = tmp_path / "m.jsonl"
    rows = []
    for i in range(400):
        lang = ["en", "de"][i % 2]
        rows.append({"id": f"u{i}", "duration": 1 + (i * 7) % 30, "lang": lang,
                     "dataset": f"{lang}-{i % 3}", "text": "w " * 3, "pnc": bool(i % 2)})
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return path


def test_weights_from_hours():
    code, out = run("weights", "--stratify", "language", "--hours", "a=0.2", "--hours", "b=0.8")
    assert code == 0
    w = json.loads(out)["weights"]
    assert w["a"] == pytest.approx(1 / 3) and w["b"] == pytest.approx(2 / 3)


def test_weights_hierarchical_from_manifest(manifest):
    code, out = run("weights", str(manifest), "--alpha", "1")
    assert code == 0
    w = json.loads(out)["weights"]
    assert sum(w.values()) == pytest.approx(1)
    assert set(w) == {f"{lang}/{lang}-{k}" for lang in ("en", "de") for k in range(3)}


def test_weights_bad_alpha():
    assert run("weights", "--stratify", "language", "--hours", "a=1", "--alpha", "2")[0] == 1


def test_simulate_defaults_and_determinism(manifest):
    args = ("simulate", str(manifest), "--draws", "3000", "--seed", "4", "--buffer-size", "500")
    code, out = run(*args)
    assert code == 0
    r1 = json.loads(out)
    r2 = json.loads(run(*args)[1])
    r1.pop("wall_time"), r2.pop("wall_time")
    assert r1 == r2
    assert r1["draws"] == 3000 and sum(r1["empirical_frequencies"].values()) == pytest.approx(1, abs=1e-9)
    assert r1["config"]["num_buckets"] == 31 and r1["config"]["quadratic_duration"] == 20.0
    assert 0 <= r1["mean_padding_ratio"] <= 1


def test_simulate_usage_errors(manifest):
    assert run("simulate", str(manifest), "--draws", "0")[0] == 1
    assert run("simulate", str(manifest))[0] == 1  # infinite_repeat needs draws
    assert run("simulate", str(manifest), "--draws", "5", "--num-buckets", "0")[0] == 1
    assert run("simulate", "--synthetic", "10", "--draws", "5", "--dist", "gauss:1")[0] == 1
    assert run("simulate", "--draws", "5")[0] == 1
    assert run("simulate", str(manifest), "--draws", "5", "--bogus")[0] == 1


def test_simulate_data_errors(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "duration": -3, "lang": "en", "dataset": "x"}\n')
    assert run("simulate", str(bad), "--draws", "5")[0] == 2
    assert run("simulate", str(tmp_path / "missing.jsonl"), "--draws", "5")[0] == 2
    good_and_bad = tmp_path / "mixed.jsonl"
    good_and_bad.write_text('not json\n{"id": "a", "duration": 3, "lang": "en", "dataset": "x"}\n')
    assert run("simulate", str(good_and_bad), "--draws", "5", "--skip-invalid")[0] == 0


def test_simulate_single_pass_synthetic():
    code, out = run("simulate", "--synthetic", "5000", "--mode", "single_pass", "--synthetic-langs", "en,de,fr")
    assert code == 0
    r = json.loads(out)
    assert r["draws"] == 5000 and r["records_in_corpus"] == 5000
    assert r["oversize_singletons"] == 0


def test_sample_jsonl(manifest):
    code, out = run("sample", str(manifest), "--mode", "single_pass", "--ids-only", "--num-buckets", "4",
                    "--buffer-size", "100")
    assert code == 0
    lines = [json.loads(x) for x in out.splitlines()]
    ids = [i for b in lines for i in b["ids"]]
    assert sorted(ids) == sorted(f"u{i}" for i in range(400))
    assert all(b["total_effective_duration"] <= 360 or b["oversize"] for b in lines)
    code, out = run("sample", str(manifest), "--draws", "50", "--max-batches", "1")
    assert code == 0 and len(out.splitlines()) == 1
    assert "records" in json.loads(out)


def test_eval_wer(tmp_path):
    (tmp_path / "r.txt").write_text("Hello, world!\na b c\n")
    (tmp_path / "h.txt").write_text("hello world\na x c\n")
    code, out = run("eval", "wer", "--ref", str(tmp_path / "r.txt"), "--hyp", str(tmp_path / "h.txt"),
                    "--bootstrap", "200")
    assert code == 0
    r = json.loads(out)
    assert r["wer"] == pytest.approx(1 / 5) and r["substitutions"] == 1
    assert r["ci"]["lower"] <= r["wer"] <= r["ci"]["upper"]
    (tmp_path / "short.txt").write_text("one line\n")
    assert run("eval", "wer", "--ref", str(tmp_path / "r.txt"), "--hyp", str(tmp_path / "short.txt"))[0] == 2


def test_eval_bleu_halluc_stitch(tmp_path):
    (tmp_path / "r.txt").write_text("the cat sat on the mat .\n")
    code, out = run("eval", "bleu", "--ref", str(tmp_path / "r.txt"), "--hyp", str(tmp_path / "r.txt"))
    assert code == 0 and json.loads(out)["bleu"] == 100.0
    (tmp_path / "n.txt").write_text("x" * 300 + "\n" + "y" * 300 + "\n")
    code, out = run("eval", "halluc", "--hyp", str(tmp_path / "n.txt"), "--minutes", "5")
    assert json.loads(out)["chars_per_minute"] == 120.0
    (tmp_path / "s.txt").write_text("hello \n\n world\n")
    code, out = run("eval", "stitch", str(tmp_path / "s.txt"))
    assert json.loads(out)["text"] == "hello world"


def test_layout():
    code, out = run("layout")
    obj = json.loads(out)
    assert code == 0 and obj["vocab_size"] == 32 + 4 * 1024 and len(obj["special_vocab"]) == 32
    assert run("layout", "--languages", "en,en")[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "speechblend", "weights", "--stratify", "language",
                           "--hours", "x=1"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["weights"] == {"x": 1.0}
