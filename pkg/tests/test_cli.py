import csv
import math
import io
import json

import numpy as np
import pytest

from rbqe.cli import main
from rbqe.imagecore import Plane, load_plane, psnr, save_plane
from rbqe.iqam import IqamParams, assess
from rbqe.pipeline import stages_to_json, StageSpec

from conftest import jpeg_roundtrip


@pytest.fixture
def gray_pgm(tmp_path):
    path = tmp_path / "gray.pgm"
    save_plane(Plane.full(64, 64, 0.5), path, "pgm8")
    return path


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# assess


def test_assess_uniform_gray_scores_zero(capsys, gray_pgm):
    code, out, _ = run_cli(capsys, "assess", "--input", str(gray_pgm), "--codec", "JPEG")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == "1"
    assert doc["q"] == 0.0


def test_assess_missing_file(capsys, tmp_path):
    code, _, err = run_cli(capsys, "assess", "--input", str(tmp_path / "nope.pgm"))
    assert code == 2
    assert "error" in err


def test_assess_bad_params(capsys, gray_pgm):
    code, _, err = run_cli(
        capsys, "assess", "--input", str(gray_pgm), "--params", '{"alpha": 0.1, "beta": 0.9}'
    )
    assert code == 2


def test_assess_csv_and_determinism(capsys, gray_pgm):
    code1, out1, _ = run_cli(capsys, "assess", "--input", str(gray_pgm), "--csv")
    code2, out2, _ = run_cli(capsys, "assess", "--input", str(gray_pgm), "--csv")
    assert code1 == code2 == 0
    assert out1 == out2
    header = out1.splitlines()[0]
    assert header.startswith("schema_version,")


def test_assess_ranks_qf_ladder(capsys, tmp_path, corpus):
    raw = corpus[0]
    scores = {}
    for qf in (10, 90):
        path = tmp_path / f"img_qf{qf}.pgm"
        save_plane(jpeg_roundtrip(raw, qf), path, "pgm8")
        code, out, _ = run_cli(capsys, "assess", "--input", str(path), "--codec", "JPEG")
        assert code == 0
        scores[qf] = json.loads(out)["q"]
    assert scores[90] > scores[10]


# ---------------------------------------------------------------------------
# enhance


def write_stages(tmp_path, stages):
    path = tmp_path / "stages.json"
    path.write_text(stages_to_json(stages))
    return path


def test_enhance_threshold_extremes(capsys, tmp_path, corpus):
    comp = jpeg_roundtrip(corpus[1], 30)
    inp = tmp_path / "in.pgm"
    save_plane(comp, inp, "pgm8")
    stages = write_stages(
        tmp_path,
        [StageSpec(kind="deblock", strength=0.5, declared_cost=5.0),
         StageSpec(kind="deblock", strength=1.0, declared_cost=5.0)],
    )
    out_img = tmp_path / "out.pgm"

    code, out, _ = run_cli(
        capsys, "enhance", "--input", str(inp), "--codec", "JPEG",
        "--stages", str(stages), "--tq", "0", "--output", str(out_img),
    )
    assert code == 0
    assert json.loads(out)["chosen_exit"] == 1

    code, out, _ = run_cli(
        capsys, "enhance", "--input", str(inp), "--codec", "JPEG",
        "--stages", str(stages), "--tq", "2", "--output", str(out_img),
    )
    assert code == 0
    assert json.loads(out)["chosen_exit"] == 2

    trace_doc = json.loads((tmp_path / "out.trace.json").read_text())
    assert trace_doc["schema_version"] == "1"
    assert (tmp_path / "out.trace.csv").exists()
    assert load_plane(out_img).samples.shape == comp.samples.shape


def test_enhance_external_dir_matches_recomputed_scores(capsys, tmp_path, corpus):
    """The chosen exit must be the earliest whose file scores >= t_q."""
    raw = corpus[2]
    comp = jpeg_roundtrip(raw, 10)
    inp = tmp_path / "in.pgm"
    save_plane(comp, inp, "pgm8")
    exit_dir = tmp_path / "exits"
    exit_dir.mkdir()
    # candidate ladder of increasing quality: heavier JPEG to lighter
    for j, qf in zip(range(2, 6), (15, 25, 60, 90)):
        save_plane(jpeg_roundtrip(raw, qf), exit_dir / f"exit_{j}.pgm", "pgm16")
    stages = write_stages(
        tmp_path, [StageSpec(kind="external", dir=str(exit_dir)) for _ in range(4)]
    )
    t_q = 0.74
    out_img = tmp_path / "enh.pgm"
    code, out, _ = run_cli(
        capsys, "enhance", "--input", str(inp), "--codec", "JPEG",
        "--stages", str(stages), "--tq", str(t_q), "--output", str(out_img),
    )
    assert code == 0
    chosen = json.loads(out)["chosen_exit"]

    params = IqamParams.from_json(json.dumps({"codec": "JPEG", "t_q": t_q}))
    qs = [assess(load_plane(exit_dir / f"exit_{j}.pgm"), params).q for j in range(2, 6)]
    qualifying = [pos for pos, q in enumerate(qs[:-1], start=1) if q >= t_q]
    expected = qualifying[0] if qualifying else len(qs)
    assert chosen == expected


def test_enhance_bad_stage_config(capsys, tmp_path, gray_pgm):
    cfg = tmp_path / "stages.json"
    cfg.write_text('{"stages": [{"kind": "warp"}]}')
    code, _, err = run_cli(
        capsys, "enhance", "--input", str(gray_pgm), "--stages", str(cfg),
        "--output", str(tmp_path / "o.pgm"),
    )
    assert code == 2


# ---------------------------------------------------------------------------
# flops


def test_flops_toy_csv(capsys, tmp_path):
    arch = tmp_path / "arch.json"
    arch.write_text('{"levels": 2, "base_channels": 2, "input_channels": 1}')
    code, out, _ = run_cli(
        capsys, "flops", "--arch", str(arch), "--height", "4", "--width", "4", "--csv"
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[1][:3] == ["1", "2", "2866"]


def test_flops_all_exits_increase(capsys):
    code, out, _ = run_cli(capsys, "flops", "--height", "256", "--width", "256", "--csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))[1:]
    totals = [int(r[2]) for r in rows]
    assert totals == sorted(totals) and len(set(totals)) == len(totals)


def test_flops_default_table_has_reference(capsys):
    code, out, _ = run_cli(capsys, "flops")
    assert code == 0
    assert "reference comparison" in out
    assert "27.5" in out and "17.9" in out


def test_flops_json_and_nodes_csv(capsys, tmp_path):
    nodes = tmp_path / "nodes.csv"
    code, out, _ = run_cli(
        capsys, "flops", "--height", "64", "--width", "64", "--json",
        "--nodes-csv", str(nodes),
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["per_node"]["head2"] == 64 * 64 * 9 * 32
    rows = list(csv.reader(nodes.open()))
    assert rows[0] == ["schema_version", "node_id", "macs"]


def test_flops_errors(capsys):
    code, _, err = run_cli(capsys, "flops", "--height", "100", "--width", "100")
    assert code == 2
    code, _, err = run_cli(capsys, "flops", "--exit", "9")
    assert code == 2


# ---------------------------------------------------------------------------
# corpus


def test_corpus_generates_ladder(capsys, tmp_path, corpus):
    raw_dir = tmp_path / "raw"
    raw_dir.mkdir()
    for i in range(2):
        save_plane(corpus[i], raw_dir / f"img{i}.pgm", "pgm8")
    out_dir = tmp_path / "comp"
    manifest = tmp_path / "manifest.csv"
    code, out, _ = run_cli(
        capsys, "corpus", "--raw", str(raw_dir), "--qf", "10,50",
        "--out", str(out_dir), "--manifest", str(manifest),
    )
    assert code == 0
    rows = list(csv.DictReader(manifest.open()))
    assert len(rows) == 4
    # encoder property: lower QF must hurt PSNR, per image
    for i in range(2):
        raw = load_plane(raw_dir / f"img{i}.pgm")
        by_qf = {
            row["quality_label"]: load_plane(row["compressed_path"])
            for row in rows
            if row["raw_path"].endswith(f"img{i}.pgm")
        }
        assert psnr(by_qf["QF10"], raw) < psnr(by_qf["QF50"], raw)


def test_corpus_empty_dir(capsys, tmp_path):
    raw_dir = tmp_path / "empty"
    raw_dir.mkdir()
    code, _, err = run_cli(
        capsys, "corpus", "--raw", str(raw_dir), "--out", str(tmp_path / "o"),
        "--manifest", str(tmp_path / "m.csv"),
    )
    assert code == 2


def test_corpus_bad_qf(capsys, tmp_path, gray_pgm):
    raw_dir = gray_pgm.parent
    code, _, _ = run_cli(
        capsys, "corpus", "--raw", str(raw_dir), "--qf", "0,200",
        "--out", str(tmp_path / "o"), "--manifest", str(tmp_path / "m.csv"),
    )
    assert code == 2


# ---------------------------------------------------------------------------
# eval


def make_manifest(tmp_path, corpus, indices, qfs):
    raw_dir = tmp_path / "raws"
    comp_dir = tmp_path / "comps"
    raw_dir.mkdir(exist_ok=True)
    comp_dir.mkdir(exist_ok=True)
    manifest = tmp_path / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["schema_version", "raw_path", "compressed_path", "quality_label"])
        for idx in indices:
            raw_path = raw_dir / f"img{idx}.pgm"
            save_plane(corpus[idx], raw_path, "pgm8")
            for qf in qfs:
                comp_path = comp_dir / f"img{idx}_qf{qf}.pgm"
                save_plane(jpeg_roundtrip(corpus[idx], qf), comp_path, "pgm8")
                writer.writerow(["1", str(raw_path), str(comp_path), f"QF{qf}"])
    return manifest


def test_eval_rows_and_summary(capsys, tmp_path, corpus, monkeypatch):
    monkeypatch.setenv("RBQE_THREADS", "2")
    manifest = make_manifest(tmp_path, corpus, [0], [10, 50, 90])
    out_csv = tmp_path / "eval.csv"
    code, out, _ = run_cli(
        capsys, "eval", "--manifest", str(manifest), "--codec", "JPEG",
        "--out", str(out_csv),
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["rows"] == 3 and summary["warnings"] == 0
    assert summary["spearman_q_psnr"] > 0
    assert set(summary["per_label_means"]) == {"QF10", "QF50", "QF90"}
    rows = list(csv.DictReader(out_csv.open()))
    assert len(rows) == 3
    assert [r["quality_label"] for r in rows] == ["QF10", "QF50", "QF90"]


def test_eval_identity_pair_flags_infinite(capsys, tmp_path, corpus):
    raw_path = tmp_path / "same.pgm"
    save_plane(corpus[1], raw_path, "pgm8")
    manifest = tmp_path / "m.csv"
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["raw_path", "compressed_path", "quality_label"])
        writer.writerow([str(raw_path), str(raw_path), "identity"])
    out_csv = tmp_path / "eval.csv"
    code, out, _ = run_cli(
        capsys, "eval", "--manifest", str(manifest), "--codec", "JPEG",
        "--out", str(out_csv),
    )
    assert code == 0
    row = next(csv.DictReader(out_csv.open()))
    assert row["psnr"] == "inf"


def test_eval_skips_unreadable_rows(capsys, tmp_path, corpus):
    manifest = make_manifest(tmp_path, corpus, [0], [50])
    text = manifest.read_text().rstrip() + "\n1,/nonexistent.pgm,/nonexistent.pgm,QF50\n"
    manifest.write_text(text)
    code, out, err = run_cli(capsys, "eval", "--manifest", str(manifest), "--codec", "JPEG")
    assert code == 0
    summary = json.loads(out)
    assert summary["rows"] == 1 and summary["warnings"] == 1
    assert "skipping" in err


def test_eval_with_stages_fills_pipeline_columns(capsys, tmp_path, corpus):
    manifest = make_manifest(tmp_path, corpus, [2], [10])
    stages = tmp_path / "stages.json"
    stages.write_text(stages_to_json([
        StageSpec(kind="deblock", strength=0.5, declared_cost=7.0),
        StageSpec(kind="deblock", strength=1.0, declared_cost=9.0),
    ]))
    out_csv = tmp_path / "eval.csv"
    code, out, _ = run_cli(
        capsys, "eval", "--manifest", str(manifest), "--codec", "JPEG",
        "--stages", str(stages), "--out", str(out_csv),
    )
    assert code == 0
    row = next(csv.DictReader(out_csv.open()))
    assert row["chosen_exit"] != "" and row["macs"] != ""
    assert math.isfinite(float(row["delta_psnr"]))


def test_eval_bad_manifest(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    code, _, _ = run_cli(capsys, "eval", "--manifest", str(bad))
    assert code == 2
