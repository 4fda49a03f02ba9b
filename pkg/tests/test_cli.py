"""End-to-end command-line behavior, exit codes, and file outputs."""

import json

import numpy as np
import pytest

from vinemark import cli, harness, metrics, raster, swdetect


def _block(shape, r0, c0, h, w):
    mask = np.zeros(shape, bool)
    mask[r0 : r0 + h, c0 : c0 + w] = True
    return mask


TRUTH_MASK = _block((12, 12), 2, 2, 4, 4)


def _write_pair(tmp_path, name, pred_mask, truth_mask=TRUTH_MASK):
    pred = tmp_path / f"{name}_pred.pgm"
    truth = tmp_path / f"{name}_truth.pgm"
    raster.write_mask(pred, pred_mask)
    raster.write_mask(truth, truth_mask)
    return pred.name, truth.name


def _write_manifest(tmp_path, rows, name="manifest.csv"):
    manifest = tmp_path / name
    lines = ["image_id,prediction_path,truth_path"]
    lines += [",".join(row) for row in rows]
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def test_synth_writes_complete_corpus(tmp_path):
    out = tmp_path / "corpus"
    assert cli.main(["synth", "--out-dir", str(out), "--count", "5", "--seed", "3"]) == 0
    names = sorted(p.name for p in out.iterdir())
    expected = ["manifest.csv"]
    for i in range(5):
        expected += [f"scene_{i:04d}.json", f"scene_{i:04d}_pred.pgm", f"scene_{i:04d}_truth.pgm"]
    assert names == sorted(expected)
    rows = (out / "manifest.csv").read_text().strip().split("\n")
    assert rows[0] == "image_id,prediction_path,truth_path"
    assert len(rows) == 6


def test_synth_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["synth", "--out-dir", str(a), "--count", "4", "--seed", "9"])
    cli.main(["synth", "--out-dir", str(b), "--count", "4", "--seed", "9"])
    for path in sorted(a.iterdir()):
        assert path.read_bytes() == (b / path.name).read_bytes()


def test_synth_sidecar_structure(tmp_path):
    out = tmp_path / "corpus"
    cli.main(["synth", "--out-dir", str(out), "--count", "1", "--seed", "0"])
    sidecar = json.loads((out / "scene_0000.json").read_text())
    assert set(sidecar) == {"image_id", "scene", "expected", "evaluation"}
    assert sidecar["scene"]["bud"]["shape"] in ("disk", "ellipse", "rectangle")
    assert sidecar["evaluation"]["alpha"] == 0.5
    truth = raster.load_mask(out / "scene_0000_truth.pgm")
    assert truth.sum() == sidecar["evaluation"]["truth_area"]


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def test_eval_perfect_image(tmp_path, capsys):
    pred, truth = _write_pair(tmp_path, "a", TRUTH_MASK)
    manifest = _write_manifest(tmp_path, [("a", pred, truth)])
    code = cli.main(["eval", "--manifest", str(manifest), "--tau", "0.5"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["command"] == "eval"
    assert report["config"]["tau"] == 0.5
    assert report["config"]["alpha"] == 0.5
    assert report["summary"]["p_d"] == 1.0
    assert report["summary"]["r_d"] == 1.0
    assert report["summary"]["f1"] == 1.0
    (image,) = report["images"]
    assert not image["missed"]
    (component,) = image["components"]
    assert component["category"] == "true_positive"
    assert component["iou"] == 1.0
    assert report["errors"] == []


def test_eval_report_matches_synth_sidecars(tmp_path):
    corpus = tmp_path / "corpus"
    cli.main(["synth", "--out-dir", str(corpus), "--count", "20", "--seed", "0"])
    out = tmp_path / "report.json"
    code = cli.main(
        ["eval", "--manifest", str(corpus / "manifest.csv"), "--tau", "0.5", "--out", str(out)]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert len(report["images"]) == 20
    for image in report["images"]:
        sidecar = json.loads((corpus / f"{image['image_id']}.json").read_text())
        assert image == sidecar["evaluation"]


def test_eval_partial_failure_keeps_going(tmp_path, capsys):
    pred, truth = _write_pair(tmp_path, "a", TRUTH_MASK)
    manifest = _write_manifest(tmp_path, [("a", pred, truth), ("ghost", "missing.pgm", truth)])
    code = cli.main(["eval", "--manifest", str(manifest), "--tau", "0.5"])
    assert code == 1
    report = json.loads(capsys.readouterr().out)
    assert [e["image_id"] for e in report["errors"]] == ["ghost"]
    assert len(report["images"]) == 1
    assert report["summary"]["n_images"] == 1


def test_eval_unreadable_manifest_exits_2(tmp_path, capsys):
    code = cli.main(["eval", "--manifest", str(tmp_path / "nope.csv"), "--tau", "0.5"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_eval_jobs_env_fallback(tmp_path, monkeypatch, capsys):
    pred, truth = _write_pair(tmp_path, "a", TRUTH_MASK)
    manifest = _write_manifest(tmp_path, [("a", pred, truth)])
    monkeypatch.setenv("VINEMARK_JOBS", "2")
    assert cli.main(["eval", "--manifest", str(manifest), "--tau", "0.5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["summary"]["p_d"] == 1.0
    monkeypatch.setenv("VINEMARK_JOBS", "zero")
    assert cli.main(["eval", "--manifest", str(manifest), "--tau", "0.5"]) == 2


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sw_corpus(tmp_path):
    votes_a = np.zeros((12, 12), np.uint8)
    votes_a[TRUTH_MASK] = 4
    votes_b = np.zeros((12, 12), np.uint8)
    votes_b[TRUTH_MASK] = 2
    rows = []
    for name, votes in (("a", votes_a), ("b", votes_b)):
        vote_path = tmp_path / f"{name}_votes.pgm"
        truth_path = tmp_path / f"{name}_truth.pgm"
        raster.write_pgm(vote_path, votes)
        raster.write_mask(truth_path, TRUTH_MASK)
        rows.append((name, vote_path.name, truth_path.name))
    return _write_manifest(tmp_path, rows, name="sw_manifest.csv")


def test_sweep_json_covers_both_families(tmp_path, capsys):
    pred, truth = _write_pair(tmp_path, "a", TRUTH_MASK)
    fcn_manifest = _write_manifest(tmp_path, [("a", pred, truth)], name="fcn_manifest.csv")
    sw_manifest = _sw_corpus(tmp_path)
    code = cli.main(
        [
            "sweep",
            "--fcn-manifest", f"8s={fcn_manifest}",
            "--sw-manifest", f"100={sw_manifest}",
            "--tau", "0.3", "0.7",
            "--nu", "1", "4",
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    labels = [s["label"] for s in payload["summaries"]]
    assert labels == ["FCN_8s^0.3", "FCN_8s^0.7", "SW_100^1", "SW_100^4"]
    assert len(payload["best_per_metric"]) == len(harness.COLUMNS)
    by_label = {s["label"]: s for s in payload["summaries"]}
    assert by_label["FCN_8s^0.3"]["p_d"] == 1.0
    assert by_label["SW_100^4"]["r_d"] == 0.5  # the nu=4 pass misses image b
    assert by_label["SW_100^4"]["p_d"] == 1.0  # ...without adding false alarms
    assert by_label["SW_100^1"]["r_d"] == 1.0


def test_sweep_markdown_format(tmp_path, capsys):
    pred, truth = _write_pair(tmp_path, "a", TRUTH_MASK)
    manifest = _write_manifest(tmp_path, [("a", pred, truth)])
    code = cli.main(
        ["sweep", "--fcn-manifest", f"8s={manifest}", "--tau", "0.5", "--format", "markdown"]
    )
    assert code == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0].startswith("| Detector | P_D | R_D | F1 | S |")
    assert lines[2].startswith("| FCN_8s^0.5 |")


def test_sweep_csv_format(tmp_path):
    pred, truth = _write_pair(tmp_path, "a", TRUTH_MASK)
    manifest = _write_manifest(tmp_path, [("a", pred, truth)])
    out = tmp_path / "sweep.csv"
    code = cli.main(
        ["sweep", "--fcn-manifest", f"8s={manifest}", "--tau", "0.5", "--format", "csv", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "detector," + ",".join(key for key, _, _ in harness.COLUMNS)
    assert lines[1].startswith("FCN_8s^0.5,100.0,")


def test_sweep_without_manifests_exits_2(capsys):
    assert cli.main(["sweep"]) == 2
    assert "error:" in capsys.readouterr().err


def test_sweep_rejects_malformed_manifest_flag(capsys):
    assert cli.main(["sweep", "--fcn-manifest", "no-equals-sign"]) == 2
    assert "LABEL=PATH" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sw
# ---------------------------------------------------------------------------


def _image_and_truth(tmp_path):
    image_path = tmp_path / "image.pgm"
    truth_path = tmp_path / "truth.pgm"
    raster.write_pgm(image_path, np.zeros((16, 16), np.uint8))
    raster.write_mask(truth_path, _block((16, 16), 4, 4, 6, 6))
    return image_path, truth_path


def test_sw_constant_negative_writes_empty_mask(tmp_path):
    image_path, _ = _image_and_truth(tmp_path)
    out = tmp_path / "mask.pgm"
    code = cli.main(
        ["sw", str(image_path), "--size", "4", "--nu", "1", "--constant", "0", "--out", str(out)]
    )
    assert code == 0
    assert not raster.load_mask(out).any()


def test_sw_oracle_nu_nesting(tmp_path):
    image_path, truth_path = _image_and_truth(tmp_path)
    masks = {}
    for nu in (1, 4):
        out = tmp_path / f"mask_{nu}.pgm"
        code = cli.main(
            [
                "sw", str(image_path),
                "--size", "4",
                "--nu", str(nu),
                "--oracle", str(truth_path),
                "--out", str(out),
            ]
        )
        assert code == 0
        masks[nu] = raster.load_mask(out)
    assert not (masks[4] & ~masks[1]).any()
    assert masks[1].any()


def test_sw_mask_matches_library_path(tmp_path):
    image_path, truth_path = _image_and_truth(tmp_path)
    out = tmp_path / "mask.pgm"
    cli.main(
        [
            "sw", str(image_path),
            "--size", "4",
            "--nu", "2",
            "--oracle", str(truth_path),
            "--out", str(out),
        ]
    )
    truth = raster.load_mask(truth_path)
    direct = swdetect.run_detector(
        np.zeros((16, 16)), swdetect.OracleClassifier(truth), 4, 2
    )
    assert np.array_equal(raster.load_mask(out), direct)


def test_sw_votes_out_matches_patch_counts(tmp_path):
    image_path, _ = _image_and_truth(tmp_path)
    out = tmp_path / "mask.pgm"
    votes_out = tmp_path / "votes.pgm"
    cli.main(
        [
            "sw", str(image_path),
            "--size", "4",
            "--nu", "1",
            "--constant", "1",
            "--out", str(out),
            "--votes-out", str(votes_out),
        ]
    )
    votes = raster.load_votes(votes_out)
    expected = np.zeros((16, 16), np.int64)
    for r, c, s in swdetect.build_grid(16, 16, 4).patches:
        expected[r : r + s, c : c + s] += 1
    assert np.array_equal(votes, expected)
    assert raster.load_mask(out).all()


def test_sw_labels_warns_about_missing_patches(tmp_path, capsys):
    image_path, _ = _image_and_truth(tmp_path)
    labels = tmp_path / "labels.csv"
    labels.write_text("row,col,size,label\n0,0,4,1\n")
    out = tmp_path / "mask.pgm"
    code = cli.main(
        ["sw", str(image_path), "--size", "4", "--nu", "1", "--labels", str(labels), "--out", str(out)]
    )
    assert code == 0
    assert "warning:" in capsys.readouterr().err
    mask = raster.load_mask(out)
    assert mask[:4, :4].all()
    assert mask.sum() == 16  # only the one labeled patch votes


def test_sw_oracle_shape_mismatch_exits_2(tmp_path, capsys):
    image_path, _ = _image_and_truth(tmp_path)
    bad_truth = tmp_path / "bad_truth.pgm"
    raster.write_mask(bad_truth, _block((8, 8), 2, 2, 2, 2))
    code = cli.main(
        [
            "sw", str(image_path),
            "--size", "4",
            "--nu", "1",
            "--oracle", str(bad_truth),
            "--out", str(tmp_path / "m.pgm"),
        ]
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _summaries_file(tmp_path):
    evals = []
    for name, mask in (("a", TRUTH_MASK), ("b", _block((12, 12), 2, 2, 2, 2))):
        truth = raster.GroundTruth.from_mask(TRUTH_MASK)
        comps = raster.connected_components(mask)
        evals.append(metrics.classify_components(comps, truth, alpha=0.5, image_id=name))
    summaries = [
        harness.summarize(harness.DetectorSpec(harness.FCN, "8s", 0.4), evals),
        harness.summarize(harness.DetectorSpec(harness.FCN, "8s", 0.6), evals[:1]),
    ]
    path = tmp_path / "summaries.json"
    path.write_text(harness.dump_summaries(summaries))
    return path, summaries


def test_report_writes_all_outputs(tmp_path):
    path, summaries = _summaries_file(tmp_path)
    out_dir = tmp_path / "report"
    assert cli.main(["report", "--summaries", str(path), "--out-dir", str(out_dir)]) == 0
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == [
        "best_per_metric.json",
        "histogram_na.csv",
        "histogram_nd.csv",
        "scatter_detection-pr.csv",
        "scatter_seg-pr-split.csv",
        "scatter_seg-pr-tp.csv",
        "table.md",
    ]
    for kind in harness.SCATTER_KINDS:
        lines = (out_dir / f"scatter_{kind}.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + len(summaries)
    table = (out_dir / "table.md").read_text()
    assert table.startswith("| Detector |")
    best = json.loads((out_dir / "best_per_metric.json").read_text())
    assert [sel["metric"] for sel in best] == [key for key, _, _ in harness.COLUMNS]


def test_report_scatter_subset(tmp_path):
    path, _ = _summaries_file(tmp_path)
    out_dir = tmp_path / "report"
    code = cli.main(
        [
            "report",
            "--summaries", str(path),
            "--out-dir", str(out_dir),
            "--scatter", "detection-pr",
            "--histogram",
        ]
    )
    assert code == 0
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["best_per_metric.json", "scatter_detection-pr.csv", "table.md"]


def test_report_empty_summaries_exits_2(tmp_path, capsys):
    path = tmp_path / "empty.json"
    path.write_text("[]\n")
    assert cli.main(["report", "--summaries", str(path), "--out-dir", str(tmp_path / "r")]) == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# vars
# ---------------------------------------------------------------------------


def test_vars_explicit_inputs(tmp_path):
    out = tmp_path / "vars.json"
    code = cli.main(
        [
            "vars",
            "--p-d", "0.886",
            "--r-d", "0.886",
            "--na-mean", "0.08",
            "--p-s-tp", "0.928",
            "--p-s-split", "0.893",
            "--nd-mean", "1.1",
            "--out", str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["bud_count"]["excess"] == pytest.approx(27.36, abs=0.01)
    assert payload["bud_count"]["omitted"] == pytest.approx(27.36, abs=0.01)
    assert payload["area"]["fpx"] == pytest.approx(0.259, abs=0.0005)
    assert payload["internode"]["relative_error"] == pytest.approx(0.0733, abs=0.0005)
    assert payload["assumptions"]["buds_per_plant"] == 240.0


def test_vars_reads_summary_row(tmp_path, capsys):
    path, summaries = _summaries_file(tmp_path)
    code = cli.main(["vars", "--summaries", str(path), "--label", "FCN_8s^0.4"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["inputs"]["p_d"] == summaries[0].p_d
    assert payload["inputs"]["p_s_tp"] == summaries[0].tp_stats.precision.mean
    assert "bud_count" in payload


def test_vars_zero_precision_yields_error_section(capsys):
    code = cli.main(["vars", "--p-d", "0", "--r-d", "0.5"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert "error" in payload["bud_count"]
    assert "area" not in payload
    assert "internode" not in payload


def test_vars_summaries_requires_label(tmp_path, capsys):
    path, _ = _summaries_file(tmp_path)
    assert cli.main(["vars", "--summaries", str(path)]) == 2
    assert "--label" in capsys.readouterr().err


def test_vars_unknown_label_exits_2(tmp_path, capsys):
    path, _ = _summaries_file(tmp_path)
    assert cli.main(["vars", "--summaries", str(path), "--label", "FCN_x^0.9"]) == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------


def test_main_without_subcommand_raises_usage():
    with pytest.raises(SystemExit) as excinfo:
        cli.main([])
    assert excinfo.value.code == 2


def test_eval_rejects_bad_jobs(tmp_path, capsys):
    pred, truth = _write_pair(tmp_path, "a", TRUTH_MASK)
    manifest = _write_manifest(tmp_path, [("a", pred, truth)])
    assert cli.main(["eval", "--manifest", str(manifest), "--tau", "0.5", "--jobs", "0"]) == 2
    assert "error:" in capsys.readouterr().err
