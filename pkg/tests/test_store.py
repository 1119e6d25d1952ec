from __future__ import annotations

import json

import numpy as np
import pytest

from driftscope.errors import (
    DuplicateKey,
    EpochGap,
    SchemaViolation,
    TokenMismatch,
)
from driftscope.store import (
    AttributionRecord,
    RunManifest,
    analyze_dump,
    bundle_to_dict,
    format_report,
    read_manifest,
    read_records,
    write_manifest,
    write_records,
    write_report_bundle,
)
from driftscope.toylab import run_experiment, shortcut_task_config

from .oracles import brute_force_spearman


def random_record(rng, run_id="r", epoch=1, example_id="x") -> AttributionRecord:
    n = int(rng.integers(1, 20))
    return AttributionRecord(
        run_id=run_id,
        epoch=epoch,
        example_id=example_id,
        split="probe" if rng.random() < 0.5 else "spur_probe",
        label="pos" if rng.random() < 0.5 else "neg",
        tokens=tuple(int(t) for t in rng.integers(0, 100, size=n)),
        attributions=tuple(float(v) for v in rng.normal(size=n) * 10.0 ** rng.integers(-12, 12)),
        mask=tuple(bool(b) for b in rng.random(size=n) < 0.9) if rng.random() < 0.3 else None,
    )


@pytest.fixture(scope="module")
def shortcut_dump(tmp_path_factory):
    out = tmp_path_factory.mktemp("dump")
    task = shortcut_task_config(num_train=512, num_val=128, probe_size=24, spur_probe_size=12)
    result = run_experiment(task, epochs=5, seeds=[0], out_dir=out, run_prefix="sc")
    run_dir = out / result.runs[0].run_id
    return result.runs[0], run_dir / "records.ndjson", run_dir / "manifest.json", run_dir


class TestRecordsRoundTrip:
    def test_thousand_random_records(self, tmp_path, rng):
        records = [
            random_record(rng, run_id=f"run{i % 3}", epoch=1 + i % 7, example_id=f"ex{i}")
            for i in range(1000)
        ]
        path = tmp_path / "records.ndjson"
        assert write_records(records, path) == 1000
        loaded = list(read_records(path))
        assert loaded == records

    def test_empty_file_is_empty_stream(self, tmp_path):
        path = tmp_path / "empty.ndjson"
        path.write_text("")
        assert list(read_records(path)) == []

    def test_mismatched_lengths_name_the_record(self):
        with pytest.raises(SchemaViolation, match="r, 1, x"):
            AttributionRecord(
                run_id="r", epoch=1, example_id="x", split="probe", label="pos",
                tokens=(1, 2, 3), attributions=(0.5, 0.5),
            )

    def test_bad_json_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.ndjson"
        good = json.dumps(
            {"run_id": "r", "epoch": 1, "example_id": "a", "split": "probe",
             "label": "pos", "tokens": [1], "attributions": [0.5]}
        )
        path.write_text(good + "\n{oops\n")
        with pytest.raises(SchemaViolation, match="line 2"):
            list(read_records(path))

    @pytest.mark.parametrize(
        "patch, message",
        [
            ({"epoch": "one"}, "epoch"),
            ({"split": "test"}, "split"),
            ({"tokens": [1.5]}, "tokens"),
            ({"attributions": [float("nan")]}, "attributions"),
            ({"attributions": None}, "attributions"),
            ({"mask": [1, 0]}, "mask"),
        ],
    )
    def test_field_violations(self, tmp_path, patch, message):
        obj = {"run_id": "r", "epoch": 1, "example_id": "a", "split": "probe",
               "label": "pos", "tokens": [1, 2], "attributions": [0.5, 0.25]}
        obj.update(patch)
        path = tmp_path / "bad.ndjson"
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(SchemaViolation, match=message):
            list(read_records(path))

    def test_duplicate_key_detected_on_read(self, tmp_path):
        obj = {"run_id": "r", "epoch": 1, "example_id": "a", "split": "probe",
               "label": "pos", "tokens": [1], "attributions": [0.5]}
        path = tmp_path / "dup.ndjson"
        path.write_text(json.dumps(obj) + "\n" + json.dumps(obj) + "\n")
        with pytest.raises(DuplicateKey, match="line 2"):
            list(read_records(path))

    def test_duplicate_key_detected_on_write(self, tmp_path, rng):
        rec = random_record(rng)
        with pytest.raises(DuplicateKey):
            write_records([rec, rec], tmp_path / "dup.ndjson")

    def test_extreme_floats_survive_exactly(self, tmp_path):
        values = (1e-300, -1.2345678901234567e250, 3.141592653589793, 2**-1074)
        rec = AttributionRecord(
            run_id="r", epoch=1, example_id="a", split="probe", label="pos",
            tokens=(1, 2, 3, 4), attributions=values,
        )
        path = tmp_path / "f.ndjson"
        write_records([rec], path)
        loaded = next(iter(read_records(path)))
        assert loaded.attributions == values


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = RunManifest(
            run_id="r1",
            epochs=5,
            seed=3,
            probe_ids=("a", "b"),
            spur_probe_ids=("c",),
            similarity="spearman",
            window=2,
            epsilon=1e-12,
            median_variant="interpolated",
            task_config={"vocab_size": 10},
            spur_config={"pos_token": 0, "neg_token": 1, "injection_prob": 0.8, "position": 0},
            val_accuracy=(0.5, 0.6, 0.7, 0.8, 0.81),
        )
        path = tmp_path / "manifest.json"
        write_manifest(manifest, path)
        assert read_manifest(path) == manifest

    def test_invalid_manifest_raises_schema_violation(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{\"run_id\": \"x\"}")
        with pytest.raises(SchemaViolation):
            read_manifest(path)


class TestAnalyzeDump:
    def test_matches_in_memory_pipeline(self, shortcut_dump):
        run, records_path, manifest_path, _ = shortcut_dump
        bundle = analyze_dump(records_path, manifest_path)
        assert bundle.drift.values == pytest.approx(run.drift.values, abs=1e-9)
        assert bundle.rsp.rsp_epoch == run.rsp.rsp_epoch
        assert bundle.rsp.tau == pytest.approx(run.rsp.tau, abs=1e-9)
        assert bundle.rsp.window_means == pytest.approx(run.rsp.window_means, abs=1e-9)
        assert bundle.spur.values == pytest.approx(run.spur.values, abs=1e-9)
        assert bundle.accuracy == pytest.approx(run.accuracy, abs=1e-12)
        assert bundle.drift.per_label.keys() == run.drift.per_label.keys()
        for label in bundle.drift.per_label:
            assert bundle.drift.per_label[label] == pytest.approx(
                run.drift.per_label[label], abs=1e-9
            )

    def test_curve_matches_from_scratch_recomputation(self, shortcut_dump):
        run, records_path, manifest_path, _ = shortcut_dump
        manifest = read_manifest(manifest_path)
        by_epoch = {}
        for rec in read_records(records_path):
            if rec.split != "probe":
                continue
            mags = np.abs(np.asarray(rec.attributions))
            weights = mags / (mags.sum() + manifest.epsilon)
            by_epoch.setdefault(rec.epoch, {})[rec.example_id] = weights
        recomputed = []
        for t in range(2, manifest.epochs + 1):
            drifts = [
                1.0 - brute_force_spearman(by_epoch[t][ex], by_epoch[t - 1][ex])
                for ex in sorted(by_epoch[t])
            ]
            recomputed.append(float(np.mean(drifts)))
        assert run.drift.values == pytest.approx(recomputed, abs=1e-9)

    def test_missing_epoch_is_a_gap(self, shortcut_dump, tmp_path):
        _, records_path, manifest_path, _ = shortcut_dump
        filtered = tmp_path / "gap.ndjson"
        with open(records_path) as src, open(filtered, "w") as dst:
            for line in src:
                if json.loads(line)["epoch"] != 3:
                    dst.write(line)
        with pytest.raises(EpochGap):
            analyze_dump(filtered, manifest_path)

    def test_retokenized_example_reports_token_mismatch(self, shortcut_dump, tmp_path):
        _, records_path, manifest_path, _ = shortcut_dump
        manifest = read_manifest(manifest_path)
        victim = manifest.probe_ids[0]
        corrupted = tmp_path / "retok.ndjson"
        with open(records_path) as src, open(corrupted, "w") as dst:
            for line in src:
                obj = json.loads(line)
                if obj["example_id"] == victim and obj["epoch"] == 2:
                    obj["tokens"] = list(reversed(obj["tokens"]))
                dst.write(json.dumps(obj) + "\n")
        with pytest.raises(TokenMismatch, match=victim):
            analyze_dump(corrupted, manifest_path)

    def test_summary_row_recomputable_from_series(self, shortcut_dump, tmp_path):
        run, records_path, manifest_path, _ = shortcut_dump
        bundle = analyze_dump(records_path, manifest_path)
        paths = write_report_bundle(bundle, tmp_path)
        import csv

        with open(paths["series"]) as fh:
            rows = list(csv.DictReader(fh))
        drifts = [(int(r["epoch"]), float(r["drift"])) for r in rows if r["drift"]]
        accs = [float(r["accuracy"]) for r in rows if r["accuracy"]]
        values = [v for _, v in drifts]
        from driftscope.drift import DriftCurve, detect_rsp, median_threshold

        curve = DriftCurve("recheck", tuple(e for e, _ in drifts), tuple(values), 1)
        rsp = detect_rsp(curve, bundle.summary.window, median_threshold(curve))
        assert rsp.rsp_epoch == bundle.summary.rsp_epoch
        assert rsp.tau == pytest.approx(bundle.summary.tau, abs=1e-12)
        assert max(accs) == pytest.approx(bundle.summary.peak_accuracy, abs=1e-12)
        assert accs[rsp.rsp_epoch - 1] == pytest.approx(bundle.summary.acc_at_rsp, abs=1e-12)
        marker_epochs = [int(r["epoch"]) for r in rows if r["rsp_marker"] == "1"]
        assert marker_epochs == [bundle.summary.rsp_epoch]

    def test_report_text_and_json(self, shortcut_dump):
        run, records_path, manifest_path, _ = shortcut_dump
        bundle = analyze_dump(records_path, manifest_path)
        text = format_report(bundle)
        assert f"run: {bundle.run_id}" in text
        assert "summary:" in text
        obj = bundle_to_dict(bundle)
        json.dumps(obj)  # JSON-serializable
        assert obj["rsp"]["rsp_epoch"] == bundle.rsp.rsp_epoch
