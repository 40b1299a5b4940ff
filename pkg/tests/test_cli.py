import json

import numpy as np
import pytest

from dde import build_trace, SpeechSegment, read_trace
from dde.cli import main
from dde.vad import write_wav


def run_cli(*argv):
    return main(list(argv))


def seg(a, b, **kw):
    return SpeechSegment(a, b, **kw)


class TestSimulateCmd:
    def test_cascaded_roundtrip_through_analyze(self, tmp_path, capsys):
        out = tmp_path / "t.json"
        assert run_cli(
            "simulate", "--policy", "cascaded", "--duration-s", "300",
            "--seed", "1", "--out", str(out),
        ) == 0
        assert out.exists()
        capsys.readouterr()
        assert run_cli("analyze", "--trace", str(out)) == 0
        table = capsys.readouterr().out
        row = [line for line in table.splitlines() if line.startswith("t ")][0]
        assert row.split() == ["t", "0", "0", "0", "800"]

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert run_cli(
                "simulate", "--policy", "stochastic", "--duration-s", "30",
                "--seed", "7", "--out", str(out),
            ) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_zero_duration_fails(self, tmp_path, capsys):
        code = run_cli(
            "simulate", "--policy", "cascaded", "--duration-s", "0",
            "--out", str(tmp_path / "t.json"),
        )
        assert code != 0
        assert "error:" in capsys.readouterr().err

    def test_run_config_file(self, tmp_path):
        cfg = {
            "seed": 3,
            "duration_ms": 32000,
            "opening_speaker": "A",
            "agents": [
                {"policy": {"kind": "cascaded"}},
                {"policy": {"kind": "cascaded"}},
            ],
        }
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "t.json"
        assert run_cli("simulate", "--run-config", str(cfg_path), "--out", str(out)) == 0
        assert read_trace(out).duration_ms == 32000

    def test_tick_ms_guard(self, capsys):
        with pytest.raises(SystemExit):
            run_cli("--tick-ms", "100", "simulate", "--out", "x.json")


class TestLabelCmd:
    def _write_trace(self, tmp_path, trace, name="trace.json"):
        p = tmp_path / name
        p.write_text(trace.to_json())
        return p

    def test_histogram_of_worked_example(self, tmp_path, capsys):
        p = self._write_trace(tmp_path, build_trace([("A", seg(1000, 3000))], 5000))
        out = tmp_path / "s.jsonl"
        assert run_cli("label", "--trace", str(p), "--speaker", "A", "--out", str(out)) == 0
        printed = capsys.readouterr().out
        assert "SIL=19" in printed and "CON=11" in printed and "SPK=1" in printed
        assert "STP=0" in printed
        lines = out.read_text().splitlines()
        assert len(lines) == 31
        rec = json.loads(lines[6])
        assert rec["action"] == "SPK"
        assert rec["context_ref"]["end_ms"] == 1120

    def test_five_minutes_makes_1875_lines_per_speaker(self, tmp_path):
        p = self._write_trace(tmp_path, build_trace([], 300000))
        out = tmp_path / "s.jsonl"
        assert run_cli("label", "--trace", str(p), "--out", str(out)) == 0
        assert len(out.read_text().splitlines()) == 2 * 1875

    def test_silent_trace_all_sil(self, tmp_path, capsys):
        p = self._write_trace(tmp_path, build_trace([], 1600))
        out = tmp_path / "s.jsonl"
        assert run_cli("label", "--trace", str(p), "--speaker", "B", "--out", str(out)) == 0
        assert "SIL=10" in capsys.readouterr().out

    def test_inline_context(self, tmp_path):
        p = self._write_trace(tmp_path, build_trace([("B", seg(0, 320))], 480))
        out = tmp_path / "s.jsonl"
        assert run_cli(
            "label", "--trace", str(p), "--speaker", "B",
            "--inline-context", "--out", str(out),
        ) == 0
        rec = json.loads(out.read_text().splitlines()[0])
        assert rec["context"]["duration_ms"] == 160

    def test_malformed_trace_fails(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert run_cli("label", "--trace", str(p), "--out", str(tmp_path / "s.jsonl")) != 0


class TestAnalyzeCmd:
    def test_json_format_schema(self, tmp_path, capsys):
        p = tmp_path / "t.json"
        p.write_text(build_trace([("A", seg(0, 1000)), ("B", seg(1500, 2500))], 60000).to_json())
        assert run_cli("analyze", "--trace", str(p), "--format", "json") == 0
        payload = json.loads(capsys.readouterr().out)
        rep = payload["t"]
        assert set(rep) >= {
            "duration_ms", "overlaps_per_min", "backchannels_per_min",
            "pauses_per_min", "avg_gap_ms", "counts", "naturalness",
        }
        assert rep["avg_gap_ms"] == 500.0
        assert rep["counts"]["gaps"] == 1

    def test_batch_directory_with_mean_row(self, tmp_path, capsys):
        d = tmp_path / "traces"
        d.mkdir()
        for i, gap in enumerate((1000, 2000)):
            t = build_trace([("A", seg(0, 1000)), ("B", seg(1000 + gap, 3500 + gap))], 60000)
            (d / f"c{i}.json").write_text(t.to_json())
        assert run_cli("analyze", "--trace", str(d)) == 0
        table = capsys.readouterr().out
        lines = table.splitlines()
        assert lines[-1].startswith("mean")
        assert lines[-1].split()[-1] == "1500"

    def test_compare_reference_row(self, tmp_path, capsys):
        p = tmp_path / "t.json"
        p.write_text(build_trace([], 60000).to_json())
        ref = tmp_path / "reference.json"
        ref.write_text(json.dumps({
            "overlaps_per_min": 5.7, "backchannels_per_min": 2.1,
            "pauses_per_min": 12.2, "avg_gap_ms": 393,
        }))
        assert run_cli("analyze", "--trace", str(p), "--compare", str(ref)) == 0
        table = capsys.readouterr().out
        assert any(line.startswith("reference") for line in table.splitlines())

    def test_zero_duration_trace_fails(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text('{"duration_ms": 0, "channels": [[], []]}')
        assert run_cli("analyze", "--trace", str(p)) != 0

    def test_output_file_written(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(build_trace([], 60000).to_json())
        out = tmp_path / "report.txt"
        assert run_cli("analyze", "--trace", str(p), "--out", str(out)) == 0
        assert "overlaps/min" in out.read_text()


class TestIngestCmd:
    def test_stereo_ingest(self, tmp_path, capsys):
        fs = 16000
        n = 2 * fs
        a = np.zeros(n, dtype=np.int16)
        a[fs // 2 : fs] = (
            0.8 * 32767 * np.sin(2 * np.pi * 440 * np.arange(fs // 2) / fs)
        ).astype(np.int16)
        b = np.zeros(n, dtype=np.int16)
        wav = tmp_path / "conv.wav"
        write_wav(wav, (a, b))
        out = tmp_path / "t.json"
        assert run_cli("ingest", "--audio", str(wav), "--out", str(out)) == 0
        trace = read_trace(out)
        assert len(trace.channels[0]) == 1
        s = trace.channels[0][0]
        assert abs(s.start_ms - 500) <= 20 and abs(s.end_ms - 1000) <= 20
        assert trace.channels[1] == ()

    def test_requires_audio_argument(self, tmp_path):
        assert run_cli("ingest", "--out", str(tmp_path / "t.json")) != 0


class TestTokenizeCmd:
    def _trace_with_units(self, tmp_path):
        units1 = (7, 8, 7, 8, 9, 9, 9, 9)
        units2 = (7, 8, 9, 9, 7, 8, 7, 8)
        t = build_trace(
            [("A", seg(0, 160, units=units1)), ("B", seg(320, 480, units=units2))],
            640,
        )
        p = tmp_path / "t.json"
        p.write_text(t.to_json())
        return p

    def test_train_then_apply(self, tmp_path, capsys):
        p = self._trace_with_units(tmp_path)
        vocab_path = tmp_path / "vocab.json"
        assert run_cli(
            "tokenize", "train", "--traces", str(p),
            "--num-merges", "4", "--base-alphabet-size", "10",
            "--out", str(vocab_path),
        ) == 0
        vocab = json.loads(vocab_path.read_text())
        assert vocab["base_alphabet_size"] == 10
        assert vocab["merges"][0][:2] == [7, 8]
        enc_path = tmp_path / "encoded.jsonl"
        assert run_cli(
            "tokenize", "apply", "--vocab", str(vocab_path),
            "--traces", str(p), "--out", str(enc_path),
        ) == 0
        lines = [json.loads(line) for line in enc_path.read_text().splitlines()]
        assert len(lines) == 2
        assert lines[0]["speaker"] == "A"
        assert all(isinstance(tok, int) for rec in lines for tok in rec["tokens"])

    def test_train_without_units_fails(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(build_trace([("A", seg(0, 100))], 200).to_json())
        assert run_cli(
            "tokenize", "train", "--traces", str(p), "--num-merges", "1",
            "--base-alphabet-size", "10", "--out", str(tmp_path / "v.json"),
        ) != 0


class TestEvalActionsCmd:
    def test_perfect_and_poor_predictions(self, tmp_path, capsys):
        gold = tmp_path / "gold.jsonl"
        pred = tmp_path / "pred.jsonl"
        rows = [
            {"agent": "A", "tick_index": i, "action": a}
            for i, a in enumerate(["SIL", "SIL", "SPK", "CON", "STP"])
        ]
        gold.write_text("\n".join(json.dumps(r) for r in rows))
        pred_rows = [dict(r) for r in rows]
        pred_rows[1]["action"] = "SPK"
        pred.write_text("\n".join(json.dumps(r) for r in pred_rows))
        assert run_cli(
            "eval-actions", "--gold", str(gold), "--predicted", str(pred),
            "--format", "json",
        ) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["accuracy"] == pytest.approx(0.8)
        assert rep["classes"]["SPK"]["precision"] == pytest.approx(0.5)
        assert rep["classes"]["SIL"]["recall"] == pytest.approx(0.5)

    def test_missing_predictions_fail(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        pred = tmp_path / "pred.jsonl"
        gold.write_text(json.dumps({"agent": "A", "tick_index": 0, "action": "SIL"}))
        pred.write_text("")
        assert run_cli("eval-actions", "--gold", str(gold), "--predicted", str(pred)) != 0


class TestPipelineConfigEnv:
    def test_env_config_supplies_defaults(self, tmp_path, monkeypatch, capsys):
        cfg = tmp_path / "pipeline.json"
        cfg.write_text(json.dumps({"report_format": "json"}))
        monkeypatch.setenv("DDE_CONFIG", str(cfg))
        p = tmp_path / "t.json"
        p.write_text(build_trace([], 60000).to_json())
        assert run_cli("analyze", "--trace", str(p)) == 0
        json.loads(capsys.readouterr().out)  # json because config said so

    def test_flags_override_env_config(self, tmp_path, monkeypatch, capsys):
        cfg = tmp_path / "pipeline.json"
        cfg.write_text(json.dumps({"report_format": "json"}))
        monkeypatch.setenv("DDE_CONFIG", str(cfg))
        p = tmp_path / "t.json"
        p.write_text(build_trace([], 60000).to_json())
        assert run_cli("analyze", "--trace", str(p), "--format", "table") == 0
        assert "overlaps/min" in capsys.readouterr().out


class TestJsonlBatch:
    def test_multi_conversation_file(self, tmp_path, capsys):
        t1 = build_trace([("A", seg(0, 1000)), ("B", seg(1500, 2500))], 60000)
        t2 = build_trace([], 60000)
        p = tmp_path / "convs.jsonl"
        p.write_text(t1.to_json() + "\n" + t2.to_json() + "\n")
        assert run_cli("analyze", "--trace", str(p)) == 0
        table = capsys.readouterr().out
        assert "convs:0" in table and "convs:1" in table
        assert any(line.startswith("mean") for line in table.splitlines())
