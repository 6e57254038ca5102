import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypnoeval.core import Hypnodensity, Hypnogram
from hypnoeval.errors import (
    AlignmentError,
    ConfigError,
    EmptyBundle,
    EmptyInput,
    IoError,
    NormalizationError,
    ParseError,
    SequenceError,
    SerializationError,
)
from hypnoeval.io import (
    Manifest,
    format_hypnodensity_csv,
    format_hypnogram_csv,
    load_bundle,
    parse_hypnodensity_csv,
    parse_hypnogram_csv,
    parse_hypnogram_lines,
    read_manifest,
    read_report_json,
    write_report_json,
)

HEADER = "epoch,W,N1,N2,N3,REM\n"


class TestHypnogramCsv:
    def test_basic(self):
        h = parse_hypnogram_csv(b"epoch,stage\n0,W\n1,N2")
        np.testing.assert_array_equal(h.stages, [0, 2])

    def test_case_insensitive(self):
        h = parse_hypnogram_csv("epoch,stage\n0,w\n1,rem")
        np.testing.assert_array_equal(h.stages, [0, 4])

    def test_gap_reports_line(self):
        with pytest.raises(SequenceError) as exc:
            parse_hypnogram_csv("epoch,stage\n0,W\n2,N1")
        assert exc.value.line == 3

    def test_duplicate(self):
        with pytest.raises(SequenceError) as exc:
            parse_hypnogram_csv("epoch,stage\n0,W\n1,N1\n1,N2\n")
        assert exc.value.line == 4

    def test_unknown_token(self):
        with pytest.raises(ParseError) as exc:
            parse_hypnogram_csv("epoch,stage\n0,W\n1,S3\n")
        assert exc.value.line == 3

    def test_crlf_bom_and_mask(self):
        h = parse_hypnogram_csv("\ufeffepoch,stage\r\n0,MASK\r\n1,N3\r\n")
        np.testing.assert_array_equal(h.stages, [-1, 3])

    def test_header_only(self):
        with pytest.raises(EmptyInput):
            parse_hypnogram_csv("epoch,stage\n")

    def test_empty(self):
        with pytest.raises(EmptyInput):
            parse_hypnogram_csv("")

    def test_bad_header(self):
        with pytest.raises(ParseError):
            parse_hypnogram_csv("idx,label\n0,W\n")

    def test_lines_format(self):
        h = parse_hypnogram_lines("W\nn1\n\nREM\n", epoch_duration_s=20)
        assert h == Hypnogram([0, 1, 4], 20)


class TestHypnodensityCsv:
    def test_one_hot_row(self):
        hd = parse_hypnodensity_csv(HEADER + "0,1,0,0,0,0\n")
        np.testing.assert_array_equal(hd.probs, [[1, 0, 0, 0, 0]])

    def test_uniform_row(self):
        hd = parse_hypnodensity_csv(HEADER + "0,0.2,0.2,0.2,0.2,0.2\n")
        np.testing.assert_allclose(hd.probs, [[0.2] * 5], atol=1e-15)

    def test_sum_too_large(self):
        with pytest.raises(NormalizationError) as exc:
            parse_hypnodensity_csv(HEADER + "0,0.5,0.5,0.5,0,0\n")
        assert exc.value.line == 2

    def test_negative(self):
        with pytest.raises(ParseError):
            parse_hypnodensity_csv(HEADER + "0,1.1,-0.1,0,0,0\n")

    def test_not_a_number(self):
        with pytest.raises(ParseError):
            parse_hypnodensity_csv(HEADER + "0,x,0,0,0,1\n")

    def test_field_count(self):
        with pytest.raises(ParseError):
            parse_hypnodensity_csv(HEADER + "0,0.5,0.5,0,0\n")

    def test_epoch_gap(self):
        with pytest.raises(SequenceError):
            parse_hypnodensity_csv(HEADER + "0,1,0,0,0,0\n2,1,0,0,0,0\n")


@settings(max_examples=100)
@given(st.lists(st.integers(-1, 4), min_size=1, max_size=60))
def test_hypnogram_round_trip(codes):
    h = Hypnogram(codes)
    text = format_hypnogram_csv(h)
    assert parse_hypnogram_csv(text) == h
    assert format_hypnogram_csv(parse_hypnogram_csv(text)) == text


@settings(max_examples=100)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_hypnodensity_round_trip(t, seed):
    raw = np.random.default_rng(seed).dirichlet(np.ones(5), size=t)
    hd = Hypnodensity(raw)
    text = format_hypnodensity_csv(hd)
    again = parse_hypnodensity_csv(text)
    np.testing.assert_array_equal(again.probs, hd.probs)
    assert format_hypnodensity_csv(again) == text


def _write_recording(tmp_path, name="r1", scorers=2, t=10, model_t=10):
    rng = np.random.default_rng(0)
    entries = {"recording_id": name, "epoch_duration_s": 30, "scorers": [], "models": []}
    for s in range(scorers):
        p = tmp_path / f"{name}_s{s}.csv"
        p.write_text(format_hypnogram_csv(Hypnogram(rng.integers(0, 5, t))))
        entries["scorers"].append({"name": f"s{s}", "path": p.name})
    p = tmp_path / f"{name}_m.csv"
    p.write_text(format_hypnodensity_csv(Hypnodensity(rng.dirichlet(np.ones(5), model_t))))
    entries["models"].append({"name": "m", "path": p.name})
    mpath = tmp_path / f"{name}.json"
    mpath.write_text(json.dumps(entries))
    return mpath


class TestBundle:
    def test_load(self, tmp_path):
        b = load_bundle(read_manifest(_write_recording(tmp_path)))
        assert b.n_epochs == 10
        assert list(b.scorer_hypnograms) == ["s0", "s1"]

    def test_misaligned(self, tmp_path):
        with pytest.raises(AlignmentError, match="r1"):
            load_bundle(read_manifest(_write_recording(tmp_path, model_t=9)))

    def test_empty(self):
        with pytest.raises(EmptyBundle):
            load_bundle(Manifest("r"))

    def test_missing_file_names_path_and_recording(self, tmp_path):
        m = Manifest("night7", scorers=(("a", "nope.csv"),), base_dir=tmp_path)
        with pytest.raises(IoError) as exc:
            load_bundle(m)
        assert exc.value.path == str(tmp_path / "nope.csv")
        assert "night7" in str(exc.value)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(IoError):
            read_manifest(tmp_path / "absent.json")

    def test_duplicate_names(self):
        with pytest.raises(ConfigError):
            Manifest("r", scorers=(("a", "x.csv"), ("a", "y.csv")))


class TestReportJson:
    def test_four_decimals_kept(self):
        assert b"0.7537" in write_report_json({"mf1": 0.7537})

    def test_round_trip(self):
        report = {"mf1": 0.123456789, "n": 3, "ok": True, "kappa": None,
                  "rows": [{"a": np.float64(1 / 3)}, {"a": np.int64(2)}]}
        back = read_report_json(write_report_json(report))
        assert back["schema"] == 1
        assert abs(back["mf1"] - report["mf1"]) < 1e-6
        assert abs(back["rows"][0]["a"] - 1 / 3) < 1e-6
        assert back["rows"][1]["a"] == 2 and back["kappa"] is None and back["ok"] is True

    def test_nan_names_field(self):
        with pytest.raises(SerializationError) as exc:
            write_report_json({"kappa": math.nan})
        assert exc.value.field == "kappa"

    def test_nested_inf_path(self):
        with pytest.raises(SerializationError) as exc:
            write_report_json({"recordings": [{"acs": math.inf}]})
        assert exc.value.field == "recordings[0].acs"

    def test_deterministic(self):
        r = {"b": 1.0, "a": [0.1, 0.2]}
        assert write_report_json(r) == write_report_json(dict(reversed(list(r.items()))))
