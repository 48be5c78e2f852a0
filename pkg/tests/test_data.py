import pytest

from bayesfda.data import SampleRecord, ingest, parse_records, partition, write_samples
from bayesfda.errors import FormatError, InvalidInputError

HEADER = "sample_id,district,cu,pb,zn\n"


def test_single_row():
    rep = parse_records(HEADER + "S1,BV,22.5,18.0,45.1\n")
    assert rep.records == [SampleRecord("S1", "BV", 22.5, 18.0, 45.1)]
    assert rep.rejections == []


def test_non_positive_rejected():
    rep = parse_records(HEADER + "S1,BV,0,18.0,45.1\n")
    assert rep.records == []
    assert rep.rejections[0].reason == "non-positive concentration"
    assert rep.rejections[0].line == 2


def test_hundred_rows_three_malformed(tmp_path):
    lines = [f"S{i},D{i % 4},{10 + i},{20 + i},{30 + i}" for i in range(100)]
    lines[10] = "S10,D2,abc,20,30"
    lines[50] = "S50,D2,12,-3,30"
    lines[77] = "S77,D1,12,20"
    path = tmp_path / "in.csv"
    path.write_text(HEADER + "\n".join(lines) + "\n")
    rep = ingest(path)
    assert len(rep.records) == 97 and len(rep.rejections) == 3
    assert [r.line for r in rep.rejections] == [12, 52, 79]
    assert [r.reason for r in rep.rejections] == [
        "non-numeric cu", "non-positive concentration", "expected 5 fields, got 4"]
    assert rep.summary()["rows_read"] == 100


def test_missing_value_and_blank_lines():
    rep = parse_records(HEADER + "S1,BV,,1,1\n\nS2,,1,1,1\n")
    assert [r.reason for r in rep.rejections] == ["missing cu", "missing compartment code"]


def test_header_and_empty_errors(tmp_path):
    with pytest.raises(FormatError):
        parse_records("id,district,cu,pb\nS1,A,1,1\n")
    with pytest.raises(InvalidInputError):
        parse_records("")
    with pytest.raises(FormatError):
        ingest(tmp_path / "x.csv", format="xlsx")
    with pytest.raises(InvalidInputError):
        ingest(tmp_path / "missing.csv")


def test_record_validation():
    with pytest.raises(InvalidInputError):
        SampleRecord("a", "B", 1.0, float("nan"), 1.0)
    with pytest.raises(InvalidInputError):
        SampleRecord("a", " ", 1.0, 1.0, 1.0)


def _records(counts):
    out = []
    for code, n in counts.items():
        out += [SampleRecord(f"{code}-{i}", code, 1.0 + i, 2.0, 3.0) for i in range(n)]
    return out


def test_partition_two_codes():
    rep = partition(_records({"B": 3, "A": 5}))
    assert [d.code for d in rep.datasets] == ["A", "B"]
    assert [d.count for d in rep.datasets] == [5, 3]
    assert rep.datasets[0].samples.data.shape == (5, 3)


def test_partition_excludes_small():
    rep = partition(_records({"A": 40, "B": 10}), n_min=30)
    assert [d.code for d in rep.datasets] == ["A"]
    assert rep.excluded[0][0] == "B" and rep.summary()["excluded"][0]["count"] == 10
    assert rep.total == 50


def test_partition_76_codes():
    counts = {f"K{i:02d}": 1 + (i * 7) % 13 for i in range(76)}
    recs = _records(counts)
    rep = partition(recs)
    assert len(rep.datasets) == 76
    assert sum(d.count for d in rep.datasets) == len(recs) == rep.total
    with pytest.raises(InvalidInputError):
        partition([])


def test_write_samples_round_trip(tmp_path):
    recs = _records({"A": 3}) + [SampleRecord("x", "B", 0.1 + 0.2, 1e-7, 12345.678)]
    path = write_samples(tmp_path / "s.csv", recs)
    assert ingest(path).records == recs
