import io
import random
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowlens.ingest import (CSV_HEADER, FlowRecord, LineError, MalformedHeader,
                             epoch_ms, parse_flow_log, parse_timestamp,
                             serialize_flow_log, validate_record)
from tests.conftest import make_flow

GOOD_LINE = "2025-05-13T19:02:00.000Z,10.7.0.146,chatgpt.com,512,2048"


def as_stream(*lines, header=CSV_HEADER):
    body = "\n".join(([header] if header is not None else []) + list(lines))
    return io.BytesIO(body.encode())


def test_parse_csv_line_fields():
    log = parse_flow_log(as_stream(GOOD_LINE), "csv")
    assert len(log) == 1
    r = log.records[0]
    assert r.device_ip == "10.7.0.146"
    assert r.hostname == "chatgpt.com"
    assert r.up_bytes == 512
    assert r.down_bytes == 2048
    assert r.timestamp == datetime(2025, 5, 13, 19, 2, tzinfo=timezone.utc)


def test_empty_input():
    log = parse_flow_log(io.BytesIO(b""), "csv")
    assert len(log) == 0 and log.diagnostics == []
    log = parse_flow_log(io.BytesIO(b""), "jsonl")
    assert len(log) == 0 and log.diagnostics == []


def test_header_mismatch():
    with pytest.raises(MalformedHeader):
        parse_flow_log(as_stream(GOOD_LINE, header="a,b,c"), "csv")


def test_bad_lines_collected_not_fatal():
    log = parse_flow_log(as_stream(
        GOOD_LINE,
        "not,a,line",
        "2025-05-13T19:02:00.000Z,192.168.1.5,chatgpt.com,1,1",  # outside subnet
        "2025-05-13T19:02:00.000Z,10.7.0.146,chatgpt.com,-1,1",  # negative bytes
    ), "csv")
    assert len(log) == 1
    assert len(log.diagnostics) == 3
    assert log.diagnostics[0].line_no == 3


def test_strict_mode_aborts_on_first_error():
    with pytest.raises(LineError) as exc:
        parse_flow_log(as_stream(GOOD_LINE, "garbage"), "csv", strict=True)
    assert exc.value.line_no == 3


def test_jsonl_parse():
    line = (b'{"timestamp": "2025-05-13T19:02:00.000Z", "device_ip": "10.7.0.1",'
            b' "hostname": "Claude.AI.", "up_bytes": 3, "down_bytes": 4}')
    log = parse_flow_log(io.BytesIO(line), "jsonl")
    assert log.records[0].hostname == "claude.ai"  # lowercased, dot stripped


def test_sorted_output_matches_sort_oracle():
    # 10k shuffled-timestamp lines: output count equals input count and
    # order equals sorting the timestamps independently.
    from datetime import timedelta

    rng = random.Random(7)
    minutes = [rng.uniform(0, 10_000) for _ in range(10_000)]
    base = datetime(2025, 5, 1, tzinfo=timezone.utc)
    stamps = [base + timedelta(minutes=m) for m in minutes]
    lines = [
        f"{s.strftime('%Y-%m-%dT%H:%M:%S')}.{s.microsecond // 1000:03d}Z,10.7.0.1,chatgpt.com,1,1"
        for s in stamps
    ]
    log = parse_flow_log(as_stream(*lines), "csv")
    assert len(log) == 10_000
    oracle = sorted(epoch_ms(s.replace(microsecond=s.microsecond // 1000 * 1000))
                    for s in stamps)
    assert [r.epoch_ms for r in log.records] == oracle


def test_round_trip_csv_and_jsonl():
    lines = [
        "2025-05-13T19:02:00.000Z,10.7.0.146,chatgpt.com,512,2048",
        "2025-05-13T19:02:00.500Z,10.7.0.147,claude.ai,0,0",
        "2025-05-13T19:01:00.000Z,10.7.0.146,perplexity.ai,1,2",
    ]
    log = parse_flow_log(as_stream(*lines), "csv")
    blob = serialize_flow_log(log, "csv")
    again = parse_flow_log(io.BytesIO(blob), "csv")
    assert again.records == log.records
    blob_j = serialize_flow_log(log, "jsonl")
    again_j = parse_flow_log(io.BytesIO(blob_j), "jsonl")
    assert again_j.records == log.records


def test_counts_accepted_plus_rejected():
    lines = [GOOD_LINE] * 5 + ["bad"] * 3
    log = parse_flow_log(as_stream(*lines), "csv")
    assert len(log) + len(log.diagnostics) == 8


def test_validate_record_paper_device():
    assert validate_record(make_flow(device="10.7.0.123")) == []


def test_validate_record_violations():
    assert "OutsidePrivateStudySubnet" in validate_record(make_flow(device="192.168.1.5"))
    assert "NegativeVolume" in validate_record(make_flow(up=-1))
    assert "MalformedHostname" in validate_record(make_flow(host="bad host"))
    assert "MalformedHostname" in validate_record(make_flow(host=""))


def test_parse_timestamp_normalizes_to_utc_ms():
    dt = parse_timestamp("2025-05-13T15:02:00.1234-04:00")
    assert dt == datetime(2025, 5, 13, 19, 2, 0, 123000, tzinfo=timezone.utc)
    with pytest.raises(ValueError):
        parse_timestamp("2025-05-13T15:02:00")  # naive


@given(st.lists(
    st.tuples(st.integers(0, 10_000_000), st.integers(0, 255), st.integers(0, 10_000)),
    max_size=60))
@settings(max_examples=50, deadline=None)
def test_permutation_insensitive(rows):
    base = datetime(2025, 5, 1, tzinfo=timezone.utc)
    from datetime import timedelta

    lines = [
        f"{(base + timedelta(milliseconds=ms)).strftime('%Y-%m-%dT%H:%M:%S')}."
        f"{(base + timedelta(milliseconds=ms)).microsecond // 1000:03d}Z,"
        f"10.7.0.{octet},chatgpt.com,{b},{b}"
        for ms, octet, b in rows
    ]
    shuffled = list(lines)
    random.Random(1).shuffle(shuffled)
    a = parse_flow_log(as_stream(*lines), "csv")
    b = parse_flow_log(as_stream(*shuffled), "csv")
    assert sorted(a.records, key=lambda r: (r.epoch_ms, r.device_ip, r.up_bytes)) == \
        sorted(b.records, key=lambda r: (r.epoch_ms, r.device_ip, r.up_bytes))
    assert [r.epoch_ms for r in a.records] == [r.epoch_ms for r in b.records]
