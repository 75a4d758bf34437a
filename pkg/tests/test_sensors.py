import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iauth.sensors import (STREAM_KEYS, Device, PairedTrace, Sensor, SensorSample, SensorStream, TraceFormatError,
                           align_devices, parse_trace, resample, serialize_trace, uniform_trace)


def _stream(key, t, values=None, rate=50.0):
    t = np.asarray(t, dtype=float)
    if values is None:
        values = np.column_stack([t, 2 * t, -t])
    return SensorStream(key[0], key[1], rate, t, values)


def _trace(n=300, rate=50.0, user="u"):
    t = np.arange(n) / rate
    return PairedTrace(user, {k: _stream(k, t, np.column_stack([np.sin(t + i), np.cos(t), t * i]), rate)
                              for i, k in enumerate(STREAM_KEYS)})


def test_sample_rejects_nonfinite():
    with pytest.raises(ValueError):
        SensorSample(0.0, float("nan"), 0.0, 0.0)
    with pytest.raises(ValueError):
        SensorSample(-1.0, 0.0, 0.0, 0.0)


def test_stream_rejects_nonmonotonic():
    with pytest.raises(ValueError, match="strictly increasing"):
        _stream(STREAM_KEYS[0], [0.0, 0.02, 0.02])


def test_parse_csv_duration():
    trace = _trace(300)
    parsed = parse_trace(io.StringIO(serialize_trace(trace)), "csv")
    assert parsed.duration == pytest.approx(6.0)
    assert all(len(s) == 300 for s in parsed.streams.values())


def test_parse_bytes_source():
    parsed = parse_trace(io.BytesIO(serialize_trace(_trace(10)).encode()), "csv")
    assert len(parsed[STREAM_KEYS[0]]) == 10


def test_parse_missing_watch_stream():
    text = serialize_trace(_trace(20))
    phone_only = "\n".join(line for line in text.splitlines() if not line.startswith("watch")) + "\n"
    with pytest.raises(TraceFormatError, match="missing stream Watch/Accelerometer"):
        parse_trace(phone_only)


def test_parse_nan_names_row():
    lines = serialize_trace(_trace(20)).splitlines()
    parts = lines[5].split(",")
    parts[3] = "NaN"
    lines[5] = ",".join(parts)
    with pytest.raises(TraceFormatError, match="line 6"):
        parse_trace("\n".join(lines) + "\n")


def test_parse_nonmonotonic_timestamp():
    lines = serialize_trace(_trace(20)).splitlines()
    lines[3], lines[4] = lines[4], lines[3]
    with pytest.raises(TraceFormatError, match="non-monotonic"):
        parse_trace("\n".join(lines) + "\n")


def test_parse_bad_field_count():
    text = serialize_trace(_trace(5)) + "phone,acc,9.0,1.0\n"
    with pytest.raises(TraceFormatError, match="expected 6 fields"):
        parse_trace(text)


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_round_trip_exact(fmt):
    trace = _trace(123)
    assert parse_trace(serialize_trace(trace, fmt), fmt, user_id="u") == trace


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=12, max_size=12),
       st.lists(st.floats(0.001, 0.5), min_size=3, max_size=3))
def test_round_trip_property(vals, steps):
    t = np.cumsum(np.r_[0.0, steps])
    v = np.array(vals).reshape(4, 3)
    trace = PairedTrace("p", {k: _stream(k, t, v) for k in STREAM_KEYS})
    assert parse_trace(serialize_trace(trace), user_id="p", rate=50.0) == trace


def test_resample_midpoint():
    s = resample(_stream(STREAM_KEYS[0], [0.0, 0.04], np.array([[0.0, 0, 0], [4.0, 0, 0]])), 50.0)
    np.testing.assert_allclose(s.timestamps, [0.0, 0.02, 0.04])
    assert s.values[1, 0] == pytest.approx(2.0)


def test_resample_identity():
    t = np.arange(200) / 50.0
    src = _stream(STREAM_KEYS[0], t, np.random.default_rng(0).normal(size=(200, 3)))
    out = resample(src, 50.0)
    np.testing.assert_allclose(out.values, src.values, atol=1e-12, rtol=0)


def test_resample_ramp_exact():
    t = np.arange(101) / 100.0
    out = resample(_stream(STREAM_KEYS[0], t, rate=100.0), 50.0)
    assert len(out) == 51
    np.testing.assert_array_equal(out.values[:, 0], out.timestamps)


def test_resample_needs_two_samples():
    with pytest.raises(ValueError):
        resample(_stream(STREAM_KEYS[0], [0.0]), 50.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.005, 0.1), min_size=2, max_size=40), st.floats(-50, 50), st.floats(-5, 5))
def test_resample_linear_and_constant_preserved(steps, c, slope):
    t = np.cumsum(np.r_[0.0, steps])
    vals = np.column_stack([np.full_like(t, c), c + slope * t, t])
    out = resample(_stream(STREAM_KEYS[0], t, vals), 50.0)
    np.testing.assert_array_equal(out.values[:, 0], c)
    np.testing.assert_allclose(out.values[:, 1], c + slope * out.timestamps, atol=1e-9)
    assert np.all(np.diff(out.timestamps) > 0)


def _span(key, start, end, rate=50.0):
    return _stream(key, np.arange(round(start * rate), round(end * rate)) / rate, rate=rate)


def test_align_intersection():
    phone = [_span(k, 0, 100) for k in STREAM_KEYS[:2]]
    watch = [_span(k, 2, 98) for k in STREAM_KEYS[2:]]
    trace = align_devices(phone, watch)
    assert trace.duration == pytest.approx(96.0)
    assert all(s.start == 0.0 for s in trace.streams.values())
    assert trace[(Device.PHONE, Sensor.ACC)].values[0, 0] == pytest.approx(2.0)


def test_align_disjoint():
    with pytest.raises(ValueError, match="empty intersection"):
        align_devices([_span(k, 0, 10) for k in STREAM_KEYS[:2]], [_span(k, 20, 30) for k in STREAM_KEYS[2:]],
                      max_skew=100)


def test_align_identical():
    trace = align_devices([_span(k, 0, 10) for k in STREAM_KEYS[:2]], [_span(k, 0, 10) for k in STREAM_KEYS[2:]])
    assert trace.duration == pytest.approx(10.0)


def test_align_skew_and_min_duration():
    phone = [_span(k, 0, 100) for k in STREAM_KEYS[:2]]
    watch = [_span(k, 20, 98) for k in STREAM_KEYS[2:]]
    with pytest.raises(ValueError, match="skew"):
        align_devices(phone, watch, max_skew=5)
    with pytest.raises(ValueError, match="shorter"):
        align_devices(phone, [_span(k, 0, 3) for k in STREAM_KEYS[2:]], min_duration=6.0)


def test_uniform_trace_jittered():
    rng = np.random.default_rng(3)
    streams = {}
    for k in STREAM_KEYS:
        t = np.arange(500) / 50.0 + rng.uniform(0, 0.004, 500) + 0.01
        streams[k] = _stream(k, t)
    out = uniform_trace(PairedTrace("j", streams))
    n = {len(s) for s in out.streams.values()}
    assert len(n) == 1
    for s in out.streams.values():
        np.testing.assert_allclose(np.diff(s.timestamps), 0.02, atol=1e-12)
        assert s.timestamps[0] == 0.0


def test_trace_requires_all_streams():
    t = np.arange(10) / 50
    with pytest.raises(TraceFormatError, match="missing stream Watch/Gyroscope"):
        PairedTrace("x", {k: _stream(k, t) for k in STREAM_KEYS[:3]})
