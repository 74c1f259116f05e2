import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gdnls.io import (
    GAUGED_COLUMNS,
    GDNLS_COLUMNS,
    HEADER_SIZE,
    MAGIC,
    SnapshotFormatError,
    dump_report,
    parse_snapshot,
    read_csv,
    read_report,
    read_snapshot,
    series_rows,
    snapshot_bytes,
    to_jsonable,
    write_csv,
    write_report,
    write_snapshot,
)
from gdnls.spectral import Grid

any_complex = st.complex_numbers(allow_nan=True, allow_infinity=True)


@given(arrays(np.complex128, 16, elements=any_complex), st.floats(allow_nan=False), st.floats(1.0, 10.0))
def test_snapshot_bytes_round_trip_bit_exact(values, t, sigma):
    g = Grid(16, 7.25)
    snap = parse_snapshot(snapshot_bytes(g.field(values), t, sigma))
    assert snap.field.values.tobytes() == values.astype("<c16").tobytes()
    assert snap.time == t and snap.sigma == sigma
    assert snap.field.grid == g


def test_snapshot_file_round_trip(tmp_path):
    g = Grid(64, 20.0)
    f = g.field(np.exp(-(g.nodes**2)) * (1 + 1j / 3))
    path = write_snapshot(tmp_path / "sub" / "u.bin", f, 1.5, 3.0)
    assert path.stat().st_size == HEADER_SIZE + 16 * 64
    raw = path.read_bytes()
    assert raw[:6] == MAGIC
    assert struct.unpack_from("<I", raw, 6)[0] == 64
    snap = read_snapshot(path)
    assert np.array_equal(snap.field.values, f.values) and snap.time == 1.5


def test_snapshot_rejects_corrupt_input():
    g = Grid(8, 4.0)
    good = snapshot_bytes(g.zeros(), 0.0, 2.0)
    with pytest.raises(SnapshotFormatError):
        parse_snapshot(good[:10])
    with pytest.raises(SnapshotFormatError):
        parse_snapshot(b"XXXXXX" + good[6:])
    with pytest.raises(SnapshotFormatError):
        parse_snapshot(good[:-1])
    with pytest.raises(SnapshotFormatError):
        parse_snapshot(good + b"\0" * 16)


def test_csv_header_and_float_round_trip(tmp_path):
    rows = [[0.0, 0.1, 1 / 3, -2.5e-300, 7, True, None, "x"]]
    cols = ("t", "a", "b", "c", "n", "flag", "none", "s")
    path = write_csv(tmp_path / "s.csv", cols, rows)
    text = path.read_text()
    assert text.splitlines()[0] == ",".join(cols)
    back = read_csv(path)[0]
    assert float(back["b"]) == 1 / 3 and float(back["c"]) == -2.5e-300
    assert back["n"] == "7" and back["flag"] == "1" and back["none"] == ""


def test_csv_dict_rows_and_series_rows(tmp_path):
    series = {c: np.arange(3.0) * i for i, c in enumerate(GAUGED_COLUMNS)}
    rows = series_rows([0.0, 0.5, 1.0], series, GAUGED_COLUMNS)
    assert rows[1][0] == 0.5 and rows[2][-1] == 2.0 * (len(GAUGED_COLUMNS) - 1)
    path = write_csv(tmp_path / "d.csv", GDNLS_COLUMNS[:3], [{"t": 1.0, "energy": 2.0}])
    assert read_csv(path) == [{"t": "1.0", "mass": "", "energy": "2.0"}]


def test_json_report_deterministic(tmp_path):
    rep = {"b": np.float64(0.25), "a": [np.int64(3), np.nan, np.inf], "c": np.array([1.0, 2.0]), "d": tmp_path}
    text = dump_report(rep)
    assert text == dump_report(dict(reversed(list(rep.items()))))
    assert text.index('"a"') < text.index('"b"')
    back = read_report(write_report(tmp_path / "r.json", rep))
    assert back["a"] == [3, None, None] and back["c"] == [1.0, 2.0] and back["d"] == str(tmp_path)
    assert to_jsonable((np.bool_(True),)) == [True]
