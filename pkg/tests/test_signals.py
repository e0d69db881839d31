import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from app.core.signals import half_energy, load_csv, save_csv, save_series_csv, stack, stack_samples
from app.errors import (
    EmptyWindow, LengthMismatch, MalformedHeader, NonFiniteValue, NonUniformGrid,
)
from app.models.signals import SignalWindow


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_csv_reads_dimensions_and_grid(tmp_path):
    path = _write(tmp_path / "data.csv", "t,u_1,y_1,y_2\n0.0,1,2,3\n0.1,4,5,6\n0.2,7,8,9\n")
    window = load_csv(path)
    assert (window.M, window.p, window.m) == (3, 1, 2)
    assert window.dt == pytest.approx(0.1)
    assert window.z[1].tolist() == [4.0, 5.0, 6.0]


def test_save_csv_emits_header_and_lf(tmp_path):
    window = SignalWindow(t0=0.0, dt=0.5, u=[[1.0], [2.0]], y=[[3.0], [4.0]])
    path = tmp_path / "out.csv"
    save_csv(window, str(path))
    raw = path.read_bytes()
    assert raw.startswith(b"t,u_1,y_1\n")
    assert b"\r\n" not in raw
    again = load_csv(str(path))
    assert np.array_equal(again.z, window.z)


def test_series_csv_headers(tmp_path):
    path = tmp_path / "zhat.csv"
    save_series_csv(str(path), np.array([0.0, 1.0]), np.array([[1.0, 2.0], [3.0, 4.0]]), "zhat")
    assert path.read_text().splitlines()[0] == "t,zhat_1,zhat_2"


@pytest.mark.parametrize("header", ["u_1,y_1", "t,y_1,u_1", "t,u_2,y_1", "t,u_1", "t,u_1,y_1,z_1"])
def test_malformed_header(tmp_path, header):
    width = len(header.split(","))
    row = ",".join(["0"] * width)
    path = _write(tmp_path / "bad.csv", f"{header}\n{row}\n")
    with pytest.raises(MalformedHeader):
        load_csv(path)


def test_non_uniform_grid(tmp_path):
    path = _write(tmp_path / "bad.csv", "t,u_1,y_1\n0,0,0\n0.1,0,0\n0.25,0,0\n")
    with pytest.raises(NonUniformGrid):
        load_csv(path)


def test_decreasing_time(tmp_path):
    path = _write(tmp_path / "bad.csv", "t,u_1,y_1\n0.2,0,0\n0.1,0,0\n")
    with pytest.raises(NonUniformGrid):
        load_csv(path)


@pytest.mark.parametrize("value", ["nan", "inf", "abc"])
def test_non_finite_entry(tmp_path, value):
    path = _write(tmp_path / "bad.csv", f"t,u_1,y_1\n0,0,0\n0.1,{value},0\n")
    with pytest.raises(NonFiniteValue):
        load_csv(path)


def test_header_only_file(tmp_path):
    path = _write(tmp_path / "empty.csv", "t,u_1,y_1\n")
    with pytest.raises(EmptyWindow):
        load_csv(path)


def test_window_rejects_mismatched_lengths():
    with pytest.raises(LengthMismatch):
        SignalWindow(t0=0.0, dt=0.1, u=np.zeros((3, 1)), y=np.zeros((2, 1)))


def test_window_is_read_only():
    window = SignalWindow(t0=0.0, dt=0.1, u=np.zeros((3, 1)), y=np.zeros((3, 1)))
    with pytest.raises(ValueError):
        window.u[0, 0] = 1.0


def test_slice_shifts_origin():
    window = SignalWindow(t0=1.0, dt=0.1, u=np.arange(5.0), y=np.arange(5.0))
    part = window.slice(2, 4)
    assert part.t0 == pytest.approx(1.2)
    assert part.u.ravel().tolist() == [2.0, 3.0]
    with pytest.raises(EmptyWindow):
        window.slice(3, 3)


def test_stacking_scales_blocks():
    window = SignalWindow(t0=0.0, dt=0.1, u=[[3.0], [0.0]], y=[[4.0], [0.0]])
    stacked = stack(window)
    assert stacked.blocks == 2 and stacked.block_dim == 2
    assert stacked.norm_squared == pytest.approx(12.5)
    assert half_energy(stacked) == pytest.approx(6.25)


def test_stacking_rejects_mismatched_dot():
    with pytest.raises(LengthMismatch):
        stack_samples(np.ones((3, 2))).dot(stack_samples(np.ones((2, 2))))


@pytest.mark.property
@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 3)), elements=st.floats(-100, 100)))
def test_stacked_inner_product_is_window_mean(samples):
    stacked = stack_samples(samples)
    assert stacked.norm_squared == pytest.approx(np.mean(np.sum(samples * samples, axis=1)), rel=1e-9, abs=1e-9)
