"""Figure rendering smoke tests (headless backend)."""

import numpy as np

from covdl.plots import save_correlation_plot, save_trace_plot

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_correlation_plot_writes_png(tmp_path):
    path = tmp_path / "corr.png"
    save_correlation_plot(np.linspace(1.0, 0.3, 12), 0.99, path)
    blob = path.read_bytes()
    assert blob[:8] == PNG_MAGIC
    assert len(blob) > 1000


def test_trace_plot_log_scale_for_positive_traces(tmp_path):
    path = tmp_path / "trace.png"
    save_trace_plot(np.geomspace(10.0, 1e-6, 30), path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_trace_plot_handles_zeros_and_empty(tmp_path):
    # zero entries force the linear-scale branch; empty input must not crash
    save_trace_plot(np.array([1.0, 0.5, 0.0]), tmp_path / "lin.png")
    save_trace_plot(np.array([]), tmp_path / "empty.png")
    assert (tmp_path / "lin.png").read_bytes()[:8] == PNG_MAGIC
    assert (tmp_path / "empty.png").read_bytes()[:8] == PNG_MAGIC
