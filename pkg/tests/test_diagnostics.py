import math
import threading
import time
from pathlib import Path

import numpy as np
import pytest

from lagmhd.diagnostics import (INEQUALITIES, DiagnosticsRecord, QueuedSink, Recorder,
                                check_J_bound, inequality_monitors, total_energy)
from lagmhd.model import Grid, compute_E0
from lagmhd.stepper import StepConfig, run

from conftest import rest_state

GOLDEN = Path(__file__).parent / "golden"


def test_rest_energy_is_zero(params):
    assert total_energy(rest_state(Grid(4.0, 41)), params) == 0.0


def test_total_energy_matches_E0_at_start(active_state, params):
    assert total_energy(active_state, params) == pytest.approx(compute_E0(active_state, params),
                                                               rel=1e-14)


def test_J_bound_on_rest_state():
    check = check_J_bound(rest_state(Grid(4.0, 41)), 0.5)
    assert check.min_J == 1.0 and check.satisfied


def test_monitors_on_zero_fields(params):
    mons = inequality_monitors(rest_state(Grid(4.0, 41)), params)
    assert set(mons) == set(INEQUALITIES)
    for m in mons.values():
        assert m.slack == 0.0 and m.satisfied


def test_monitors_on_active_state(active_state, params):
    mons = inequality_monitors(active_state, params)
    assert all(m.satisfied for m in mons.values())
    assert all(m.slack >= 0 for m in mons.values())


def test_columns_are_frozen():
    expected = (GOLDEN / "diagnostics_columns.txt").read_text().split()
    assert DiagnosticsRecord.columns() == expected


def test_first_record_has_no_pair_residuals(active_state, params):
    rec = Recorder(active_state, params).record(active_state)
    assert rec.t == 0.0 and rec.energy_rel_drift == 0.0
    assert math.isnan(rec.residual_h2) and math.isnan(rec.residual_G)
    assert rec.recon_J_mismatch == 0.0
    assert rec.monitors_ok == 1 and rec.J_bound_ok == 1
    assert len(rec.values()) == len(DiagnosticsRecord.columns())


def test_recorder_toggles_blank_costly_columns(active_state, params):
    rec = Recorder(active_state, params, residuals=False, reconstructions=False)
    run(active_state, params, StepConfig(dt_max=1e-2, t_end=0.05, output_every=2),
        recorder=rec, sinks=[lambda r, s: None])
    last = rec.records[-1]
    assert math.isnan(last.residual_h2) and math.isnan(last.recon_Jh2_mismatch)
    assert last.int_hy_over_sqrt_J_sq > 0


def test_dissipation_integrals_grow(active_state, params):
    rec = Recorder(active_state, params)
    run(active_state, params, StepConfig(dt_max=1e-2, t_end=0.1, output_every=2),
        recorder=rec, sinks=[lambda r, s: None])
    series = [r.int_hy_over_sqrt_J_sq for r in rec.records]
    assert series[0] == 0.0
    assert all(b > a for a, b in zip(series, series[1:]))


def test_queued_sink_preserves_order():
    got = []
    sink = QueuedSink(lambda rec, state: got.append(rec), maxsize=2)
    for k in range(50):
        sink(k, None)
    sink.close()
    assert got == list(range(50))


def test_queued_sink_applies_back_pressure():
    release = threading.Event()
    sink = QueuedSink(lambda rec, state: release.wait(), maxsize=1)
    sink(0, None)  # taken by the worker, which then blocks
    time.sleep(0.05)
    sink(1, None)  # fills the queue
    done = threading.Event()
    threading.Thread(target=lambda: (sink(2, None), done.set()), daemon=True).start()
    assert not done.wait(0.1)
    release.set()
    assert done.wait(1.0)
    sink.close()


def test_queued_sink_surfaces_errors():
    def broken(rec, state):
        raise OSError("disk full")

    sink = QueuedSink(broken)
    sink(0, None)
    with pytest.raises(OSError, match="disk full"):
        sink.close()
