import numpy as np
import pytest

from inst3d import isr, projection
from inst3d.tensor import ops
from inst3d.verify import FAULTS, inject_fault, run_verify


def test_invariants_pass_and_report_is_machine_readable():
    rep = run_verify("invariants", size=5)
    assert rep.passed
    d = rep.to_dict()
    assert d["schema_version"] == 1 and d["failed"] == [] and len(d["checks"]) == len(rep.checks)


def test_fault_names_failed_invariant():
    rep = run_verify("invariants", fault="spatial-antisymmetry", size=3)
    assert not rep.passed and "invariants/spatial.antisymmetric_channels" in rep.failed


def test_fault_patch_is_restored():
    before = (ops.softmax, isr.pair_geometry, projection.rank_views)
    with inject_fault("grad-softmax"):
        assert ops.softmax is not before[0]
    assert (ops.softmax, isr.pair_geometry, projection.rank_views) == before


def test_unknown_fault_and_suite():
    with pytest.raises(ValueError):
        run_verify("invariants", fault="nope")
    with pytest.raises(ValueError):
        run_verify("speed")


def test_residual_leak_caught():
    rep = run_verify("invariants", fault="residual-leak", size=2)
    assert "invariants/residual.no_valid_view" in rep.failed


def test_fault_list():
    assert set(FAULTS) == {"grad-softmax", "spatial-antisymmetry", "residual-leak", "view-tie-order"}
    assert np.isfinite(run_verify("oracles", size=3).checks[0].value)
