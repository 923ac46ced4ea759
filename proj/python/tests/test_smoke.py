import math

import numpy as np
import pytest

import nfsde

SMALL = {
    "model": {"preset": "brownian"},
    "sim": {"T": 0.5, "dt": 0.0625, "tau": 0.25, "n_paths": 24, "seed": 3},
    "tilt": {"kind": "constant", "h": 0.5, "h_bound": 0.5},
    "inequality": {"bootstrap": 10, "checker_pairs": 100},
    "threads": 1,
}


def test_constants():
    assert nfsde.alpha(1, 0, 1, 0, 1) == pytest.approx(2.0, abs=1e-12)
    assert nfsde.beta(1, 0, 1, 0) == pytest.approx(2.0, abs=1e-12)
    assert nfsde.c_lambda(0, 0, 2, 1, 1) == pytest.approx(4.0, abs=1e-12)
    row = nfsde.constants(T=1, kappa=0, l1=1, l2=0, l3=1)
    assert row["alpha"] == pytest.approx(2.0)


def test_kappa_one_is_rejected():
    with pytest.raises(nfsde.ValidationError, match=r"\(A1\)"):
        nfsde.constants(T=1, kappa=1.0)


def test_exact_w2_brute_force():
    rng = np.random.default_rng(0)
    cost = rng.random((4, 4))
    from itertools import permutations

    best = min(sum(cost[i, p[i]] for i in range(4)) for p in permutations(range(4)))
    assert nfsde.exact_w2(cost) == pytest.approx(math.sqrt(best / 4), abs=1e-12)


def test_simulate_shapes_and_determinism():
    paths, seeds = nfsde.simulate(SMALL)
    assert len(paths) == 24 and len(seeds) == 24
    assert paths[0].shape == (4 + 8 + 1, 1)
    again, _ = nfsde.simulate(SMALL)
    assert all(np.array_equal(a, b) for a, b in zip(paths, again))
    # Zero initial segment under the Brownian preset.
    assert np.all(paths[0][:5] == 0.0)


def test_metric_from_arrays():
    paths, _ = nfsde.simulate(SMALL)
    d = nfsde.rho_inf(paths[0], paths[1], 0.0625, 0.25)
    assert d == pytest.approx(np.max(np.abs(paths[0] - paths[1])), abs=1e-14)


def test_couple_entropy():
    s = nfsde.couple_summary(SMALL)
    assert s["entropy"] == pytest.approx(0.5 * 0.25 * 0.5, rel=1e-14)


def test_verify_report():
    r = nfsde.verify(SMALL)
    assert r["pass"] is True
    assert r["schema_version"] == 1
    assert r["config_hash"] == nfsde.config_hash(SMALL)


def test_validation_error_names_field():
    with pytest.raises(nfsde.ValidationError, match="sim.dt"):
        nfsde.simulate(SMALL, ["sim.dt=-1"])
