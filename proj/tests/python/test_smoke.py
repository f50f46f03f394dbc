import math

import pytest

import council_planner as cp


def scripted_config(**extra):
    config = {
        "seed": 3,
        "environment": "synthetic",
        "generate_tasks": 6,
        "council": [
            {"expert_id": f, "script": "oracle", "family": f}
            for f in ("alpha", "beta", "gamma")
        ],
    }
    config.update(extra)
    return config


def test_oracle():
    solvable, expression, witness = cp.game24_oracle([4, 4, 10, 10])
    assert solvable
    assert expression
    assert len(witness) == 3
    assert not cp.game24_oracle([1, 1, 1, 1])[0]


def test_utility():
    assert cp.sms_utility([]) == 0.5
    assert cp.sms_utility([(2, True), (1, False)]) == pytest.approx(2 / 3)
    assert cp.sms_utility([(3, None)], cold_start_prior=0.25) == 0.25


def test_softmax():
    p = cp.routing_distribution([1.0, 0.0], 0.5)
    assert p[0] == pytest.approx(0.88080, abs=1e-5)
    assert sum(p) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cp.routing_distribution([1.0], 0.0)


def test_fusion_and_uct():
    out = cp.fuse([0.2, 0.8], [0.5, 0.5])
    assert out["alpha"] == 1.0
    assert out["q"] == pytest.approx([0.0, 1.0])
    assert cp.uct(0.5, 2, 8, 1.0) == pytest.approx(0.5 + math.sqrt(math.log(8) / 2))
    assert math.isinf(cp.uct(0.0, 0, 8))


def test_run_is_deterministic():
    first = cp.run(scripted_config())
    second = cp.run(scripted_config())
    assert first == second
    assert first["summary"]["tasks"] == 6
    assert len(first["rows"]) == 6


def test_config_errors():
    with pytest.raises(cp.ConfigError, match="budgett"):
        cp.run(scripted_config(budgett=3))


def test_ablation():
    rows = cp.ablation(scripted_config(seeds=[1, 2]), "value-signal")
    assert [r["variant"] for r in rows] == [
        "full",
        "llm-only",
        "sms-only",
        "env-only",
    ]
    assert all(len(r["per_seed"]) == 2 for r in rows)
