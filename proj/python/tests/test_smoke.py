import json
import math

import pytest

import oanav


def test_giou_identity_and_disjoint():
    a = (0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 0.3)
    assert oanav.box_giou(a, a) == pytest.approx(1.0, abs=1e-12)
    b = (5.0, 0.0, 0.5, 1.0, 1.0, 1.0, 0.0)
    assert oanav.box_giou(a, b) < 0.0
    assert oanav.box_iou(a, b) == 0.0


def test_existence_probability_endpoints():
    assert oanav.existence_probability(0.01) == pytest.approx(1.0)
    assert oanav.existence_probability(0.1) == pytest.approx(0.5)
    with pytest.raises(oanav.Error):
        oanav.existence_probability(0.05, 0.2, 0.1)


def test_scene_is_reproducible():
    s = oanav.generate_scene("sparse", 4)
    assert s == oanav.generate_scene("sparse", 4)
    scene = json.loads(s)
    assert scene["objects"]


def test_episode_metrics():
    assert oanav.variants() == ["Con", "Oppo", "GT-Perc", "Ours"]
    scene = oanav.generate_scene("sparse", 4)
    m = oanav.run_episode(scene, "GT-Perc", seed=2)
    assert m["success"], m["failure"]
    assert m["t_g"] > 0.0 and math.isfinite(m["d_g"])
    assert m == oanav.run_episode(scene, "GT-Perc", seed=2)
