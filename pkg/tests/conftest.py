"""Shared fixtures: small scenarios, demos, and sample-set builders."""
import numpy as np
import pytest

from smirl.dynamics import VehicleParams
from smirl.types import (Demonstration, ReferencePath, SampleSet,
                         SamplerConfig, Scenario, Trajectory)


@pytest.fixture
def vp():
    return VehicleParams()


@pytest.fixture
def straight_scenario():
    ref = ReferencePath(vertices=np.array([[-10.0, 0.0], [140.0, 0.0]]))
    return Scenario(reference_paths=(ref,), v_desired=10.0)


def make_straight_trajectory(n=40, v=8.0, dt=0.1, y=0.0):
    x = v * dt * np.arange(n)
    return Trajectory(dt=dt, x=x, y=np.full(n, float(y)), psi=np.zeros(n),
                      v=np.full(n, float(v)))


@pytest.fixture
def straight_demo(straight_scenario):
    return Demonstration(ego=make_straight_trajectory(),
                         scenario=straight_scenario, id="demo0")


def synthetic_sample_set(demo, n_samples, feature_matrix, labels=None):
    """Sample set with crafted features; members are cheap straight lines."""
    members = [make_straight_trajectory(n=10, v=5.0 + 0.1 * i)
               for i in range(n_samples)]
    members.append(demo.ego)
    feats = np.asarray(feature_matrix, dtype=float)
    assert feats.shape[0] == n_samples + 1
    names = ("v_des", "a_lon", "a_lat", "j_lon", "fut_dis",
             "fut_int_dis")[:feats.shape[1]]
    ss = SampleSet(demo_id=demo.id, scenario=demo.scenario,
                   members=tuple(members), demo_index=n_samples,
                   labels=tuple(labels) if labels else ())
    return ss.with_features(feats, names)
