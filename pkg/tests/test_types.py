"""Domain-type invariants and serialization round trips."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smirl import evaluation, features, irl, types
from smirl.errors import ParameterError
from smirl.types import (Demonstration, FeatureVector, ReferencePath,
                         RewardParams, SamplerConfig, Scenario, State,
                         TrainConfig, Trajectory, validate_demonstration)

from conftest import make_straight_trajectory


class TestState:
    def test_heading_wrapped_at_construction(self):
        s = State(0, 0, 3 * np.pi, 1.0)
        assert -np.pi < s.psi <= np.pi
        assert s.psi == pytest.approx(np.pi)

    @given(st.floats(-50, 50, allow_nan=False))
    def test_heading_always_in_range(self, psi):
        s = State(0, 0, psi, 0.0)
        assert -np.pi < s.psi <= np.pi

    def test_negative_speed_rejected(self):
        with pytest.raises(ParameterError):
            State(0, 0, 0, -1.0)


class TestTrajectory:
    def test_arrays_read_only(self):
        t = make_straight_trajectory()
        with pytest.raises(ValueError):
            t.x[0] = 99.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ParameterError):
            Trajectory(dt=0.1, x=[0, 1, 2], y=[0, 1], psi=[0, 0, 0],
                       v=[1, 1, 1])

    def test_nonpositive_dt_rejected(self):
        with pytest.raises(ParameterError):
            Trajectory(dt=0.0, x=[0, 1], y=[0, 0], psi=[0, 0], v=[1, 1])

    def test_equality_is_exact(self):
        a = make_straight_trajectory()
        b = make_straight_trajectory()
        assert a == b
        c = Trajectory(dt=a.dt, x=a.x + 1e-12, y=a.y, psi=a.psi, v=a.v)
        assert a != c


class TestValidateDemonstration:
    def test_well_formed_has_no_violations(self, straight_demo):
        assert validate_demonstration(straight_demo) == []

    def test_short_trajectory_flagged(self, straight_scenario):
        d = Demonstration(ego=make_straight_trajectory(n=2),
                          scenario=straight_scenario, id="short")
        violations = validate_demonstration(d)
        assert any("N >= 3" in v for v in violations)

    def test_partial_overlap_flagged(self, straight_scenario):
        # ego 3 s, other 2 s: the other must cover the ego's time range
        ego = make_straight_trajectory(n=31)
        other = make_straight_trajectory(n=21, y=5.0)
        from dataclasses import replace
        sc = replace(straight_scenario, other_agent=other)
        d = Demonstration(ego=ego, scenario=sc, id="pair")
        violations = validate_demonstration(d)
        assert any("overlap" in v for v in violations)


class TestFeatureOrdering:
    def test_single_global_order(self):
        # every module must key feature vectors by the same constant
        assert types.FEATURE_NAMES == ("v_des", "a_lon", "a_lat", "j_lon",
                                       "fut_dis", "fut_int_dis")
        assert features.FEATURE_NAMES is types.FEATURE_NAMES
        assert irl.feat.FEATURE_NAMES is types.FEATURE_NAMES
        assert evaluation.feat.FEATURE_NAMES is types.FEATURE_NAMES

    def test_feature_vector_names_must_prefix_the_order(self):
        with pytest.raises(ParameterError):
            FeatureVector(names=("a_lon", "v_des"), values=np.zeros(2))
        fv = FeatureVector(names=types.NONINTERACTIVE_FEATURES,
                           values=np.arange(4.0))
        assert fv["j_lon"] == 3.0


class TestConfigs:
    def test_sampler_weights_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            SamplerConfig(w_contract=0.5, w_repel=0.5, w_attract=0.5)

    def test_sampler_accel_signs(self):
        with pytest.raises(ParameterError):
            SamplerConfig(a_min=1.0)

    def test_train_config_bounds(self):
        with pytest.raises(ParameterError):
            TrainConfig(alpha=0.0)
        with pytest.raises(ParameterError):
            TrainConfig(l1_lambda=-1.0)

    def test_reward_params_checks(self):
        with pytest.raises(ParameterError):
            RewardParams(theta=np.zeros(4), beta=0.0)
        with pytest.raises(ParameterError):
            RewardParams(theta=np.zeros(4),
                         normalizers=np.array([1.0, 0.0, 1.0, 1.0]))


class TestSerializationRoundTrip:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_demonstration_round_trip_bit_exact(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 30))
        ego = Trajectory(dt=0.1, x=rng.normal(0, 50, n),
                         y=rng.normal(0, 50, n),
                         psi=rng.uniform(-np.pi + 1e-9, np.pi, n),
                         v=rng.uniform(0, 20, n))
        ref = ReferencePath(vertices=rng.normal(0, 20, (4, 2)))
        other = Trajectory(dt=0.1, x=rng.normal(0, 50, n),
                           y=rng.normal(0, 50, n),
                           psi=rng.uniform(-np.pi + 1e-9, np.pi, n),
                           v=rng.uniform(0, 20, n))
        sc = Scenario(reference_paths=(ref,),
                      obstacles=(rng.normal(0, 5, (4, 2)),),
                      other_agent=other,
                      conflict_point=rng.normal(0, 5, 2),
                      v_desired=float(rng.uniform(1, 20)))
        d = Demonstration(ego=ego, scenario=sc, id=f"case{seed}")
        import json
        blob = json.dumps(d.to_dict())
        d2 = Demonstration.from_dict(json.loads(blob))
        assert d2.ego == d.ego
        assert d2.scenario.other_agent == d.scenario.other_agent
        np.testing.assert_array_equal(d2.scenario.conflict_point,
                                      d.scenario.conflict_point)
        np.testing.assert_array_equal(d2.scenario.obstacles[0],
                                      d.scenario.obstacles[0])
        assert d2.id == d.id
