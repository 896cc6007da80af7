import numpy as np
import pytest

from steersman.environment import (EnvError, ModelLibrary, SteeringEnv,
                                   decode_action, initial_layout)
from steersman.plate import ConditionSpec, PlateSpec
from tests.conftest import DESK_CONDITIONS, DESK_PLATE


def make_env(library, **kw):
    kw.setdefault("episode_length", 50)
    return SteeringEnv(library, n_sensors=library.n_sensors, **kw)


class TestDecodeAction:
    def test_code_layout(self):
        assert decode_action(0, 2) == (0, 0)
        assert decode_action(1, 2) == (0, 1)   # sensor p0, one step right
        assert decode_action(4, 2) == (1, 0)
        assert decode_action(7, 2) == (1, 3)

    def test_out_of_range(self):
        with pytest.raises(EnvError):
            decode_action(8, 2)
        with pytest.raises(EnvError):
            decode_action(-1, 2)


class TestInitialLayout:
    def test_even_spacing_on_mid_row(self, desk_library):
        grid = desk_library.grid
        positions = initial_layout(grid, 2)
        rows = [p // grid.cols for p in positions]
        cols = [p % grid.cols for p in positions]
        assert rows == [grid.rows // 2] * 2
        assert cols == [4, 9]

    def test_three_sensors_on_86_columns(self):
        from tests.conftest import STEEL_PLATE_KW
        from steersman.plate import build_plate
        grid = build_plate(PlateSpec(grid_cols=86, grid_rows=17,
                                     **STEEL_PLATE_KW)).grid
        cols = [p % 86 for p in initial_layout(grid, 3)]
        assert cols == [21, 42, 64]

    def test_too_many_sensors(self, desk_library):
        with pytest.raises(EnvError):
            initial_layout(desk_library.grid, 16)


class TestModelLibrary:
    def test_labels_and_lookup(self, desk_library):
        assert desk_library.labels == ["healthy", "damage1"]
        assert desk_library.condition("healthy").spec.label == "healthy"
        with pytest.raises(EnvError):
            desk_library.condition("nope")

    def test_duplicate_labels_rejected(self):
        conds = [ConditionSpec("x", ()), ConditionSpec("x", ())]
        with pytest.raises(EnvError):
            ModelLibrary(DESK_PLATE, conds, n_modes=2, n_sensors=2)

    def test_default_delta_is_region_diagonal(self, desk_library):
        expected = np.hypot(DESK_PLATE.placement_length, DESK_PLATE.width)
        assert desk_library.delta == pytest.approx(expected)

    def test_normalization_positive(self, desk_library):
        for label in desk_library.labels:
            assert desk_library.condition(label).normalization > 0


class TestStep:
    def test_reset_state(self, desk_library):
        env = make_env(desk_library, seed=1)
        state = env.reset("healthy")
        assert state.step_count == 0
        assert state.condition_label == "healthy"
        assert sorted(state.positions) == list(state.positions)
        assert state.occupancy.sum() == 2
        assert all(state.occupancy[list(state.positions)] == 1)

    def test_step_before_reset(self, desk_library):
        with pytest.raises(EnvError):
            make_env(desk_library).step(0)

    def test_action_one_moves_first_sensor_right(self, desk_library):
        env = make_env(desk_library, seed=0)
        state = env.reset("healthy")
        result = env.step(1)
        assert result.state.positions[0] == state.positions[0] + 1
        assert result.state.positions[1] == state.positions[1]

    def test_determinism(self, desk_library):
        rng = np.random.default_rng(5)
        actions = rng.integers(0, 8, size=200)
        trajectories = []
        for _ in range(2):
            env = make_env(desk_library, episode_length=1000, seed=9)
            env.reset("damage1")
            trajectories.append([(env.step(int(a)).state.positions,
                                  env.state.last_score) for a in actions])
        assert trajectories[0] == trajectories[1]

    def test_null_action_off_grid(self, desk_library):
        env = make_env(desk_library, seed=0)
        env.reset("healthy")
        # drive sensor 0 to the left boundary, then push further left
        for _ in range(20):
            env.step(0)
        state = env.state
        assert state.positions[0] % desk_library.grid.cols == 0
        result = env.step(0)
        assert result.info["null_action"] is True
        assert result.reward == 0.0
        assert result.state.positions == state.positions
        assert result.state.last_score == state.last_score

    def test_null_action_every_boundary(self, desk_library):
        grid = desk_library.grid
        env = make_env(desk_library, episode_length=10_000, seed=0)
        env.reset("healthy")

        def assert_null(direction):
            pos = env.state.positions[0]
            assert grid.neighbor(pos, direction) == -1
            before = env.state
            result = env.step(direction)
            assert result.info["null_action"] is True
            assert result.reward == 0.0
            assert result.state.positions == before.positions

        def walk(direction, count):
            for _ in range(count):
                env.step(direction)

        # sensor 0 walks the perimeter (sensor 1 sits on the mid row), so it
        # visits corners where every direction can be checked as a null move
        walk(2, grid.rows)            # top row
        walk(0, grid.cols)            # top-left corner
        assert_null(0)
        assert_null(2)
        walk(3, 2 * grid.rows)        # bottom-left corner
        assert_null(3)
        walk(1, 2 * grid.cols)        # bottom-right corner
        assert_null(1)
        assert_null(3)

    def test_null_action_onto_occupied(self, desk_library):
        env = make_env(desk_library, seed=0)
        env.reset("healthy")
        # sensors start at columns 4 and 9 on the mid row; walk sensor 0
        # right until it is adjacent to sensor 1, then push onto it
        for _ in range(4):
            env.step(1)
        state = env.state
        assert state.positions[0] + 1 == state.positions[1]
        result = env.step(1)
        assert result.info["null_action"] is True
        assert result.state.positions == state.positions

    def test_occupancy_conserved_under_random_actions(self, desk_library):
        env = make_env(desk_library, episode_length=10 ** 9, seed=3)
        env.reset()
        rng = np.random.default_rng(11)
        for _ in range(100_000):
            result = env.step(int(rng.integers(env.n_actions)))
            occ = result.state.occupancy
            assert occ.sum() == 2
            assert set(np.nonzero(occ)[0]) == set(result.state.positions)

    def test_truncation_at_exactly_1000_steps(self, desk_library):
        env = SteeringEnv(desk_library, n_sensors=2, episode_length=1000, seed=0)
        env.reset("healthy")
        for step in range(1, 1001):
            result = env.step(0)  # null after reaching the boundary: cheap
            assert result.truncated is (step == 1000)
        assert result.state.step_count == 1000

    def test_rewards_telescope_to_score_difference(self, desk_library):
        env = make_env(desk_library, episode_length=500, seed=2)
        state = env.reset("damage1")
        initial = state.last_score
        rng = np.random.default_rng(8)
        total = 0.0
        for _ in range(300):
            result = env.step(int(rng.integers(env.n_actions)))
            total += result.reward
        assert total == pytest.approx(result.state.last_score - initial, abs=1e-12)

    def test_score_matches_direct_fim(self, desk_library):
        from steersman.information import ObservationSelector, fim
        env = make_env(desk_library, seed=4)
        env.reset("healthy")
        rng = np.random.default_rng(0)
        for _ in range(50):
            result = env.step(int(rng.integers(env.n_actions)))
        cond = desk_library.condition("healthy")
        direct = fim(ObservationSelector(result.state.positions), cond.basis,
                     cond.covariance, normalization=cond.normalization)
        assert result.info["score"] == pytest.approx(direct.score, abs=1e-12)

    def test_state_immutable(self, desk_library):
        env = make_env(desk_library, seed=0)
        state = env.reset("healthy")
        with pytest.raises(ValueError):
            state.occupancy[0] = 1


class TestObserve:
    def test_occupancy_observation(self, desk_library):
        env = make_env(desk_library, observe_condition=False, seed=0)
        state = env.reset("healthy")
        obs = env.observe(state)
        assert obs.shape == (desk_library.grid.n_nodes,)
        assert np.array_equal(np.nonzero(obs)[0], np.array(state.positions))

    def test_condition_one_hot(self, desk_library):
        env = make_env(desk_library, observe_condition=True, seed=0)
        n = desk_library.grid.n_nodes
        assert env.observation_size == n + 2
        obs_h = env.observe(env.reset("healthy"))
        obs_d = env.observe(env.reset("damage1"))
        assert obs_h[n:].tolist() == [1.0, 0.0]
        assert obs_d[n:].tolist() == [0.0, 1.0]

    def test_reset_samples_conditions(self, desk_library):
        env = make_env(desk_library, seed=123)
        seen = {env.reset().condition_label for _ in range(30)}
        assert seen == {"healthy", "damage1"}
