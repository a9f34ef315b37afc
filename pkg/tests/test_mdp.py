import numpy as np
import pytest
from hypothesis import given, strategies as st

from privlp.lp import ConfigurationError, ContractError, PrivacyBudget, check_feasible
from privlp.mdp import (
    HAZARD_CELLS,
    GridworldConfig,
    Policy,
    build_gridworld,
    build_hazard_row,
    build_occupancy_lp,
    cmdp_profile,
    cost_of_privacy,
    hazard_cost,
    occupancy_of_policy,
    policy_from_occupancy,
    value_iteration,
    value_of_policy,
)
from privlp.privatizer import privatize_partial
from privlp.solver import solve
from privlp.streams import stream


def _solve(config):
    spec = build_gridworld(config)
    lp = build_occupancy_lp(spec)
    return spec, lp, solve(lp)


def test_default_sizes():
    spec = build_gridworld(GridworldConfig())
    assert (spec.p, spec.q) == (50, 4)
    lp = build_occupancy_lp(spec)
    assert lp.n == 200 and lp.m == 1 and lp.A_eq.shape == (50, 200)
    assert len(HAZARD_CELLS) == 12


def test_single_cell_grid():
    cfg = GridworldConfig(width=1, height=1, start=(0, 0), goal=(0, 0), hazards=())
    spec, lp, res = _solve(cfg)
    assert spec.p == 1
    assert res.objective == pytest.approx(1 / (1 - cfg.gamma))


def test_wide_corridor_value():
    # goal 9 steps east of the start on a single row
    cfg = GridworldConfig(width=10, height=1, start=(0, 0), goal=(9, 0), hazards=())
    _, _, res = _solve(cfg)
    assert res.objective == pytest.approx(cfg.gamma**9 / (1 - cfg.gamma), rel=1e-10)


@pytest.mark.parametrize("slip", [0.0, 0.2])
def test_unconstrained_value_matches_value_iteration(slip):
    cfg = GridworldConfig(f0=1e6, slip=slip)
    spec, _, res = _solve(cfg)
    v = value_iteration(spec)
    s0 = int(np.argmax(spec.initial_dist))
    assert res.objective == pytest.approx(v[s0], rel=1e-9)


def test_occupancy_mass_and_policy_roundtrip():
    cfg = GridworldConfig()
    spec, lp, res = _solve(cfg)
    assert res.x.sum() == pytest.approx(1 / (1 - cfg.gamma), rel=1e-9)
    pol = policy_from_occupancy(res.x, spec.q)
    assert value_of_policy(spec, pol) == pytest.approx(res.objective, rel=1e-8)
    np.testing.assert_allclose(occupancy_of_policy(spec, pol), res.x, atol=1e-8)
    assert hazard_cost(spec, res.x) <= cfg.f0 + 1e-9


@given(st.integers(0, 10**6))
def test_any_policy_occupancy_is_feasible_for_flow(seed):
    spec = build_gridworld(GridworldConfig(width=4, height=3, goal=(3, 2), hazards=((1, 1),)))
    probs = np.random.default_rng(seed).dirichlet(np.ones(spec.q), spec.p)
    x = occupancy_of_policy(spec, Policy(probs))
    lp = build_occupancy_lp(spec)
    np.testing.assert_allclose(lp.A_eq @ x, lp.b_eq, atol=1e-10)
    assert value_of_policy(spec, Policy(probs)) == pytest.approx(lp.c @ x, rel=1e-9)


def test_hazard_row_values():
    cfg = GridworldConfig()
    spec = build_gridworld(cfg)
    row, f0, frag = build_hazard_row(spec)
    assert f0 == 0.6
    s = 1 * cfg.width + 0  # cell (0, 1)
    np.testing.assert_allclose(row[s * 4 : s * 4 + 4], 0.6 * 0.95)
    assert np.count_nonzero(row) == 12 * 4
    assert np.all(frag["A_sup"] >= row)
    assert frag["b_inf"] == 0.3


def test_discounted_weighting():
    spec = build_gridworld(GridworldConfig(hazard_weighting="discounted"))
    row, _, _ = build_hazard_row(spec)
    assert row.max() == pytest.approx(0.6)


def test_no_hazards_gives_zero_row():
    spec = build_gridworld(GridworldConfig(hazards=()))
    row, _, frag = build_hazard_row(spec)
    assert not row.any() and not frag["mask"].any()


def test_non_goal_mask_covers_every_other_state():
    spec = build_gridworld(GridworldConfig(mask_mode="non_goal"))
    prof = cmdp_profile(spec, 1.0, 0.1)
    assert int(prof.mask_A.sum()) == (spec.p - 1) * spec.q


def test_goal_is_absorbing_and_walls_block():
    cfg = GridworldConfig(width=3, height=2, start=(0, 0), goal=(2, 1), hazards=())
    spec = build_gridworld(cfg)
    goal = 1 * 3 + 2
    assert np.all(spec.transition[goal, :, goal] == 1.0)
    assert spec.transition[0, 1, 0] == 1.0  # west from the corner stays put


def test_slip_spreads_mass():
    spec = build_gridworld(GridworldConfig(width=3, height=3, goal=(2, 2), hazards=(), slip=0.3))
    center = 1 * 3 + 1
    row = spec.transition[center, 0]
    assert row[center + 1] == pytest.approx(0.7)
    assert row[center - 1] == pytest.approx(0.1)


@pytest.mark.parametrize(
    "kw",
    [
        dict(width=0),
        dict(goal=(10, 0)),
        dict(hazards=((20, 1),)),
        dict(mask_mode="bogus"),
        dict(reward_model="distance"),
        dict(slip=1.0),
    ],
)
def test_bad_configs(kw):
    with pytest.raises(ConfigurationError):
        build_gridworld(GridworldConfig(**kw))


def test_from_dict():
    cfg = GridworldConfig.from_dict({"goal": [1, 1], "hazards": [[0, 1]]})
    assert cfg.goal == (1, 1) and cfg.hazards == ((0, 1),)
    with pytest.raises(ConfigurationError):
        GridworldConfig.from_dict({"size": 3})


def test_policy_and_cost_contracts():
    with pytest.raises(ContractError):
        Policy(np.array([[0.5, 0.6]]))
    with pytest.raises(ContractError):
        policy_from_occupancy([-1.0, 1.0], 2)
    assert cost_of_privacy(9.0, 10.0) == pytest.approx(-0.1)
    with pytest.raises(ContractError):
        cost_of_privacy(1.0, 0.0)


def test_unvisited_states_get_uniform_rows():
    pol = policy_from_occupancy([0.0, 0.0, 2.0, 6.0], 2)
    np.testing.assert_allclose(pol.probs, [[0.5, 0.5], [0.25, 0.75]])


def test_private_program_stays_safe():
    spec = build_gridworld(GridworldConfig())
    lp = build_occupancy_lp(spec)
    prof = cmdp_profile(spec, 4 * 0.6 * 0.95, 0.1)
    budget = PrivacyBudget(1.0, 0.1, 0.99, 0.01, 0.0)
    for child in stream(0, 0).spawn(20):
        priv = privatize_partial(lp, prof, budget, {"A", "b"}, child)
        res = solve(priv.lp)
        assert check_feasible(res.x, lp, 1e-7)
