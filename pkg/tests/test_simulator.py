import numpy as np
import pytest
from scipy import stats

from icaccuracy.core import EventKind, validate_record
from icaccuracy.errors import ConfigError
from icaccuracy.predictor import (
    APPENDIX_PARAMETERS,
    ConstantHazards,
    JointModel,
    ProfileBatch,
    QuadraturePredictor,
    SubjectProfile,
)
from icaccuracy.simulator import (
    BiopsySchedule,
    SimulationConfig,
    SimulationDiagnostics,
    TrueOutcome,
    draw_profiles,
    event_proportions,
    generate_biopsy_times,
    generate_dataset,
    observe_subject,
    replicate_rng,
    sample_event_times,
    sample_event_times_batch,
    simulate_psa_series,
    solve_cumulative_hazard,
)


def test_pass_schedule():
    assert generate_biopsy_times(BiopsySchedule("pass"), None, 12.0) == [1, 2, 4, 6, 8, 10, 12]
    assert generate_biopsy_times(BiopsySchedule("pass"), None, 5.0) == [1, 2, 4]


def test_uniform_schedule_gaps():
    rng = np.random.default_rng(0)
    times = np.array(generate_biopsy_times(BiopsySchedule("uniform", 0.3, 4.0), rng, 200.0))
    gaps = np.diff(np.concatenate([[0.0], times]))
    assert gaps.min() >= 0.3 and gaps.max() <= 4.0
    assert times.max() <= 200.0
    assert gaps.mean() == pytest.approx(2.15, abs=0.4)


@pytest.mark.parametrize("name, kind, lo, hi", [("pass", "pass", 0, 0), ("u0.3-4", "uniform", 0.3, 4.0),
                                                 ("U1-2", "uniform", 1.0, 2.0)])
def test_schedule_parsing(name, kind, lo, hi):
    sched = BiopsySchedule.parse(name)
    assert (sched.kind, sched.lo, sched.hi) == (kind, lo, hi)
    assert BiopsySchedule.parse(sched.name) == sched


@pytest.mark.parametrize("name", ["weekly", "u4-1", "u-", "ux-y"])
def test_bad_schedule(name):
    with pytest.raises(ConfigError):
        BiopsySchedule.parse(name)


BIOPSIES = [1.0, 2.0, 4.0, 6.0]


@pytest.mark.parametrize("truth, t_cen, kind, last_neg, end", [
    (TrueOutcome(1.5, 9.0), 12.0, EventKind.PROGRESSION, 1.0, 2.0),
    (TrueOutcome(0.5, 9.0), 12.0, EventKind.PROGRESSION, 0.0, 1.0),
    (TrueOutcome(2.0, 9.0), 12.0, EventKind.PROGRESSION, 1.0, 2.0),
    (TrueOutcome(1.5, 1.8), 12.0, EventKind.TREATMENT, 1.0, 1.8),
    (TrueOutcome(5.0, 3.0), 12.0, EventKind.TREATMENT, 2.0, 3.0),
    (TrueOutcome(3.0, 9.0), 3.5, EventKind.CENSORED, 2.0, 3.5),
    (TrueOutcome(7.0, 15.0), 12.0, EventKind.CENSORED, 6.0, 12.0),
])
def test_observation_rule(truth, t_cen, kind, last_neg, end):
    rec = validate_record(observe_subject(truth, BIOPSIES, t_cen))
    assert rec.delta == kind
    assert (rec.t_last_neg, rec.endpoint) == (last_neg, end)


def test_solver_constant_hazards():
    targets = np.array([0.1, 1.0, 3.0])
    times, capped = solve_cumulative_hazard(ConstantHazards(0.2, 0.1), None, targets, 0)
    np.testing.assert_allclose(times, targets / 0.2, atol=1e-7)
    assert not capped.any()
    times, capped = solve_cumulative_hazard(ConstantHazards(0.2, 0.1), None, np.array([50.0]), 1)
    assert capped.all() and times[0] == 100.0


def test_solver_inverts_joint_model_hazard():
    rng = np.random.default_rng(4)
    batch = draw_profiles(rng, 20)
    targets = rng.exponential(1.0, 20)
    model = JointModel(APPENDIX_PARAMETERS)
    times, capped = solve_cumulative_hazard(model, batch, targets, 0)
    ok = ~capped
    hp, _ = QuadraturePredictor(model).cumulative_hazards(batch[np.flatnonzero(ok)], np.zeros(ok.sum()), times[ok])
    np.testing.assert_allclose(hp, targets[ok], atol=1e-8)


def test_event_times_are_exponential_for_constant_hazards():
    rng = replicate_rng(1, 0)
    profiles = ProfileBatch.from_profiles([SubjectProfile()] * 2000)
    t_prg, t_trt, _ = sample_event_times_batch(profiles, ConstantHazards(0.2, 0.4), rng)
    assert stats.kstest(t_prg, "expon", args=(0, 1 / 0.2)).pvalue > 1e-3
    assert stats.kstest(t_trt, "expon", args=(0, 1 / 0.4)).pvalue > 1e-3


def test_single_subject_sampler():
    out = sample_event_times(SubjectProfile(), APPENDIX_PARAMETERS, replicate_rng(0, 0))
    assert out.t_prg_star > 0 and out.t_trt_star > 0


def test_profiles_within_bounds():
    batch = draw_profiles(np.random.default_rng(0), 5000)
    assert batch.age.min() >= 45 and batch.age.max() <= 80
    assert batch.density.min() >= 0.01 and batch.density.max() <= 1.0
    assert np.cov(batch.u.T) == pytest.approx(APPENDIX_PARAMETERS.omega, abs=0.15)


def test_psa_series():
    prof = SubjectProfile()
    times = np.arange(0, 5, 0.25)
    exact = simulate_psa_series(prof, APPENDIX_PARAMETERS, times, None, noise=False)
    noisy = simulate_psa_series(prof, APPENDIX_PARAMETERS, np.tile(times, 400), np.random.default_rng(3))
    resid = np.array([v for _, v in noisy]) - np.tile([v for _, v in exact], 400)
    scale = APPENDIX_PARAMETERS.tau_eps ** -0.5
    # median |t_3| is 0.7649
    assert np.median(np.abs(resid)) / scale == pytest.approx(0.7649, rel=0.05)


def test_dataset_is_deterministic_and_valid():
    cfg = SimulationConfig(n_subjects=60, seed=9)
    a = generate_dataset(cfg, 1)
    b = generate_dataset(cfg, 1)
    c = generate_dataset(cfg, 2)
    assert [s.record for s in a] == [s.record for s in b]
    assert [s.truth for s in a] != [s.truth for s in c]
    assert [s.record.id for s in a] == [str(i) for i in range(1, 61)]
    for s in a:
        validate_record(s.record)
        times = [t for t, _ in s.record.psa]
        assert times[0] == 0.0 and times[-1] <= s.record.endpoint
        np.testing.assert_allclose(np.diff(times), 0.25)
    props = event_proportions(a)
    assert sum(props.values()) == pytest.approx(1.0)


def test_custom_hazard_model_and_cap_diagnostic():
    diag = SimulationDiagnostics()
    cfg = SimulationConfig(n_subjects=30, seed=1, censoring_rate=0.0)
    subjects = generate_dataset(cfg, 0, diag, hazard_model=ConstantHazards(0.001, 0.001))
    assert diag.capped_event_times > 0
    assert all(s.record.endpoint <= 12.0 for s in subjects)


def test_config_validation():
    with pytest.raises(ConfigError):
        SimulationConfig(n_subjects=0)
    with pytest.raises(ConfigError):
        SimulationConfig(censoring_rate=-1.0)
