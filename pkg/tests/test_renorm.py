import numpy as np
import pytest

from bolab.flow import FlowSpec, flow_truncated, phase_vector
from bolab.measures import AmplitudeSequence, RadialLaw, sample_state
from bolab.renorm import (RenormContext, centered_sum, limit_phase, phase_convergence_diagnostic,
                          renorm_cauchy_profile, renorm_constant, renorm_flow, renorm_violations)

CTX = RenormContext()


def test_default_context_is_admissible():
    assert renorm_violations(CTX.amps, CTX.law) == []
    assert renorm_violations(AmplitudeSequence.power(0.3), RadialLaw.radial_exponential()) == []


@pytest.mark.parametrize("amps,fragment", [
    (AmplitudeSequence.power(1.0), "converges"),
    (AmplitudeSequence.power(2.0), "converges"),
    (AmplitudeSequence.power(0.25), "|a_n|^4 diverges"),
    (AmplitudeSequence.explicit([1.0, 1.0]), "explicit"),
])
def test_inadmissible_amplitudes(amps, fragment):
    problems = renorm_violations(amps, RadialLaw.gaussian())
    assert any(fragment in p for p in problems)
    with pytest.raises(ValueError):
        RenormContext(amps)


def test_law_must_have_unit_second_moment():
    with pytest.raises(ValueError):
        RenormContext(law=RadialLaw.gaussian(2.0))


def test_constant_and_centered_sum():
    assert renorm_constant(CTX, 3) == pytest.approx(1 + 1 / 2 + 1 / 3)
    z = np.array([1.0, 1.0, 0.0])
    assert centered_sum(z, CTX, 3) == pytest.approx(2 - (1 + 1 / 2 + 1 / 3))
    with pytest.raises(ValueError):
        centered_sum(z, CTX, 4)


def test_limit_phase_identity():
    for seed in range(5):
        z = sample_state(CTX.amps, CTX.law, 128, seed)
        beta = phase_vector(z, 128)
        c = renorm_constant(CTX, 128)
        for n in (1, 2, 7, 128):
            assert abs(limit_phase(z, CTX, n, 128) - (beta[n - 1] + 2 * n * c)) <= 1e-10
    with pytest.raises(ValueError):
        limit_phase(z, CTX, 200, 128)


def test_renorm_flow_is_shifted_truncated_flow():
    z = sample_state(CTX.amps, CTX.law, 32, 2)
    t = 0.7
    c = renorm_constant(CTX, 32)
    n = np.arange(1, 33)
    ref = flow_truncated(z, FlowSpec(32, t)).coeffs * np.exp(2j * t * n * c)
    np.testing.assert_allclose(renorm_flow(z, CTX, 32, t).coeffs, ref, atol=1e-9)


def test_diagnostic_ratios_close_to_one():
    diag = phase_convergence_diagnostic(CTX, [1, 3], [8, 16, 32, 64], 20_000, 3)
    for inc in diag.sum_increments:
        assert abs(inc.ratio - 1) < 5 * inc.std_error / inc.predicted_var + 0.02
    assert set(diag.phase_increments) == {1, 3}
    assert diag.trajectories is None
    with pytest.raises(ValueError):
        phase_convergence_diagnostic(CTX, 9, [8, 16], 100, 3)
    with pytest.raises(ValueError):
        phase_convergence_diagnostic(CTX, 1, [16, 8], 100, 3)


def test_trajectories_and_worker_independence():
    a = phase_convergence_diagnostic(CTX, 2, [4, 8, 16], 3000, 5, keep_trajectories=True)
    b = phase_convergence_diagnostic(CTX, 2, [4, 8, 16], 3000, 5, workers=4, keep_trajectories=True)
    assert a.trajectories[2].shape == (3000, 3)
    assert np.array_equal(a.trajectories[2], b.trajectories[2])
    z = sample_state(CTX.amps, CTX.law, 16, 5, index=17)
    assert a.trajectories[2][17, 1] == pytest.approx(limit_phase(z, CTX, 2, 8), abs=1e-11)


def test_cauchy_profile_decreases():
    prof = renorm_cauchy_profile(CTX, 1.0, [16, 32, 64, 128], 400, 9)
    assert len(prof) == 3
    assert prof[0] > prof[1] > prof[2] > 0
