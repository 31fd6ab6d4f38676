import math

import numpy as np
import pytest

from magenergy.errors import FitFailure
from magenergy.protocol import (
    D_GS_HZ,
    FreeEvolution,
    PiHalfPulse,
    PulseSequence,
    Readout,
    SpinStateVector,
    estimate_D,
    evolve,
    pi_half,
    ramsey_fringe,
    run_sequence,
)

REF = D_GS_HZ - 1e6


def test_state_validation():
    with pytest.raises(ValueError):
        SpinStateVector(np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        SpinStateVector(np.array([1.0, 0.0]))
    assert SpinStateVector.ground().population(0) == 1.0


def test_norm_preserved():
    s = SpinStateVector.ground()
    for _ in range(20):
        s = evolve(pi_half(s, 0.3), 1.23e6, 3.7e-7)
    assert s.norm == pytest.approx(1.0, abs=1e-12)


def test_two_pi_halves_flip():
    s = pi_half(pi_half(SpinStateVector.ground()))
    assert s.population(0) == pytest.approx(0.0, abs=1e-15)


def test_ramsey_closed_form():
    for tau in np.linspace(0, 2e-6, 11):
        p = run_sequence(PulseSequence.ramsey(tau, REF), D_GS_HZ)
        assert p == pytest.approx(0.5 * (1 - math.cos(2 * math.pi * 1e6 * tau)), abs=1e-12)


def test_t2_decay():
    tau, t2 = 1.3e-6, 2e-6
    p = run_sequence(PulseSequence.ramsey(tau, REF), D_GS_HZ, t2=t2)
    assert p == pytest.approx(0.5 * (1 - math.exp(-tau / t2) * math.cos(2 * math.pi * 1e6 * tau)), abs=1e-12)


def test_sequence_validation():
    with pytest.raises(ValueError):
        PulseSequence((PiHalfPulse(), FreeEvolution(1e-6)))
    with pytest.raises(ValueError):
        PulseSequence((Readout(), Readout()))
    with pytest.raises(ValueError):
        FreeEvolution(-1.0)


def test_noiseless_recovery():
    D = D_GS_HZ - 405629.0
    taus = np.linspace(0, 10e-6, 200)
    est = estimate_D(ramsey_fringe(D, taus, REF), REF)
    assert est.D_hz == pytest.approx(D, rel=1e-6)


def test_shot_noise_is_seeded():
    taus = np.linspace(0, 5e-6, 50)
    a = ramsey_fringe(D_GS_HZ, taus, REF, shots=1000, seed=4)
    b = ramsey_fringe(D_GS_HZ, taus, REF, shots=1000, seed=4)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "tau_s,p0,shots,counts"


def test_noisy_estimate_within_error():
    D = D_GS_HZ - 405629.0
    taus = np.linspace(0, 10e-6, 200)
    est = estimate_D(ramsey_fringe(D, taus, REF, shots=10000, seed=1), REF)
    assert abs(est.D_hz - D) <= 4 * est.standard_error_hz
    assert est.standard_error_hz < 1e3


def test_fit_failures():
    taus = np.linspace(0, 1e-6, 20)
    with pytest.raises(FitFailure):
        estimate_D(ramsey_fringe(REF, taus, REF), REF)
    with pytest.raises(FitFailure):
        estimate_D(ramsey_fringe(D_GS_HZ, taus[:5], REF), REF)


def test_invalid_fringe_inputs():
    with pytest.raises(ValueError):
        ramsey_fringe(D_GS_HZ, [], REF)
    with pytest.raises(ValueError):
        ramsey_fringe(D_GS_HZ, [0.0, 1e-6], REF, shots=0)
