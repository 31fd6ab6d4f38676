"""Ramsey measurement of the fine-structure coefficient D on a spin-1.

Basis order is (|+1>, |0>, |-1>).  Free evolution multiplies |m> by
exp(-i 2 pi D m^2 tau) (D in Hz).  pi/2 pulses are ideal rotations in the
two-level subspace {|0>, |B>} with |B> = (|+1> + |-1>)/sqrt(2); the dark
state (|+1> - |-1>)/sqrt(2) is untouched.  Sequences run in the frame
rotating at the reference frequency, so the fringe oscillates at D - ref.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import optimize, signal

from .errors import FitFailure

NORM_TOL = 1e-12
_REWEIGHT_PASSES = 8
D_GS_HZ = 2.87e9

_B = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)
_ZERO = np.array([0.0, 1.0, 0.0])
_M2 = np.array([1.0, 0.0, 1.0])


@dataclass(frozen=True)
class SpinStateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (3,):
            raise ValueError("a spin-1 state has 3 amplitudes")
        if abs(np.vdot(a, a).real - 1.0) > NORM_TOL:
            raise ValueError("state is not normalized")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def ground(cls) -> "SpinStateVector":
        return cls(_ZERO.astype(complex))

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def population(self, m: int) -> float:
        return float(abs(self.amplitudes[1 - m]) ** 2)


@dataclass(frozen=True)
class PiHalfPulse:
    phase: float = 0.0


@dataclass(frozen=True)
class FreeEvolution:
    tau: float

    def __post_init__(self):
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise ValueError("tau must be non-negative")


@dataclass(frozen=True)
class Readout:
    pass


Step = Union[PiHalfPulse, FreeEvolution, Readout]


@dataclass(frozen=True)
class PulseSequence:
    """Ordered steps applied to |0>; exactly one trailing Readout."""

    steps: tuple
    reference_frequency_hz: float = 0.0

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps or not isinstance(steps[-1], Readout):
            raise ValueError("a sequence must end with a Readout")
        if sum(isinstance(s, Readout) for s in steps) != 1:
            raise ValueError("a sequence has exactly one Readout")
        for s in steps:
            if not isinstance(s, (PiHalfPulse, FreeEvolution, Readout)):
                raise TypeError(f"unknown step {s!r}")

    @classmethod
    def ramsey(cls, tau: float, reference_frequency_hz: float = 0.0) -> "PulseSequence":
        return cls((PiHalfPulse(), FreeEvolution(tau), PiHalfPulse(), Readout()), reference_frequency_hz)


def _checked(amps) -> SpinStateVector:
    return SpinStateVector(amps)


def evolve(state: SpinStateVector, D_hz: float, tau: float) -> SpinStateVector:
    """Free evolution under D J_z^2 for time ``tau`` (s)."""
    if not tau >= 0:
        raise ValueError("tau must be non-negative")
    return _checked(state.amplitudes * np.exp(-2j * math.pi * D_hz * _M2 * tau))


def pi_half(state: SpinStateVector, phase: float = 0.0) -> SpinStateVector:
    """Ideal pi/2 rotation about (cos phase, sin phase) in the {|0>, |B>} subspace."""
    a = state.amplitudes
    c0 = np.dot(_ZERO, a)
    cb = np.dot(_B, a)
    rest = a - c0 * _ZERO - cb * _B
    s = math.sqrt(0.5)
    e = complex(math.cos(phase), math.sin(phase))
    n0 = s * c0 - 1j * s * e.conjugate() * cb
    nb = -1j * s * e * c0 + s * cb
    return _checked(rest + n0 * _ZERO + nb * _B)


def run_sequence(sequence: PulseSequence, D_hz: float, t2: Optional[float] = None) -> float:
    """|0> population after ``sequence``; contrast decays as exp(-tau_total / T2)."""
    state = SpinStateVector.ground()
    detuning = D_hz - sequence.reference_frequency_hz
    elapsed = 0.0
    for step in sequence.steps:
        if isinstance(step, PiHalfPulse):
            state = pi_half(state, step.phase)
        elif isinstance(step, FreeEvolution):
            state = evolve(state, detuning, step.tau)
            elapsed += step.tau
    p0 = state.population(0)
    if t2 is not None:
        p0 = 0.5 + (p0 - 0.5) * math.exp(-elapsed / t2)
    return p0


@dataclass(frozen=True)
class FringeTable:
    tau: np.ndarray
    p0: np.ndarray
    shots: Optional[int] = None
    counts: Optional[np.ndarray] = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.shots is None:
            w.writerow(("tau_s", "p0"))
            for t, p in zip(self.tau, self.p0):
                w.writerow((repr(float(t)), repr(float(p))))
        else:
            w.writerow(("tau_s", "p0", "shots", "counts"))
            for t, p, c in zip(self.tau, self.p0, self.counts):
                w.writerow((repr(float(t)), repr(float(p)), self.shots, int(c)))
        return buf.getvalue()


def ramsey_fringe(D_hz: float, taus: Sequence[float], reference_hz: float = 0.0, shots: Optional[int] = None,
                  seed: Optional[int] = None, t2: Optional[float] = None) -> FringeTable:
    """p0(tau) of the pi/2 - tau - pi/2 sequence, optionally with binomial shot noise."""
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0 or np.any(taus < 0) or not np.all(np.isfinite(taus)):
        raise ValueError("taus must be a non-empty list of non-negative times")
    p = np.array([run_sequence(PulseSequence.ramsey(t, reference_hz), D_hz, t2) for t in taus])
    if shots is None:
        return FringeTable(taus, p)
    if int(shots) != shots or shots <= 0:
        raise ValueError("shots must be a positive integer")
    rng = np.random.default_rng(seed)
    counts = rng.binomial(int(shots), np.clip(p, 0.0, 1.0))
    return FringeTable(taus, counts / shots, int(shots), counts)


@dataclass(frozen=True)
class DEstimate:
    D_hz: float
    standard_error_hz: float
    detuning_hz: float


def _model(tau, a, b, c, f):
    ph = 2.0 * math.pi * f * tau
    return a + b * np.cos(ph) + c * np.sin(ph)


def _frequency_guess(tau, y):
    span = tau.max() - tau.min()
    dt = np.median(np.diff(np.sort(tau)))
    f_max = 0.5 / dt
    freqs = np.linspace(0.05 / span, f_max, max(2000, int(40 * f_max * span)))
    power = signal.lombscargle(tau, y - y.mean(), 2.0 * math.pi * freqs)
    return float(freqs[int(np.argmax(power))])


def estimate_D(fringe: FringeTable, reference_hz: float) -> DEstimate:
    """Fit a + b cos(2 pi f tau) + c sin(2 pi f tau) and return reference + f.

    The detuning sign is not observable from populations; the reference is
    assumed to lie below D.  With shot counts the fit is reweighted with
    binomial variances from the current model until the frequency settles.
    """
    tau = np.asarray(fringe.tau, dtype=float)
    y = np.asarray(fringe.p0, dtype=float)
    if tau.size < 8:
        raise FitFailure("at least 8 fringe points are required")
    if np.ptp(y) <= 1e-12:
        raise FitFailure("constant fringe: detuning is zero or unresolved")
    f0 = _frequency_guess(tau, y)
    p_init = (float(y.mean()), float(y[np.argmin(tau)] - y.mean()), 0.0, f0)
    try:
        popt, pcov = optimize.curve_fit(_model, tau, y, p0=p_init, maxfev=20000)
        if fringe.shots is not None:
            # iterated reweighting with model variances solves the binomial score equations
            for _ in range(_REWEIGHT_PASSES):
                pm = np.clip(_model(tau, *popt), 0.5 / fringe.shots, 1.0 - 0.5 / fringe.shots)
                sigma = np.sqrt(pm * (1.0 - pm) / fringe.shots)
                prev = popt[3]
                popt, pcov = optimize.curve_fit(_model, tau, y, p0=popt, sigma=sigma, absolute_sigma=True,
                                                maxfev=20000)
                if abs(popt[3] - prev) <= 1e-3 * np.sqrt(pcov[3, 3]):
                    break
    except (RuntimeError, ValueError) as exc:
        raise FitFailure(f"sinusoid fit failed: {exc}") from exc
    f = abs(float(popt[3]))
    err = float(np.sqrt(pcov[3, 3])) if np.all(np.isfinite(pcov)) else math.inf
    if f * (tau.max() - tau.min()) < 1.0:
        raise FitFailure("fringe spans less than one period")
    return DEstimate(reference_hz + f, err, f)
