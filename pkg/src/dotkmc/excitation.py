"""Pulse-train excitation and full trajectory simulation.

Two pumping schemes inject carriers at the start of each repetition period:

* non-resonant (above-band): the number of electron-hole pairs per pulse is
  Poissonian with mean ``p_in``; each captured carrier picks a spin column
  uniformly at random and falls back to the opposite column when its choice
  is Pauli-blocked (discarded if both columns are full),
* resonant: a pi-pulse prepares one bright pair of the configured
  polarization with probability one, but only when the dot is completely
  empty; any occupation detunes the transition and blocks the pulse.

Between pulses the state advances by the exact event sampler from
:mod:`dotkmc.kinetics`. The dot state persists across period boundaries,
which is what traps population in metastable dark configurations.

The random stream of a trajectory is consumed in a fixed canonical order
(injection draws, then per event: waiting time, channel selection, and a
detector coin for radiative events), so a (seed, params, schedule) triple
pins the entire photon record bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinetics import CLASS_ORDER, DEFAULT_N_LEVELS, QDState, RateParams, _classify
from .observables import AccumulatorSet, PhotonRecord
from .rng import make_rng

__all__ = [
    "NonResonant",
    "Resonant",
    "PulseSchedule",
    "inject_nonresonant",
    "inject_resonant",
    "run_trajectory",
    "advance_cycles",
]

POLARIZATIONS = ("up", "dn")  # "up" drives (e_up, h_dn); "dn" drives (e_dn, h_up)


@dataclass(frozen=True)
class NonResonant:
    """Above-band pumping with mean ``p_in`` pairs per pulse."""

    p_in: float

    def __post_init__(self):
        if not (self.p_in >= 0.0 and math.isfinite(self.p_in)):
            raise ValueError(f"p_in must be finite and >= 0, got {self.p_in}")


@dataclass(frozen=True)
class Resonant:
    """Pi-pulse pumping of one bright-exciton polarization."""

    polarization: str = "up"

    def __post_init__(self):
        if self.polarization not in POLARIZATIONS:
            raise ValueError(f"polarization must be one of {POLARIZATIONS}")


@dataclass(frozen=True)
class PulseSchedule:
    period_t: float
    n_cycles: int
    scheme: NonResonant | Resonant

    def __post_init__(self):
        if not self.period_t > 0.0:
            raise ValueError("period_t must be positive")
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if not isinstance(self.scheme, (NonResonant, Resonant)):
            raise TypeError("scheme must be NonResonant or Resonant")


def _inject_counts_nonresonant(ne_up, ne_dn, nh_up, nh_dn, cap, p_in, rng):
    """One Poisson pulse applied to raw counts; returns the updated counts."""
    n = rng.poisson(p_in)
    random = rng.random
    for _ in range(n):
        if random() < 0.5:
            if ne_up < cap:
                ne_up += 1
            elif ne_dn < cap:
                ne_dn += 1
        else:
            if ne_dn < cap:
                ne_dn += 1
            elif ne_up < cap:
                ne_up += 1
    for _ in range(n):
        if random() < 0.5:
            if nh_up < cap:
                nh_up += 1
            elif nh_dn < cap:
                nh_dn += 1
        else:
            if nh_dn < cap:
                nh_dn += 1
            elif nh_up < cap:
                nh_up += 1
    return ne_up, ne_dn, nh_up, nh_dn


def inject_nonresonant(
    state: QDState, p_in: float, rng: np.random.Generator
) -> QDState:
    """Capture a Poissonian number of electron-hole pairs, clipped by Pauli.

    Spins are drawn uniformly per carrier (electrons first, then holes); a
    carrier whose chosen column is full moves to the opposite column when
    possible and is lost otherwise.
    """
    if p_in < 0.0:
        raise ValueError("p_in must be >= 0")
    counts = _inject_counts_nonresonant(
        *state.counts(), state.n_levels, p_in, rng
    )
    return QDState(*counts, state.n_levels)


def inject_resonant(state: QDState, polarization: str = "up") -> QDState:
    """Pi-pulse injection: one bright pair if the dot is empty, else no-op."""
    if polarization not in POLARIZATIONS:
        raise ValueError(f"polarization must be one of {POLARIZATIONS}")
    if not state.is_empty:
        return state
    if polarization == "up":
        return QDState(1, 0, 0, 1, state.n_levels)
    return QDState(0, 1, 1, 0, state.n_levels)


def advance_cycles(
    state: QDState,
    params: RateParams,
    scheme: NonResonant | Resonant,
    period_t: float,
    n_cycles: int,
    rng: np.random.Generator,
    acc: AccumulatorSet | None = None,
    photon_log: list | None = None,
) -> QDState:
    """Drive ``n_cycles`` pulse periods, streaming photons into the sinks.

    The inner loop inlines the event sampler of :func:`dotkmc.kinetics.step_ssa`
    with identical arithmetic and random-stream consumption. Returns the final
    state so that callers can chain segments (burn-in, checkpointing).

    Detector coins are drawn for every radiative event even when nothing is
    recorded, keeping the stream layout independent of the sink configuration.
    """
    ne_up, ne_dn, nh_up, nh_dn = state.counts()
    cap = state.n_levels
    gr = params.gamma_r
    gnr = params.gamma_nr
    gsf = params.gamma_sf
    fp = params.purcell
    resonant = isinstance(scheme, Resonant)
    pol_up = resonant and scheme.polarization == "up"
    p_in = 0.0 if resonant else scheme.p_in
    period = period_t

    random = rng.random
    poisson = rng.poisson
    log = math.log
    add_photon = acc.add_photon if acc is not None else None

    for k in range(n_cycles):
        if resonant:
            if ne_up == 0 and ne_dn == 0 and nh_up == 0 and nh_dn == 0:
                if pol_up:
                    ne_up = 1
                    nh_dn = 1
                else:
                    ne_dn = 1
                    nh_up = 1
        else:
            n = poisson(p_in)
            for _ in range(n):
                if random() < 0.5:
                    if ne_up < cap:
                        ne_up += 1
                    elif ne_dn < cap:
                        ne_dn += 1
                else:
                    if ne_dn < cap:
                        ne_dn += 1
                    elif ne_up < cap:
                        ne_up += 1
            for _ in range(n):
                if random() < 0.5:
                    if nh_up < cap:
                        nh_up += 1
                    elif nh_dn < cap:
                        nh_dn += 1
                else:
                    if nh_dn < cap:
                        nh_dn += 1
                    elif nh_up < cap:
                        nh_up += 1

        t = k * period
        t_end = (k + 1) * period
        while True:
            pair_up = ne_up if ne_up < nh_dn else nh_dn
            pair_dn = ne_dn if ne_dn < nh_up else nh_up
            r0 = pair_up * gr
            r1 = pair_dn * gr
            if ne_up + ne_dn == 1 and nh_up + nh_dn == 1:
                if pair_up == 1:
                    r0 *= fp
                elif pair_dn == 1:
                    r1 *= fp
            r2 = ne_up * gnr
            r3 = ne_dn * gnr
            r4 = nh_up * gnr
            r5 = nh_dn * gnr
            r6 = ne_up * gsf if ne_dn < cap else 0.0
            r7 = ne_dn * gsf if ne_up < cap else 0.0
            r8 = nh_up * gsf if nh_dn < cap else 0.0
            r9 = nh_dn * gsf if nh_up < cap else 0.0
            total = r0 + r1 + r2 + r3 + r4 + r5 + r6 + r7 + r8 + r9
            if total <= 0.0:
                break
            t_next = t + (-log(1.0 - random()) / total)
            if not t_next < t_end:
                break
            t = t_next
            x = random() * total
            if x < r0 + r1:
                # radiative: classify before the pair is removed
                arm = 0 if random() < 0.5 else 1
                if add_photon is not None or photon_log is not None:
                    cls = _classify(ne_up + ne_dn, nh_up + nh_dn)
                    if add_photon is not None:
                        add_photon(t, t - k * period, k, cls, arm)
                    if photon_log is not None:
                        photon_log.append(
                            PhotonRecord(t, t - k * period, k, CLASS_ORDER[cls], arm)
                        )
                if x < r0:
                    ne_up -= 1
                    nh_dn -= 1
                else:
                    ne_dn -= 1
                    nh_up -= 1
            else:
                c = r0 + r1 + r2
                if x < c:
                    ne_up -= 1
                elif x < c + r3:
                    ne_dn -= 1
                elif x < c + r3 + r4:
                    nh_up -= 1
                elif x < c + r3 + r4 + r5:
                    nh_dn -= 1
                elif x < c + r3 + r4 + r5 + r6:
                    ne_up -= 1
                    ne_dn += 1
                elif x < c + r3 + r4 + r5 + r6 + r7:
                    ne_dn -= 1
                    ne_up += 1
                elif x < c + r3 + r4 + r5 + r6 + r7 + r8:
                    nh_up -= 1
                    nh_dn += 1
                else:
                    nh_dn -= 1
                    nh_up += 1

    return QDState(ne_up, ne_dn, nh_up, nh_dn, cap)


def run_trajectory(
    params: RateParams,
    schedule: PulseSchedule,
    seed,
    sinks: AccumulatorSet,
    *,
    n_levels: int = DEFAULT_N_LEVELS,
    burn_in: int = 0,
    initial_state: QDState | None = None,
    photon_log: list | None = None,
) -> AccumulatorSet:
    """Simulate a full pulse train into the given accumulator set.

    ``burn_in`` cycles are simulated first without recording so that the
    cycle-start state distribution relaxes toward stationarity; recorded
    cycle indices and photon times then restart at zero.
    """
    if sinks.period_t != schedule.period_t:
        raise ValueError("accumulator period differs from schedule period")
    rng = make_rng(seed)
    state = initial_state if initial_state is not None else QDState.empty(n_levels)
    if burn_in > 0:
        state = advance_cycles(
            state, params, schedule.scheme, schedule.period_t, burn_in, rng
        )
    sinks.begin_trajectory(schedule.n_cycles)
    advance_cycles(
        state,
        params,
        schedule.scheme,
        schedule.period_t,
        schedule.n_cycles,
        rng,
        sinks,
        photon_log,
    )
    sinks.end_trajectory()
    return sinks
