"""Carrier state and continuous-time stochastic kinetics of a single quantum dot.

The dot holds spin-resolved electrons and holes on a ladder of confinement
levels. Intraband relaxation is taken as instantaneous, so occupied slots are
always the lowest levels of each spin column and the state is fully described
by four occupation counts. Between excitation pulses the state evolves by an
exact stochastic simulation algorithm (SSA) over three kinds of events:

* radiative recombination of a spin-matched electron-hole pair,
* non-radiative loss of a single carrier,
* spin flip of a single carrier into the opposite column (Pauli-blocked
  when the target column is full).

A cavity enhancement factor multiplies the radiative rate only when the dot
holds exactly one spin-matched pair (the bright exciton); all other charge
configurations recombine at the bulk rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum, IntEnum

import numpy as np

__all__ = [
    "DEFAULT_N_LEVELS",
    "ExcitonClass",
    "EventKind",
    "Event",
    "QDState",
    "RateParams",
    "RateVector",
    "total_rates",
    "classify_emission",
    "apply_event",
    "step_ssa",
]

#: Confinement levels per spin column. Deep level ladders let spin-mismatched
#: carriers pile up between pulses; this reservoir of trapped population is
#: what suppresses the exciton line around saturation. Shallow dots (2 levels)
#: cannot hold enough trapped charge to reproduce the observed brightness
#: optimum at non-zero non-radiative rates.
DEFAULT_N_LEVELS = 8


class ExcitonClass(Enum):
    """Charge configuration of the dot at the moment of emission."""

    X = "X"
    X_MINUS = "X-"
    X_PLUS = "X+"
    XX = "XX"
    HIGHER = "higher"

    @property
    def label(self) -> str:
        return self.value


#: fixed order used in CSV output and count arrays
CLASS_ORDER = (
    ExcitonClass.X,
    ExcitonClass.X_MINUS,
    ExcitonClass.X_PLUS,
    ExcitonClass.XX,
    ExcitonClass.HIGHER,
)
CLASS_INDEX = {cls: i for i, cls in enumerate(CLASS_ORDER)}


class EventKind(IntEnum):
    """The ten stochastic channels, in the canonical selection order.

    The integer values define the order in which the cumulative rate sum is
    walked when selecting an event, and therefore the exact random-stream
    consumption of a trajectory.
    """

    RAD_UP_DN = 0  # (e_up, h_dn) pair recombines
    RAD_DN_UP = 1  # (e_dn, h_up) pair recombines
    NR_E_UP = 2
    NR_E_DN = 3
    NR_H_UP = 4
    NR_H_DN = 5
    SF_E_UP_DN = 6
    SF_E_DN_UP = 7
    SF_H_UP_DN = 8
    SF_H_DN_UP = 9

    @property
    def is_radiative(self) -> bool:
        return self <= EventKind.RAD_DN_UP


#: state change (d_ne_up, d_ne_dn, d_nh_up, d_nh_dn) per event kind
EVENT_DELTAS = (
    (-1, 0, 0, -1),
    (0, -1, -1, 0),
    (-1, 0, 0, 0),
    (0, -1, 0, 0),
    (0, 0, -1, 0),
    (0, 0, 0, -1),
    (-1, 1, 0, 0),
    (1, -1, 0, 0),
    (0, 0, -1, 1),
    (0, 0, 1, -1),
)


@dataclass(frozen=True)
class Event:
    kind: EventKind
    time: float  # absolute time, ns


@dataclass(frozen=True)
class QDState:
    """Occupancy counts of the four spin columns.

    Each count is bounded by ``n_levels`` (one carrier per level and spin).
    """

    n_e_up: int = 0
    n_e_dn: int = 0
    n_h_up: int = 0
    n_h_dn: int = 0
    n_levels: int = DEFAULT_N_LEVELS

    def __post_init__(self):
        if self.n_levels < 1:
            raise ValueError(f"n_levels must be >= 1, got {self.n_levels}")
        for name in ("n_e_up", "n_e_dn", "n_h_up", "n_h_dn"):
            count = getattr(self, name)
            if not 0 <= count <= self.n_levels:
                raise ValueError(
                    f"{name}={count} outside [0, n_levels={self.n_levels}]"
                )

    @classmethod
    def empty(cls, n_levels: int = DEFAULT_N_LEVELS) -> "QDState":
        return cls(0, 0, 0, 0, n_levels)

    @property
    def n_electrons(self) -> int:
        return self.n_e_up + self.n_e_dn

    @property
    def n_holes(self) -> int:
        return self.n_h_up + self.n_h_dn

    @property
    def is_empty(self) -> bool:
        return self.n_electrons == 0 and self.n_holes == 0

    def counts(self) -> tuple[int, int, int, int]:
        return (self.n_e_up, self.n_e_dn, self.n_h_up, self.n_h_dn)


@dataclass(frozen=True)
class RateParams:
    """Physical rates (ns^-1) and the cavity enhancement factor.

    ``gamma_r``, ``gamma_nr`` and ``gamma_sf`` are single-particle rates; the
    corresponding exciton-level rates are twice as fast because either carrier
    of the pair can decay or flip.
    """

    gamma_r: float = 1.0
    gamma_nr: float = 0.1
    gamma_sf: float = 0.01
    purcell: float = 1.0

    def __post_init__(self):
        for name in ("gamma_r", "gamma_nr", "gamma_sf", "purcell"):
            value = getattr(self, name)
            if not (value >= 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    @property
    def gamma_nr_x(self) -> float:
        """Non-radiative decay rate of the exciton (two-particle)."""
        return 2.0 * self.gamma_nr

    @property
    def gamma_sf_x(self) -> float:
        """Spin-flip rate of the exciton (two-particle)."""
        return 2.0 * self.gamma_sf

    @property
    def eta_qe_x(self) -> float:
        """Exciton quantum efficiency at the bulk radiative rate."""
        return self.gamma_r / (self.gamma_r + 2.0 * self.gamma_nr)

    @property
    def eta_qe_x_enhanced(self) -> float:
        """Exciton quantum efficiency with the cavity-enhanced radiative rate.

        Reported alongside :attr:`eta_qe_x`; the two differ whenever
        ``purcell != 1``.
        """
        gr = self.gamma_r * self.purcell
        return gr / (gr + 2.0 * self.gamma_nr)


@dataclass(frozen=True)
class RateVector:
    """Instantaneous rate of every stochastic channel (ns^-1)."""

    r_rad_up_dn: float
    r_rad_dn_up: float
    r_nr_e_up: float
    r_nr_e_dn: float
    r_nr_h_up: float
    r_nr_h_dn: float
    r_sf_e_up_to_dn: float
    r_sf_e_dn_to_up: float
    r_sf_h_up_to_dn: float
    r_sf_h_dn_to_up: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.r_rad_up_dn,
            self.r_rad_dn_up,
            self.r_nr_e_up,
            self.r_nr_e_dn,
            self.r_nr_h_up,
            self.r_nr_h_dn,
            self.r_sf_e_up_to_dn,
            self.r_sf_e_dn_to_up,
            self.r_sf_h_up_to_dn,
            self.r_sf_h_dn_to_up,
        )

    @property
    def total(self) -> float:
        return sum(self.as_tuple())

    @property
    def total_radiative(self) -> float:
        return self.r_rad_up_dn + self.r_rad_dn_up

    @property
    def total_nonradiative(self) -> float:
        return self.r_nr_e_up + self.r_nr_e_dn + self.r_nr_h_up + self.r_nr_h_dn

    @property
    def total_spin_flip(self) -> float:
        return (
            self.r_sf_e_up_to_dn
            + self.r_sf_e_dn_to_up
            + self.r_sf_h_up_to_dn
            + self.r_sf_h_dn_to_up
        )


def _rate_tuple(ne_up, ne_dn, nh_up, nh_dn, n_levels, gr, gnr, gsf, fp):
    """Rates of the ten channels as a plain tuple, in EventKind order.

    Shared by the public API, the trajectory hot loop and the exact
    generator-matrix construction so that all paths price events identically.
    """
    pair_up = ne_up if ne_up < nh_dn else nh_dn
    pair_dn = ne_dn if ne_dn < nh_up else nh_up
    r_rad_up = pair_up * gr
    r_rad_dn = pair_dn * gr
    # cavity enhancement only for the exact single bright-pair configuration
    if ne_up + ne_dn == 1 and nh_up + nh_dn == 1:
        if pair_up == 1:
            r_rad_up *= fp
        elif pair_dn == 1:
            r_rad_dn *= fp
    return (
        r_rad_up,
        r_rad_dn,
        ne_up * gnr,
        ne_dn * gnr,
        nh_up * gnr,
        nh_dn * gnr,
        ne_up * gsf if ne_dn < n_levels else 0.0,
        ne_dn * gsf if ne_up < n_levels else 0.0,
        nh_up * gsf if nh_dn < n_levels else 0.0,
        nh_dn * gsf if nh_up < n_levels else 0.0,
    )


def total_rates(state: QDState, params: RateParams) -> RateVector:
    """Compose the full rate vector for a state.

    Radiative channels pair spin-matched carriers through min() occupancies;
    non-radiative channels scale with the column count; spin flips are blocked
    when the target column is full.
    """
    return RateVector(
        *_rate_tuple(
            state.n_e_up,
            state.n_e_dn,
            state.n_h_up,
            state.n_h_dn,
            state.n_levels,
            params.gamma_r,
            params.gamma_nr,
            params.gamma_sf,
            params.purcell,
        )
    )


def _classify(n_electrons: int, n_holes: int) -> int:
    """Class index (into CLASS_ORDER) from total carrier numbers."""
    if n_electrons == 1:
        if n_holes == 1:
            return 0  # X
        if n_holes == 2:
            return 2  # X+
    elif n_electrons == 2:
        if n_holes == 1:
            return 1  # X-
        if n_holes == 2:
            return 3  # XX
    return 4  # higher-order complex


def classify_emission(state_before: QDState) -> ExcitonClass:
    """Classify the emission from a state about to undergo radiative decay.

    Raises ValueError if the state holds no spin-matched pair and therefore
    cannot emit.
    """
    pairs = min(state_before.n_e_up, state_before.n_h_dn) + min(
        state_before.n_e_dn, state_before.n_h_up
    )
    if pairs == 0:
        raise ValueError(f"state {state_before.counts()} has no spin-matched pair")
    return CLASS_ORDER[_classify(state_before.n_electrons, state_before.n_holes)]


def apply_event(state: QDState, kind: EventKind) -> QDState:
    """Return the state after one event of the given kind."""
    d = EVENT_DELTAS[kind]
    return replace(
        state,
        n_e_up=state.n_e_up + d[0],
        n_e_dn=state.n_e_dn + d[1],
        n_h_up=state.n_h_up + d[2],
        n_h_dn=state.n_h_dn + d[3],
    )


def step_ssa(
    state: QDState,
    params: RateParams,
    t_now: float,
    t_end: float,
    rng: np.random.Generator,
) -> tuple[Event | None, QDState, float]:
    """Advance the state by at most one event.

    Samples an exponential waiting time at the total rate; if the event falls
    before ``t_end`` a channel is selected with probability proportional to
    its rate, applied, and returned. Otherwise the state is carried unchanged
    to ``t_end``.

    The random stream is consumed as: one uniform for the waiting time, then
    (only if an event occurs) one uniform for the channel selection.
    """
    if not t_now < t_end:
        raise ValueError(f"t_now={t_now} must be strictly before t_end={t_end}")
    rates = _rate_tuple(
        state.n_e_up,
        state.n_e_dn,
        state.n_h_up,
        state.n_h_dn,
        state.n_levels,
        params.gamma_r,
        params.gamma_nr,
        params.gamma_sf,
        params.purcell,
    )
    total = (
        rates[0] + rates[1] + rates[2] + rates[3] + rates[4]
        + rates[5] + rates[6] + rates[7] + rates[8] + rates[9]
    )
    if total <= 0.0:
        return None, state, t_end
    wait = -math.log(1.0 - rng.random()) / total
    t_event = t_now + wait
    if not t_event < t_end:
        return None, state, t_end
    x = rng.random() * total
    acc = 0.0
    kind = EventKind.SF_H_DN_UP  # fallback for x landing on the top edge
    for k in range(10):
        acc += rates[k]
        if x < acc:
            kind = EventKind(k)
            break
    return Event(kind, t_event), apply_event(state, kind), t_event
