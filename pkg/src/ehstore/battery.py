"""Battery recursion, consumed-energy rule and outage-state bookkeeping.

The scalar :func:`step` is the reference implementation of one frame.  Long
runs go through a compiled kernel that applies exactly the same arithmetic,
in chunks, so 10^8-frame experiments stream in constant memory.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numba
import numpy as np

from .errors import ParameterError
from .processes import ProcessSpec, SampleStream, derive_seed

CHUNK = 1 << 20


@dataclass(frozen=True)
class BatteryState:
    energy: float = 0.0
    capacity: float = math.inf
    markov_state: int = 0
    frame: int = 0

    def __post_init__(self):
        if not (self.capacity > 0):
            raise ParameterError("battery capacity must be positive")
        if not (0.0 <= self.energy <= self.capacity):
            raise ParameterError("battery energy must lie in [0, capacity]")


@dataclass(frozen=True)
class StepOutcome:
    consumed: float
    overflow_amount: float
    outage: bool
    new_state: BatteryState


def step(state: BatteryState, u: float, p: float) -> StepOutcome:
    if not (0 <= u < math.inf) or not (p >= 0):
        raise ParameterError("arrival must be finite and non-negative, demand non-negative")
    available = state.energy + u
    # ties count as demand met
    if available >= p:
        consumed = p
        outage = False
        residual = available - p
    else:
        consumed = available
        outage = True
        residual = 0.0
    overflow = 0.0
    if residual > state.capacity:
        overflow = residual - state.capacity
        residual = state.capacity
    new = replace(
        state,
        energy=residual,
        markov_state=0 if outage else state.markov_state + 1,
        frame=state.frame + 1,
    )
    return StepOutcome(consumed, overflow, outage, new)


@numba.njit(cache=True)
def _kernel(e, w, e_max, u, p, consumed, energy, state, outage, overflow):
    for i in range(u.size):
        avail = e + u[i]
        if avail >= p[i]:
            pc = p[i]
            e = avail - p[i]
            w += 1
            out = False
        else:
            pc = avail
            e = 0.0
            w = 0
            out = True
        ov = 0.0
        if e > e_max:
            ov = e - e_max
            e = e_max
        consumed[i] = pc
        energy[i] = e
        state[i] = w
        outage[i] = out
        overflow[i] = ov
    return e, w


@dataclass
class Trace:
    """Column store of a simulated path (possibly decimated)."""

    i: np.ndarray
    u: np.ndarray
    p: np.ndarray
    consumed: np.ndarray
    energy: np.ndarray
    state: np.ndarray
    outage: np.ndarray
    overflow: np.ndarray
    final: BatteryState
    e0: float = 0.0
    decimate: int = 1

    def __len__(self):
        return self.i.size

    def outcome(self, k) -> StepOutcome:
        """Row ``k`` as a :class:`StepOutcome`."""
        st = BatteryState(
            float(self.energy[k]), self.final.capacity, int(self.state[k]), int(self.i[k])
        )
        return StepOutcome(
            float(self.consumed[k]), float(self.overflow[k]), bool(self.outage[k]), st
        )

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["i", "u", "p", "p_c", "e", "w", "outage", "overflow"])
            for row in zip(
                self.i, self.u, self.p, self.consumed, self.energy, self.state,
                self.outage.astype(int), self.overflow,
            ):
                wr.writerow([repr(x.item()) if isinstance(x, np.floating) else int(x) for x in row])


def streams_for(arrival: ProcessSpec, demand: ProcessSpec, seed: int):
    return (
        SampleStream(arrival, derive_seed(seed, "arrival")),
        SampleStream(demand, derive_seed(seed, "demand")),
    )


def iter_path(arrival, demand, e0, e_max, frames, seed, chunk=CHUNK, state=None):
    """Yield full-resolution :class:`Trace` chunks covering ``frames`` frames."""
    if frames < 1:
        raise ParameterError("need at least one frame")
    if state is None:
        state = BatteryState(float(e0), float(e_max))
    su, sp = streams_for(arrival, demand, seed)
    su.index = sp.index = state.frame
    e, w, start = state.energy, state.markov_state, state.frame
    done = 0
    while done < frames:
        n = min(chunk, frames - done)
        u = su.sample(n)
        p = sp.sample(n)
        consumed = np.empty(n)
        energy = np.empty(n)
        w_arr = np.empty(n, np.int64)
        out = np.empty(n, np.bool_)
        ov = np.empty(n)
        e, w = _kernel(e, w, state.capacity, u, p, consumed, energy, w_arr, out, ov)
        idx = np.arange(start + done + 1, start + done + n + 1)
        done += n
        final = BatteryState(float(e), state.capacity, int(w), start + done)
        yield Trace(idx, u, p, consumed, energy, w_arr, out, ov, final, e0=float(e0))


def simulate_path(
    arrival: ProcessSpec,
    demand: ProcessSpec,
    e0: float,
    e_max: float,
    frames: int,
    seed: int,
    decimate: int = 1,
    check_causality: bool = True,
) -> Trace:
    """Run the battery for ``frames`` frames from energy ``e0``.

    Keeps every ``decimate``-th frame.  Cumulative harvest/consumption are
    tracked over all frames and the causality constraint is re-checked at every
    prefix.
    """
    if decimate < 1:
        raise ParameterError("decimate must be >= 1")
    parts = []
    harvested = consumed = 0.0
    for tr in iter_path(arrival, demand, e0, e_max, frames, seed):
        if check_causality:
            cu = harvested + np.cumsum(tr.u)
            cc = consumed + np.cumsum(tr.consumed)
            slack = e0 + cu - cc
            tol = 1e-9 * (e0 + cu)
            if np.any(slack < -tol):
                bad = int(np.argmax(slack < -tol))
                raise AssertionError(f"energy causality violated at frame {tr.i[bad]}")
            harvested, consumed = float(cu[-1]), float(cc[-1])
        keep = (tr.i % decimate) == 0 if decimate > 1 else slice(None)
        parts.append(tr if decimate == 1 else _select(tr, keep))
        final = tr.final
    cat = lambda name: np.concatenate([getattr(t, name) for t in parts])
    return Trace(
        cat("i"), cat("u"), cat("p"), cat("consumed"), cat("energy"), cat("state"),
        cat("outage"), cat("overflow"), final, e0=float(e0), decimate=decimate,
    )


def _select(tr, keep):
    return Trace(
        tr.i[keep], tr.u[keep], tr.p[keep], tr.consumed[keep], tr.energy[keep],
        tr.state[keep], tr.outage[keep], tr.overflow[keep], tr.final, tr.e0,
    )
