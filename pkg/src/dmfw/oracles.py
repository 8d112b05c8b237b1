"""Online linear optimization oracles.

An oracle plays a point of the constraint set, then receives a linear cost
``<c, .>``. Two learners are provided:

* :class:`OGDOracle` -- projected online gradient descent with the anytime
  step ``step_scale / sqrt(k)``.
* :class:`FTPLOracle` -- follow-the-perturbed-leader, projection free:
  ``lmo(accumulated_cost + z)`` with ``z`` uniform on ``[0, amplitude]^dim``,
  redrawn at every call.

Both classes carry an optional batch ``shape``: an oracle with
``shape=(n, L)`` is ``n * L`` independent learners stored in arrays, which is
how the engine holds one oracle per (agent, inner iteration) pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_real, check_vector

__all__ = ["OracleLog", "OGDOracle", "FTPLOracle", "average_regret", "make_oracle"]


@dataclass
class OracleLog:
    """History of played points and received cost vectors."""

    played: list = field(default_factory=list)
    costs: list = field(default_factory=list)

    def __len__(self):
        return len(self.costs)


def average_regret(log, constraint):
    """``(1/T) (sum_t <u_t, c_t> - min_{u in K} <u, sum_t c_t>)``.

    The comparator is evaluated exactly with one LMO call on the summed cost.
    """
    if len(log) == 0 or len(log.played) != len(log.costs):
        raise ValueError("average_regret needs a non-empty log with matching lengths")
    played = np.asarray(log.played, dtype=float)
    costs = np.asarray(log.costs, dtype=float)
    total = costs.sum(axis=0)
    incurred = np.sum(played * costs, axis=0).sum(axis=-1)
    best = np.sum(constraint.lmo(total) * total, axis=-1)
    return (incurred - best) / len(log)


class _OracleBase:
    kind = None

    def __init__(self, constraint, shape=(), keep_log=None):
        self.constraint = constraint
        self.shape = tuple(shape)
        self.step_count = 0
        self._cost_sum = np.zeros(self.shape + (constraint.dim,))
        self._incurred = np.zeros(self.shape)
        self._last_played = None
        # Full logs are only cheap for single oracles.
        self.keep_log = (self.shape == ()) if keep_log is None else keep_log
        self.log = OracleLog() if self.keep_log else None

    def _record_play(self, v):
        self._last_played = v
        return v

    def feedback(self, cost_direction):
        """Reveal the linear cost ``<cost_direction, .>`` for the last play."""
        c = check_vector(cost_direction, self.constraint.dim, "cost_direction")
        c = np.broadcast_to(c, self.shape + (self.constraint.dim,))
        played = self._last_played if self._last_played is not None else self._current_play()
        self._incurred = self._incurred + np.sum(played * c, axis=-1)
        self._cost_sum = self._cost_sum + c
        if self.log is not None:
            self.log.played.append(np.array(played))
            self.log.costs.append(np.array(c))
        self.step_count += 1
        self._update(c)
        self._last_played = None

    def average_regret(self):
        """Average regret of every learner in the batch so far."""
        if self.step_count == 0:
            raise ValueError("no feedback received yet")
        best = np.sum(self.constraint.lmo(self._cost_sum) * self._cost_sum, axis=-1)
        return (self._incurred - best) / self.step_count

    def _current_play(self):
        return self.next_vector()

    def _update(self, c):
        raise NotImplementedError


class OGDOracle(_OracleBase):
    """Projected online gradient descent.

    Starts at the canonical vertex of the constraint set; after the k-th
    feedback ``current <- project(current - step_scale / sqrt(k) * c)``.
    """

    kind = "ogd"

    def __init__(self, constraint, step_scale=1.0, shape=(), keep_log=None):
        super().__init__(constraint, shape, keep_log)
        self.step_scale = check_positive_real(step_scale, "step_scale")
        start = constraint.canonical_vertex()
        self.current = np.broadcast_to(start, self.shape + (constraint.dim,)).copy()

    def next_vector(self, perturbation=None):
        return self._record_play(self.current.copy())

    def _current_play(self):
        return self.current

    def _update(self, c):
        gamma = self.step_scale / np.sqrt(self.step_count)
        self.current = self.constraint.project(self.current - gamma * c)


class FTPLOracle(_OracleBase):
    """Follow-the-perturbed-leader with uniform perturbations."""

    kind = "ftpl"

    def __init__(self, constraint, amplitude=1.0, shape=(), seed=0, keep_log=None):
        super().__init__(constraint, shape, keep_log)
        self.amplitude = check_positive_real(amplitude, "amplitude", allow_zero=True)
        self.rng = np.random.default_rng(seed)

    @property
    def accumulated_cost(self):
        return self._cost_sum

    @accumulated_cost.setter
    def accumulated_cost(self, value):
        self._cost_sum = np.broadcast_to(
            check_vector(value, self.constraint.dim, "accumulated_cost"),
            self.shape + (self.constraint.dim,),
        ).copy()

    def draw_perturbation(self, rng=None):
        rng = self.rng if rng is None else rng
        return self.amplitude * rng.random(self.shape + (self.constraint.dim,))

    def next_vector(self, perturbation=None):
        """Play ``lmo(accumulated + z)``.

        ``perturbation`` (unit-uniform draws, scaled here by ``amplitude``)
        lets the caller supply the randomness from its own substream.
        """
        if perturbation is None:
            z = self.draw_perturbation()
        else:
            z = self.amplitude * np.asarray(perturbation, dtype=float)
        return self._record_play(self.constraint.lmo(self._cost_sum + z))

    def _current_play(self):
        raise RuntimeError("FTPL feedback must follow a call to next_vector")

    def _update(self, c):
        pass


def make_oracle(kind, constraint, shape=(), step_scale=1.0, amplitude=1.0, seed=0):
    if kind == "ogd":
        return OGDOracle(constraint, step_scale=step_scale, shape=shape)
    if kind == "ftpl":
        return FTPLOracle(constraint, amplitude=amplitude, shape=shape, seed=seed)
    raise ValueError(f"unknown oracle kind {kind!r}; expected 'ogd' or 'ftpl'")
