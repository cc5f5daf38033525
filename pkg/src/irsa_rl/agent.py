"""One independent learner per sensor node.

The learner observes only its own buffer: its Q-table state is the tuple of
the last w buffer levels (oldest first), its actions are replica counts in
{1..d}, and its reward is buffer-driven (-b with a finite buffer, the buffer
drain b_prev - b_now with an unbounded one). After training, the visited
table is folded into a deployable degree distribution.

A note on the learning-rate schedule: the default geometric schedule
alpha = min(1, 1.111 * 0.9^visits) decays too fast to satisfy the
Robbins-Monro divergence condition (sum alpha = infinity fails), so the
usual tabular convergence guarantee only holds approximately. Switch
``alpha_schedule`` to "polynomial" (alpha = 1 / (visits + 1)^phi, with
phi in (0.5, 1]) when the guarantee matters more than the tuned schedule.
"""

from dataclasses import dataclass
import math

import numpy as np

from .core import DegreeDistribution

__all__ = [
    "History",
    "LearningParams",
    "QTable",
    "NoExperienceError",
    "learning_rate",
    "select_action",
    "reward",
    "q_update",
    "extract_policy",
    "initial_history",
    "shift_history",
]

#: A buffer-level history, oldest level first, newest last.
History = tuple[int, ...]


class NoExperienceError(ValueError):
    """Raised when a policy is requested from a table with no recorded visits."""


@dataclass(frozen=True)
class LearningParams:
    """Learning configuration shared by every agent in a run."""

    epsilon: float = 0.05
    gamma: float = 0.98
    alpha_base: float = 1.111
    alpha_decay: float = 0.9
    w: int = 4
    B: int = 5
    d: int = 4
    alpha_schedule: str = "geometric"  # "geometric" or "polynomial"
    phi: float = 0.8

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.alpha_base <= 0 or not 0.0 < self.alpha_decay <= 1.0:
            raise ValueError("alpha schedule must be positive and non-increasing")
        if self.w < 1 or self.B < 1 or self.d < 1:
            raise ValueError("w, B and d must all be >= 1")
        if self.alpha_schedule not in ("geometric", "polynomial"):
            raise ValueError(f"unknown alpha schedule {self.alpha_schedule!r}")
        if not 0.5 < self.phi <= 1.0:
            raise ValueError("phi must lie in (0.5, 1] for Robbins-Monro")

    @property
    def actions(self) -> range:
        return range(1, self.d + 1)


def learning_rate(visits: int, params: LearningParams) -> float:
    """Per-pair learning rate after ``visits`` prior updates of that pair.

    Geometric: min(1, alpha_base * alpha_decay^visits); the clamp matters only
    at visits = 0, where the raw 1.111 would extrapolate past the target.
    Polynomial: 1 / (visits + 1)^phi, which does satisfy Robbins-Monro.
    """
    if visits < 0:
        raise ValueError("visit count cannot be negative")
    if params.alpha_schedule == "polynomial":
        return 1.0 / (visits + 1) ** params.phi
    return min(1.0, params.alpha_base * params.alpha_decay**visits)


class QTable:
    """Sparse (history, action) -> (q value, visit count) table.

    Absent keys read as (0.0, 0). Visit counts only ever increase; they feed
    the per-pair learning-rate schedule.
    """

    __slots__ = ("_entries",)

    def __init__(self):
        self._entries: dict[tuple[History, int], list] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def q(self, h: History, a: int) -> float:
        e = self._entries.get((h, a))
        return e[0] if e is not None else 0.0

    def visits(self, h: History, a: int) -> int:
        e = self._entries.get((h, a))
        return e[1] if e is not None else 0

    def record(self, h: History, a: int, q_value: float) -> None:
        """Store a new q value for (h, a) and count one more visit."""
        e = self._entries.get((h, a))
        if e is None:
            self._entries[(h, a)] = [q_value, 1]
        else:
            e[0] = q_value
            e[1] += 1

    def max_q(self, h: History, actions) -> float:
        # Unseen actions read as 0.0; with nonpositive rewards that makes
        # unexplored actions look optimistic.
        entries = self._entries
        best = None
        for a in actions:
            e = entries.get((h, a))
            v = e[0] if e is not None else 0.0
            if best is None or v > best:
                best = v
        return best if best is not None else 0.0

    def greedy_actions(self, h: History, actions) -> list[int]:
        """All actions attaining the maximal q value for h (tie set)."""
        values = [self.q(h, a) for a in actions]
        best = max(values)
        return [a for a, v in zip(actions, values) if v == best]

    def items(self):
        for (h, a), (q_value, visits) in self._entries.items():
            yield h, a, q_value, visits

    def history_visits(self) -> dict[History, int]:
        """Total visit count per history, summed over actions."""
        totals: dict[History, int] = {}
        for (h, _a), (_q, visits) in self._entries.items():
            totals[h] = totals.get(h, 0) + visits
        return totals

    def total_visits(self) -> int:
        return sum(e[1] for e in self._entries.values())

    def copy(self) -> "QTable":
        dup = QTable()
        dup._entries = {k: list(v) for k, v in self._entries.items()}
        return dup

    # -- flat text checkpoint format -------------------------------------
    # One line per entry: w comma-separated buffer levels, the action, the
    # q value (repr, round-trip exact), the visit count.

    def to_lines(self) -> list[str]:
        lines = []
        for (h, a), (q_value, visits) in sorted(self._entries.items()):
            fields = [str(level) for level in h] + [
                str(a),
                repr(float(q_value)),
                str(visits),
            ]
            lines.append(",".join(fields))
        return lines

    @classmethod
    def from_lines(cls, lines) -> "QTable":
        table = cls()
        for line in lines:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 4:
                raise ValueError(f"malformed q-table line: {line!r}")
            *levels, a, q_value, visits = parts
            key = (tuple(int(x) for x in levels), int(a))
            table._entries[key] = [float(q_value), int(visits)]
        return table

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.to_lines()))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "QTable":
        with open(path) as fh:
            return cls.from_lines(fh)


def select_action(
    q: QTable,
    h: History,
    params: LearningParams,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy replica count: explore uniformly over {1..d}, otherwise
    play a greedy action with uniform random tie-breaking."""
    if params.epsilon > 0.0 and rng.random() < params.epsilon:
        return int(rng.integers(1, params.d + 1))
    ties = q.greedy_actions(h, params.actions)
    if len(ties) == 1:
        return ties[0]
    return ties[int(rng.integers(len(ties)))]


def reward(b_prev: int, b_now: int, capacity) -> float:
    """Buffer-driven reward: drained packets when the buffer is unbounded,
    minus the current backlog when it is finite."""
    if capacity is None or capacity == math.inf:
        return float(b_prev - b_now)
    return float(-b_now)


def q_update(
    q: QTable,
    h: History,
    a: int,
    r: float,
    h_next: History,
    params: LearningParams,
) -> None:
    """One tabular update: Q(h,a) <- (1-alpha) Q(h,a) + alpha (r + gamma max_a' Q(h',a')).

    alpha comes from the pair's visit count before this update; the count is
    incremented afterwards.
    """
    visits = q.visits(h, a)
    alpha = learning_rate(visits, params)
    target = r + params.gamma * q.max_q(h_next, params.actions)
    q.record(h, a, (1.0 - alpha) * q.q(h, a) + alpha * target)


def extract_policy(q: QTable, d: int) -> DegreeDistribution:
    """Fold a trained table into a degree distribution.

    Each visited history contributes its total visit count to its greedy
    action's coefficient (split evenly across ties), then the weights are
    normalized. Frequently visited states therefore dominate the deployed
    distribution. Invariant under any positive rescaling of the q values.
    """
    weights = [0.0] * d
    actions = range(1, d + 1)
    for h, visits in q.history_visits().items():
        if visits <= 0:
            continue
        ties = q.greedy_actions(h, actions)
        share = visits / len(ties)
        for a in ties:
            weights[a - 1] += share
    total = sum(weights)
    if total <= 0:
        raise NoExperienceError("q-table has no visited state-action pairs")
    return DegreeDistribution(tuple(x / total for x in weights))


def initial_history(level: int, w: int) -> History:
    """Episode-start history: the window filled with the initial buffer level."""
    return (int(level),) * w


def shift_history(h: History, new_level: int) -> History:
    """Drop the oldest level and append the newest."""
    return h[1:] + (int(new_level),)
