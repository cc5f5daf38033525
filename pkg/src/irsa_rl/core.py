"""Frame-level IRSA / Slotted ALOHA transmission physics.

A frame is N slots. Each transmitting user places l replicas of one packet
into l distinct slots, l drawn from a degree distribution Lambda(x). The
receiver decodes by peeling: a slot holding exactly one undecoded burst
reveals that user, whose replicas are then cancelled everywhere (perfect
interference cancellation, zero noise, and ideal side information about
where a decoded user's replicas sit). Peeling repeats to a fixed point.

All randomness flows through an explicit numpy Generator, so every function
here is pure given its rng argument.
"""

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

__all__ = [
    "DegreeDistribution",
    "FrameOccupancy",
    "DecodeOutcome",
    "BASELINE_IRSA",
    "PURE_ALOHA",
    "sample_degree",
    "sample_degrees",
    "place_replicas",
    "sic_decode",
    "simulate_frame",
    "slotted_aloha_throughput",
    "uniform_distribution",
    "simulate_slotted_aloha",
    "simulate_saturated",
]

_PROB_TOL = 1e-9


@dataclass(frozen=True)
class DegreeDistribution:
    """Replica-count distribution: coeffs[i] is the probability of degree i+1."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if len(self.coeffs) < 1:
            raise ValueError("degree distribution needs at least one coefficient")
        if any(c < 0 for c in self.coeffs):
            raise ValueError("degree probabilities must be nonnegative")
        if abs(sum(self.coeffs) - 1.0) > _PROB_TOL:
            raise ValueError(f"degree probabilities sum to {sum(self.coeffs)}, not 1")

    @property
    def d(self) -> int:
        """Maximum replica count."""
        return len(self.coeffs)

    @cached_property
    def _cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.coeffs)
        cdf[-1] = 1.0  # guard against float drift at the top
        return cdf

    @property
    def mean_degree(self) -> float:
        return sum((i + 1) * c for i, c in enumerate(self.coeffs))

    @classmethod
    def from_terms(cls, terms: dict[int, float]) -> "DegreeDistribution":
        """Build from a sparse {degree: probability} mapping, e.g. {2: 0.25, 3: 0.6, 8: 0.15}."""
        if not terms or min(terms) < 1:
            raise ValueError("degrees must be integers >= 1")
        coeffs = [0.0] * max(terms)
        for degree, p in terms.items():
            coeffs[degree - 1] = p
        return cls(tuple(coeffs))

    def as_terms(self) -> dict[int, float]:
        return {i + 1: c for i, c in enumerate(self.coeffs) if c > 0}


#: Reference IRSA distribution 0.25 x^2 + 0.60 x^3 + 0.15 x^8.
BASELINE_IRSA = DegreeDistribution.from_terms({2: 0.25, 3: 0.60, 8: 0.15})

#: Degenerate single-replica distribution (plain Slotted ALOHA behaviour).
PURE_ALOHA = DegreeDistribution.from_terms({1: 1.0})


def uniform_distribution(d: int) -> DegreeDistribution:
    """Uniform replica-count distribution over {1..d}."""
    return DegreeDistribution((1.0 / d,) * d)


@dataclass(frozen=True)
class FrameOccupancy:
    """User -> replica slot sets for one frame."""

    n_slots: int
    bursts: dict[int, frozenset[int]]

    def __post_init__(self):
        if self.n_slots < 1:
            raise ValueError("a frame needs at least one slot")
        clean = {}
        for user, slots in self.bursts.items():
            slots = frozenset(int(s) for s in slots)
            if not slots:
                raise ValueError(f"user {user} has an empty burst set")
            if min(slots) < 0 or max(slots) >= self.n_slots:
                raise ValueError(f"user {user} has slot indices outside [0, {self.n_slots})")
            clean[user] = slots
        object.__setattr__(self, "bursts", clean)

    @property
    def n_users(self) -> int:
        return len(self.bursts)


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of SIC peeling: decoded users and the number of peeling passes."""

    decoded: frozenset
    iterations: int


def sample_degree(dist: DegreeDistribution, rng: np.random.Generator) -> int:
    """Draw one replica count l in [1, d] from the distribution."""
    return int(np.searchsorted(dist._cdf, rng.random(), side="right")) + 1


def sample_degrees(dist: DegreeDistribution, size, rng: np.random.Generator) -> np.ndarray:
    """Vectorized sample_degree."""
    return np.searchsorted(dist._cdf, rng.random(size), side="right").astype(np.int64) + 1


def place_replicas(l: int, n_slots: int, rng: np.random.Generator) -> frozenset[int]:
    """Choose l distinct slots uniformly at random out of n_slots."""
    if l < 1:
        raise ValueError("replica count must be >= 1")
    if l > n_slots:
        raise ValueError(f"cannot place {l} distinct replicas in {n_slots} slots")
    if l == n_slots:
        return frozenset(range(n_slots))
    if l == 1:
        return frozenset((int(rng.integers(n_slots)),))
    return frozenset(int(s) for s in rng.choice(n_slots, size=l, replace=False))


def _peel(bursts: dict, n_slots: int) -> tuple[set, int]:
    """Peeling fixed point over a user -> slot-set mapping.

    Each pass decodes every currently-singleton slot's user, then cancels all
    replicas of the newly decoded users. Only productive passes are counted,
    so iterations <= number of users.
    """
    slot_members = defaultdict(set)
    for user, slots in bursts.items():
        for s in slots:
            slot_members[s].add(user)

    decoded = set()
    passes = 0
    while True:
        newly = {next(iter(members)) for members in slot_members.values() if len(members) == 1}
        if not newly:
            break
        passes += 1
        decoded |= newly
        for user in newly:
            for s in bursts[user]:
                slot_members[s].discard(user)
    return decoded, passes


def sic_decode(frame: FrameOccupancy) -> DecodeOutcome:
    """Run SIC peeling on a frame. The result is independent of peeling order."""
    decoded, passes = _peel(frame.bursts, frame.n_slots)
    return DecodeOutcome(decoded=frozenset(decoded), iterations=passes)


def simulate_frame(
    users: list[tuple[int, int]],
    n_slots: int,
    rng: np.random.Generator,
) -> tuple[dict[int, bool], DecodeOutcome]:
    """Place replicas for every (user id, degree) pair and decode the frame.

    Returns a per-user success flag plus the full decode outcome. One frame
    carries at most one packet per user, so per-user goodput is 0 or 1.
    """
    bursts = {uid: place_replicas(l, n_slots, rng) for uid, l in users}
    outcome = sic_decode(FrameOccupancy(n_slots=n_slots, bursts=bursts))
    success = {uid: uid in outcome.decoded for uid, _ in users}
    return success, outcome


def slotted_aloha_throughput(load: float) -> float:
    """Asymptotic Slotted ALOHA throughput G * exp(-G)."""
    if load < 0:
        raise ValueError("channel load must be nonnegative")
    return load * math.exp(-load)


def simulate_slotted_aloha(
    n_users: int,
    n_slots: int,
    n_frames: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-frame decoded counts for saturated single-replica traffic.

    With every user at degree 1, peeling decodes exactly the singleton slots
    and cancellation can never create new singletons, so the whole Monte
    Carlo runs as chunked bincounts. Used for large-N throughput curves.
    """
    counts = np.empty(n_frames, dtype=np.int64)
    chunk = max(1, int(4e6) // max(n_users, 1))
    done = 0
    while done < n_frames:
        f = min(chunk, n_frames - done)
        slots = rng.integers(0, n_slots, size=(f, n_users))
        flat = (slots + np.arange(f)[:, None] * n_slots).ravel()
        occupancy = np.bincount(flat, minlength=f * n_slots).reshape(f, n_slots)
        counts[done : done + f] = (occupancy == 1).sum(axis=1)
        done += f
    return counts


def simulate_saturated(
    policies,
    n_slots: int,
    n_frames: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-frame decoded counts with every node backlogged (one packet per frame).

    ``policies`` is either a single DegreeDistribution shared by all nodes or
    a sequence with one distribution per node. Degrees above n_slots are
    capped (distinct placement is impossible otherwise).
    """
    if isinstance(policies, DegreeDistribution):
        raise TypeError("pass an explicit per-node sequence or use [dist] * n_nodes")
    n_users = len(policies)
    if n_users == 0:
        return np.zeros(n_frames, dtype=np.int64)

    degrees = np.empty((n_frames, n_users), dtype=np.int64)
    for u, dist in enumerate(policies):
        degrees[:, u] = sample_degrees(dist, n_frames, rng)
    np.minimum(degrees, n_slots, out=degrees)

    if np.all(degrees == 1):
        # Degenerate all-singles case: reuse the vectorized path on the same
        # number of frames (fresh draws; occupancy statistics are identical).
        return simulate_slotted_aloha(n_users, n_slots, n_frames, rng)

    counts = np.empty(n_frames, dtype=np.int64)
    chunk = max(1, int(2e5) // max(n_users * n_slots, 1))
    done = 0
    while done < n_frames:
        f = min(chunk, n_frames - done)
        # Row-wise argsort of iid uniforms = one independent random
        # permutation of the slots per (frame, user); the first l entries
        # are a uniform l-subset.
        order = np.argsort(rng.random((f, n_users, n_slots)), axis=2)
        for i in range(f):
            bursts = {
                u: order[i, u, : degrees[done + i, u]]
                for u in range(n_users)
            }
            decoded, _ = _peel(bursts, n_slots)
            counts[done + i] = len(decoded)
        done += f
    return counts
