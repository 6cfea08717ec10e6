from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np

from .errors import ProtocolOrderError, ValidationError


Algorithm = Literal["naive", "oner", "ss", "ds", "ds_basic", "ds_public", "central"]
ALGORITHMS: Tuple[str, ...] = ("naive", "oner", "ss", "ds", "ds_basic", "ds_public", "central")
Composition = Literal["sequential", "parallel"]

# Bytes per noisy edge (two 4-byte ids) and per scalar report.
EDGE_BYTES = 8
SCALAR_BYTES = 8


class Layer(str, Enum):
    UPPER = "upper"
    LOWER = "lower"

    @property
    def opposite(self) -> "Layer":
        return Layer.LOWER if self is Layer.UPPER else Layer.UPPER

    @classmethod
    def parse(cls, value: "str | Layer") -> "Layer":
        if isinstance(value, Layer):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(f"layer must be 'upper' or 'lower', got {value!r}") from None


@dataclass(frozen=True, order=True)
class VertexRef:
    layer: Layer
    index: int  # 0-based within its layer

    def __post_init__(self):
        if self.index < 0:
            raise ValidationError(f"vertex index must be non-negative, got {self.index}")

    @property
    def external_id(self) -> int:
        return self.index + 1

    @classmethod
    def from_external(cls, layer: "str | Layer", external_id: int) -> "VertexRef":
        if external_id <= 0:
            raise ValidationError(f"vertex ids are 1-based, got {external_id}")
        return cls(Layer.parse(layer), external_id - 1)


@dataclass(frozen=True)
class QueryPair:
    u: VertexRef
    w: VertexRef

    def __post_init__(self):
        if self.u.layer != self.w.layer:
            raise ValidationError("query vertices must lie on the same layer")
        if self.u == self.w:
            raise ValidationError("query vertices must be distinct")

    @property
    def layer(self) -> Layer:
        return self.u.layer

    def swapped(self) -> "QueryPair":
        return QueryPair(self.w, self.u)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Immutable two-layer graph with CSR adjacency stored for both layers.

    Neighbor lists are strictly ascending. Build with ``from_edges``.
    """

    n1: int
    n2: int
    upper_indptr: np.ndarray
    upper_indices: np.ndarray
    lower_indptr: np.ndarray
    lower_indices: np.ndarray

    @classmethod
    def from_edges(cls, n1: int, n2: int, upper, lower) -> "BipartiteGraph":
        if n1 < 1 or n2 < 1:
            raise ValidationError(f"both layers need at least one vertex, got n1={n1}, n2={n2}")
        upper = np.asarray(upper, dtype=np.int64).ravel()
        lower = np.asarray(lower, dtype=np.int64).ravel()
        if upper.shape != lower.shape:
            raise ValidationError("edge endpoint arrays differ in length")
        if upper.size:
            if upper.min() < 0 or upper.max() >= n1:
                raise ValidationError("upper endpoint out of range")
            if lower.min() < 0 or lower.max() >= n2:
                raise ValidationError("lower endpoint out of range")

        # Collapse duplicates; keys sort by (upper, lower).
        keys = np.unique(upper * n2 + lower)
        upper = keys // n2
        lower = keys % n2

        upper_indptr = np.zeros(n1 + 1, dtype=np.int64)
        np.cumsum(np.bincount(upper, minlength=n1), out=upper_indptr[1:])
        upper_indices = lower.copy()

        order = np.lexsort((upper, lower))
        lower_indptr = np.zeros(n2 + 1, dtype=np.int64)
        np.cumsum(np.bincount(lower, minlength=n2), out=lower_indptr[1:])
        lower_indices = upper[order]

        return cls(
            n1=int(n1),
            n2=int(n2),
            upper_indptr=_frozen(upper_indptr),
            upper_indices=_frozen(upper_indices),
            lower_indptr=_frozen(lower_indptr),
            lower_indices=_frozen(lower_indices),
        )

    @property
    def m(self) -> int:
        return int(self.upper_indices.size)

    def layer_size(self, layer: Layer) -> int:
        return self.n1 if layer is Layer.UPPER else self.n2

    def _csr(self, layer: Layer) -> Tuple[np.ndarray, np.ndarray]:
        if layer is Layer.UPPER:
            return self.upper_indptr, self.upper_indices
        return self.lower_indptr, self.lower_indices

    def check_vertex(self, v: VertexRef) -> None:
        size = self.layer_size(v.layer)
        if not 0 <= v.index < size:
            raise ValidationError(
                f"vertex {v.layer.value}:{v.external_id} outside layer of size {size}"
            )

    def contains(self, v: VertexRef) -> bool:
        return 0 <= v.index < self.layer_size(v.layer)

    def neighbors(self, v: VertexRef) -> np.ndarray:
        self.check_vertex(v)
        indptr, indices = self._csr(v.layer)
        return indices[indptr[v.index]:indptr[v.index + 1]]

    def degree(self, v: VertexRef) -> int:
        self.check_vertex(v)
        indptr, _ = self._csr(v.layer)
        return int(indptr[v.index + 1] - indptr[v.index])

    def degrees(self, layer: Layer) -> np.ndarray:
        indptr, _ = self._csr(layer)
        return np.diff(indptr)

    def max_degree(self, layer: Layer) -> int:
        degs = self.degrees(layer)
        return int(degs.max()) if degs.size else 0

    def edges(self) -> Tuple[np.ndarray, np.ndarray]:
        """0-based (upper, lower) endpoint arrays, ordered by upper then lower."""
        upper = np.repeat(np.arange(self.n1, dtype=np.int64), self.degrees(Layer.UPPER))
        return upper, np.asarray(self.upper_indices)

    def same_structure(self, other: "BipartiteGraph") -> bool:
        return (
            self.n1 == other.n1
            and self.n2 == other.n2
            and np.array_equal(self.upper_indptr, other.upper_indptr)
            and np.array_equal(self.upper_indices, other.upper_indices)
            and np.array_equal(self.lower_indptr, other.lower_indptr)
            and np.array_equal(self.lower_indices, other.lower_indices)
        )


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float

    def __post_init__(self):
        if not (self.epsilon > 0) or math.isnan(self.epsilon):
            raise ValidationError(f"privacy budget must be > 0, got {self.epsilon}")

    @classmethod
    def of(cls, eps: "float | PrivacyBudget") -> "PrivacyBudget":
        return eps if isinstance(eps, PrivacyBudget) else cls(float(eps))


@dataclass(frozen=True)
class FlipProbability:
    p: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.p < 0.5:
            raise ValidationError(f"flip probability must lie in [0, 1/2), got {self.p}")

    @property
    def scale(self) -> float:
        """1 - 2p, the denominator shared by every unbiased correction."""
        return 1.0 - 2.0 * self.p


@dataclass(frozen=True, eq=False)
class NoisyNeighborSet:
    owner: VertexRef
    epsilon_used: PrivacyBudget
    members: np.ndarray  # sorted opposite-layer indices
    universe: int  # opposite-layer size

    def __len__(self) -> int:
        return int(self.members.size)

    def bits(self) -> np.ndarray:
        out = np.zeros(self.universe, dtype=np.int8)
        out[self.members] = 1
        return out


@dataclass(frozen=True)
class RandomSource:
    """Seed plus stream path; every distinct path yields an independent stream.

    ``context`` prefixes the path (benchmarks put the pair index and the
    algorithm code there).
    """

    master_seed: int
    trial: int = 0
    vertex: int = 0
    round: int = 0
    context: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.master_seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.master_seed}")

    def at(self, vertex: int, round: int) -> "RandomSource":
        return replace(self, vertex=int(vertex), round=int(round))

    def for_trial(self, trial: int) -> "RandomSource":
        return replace(self, trial=int(trial))

    def with_context(self, *keys: int) -> "RandomSource":
        return replace(self, context=tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.master_seed,
            spawn_key=(*self.context, self.trial, self.vertex, self.round),
        )
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class LedgerEntry:
    round: int
    mechanism: str
    epsilon_spent: float
    composition: Composition = "sequential"
    party: str = ""


@dataclass
class PrivacyLedger:
    entries: List[LedgerEntry] = field(default_factory=list)
    model: Literal["edge-ldp", "central"] = "edge-ldp"

    def spend(
        self,
        round: int,
        mechanism: str,
        epsilon: float,
        composition: Composition = "sequential",
        party: str = "",
    ) -> None:
        if epsilon < 0:
            raise ValidationError("cannot spend a negative budget")
        self.entries.append(LedgerEntry(round, mechanism, float(epsilon), composition, party))

    @property
    def total(self) -> float:
        # Parallel entries of one round act on disjoint neighbor lists: they cost their max.
        sequential = sum(e.epsilon_spent for e in self.entries if e.composition == "sequential")
        groups: Dict[int, float] = {}
        for e in self.entries:
            if e.composition == "parallel":
                groups[e.round] = max(groups.get(e.round, 0.0), e.epsilon_spent)
        return sequential + sum(groups.values())


@dataclass(frozen=True)
class BudgetPlan:
    eps0: float
    eps1: float
    eps2: float
    alpha: float
    solver: str = "fixed"

    def __post_init__(self):
        if self.eps0 < 0:
            raise ValidationError(f"eps0 must be >= 0, got {self.eps0}")
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ValidationError(f"eps1 and eps2 must be > 0, got {self.eps1}, {self.eps2}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def total(self) -> float:
        return self.eps0 + self.eps1 + self.eps2


@dataclass(frozen=True)
class LossModel:
    d_u: float
    d_w: float
    eps: float
    eps0: float = 0.0

    def __post_init__(self):
        if self.d_u < 1 or self.d_w < 1:
            raise ValidationError(f"working degrees must be >= 1, got {self.d_u}, {self.d_w}")
        if not 0 <= self.eps0 < self.eps:
            raise ValidationError(f"need 0 <= eps0 < eps, got eps0={self.eps0}, eps={self.eps}")

    @property
    def available(self) -> float:
        """Budget left for the noisy-graph and Laplace rounds."""
        return self.eps - self.eps0


class Direction(str, Enum):
    TO_CURATOR = "vertex->curator"
    TO_VERTEX = "curator->vertex"


class MessageKind(str, Enum):
    NOISY_EDGES = "NoisyEdges"
    DEGREE_REPORT = "DegreeReport"
    ESTIMATOR_REPORT = "EstimatorReport"
    NOISY_GRAPH_DOWNLOAD = "NoisyGraphDownload"


@dataclass(frozen=True)
class Message:
    direction: Direction
    kind: MessageKind
    payload_size_bytes: int
    round: int

    def as_dict(self) -> Dict[str, object]:
        return {
            "round": self.round,
            "direction": self.direction.value,
            "kind": self.kind.value,
            "bytes": self.payload_size_bytes,
        }


@dataclass
class Transcript:
    messages: List[Message] = field(default_factory=list)
    total_bytes: int = 0

    def record(self, message: Message) -> "Transcript":
        if self.messages and message.round < self.messages[-1].round:
            raise ProtocolOrderError(
                f"round {message.round} message after round {self.messages[-1].round}"
            )
        self.messages.append(message)
        self.total_bytes += message.payload_size_bytes
        return self

    @property
    def rounds(self) -> int:
        return len({m.round for m in self.messages})

    @property
    def uplink_bytes(self) -> int:
        return sum(m.payload_size_bytes for m in self.messages if m.direction is Direction.TO_CURATOR)

    def to_json_lines(self) -> str:
        return "\n".join(json.dumps(m.as_dict()) for m in self.messages)


@dataclass
class EstimateReport:
    algorithm: str
    value: float
    ledger: PrivacyLedger
    comm_bytes: int
    rounds: int
    plan: Optional[BudgetPlan] = None
    transcript: Transcript = field(default_factory=Transcript)
    fallback: bool = False
    vertex_seconds: float = 0.0
    curator_seconds: float = 0.0


@dataclass(frozen=True)
class DeviationBound:
    radius: float
    probability_bound: float


@dataclass(frozen=True)
class RunConfig:
    graph: Optional[str] = None
    format: str = "konect"
    algorithms: Tuple[str, ...] = ("naive", "oner", "ss", "ds", "central")
    epsilons: Tuple[float, ...] = (2.0,)
    pairs: int = 100
    kappa: Optional[float] = None
    trials_per_pair: int = 1
    eps1_fractions: Tuple[float, ...] = (0.5,)
    seed: int = 0
    out: Optional[str] = None
    layer: Layer = Layer.UPPER
    u: Optional[int] = None
    w: Optional[int] = None
    json: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layer", Layer.parse(self.layer))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        object.__setattr__(self, "eps1_fractions", tuple(float(f) for f in self.eps1_fractions))
        if self.format != "konect":
            raise ValidationError(f"unsupported graph format {self.format!r}")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            raise ValidationError(f"unknown algorithm(s) {unknown}; choose from {', '.join(ALGORITHMS)}")
        if self.pairs < 1:
            raise ValidationError("pairs must be >= 1")
        if self.trials_per_pair < 1:
            raise ValidationError("trials per pair must be >= 1")
        if not self.epsilons or any(not e > 0 for e in self.epsilons):
            raise ValidationError("every epsilon must be > 0")
        if any(not 0 < f < 1 for f in self.eps1_fractions):
            raise ValidationError("eps1 fractions must lie in (0, 1)")
        if self.kappa is not None and self.kappa < 1:
            raise ValidationError("kappa must be >= 1")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass(frozen=True)
class MetricRow:
    algo: str
    epsilon: float
    u_id: int
    w_id: int
    true_c2: int
    estimate: float
    abs_error: float
    comm_bytes: int
    eps0: float
    eps1: float
    eps2: float
    alpha: Optional[float]
    trial: int
    seed: int
    analytic_loss: float
