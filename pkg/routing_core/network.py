"""
Network representation, simple-path enumeration, path-to-link aggregation and
demand feasibility for the two-class (human-driven / autonomous) routing game.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Optional, Tuple

import networkx as nx
import numpy as np

from routing_core.errors import (
    DimensionMismatchError,
    HeterogeneousNetworkError,
    InfeasibleFlowError,
    NetworkValidationError,
    PathEnumerationOverflow,
    UnreachableDestinationError,
)

DEFAULT_MAX_PATHS = 10_000
FEASIBILITY_EPS = 1e-8
HOMOGENEITY_TOL = 1e-12


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


def _require_positive(value: float, name: str) -> None:
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise NetworkValidationError(f"{name} must be a finite positive number, got {value!r}", field=name)


@dataclass(frozen=True)
class Link:
    """
    Directed link with delay e(fh, fa) = a + gamma * (fh/m + fa/M) ** beta.
    """
    id: str
    tail: str
    head: str
    a: float
    gamma: float
    beta: int
    m: float
    M: float

    def __post_init__(self):
        prefix = f"links[{self.id}]"
        _require_positive(self.a, f"{prefix}.a")
        _require_positive(self.gamma, f"{prefix}.gamma")
        _require_positive(self.m, f"{prefix}.m")
        _require_positive(self.M, f"{prefix}.M")
        if isinstance(self.beta, bool) or not isinstance(self.beta, (int, np.integer)) or self.beta < 1:
            raise NetworkValidationError(f"{prefix}.beta must be a positive integer, got {self.beta!r}",
                                         field=f"{prefix}.beta")
        if self.m > self.M:
            raise NetworkValidationError(
                f"{prefix}: human-only capacity m={self.m} exceeds autonomous capacity M={self.M} (mu must be <= 1)",
                field=f"{prefix}.M")

    @property
    def mu(self) -> float:
        """Degree of capacity asymmetry m/M."""
        return self.m / self.M


@dataclass(frozen=True)
class OdPair:
    id: str
    origin: str
    destination: str
    demand_h: float
    demand_a: float

    def __post_init__(self):
        prefix = f"od_pairs[{self.id}]"
        for name, value in (("demand_h", self.demand_h), ("demand_a", self.demand_a)):
            if not math.isfinite(value) or value < 0:
                raise NetworkValidationError(f"{prefix}.{name} must be finite and >= 0, got {value!r}",
                                             field=f"{prefix}.{name}")
        if self.origin == self.destination:
            raise NetworkValidationError(f"{prefix}: origin and destination are both '{self.origin}'",
                                         field=f"{prefix}.destination")


@dataclass(frozen=True)
class Network:
    """
    Directed multigraph G = (nodes, links, od_pairs); immutable once built.
    """
    nodes: Tuple[str, ...]
    links: Tuple[Link, ...]
    od_pairs: Tuple[OdPair, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "od_pairs", tuple(self.od_pairs))

        if len(set(self.nodes)) != len(self.nodes):
            raise NetworkValidationError("node ids must be unique", field="nodes")
        if not self.links:
            raise NetworkValidationError("network has no links", field="links")
        if not self.od_pairs:
            raise NetworkValidationError("network has no O/D pairs", field="od_pairs")

        declared = set(self.nodes)
        seen_links = set()
        for link in self.links:
            if link.id in seen_links:
                raise NetworkValidationError(f"duplicate link id '{link.id}'", field=f"links[{link.id}].id")
            seen_links.add(link.id)
            for end_name, end in (("tail", link.tail), ("head", link.head)):
                if end not in declared:
                    raise NetworkValidationError(f"link '{link.id}' {end_name} '{end}' is not a declared node",
                                                 field=f"links[{link.id}].{end_name}")

        seen_pairs = set()
        for od in self.od_pairs:
            if od.id in seen_pairs:
                raise NetworkValidationError(f"duplicate O/D pair id '{od.id}'", field=f"od_pairs[{od.id}].id")
            seen_pairs.add(od.id)
            for end_name, end in (("origin", od.origin), ("destination", od.destination)):
                if end not in declared:
                    raise NetworkValidationError(f"O/D pair '{od.id}' {end_name} '{end}' is not a declared node",
                                                 field=f"od_pairs[{od.id}].{end_name}")

        graph = self.graph()
        for od in self.od_pairs:
            if not nx.has_path(graph, od.origin, od.destination):
                raise UnreachableDestinationError(
                    f"O/D pair '{od.id}': no directed path from '{od.origin}' to '{od.destination}'",
                    field=f"od_pairs[{od.id}]")

    def graph(self) -> nx.MultiDiGraph:
        """
        Returns the network as a networkx multigraph keyed by link id.
        """
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.nodes)
        for link in self.links:
            graph.add_edge(link.tail, link.head, key=link.id)
        return graph

    @cached_property
    def link_index(self) -> Dict[str, int]:
        return {link.id: index for index, link in enumerate(self.links)}

    @cached_property
    def od_index(self) -> Dict[str, int]:
        return {od.id: index for index, od in enumerate(self.od_pairs)}

    @cached_property
    def mu(self) -> np.ndarray:
        return _frozen_array([link.mu for link in self.links])

    @cached_property
    def demand_h(self) -> np.ndarray:
        return _frozen_array([od.demand_h for od in self.od_pairs])

    @cached_property
    def demand_a(self) -> np.ndarray:
        return _frozen_array([od.demand_a for od in self.od_pairs])

    @property
    def total_demand(self) -> float:
        return float(self.demand_h.sum() + self.demand_a.sum())

    def link(self, link_id: str) -> Link:
        return self.links[self.link_index[link_id]]

    def is_homogeneous(self, tol: float = HOMOGENEITY_TOL) -> bool:
        """
        True when every link's mu equals the mean mu within ``tol`` relative.
        """
        mu_bar = float(self.mu.mean())
        return float(np.max(np.abs(self.mu - mu_bar))) <= tol * mu_bar

    def homogeneous_mu(self, tol: float = HOMOGENEITY_TOL) -> float:
        if not self.is_homogeneous(tol):
            raise HeterogeneousNetworkError(
                f"network is heterogeneous: mu ranges over [{self.mu.min():.12g}, {self.mu.max():.12g}]")
        return float(self.mu.mean())

    def with_link_overrides(self, link_id: str, **changes) -> "Network":
        """
        Returns a copy where one link has some parameters replaced.
        """
        links = tuple(replace(link, **changes) if link.id == link_id else link for link in self.links)
        return Network(nodes=self.nodes, links=links, od_pairs=self.od_pairs)


@dataclass(frozen=True)
class Path:
    od_id: str
    links: Tuple[str, ...]
    nodes: Tuple[str, ...]


@dataclass(frozen=True, eq=False)
class PathSet:
    """
    Simple paths grouped by O/D pair; paths of one pair occupy a contiguous slice.
    """
    link_ids: Tuple[str, ...]
    od_ids: Tuple[str, ...]
    paths: Tuple[Path, ...]
    od_slices: Tuple[slice, ...]
    incidence: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.paths)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PathSet):
            return NotImplemented
        return (self.link_ids == other.link_ids and self.od_ids == other.od_ids
                and self.paths == other.paths)

    def od_slice(self, od_id: str) -> slice:
        return self.od_slices[self.od_ids.index(od_id)]

    def for_od(self, od_id: str) -> Tuple[Path, ...]:
        return self.paths[self.od_slice(od_id)]


def enumerate_paths(net: Network, max_paths_per_od: int = DEFAULT_MAX_PATHS) -> PathSet:
    """
    Enumerates all simple directed paths of every O/D pair, sorted by link-id sequence.
    """
    graph = net.graph()
    paths = []
    od_slices = []
    for od in net.od_pairs:
        found = []
        for edge_path in nx.all_simple_edge_paths(graph, od.origin, od.destination):
            found.append(tuple(key for _, _, key in edge_path))
            if len(found) > max_paths_per_od:
                raise PathEnumerationOverflow(
                    f"O/D pair '{od.id}' has more than {max_paths_per_od} simple paths; "
                    "network is too large for path enumeration")
        if not found:
            raise UnreachableDestinationError(f"O/D pair '{od.id}' has no path", field=f"od_pairs[{od.id}]")
        found.sort()
        start = len(paths)
        for link_sequence in found:
            nodes = (net.link(link_sequence[0]).tail,) + tuple(net.link(link_id).head for link_id in link_sequence)
            paths.append(Path(od_id=od.id, links=link_sequence, nodes=nodes))
        od_slices.append(slice(start, len(paths)))

    incidence = np.zeros((len(net.links), len(paths)))
    for column, path in enumerate(paths):
        for link_id in path.links:
            incidence[net.link_index[link_id], column] = 1.0
    incidence.setflags(write=False)

    return PathSet(
        link_ids=tuple(link.id for link in net.links),
        od_ids=tuple(od.id for od in net.od_pairs),
        paths=tuple(paths),
        od_slices=tuple(od_slices),
        incidence=incidence,
    )


@dataclass(frozen=True, eq=False)
class PathFlow:
    """
    Per-path flows of human-driven (fh) and autonomous (fa) vehicles.
    """
    fh: np.ndarray
    fa: np.ndarray

    def __post_init__(self):
        fh = _frozen_array(self.fh)
        fa = _frozen_array(self.fa)
        if fh.ndim != 1 or fh.shape != fa.shape:
            raise DimensionMismatchError(f"class flow shapes differ or are not vectors: {fh.shape} vs {fa.shape}")
        object.__setattr__(self, "fh", fh)
        object.__setattr__(self, "fa", fa)

    def __len__(self) -> int:
        return self.fh.size

    @property
    def total(self) -> np.ndarray:
        return self.fh + self.fa

    @classmethod
    def zeros(cls, paths: PathSet) -> "PathFlow":
        return cls(np.zeros(len(paths)), np.zeros(len(paths)))

    @classmethod
    def uniform(cls, net: Network, paths: PathSet) -> "PathFlow":
        """
        Splits every O/D demand evenly over that pair's paths.
        """
        fh = np.zeros(len(paths))
        fa = np.zeros(len(paths))
        for od, group in zip(net.od_pairs, paths.od_slices):
            count = group.stop - group.start
            fh[group] = od.demand_h / count
            fa[group] = od.demand_a / count
        return cls(fh, fa)


@dataclass(frozen=True, eq=False)
class LinkFlow:
    fh: np.ndarray
    fa: np.ndarray
    total: np.ndarray

    def scaled_total(self, mu) -> np.ndarray:
        """
        Returns fh + mu * fa per link.
        """
        return self.fh + np.asarray(mu) * self.fa

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.fh, self.fa])


def check_dimensions(net: Network, paths: PathSet, f: Optional[PathFlow] = None) -> None:
    if paths.link_ids != tuple(link.id for link in net.links):
        raise DimensionMismatchError("path set was enumerated on a different network")
    if f is not None and len(f) != len(paths):
        raise DimensionMismatchError(f"path flow has {len(f)} entries but the path set has {len(paths)} paths")


def aggregate(net: Network, paths: PathSet, f: PathFlow) -> LinkFlow:
    """
    Sums path flows onto links: f_l = sum of f_p over paths p containing l.
    """
    check_dimensions(net, paths, f)
    link_h = paths.incidence @ f.fh
    link_a = paths.incidence @ f.fa
    return LinkFlow(fh=_frozen_array(link_h), fa=_frozen_array(link_a), total=_frozen_array(link_h + link_a))


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    residual_h: Dict[str, float]
    residual_a: Dict[str, float]
    min_flow: float

    @property
    def max_residual(self) -> float:
        return max(list(self.residual_h.values()) + list(self.residual_a.values()) + [max(0.0, -self.min_flow)])


def is_feasible(net: Network, paths: PathSet, f: PathFlow, eps: float = FEASIBILITY_EPS) -> FeasibilityReport:
    """
    Checks demand conservation per O/D pair and class, and nonnegativity, to absolute tolerance ``eps``.
    """
    check_dimensions(net, paths, f)
    residual_h = {}
    residual_a = {}
    for od, group in zip(net.od_pairs, paths.od_slices):
        residual_h[od.id] = abs(float(f.fh[group].sum()) - od.demand_h)
        residual_a[od.id] = abs(float(f.fa[group].sum()) - od.demand_a)
    min_flow = float(min(f.fh.min(initial=0.0), f.fa.min(initial=0.0)))
    feasible = (max(residual_h.values()) <= eps and max(residual_a.values()) <= eps and min_flow >= -eps)
    return FeasibilityReport(feasible=feasible, residual_h=residual_h, residual_a=residual_a, min_flow=min_flow)


def require_feasible(net: Network, paths: PathSet, f: PathFlow, eps: float = FEASIBILITY_EPS) -> None:
    report = is_feasible(net, paths, f, eps)
    if not report.feasible:
        raise InfeasibleFlowError(f"flow is infeasible, max residual {report.max_residual:.3g}",
                                  max_residual=report.max_residual)
