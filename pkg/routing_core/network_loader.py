"""
Reads network description documents (JSON key/value text, usually ``*.net``)
into validated :class:`~routing_core.network.Network` objects.

Document layout::

    {
      "nodes": ["A", "B"],
      "links": [{"id": "1", "tail": "A", "head": "B", "a": 1.0, "gamma": 1.0,
                 "beta": 1, "m": 1.0, "mu": 0.5}],
      "od_pairs": [{"id": "AB", "origin": "A", "destination": "B",
                    "demand_h": 1.0, "demand_a": 0.5}]
    }

Each link gives exactly one of ``M`` or ``mu``; with ``mu``, M = m / mu.
"""

import json
from pathlib import Path
from typing import List, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from routing_core.errors import NetworkParseError, NetworkValidationError
from routing_core.network import Link, Network, OdPair
from utils.logger import log


def _as_identifier(value):
    if isinstance(value, (int, str)) and not isinstance(value, bool):
        return str(value)
    return value


class LinkDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    tail: str
    head: str
    a: float
    gamma: float
    beta: int
    m: float
    M: Optional[float] = None
    mu: Optional[float] = None

    @field_validator("id", "tail", "head", mode="before")
    @classmethod
    def coerce_identifiers(cls, value):
        return _as_identifier(value)

    @model_validator(mode="after")
    def exactly_one_capacity(self):
        if (self.M is None) == (self.mu is None):
            raise ValueError("exactly one of 'M' or 'mu' must be given")
        if self.mu is not None and not 0.0 < self.mu <= 1.0:
            raise ValueError(f"mu must lie in (0, 1], got {self.mu}")
        return self

    def autonomous_capacity(self) -> float:
        return self.M if self.M is not None else self.m / self.mu


class OdPairDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    origin: str
    destination: str
    demand_h: float
    demand_a: float

    @field_validator("id", "origin", "destination", mode="before")
    @classmethod
    def coerce_identifiers(cls, value):
        return _as_identifier(value)


class NetworkDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nodes: List[str]
    links: List[LinkDocument]
    od_pairs: List[OdPairDocument]

    @field_validator("nodes", mode="before")
    @classmethod
    def coerce_nodes(cls, values):
        if isinstance(values, list):
            return [_as_identifier(value) for value in values]
        return values


def _field_name(error: dict) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


def build_network(document: Mapping) -> Network:
    """
    Validates a decoded document and builds the Network.
    """
    try:
        parsed = NetworkDocument.model_validate(document)
    except ValidationError as exception:
        first = exception.errors()[0]
        raise NetworkValidationError(f"invalid network document at '{_field_name(first)}': {first['msg']}",
                                     field=_field_name(first)) from exception

    links = [
        Link(id=link.id, tail=link.tail, head=link.head, a=link.a, gamma=link.gamma, beta=link.beta,
             m=link.m, M=link.autonomous_capacity())
        for link in parsed.links
    ]
    od_pairs = [
        OdPair(id=od.id, origin=od.origin, destination=od.destination, demand_h=od.demand_h, demand_a=od.demand_a)
        for od in parsed.od_pairs
    ]
    return Network(nodes=tuple(parsed.nodes), links=tuple(links), od_pairs=tuple(od_pairs))


def parse_network(text: str) -> Network:
    """
    Parses network document text.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exception:
        raise NetworkParseError(f"Invalid JSON in network document: {exception}") from exception
    if not isinstance(document, dict):
        raise NetworkParseError("network document must be a key/value object at top level")
    return build_network(document)


def load_network(document: Union[str, Path, Mapping]) -> Network:
    """
    Loads a network from a file path or an already decoded document.
    """
    if isinstance(document, Mapping):
        return build_network(document)

    network_file = Path(document)
    try:
        text = network_file.read_text(encoding="utf-8")
    except OSError as exception:
        raise NetworkParseError(f"Network file '{network_file}' cannot be read: {exception}") from exception

    network = parse_network(text)
    log.debug("Loaded network %s: %d nodes, %d links, %d O/D pairs", network_file,
              len(network.nodes), len(network.links), len(network.od_pairs))
    return network
