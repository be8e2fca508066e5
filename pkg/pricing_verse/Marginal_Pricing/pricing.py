"""
Differentiated marginal-cost prices at a social optimum, the price structure
check tau_a = mu * tau_h, and the price vector CSV format.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd

from routing_core.delay_model import DelayModel, PriceVector
from routing_core.errors import DimensionMismatchError, NetworkParseError
from routing_core.network import HOMOGENEITY_TOL, Network, PathFlow, PathSet, require_feasible
from utils.logger import log

# Floor of the relative deviation denominator on links with no price
DEVIATION_FLOOR = 1e-12
PRICE_COLUMNS = ["link_id", "tau_h", "tau_a"]


def marginal_prices(net: Network, paths: PathSet, fstar: PathFlow) -> PriceVector:
    """
    Computes tau_l^h = F_l * de_l/dfh and tau_l^a = F_l * de_l/dfa at ``fstar``,
    F_l being the total link flow.

    Raises:
        InfeasibleFlowError: If ``fstar`` does not meet the demands.
    """
    require_feasible(net, paths, fstar)
    model = DelayModel(net, paths)
    # projection rounding may leave -0.0 style residue on unused paths
    link_h, link_a = model.link_flows(np.maximum(fstar.fh, 0.0), np.maximum(fstar.fa, 0.0))
    grad_h, grad_a = model.link_gradients(link_h, link_a)
    total = link_h + link_a
    return PriceVector(total * grad_h, total * grad_a)


@dataclass(frozen=True)
class PriceStructureReport:
    applicable: bool
    passed: bool
    mu: float
    max_deviation: float
    tol: float
    deviations: Dict[str, float] = field(default_factory=dict)

    @property
    def status(self) -> str:
        if not self.applicable:
            return "INAPPLICABLE"
        return "PASS" if self.passed else "FAIL"


def check_price_structure(net: Network, tau: PriceVector, tol: float = 1e-10) -> PriceStructureReport:
    """
    Verifies tau_a = mu * tau_h on every link of a homogeneous network and reports the largest
    relative deviation |tau_a - mu*tau_h| / max(tau_h, 1e-12).
    """
    if len(tau) != len(net.links):
        raise DimensionMismatchError(f"price vector has {len(tau)} links, network has {len(net.links)}")
    if not net.is_homogeneous(HOMOGENEITY_TOL):
        log.warning("Price structure check skipped: mu varies over links [%.12g, %.12g]",
                    net.mu.min(), net.mu.max())
        return PriceStructureReport(applicable=False, passed=False, mu=float("nan"), max_deviation=float("nan"),
                                    tol=tol)

    mu = float(net.mu.mean())
    deviation = np.abs(tau.tau_a - mu * tau.tau_h) / np.maximum(tau.tau_h, DEVIATION_FLOOR)
    deviations = {link.id: float(value) for link, value in zip(net.links, deviation)}
    max_deviation = float(deviation.max(initial=0.0))
    return PriceStructureReport(applicable=True, passed=max_deviation <= tol, mu=mu, max_deviation=max_deviation,
                                tol=tol, deviations=deviations)


def price_vector_frame(net: Network, tau: PriceVector) -> pd.DataFrame:
    return pd.DataFrame({
        "link_id": [link.id for link in net.links],
        "tau_h": tau.tau_h,
        "tau_a": tau.tau_a,
    }, columns=PRICE_COLUMNS)


def load_price_vector(source: Union[str, Path], net: Network) -> PriceVector:
    """
    Reads a ``link_id,tau_h,tau_a`` CSV and orders it by the network's links.

    Raises:
        NetworkParseError: If the file cannot be read or lacks the price columns.
        DimensionMismatchError: If the link ids differ from the network's.
    """
    try:
        frame = pd.read_csv(source, dtype={"link_id": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exception:
        raise NetworkParseError(f"Cannot read price file '{source}': {exception}") from exception

    missing = [column for column in PRICE_COLUMNS if column not in frame.columns]
    if missing:
        raise NetworkParseError(f"Price file '{source}' lacks columns {missing}")

    link_ids = [link.id for link in net.links]
    if frame["link_id"].duplicated().any() or sorted(frame["link_id"]) != sorted(link_ids):
        raise DimensionMismatchError(f"Price file '{source}' links {list(frame['link_id'])} "
                                     f"do not match network links {link_ids}")

    frame = frame.set_index("link_id").loc[link_ids]
    log.debug("Loaded prices for %d links from %s", len(frame), source)
    return PriceVector(frame["tau_h"].to_numpy(dtype=float), frame["tau_a"].to_numpy(dtype=float))
