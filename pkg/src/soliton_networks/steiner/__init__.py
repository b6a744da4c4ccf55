from .network import Network, balance_defect, hull_check
from .relax import RelaxConfig, relax, solve_expander
from .topology import Topology, enumerate_topologies

__all__ = [
    "Network", "RelaxConfig", "Topology", "balance_defect", "enumerate_topologies",
    "hull_check", "relax", "solve_expander",
]
