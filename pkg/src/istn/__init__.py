"""Co-channel satellite-terrestrial network simulation and link selection."""
from .channel import ChannelTensor, compute_channel_tensor
from .config import build_scenario, load_config
from .greedy import greedy_assign
from .sca import ScaConfig, sca_solve
from .sysmodel import AssociationVars, CapacityProfile, PowerAllocation, sum_rate

__all__ = [
    "AssociationVars", "CapacityProfile", "ChannelTensor", "PowerAllocation", "ScaConfig",
    "build_scenario", "compute_channel_tensor", "greedy_assign", "load_config", "sca_solve", "sum_rate",
]
