"""Phi-entropy of sigma-algebra sequences on finite spaces, Kudo limits and
free-group boundary experiments."""

from .boundary import WalkConfig, furstenberg_entropy, harmonic_cylinder_space
from .entropy import builtin_phi, ent, ent_layer_cake, h_phi, make_phi, sandwich_check
from .errors import SigmaEntropyError
from .kudo import PartitionSequence, kudo_limits
from .measure_core import Density, FiniteSpace, alpha, make_density, make_space, uniform_space
from .partitions import Partition, cond_exp, from_blocks, from_labels, join, meet, refines

__version__ = "0.1.0"

__all__ = [
    "Density", "FiniteSpace", "Partition", "PartitionSequence", "SigmaEntropyError",
    "WalkConfig", "alpha", "builtin_phi", "cond_exp", "ent", "ent_layer_cake",
    "from_blocks", "from_labels", "furstenberg_entropy", "h_phi",
    "harmonic_cylinder_space", "join", "kudo_limits", "make_density", "make_phi",
    "make_space", "meet", "refines", "sandwich_check", "uniform_space",
]
