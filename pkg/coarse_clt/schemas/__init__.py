from coarse_clt.schemas.automaton import AutomatonDocument, EdgeSpec, GroupSpec
from coarse_clt.schemas.experiment import ActionSpec, ExperimentConfig

__all__ = ["AutomatonDocument", "EdgeSpec", "GroupSpec", "ActionSpec", "ExperimentConfig"]
