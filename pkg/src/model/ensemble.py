import numpy as np
from dataclasses import dataclass

from src.errors import ModelSpecError


@dataclass(frozen=True)
class SeedManifest:
    """Provenance of an ensemble: base seed and the (block, row) substream of each path."""
    base_seed: int
    block_size: int
    path_ids: object

    def to_dict(self):
        return {
            'base_seed': int(self.base_seed),
            'block_size': int(self.block_size),
            'n_paths': int(len(self.path_ids)),
            'n_blocks': int(self.path_ids[-1, 0]) + 1 if len(self.path_ids) else 0,
        }


@dataclass(frozen=True)
class PathEnsemble:
    """
    Discretised sample paths.

    Attributes:
        times (ndarray): Increasing grid t_0 = 0 < ... < t_K = T
        states (ndarray): Shape (n_paths, K+1, n)
        seed_manifest (SeedManifest): RNG provenance
        log_density (ndarray, optional): log dQ/dP along each path when the
            paths were drawn under a tilted measure
    """
    times: object
    states: object
    seed_manifest: SeedManifest
    log_density: object = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        states = np.array(self.states, dtype=float)
        if times.ndim != 1 or len(times) < 2 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ModelSpecError("Ensemble times must start at 0 and be strictly increasing")
        if states.ndim != 3 or states.shape[1] != len(times):
            raise ModelSpecError(f"Ensemble states must have shape (n_paths, {len(times)}, n)")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def n_paths(self):
        return self.states.shape[0]

    @property
    def n_steps(self):
        return len(self.times) - 1

    @property
    def dim(self):
        return self.states.shape[2]

    @property
    def horizon(self):
        return float(self.times[-1])

    @property
    def time_steps(self):
        return np.diff(self.times)

    @property
    def terminal(self):
        """Terminal states X_T, shape (n_paths, n)."""
        return self.states[:, -1, :]
