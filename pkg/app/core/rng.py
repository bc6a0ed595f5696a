"""Named, independent random streams derived from a single experiment seed."""
from typing import Dict
import numpy as np


# Stream ids are part of the reproducibility contract: never renumber.
STREAMS: Dict[str, int] = {
    "topology": 1,
    "workload": 2,
    "agent_init": 3,
    "exploration": 4,
    "replay": 5,
    "baseline": 6,
}


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """
    Build the generator for one named stream.

    Streams with different names or keys are statistically independent, so
    consuming one (e.g. exploration) never shifts another (e.g. the job trace).

    Args:
        seed: Experiment/trial seed
        name: Stream name, one of STREAMS
        *keys: Extra non-negative integers (phase index, cluster index, ...)
    """
    if name not in STREAMS:
        raise KeyError(f"Unknown random stream '{name}'")
    entropy = [int(seed), STREAMS[name], *(int(k) for k in keys)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def generator_state(rng: np.random.Generator) -> dict:
    """JSON-serializable bit-generator state."""
    return rng.bit_generator.state


def restore_generator(state: dict) -> np.random.Generator:
    """Rebuild a generator positioned exactly at a saved state."""
    bit_generator = np.random.PCG64()
    bit_generator.state = state
    return np.random.Generator(bit_generator)
