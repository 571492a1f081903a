"""Every random stream in a run is derived from one root seed by a fixed offset."""
import numpy as np

ENV, ACT, BUFFER, INIT, UPDATE, EVAL, SELECT, MODEL = range(8)


def derive_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))
