"""Counter-based stream splitting.

Every random draw in a run comes from a generator keyed by
``(master seed, stream, *counters)``. Streams never share state, so adding an
evaluation stage cannot perturb the dynamics, and a run resumed at iteration t
draws exactly what an uninterrupted run would have drawn.
"""

import numpy as np

DYNAMICS = 0
EVALUATION = 1
METAGAME = 2

STREAMS = {"dynamics": DYNAMICS, "evaluation": EVALUATION, "metagame": METAGAME}


def stream(seed: int, name_or_id, *counters: int) -> np.random.Generator:
    sid = STREAMS[name_or_id] if isinstance(name_or_id, str) else int(name_or_id)
    key = (sid,) + tuple(int(c) for c in counters)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
