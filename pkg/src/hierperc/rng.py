"""Counter-based random streams keyed by (replicate, stage, shell)."""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

STAGE_TAGS = {
    "minus": 1,
    "critical": 2,
    "sprinkle": 3,
    "scaled": 4,
    "naive": 5,
    "torus": 6,
    "branching": 7,
    "coupling": 8,
    "explore": 9,
    "coalescent": 10,
    "limit": 11,
    "aggregates": 12,
    "bootstrap": 13,
}


def stage_tag(stage: str) -> int:
    if stage in STAGE_TAGS:
        return STAGE_TAGS[stage]
    # stable for ad-hoc labels, well clear of the fixed tags
    return 1000 + zlib.crc32(stage.encode())


@dataclass(frozen=True)
class RngPolicy:
    """Derives independent reproducible generators from one master seed.

    Each ``(replicate, stage, shell)`` key feeds numpy's ``SeedSequence`` hash as the
    spawn key, and the resulting state seeds a Philox counter-mode generator.
    """

    master_seed: int

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must fit in 64 bits")

    def seed_sequence(self, replicate: int, stage: str, shell: int = 0) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=int(self.master_seed), spawn_key=(int(replicate), stage_tag(stage), int(shell))
        )

    def stream(self, replicate: int, stage: str, shell: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence(replicate, stage, shell)))

    def stream_id(self, replicate: int, stage: str, shell: int = 0) -> tuple:
        return (int(replicate), stage_tag(stage), int(shell))

    def child(self, *key: int) -> "RngPolicy":
        """Policy with a master seed derived from this one and ``key`` (e.g. the level n)."""
        ss = np.random.SeedSequence(entropy=[int(self.master_seed), *map(int, key)])
        return RngPolicy(int(ss.generate_state(1, np.uint64)[0]))
