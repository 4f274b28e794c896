import random

import pytest

from iftkit import fixtures as bundled
from iftkit.model import Category
from iftkit.synth import SynthesisProfile


@pytest.fixture(scope="session")
def bb_tree():
    return bundled.black_basta_tree()


@pytest.fixture(scope="session")
def reference_rows():
    return bundled.reference_rows()


@pytest.fixture(scope="session")
def reference_claims():
    return bundled.claimed_summary()


CATEGORIES = tuple(Category)


def random_satisfiable_profile(rng: random.Random, case_id: str = "case",
                               max_per_class: int = 5) -> SynthesisProfile:
    """Rejection-sample a profile that the synthesizer accepts."""
    while True:
        values = {}
        for cls in ("ce", "ac", "mixed"):
            edges = rng.randint(0, max_per_class)
            p1 = rng.randint(0, edges)
            l1 = rng.randint(0, edges)
            l1p1 = rng.randint(0, min(p1, l1))
            values[f"{cls}_edges"] = edges
            values[f"{cls}_p1"] = p1
            values[f"{cls}_l1"] = l1
            values[f"{cls}_l1p1"] = l1p1
        profile = SynthesisProfile(
            case_id=case_id,
            category=rng.choice(CATEGORIES),
            total_edges=values["ce_edges"] + values["ac_edges"] + values["mixed_edges"],
            variant=rng.choice((None, "Strain A", "Strain B")),
            seed=rng.randrange(2**32),
            **values,
        )
        if not profile.violations():
            return profile
