import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from twostep import _backend
from twostep.corpus import Collection, SparseVector
from twostep.synth import random_collection, random_query

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

BACKENDS = sorted(_backend.AVAILABLE)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def vec(mapping):
    """SparseVector from ``{term_id: weight}``."""
    return SparseVector.from_mapping(mapping)


def small_collection(docs, vocab=None):
    """Collection from ``[{term_id: weight}, ...]`` over a lexicon ``t0..t{vocab-1}``."""
    from twostep.synth import lexicon
    vocab = vocab or 1 + max((t for d in docs for t in d), default=0)
    return Collection(tuple(f"d{i}" for i in range(len(docs))),
                      tuple(vec(d) for d in docs), lexicon(vocab))


def random_instance(rng, max_docs=300, max_vocab=200, max_q=32):
    n = int(rng.integers(1, max_docs + 1))
    v = int(rng.integers(2, max_vocab + 1))
    c = random_collection(rng, n, v, float(rng.uniform(1, 30)))
    q = random_query(rng, v, int(rng.integers(1, max_q + 1)))
    return c, q


# criterion number -> PASS/FAIL line, filled by the acceptance suite
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
