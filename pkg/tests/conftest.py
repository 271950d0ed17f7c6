import pytest

from cdsgen.corpus import Utterance
from cdsgen.toy import toy_utterances


@pytest.fixture(scope="session")
def toy_corpus() -> list[Utterance]:
    # 9 ages x 600 utterances = 5400, enough for the round-trip criterion
    return toy_utterances(n_per_age=600, seed=7)


@pytest.fixture(scope="session")
def hug_corpus() -> list[Utterance]:
    return (
        [Utterance(("hug",), 6.0)] * 10
        + [Utterance(("hugs",), 6.0)] * 5
        + [Utterance(("pug",), 6.0)] * 5
    )
