import pytest

from attn_extract import ExtractionJob, SourceDocument, build_tiny_model

CORPUS_WORDS = (
    "solar sail craft rides photon pressure through deep space "
    "a harbor boat with canvas sails waits for wind "
    "panels convert light into power on the station roof "
    "migration routes of arctic terns span both hemispheres"
).split()


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    target = tmp_path_factory.mktemp("tiny-model")
    return build_tiny_model(target, extra_words=CORPUS_WORDS, seed=0)


@pytest.fixture
def documents() -> tuple[SourceDocument, ...]:
    return (
        SourceDocument("d1", "solar sail craft rides photon pressure through deep space"),
        SourceDocument("d2", "a harbor boat with canvas sails waits for wind", title="boats"),
        SourceDocument("d3", "panels convert light into power on the station roof"),
    )


@pytest.fixture
def job(tiny_model_dir, documents) -> ExtractionJob:
    return ExtractionJob(
        model=tiny_model_dir,
        query="solar sail power",
        documents=documents,
        query_id="q-demo",
    )
