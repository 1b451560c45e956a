import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from reattn import AttentionBlock, RankingInstance, instance_from_dict

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def tiny_dump_path() -> Path:
    return DATA_DIR / "tiny_2doc.json"


@pytest.fixture
def tiny_dump_dict() -> dict:
    return json.loads((DATA_DIR / "tiny_2doc.json").read_text())


@pytest.fixture
def tiny_instance(tiny_dump_dict) -> RankingInstance:
    return instance_from_dict(tiny_dump_dict)


@pytest.fixture
def golden_dump_dict() -> dict:
    return json.loads((DATA_DIR / "golden_3doc.json").read_text())


@pytest.fixture
def golden_instance(golden_dump_dict) -> RankingInstance:
    return instance_from_dict(golden_dump_dict)


@pytest.fixture
def golden_expected() -> dict:
    return json.loads((DATA_DIR / "golden_3doc_expected.json").read_text())


def scale_attention(inst: RankingInstance, factor: float) -> RankingInstance:
    """Copy of an instance with every attention value multiplied by factor."""

    def scaled(block: AttentionBlock) -> AttentionBlock:
        return dataclasses.replace(block, data=np.asarray(block.data) * factor)

    return dataclasses.replace(
        inst,
        attention_actual=scaled(inst.attention_actual),
        attention_calibration=scaled(inst.attention_calibration),
    )
