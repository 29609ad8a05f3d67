import json
import pathlib

import jsonschema
import pytest

import sfwc

ROOT = pathlib.Path(__file__).resolve().parents[2]
SCHEMA = json.loads((ROOT / "schema" / "config.schema.json").read_text())
CONFIGS = sorted((ROOT / "configs").glob("*.json"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, SCHEMA)
    sfwc.parse_config(doc)
    for _, cell in sfwc.expand_grid(doc):
        jsonschema.validate(cell, SCHEMA)
        sfwc.parse_config(cell)


@pytest.mark.parametrize(
    "doc",
    [
        {"id": "a", "region": {"kind": "k_support"}, "extra": 1},
        {"id": "a", "region": {"kind": "k_support", "w": 1, "tau": 1}},
        {"id": "a", "region": {"kind": "hexagon"}},
        {"id": "a", "optimizer": {"method": "sgd", "momentum": 1.0}},
        {"id": "a", "optimizer": {"method": "sgd"}, "run": {"seeds": []}},
        {"id": "a,b", "optimizer": {"method": "sgd"}},
    ],
)
def test_schema_and_parser_agree_on_rejections(doc):
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, SCHEMA)
    with pytest.raises(sfwc.Error):
        sfwc.parse_config(doc)
