import json
import pathlib

import pytest

SCHEMAS = pathlib.Path(__file__).resolve().parents[2] / "docs" / "schemas"


@pytest.fixture
def tiny_config():
    return {
        "frames": 4,
        "image_encoder": {"name": "tiny-img", "grid": [4, 4], "depth": 8, "input_resolution": 64},
        "video_encoder": {"name": "tiny-vid", "grid": [4, 4], "depth": 6, "input_resolution": 64},
        "image_projector": {"grid_out": [2, 2]},
        "video_projector": {"grid_out": [2, 2]},
        "embed_dim": 8,
    }


@pytest.fixture
def validate():
    jsonschema = pytest.importorskip("jsonschema")
    referencing = pytest.importorskip("referencing")

    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        resources.append((path.name, referencing.Resource.from_contents(json.loads(path.read_text()))))
    registry = referencing.Registry().with_resources(resources)

    def check(document, schema_file):
        schema = json.loads((SCHEMAS / schema_file).read_text())
        jsonschema.Draft202012Validator(schema, registry=registry).validate(document)

    return check
