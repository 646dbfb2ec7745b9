import numpy as np
import pytest
import yaml
from fastapi.testclient import TestClient

from embed_service.app import create_app
from embed_service.config import ConfigError, ModelSpec, ServiceConfig, load_config
from embed_service.encoders import HashEncoder


@pytest.fixture
def config():
    return ServiceConfig(
        models=[
            ModelSpec(name="mini", kind="hash", dim=384, max_tokens=8, seed=1),
            ModelSpec(name="base", kind="hash", dim=768, max_tokens=16, seed=2),
        ],
        max_batch=10,
    )


@pytest.fixture
def client(config):
    return TestClient(create_app(config))


def test_models_endpoint(client):
    payload = client.get("/models").json()
    by_name = {m["name"]: m for m in payload["models"]}
    assert by_name["mini"]["dim"] == 384 and by_name["base"]["dim"] == 768
    assert by_name["mini"]["max_tokens"] == 8
    assert by_name["mini"]["resolved_id"]
    assert payload["max_batch"] == 10


def test_embed_empty_texts(client):
    r = client.post("/embed", json={"model": "mini", "texts": []})
    assert r.status_code == 200
    assert r.json()["vectors"] == []


def test_embed_count_dim_and_order(client):
    texts = ["alpha beta", "gamma", "alpha beta"]
    r = client.post("/embed", json={"model": "mini", "texts": texts})
    assert r.status_code == 200
    payload = r.json()
    assert payload["dim"] == 384
    vectors = payload["vectors"]
    assert len(vectors) == 3
    assert all(len(v) == 384 for v in vectors)
    assert vectors[0] == vectors[2]  # identical texts embed identically
    assert vectors[0] != vectors[1]  # rows follow request order


def test_embed_run_twice_identical(client):
    body = {"model": "base", "texts": ["Transformer improves accuracy.", "x y z"]}
    a = client.post("/embed", json=body).json()["vectors"]
    b = client.post("/embed", json=body).json()["vectors"]
    assert a == b


def test_embed_vectors_unnormalized(client):
    r = client.post("/embed", json={"model": "mini", "texts": ["one two three four"]})
    norm = float(np.linalg.norm(r.json()["vectors"][0]))
    assert norm > 0 and abs(norm - 1.0) > 1e-6


def test_unknown_model_404(client):
    r = client.post("/embed", json={"model": "nope", "texts": ["x"]})
    assert r.status_code == 404


def test_oversize_batch_413(client):
    r = client.post("/embed", json={"model": "mini", "texts": ["x"] * 11})
    assert r.status_code == 413


def test_loading_model_503_with_retry_after(monkeypatch):
    class NotReady(HashEncoder):
        def ready(self):
            return False

    import embed_service.app as app_module

    monkeypatch.setattr(app_module, "build_encoder", NotReady)
    slow_config = ServiceConfig(models=[ModelSpec(name="slow", kind="hash", dim=4, max_tokens=4)], max_batch=10)
    slow_client = TestClient(create_app(slow_config))
    r = slow_client.post("/embed", json={"model": "slow", "texts": ["x"]})
    assert r.status_code == 503
    assert r.headers["Retry-After"] == "5"


def test_truncation_at_max_tokens(client):
    # "mini" truncates at 8 tokens, so extra tokens cannot change the vector
    base = "t1 t2 t3 t4 t5 t6 t7 t8"
    a = client.post("/embed", json={"model": "mini", "texts": [base]}).json()["vectors"]
    b = client.post("/embed", json={"model": "mini", "texts": [base + " extra tokens here"]}).json()["vectors"]
    assert a == b


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "models.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "max_batch": 5,
                "models": [
                    {"name": "m1", "kind": "hash", "dim": 384, "max_tokens": 10},
                    {"name": "m2", "kind": "sentence-transformers", "model_id": "org/model", "dim": 768, "max_tokens": 20},
                ],
            }
        )
    )
    cfg = load_config(path)
    assert cfg.max_batch == 5
    assert cfg.spec_for("m1").dim == 384
    assert cfg.spec_for("m2").model_id == "org/model"
    assert cfg.spec_for("absent") is None


def test_load_config_errors(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({"models": [{"name": "x", "kind": "wat", "dim": 4, "max_tokens": 4}]}))
    with pytest.raises(ConfigError, match="unknown encoder kind"):
        load_config(path)
    path.write_text(yaml.safe_dump({"models": []}))
    with pytest.raises(ConfigError, match="no models"):
        load_config(path)
    path.write_text(yaml.safe_dump({"models": [{"name": "x", "kind": "sentence-transformers", "dim": 4, "max_tokens": 4}]}))
    with pytest.raises(ConfigError, match="model_id"):
        load_config(path)


def test_default_config_parses():
    from embed_service.config import DEFAULT_CONFIG

    cfg = load_config(DEFAULT_CONFIG)
    dims = {m.dim for m in cfg.models}
    assert 384 in dims and 768 in dims
    offline = [m for m in cfg.models if m.kind == "hash"]
    assert {m.dim for m in offline} == {384, 768}
