import json

import pytest
from fastapi.testclient import TestClient

from mmcurate.errors import CampaignError
from mmcurate.service import (
    CampaignStore,
    aggregate_ratings,
    create_app,
    display_order,
    response_identifier,
)

MODELS = ["model-alpha", "model-beta"]


def campaign_items(n=3):
    return [
        {
            "id": f"item-{i}",
            "question": f"سؤال {i}؟",
            "image": f"media/{i}.jpg",
            "responses": {
                "model-alpha": f"جواب ألفا {i}",
                "model-beta": f"جواب بيتا {i}",
            },
        }
        for i in range(n)
    ]


def scores(accuracy, authenticity=None):
    return {"accuracy": accuracy, "authenticity": authenticity if authenticity is not None else accuracy}


@pytest.fixture
def store(tmp_path):
    s = CampaignStore(tmp_path / "ratings.db")
    yield s
    s.close()


def seeded(store, cid="camp-1", seed=7):
    return store.create_campaign(cid, "test", seed, campaign_items(), ["ann-a", "ann-b"])


def test_create_campaign_summary(store):
    out = seeded(store)
    assert out == {
        "campaign_id": "camp-1",
        "items": 3,
        "models": 2,
        "annotators": 2,
        "criteria": ["accuracy", "authenticity"],
    }


def test_create_campaign_validations(store):
    with pytest.raises(CampaignError):
        store.create_campaign("c", "t", 0, [], ["a"])
    with pytest.raises(CampaignError):
        store.create_campaign("c", "t", 0, campaign_items(), [])
    with pytest.raises(CampaignError):
        store.create_campaign("c", "t", 0, campaign_items(), ["a"], criteria=[])
    with pytest.raises(CampaignError):
        store.create_campaign("c", "t", 0, campaign_items(), ["a"], criteria=["x", "x"])
    items = campaign_items()
    items[1]["responses"] = {}
    with pytest.raises(CampaignError):
        store.create_campaign("c", "t", 0, items, ["a"])
    items = campaign_items()
    items[2]["responses"] = {"model-alpha": "x", "model-gamma": "y"}
    with pytest.raises(CampaignError):
        store.create_campaign("c", "t", 0, items, ["a"])
    # a single model per item is a valid campaign (absolute-scale rating)
    solo = [{"id": "s", "question": "؟", "image": None, "responses": {"only": "نص"}}]
    assert store.create_campaign("solo", "t", 0, solo, ["a"])["models"] == 1
    seeded(store)
    with pytest.raises(CampaignError):
        seeded(store)  # duplicate campaign id


def test_response_identifier_is_content_derived():
    a = response_identifier(7, "item-0", "model-alpha")
    assert a == response_identifier(7, "item-0", "model-alpha")
    assert a != response_identifier(8, "item-0", "model-alpha")
    assert a != response_identifier(7, "item-1", "model-alpha")
    assert len(a) == 16
    int(a, 16)  # hex, no structure to read model order from


def test_display_order_is_a_stable_permutation():
    models = ["m1", "m2", "m3", "m4"]
    first = display_order(7, "ann-a", "item-0", models)
    assert sorted(first) == sorted(models)
    assert first == display_order(7, "ann-a", "item-0", list(reversed(models)))
    # some annotator or item must see a different order; scan a few
    orders = {
        tuple(display_order(7, ann, item, models))
        for ann in ("ann-a", "ann-b", "ann-c")
        for item in ("item-0", "item-1", "item-2")
    }
    assert len(orders) > 1


def test_next_item_walks_in_order_and_finishes(store):
    seeded(store)
    first = store.next_item("camp-1", "ann-a")
    assert first["done"] is False
    assert first["item_id"] == "item-0"
    assert first["position"] == 0 and first["total"] == 3
    assert first["criteria"] == ["accuracy", "authenticity"]
    assert {r["response_id"] for r in first["responses"]} == {
        response_identifier(7, "item-0", m) for m in MODELS
    }
    for _ in range(3):
        current = store.next_item("camp-1", "ann-a")
        ratings = {r["response_id"]: scores(5) for r in current["responses"]}
        store.submit_rating("camp-1", "ann-a", current["item_id"], ratings)
    assert store.next_item("camp-1", "ann-a")["done"] is True
    # the other annotator still has work
    assert store.next_item("camp-1", "ann-b")["done"] is False


def test_annotator_facing_payload_never_names_models(store):
    seeded(store)
    item = store.next_item("camp-1", "ann-a")
    payload = json.dumps(item, ensure_ascii=False)
    for model_id in MODELS:
        assert model_id not in payload


def test_submit_validations(store):
    seeded(store)
    item = store.next_item("camp-1", "ann-a")
    rid = item["responses"][0]["response_id"]
    full = {r["response_id"]: scores(5) for r in item["responses"]}
    with pytest.raises(CampaignError):
        store.submit_rating("camp-1", "nobody", item["item_id"], full)
    with pytest.raises(CampaignError):
        store.submit_rating("camp-1", "ann-a", "item-404", full)
    with pytest.raises(CampaignError):
        store.submit_rating("camp-1", "ann-a", item["item_id"], {rid: scores(5)})
    for bad in (scores(11), scores(0), scores(5, True)):
        broken = {k: dict(v) for k, v in full.items()}
        broken[rid] = bad
        with pytest.raises(CampaignError):
            store.submit_rating("camp-1", "ann-a", item["item_id"], broken)
    missing = {k: dict(v) for k, v in full.items()}
    del missing[rid]["authenticity"]
    with pytest.raises(CampaignError) as err:
        store.submit_rating("camp-1", "ann-a", item["item_id"], missing)
    assert "authenticity" in str(err.value)
    extra = {k: dict(v) for k, v in full.items()}
    extra[rid]["fluency"] = 5
    with pytest.raises(CampaignError):
        store.submit_rating("camp-1", "ann-a", item["item_id"], extra)


def test_resubmit_overwrites_and_audits(store):
    seeded(store)
    item = store.next_item("camp-1", "ann-a")
    ratings = {r["response_id"]: scores(4, 6) for r in item["responses"]}
    first = store.submit_rating("camp-1", "ann-a", item["item_id"], ratings)
    assert set(first["revisions"].values()) == {1}
    assert store.audit_count("camp-1") == 2

    second = store.submit_rating(
        "camp-1", "ann-a", item["item_id"],
        {rid: scores(9, 2) for rid in ratings},
    )
    assert set(second["revisions"].values()) == {2}
    assert store.audit_count("camp-1") == 4

    rows = store.export_rows("camp-1")
    assert len(rows) == 2  # live table holds only the latest scores
    assert all(r["scores"] == {"accuracy": 9, "authenticity": 2} for r in rows)
    assert all(r["revision"] == 2 for r in rows)


def test_custom_criteria_flow(store):
    store.create_campaign(
        "review", "henna review", 3, campaign_items(1), ["rev-1"],
        criteria=["approval"],
    )
    item = store.next_item("review", "rev-1")
    assert item["criteria"] == ["approval"]
    ratings = {r["response_id"]: {"approval": 1} for r in item["responses"]}
    store.submit_rating("review", "rev-1", "item-0", ratings)
    with pytest.raises(CampaignError):
        store.submit_rating(
            "review", "rev-1", "item-0",
            {r["response_id"]: scores(5) for r in item["responses"]},
        )
    stats = store.campaign_stats("review")
    assert stats["criteria"] == ["approval"]
    assert stats["models"][0]["means"] == {"approval": 1.0}


def complete_campaign(store, rating_table):
    """rating_table[annotator][model] = (accuracy, authenticity), applied to every item."""
    seeded(store)
    for annotator, per_model in rating_table.items():
        while True:
            item = store.next_item("camp-1", annotator)
            if item["done"]:
                break
            ratings = {}
            for response in item["responses"]:
                model = next(
                    m for m in MODELS
                    if response_identifier(7, item["item_id"], m) == response["response_id"]
                )
                ratings[response["response_id"]] = scores(*per_model[model])
            store.submit_rating("camp-1", annotator, item["item_id"], ratings)


def test_stats_equal_export_aggregation_exactly(store):
    complete_campaign(store, {
        "ann-a": {"model-alpha": (7, 6), "model-beta": (4, 9)},
        "ann-b": {"model-alpha": (8, 5), "model-beta": (5, 8)},
    })
    rows = store.export_rows("camp-1")
    stats = store.campaign_stats("camp-1")
    recomputed = aggregate_ratings(rows, ["accuracy", "authenticity"])
    assert stats["models"] == recomputed["models"]
    by_model = {m["model_id"]: m for m in stats["models"]}
    assert by_model["model-alpha"]["means"]["accuracy"] == (7 * 3 + 8 * 3) / 6
    assert by_model["model-alpha"]["means"]["authenticity"] == (6 * 3 + 5 * 3) / 6
    assert by_model["model-beta"]["count"] == 6
    assert stats["total_ratings"] == 12
    assert stats["expected_ratings"] == 12
    assert stats["complete"] is True
    by_annotator = {a["annotator_id"]: a for a in stats["annotators"]}
    assert set(by_annotator) == {"ann-a", "ann-b"}
    ann_a_beta = {
        m["model_id"]: m for m in by_annotator["ann-a"]["models"]
    }["model-beta"]
    assert ann_a_beta["means"] == {"accuracy": 4.0, "authenticity": 9.0}
    assert by_annotator["ann-b"]["count"] == 6


def test_export_order_is_deterministic(store):
    complete_campaign(store, {
        "ann-a": {"model-alpha": (7, 6), "model-beta": (4, 9)},
        "ann-b": {"model-alpha": (8, 5), "model-beta": (5, 8)},
    })
    assert store.export_rows("camp-1") == store.export_rows("camp-1")
    keys = [(r["item_id"], r["model_id"], r["annotator_id"]) for r in store.export_rows("camp-1")]
    assert keys == sorted(keys)


# --- HTTP layer -----------------------------------------------------------

ADMIN = {"Authorization": "Bearer sekrit"}


@pytest.fixture
def client(tmp_path):
    media = tmp_path / "media"
    media.mkdir()
    (media / "pic.jpg").write_bytes(b"\xff\xd8fakejpeg")
    app = create_app(tmp_path / "svc.db", admin_token="sekrit", media_dir=media)
    with TestClient(app) as c:
        yield c


def create_http_campaign(client, cid="web-1"):
    body = {
        "campaign_id": cid,
        "name": "web",
        "seed": 7,
        "items": campaign_items(),
        "annotators": ["ann-a", "ann-b"],
    }
    return client.post("/campaigns", json=body, headers=ADMIN)


def test_admin_endpoints_require_token(client):
    assert client.post("/campaigns", json={}).status_code == 401
    assert client.get("/campaigns/x/stats").status_code == 401
    bad = {"Authorization": "Bearer wrong"}
    assert client.get("/campaigns/x/stats", headers=bad).status_code == 403
    assert create_http_campaign(client).status_code == 200


def test_admin_endpoints_unconfigured_token(tmp_path, monkeypatch):
    monkeypatch.delenv("ANNOT_ADMIN_TOKEN", raising=False)
    app = create_app(tmp_path / "no-token.db")
    with TestClient(app) as c:
        assert c.get("/campaigns/x/stats", headers=ADMIN).status_code == 503


def test_admin_token_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ANNOT_ADMIN_TOKEN", "envtoken")
    app = create_app(tmp_path / "env-token.db")
    with TestClient(app) as c:
        r = c.post(
            "/campaigns",
            json={
                "campaign_id": "c", "name": "", "seed": 1,
                "items": campaign_items(), "annotators": ["a"],
            },
            headers={"Authorization": "Bearer envtoken"},
        )
        assert r.status_code == 200


def test_http_flow_end_to_end(client):
    assert client.get("/healthz").json() == {"ok": True}
    create_http_campaign(client)
    done = 0
    while True:
        item = client.get("/campaigns/web-1/next", params={"annotator": "ann-a"}).json()
        if item["done"]:
            break
        ratings = {r["response_id"]: scores(6, 7) for r in item["responses"]}
        ack = client.post(
            "/ratings",
            json={
                "campaign_id": "web-1", "annotator_id": "ann-a",
                "item_id": item["item_id"], "ratings": ratings,
            },
        )
        assert ack.status_code == 200 and ack.json()["ok"] is True
        done += 1
    assert done == 3
    stats = client.get("/campaigns/web-1/stats", headers=ADMIN).json()
    assert stats["total_ratings"] == 6
    export = client.get("/campaigns/web-1/export", headers=ADMIN).json()
    assert export["criteria"] == ["accuracy", "authenticity"]
    assert len(export["rows"]) == 6
    assert all(row["scores"] == {"accuracy": 6, "authenticity": 7} for row in export["rows"])


def test_http_error_mapping(client):
    create_http_campaign(client)
    r = client.get("/campaigns/none/next", params={"annotator": "ann-a"})
    assert r.status_code == 404
    r = client.get("/campaigns/web-1/next", params={"annotator": "stranger"})
    assert r.status_code == 403
    r = client.post(
        "/ratings",
        json={
            "campaign_id": "web-1", "annotator_id": "ann-a", "item_id": "item-0",
            "ratings": {"bogus": {"accuracy": 5, "authenticity": 5}},
        },
    )
    assert r.status_code == 400
    r = client.get("/campaigns/web-1/stats", headers=ADMIN)
    assert r.status_code == 400  # no ratings submitted yet


def test_media_served(client):
    r = client.get("/media/pic.jpg")
    assert r.status_code == 200
    assert r.content.startswith(b"\xff\xd8")
