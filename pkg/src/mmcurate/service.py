"""Blind side-by-side rating service for model responses.

Annotators see responses in a per-annotator shuffled order under opaque
response ids; model identities exist only server-side and only admin
endpoints can see them. Storage is a single sqlite file in WAL mode so a
mid-write crash cannot corrupt finished ratings.
"""

from __future__ import annotations

import hmac
import json
import os
import random
import sqlite3
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel, Field

from .cache import content_hash
from .errors import CampaignError

SCORE_MIN = 1
SCORE_MAX = 10

# Per-response scoring criteria; the dialect study rates accuracy and
# authenticity, other campaigns may configure their own list.
DEFAULT_CRITERIA = ("accuracy", "authenticity")

ADMIN_TOKEN_ENV = "ANNOT_ADMIN_TOKEN"


class RosterError(CampaignError):
    """Caller is not on the campaign roster; maps to a 403 over HTTP."""

# One ratings row per (annotator, response); the scores column holds the
# full criterion map as JSON so a revision covers the set atomically.
_SCHEMA = """
CREATE TABLE IF NOT EXISTS campaigns (
    campaign_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    seed INTEGER NOT NULL,
    criteria TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS campaign_models (
    campaign_id TEXT NOT NULL,
    model_id TEXT NOT NULL,
    PRIMARY KEY (campaign_id, model_id)
);
CREATE TABLE IF NOT EXISTS campaign_annotators (
    campaign_id TEXT NOT NULL,
    annotator_id TEXT NOT NULL,
    PRIMARY KEY (campaign_id, annotator_id)
);
CREATE TABLE IF NOT EXISTS items (
    campaign_id TEXT NOT NULL,
    item_id TEXT NOT NULL,
    ordinal INTEGER NOT NULL,
    question TEXT NOT NULL,
    image TEXT,
    PRIMARY KEY (campaign_id, item_id)
);
CREATE TABLE IF NOT EXISTS responses (
    campaign_id TEXT NOT NULL,
    response_id TEXT NOT NULL,
    item_id TEXT NOT NULL,
    model_id TEXT NOT NULL,
    text TEXT NOT NULL,
    PRIMARY KEY (campaign_id, response_id)
);
CREATE TABLE IF NOT EXISTS ratings (
    campaign_id TEXT NOT NULL,
    annotator_id TEXT NOT NULL,
    response_id TEXT NOT NULL,
    scores TEXT NOT NULL,
    revision INTEGER NOT NULL,
    submitted_at TEXT NOT NULL,
    PRIMARY KEY (campaign_id, annotator_id, response_id)
);
CREATE TABLE IF NOT EXISTS rating_audit (
    audit_id INTEGER PRIMARY KEY AUTOINCREMENT,
    campaign_id TEXT NOT NULL,
    annotator_id TEXT NOT NULL,
    response_id TEXT NOT NULL,
    scores TEXT NOT NULL,
    revision INTEGER NOT NULL,
    submitted_at TEXT NOT NULL
);
"""


def response_identifier(seed: int, item_id: str, model_id: str) -> str:
    """Opaque id for one response. Derived from content, not position, so
    the id itself cannot leak which slot a model landed in."""
    return content_hash(str(seed), item_id, model_id)[:16]


def display_order(seed: int, annotator_id: str, item_id: str, model_ids: Sequence[str]) -> list[str]:
    """Per-annotator, per-item shuffle of the model list. Same inputs, same
    order, every call, so a reload never reshuffles under the annotator."""
    rng = random.Random(f"{seed}:{annotator_id}:{item_id}")
    base = sorted(model_ids)
    return rng.sample(base, len(base))


def aggregate_ratings(
    rows: Sequence[Mapping[str, Any]],
    criteria: Sequence[str] | None = None,
) -> dict[str, Any]:
    """Per-model, per-criterion mean and count over export rows.

    Stats endpoints call this on the same rows the export endpoint serves,
    so the two can never drift apart. Means stay on the 1-10 rating scale.
    """
    if criteria is None:
        criteria = sorted({c for row in rows for c in row["scores"]})
    sums: dict[str, dict[str, int]] = {}
    counts: dict[str, int] = {}
    for row in rows:
        model = row["model_id"]
        counts[model] = counts.get(model, 0) + 1
        per_model = sums.setdefault(model, {c: 0 for c in criteria})
        for criterion in criteria:
            per_model[criterion] += row["scores"][criterion]
    models = [
        {
            "model_id": m,
            "count": counts[m],
            "means": {c: sums[m][c] / counts[m] for c in criteria},
        }
        for m in sorted(counts)
    ]
    return {"models": models, "total_ratings": len(rows)}


class CampaignStore:
    """All persistence for rating campaigns, one sqlite file."""

    def __init__(self, db_path: str | Path):
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(str(db_path), check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA foreign_keys=ON")
        with self._lock, self._conn:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        self._conn.close()

    def create_campaign(
        self,
        campaign_id: str,
        name: str,
        seed: int,
        items: Sequence[Mapping[str, Any]],
        annotators: Sequence[str],
        criteria: Sequence[str] = DEFAULT_CRITERIA,
    ) -> dict[str, Any]:
        """Register a campaign. Every item must carry a response from the
        same model set; the model list is derived, never trusted separately."""
        if not items:
            raise CampaignError("campaign needs at least one item")
        if not annotators:
            raise CampaignError("campaign needs at least one annotator")
        if len(set(annotators)) != len(annotators):
            raise CampaignError("duplicate annotator ids")
        criteria = [str(c) for c in criteria]
        if not criteria or any(not c for c in criteria):
            raise CampaignError("criteria must be non-empty names")
        if len(set(criteria)) != len(criteria):
            raise CampaignError("duplicate criteria")
        model_set: set[str] | None = None
        for item in items:
            responses = item.get("responses") or {}
            if not responses:
                raise CampaignError(
                    f"item {item.get('id')!r} needs at least one response"
                )
            if model_set is None:
                model_set = set(responses)
            elif set(responses) != model_set:
                raise CampaignError(
                    f"item {item.get('id')!r} has a different model set"
                )
        assert model_set is not None
        item_ids = [str(item["id"]) for item in items]
        if len(set(item_ids)) != len(item_ids):
            raise CampaignError("duplicate item ids")

        with self._lock, self._conn:
            exists = self._conn.execute(
                "SELECT 1 FROM campaigns WHERE campaign_id = ?", (campaign_id,)
            ).fetchone()
            if exists:
                raise CampaignError(f"campaign {campaign_id!r} already exists")
            self._conn.execute(
                "INSERT INTO campaigns (campaign_id, name, seed, criteria) "
                "VALUES (?, ?, ?, ?)",
                (campaign_id, name, seed, json.dumps(criteria)),
            )
            for model_id in sorted(model_set):
                self._conn.execute(
                    "INSERT INTO campaign_models (campaign_id, model_id) VALUES (?, ?)",
                    (campaign_id, model_id),
                )
            for annotator_id in annotators:
                self._conn.execute(
                    "INSERT INTO campaign_annotators (campaign_id, annotator_id) "
                    "VALUES (?, ?)",
                    (campaign_id, annotator_id),
                )
            for ordinal, item in enumerate(items):
                self._conn.execute(
                    "INSERT INTO items (campaign_id, item_id, ordinal, question, image) "
                    "VALUES (?, ?, ?, ?, ?)",
                    (
                        campaign_id,
                        str(item["id"]),
                        ordinal,
                        str(item.get("question", "")),
                        item.get("image"),
                    ),
                )
                for model_id, text in item["responses"].items():
                    self._conn.execute(
                        "INSERT INTO responses "
                        "(campaign_id, response_id, item_id, model_id, text) "
                        "VALUES (?, ?, ?, ?, ?)",
                        (
                            campaign_id,
                            response_identifier(seed, str(item["id"]), model_id),
                            str(item["id"]),
                            model_id,
                            str(text),
                        ),
                    )
        return {
            "campaign_id": campaign_id,
            "items": len(items),
            "models": len(model_set),
            "annotators": len(annotators),
            "criteria": criteria,
        }

    def _campaign(self, campaign_id: str) -> sqlite3.Row:
        row = self._conn.execute(
            "SELECT * FROM campaigns WHERE campaign_id = ?", (campaign_id,)
        ).fetchone()
        if row is None:
            raise CampaignError(f"no campaign {campaign_id!r}")
        return row

    @staticmethod
    def _criteria(campaign_row: sqlite3.Row) -> list[str]:
        return json.loads(campaign_row["criteria"])

    def _models(self, campaign_id: str) -> list[str]:
        rows = self._conn.execute(
            "SELECT model_id FROM campaign_models WHERE campaign_id = ? ORDER BY model_id",
            (campaign_id,),
        ).fetchall()
        return [r["model_id"] for r in rows]

    def _require_annotator(self, campaign_id: str, annotator_id: str) -> None:
        row = self._conn.execute(
            "SELECT 1 FROM campaign_annotators WHERE campaign_id = ? AND annotator_id = ?",
            (campaign_id, annotator_id),
        ).fetchone()
        if row is None:
            raise RosterError(
                f"annotator {annotator_id!r} is not part of campaign {campaign_id!r}"
            )

    def next_item(self, campaign_id: str, annotator_id: str) -> dict[str, Any]:
        """The first item this annotator has not fully rated, with responses
        in this annotator's display order. Model ids never appear here."""
        with self._lock:
            campaign = self._campaign(campaign_id)
            self._require_annotator(campaign_id, annotator_id)
            models = self._models(campaign_id)
            items = self._conn.execute(
                "SELECT item_id, ordinal, question, image FROM items "
                "WHERE campaign_id = ? ORDER BY ordinal",
                (campaign_id,),
            ).fetchall()
            total = len(items)
            for position, item in enumerate(items):
                rated = self._conn.execute(
                    "SELECT COUNT(*) AS n FROM ratings r JOIN responses s "
                    "ON r.campaign_id = s.campaign_id AND r.response_id = s.response_id "
                    "WHERE r.campaign_id = ? AND r.annotator_id = ? AND s.item_id = ?",
                    (campaign_id, annotator_id, item["item_id"]),
                ).fetchone()["n"]
                if rated >= len(models):
                    continue
                order = display_order(
                    campaign["seed"], annotator_id, item["item_id"], models
                )
                responses = []
                for model_id in order:
                    rid = response_identifier(
                        campaign["seed"], item["item_id"], model_id
                    )
                    text_row = self._conn.execute(
                        "SELECT text FROM responses "
                        "WHERE campaign_id = ? AND response_id = ?",
                        (campaign_id, rid),
                    ).fetchone()
                    responses.append({"response_id": rid, "text": text_row["text"]})
                return {
                    "done": False,
                    "campaign_id": campaign_id,
                    "item_id": item["item_id"],
                    "question": item["question"],
                    "image": item["image"],
                    "position": position,
                    "total": total,
                    "responses": responses,
                    "criteria": self._criteria(campaign),
                    "score_min": SCORE_MIN,
                    "score_max": SCORE_MAX,
                }
            return {"done": True, "campaign_id": campaign_id, "total": total}

    def submit_rating(
        self,
        campaign_id: str,
        annotator_id: str,
        item_id: str,
        ratings: Mapping[str, Mapping[str, int]],
    ) -> dict[str, Any]:
        """Store one complete rating set for an item.

        ``ratings`` maps every response id of the item to a full criterion
        score map. Resubmission overwrites the live scores and bumps each
        response's revision; every submission also lands in the append-only
        audit table.
        """
        with self._lock, self._conn:
            campaign = self._campaign(campaign_id)
            self._require_annotator(campaign_id, annotator_id)
            criteria = self._criteria(campaign)
            rows = self._conn.execute(
                "SELECT response_id FROM responses "
                "WHERE campaign_id = ? AND item_id = ?",
                (campaign_id, item_id),
            ).fetchall()
            if not rows:
                raise CampaignError(f"no item {item_id!r} in campaign {campaign_id!r}")
            expected = {r["response_id"] for r in rows}
            given = set(ratings)
            if given != expected:
                raise CampaignError(
                    f"ratings must cover all {len(expected)} responses of the item"
                )
            for response_id, scores in ratings.items():
                if set(scores) != set(criteria):
                    missing = sorted(set(criteria) - set(scores))
                    if missing:
                        raise CampaignError(
                            f"response {response_id} is missing criteria: "
                            + ", ".join(missing)
                        )
                    raise CampaignError(
                        f"response {response_id} has unknown criteria"
                    )
                for criterion, score in scores.items():
                    if isinstance(score, bool) or not isinstance(score, int):
                        raise CampaignError(
                            f"{criterion} score for {response_id} must be an integer"
                        )
                    if not SCORE_MIN <= score <= SCORE_MAX:
                        raise CampaignError(
                            f"{criterion} score {score} outside "
                            f"[{SCORE_MIN}, {SCORE_MAX}]"
                        )
            submitted_at = datetime.now(timezone.utc).isoformat()
            revisions: dict[str, int] = {}
            for response_id, scores in ratings.items():
                payload = json.dumps(
                    {c: scores[c] for c in criteria}, sort_keys=True
                )
                existing = self._conn.execute(
                    "SELECT revision FROM ratings WHERE campaign_id = ? "
                    "AND annotator_id = ? AND response_id = ?",
                    (campaign_id, annotator_id, response_id),
                ).fetchone()
                revision = 1 if existing is None else existing["revision"] + 1
                revisions[response_id] = revision
                self._conn.execute(
                    "INSERT INTO ratings "
                    "(campaign_id, annotator_id, response_id, scores, revision, submitted_at) "
                    "VALUES (?, ?, ?, ?, ?, ?) "
                    "ON CONFLICT (campaign_id, annotator_id, response_id) "
                    "DO UPDATE SET scores = excluded.scores, "
                    "revision = excluded.revision, submitted_at = excluded.submitted_at",
                    (campaign_id, annotator_id, response_id, payload, revision, submitted_at),
                )
                self._conn.execute(
                    "INSERT INTO rating_audit "
                    "(campaign_id, annotator_id, response_id, scores, revision, submitted_at) "
                    "VALUES (?, ?, ?, ?, ?, ?)",
                    (campaign_id, annotator_id, response_id, payload, revision, submitted_at),
                )
            return {"ok": True, "item_id": item_id, "revisions": revisions}

    def campaign_criteria(self, campaign_id: str) -> list[str]:
        with self._lock:
            return self._criteria(self._campaign(campaign_id))

    def export_rows(self, campaign_id: str) -> list[dict[str, Any]]:
        """De-anonymized rating rows in a fixed deterministic order."""
        with self._lock:
            self._campaign(campaign_id)
            rows = self._conn.execute(
                "SELECT i.ordinal, s.item_id, s.model_id, r.response_id, "
                "r.annotator_id, r.scores, r.revision, r.submitted_at "
                "FROM ratings r "
                "JOIN responses s ON r.campaign_id = s.campaign_id "
                "AND r.response_id = s.response_id "
                "JOIN items i ON s.campaign_id = i.campaign_id "
                "AND s.item_id = i.item_id "
                "WHERE r.campaign_id = ? "
                "ORDER BY i.ordinal, s.model_id, r.annotator_id",
                (campaign_id,),
            ).fetchall()
        return [
            {
                "item_id": row["item_id"],
                "model_id": row["model_id"],
                "response_id": row["response_id"],
                "annotator_id": row["annotator_id"],
                "scores": json.loads(row["scores"]),
                "revision": row["revision"],
                "submitted_at": row["submitted_at"],
            }
            for row in rows
        ]

    def campaign_stats(self, campaign_id: str) -> dict[str, Any]:
        """Per-model per-criterion means, plus the same broken out per
        annotator; computed from export rows so the two views agree."""
        criteria = self.campaign_criteria(campaign_id)
        rows = self.export_rows(campaign_id)
        if not rows:
            raise CampaignError(f"campaign {campaign_id!r} has no ratings yet")
        stats = aggregate_ratings(rows, criteria)
        stats["criteria"] = criteria
        by_annotator: dict[str, list[dict[str, Any]]] = {}
        for row in rows:
            by_annotator.setdefault(row["annotator_id"], []).append(row)
        stats["annotators"] = [
            {
                "annotator_id": annotator_id,
                "count": len(subset),
                "models": aggregate_ratings(subset, criteria)["models"],
            }
            for annotator_id, subset in sorted(by_annotator.items())
        ]
        with self._lock:
            n_items = self._conn.execute(
                "SELECT COUNT(*) AS n FROM items WHERE campaign_id = ?",
                (campaign_id,),
            ).fetchone()["n"]
            n_annotators = self._conn.execute(
                "SELECT COUNT(*) AS n FROM campaign_annotators WHERE campaign_id = ?",
                (campaign_id,),
            ).fetchone()["n"]
            n_models = len(self._models(campaign_id))
        expected = n_items * n_annotators * n_models
        stats["expected_ratings"] = expected
        stats["complete"] = stats["total_ratings"] >= expected
        return stats

    def audit_count(self, campaign_id: str) -> int:
        with self._lock:
            row = self._conn.execute(
                "SELECT COUNT(*) AS n FROM rating_audit WHERE campaign_id = ?",
                (campaign_id,),
            ).fetchone()
        return row["n"]


class CampaignItemIn(BaseModel):
    id: str
    question: str = ""
    image: str | None = None
    responses: dict[str, str]


class CampaignIn(BaseModel):
    campaign_id: str = Field(min_length=1)
    name: str = ""
    seed: int = 0
    items: list[CampaignItemIn]
    annotators: list[str]
    criteria: list[str] | None = None


class RatingIn(BaseModel):
    campaign_id: str = Field(min_length=1)
    annotator_id: str = Field(min_length=1)
    item_id: str = Field(min_length=1)
    ratings: dict[str, dict[str, int]]


def create_app(
    db_path: str | Path,
    admin_token: str | None = None,
    media_dir: str | Path | None = None,
) -> FastAPI:
    """Build the HTTP app over one campaign store.

    Admin endpoints (create, stats, export) need a bearer token, which
    defaults to the ANNOT_ADMIN_TOKEN environment variable. Annotator
    endpoints are open: annotators authenticate out of band and carry no
    secrets that could deanonymize responses.
    """
    store = CampaignStore(db_path)
    token = admin_token if admin_token is not None else os.environ.get(ADMIN_TOKEN_ENV)
    app = FastAPI(title="rating-service")
    app.state.store = store

    def require_admin(authorization: str | None = Header(default=None)) -> None:
        if not token:
            raise HTTPException(status_code=503, detail="admin token not configured")
        if authorization is None or not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        supplied = authorization.removeprefix("Bearer ")
        if not hmac.compare_digest(supplied, token):
            raise HTTPException(status_code=403, detail="bad admin token")

    def fail(exc: CampaignError) -> HTTPException:
        message = str(exc)
        if isinstance(exc, RosterError):
            return HTTPException(status_code=403, detail=message)
        if message.startswith("no campaign") or "no item" in message:
            return HTTPException(status_code=404, detail=message)
        return HTTPException(status_code=400, detail=message)

    @app.get("/healthz")
    def healthz() -> dict[str, bool]:
        return {"ok": True}

    @app.post("/campaigns", dependencies=[Depends(require_admin)])
    def create_campaign(body: CampaignIn) -> dict[str, Any]:
        try:
            return store.create_campaign(
                body.campaign_id,
                body.name,
                body.seed,
                [item.model_dump() for item in body.items],
                body.annotators,
                criteria=body.criteria if body.criteria is not None else DEFAULT_CRITERIA,
            )
        except CampaignError as exc:
            raise fail(exc) from exc

    @app.get("/campaigns/{campaign_id}/next")
    def next_item(campaign_id: str, annotator: str) -> dict[str, Any]:
        try:
            return store.next_item(campaign_id, annotator)
        except CampaignError as exc:
            raise fail(exc) from exc

    @app.post("/ratings")
    def submit(body: RatingIn) -> dict[str, Any]:
        try:
            return store.submit_rating(
                body.campaign_id, body.annotator_id, body.item_id, body.ratings
            )
        except CampaignError as exc:
            raise fail(exc) from exc

    @app.get("/campaigns/{campaign_id}/stats", dependencies=[Depends(require_admin)])
    def stats(campaign_id: str) -> dict[str, Any]:
        try:
            return store.campaign_stats(campaign_id)
        except CampaignError as exc:
            raise fail(exc) from exc

    @app.get("/campaigns/{campaign_id}/export", dependencies=[Depends(require_admin)])
    def export(campaign_id: str) -> dict[str, Any]:
        try:
            return {
                "criteria": store.campaign_criteria(campaign_id),
                "rows": store.export_rows(campaign_id),
            }
        except CampaignError as exc:
            raise fail(exc) from exc

    if media_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/media", StaticFiles(directory=str(media_dir)), name="media")

    return app
