"""HTTP/JSON API for the interactive composer.

Versioned under ``/v1``: session lifecycle (create, inspect, step,
delete), item search and retrieval, and health. Sessions are held in
memory behind per-session locks with optimistic concurrency (every
mutation bumps ``version``; steps must echo ``expected_version``).
Optional file persistence snapshots each session as JSON.

Model parameters and the catalog index are loaded once and shared
read-only by all requests. Errors use ``{"code", "message", "details"}``.
"""

from __future__ import annotations

import io
import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from PIL import Image
from pydantic import BaseModel

from .catalog import DatasetSplit, load_dataset
from .errors import InvalidQueryError, PoolError
from .generation import (
    GenerationConfig,
    PartialOutfit,
    rank_candidates,
    sample_from_ranked,
    select_next_slot,
)
from .kernels import pairwise_sqdist
from .model import ItemIndex, OutfitModel
from .training import load_checkpoint, model_from_checkpoint

API_PREFIX = "/v1"
CANDIDATE_PAGE = 20


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: dict | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.details = details or {}
        super().__init__(message)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng([seed, step])


@dataclass
class Session:
    session_id: str
    query_text: str
    query_vector: np.ndarray
    slots: list[str]
    filled: dict[str, str]
    locked: set[str]
    config: GenerationConfig
    trace: list[dict] = field(default_factory=list)
    version: int = 0
    created_at: str = field(default_factory=_now)
    updated_at: str = field(default_factory=_now)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def partial(self) -> PartialOutfit:
        return PartialOutfit(slots=list(self.slots), filled=dict(self.filled),
                             locked=set(self.locked))

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "query_text": self.query_text,
            "slots": self.slots,
            "filled": self.filled,
            "locked": sorted(self.locked),
            "config": {
                "k": self.config.k,
                "sampling": self.config.sampling,
                "compat_mode": self.config.compat_mode,
                "seed": self.config.seed,
            },
            "trace": self.trace,
            "version": self.version,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }


class SessionStore:
    """In-memory session table with optional JSON snapshot persistence."""

    def __init__(self, persist_dir: str | Path | None = None):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.persist_dir = Path(persist_dir) if persist_dir else None
        if self.persist_dir:
            self.persist_dir.mkdir(parents=True, exist_ok=True)

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.session_id] = session
        self.persist(session)

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, "not_found", f"no session {session_id!r}")
        return session

    def delete(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise ApiError(404, "not_found", f"no session {session_id!r}")
            del self._sessions[session_id]
        if self.persist_dir:
            path = self.persist_dir / f"{session_id}.json"
            if path.exists():
                path.unlink()

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)

    def persist(self, session: Session) -> None:
        if not self.persist_dir:
            return
        path = self.persist_dir / f"{session.session_id}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(session.snapshot(), fh, sort_keys=True)

    def restore(self, embed_query) -> int:
        """Load persisted snapshots; query vectors are re-derived from text."""
        if not self.persist_dir:
            return 0
        count = 0
        for path in sorted(self.persist_dir.glob("*.json")):
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
            session = Session(
                session_id=raw["session_id"],
                query_text=raw["query_text"],
                query_vector=embed_query(raw["query_text"]),
                slots=list(raw["slots"]),
                filled=dict(raw["filled"]),
                locked=set(raw["locked"]),
                config=GenerationConfig(**raw["config"]),
                trace=list(raw["trace"]),
                version=raw["version"],
                created_at=raw["created_at"],
                updated_at=raw["updated_at"],
            )
            with self._lock:
                self._sessions[session.session_id] = session
            count += 1
        return count


@dataclass
class ServiceBundle:
    """Shared read-only state: model, catalog split, and prebuilt index."""

    model: OutfitModel
    split: DatasetSplit
    index: ItemIndex
    data_root: Path | None = None
    persist_dir: Path | None = None

    @classmethod
    def load(cls, checkpoint_path: str | Path, data_root: str | Path,
             split_name: str = "test", persist_dir: str | Path | None = None,
             ) -> "ServiceBundle":
        model = model_from_checkpoint(load_checkpoint(checkpoint_path))
        split = load_dataset(data_root, split_name, resolution=model.config.resolution)
        index = ItemIndex.build(model, split)
        return cls(model=model, split=split, index=index, data_root=Path(data_root),
                   persist_dir=Path(persist_dir) if persist_dir else None)


class CreateSessionRequest(BaseModel):
    query_text: str
    slots: list[str]
    config: dict = {}
    starting_items: list[str] = []


class StepRequest(BaseModel):
    action: str  # auto | choose | undo | lock | unlock
    expected_version: int
    item_id: str | None = None
    slot: str | None = None


def create_app(bundle: ServiceBundle) -> FastAPI:
    app = FastAPI(title="outfitgen composer API", version="1")
    from fastapi.middleware.cors import CORSMiddleware

    # the composer UI may be served from a different origin during development
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    store = SessionStore(bundle.persist_dir)
    store.restore(bundle.model.embed_query)
    app.state.bundle = bundle
    app.state.store = store

    model, index, split = bundle.model, bundle.index, bundle.split

    @app.exception_handler(ApiError)
    async def _api_error(_: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "details": exc.details},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={
                "code": "validation_error",
                "message": "request body failed validation",
                "details": {"errors": exc.errors()},
            },
        )

    def session_view(session: Session) -> dict:
        view = session.snapshot()
        partial = session.partial()
        active = select_next_slot(partial, session.query_vector, index)
        view["complete"] = active is None
        view["active_slot"] = active
        if active is None:
            view["candidates"] = []
            view["outfit"] = [
                {"item_id": session.filled[s], "slot": s,
                 "title": split.items[session.filled[s]].title}
                for s in session.slots
            ]
        else:
            ranked = rank_candidates(partial, session.query_vector, active, index, model,
                                     session.config.compat_mode)
            view["candidates"] = [c.to_dict() for c in ranked[:CANDIDATE_PAGE]]
        return view

    def mutate(session: Session) -> None:
        session.version += 1
        session.updated_at = _now()
        store.persist(session)

    # -- sessions ------------------------------------------------------------

    @app.post(API_PREFIX + "/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        if not req.query_text.strip():
            raise ApiError(422, "invalid_query", "query_text must be non-empty")
        unknown = [s for s in req.slots if s not in split.type_vocabulary]
        if unknown:
            raise ApiError(422, "unknown_type",
                           f"unknown semantic type(s): {', '.join(unknown)}",
                           {"types": unknown})
        if not req.slots:
            raise ApiError(422, "validation_error", "slots must be non-empty")
        if len(set(req.slots)) != len(req.slots):
            raise ApiError(422, "validation_error", "slots must be distinct")
        for slot in req.slots:
            if index.rows_of_type(slot).size == 0:
                raise ApiError(422, "pool_empty",
                               f"no catalog items of type {slot!r}", {"type": slot})
        try:
            config = GenerationConfig(**{
                k: v for k, v in req.config.items()
                if k in ("k", "sampling", "compat_mode", "seed")
            })
        except Exception as exc:
            raise ApiError(422, "validation_error", f"bad config: {exc}")

        filled: dict[str, str] = {}
        for item_id in req.starting_items:
            if item_id not in split.items:
                raise ApiError(422, "unknown_item", f"unknown item {item_id!r}",
                               {"item_id": item_id})
            slot = split.items[item_id].semantic_type
            if slot not in req.slots:
                raise ApiError(422, "unknown_type",
                               f"starting item {item_id!r} has type {slot!r} "
                               f"outside the requested slots", {"type": slot})
            if slot in filled:
                raise ApiError(422, "validation_error",
                               f"two starting items for slot {slot!r}")
            filled[slot] = item_id

        try:
            vector = model.embed_query(req.query_text)
        except InvalidQueryError as exc:
            raise ApiError(422, "invalid_query", str(exc))

        session = Session(
            session_id=uuid.uuid4().hex,
            query_text=req.query_text,
            query_vector=vector,
            slots=list(req.slots),
            filled=filled,
            locked=set(filled),
            config=config,
        )
        store.add(session)
        return session_view(session)

    @app.get(API_PREFIX + "/sessions/{session_id}")
    def get_session(session_id: str):
        return session_view(store.get(session_id))

    @app.get(API_PREFIX + "/sessions/{session_id}/board")
    def get_session_board(session_id: str):
        from .boards import render_board

        session = store.get(session_id)
        items = [split.items[session.filled[s]] for s in session.slots
                 if s in session.filled]
        if not items:
            raise ApiError(422, "validation_error", "session has no filled slots yet")
        buf = io.BytesIO()
        render_board(items, session.query_text, buf)
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.delete(API_PREFIX + "/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        store.delete(session_id)
        return Response(status_code=204)

    @app.post(API_PREFIX + "/sessions/{session_id}/step")
    def step_session(session_id: str, req: StepRequest):
        session = store.get(session_id)
        with session.lock:
            if req.expected_version != session.version:
                raise ApiError(409, "stale_version",
                               f"expected_version {req.expected_version} != "
                               f"current version {session.version}",
                               {"version": session.version})
            if req.action == "auto":
                _apply_fill(session, req, auto=True)
            elif req.action == "choose":
                _apply_fill(session, req, auto=False)
            elif req.action == "undo":
                _apply_undo(session)
            elif req.action in ("lock", "unlock"):
                _apply_lock(session, req)
            else:
                raise ApiError(422, "validation_error", f"unknown action {req.action!r}")
            mutate(session)
            return session_view(session)

    def _apply_fill(session: Session, req: StepRequest, auto: bool) -> None:
        partial = session.partial()
        active = select_next_slot(partial, session.query_vector, index)
        if active is None:
            raise ApiError(409, "complete", "session already filled every slot")
        try:
            ranked = rank_candidates(partial, session.query_vector, active, index, model,
                                     session.config.compat_mode)
        except PoolError as exc:
            raise ApiError(422, "pool_empty", str(exc), {"type": exc.semantic_type})
        step_index = len(session.trace)
        if auto:
            chosen = sample_from_ranked(ranked, session.config,
                                        _step_rng(session.config.seed, step_index))
            action = "auto"
        else:
            if req.item_id is None:
                raise ApiError(422, "validation_error", "choose needs item_id")
            if req.item_id not in {c.item_id for c in ranked}:
                raise ApiError(422, "unknown_item",
                               f"item {req.item_id!r} is not a candidate for slot "
                               f"{active!r}", {"item_id": req.item_id, "slot": active})
            chosen = req.item_id
            action = "choose"
        session.filled[active] = chosen
        session.trace.append({
            "step": step_index,
            "slot": active,
            "action": action,
            "sampling": session.config.sampling,
            "k": session.config.k,
            "chosen": chosen,
            "candidates": [c.to_dict() for c in ranked[:CANDIDATE_PAGE]],
        })

    def _apply_undo(session: Session) -> None:
        if not session.trace:
            raise ApiError(422, "validation_error", "nothing to undo")
        last = session.trace[-1]
        if last["slot"] in session.locked:
            raise ApiError(422, "validation_error",
                           f"slot {last['slot']!r} is locked; unlock it first")
        session.trace.pop()
        del session.filled[last["slot"]]

    def _apply_lock(session: Session, req: StepRequest) -> None:
        slot = req.slot
        if slot is None or slot not in session.slots:
            raise ApiError(422, "validation_error", f"unknown slot {slot!r}")
        if req.action == "lock":
            if slot not in session.filled:
                raise ApiError(422, "validation_error", f"slot {slot!r} is not filled")
            session.locked.add(slot)
        else:
            session.locked.discard(slot)

    # -- items ---------------------------------------------------------------

    @app.get(API_PREFIX + "/items/search")
    def search_items(text: str, type: str | None = None, limit: int = 10):
        if not text.strip():
            raise ApiError(422, "invalid_query", "text must be non-empty")
        if limit < 1:
            raise ApiError(422, "validation_error", "limit must be >= 1")
        vector = model.embed_query(text)
        if type is not None:
            if type not in split.type_vocabulary:
                raise ApiError(422, "unknown_type", f"unknown semantic type {type!r}",
                               {"types": [type]})
            rows = index.rows_of_type(type)
        else:
            rows = np.arange(len(index.ids))
        if rows.size == 0:
            return {"results": []}
        dists = np.sqrt(pairwise_sqdist(vector[None, :], index.vectors[rows]))[0]
        order = np.lexsort((np.asarray(index.ids, dtype=object)[rows], dists))[:limit]
        results = []
        for i in order:
            row = int(rows[int(i)])
            item = split.items[index.ids[row]]
            results.append({
                "item_id": item.item_id,
                "title": item.title,
                "semantic_type": item.semantic_type,
                "distance": float(dists[int(i)]),
                "image_url": f"{API_PREFIX}/items/{item.item_id}/image",
            })
        return {"results": results}

    @app.get(API_PREFIX + "/items/{item_id}")
    def get_item(item_id: str):
        item = split.items.get(item_id)
        if item is None:
            raise ApiError(404, "not_found", f"no item {item_id!r}")
        return {
            "item_id": item.item_id,
            "title": item.title,
            "description": item.description,
            "semantic_type": item.semantic_type,
            "fine_category": item.fine_category,
            "image_url": f"{API_PREFIX}/items/{item_id}/image",
        }

    @app.get(API_PREFIX + "/items/{item_id}/image")
    def get_item_image(item_id: str):
        item = split.items.get(item_id)
        if item is None:
            raise ApiError(404, "not_found", f"no item {item_id!r}")
        raster = np.clip(np.round(item.image * 255.0), 0, 255).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(raster, mode="RGB").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    # -- health ---------------------------------------------------------------

    @app.get(API_PREFIX + "/health")
    def health():
        return {
            "status": "ok",
            "items": len(split.items),
            "outfits": len(split.outfits),
            "types": split.type_vocabulary,
            "embed_dim": model.config.embed_dim,
            "sessions": len(store.ids()),
        }

    # serve built web assets when they exist next to the working directory
    ui_dir = Path("frontend/dist")
    if ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
