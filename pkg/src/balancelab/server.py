"""WebSocket service running balancing sessions in real time.

One app instance hosts one session at a time.  Clients speak JSON text
frames:

  client -> server: {"type": "hello", "subject": 1, "session": "<code>"}
                    {"type": "mouse", "tick": 12, "px": 601}
                    {"type": "abort"}
  server -> client: {"type": "countdown", "n": 3}
                    {"type": "state", "tick": 0, "thick": [...], "thin": [...]}
                    {"type": "end", "cause": "completed"}

The tick loop is the single authority; client input lands in per-subject
mailboxes (latest-wins per tick) and never blocks the loop.  Rows are
appended to the trial file as they are produced.
"""

from __future__ import annotations

import asyncio
import json
import time
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .engine import SessionConfig, SessionEngine
from .trial import TrialWriter, TRIAL_SUFFIX


class SessionHub:
    """Connection registry and tick-loop driver for one session."""

    def __init__(self, config: SessionConfig, outdir: Path):
        self.config = config
        self.outdir = Path(outdir)
        self.clients: dict[int, WebSocket] = {}
        self.mailbox: dict[int, int | None] = {}
        self.engine: SessionEngine | None = None
        self.writer: TrialWriter | None = None
        self.task: asyncio.Task | None = None
        self.abort_requested = False
        self.lost_client = False
        self.finished = asyncio.Event()

    # -- client side --------------------------------------------------------

    async def register(self, ws: WebSocket, subject: int) -> bool:
        if subject < 1 or subject > self.config.n_subjects or subject in self.clients:
            return False
        self.clients[subject] = ws
        self.mailbox[subject] = None
        if len(self.clients) == self.config.n_subjects and self.task is None:
            self.task = asyncio.create_task(self.run())
        return True

    def post_mouse(self, subject: int, px: int) -> None:
        if 1 <= px <= self.config.screen_width:
            self.mailbox[subject] = px

    def drop(self, subject: int) -> None:
        self.clients.pop(subject, None)
        if self.task is not None and not self.finished.is_set():
            self.lost_client = True

    # -- session side -------------------------------------------------------

    async def broadcast(self, msg: dict) -> None:
        text = json.dumps(msg)
        for ws in list(self.clients.values()):
            try:
                await ws.send_text(text)
            except Exception:
                pass

    def _trial_path(self) -> Path:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        return self.outdir / f"{self.config.session_code}-{stamp}{TRIAL_SUFFIX}"

    async def run(self) -> None:
        c = self.config
        self.engine = SessionEngine(c)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.writer = TrialWriter(self._trial_path(), c.to_dict(),
                                  self.engine.subjects)
        try:
            for n in range(c.countdown, 0, -1):
                await self.broadcast({"type": "countdown", "n": n})
                await asyncio.sleep(1.0)
            loop = asyncio.get_running_loop()
            t0 = loop.time()
            interval = 1.0 / c.tick_rate
            cause = None
            k = 0
            while cause is None:
                inputs = {s: self.mailbox[s] for s in list(self.mailbox)}
                for s in self.mailbox:
                    self.mailbox[s] = None
                msg, cause = self.engine.tick(inputs)
                self.writer.write_row(self.engine.rows[-1])
                await self.broadcast(msg)
                if self.abort_requested:
                    self.engine.abort("aborted-by-subject")
                    cause = self.engine.ended
                elif self.lost_client:
                    self.engine.abort("client-lost")
                    cause = self.engine.ended
                if cause is None:
                    k += 1
                    delay = t0 + k * interval - loop.time()
                    if delay > 0:
                        await asyncio.sleep(delay)
            self.writer.finish(cause)
            await self.broadcast({"type": "end", "cause": cause})
        finally:
            if self.writer is not None:
                self.writer.close()
            self.finished.set()
            for ws in list(self.clients.values()):
                try:
                    await ws.close()
                except Exception:
                    pass

    def shutdown(self) -> None:
        """Flush a live session as subject-aborted (service going down)."""
        if self.engine is not None and self.engine.ended is None:
            self.engine.abort("aborted-by-subject")
            if self.writer is not None:
                self.writer.finish("aborted-by-subject")


def create_app(config: SessionConfig, outdir) -> FastAPI:
    app = FastAPI()
    hub = SessionHub(config, Path(outdir))
    app.state.hub = hub

    @app.get("/config")
    async def get_config():
        return config.to_dict()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        subject = None
        try:
            raw = await ws.receive_text()
            msg = json.loads(raw)
            if msg.get("type") != "hello" \
                    or msg.get("session") != config.session_code:
                await ws.close(code=4000)
                return
            subject = int(msg.get("subject", 0))
            if not await hub.register(ws, subject):
                await ws.close(code=4001)
                return
            while True:
                raw = await ws.receive_text()
                msg = json.loads(raw)
                if msg.get("type") == "mouse":
                    hub.post_mouse(subject, int(msg["px"]))
                elif msg.get("type") == "abort":
                    hub.abort_requested = True
        except WebSocketDisconnect:
            pass
        except Exception:
            pass
        finally:
            if subject is not None:
                hub.drop(subject)

    @app.on_event("shutdown")
    async def on_shutdown():
        hub.shutdown()

    return app
