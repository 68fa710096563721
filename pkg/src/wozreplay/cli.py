"""Operator entry point: serve, import, simulate, batch, export.

Exit codes: 0 success, 2 usage/config, 3 domain error, 4 I/O.
"""

from __future__ import annotations

import asyncio
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import click

from . import batch as batch_mod
from .chain import load_templates
from .context import Budget
from .errors import WozReplayError
from .gateway import make_gateway
from .media import SamplingPolicy
from .model import MessageType
from .sessions import import_session
from .store import Store

DEFAULT_PROMPTS_DIR = Path(__file__).parent / "prompts"

TYPE_FLAGS = {
    "question": MessageType.REFLECTIVE_QUESTION,
    "design": MessageType.DESIGN_SUGGESTION,
    "software": MessageType.SOFTWARE_TIP,
}


def _read_config(path: Path | None) -> dict:
    """Optional key=value config file; '#' starts a comment."""
    cfg: dict[str, str] = {}
    if path is None:
        return cfg
    for line in path.read_text("utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.UsageError(f"bad config line: {line!r}")
        k, v = line.split("=", 1)
        cfg[k.strip()] = v.strip().strip('"')
    return cfg


def _build_budget(cfg: dict) -> Budget:
    return Budget(
        max_transcript_chars=int(cfg.get("max_transcript_chars", 24000)),
        sampling=SamplingPolicy(
            max_frames=int(cfg.get("max_frames", 10)),
            min_stride=int(cfg.get("min_stride_ms", 5000)),
        ),
    )


@click.group()
def main():
    """Replay-and-relay workbench for multimodal support agents."""


@main.command()
@click.option("--media-root", type=click.Path(path_type=Path), required=True)
@click.option("--bind", default="127.0.0.1:8787", show_default=True)
@click.option("--provider", type=click.Choice(["mock", "http"]), default="mock", show_default=True)
@click.option("--prompts-dir", type=click.Path(path_type=Path), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--console-dir", type=click.Path(exists=True, path_type=Path), default=None)
def serve(media_root, bind, provider, prompts_dir, config_path, console_dir):
    """Start the replay API and the live relay."""
    import uvicorn

    from .api import create_app
    from .relay import Relay, attach_relay

    cfg = _read_config(config_path)
    try:
        host, port_s = bind.rsplit(":", 1)
        port = int(port_s)
    except ValueError:
        raise click.UsageError(f"bad --bind {bind!r}, expected host:port")

    store = Store(media_root)
    templates = load_templates(prompts_dir or DEFAULT_PROMPTS_DIR)
    budget = _build_budget(cfg)
    try:
        gateway = make_gateway(
            provider=cfg.get("provider", provider),
            endpoint=cfg.get("endpoint", ""),
            model_id=cfg.get("model_id", ""),
            timeout_ms=int(cfg.get("timeout_ms", 60000)),
            media_root=store.root,
        )
    except ValueError as e:
        raise click.UsageError(str(e))

    app = create_app(store, templates, gateway, budget=budget,
                     cors_origin=cfg.get("cors_origin"), console_dir=console_dir)
    attach_relay(app, Relay(store, templates, gateway, budget=budget))
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except SystemExit:
        raise
    except OSError as e:
        click.echo(f"bind failed: {e}", err=True)
        sys.exit(2)


@main.command("import")
@click.option("--media-root", type=click.Path(path_type=Path), required=True)
@click.option("--id", "session_id", required=True)
@click.option("--video", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--srt", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--brief", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--frames", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--extract-cmd", default=None,
              help="external extractor template with {video} {outdir} {stride_ms}")
@click.option("--stride-ms", default=5000, show_default=True)
@click.option("--title", default=None)
def import_cmd(media_root, session_id, video, srt, brief, frames, extract_cmd, stride_ms, title):
    """Build a session directory from media files; atomic on failure."""
    store = Store(media_root)
    try:
        manifest = import_session(
            store, session_id, srt_path=srt, video_path=video, brief_path=brief,
            frames_dir=frames, extract_cmd=extract_cmd, extract_stride_ms=stride_ms,
            title=title,
        )
    except ValueError as e:
        click.echo(str(e), err=True)
        sys.exit(2)
    except WozReplayError as e:
        click.echo(f"{e.code}: {e}", err=True)
        sys.exit(3)
    except OSError as e:
        click.echo(str(e), err=True)
        sys.exit(4)
    click.echo(f"imported {manifest.id} (duration {manifest.duration} ms)")


@main.command()
@click.option("--media-root", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--session", "session_id", required=True)
@click.option("--speed", default=1.0, show_default=True)
@click.option("--target", default="ws://127.0.0.1:8787", show_default=True)
@click.option("--live-id", default=None, help="target live session id (default live-<timestamp>)")
@click.option("--linger", default=2.0, show_default=True,
              help="seconds to keep listening for deliveries after the replay ends")
def simulate(media_root, session_id, speed, target, live_id, linger):
    """Replay a recorded session into a live relay as the user client."""
    if speed <= 0:
        raise click.UsageError("--speed must be > 0")
    store = Store(media_root)
    try:
        data = store.load_session_data(session_id)
    except WozReplayError as e:
        click.echo(f"{e.code}: {e}", err=True)
        sys.exit(3)
    if live_id is None:
        live_id = "live-" + datetime.now(timezone.utc).strftime("%Y%m%d%H%M%S")
    try:
        asyncio.run(_simulate(store, data, speed, target, live_id, linger))
    except OSError as e:
        click.echo(f"connection failed: {e}", err=True)
        sys.exit(4)


async def _simulate(store, data, speed, target, live_id, linger):
    import httpx
    import websockets

    http_base = target.replace("ws://", "http://").replace("wss://", "https://")
    url = f"{target}/ws/{live_id}?role=user"

    events: list[tuple[int, str, dict]] = []
    for u in data.utterances:
        events.append((u.start, "utterance", {"text": u.text, "end": u.end}))
    for f in data.frame_index.frames:
        events.append((f.t, "frame_notice", {"name": Path(f.uri).name, "_src": f.uri}))
    events.sort(key=lambda e: e[0])

    async with httpx.AsyncClient() as http, websockets.connect(url) as ws:
        started = time.monotonic()

        async def listen():
            async for raw in ws:
                ev = json.loads(raw)
                if ev.get("kind") == "deliver":
                    mid = ev["body"]["message_id"]
                    click.echo(f"delivered {mid}: {ev['body'].get('text', '')}")
                    await ws.send(json.dumps({"t": ev.get("t", 0), "kind": "ack",
                                              "body": {"message_id": mid}}))

        listener = asyncio.create_task(listen())
        for t, kind, body in events:
            due = started + (t / 1000.0) / speed
            delay = due - time.monotonic()
            if delay > 0:
                await asyncio.sleep(delay)
            if kind == "frame_notice":
                src = store.session_dir(data.manifest.id) / body.pop("_src")
                await http.put(f"{http_base}/media/{live_id}/frames/{body['name']}",
                               content=src.read_bytes())
            await ws.send(json.dumps({"t": t, "kind": kind, "body": body}))
        try:
            await asyncio.wait_for(asyncio.shield(listener), timeout=linger)
        except asyncio.TimeoutError:
            pass
        listener.cancel()
    click.echo(f"simulated into {live_id}")


@main.command()
@click.option("--media-root", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--session", "session_id", required=True)
@click.option("--refs", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--type", "msg_type", type=click.Choice(list(TYPE_FLAGS)), default="question",
              show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--provider", type=click.Choice(["mock", "http"]), default="mock", show_default=True)
@click.option("--prompts-dir", type=click.Path(path_type=Path), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
def batch(media_root, session_id, refs, msg_type, out, provider, prompts_dir, config_path):
    """Generate a counterfactual message at each reference timestamp."""
    cfg = _read_config(config_path)
    store = Store(media_root)
    templates = load_templates(prompts_dir or DEFAULT_PROMPTS_DIR)
    gateway = make_gateway(provider=cfg.get("provider", provider),
                           endpoint=cfg.get("endpoint", ""),
                           model_id=cfg.get("model_id", ""),
                           media_root=store.root)
    try:
        all_refs = batch_mod.load_refs(Path(refs).read_bytes())
        session_refs = [r for r in all_refs if r.session_id == session_id]
        rows = batch_mod.run_batch(store, session_id, session_refs,
                                   TYPE_FLAGS[msg_type], templates, gateway,
                                   budget=_build_budget(cfg))
    except WozReplayError as e:
        click.echo(f"{e.code}: {e}", err=True)
        sys.exit(3)
    Path(out).write_bytes(batch_mod.rows_to_csv(rows))
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command()
@click.option("--media-root", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--session", "session_id", required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def export(media_root, session_id, out):
    """Export a session's messages, ratings and annotations as CSV."""
    store = Store(media_root)
    try:
        data = store.export_csv(session_id)
    except WozReplayError as e:
        click.echo(f"{e.code}: {e}", err=True)
        sys.exit(3)
    Path(out).write_bytes(data)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
