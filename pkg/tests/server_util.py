"""Run a real uvicorn server on an ephemeral port for websocket tests.

The in-process ASGI test client runs each websocket connection on its own
event loop thread, so multi-client relay state would be shared across
loops. A real server keeps everything on one loop, same as production.
"""

import contextlib
import threading
import time

import httpx
import uvicorn


class LiveServer:
    def __init__(self, port: int):
        self.port = port
        self.base_url = f"http://127.0.0.1:{port}"
        self.ws_base = f"ws://127.0.0.1:{port}"
        self.http = httpx.Client(base_url=self.base_url, timeout=10.0)


@contextlib.contextmanager
def run_server(app):
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline or not thread.is_alive():
            raise RuntimeError("server failed to start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    srv = LiveServer(port)
    try:
        yield srv
    finally:
        srv.http.close()
        server.should_exit = True
        thread.join(timeout=5)
