"""
The harvest REST service
========================

The field console's backend: create a session, upload branch photos for
analysis, read the ripeness timeline back. This spins the service up in a
background thread on a free port and talks plain HTTP to it (httpx comes
from the package's test extras).
"""

import io
import socket
import tempfile
import threading
import time
from pathlib import Path

import httpx
import uvicorn
from PIL import Image

from coffeevision.service import ServiceConfig, create_app
from coffeevision.synth import generate_season

work = Path(tempfile.mkdtemp(prefix="coffeevision-demo-"))
generate_season(work, days=12, berries_per_image=18, seed=9)

with socket.socket() as s:
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]

app = create_app(ServiceConfig(data_dir=work / "data"))
server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                       log_level="warning"))
threading.Thread(target=server.run, daemon=True).start()
base = f"http://127.0.0.1:{port}"
for _ in range(100):
    try:
        if httpx.get(f"{base}/health").status_code == 200:
            break
    except httpx.TransportError:
        time.sleep(0.05)
print(f"service is up at {base}")

session_id = httpx.post(f"{base}/sessions",
                        json={"name": "north-plot"}).json()["session_id"]
print(f"session created: {session_id}\n")

schedule = (work / "season.csv").read_text().splitlines()[1:]
for line in schedule:
    image_id, captured_at = line.split(",", 1)
    png = (work / "images" / f"{image_id}.png").read_bytes()
    resp = httpx.post(
        f"{base}/sessions/{session_id}/analyze",
        files={"image": (f"{image_id}.png", png, "image/png")},
        data={"mode": "binary", "captured_at": captured_at})
    doc = resp.json()
    ripeness = doc["ripeness_percent"]
    shown = f"{ripeness:5.1f}%" if ripeness is not None else "    --"
    print(f"  {captured_at[:10]}  counts={doc['counts']}  ripeness={shown}")

timeline = httpx.get(f"{base}/sessions/{session_id}/timeline?mode=binary").json()
print(f"\ntimeline has {len(timeline)} rows; latest ripeness "
      f"{timeline[-1]['ripeness_percent']:.1f}%")
print("(the data directory survives restarts; journals replay on boot)")
server.should_exit = True
