"""End-to-end: the core package's remote-judge client against a live
sidecar over real HTTP.  Skips when the core package is not installed.
"""

import threading
import time

import numpy as np
import pytest

tides_judge = pytest.importorskip("tides.judge")

from clipserve.app import create_app

from conftest import silhouette


@pytest.fixture(scope="module")
def live_endpoint():
    import uvicorn

    app = create_app(model_id="tiny", dtype="float64")
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("sidecar did not start")
        time.sleep(0.05)
    host, port = server.servers[0].sockets[0].getsockname()[:2]
    yield f"http://{host}:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_client_round_trip(live_endpoint):
    client = tides_judge.RemoteJudgeClient(live_endpoint, timeout_ms=30000)
    health = client.health_check()
    assert health == {"status": "ok", "model": "tiny"}

    pixels = silhouette("triangle", 32)
    image = tides_judge.JudgeImage(32, 32, pixels)
    a = client.judge(image, "a triangle", augmentations=3, seed=4)
    b = client.judge(image, "a triangle", augmentations=3, seed=4)
    assert a.score == pytest.approx(b.score, abs=1e-6)
    assert a.grad.shape == (32, 32)
    np.testing.assert_array_equal(a.grad, b.grad)


def test_client_fd_spot_check(live_endpoint):
    client = tides_judge.RemoteJudgeClient(live_endpoint, timeout_ms=30000)
    pixels = silhouette("disk", 24)
    base = client.judge(tides_judge.JudgeImage(24, 24, pixels), "a disk",
                        augmentations=1, seed=2)
    rng = np.random.default_rng(1)
    h = 1e-3
    checked = 0
    for idx in rng.choice(pixels.size, size=10, replace=False):
        iy, ix = divmod(int(idx), 24)
        if abs(base.grad[iy, ix]) < 1e-6:
            continue
        plus = pixels.copy()
        plus[iy, ix] = min(1.0, plus[iy, ix] + h)
        minus = pixels.copy()
        minus[iy, ix] = max(0.0, minus[iy, ix] - h)
        s_plus = client.judge(tides_judge.JudgeImage(24, 24, plus), "a disk", 1, 2)
        s_minus = client.judge(tides_judge.JudgeImage(24, 24, minus), "a disk", 1, 2)
        fd = (s_plus.score - s_minus.score) / (plus[iy, ix] - minus[iy, ix])
        assert fd == pytest.approx(base.grad[iy, ix], rel=1e-2)
        checked += 1
        if checked == 5:
            break
    assert checked >= 3
