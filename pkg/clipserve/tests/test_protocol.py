"""Wire-protocol conformance, including the golden payloads shared with the
core package's client tests (tests/golden/protocol at the repo root).
"""

import json
from pathlib import Path

import numpy as np

from clipserve.app import create_app
from clipserve.scoring import decode_b64, encode_b64

from conftest import judge_payload, silhouette

GOLDEN = Path(__file__).resolve().parents[2] / "tests" / "golden" / "protocol"


class TestHealth:
    def test_ok_when_loaded(self, client):
        resp = client.get("/v1/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert body["model"] == "tiny"

    def test_503_while_not_loaded(self):
        from fastapi.testclient import TestClient

        app = create_app(model_id="tiny", preload=False)
        with TestClient(app) as c:
            resp = c.get("/v1/health")
            assert resp.status_code == 503
            assert "error" in resp.json()
            probe = c.post("/v1/judge", json=judge_payload(silhouette("disk", 8), "x"))
            assert probe.status_code == 503
            app.state.load_model()
            assert c.get("/v1/health").status_code == 200


class TestGoldenPayloads:
    def test_b64_codec_matches_golden_bytes(self):
        golden = json.loads((GOLDEN / "request.json").read_text())
        pixels = np.array(golden["_pixels"]).reshape(golden["height"], golden["width"])
        assert encode_b64(pixels) == golden["pixels_b64"]
        response = json.loads((GOLDEN / "response.json").read_text())
        grad = decode_b64(response["grad_b64"], response["grad_width"],
                          response["grad_height"])
        np.testing.assert_allclose(
            grad.ravel(), np.array(response["_grad"], dtype="<f4").astype(np.float64)
        )

    def test_golden_request_accepted(self, client):
        golden = json.loads((GOLDEN / "request.json").read_text())
        request = {k: v for k, v in golden.items() if not k.startswith("_")}
        resp = client.post("/v1/judge", json=request)
        assert resp.status_code == 200
        body = resp.json()
        assert set(body) == {"score", "grad_b64", "grad_width", "grad_height"}
        assert (body["grad_width"], body["grad_height"]) == (golden["width"], golden["height"])
        grad = decode_b64(body["grad_b64"], body["grad_width"], body["grad_height"])
        assert grad.shape == (golden["height"], golden["width"])
        assert np.all(np.isfinite(grad))
        assert np.isfinite(body["score"])


class TestValidation:
    def test_empty_prompt(self, client):
        resp = client.post("/v1/judge", json=judge_payload(silhouette("disk", 8), ""))
        assert resp.status_code == 400
        assert "error" in resp.json()

    def test_zero_augmentations(self, client):
        payload = judge_payload(silhouette("disk", 8), "a disk", augmentations=0)
        assert client.post("/v1/judge", json=payload).status_code == 400

    def test_payload_length_mismatch(self, client):
        payload = judge_payload(silhouette("disk", 8), "a disk")
        payload["width"] = 11
        resp = client.post("/v1/judge", json=payload)
        assert resp.status_code == 400
        assert "payload" in resp.json()["error"]

    def test_missing_field(self, client):
        payload = judge_payload(silhouette("disk", 8), "a disk")
        del payload["seed"]
        assert client.post("/v1/judge", json=payload).status_code == 400

    def test_out_of_range_pixels(self, client):
        pixels = silhouette("disk", 8)
        pixels[0, 0] = 1.5
        payload = judge_payload(pixels, "a disk")
        assert client.post("/v1/judge", json=payload).status_code == 400

    def test_bad_base64(self, client):
        payload = judge_payload(silhouette("disk", 8), "a disk")
        payload["pixels_b64"] = "!!!not-base64!!!"
        assert client.post("/v1/judge", json=payload).status_code == 400
