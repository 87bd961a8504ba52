"""HTTP surface of the judge sidecar.

    GET  /v1/health -> {"status": "ok", "model": "<model-id>"} (503 while loading)
    POST /v1/judge  -> {"score", "grad_b64", "grad_width", "grad_height"}

Malformed payloads answer 400 with {"error": ...}.  Inference is serialized
(one request at a time touches the model); the protocol is stateless apart
from the per-prompt text-embedding cache.
"""

from __future__ import annotations

import threading

import numpy as np
import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .model import DEFAULT_MODEL, JudgeModel
from .scoring import decode_b64, encode_b64, score_and_grad


class JudgeRequest(BaseModel):
    prompt: str
    width: int
    height: int
    pixels_b64: str
    augmentations: int
    seed: int


def create_app(model_id: str = DEFAULT_MODEL, device: str = "cpu",
               dtype: str = "float32", preload: bool = True) -> FastAPI:
    app = FastAPI(title="clipserve")
    app.state.model = None
    app.state.load_error = None
    app.state.inference_lock = threading.Lock()
    torch_dtype = {"float32": torch.float32, "float64": torch.float64}[dtype]

    def load_model():
        if app.state.model is None and app.state.load_error is None:
            try:
                app.state.model = JudgeModel(model_id, device, torch_dtype)
            except Exception as exc:  # surface as 503 until resolved
                app.state.load_error = str(exc)

    app.state.load_model = load_model
    if preload:
        load_model()

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.get("/v1/health")
    def health():
        if app.state.model is None:
            detail = app.state.load_error or "model loading"
            return JSONResponse(status_code=503, content={"error": detail})
        return {"status": "ok", "model": app.state.model.model_id}

    @app.post("/v1/judge")
    def judge(request: JudgeRequest):
        if app.state.model is None:
            detail = app.state.load_error or "model loading"
            return JSONResponse(status_code=503, content={"error": detail})
        if not request.prompt:
            return JSONResponse(status_code=400, content={"error": "empty prompt"})
        if request.augmentations < 1:
            return JSONResponse(status_code=400, content={"error": "augmentations must be >= 1"})
        if request.width < 1 or request.height < 1:
            return JSONResponse(status_code=400, content={"error": "bad image dims"})
        try:
            pixels = decode_b64(request.pixels_b64, request.width, request.height)
        except Exception as exc:
            return JSONResponse(status_code=400, content={"error": f"bad pixel payload: {exc}"})
        if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
            return JSONResponse(status_code=400, content={"error": "pixels must lie in [0, 1]"})
        with app.state.inference_lock:
            score, grad = score_and_grad(
                app.state.model, pixels, request.prompt,
                request.augmentations, request.seed,
            )
        return {
            "score": score,
            "grad_b64": encode_b64(grad),
            "grad_width": request.width,
            "grad_height": request.height,
        }

    return app
