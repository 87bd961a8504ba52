"""Visual judging: masked grayscale rendering, a built-in differentiable
reference judge, and the HTTP client for a remote scoring sidecar.

Images follow the white=1 convention with material rendered dark:
``pixel = 1 - density * mask``.  The judge contract is a scalar score
(higher = more similar) plus the exact per-pixel gradient of that score.

The reference judge is a deterministic stand-in for a learned scorer: cosine
similarity between mean-centered, Gaussian-blurred copies of the image and a
target.  It exists so the whole pipeline can be exercised and gradient-checked
without any model inference.

Wire protocol of the remote judge (JSON over HTTP; binary payloads are
base64 of little-endian float32, row-major):

    GET  /v1/health -> {"status": "ok", "model": "<model-id>"}
    POST /v1/judge  <- {"prompt", "width", "height", "pixels_b64",
                        "augmentations", "seed"}
                    -> {"score", "grad_b64", "grad_width", "grad_height"}

Errors: HTTP 400 {"error": ...} for malformed payloads, 503 while the model
is loading.
"""

from __future__ import annotations

import base64
import logging
import time
from dataclasses import dataclass

import numpy as np
import requests

from .encode import BlurKernel, blur_grid, blur_transpose_grid
from .fem import DensityField

log = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-12


class JudgeUnavailableError(RuntimeError):
    """The remote judge cannot be reached (timeout, refused, or loading)."""


class ProtocolError(RuntimeError):
    """The remote judge answered with a malformed or inconsistent payload."""


@dataclass(frozen=True)
class JudgeImage:
    """Single-channel image in [0, 1], white = 1, material dark."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width), row-major

    def __post_init__(self):
        pixels = np.ascontiguousarray(self.pixels, dtype=np.float64)
        object.__setattr__(self, "pixels", pixels)
        if pixels.shape != (self.height, self.width):
            raise ValueError(f"expected shape {(self.height, self.width)}, got {pixels.shape}")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")


@dataclass(frozen=True)
class JudgeResult:
    score: float
    grad: np.ndarray  # d(score)/d(pixel), same shape as the judged image

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(f"judge score must be finite, got {self.score}")


@dataclass(frozen=True)
class JudgeSpec:
    """Which judge to use and its parameters.

    kind="reference": target + blur_sigma.
    kind="remote": endpoint + prompt (+ augmentations, seed, timeout_ms).
    """

    kind: str
    target: JudgeImage | None = None
    blur_sigma: float = 2.0
    endpoint: str = ""
    prompt: str = ""
    augmentations: int = 16
    seed: int = 0
    timeout_ms: int = 60000

    def __post_init__(self):
        if self.kind == "reference":
            if self.target is None:
                raise ValueError("reference judge needs a target image")
        elif self.kind == "remote":
            if not self.endpoint:
                raise ValueError("remote judge needs an endpoint")
            if self.augmentations < 1:
                raise ValueError("augmentations must be >= 1")
        else:
            raise ValueError(f"unknown judge kind {self.kind!r}")

    @classmethod
    def reference(
        cls, target: JudgeImage, blur_sigma: float = 2.0, augmentations: int = 1, seed: int = 0
    ) -> "JudgeSpec":
        """augmentations > 1 averages seeded random crops (see
        augmented_reference_judge); 1 is the plain deterministic judge."""
        return cls(
            kind="reference", target=target, blur_sigma=blur_sigma,
            augmentations=augmentations, seed=seed,
        )

    @classmethod
    def remote(
        cls,
        endpoint: str,
        prompt: str,
        augmentations: int = 16,
        seed: int = 0,
        timeout_ms: int = 60000,
    ) -> "JudgeSpec":
        return cls(
            kind="remote",
            endpoint=endpoint,
            prompt=prompt,
            augmentations=augmentations,
            seed=seed,
            timeout_ms=timeout_ms,
        )


def build_judge_image(densities: DensityField, mask: np.ndarray, mirror: bool) -> JudgeImage:
    """pixel = 1 - density * mask; mirrored designs reflect about the right edge."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (densities.nx * densities.ny,):
        raise ValueError(f"mask length {mask.shape} does not match {densities.nx * densities.ny}")
    field = (densities.values * mask).reshape(densities.ny, densities.nx)
    if mirror:
        field = np.concatenate([field, field[:, ::-1]], axis=1)
    pixels = 1.0 - field
    return JudgeImage(pixels.shape[1], pixels.shape[0], pixels)


def judge_image_adjoint(
    grad_pixels: np.ndarray, mask: np.ndarray, mirror: bool, nx: int, ny: int
) -> np.ndarray:
    """Exact adjoint of build_judge_image: pixel gradient -> per-element density gradient.

    Mirrored pixel pairs fold back by summation; the mask gates elements the
    same way it gated the forward map.
    """
    g = np.asarray(grad_pixels, dtype=np.float64)
    expected_w = 2 * nx if mirror else nx
    if g.shape != (ny, expected_w):
        raise ValueError(f"gradient shape {g.shape} does not match image {(ny, expected_w)}")
    if mirror:
        g = g[:, :nx] + g[:, nx:][:, ::-1]
    return -g.ravel() * np.asarray(mask, dtype=np.float64)


def _centered(x: np.ndarray) -> np.ndarray:
    return x - x.mean()


def reference_judge(image: JudgeImage, target: JudgeImage, blur_sigma: float = 2.0) -> JudgeResult:
    """Cosine similarity of mean-centered blurred images, with its exact gradient.

    Mean-centering makes the score invariant to constant background shifts;
    the blur makes it tolerant to small misalignments.  Score is in [-1, 1].
    A zero-variance image (after centering) is defined to score 0 with zero
    gradient.
    """
    if (image.width, image.height) != (target.width, target.height):
        raise ValueError(
            f"image {image.width}x{image.height} vs target {target.width}x{target.height}"
        )
    kernel = BlurKernel(sigma=blur_sigma)
    a = _centered(blur_grid(image.pixels, kernel))
    b = _centered(blur_grid(target.pixels, kernel))
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < DEGENERATE_NORM or nb < DEGENERATE_NORM:
        return JudgeResult(0.0, np.zeros_like(image.pixels))
    v = float((a * b).sum() / (na * nb))
    dv_da = b / (na * nb) - v * a / na**2
    grad = blur_transpose_grid(_centered(dv_da), kernel)
    return JudgeResult(v, grad)


def augmented_reference_judge(
    image: JudgeImage,
    target: JudgeImage,
    blur_sigma: float = 2.0,
    augmentations: int = 8,
    seed: int = 0,
    min_scale: float = 0.7,
) -> JudgeResult:
    """Reference score averaged over a seeded batch of aligned random crops.

    Each crop windows the image and the target at the same box (crop side
    scale drawn uniformly from [min_scale, 1]), scores the pair with the
    plain reference judge, and contributes its exact gradient back to the
    full frame.  This mirrors the random-crop augmentation a learned judge
    applies and is the mechanism that injects per-step gradient noise;
    deterministic given the seed.  augmentations=1 with a full-frame crop
    scale of 1 reduces to reference_judge.
    """
    if (image.width, image.height) != (target.width, target.height):
        raise ValueError(
            f"image {image.width}x{image.height} vs target {target.width}x{target.height}"
        )
    if augmentations < 1:
        raise ValueError("augmentations must be >= 1")
    h, w = image.height, image.width
    rng = np.random.default_rng(seed)
    score = 0.0
    grad = np.zeros_like(image.pixels)
    for _ in range(augmentations):
        scale = rng.uniform(min_scale, 1.0)
        ch = min(h, max(8, int(round(scale * h))))
        cw = min(w, max(8, int(round(scale * w))))
        y0 = int(rng.integers(0, h - ch + 1))
        x0 = int(rng.integers(0, w - cw + 1))
        sub = JudgeImage(cw, ch, image.pixels[y0 : y0 + ch, x0 : x0 + cw])
        ref = JudgeImage(cw, ch, target.pixels[y0 : y0 + ch, x0 : x0 + cw])
        result = reference_judge(sub, ref, blur_sigma)
        score += result.score / augmentations
        grad[y0 : y0 + ch, x0 : x0 + cw] += result.grad / augmentations
    return JudgeResult(score, grad)


def encode_pixels_b64(pixels: np.ndarray) -> str:
    """Row-major little-endian float32 payload, base64-encoded."""
    return base64.b64encode(np.ascontiguousarray(pixels, dtype="<f4").tobytes()).decode("ascii")


def decode_pixels_b64(data: str, width: int, height: int) -> np.ndarray:
    raw = base64.b64decode(data, validate=True)
    if len(raw) != 4 * width * height:
        raise ValueError(f"payload holds {len(raw)} bytes, expected {4 * width * height}")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(height, width)


class RemoteJudgeClient:
    """Blocking HTTP client for the judge sidecar.

    Performs one health-check round trip per endpoint before the first
    scoring call, keeps a single in-flight request, and retries exactly once
    on timeout / connection failure / model-loading 503 before giving up
    with JudgeUnavailableError.
    """

    def __init__(self, endpoint: str, timeout_ms: int = 60000):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout_ms / 1000.0
        self.model_id: str | None = None
        self._session = requests.Session()
        self._health_checked = False

    def health_check(self) -> dict:
        try:
            resp = self._session.get(f"{self.endpoint}/v1/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise JudgeUnavailableError(f"health check failed: {exc}") from exc
        if resp.status_code != 200:
            raise JudgeUnavailableError(f"health check returned HTTP {resp.status_code}")
        payload = resp.json()
        if payload.get("status") != "ok":
            raise JudgeUnavailableError(f"judge not ready: {payload}")
        self.model_id = payload.get("model")
        self._health_checked = True
        return payload

    def _post_judge(self, request: dict):
        try:
            return self._session.post(
                f"{self.endpoint}/v1/judge", json=request, timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise TimeoutError(str(exc)) from exc
        except requests.RequestException as exc:
            raise ConnectionError(str(exc)) from exc

    def judge(
        self, image: JudgeImage, prompt: str, augmentations: int = 16, seed: int = 0
    ) -> JudgeResult:
        if not self._health_checked:
            self.health_check()
        request = {
            "prompt": prompt,
            "width": image.width,
            "height": image.height,
            "pixels_b64": encode_pixels_b64(image.pixels),
            "augmentations": int(augmentations),
            "seed": int(seed),
        }
        last_failure = None
        for attempt in range(2):  # one retry, then fail
            try:
                resp = self._post_judge(request)
            except (TimeoutError, ConnectionError) as exc:
                last_failure = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code == 503:
                last_failure = "HTTP 503 (model loading)"
                time.sleep(min(1.0, self.timeout / 4))
                continue
            if resp.status_code == 400:
                raise ProtocolError(f"judge rejected request: {resp.text[:500]}")
            if resp.status_code != 200:
                raise ProtocolError(f"unexpected HTTP {resp.status_code}: {resp.text[:500]}")
            return self._parse_response(resp, image)
        raise JudgeUnavailableError(f"judge unavailable after retry: {last_failure}")

    def _parse_response(self, resp, image: JudgeImage) -> JudgeResult:
        body = resp.text
        try:
            payload = resp.json()
            score = float(payload["score"])
            gw = int(payload["grad_width"])
            gh = int(payload["grad_height"])
            grad = decode_pixels_b64(payload["grad_b64"], gw, gh)
        except (KeyError, TypeError, ValueError) as exc:
            log.warning("malformed judge response: %s", body[:1000])
            raise ProtocolError(f"malformed judge response ({exc}): {body[:200]}") from exc
        if (gw, gh) != (image.width, image.height):
            log.warning("judge gradient dims mismatch: %s", body[:1000])
            raise ProtocolError(
                f"gradient dims {gw}x{gh} do not match submitted image "
                f"{image.width}x{image.height}"
            )
        if not np.isfinite(score) or not np.all(np.isfinite(grad)):
            raise ProtocolError("judge returned non-finite score or gradient")
        return JudgeResult(score, grad)


def remote_judge(image: JudgeImage, spec: JudgeSpec, client: RemoteJudgeClient | None = None) -> JudgeResult:
    """One scoring round trip per the wire protocol; see RemoteJudgeClient."""
    if spec.kind != "remote":
        raise ValueError("remote_judge requires a remote JudgeSpec")
    if client is None:
        client = RemoteJudgeClient(spec.endpoint, spec.timeout_ms)
    return client.judge(image, spec.prompt, spec.augmentations, spec.seed)


def evaluate_judge(
    image: JudgeImage,
    spec: JudgeSpec,
    *,
    seed: int | None = None,
    client: RemoteJudgeClient | None = None,
) -> JudgeResult:
    """Dispatch to the configured judge; ``seed`` overrides spec.seed per call."""
    use_seed = spec.seed if seed is None else seed
    if spec.kind == "reference":
        if spec.augmentations > 1:
            return augmented_reference_judge(
                image, spec.target, spec.blur_sigma, spec.augmentations, use_seed
            )
        return reference_judge(image, spec.target, spec.blur_sigma)
    if client is None:
        client = RemoteJudgeClient(spec.endpoint, spec.timeout_ms)
    return client.judge(image, spec.prompt, spec.augmentations, use_seed)
