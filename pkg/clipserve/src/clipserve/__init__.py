"""clipserve: text-image judge sidecar with exact pixel gradients."""

from .app import create_app
from .model import DEFAULT_MODEL, JudgeModel
from .scoring import decode_b64, encode_b64, score_and_grad

__all__ = ["create_app", "DEFAULT_MODEL", "JudgeModel", "decode_b64", "encode_b64",
           "score_and_grad"]
__version__ = "0.1.0"
