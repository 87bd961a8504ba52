"""Run the sidecar: python -m clipserve --model openai/clip-vit-base-patch32 --port 8801"""

import argparse

import uvicorn

from .app import create_app
from .model import DEFAULT_MODEL


def main():
    parser = argparse.ArgumentParser(prog="clipserve", description=__doc__)
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="HF model id, local path, or 'tiny' (seeded random debug model)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--dtype", default="float32", choices=("float32", "float64"))
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8801)
    args = parser.parse_args()

    app = create_app(args.model, args.device, args.dtype)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


if __name__ == "__main__":
    main()
