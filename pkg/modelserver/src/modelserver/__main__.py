"""Run the reference model server: `python -m modelserver --port 8080`."""

import argparse

import uvicorn

from .app import create_app


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--seed", type=int, default=0,
                        help="checkpoint initialization seed")
    parser.add_argument("--max-length", type=int, default=256)
    args = parser.parse_args()
    app = create_app(seed=args.seed, max_length=args.max_length)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
