"""Command-line interface.

The CLI is a thin client of the HTTP service. By default it mounts the
service in-process (same interpreter, no sockets), which keeps runs
deterministic and replayable; --server points it at a remote instance
instead. `serve` starts the service standalone.
"""

from __future__ import annotations

import argparse
import json
import sys


class ClientError(Exception):
    """A request that came back non-2xx, or never got through."""


class ServiceClient:
    def __init__(self, server: str | None):
        if server:
            import httpx
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            from fastapi.testclient import TestClient

            from .service.app import app
            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except Exception as err:
            raise ClientError(f"request to {path} failed: {err}") from err
        if response.status_code >= 400:
            try:
                body = response.json()
                message = f"{body.get('error', 'error')}: {body.get('message', response.text)}"
            except Exception:
                message = response.text
            raise ClientError(message)
        return response.json()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topodistill",
        description="Desk-scale dataset distillation with retrieval anchoring "
                    "and persistent-topology regularization.")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; defaults to in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distill", help="run a full distillation from a manifest")
    p.add_argument("manifest", help="path to a run manifest JSON")
    p.add_argument("--out", default="run_out", help="output directory")

    p = sub.add_parser("ph", help="persistence of a point-cloud CSV")
    p.add_argument("points_csv", help="numeric CSV, one point per row")
    p.add_argument("--k", type=int, default=10, help="mutual k-NN parameter")
    p.add_argument("--eps-max", type=float, default=None,
                   help="filtration cap; defaults to the largest graph edge")
    p.add_argument("--out", default="ph_out", help="output directory")

    p = sub.add_parser("retrieve", help="show one retrieval decision with all scores")
    p.add_argument("manifest", help="path to a run manifest JSON")
    p.add_argument("--class", dest="class_id", type=int, required=True)
    p.add_argument("--image", dest="image_index", type=int, required=True)

    p = sub.add_parser("analyze", help="recompute topology metrics from a run directory")
    p.add_argument("run_dir")

    p = sub.add_parser("gen-toy", help="generate a toy dataset CSV")
    p.add_argument("kind", choices=["two-ring", "gaussian-blobs"])
    p.add_argument("out", help="output CSV path")
    p.add_argument("--n-per-class", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--side", type=int, default=16)

    p = sub.add_parser("verify", help="run the oracle self-check suites")
    p.add_argument("--quick", action="store_true")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _load_manifest_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_distill(client: ServiceClient, args) -> int:
    body = client.post("/distill", {"manifest": _load_manifest_file(args.manifest),
                                    "out_dir": args.out})
    print(f"mode {body['mode']}: {body['total_steps']} steps -> {body['out_dir']}")
    for class_id, k in enumerate(body["kappa_per_class"]):
        print(f"  kappa[class {class_id}] = {k:.6g}")
    print(f"  probe accuracy = {body['probe_accuracy']:.4f}")
    print(f"  wrote {len(body['files'])} files")
    return 0


def _cmd_ph(client: ServiceClient, args) -> int:
    payload = {"points_csv": args.points_csv, "k": args.k, "out_dir": args.out}
    if args.eps_max is not None:
        payload["eps_max"] = args.eps_max
    body = client.post("/ph", payload)
    print(f"eps_max = {body['eps_max']:.6g}; "
          f"{body['h0_count']} degree-0 bars, {body['h1_count']} degree-1 bars")
    for birth, death in body["h1_bars"]:
        print(f"  degree-1 bar: birth {birth:.6g}, death {death:.6g}")
    print(f"wrote {', '.join(body['files'])} to {body['out_dir']}")
    return 0


def _cmd_retrieve(client: ServiceClient, args) -> int:
    body = client.post("/retrieve", {"manifest": _load_manifest_file(args.manifest),
                                     "class_id": args.class_id,
                                     "image_index": args.image_index})
    print(f"class {body['class_id']} image {body['image_index']} "
          f"(lambda={body['lambda_fit']}): chose pool index {body['chosen_index']} "
          f"(source image {body['chosen_source']}, score {body['chosen_score']:.6g})")
    for cand in body["candidates"]:
        marker = "*" if cand["index"] == body["chosen_index"] else " "
        print(f" {marker} [{cand['index']:3d}] source={cand['source_image']:3d} "
              f"score={cand['score']:.6g} fit={cand['fit_sq']:.6g} "
              f"complexity={cand['complexity']:.6g}")
    return 0


def _cmd_analyze(client: ServiceClient, args) -> int:
    body = client.post("/analyze", {"run_dir": args.run_dir})
    print(json.dumps(body, indent=2, sort_keys=True))
    return 0


def _cmd_gen_toy(client: ServiceClient, args) -> int:
    payload = {"kind": args.kind, "out_path": args.out, "seed": args.seed,
               "side": args.side}
    if args.n_per_class is not None:
        payload["n_per_class"] = args.n_per_class
    body = client.post("/gen-toy", payload)
    print(f"wrote {body['image_count']} images "
          f"({body['class_count']} classes, {body['height']}x{body['width']}x"
          f"{body['channels']}) to {body['path']}")
    return 0


def _cmd_verify(client: ServiceClient, args) -> int:
    body = client.post("/verify", {"quick": args.quick})
    for suite in body["suites"]:
        status = "PASS" if suite["passed"] else "FAIL"
        print(f"{status} {suite['name']}: {suite['detail']}")
    return 0 if body["passed"] else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service.app import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    client = ServiceClient(args.server)
    handlers = {
        "distill": _cmd_distill,
        "ph": _cmd_ph,
        "retrieve": _cmd_retrieve,
        "analyze": _cmd_analyze,
        "gen-toy": _cmd_gen_toy,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](client, args)
    except ClientError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
