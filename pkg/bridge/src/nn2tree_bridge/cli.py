"""Bridge CLI: export checkpoints and replay verification vectors."""

from __future__ import annotations

import argparse
import json
import sys

from .export import (
    ExportCheckFailed,
    UnsupportedLayerError,
    check_against_vectors,
    export_checkpoint,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nn2tree-bridge",
        description="Export framework checkpoints to the tree-compiler weight schema",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="convert a checkpoint")
    p.add_argument("--src", required=True, help="torch.save'd nn.Module")
    p.add_argument("--dst", required=True, help="weight file to write")
    p.add_argument("--verify", default=None, help="verification-vector file")
    p.add_argument("--manifest", default=None, help="manifest JSON to write")
    p.add_argument("--n-verify", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input-shape", default=None,
                   help="C,H,W (conv checkpoints only)")
    p.add_argument("--horizon", type=int, default=6,
                   help="sequence length for recurrent verification vectors")

    p = sub.add_parser("check", help="replay verification vectors")
    p.add_argument("--weights", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--tolerance", type=float, default=1e-6)

    args = parser.parse_args(argv)
    if args.command == "export":
        shape = None
        if args.input_shape:
            shape = tuple(int(v) for v in args.input_shape.split(","))
        try:
            manifest = export_checkpoint(
                args.src, args.dst, verify_path=args.verify,
                n_verify=args.n_verify, seed=args.seed, input_shape=shape,
                horizon=args.horizon,
            )
        except UnsupportedLayerError as e:
            print(f"unsupported checkpoint: {e}", file=sys.stderr)
            return 3
        except ExportCheckFailed as e:
            print(f"self-check failed: {e}", file=sys.stderr)
            return 4
        if args.manifest:
            with open(args.manifest, "w") as fh:
                json.dump(manifest.to_dict(), fh, indent=2)
                fh.write("\n")
        for warning in manifest.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        print(f"exported {len(manifest.layer_map)} layers, "
              f"{manifest.n_verify} verification pairs, "
              f"max deviation {manifest.max_deviation:.3e}")
        return 0

    deviation = check_against_vectors(args.weights, args.vectors)
    print(f"max relative deviation {deviation:.3e}")
    return 0 if deviation <= args.tolerance else 4


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
