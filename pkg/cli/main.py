"""
Command-line entry point
"""
import argparse
import asyncio
import sys
from typing import Optional

from cli.config import Config
from cli.handlers import cmd_bd, cmd_compress, cmd_decompress, cmd_evaluate, cmd_sweep, cmd_train
from cli.logger import setup_logger
from processors.dataset import EDGE_SOURCES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgepress", description="Edge-aware pre/post-processing around JPEG")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train one PrN/PoN pair")
    train.add_argument("--config", required=True)

    compress = sub.add_parser("compress", help="image -> .jpg + sidecar")
    compress.add_argument("--ckpt", required=True)
    compress.add_argument("--in", dest="in_path", required=True)
    compress.add_argument("--out", required=True)

    decompress = sub.add_parser("decompress", help=".jpg + sidecar -> PGM")
    decompress.add_argument("--ckpt", required=True)
    decompress.add_argument("--in", dest="in_path", required=True)
    decompress.add_argument("--out", required=True)

    evaluate = sub.add_parser("evaluate", help="average R-D point over a directory")
    evaluate.add_argument("--ckpt", required=True)
    evaluate.add_argument("--data", required=True)
    evaluate.add_argument("--out", required=True)
    evaluate.add_argument("--edges", choices=EDGE_SOURCES, default="canny")

    bd = sub.add_parser("bd", help="Bjontegaard deltas of curve B against curve A")
    bd.add_argument("--a", required=True)
    bd.add_argument("--b", required=True)
    bd.add_argument("--out", required=True)

    sweep = sub.add_parser("sweep", help="train/evaluate every configured (mode, qf)")
    sweep.add_argument("--config", required=True)
    return parser


async def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logger(Config.LOG_LEVEL)

    if args.command == "train":
        return await cmd_train(args.config)
    if args.command == "compress":
        return cmd_compress(args.ckpt, args.in_path, args.out)
    if args.command == "decompress":
        return cmd_decompress(args.ckpt, args.in_path, args.out)
    if args.command == "evaluate":
        return await cmd_evaluate(args.ckpt, args.data, args.out, args.edges)
    if args.command == "bd":
        return await cmd_bd(args.a, args.b, args.out)
    return await cmd_sweep(args.config)


def run():
    sys.exit(asyncio.run(main()))
