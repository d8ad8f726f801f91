"""Command-line front end: ``semvc {encode,decode,eval,sweep,losssim,generate,packetize}``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .binio import Reader
from .codec import CodecConfig, CodecError, Decoder, EncodedVideo, VideoHeader, decode_video, encode_video
from .mapio import read_maps, read_smr, write_maps, write_smr
from .metrics import DEFAULT_FPS, bpp, kbps, miou, rd_points_to_csv, rd_sweep
from .streaming import ChannelModel, PacketError, depacketize, packetize, read_dump, simulate_and_decode, write_dump
from .synthetic import SyntheticSceneSpec, default_corpus, generate_corpus

DEFAULT_XI_LIST = "4,6,8,12,16,20,24"
DEFAULT_Q_LIST = "64,256,1024"
DEFAULT_P_LIST = "1,2,4,8"


class CliError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _err(msg: str) -> None:
    print(f"semvc: {msg}", file=sys.stderr)


def _load_video(path) -> EncodedVideo:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc
    return EncodedVideo.from_bytes(data)


def cmd_encode(args) -> int:
    frames = read_maps(args.input)
    cfg = CodecConfig(args.xi, args.q, args.p, args.background, args.pframe_mode)
    ev = encode_video(frames, cfg)
    Path(args.output).write_bytes(ev.to_bytes())
    h, w = frames[0].shape
    n = len(frames)
    print(f"frames {n}")
    print(f"total_bits {ev.total_bits}")
    print(f"bpp {bpp(ev.total_bits, w, h, n):.6f}")
    print(f"kbps {kbps(ev.total_bits, n, args.fps):.6f}")
    return 0


def cmd_decode(args) -> int:
    if args.from_packets:
        header, packets = read_dump(args.input)
        ev = depacketize(packets, header)
        frames = decode_video(ev)
    elif args.best_effort:
        data = Path(args.input).read_bytes()
        ev = EncodedVideo.from_bytes(data, partial=True)
        dec = Decoder(ev.header)
        frames = []
        failure = None
        for k, f in enumerate(ev.frames):
            try:
                frames.append(dec.decode_frame(k, f))
            except CodecError as exc:
                failure = exc
                break
        announced = VideoHeader.read(Reader(data)).frame_count
        if failure is None and ev.header.frame_count < announced:
            failure = CodecError("stream truncated", ev.header.frame_count)
        if frames:
            write_maps(args.output, frames, args.format)
        if failure is not None:
            _err(f"{failure} ({len(frames)} frames written)")
            return 1
        return 0
    else:
        frames = decode_video(_load_video(args.input))
    write_maps(args.output, frames, args.format)
    return 0


def cmd_eval(args) -> int:
    pred = read_maps(args.decoded)
    ref = read_maps(args.reference)
    if len(pred) != len(ref):
        raise CliError(f"frame count mismatch: {len(pred)} vs {len(ref)}")
    scores = []
    for k, (a, b) in enumerate(zip(pred, ref)):
        if a.shape != b.shape:
            raise CliError(f"frame {k}: size mismatch {a.shape} vs {b.shape}")
        scores.append(miou(a, b, args.ignore_label))
        print(f"frame {k} miou {scores[-1]:.6f}")
    print(f"mean miou {float(np.mean(scores)):.6f}")
    return 0


def _corpus_from_args(args):
    if args.synthetic is not None:
        return default_corpus(args.synthetic, args.videos, args.frames, args.size)
    if args.corpus is None:
        raise CliError("give a corpus path or --synthetic SEED")
    p = Path(args.corpus)
    if p.is_dir() and any(x.suffix == ".smr" for x in p.iterdir()):
        return [read_smr(x) for x in sorted(p.iterdir()) if x.suffix == ".smr"]
    return [read_maps(p)]


def cmd_sweep(args) -> int:
    corpus = _corpus_from_args(args)
    base = CodecConfig(background_label=args.background, pframe_mode=args.pframe_mode)
    points = rd_sweep(
        corpus,
        _floats(args.xi_list),
        _ints(args.q_list),
        _ints(args.p_list),
        fps=args.fps,
        ignore_label=args.ignore_label,
        base=base,
        workers=args.workers,
    )
    if args.output == "-":
        rd_points_to_csv(points, sys.stdout)
    else:
        with open(args.output, "w", newline="") as fh:
            rd_points_to_csv(points, fh)
    return 0


def cmd_losssim(args) -> int:
    ev = _load_video(args.input)
    channel = ChannelModel(args.loss, args.seed)
    frames, report = simulate_and_decode(packetize(ev), ev.header, channel)
    print(f"lost {' '.join(map(str, report.lost)) or '-'}")
    print(f"concealed {' '.join(map(str, report.concealed)) or '-'}")
    print(f"missing {' '.join(map(str, report.missing)) or '-'}")
    if args.output:
        if frames:
            write_maps(args.output, frames, args.format)
        else:
            _err("no frame could be decoded; nothing written")
    return 0


def cmd_packetize(args) -> int:
    ev = _load_video(args.input)
    write_dump(args.output, ev.header, packetize(ev, args.stream_id), args.stream_id)
    return 0


def cmd_generate(args) -> int:
    if args.videos > 1:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        corpus = default_corpus(args.seed, args.videos, args.frames, args.size, moving=args.moving)
        for i, v in enumerate(corpus):
            write_smr(out / f"video_{i:03d}.smr", v)
    else:
        spec = SyntheticSceneSpec.random(args.seed, args.size, args.size, args.frames, moving=args.moving)
        write_smr(args.output, generate_corpus(spec))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semvc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def codec_flags(p, with_tolerance=True):
        if with_tolerance:
            p.add_argument("--xi", type=float, default=6.0, help="simplification tolerance in pixels")
            p.add_argument("--q", type=int, default=256, help="quantizer symbols")
            p.add_argument("--p", type=int, default=4, help="I-frame period")
        p.add_argument("--background", type=int, default=0, help="label for unpainted pixels")
        p.add_argument("--pframe-mode", choices=("strict", "extended"), default="strict")

    p = sub.add_parser("encode", help="encode SMR1 or a PNG directory to .svc1")
    p.add_argument("input")
    p.add_argument("output")
    codec_flags(p)
    p.add_argument("--fps", type=float, default=DEFAULT_FPS)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode .svc1 to SMR1 or PNG frames")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", choices=("smr", "png"), default="smr")
    p.add_argument("--best-effort", action="store_true", help="write the frames decoded before an error")
    p.add_argument("--from-packets", action="store_true", help="input is a packet dump")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="per-frame and mean mIoU of decoded vs reference maps")
    p.add_argument("decoded")
    p.add_argument("reference")
    p.add_argument("--ignore-label", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="rate-distortion sweep to CSV")
    p.add_argument("corpus", nargs="?", help="SMR1 file, PNG directory or directory of .smr videos")
    p.add_argument("--synthetic", type=int, metavar="SEED", help="use the synthetic corpus")
    p.add_argument("--videos", type=int, default=25)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--xi-list", default=DEFAULT_XI_LIST)
    p.add_argument("--q-list", default=DEFAULT_Q_LIST)
    p.add_argument("--p-list", default=DEFAULT_P_LIST)
    p.add_argument("--fps", type=float, default=DEFAULT_FPS)
    p.add_argument("--ignore-label", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", "-o", default="-")
    codec_flags(p, with_tolerance=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("losssim", help="decode through a lossy packet channel")
    p.add_argument("input")
    p.add_argument("output", nargs="?")
    p.add_argument("--loss", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("smr", "png"), default="smr")
    p.set_defaults(func=cmd_losssim)

    p = sub.add_parser("packetize", help="write a packet dump of a .svc1 stream")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--stream-id", type=int, default=0)
    p.set_defaults(func=cmd_packetize)

    p = sub.add_parser("generate", help="write a synthetic semantic video (or corpus)")
    p.add_argument("output")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--videos", type=int, default=1)
    p.add_argument("--moving", action="store_true")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, CodecError, PacketError, ValueError, OSError) as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
