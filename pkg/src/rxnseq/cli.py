"""Command-line entry point: ``rxnseq <command> ...``.

Exit codes: 0 success, 1 validation or parse failure, 2 usage error,
3 external model process failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import dataset_io
from .augment import (
    AugmentConfig,
    DirectoryImageStore,
    MissingImageError,
    augment_sample,
    sample_rng,
)
from .bridge import BridgeConfig, BridgeError, open_bridge
from .codec import OrderingPolicy, atomic_write_text, encode, read_token_file, write_token_file
from .decoder import DecodeConfig, LogitSourceError, greedy_decode, replay_oracle
from .metrics import MatchMode, UnknownImageError, evaluate
from .schema import Dataset, DiagramRecord, InvalidRecordError, Style
from .vocab import DEFAULT_N_BINS, Vocabulary

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_EXTERNAL = 0, 1, 2, 3


def worker_count() -> int:
    raw = os.environ.get("RXNSEQ_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _parallel_map(fn, items):
    items = list(items)
    n = min(worker_count(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# --- commands ------------------------------------------------------------------


def cmd_encode(args: argparse.Namespace) -> int:
    dataset = dataset_io.load(args.dataset)
    vocab = Vocabulary(args.n_bins)
    order = OrderingPolicy(args.order, args.seed if args.order == "random" else None)
    items = [(r.image_id, encode(r, vocab, order)) for r in dataset]
    n = write_token_file(args.out, items)
    print(f"wrote {n} sequences to {args.out}")
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    dataset = dataset_io.load(args.dataset)
    vocab = Vocabulary(args.n_bins)
    config = DecodeConfig(vocab=vocab, max_length=args.max_length)
    images_dir = Path(args.images) if args.images else Path(args.dataset).resolve().parent

    if args.replay:
        targets = read_token_file(args.replay)
        missing = [r.image_id for r in dataset if r.image_id not in targets]
        if missing:
            raise ValueError(f"no replay sequence for image ids: {', '.join(missing)}")

        def run(record: DiagramRecord):
            source = replay_oracle(targets[record.image_id], vocab)
            return greedy_decode(source, config, record.width, record.height)

    else:
        bridge_config = BridgeConfig(args.model_cmd, args.handshake_timeout, args.step_timeout)

        def run(record: DiagramRecord):
            with open_bridge(bridge_config, vocab, images_dir / record.file_name) as source:
                return greedy_decode(source, config, record.width, record.height)

    results = _parallel_map(run, dataset)
    truncated = [r.image_id for r, res in zip(dataset, results) if res.truncated]
    preds = Dataset(tuple(r.with_structure(res.structure) for r, res in zip(dataset, results)))
    dataset_io.save(preds, args.out)
    print(f"decoded {len(preds)} diagrams to {args.out}")
    if truncated:
        print(f"truncated at max length {args.max_length}: {', '.join(truncated)}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    gt = dataset_io.load(args.gt)
    pred = dataset_io.load(args.pred)
    structures = {r.image_id: r.resolve() for r in pred}
    report = evaluate(
        gt,
        structures,
        MatchMode(args.mode),
        threshold=args.iou_threshold,
        strict=not args.inclusive_iou,
        keep_per_diagram=args.json,
    )
    if args.json:
        doc = report.to_dict()
        if not args.by_style:
            doc.pop("per_style")
        print(json.dumps(doc, indent=2))
    else:
        print(report.to_text(by_style=args.by_style))
    return EXIT_OK


def _augment_config(args: argparse.Namespace) -> AugmentConfig:
    return AugmentConfig(
        compose_probability=args.compose_probability,
        max_compose=args.max_compose,
        decay_ratio=args.decay_ratio,
        rotation_degrees=(-args.rotation_degrees, args.rotation_degrees),
        hflip_probability=args.hflip_probability,
        vflip_probability=args.vflip_probability,
        color_jitter=args.color_jitter,
        target_size=args.target_size,
        pad_color=tuple(args.pad_color),
        seed=args.seed,
    )


def cmd_augment(args: argparse.Namespace) -> int:
    dataset = dataset_io.load(args.dataset)
    config = _augment_config(args)
    store = DirectoryImageStore(args.images)
    for r in dataset:
        if r.file_name not in store:
            raise MissingImageError(f"image file not found: {Path(args.images) / r.file_name}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    # warm the cache so worker threads only read it
    for r in dataset:
        store[r.file_name]

    def make(i: int) -> DiagramRecord:
        image, record = augment_sample(dataset, store, config, sample_rng(config.seed, i))
        name = f"aug_{i:05d}.png"
        image.save(out_dir / name)
        return replace(record, image_id=str(i), file_name=name)

    records = _parallel_map(make, range(args.num))
    dataset_io.save(Dataset(tuple(records)), out_dir / "dataset.json")
    print(f"wrote {len(records)} augmented images to {out_dir}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    s = dataset_io.stats(dataset_io.load(args.dataset))
    print(json.dumps(s.to_dict(), indent=2) if args.json else s.to_text())
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    dataset = dataset_io.load(args.dataset)
    folds = dataset_io.split_folds(dataset, args.folds, args.seed, args.stratify_by_style)
    atomic_write_text(args.out, json.dumps(folds.to_dict(), indent=1) + "\n")
    print("fold sizes: " + " ".join(str(n) for n in folds.sizes()))
    return EXIT_OK


ROLE_COLORS = {"reactants": (220, 40, 40), "conditions": (30, 160, 60), "products": (40, 80, 220)}


def cmd_render(args: argparse.Namespace) -> int:
    from PIL import ImageDraw

    dataset = dataset_io.load(args.dataset)
    shown = dataset_io.load(args.pred).by_id() if args.pred else dataset.by_id()
    store = DirectoryImageStore(args.images)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for record in dataset:
        if record.image_id not in shown:
            continue
        base = store[record.file_name]
        for k, rxn in enumerate(shown[record.image_id].resolve()):
            im = base.to_pil()
            draw = ImageDraw.Draw(im)
            for role_name, role in zip(ROLE_COLORS, rxn.roles()):
                for e in role:
                    draw.rectangle(e.bbox.as_tuple(), outline=ROLE_COLORS[role_name], width=3)
                    draw.text((e.bbox.x1 + 3, e.bbox.y1 + 2), e.etype.value, fill=ROLE_COLORS[role_name])
            im.save(out_dir / f"{record.image_id}_rxn{k}.png")
            written += 1
    print(f"wrote {written} overlay images to {out_dir}")
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise dataset_io.DatasetFormatError(
            f"{args.input}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    style = Style(args.default_style) if args.default_style else None
    dataset = dataset_io.convert_external(doc, args.bbox_format, style)
    dataset_io.save(dataset, args.out)
    print(f"converted {len(dataset)} diagrams to {args.out}")
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def _probability(text: str) -> float:
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rxnseq", description="Reaction diagram sequence toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("encode", help="write token sequences for a dataset")
    s.add_argument("--dataset", required=True)
    s.add_argument("--order", choices=OrderingPolicy.KINDS, default="annotated")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-bins", type=int, default=DEFAULT_N_BINS)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help="constrained greedy decoding into a prediction file")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--model-cmd", help="command line of a JSON-lines model server")
    src.add_argument("--replay", help="token file whose sequences are replayed as the model")
    s.add_argument("--dataset", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--max-length", type=int, default=500)
    s.add_argument("--n-bins", type=int, default=DEFAULT_N_BINS)
    s.add_argument("--images", help="image directory (default: the dataset file's directory)")
    s.add_argument("--handshake-timeout", type=float, default=30.0)
    s.add_argument("--step-timeout", type=float, default=10.0)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("eval", help="hard/soft match precision, recall and F1")
    s.add_argument("--gt", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--mode", choices=[m.value for m in MatchMode], default="hard")
    s.add_argument("--by-style", action="store_true")
    s.add_argument("--json", action="store_true")
    s.add_argument("--iou-threshold", type=float, default=0.5)
    s.add_argument("--inclusive-iou", action="store_true", help="match at IoU >= threshold instead of >")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("augment", help="write augmented training samples")
    s.add_argument("--dataset", required=True)
    s.add_argument("--images", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--num", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    d = AugmentConfig()
    s.add_argument("--compose-probability", type=_probability, default=d.compose_probability)
    s.add_argument("--max-compose", type=int, default=d.max_compose)
    s.add_argument("--decay-ratio", type=_probability, default=d.decay_ratio)
    s.add_argument("--rotation-degrees", type=float, default=d.rotation_degrees[1])
    s.add_argument("--hflip-probability", type=_probability, default=d.hflip_probability)
    s.add_argument("--vflip-probability", type=_probability, default=d.vflip_probability)
    s.add_argument("--color-jitter", type=_probability, default=d.color_jitter)
    s.add_argument("--target-size", type=int, default=d.target_size)
    s.add_argument("--pad-color", type=int, nargs=3, default=list(d.pad_color), metavar=("R", "G", "B"))
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("stats", help="dataset statistics table and histogram")
    s.add_argument("--dataset", required=True)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("split", help="k-fold cross-validation assignment")
    s.add_argument("--dataset", required=True)
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--stratify-by-style", action="store_true")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("render", help="draw one overlay image per reaction")
    s.add_argument("--dataset", required=True)
    s.add_argument("--images", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--pred", help="prediction file to draw instead of the ground truth")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser(
        "convert",
        help="convert published ground-truth files to the dataset schema",
        epilog=dataset_io.CONVERTER_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--bbox-format", choices=["xywh", "xyxy"], default="xywh")
    s.add_argument("--default-style", choices=[st.value for st in Style])
    s.set_defaults(func=cmd_convert)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BridgeError, LogitSourceError) as exc:
        print(f"error: model process: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except (
        dataset_io.DatasetFormatError,
        InvalidRecordError,
        UnknownImageError,
        MissingImageError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
