"""Command-line interface: ``pcanet-cd {train,detect,eval,bench,synth,partition}``.

Exit codes: 0 ok, 2 usage/parameter, 3 data/format, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import bench, modelfile, sampling
from .errors import ChangeDetectionError, ParameterError
from .evalstat import confusion, error_rates, kappa
from .pipeline import RunConfig, detect, train_model
from .raster import Raster, load_pair, load_reference, save_raster, save_reference
from .synthgen import SceneSpec, generate_scene

log = logging.getLogger("pcanet_cd")

EXIT_DATA = 3


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _csv_strs(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_network_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("network")
    g.add_argument("--patch", type=int, default=7, help="cascaded patch side h (odd)")
    g.add_argument("--filter-size", type=int, default=5, help="eigenfilter side k (odd, <= patch)")
    g.add_argument("--filters1", type=int, default=8, help="stage-1 filter count")
    g.add_argument("--filters2", type=int, default=8, help="stage-2 filter count")
    g.add_argument("--block", type=int, default=None, help="histogram block side (default: patch)")
    g.add_argument("--n-max", type=int, default=50_000, help="sub-windows sampled per filter stage")
    g.add_argument("--raw-hist", action="store_true", help="keep raw histogram counts")
    g = p.add_argument_group("training")
    g.add_argument("--radius", type=int, default=2, help="boundary dilation radius")
    g.add_argument("--strategy", default="obuc", choices=sampling.STRATEGIES)
    g.add_argument("--rate", type=float, default=0.05, help="training budget as a fraction of all pixels")
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--lambda", dest="lam", type=float, default=1e-4, help="L2 regularization")
    g.add_argument("--epochs", type=int, default=20)
    g.add_argument("--offset", type=float, default=1.0, help="log-ratio guard offset (pseudo strategy)")
    g.add_argument("--confidence", type=float, default=0.5, help="kept fraction per cluster (pseudo strategy)")


def _config(args) -> RunConfig:
    return RunConfig(
        patch=args.patch,
        filter_size=args.filter_size,
        filters1=args.filters1,
        filters2=args.filters2,
        block=args.block,
        radius=args.radius,
        strategy=args.strategy,
        rate=args.rate,
        seed=args.seed,
        lam=args.lam,
        epochs=args.epochs,
        n_max=args.n_max,
        offset=args.offset,
        confidence=args.confidence,
        normalize_hist=not args.raw_hist,
    )


def _add_scene_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic scene")
    g.add_argument("--width", type=int, default=128)
    g.add_argument("--height", type=int, default=128)
    g.add_argument("--blobs", type=int, default=3)
    g.add_argument("--radius-min", type=int, default=6)
    g.add_argument("--radius-max", type=int, default=12)
    g.add_argument("--looks", type=int, default=2)
    g.add_argument("--bg", type=float, default=60.0)
    g.add_argument("--fg", type=float, default=140.0)


def _scene(args, seed: int) -> SceneSpec:
    return SceneSpec(
        width=args.width,
        height=args.height,
        n_blobs=args.blobs,
        radius_min=args.radius_min,
        radius_max=args.radius_max,
        looks=args.looks,
        bg_level=args.bg,
        fg_level=args.fg,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _config(args)
    if cfg.strategy != "pseudo" and args.ref is None:
        raise ParameterError(f"--ref is required for strategy {cfg.strategy}")
    pair = load_pair(args.t1, args.t2)
    ref = load_reference(args.ref) if args.ref else None
    tr = train_model(pair, ref, cfg)
    modelfile.save_model(tr.model, args.model)
    ts = tr.training_set
    print(f"strategy={ts.strategy} samples={len(ts)} changed={ts.n_changed} unchanged={ts.n_unchanged}")
    if tr.partition is not None:
        p = tr.partition
        print(
            f"partition radius={p.radius} boundary={int(p.boundary.sum())} "
            f"inner_changed={int(p.changed.sum())} inner_unchanged={int(p.unchanged.sum())}"
        )
    print(f"feature_length D={tr.model.feature_length}")
    print(f"model written to {args.model}")
    return 0


def cmd_detect(args) -> int:
    model = modelfile.load_model(args.model)
    pair = load_pair(args.t1, args.t2)
    pred = detect(model, pair, workers=args.workers)
    save_reference(pred, args.out)
    print(f"changed pixels: {int(pred.labels.sum())} of {pred.labels.size}")
    return 0


def cmd_eval(args) -> int:
    cm = confusion(load_reference(args.pred), load_reference(args.ref))
    er = error_rates(cm)
    print("kappa,fa,missed,oe,pcc,tp,tn,fp,fn")
    vals = [kappa(cm), er["false_alarm"], er["missed"], er["overall_error"], er["pcc"], cm.tp, cm.tn, cm.fp, cm.fn]
    print(",".join(bench._fmt(v) for v in vals))
    return 0


def cmd_bench(args) -> int:
    base = _config(args)
    data = None
    given = [args.t1, args.t2, args.ref]
    if any(given):
        if not all(given):
            raise ParameterError("--t1, --t2 and --ref must be given together")
        data = (load_pair(args.t1, args.t2), load_reference(args.ref))
    for s in args.strategies:
        if s not in sampling.STRATEGIES:
            raise ParameterError(f"unknown strategy {s!r}")
    seeds = range(args.seed, args.seed + args.runs)
    rows = bench.run_bench(
        args.strategies,
        args.rates,
        seeds,
        patches=args.patches,
        base=base,
        scene=_scene(args, args.seed),
        data=data,
        workers=args.workers,
    )
    bench.write_csv(rows, args.out)
    n_failed = sum(r["row_type"] == "failed" for r in rows)
    print(f"{len(rows)} rows written to {args.out} ({n_failed} failed cells)")
    return 0


def cmd_synth(args) -> int:
    spec = _scene(args, args.seed)
    pair, ref = generate_scene(spec)
    os.makedirs(args.out, exist_ok=True)
    # speckled intensities are rounded onto the 16-bit grid
    save_raster(_clip16(pair.t1), os.path.join(args.out, "t1.pgm"), bit_depth=16)
    save_raster(_clip16(pair.t2), os.path.join(args.out, "t2.pgm"), bit_depth=16)
    save_reference(ref, os.path.join(args.out, "ref.pgm"))
    with open(os.path.join(args.out, "scene.txt"), "w") as fh:
        fh.write(spec.manifest())
    print(f"scene written to {args.out} ({int(ref.labels.sum())} changed pixels)")
    return 0


def _clip16(r: Raster) -> Raster:
    return Raster(np.minimum(np.rint(r.values), 65535))


def cmd_partition(args) -> int:
    ref = load_reference(args.ref)
    part = sampling.partition(ref, args.radius)
    save_raster(part.visualize(), args.out, bit_depth=8)
    print(
        f"boundary={int(part.boundary.sum())} inner_changed={int(part.changed.sum())} "
        f"inner_unchanged={int(part.unchanged.sum())}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcanet-cd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on an image pair and reference map")
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("--ref", help="reference PGM (not needed for --strategy pseudo)")
    p.add_argument("--model", "--out", dest="model", required=True, help="output model file")
    _add_network_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="classify every pixel of an image pair")
    p.add_argument("--model", required=True)
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("--out", required=True, help="output change map PGM (0/255)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score a change map against a reference")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="repeated-run sweep over strategies, rates and patch sizes")
    p.add_argument("--t1")
    p.add_argument("--t2")
    p.add_argument("--ref")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--strategies", type=_csv_strs, default=["uc", "buc", "obuc"])
    p.add_argument("--rates", type=_csv_floats, default=[0.05, 0.1, 0.2])
    p.add_argument("--patches", type=_csv_ints, default=[7])
    p.add_argument("--runs", type=int, default=10, help="seeds per cell, starting at --seed")
    p.add_argument("--workers", type=int, default=1)
    _add_network_flags(p)
    _add_scene_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic speckled scene")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    _add_scene_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("partition", help="write the boundary / inner partition of a reference map")
    p.add_argument("--ref", required=True)
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_partition)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ChangeDetectionError as exc:
        print(f"pcanet-cd {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"pcanet-cd {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
