"""Command-line harness: generate data, train, search, evaluate, analyze.

Every command takes --seed and is fully deterministic given it; outputs
are binary dataset/checkpoint files and CSVs meant for any plotting tool.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import datagen, gradcheck, nn, spectral, trainer


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="deterministic seed (default 0)")


def cmd_gen(args) -> int:
    bundle = datagen.generate_bundle(
        args.kind,
        args.seed,
        n_train=args.train,
        n_val=args.val,
        n_test=args.test,
        full_phase_range=args.full_phase_range,
    )
    datagen.write_dataset(bundle, args.out)
    size = Path(args.out).stat().st_size
    print(f"wrote {args.kind} dataset ({args.train}/{args.val}/{args.test}) to {args.out} ({size} bytes)")
    return 0


def _load_data(path: str) -> datagen.DatasetBundle:
    return datagen.read_dataset(path)


def cmd_train(args) -> int:
    data = _load_data(args.data)
    d_in, d_out = datagen.model_dims(data.kind, args.field)
    model = nn.init_model(
        d_in, args.hidden, d_out, field=args.field, init_scale=args.init_scale, seed=args.seed
    )
    config = trainer.TrainConfig(
        lr0=args.lr0,
        half_life=args.half_life,
        init_scale=args.init_scale,
        momentum=args.momentum,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        clip=args.clip,
    )
    result = trainer.train(model, data, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trainer.write_curves_csv(result, out / "curves.csv")
    if result.model is not None:
        nn.save_model(result.model, out / "model.cvnn")
    print(f"status={result.status} epochs={len(result.history)} best_val={result.best_val:.6e}")
    return 0


def cmd_search(args) -> int:
    data = _load_data(args.data)
    results = trainer.random_search(
        data,
        field=args.field,
        hidden=args.hidden,
        n_trials=args.trials,
        seed=args.seed,
        epochs=args.epochs,
        batch_size=args.batch_size,
        jobs=args.jobs,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trainer.write_search_csv(results, out / "search.csv")
    for r in results:
        trainer.write_curves_csv(r, out / f"trial_{r.trial_id:03d}.csv")
    best = next((r for r in results if r.model is not None), None)
    if best is not None:
        nn.save_model(best.model, out / "best_model.cvnn")
        print(f"best trial={best.trial_id} best_val={best.best_val:.6e} status={best.status}")
    else:
        print("all trials diverged before completing an epoch")
    n_div = sum(r.diverged for r in results)
    print(f"trials={len(results)} diverged={n_div} summary={out / 'search.csv'}")
    return 0


def cmd_eval(args) -> int:
    model = nn.load_model(args.model)
    data = _load_data(args.data)
    mse = trainer.evaluate(model, data.partition(args.partition), data.kind)
    print(f"{args.partition}_mse={mse:.16e}")
    return 0


def cmd_filters(args) -> int:
    model = nn.load_model(args.model)
    spectral.write_filters_csv(model, args.rows, args.out)
    print(f"wrote {args.rows} filter responses to {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    entries = gradcheck.run_gradcheck(seed=args.seed)
    print(gradcheck.format_report(entries))
    return 0 if gradcheck.all_passed(entries) else 1


def cmd_selftest(args) -> int:
    entries = gradcheck.run_gradcheck(seed=args.seed)
    entries.extend(_selftest_extras(args.seed))
    print(gradcheck.format_report(entries))
    return 0 if gradcheck.all_passed(entries) else 1


def _selftest_extras(seed: int) -> list[gradcheck.CheckEntry]:
    from . import autodiff as ad
    from .complex_ops import make_rng, sample_circular_gaussian

    checks: list[gradcheck.CheckEntry] = []
    rng = make_rng(seed, 909)

    x = sample_circular_gaussian(rng, 64, 1.0)
    err = float(np.max(np.abs(spectral.idft(spectral.dft(x)) - x)))
    checks.append(gradcheck.CheckEntry("dft:roundtrip", err, 1e-10, err < 1e-10))

    spec = spectral.dft(x)
    lhs = float(np.sum(np.abs(x) ** 2))
    rhs = float(np.sum(np.abs(spec) ** 2)) / x.size
    err = abs(lhs - rhs) / lhs
    checks.append(gradcheck.CheckEntry("dft:parseval", err, 1e-10, err < 1e-10))

    a = datagen.generate_bundle(datagen.DatasetKind.SAWTOOTH, seed, 4, 2, 2)
    b = datagen.generate_bundle(datagen.DatasetKind.SAWTOOTH, seed, 4, 2, 2)
    same = datagen.bundles_equal(a, b)
    checks.append(gradcheck.CheckEntry("data:determinism", 0.0 if same else 1.0, 1.0, same))

    import tempfile

    model = nn.init_model(8, 3, 8, field="complex", init_scale=0.5, seed=seed)
    with tempfile.NamedTemporaryFile(suffix=".cvnn") as fh:
        nn.save_model(model, fh.name)
        loaded = nn.load_model(fh.name)
    rt = all(
        model.params()[name].tobytes() == loaded.params()[name].tobytes()
        for name in nn.PARAM_ORDER
    )
    checks.append(gradcheck.CheckEntry("checkpoint:roundtrip", 0.0 if rt else 1.0, 1.0, rt))

    probes = [0.8 * sample_circular_gaussian(rng, 2, 1.0) for _ in range(20)]
    holo_ok = ad.is_holomorphic_numeric(nn.ctanh_values, probes) and not ad.is_holomorphic_numeric(
        nn.split_magnitude_values, probes
    )
    checks.append(gradcheck.CheckEntry("holomorphy:classes", 0.0 if holo_ok else 1.0, 1.0, holo_ok))
    return checks


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvnet",
        description="complex-valued recurrent networks on synthetic wide-band frame prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset file")
    p.add_argument("--kind", required=True, choices=[k.value for k in datagen.DatasetKind])
    p.add_argument("--train", type=int, default=10000)
    p.add_argument("--val", type=int, default=1000)
    p.add_argument("--test", type=int, default=1000)
    p.add_argument("--full-phase-range", action="store_true",
                   help="draw phases from [0, 2*pi) instead of [0, 1) radians")
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--data", required=True)
    p.add_argument("--field", required=True, choices=["complex", "real"])
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--lr0", type=float, required=True)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--half-life", type=float, required=True)
    p.add_argument("--init-scale", type=float, required=True)
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--clip", type=float, default=None,
                   help="optional global-norm gradient clip threshold")
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("search", help="seeded random hyperparameter search")
    p.add_argument("--data", required=True)
    p.add_argument("--field", required=True, choices=["complex", "real"])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("eval", help="mean squared error of a checkpoint on a partition")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--partition", required=True, choices=["train", "val", "test"])
    _add_seed(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("filters", help="export filter magnitude responses as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--rows", type=int, default=3)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(fn=cmd_filters)

    p = sub.add_parser("gradcheck", help="check analytic derivatives against finite differences")
    _add_seed(p)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("selftest", help="gradcheck plus quick invariant checks")
    _add_seed(p)
    p.set_defaults(fn=cmd_selftest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
