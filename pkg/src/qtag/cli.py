"""Command-line entry point: ``qtag <subcommand> ...``.

Exit codes: 0 success, 2 configuration/input error, 3 resource budget
exceeded, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .backends import CvBackend, QubitBackend
from .boosting import ensemble_qr, load_ensemble, save_ensemble
from .config import load_config, parse_config, resolved
from .cv import CvEmbeddingSpec, build_cv_state, displaced_vacua, reduced_density, wigner
from .data import SyntheticSpec, apply_standardizer, fit_standardizer, generate_synthetic, load_events, write_events
from .errors import BudgetError, ConfigError, QtagError
from .experiment import make_report, prepare, run_experiment, split, train_from_config
from .gram import cache_dir, cache_key, gram, write_kernel
from .tagging import calibration_check, format_report

log = logging.getLogger("qtag")


def _grid(lo, hi, step):
    if step <= 0 or hi <= lo:
        raise ConfigError("grid needs lo < hi and step > 0")
    n = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, lo + (n - 1) * step, n)


def cmd_gen_data(args):
    spec = SyntheticSpec(args.features, args.informative, args.separation, args.seed, args.count)
    write_events(generate_synthetic(spec), args.out)
    print(f"wrote {args.count} events to {args.out}")


def _backend_from_args(args):
    if args.backend == "qubit":
        return QubitBackend(args.n_qubits, args.depth, feature_scale=args.feature_scale)
    return CvBackend(args.layers, args.beta, args.gamma, args.truncation, args.max_amplitudes)


def cmd_compute_gram(args):
    d = load_events(args.data)
    if len(d) == 0:
        raise ConfigError("no events in data file", path=args.data)
    if args.standardize:
        d = apply_standardizer(d, fit_standardizer(d))
    backend = _backend_from_args(args)
    emb = backend.embedding(d.feature_count, args.angle_seed)
    out = args.out
    if out is None:
        root = cache_dir()
        if root is None:
            raise ConfigError("give --out or set QTAG_CACHE_DIR", path="out")
        root.mkdir(parents=True, exist_ok=True)
        out = root / f"{cache_key(emb, d.digest())}.qgrm"
    K = gram(emb, d.X, threads=args.threads)
    write_kernel(K, out)
    print(f"wrote {K.n_rows}x{K.n_cols} kernel to {out}")


def cmd_train(args):
    cfg = load_config(args.config, args.set)
    pieces = split(cfg)
    prepared = prepare(cfg, pieces)
    model = train_from_config(cfg, prepared, args.threads or cfg.threads)
    extra = {"config": resolved(cfg), "data_digest": pieces[2], "transforms": prepared.transforms_dict()}
    save_ensemble(model, args.out, extra)
    print(f"trained {model.N} members; model written to {args.out}")


def cmd_evaluate(args):
    manifest = json.loads((Path(args.model) / "manifest.json").read_text())
    cfg = parse_config(manifest["config"])
    pieces = split(cfg)
    if pieces[2] != manifest["data_digest"]:
        raise ConfigError("training data changed since the model was trained", path="data")
    prepared = prepare(cfg, pieces)
    model = load_ensemble(args.model, prepared.train.X)
    test = prepared.test if args.data is None else prepared.transform(load_events(args.data))
    if len(test) == 0:
        raise ConfigError("no test events")
    qr = ensemble_qr(model, test.X, args.threads or cfg.threads, generations=args.generations)
    report = make_report(qr, test.y, args.binning or cfg.binning)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.tsv").write_text(format_report(report), encoding="utf-8")
    lines = ["qr\tlabel"] + [f"{q:.6g}\t{int(y)}" for q, y in zip(qr, test.y)]
    (out / "qr.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    lines = ["mean_r\tone_minus_2w"] + [f"{a:.6g}\t{b:.6g}" for a, b in calibration_check(report)]
    (out / "calibration.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    plotting.plot_calibration(report, out / "calibration.png")
    print(f"epsilon_eff = {report.epsilon_eff:.6g} on {len(test)} events")


def cmd_experiment(args):
    cfg = load_config(args.config, args.set)
    out = run_experiment(cfg, args.out, args.threads)
    print((out / "results.tsv").read_text(), end="")


def cmd_wigner(args):
    xs = _grid(args.x_range[0], args.x_range[1], args.step)
    ps = _grid(args.p_range[0], args.p_range[1], args.step)
    if args.state == "vacuum":
        state = np.eye(args.truncation)[0]
    elif args.state == "displaced":
        state = displaced_vacua(np.array([args.beta * args.value]), args.truncation)[0]
    else:
        feats = [float(v) for v in args.features.split(",")]
        spec = CvEmbeddingSpec(len(feats), args.layers, args.beta, args.gamma, args.truncation)
        psi = build_cv_state(feats, spec)
        if spec.product_form:
            state = psi[args.mode]
        else:
            state = reduced_density(psi, spec.n_modes, spec.truncation, args.mode)
    W = wigner(state, xs, ps)
    out = Path(args.out)
    X, P = np.meshgrid(xs, ps, indexing="ij")
    lines = ["x\tp\tW"] + [f"{a:.6g}\t{b:.6g}\t{w:.6g}" for a, b, w in zip(X.ravel(), P.ravel(), W.ravel())]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    plotting.plot_wigner(xs, ps, W, out.with_suffix(".png"), title=args.state)
    print(f"wrote {W.size} grid points to {out}")


def build_parser():
    p = argparse.ArgumentParser(prog="qtag", description="Boosted quantum-kernel SVM ensembles for flavour tagging.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write synthetic events as CSV")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--features", type=int, required=True)
    g.add_argument("--informative", type=int, required=True)
    g.add_argument("--separation", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    k = sub.add_parser("compute-gram", help="compute a Gram matrix into the binary kernel format")
    k.add_argument("--data", required=True)
    k.add_argument("--backend", choices=("qubit", "cv"), default="qubit")
    k.add_argument("--n-qubits", type=int, default=10)
    k.add_argument("--depth", type=int, default=52)
    k.add_argument("--angle-seed", type=int, default=0)
    k.add_argument("--feature-scale", type=float, default=1.0)
    k.add_argument("--layers", type=int, default=1)
    k.add_argument("--beta", type=float, default=0.1)
    k.add_argument("--gamma", type=float, default=0.1)
    k.add_argument("--truncation", type=int, default=8)
    k.add_argument("--max-amplitudes", type=int, default=CvEmbeddingSpec.max_amplitudes)
    k.add_argument("--standardize", action="store_true")
    k.add_argument("--threads", type=int, default=1)
    k.add_argument("--out")
    k.set_defaults(func=cmd_compute_gram)

    for name, func, helptext in (
        ("train", cmd_train, "train an ensemble from a config file"),
        ("experiment", cmd_experiment, "run a configured sweep"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. ensemble.N=50")
        s.add_argument("--threads", type=int)
        s.add_argument("--out", required=(name == "train"))
        s.set_defaults(func=func)

    e = sub.add_parser("evaluate", help="tag-report a trained ensemble")
    e.add_argument("--model", required=True)
    e.add_argument("--data", help="event CSV; defaults to the held-out split of the training source")
    e.add_argument("--generations", type=int)
    e.add_argument("--binning", choices=("static", "equal-population"))
    e.add_argument("--threads", type=int)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    w = sub.add_parser("wigner", help="tabulate the Wigner function of an embedded qumode")
    w.add_argument("--state", choices=("vacuum", "displaced", "cv-mode"), default="displaced")
    w.add_argument("--value", type=float, default=10.0, help="feature value for --state displaced")
    w.add_argument("--features", default="0", help="comma-separated event for --state cv-mode")
    w.add_argument("--mode", type=int, default=0)
    w.add_argument("--layers", type=int, default=1)
    w.add_argument("--beta", type=float, default=0.1)
    w.add_argument("--gamma", type=float, default=0.1)
    w.add_argument("--truncation", type=int, default=8)
    w.add_argument("--x-range", type=float, nargs=2, default=(-4.0, 4.0))
    w.add_argument("--p-range", type=float, nargs=2, default=(-2.0, 2.0))
    w.add_argument("--step", type=float, default=0.05)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_wigner)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except QtagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError as exc:
        print(f"error: out of memory ({exc})", file=sys.stderr)
        return BudgetError.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
