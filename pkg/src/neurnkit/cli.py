"""Command-line entry point exposing every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
failure.  ``--seed``, ``--config``, ``--threads`` are accepted by every
subcommand; each run writes a ``<output>.manifest.json`` echoing the
effective configuration (with a hash) and the checksums of all inputs, so
identical invocations are provably identical.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import re
import sys
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from . import domainbench as bench
from . import kdeiou, rsa, synth
from .errors import DataFormatError, NumericError, ToolkitError, UsageError
from .neurn import NeurnConfig, neurn_apply
from .parallel import effective_threads
from .reprs import (
    StimulusSet,
    build_neural_reps,
    extract_feature_reps,
    ingest_neuron_dir,
    load_rep_set,
    save_rep_set,
)
from .select import EmbedConfig, embed, kmeans, sample_central
from .tensorio import Image, Tensor, load_ntf, save_idx_images, save_idx_labels, save_ntf

PROG = "neurnkit"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="global random seed")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: available parallelism)")


def build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True, metavar="GROUP")

    neurn_p = groups.add_parser("neurn", help="patch-statistics normalization")
    neurn_sub = neurn_p.add_subparsers(dest="verb", required=True)
    p = neurn_sub.add_parser("apply", help="normalize an NTF image tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--padding", choices=("replicate", "reflect"), default=None)
    p.add_argument("--epsilon", type=float, default=None)
    _common_flags(p)

    reps_p = groups.add_parser("reps", help="build representation sets")
    reps_sub = reps_p.add_subparsers(dest="verb", required=True)
    p = reps_sub.add_parser("neural", help="neural maps from traces and stimuli")
    p.add_argument("--neurons", required=True, help="directory of per-neuron NTF files")
    p.add_argument("--stimuli", required=True, help="stimulus NTF file")
    p.add_argument("--mode", choices=("peak", "mean", "full"), default="peak")
    p.add_argument("--out", required=True)
    _common_flags(p)
    p = reps_sub.add_parser("features", help="feature maps from a kernel tensor")
    p.add_argument("--kernels", required=True, help="rank-4 kernel NTF file")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--neurn-flag", action="store_true",
                   help="tag the maps as coming from a normalized model")
    p.add_argument("--out", required=True)
    _common_flags(p)

    select_p = groups.add_parser("select", help="representative sampling")
    select_sub = select_p.add_subparsers(dest="verb", required=True)
    p = select_sub.add_parser("sample", help="embed, cluster, take central members")
    p.add_argument("--reps", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=None, help="cluster count")
    p.add_argument("--per-cluster", type=int, default=None)
    p.add_argument("--method", choices=("pca", "none"), default=None)
    _common_flags(p)

    rsa_p = groups.add_parser("rsa", help="representational similarity analysis")
    rsa_sub = rsa_p.add_subparsers(dest="verb", required=True)
    p = rsa_sub.add_parser("compare", help="pairwise RMSE matrix between two sets")
    p.add_argument("--features", required=True)
    p.add_argument("--neurals", required=True)
    p.add_argument("--out", required=True, help="matrix CSV path")
    p.add_argument("--common-side", type=int, default=None)
    p.add_argument("--raw", action="store_true", help="skip per-map min-max scaling")
    p.add_argument("--summarize-by", default=None, help="metadata key to aggregate on")
    p.add_argument("--summary-out", default=None)
    _common_flags(p)
    p = rsa_sub.add_parser("scatter", help="pair plain vs normalized group means")
    p.add_argument("--neurn", required=True, help="matrix CSV from the normalized model")
    p.add_argument("--plain", required=True, help="matrix CSV from the plain model")
    p.add_argument("--group-by", required=True)
    p.add_argument("--out", required=True)
    _common_flags(p)

    kde_p = groups.add_parser("kde", help="density estimation and overlap")
    kde_sub = kde_p.add_subparsers(dest="verb", required=True)
    p = kde_sub.add_parser("iou", help="KDE overlap between activation groups")
    p.add_argument("--reps-a", required=True)
    p.add_argument("--group-a", required=True)
    p.add_argument("--reps-b", default=None, help="second set (default: pairs within A)")
    p.add_argument("--group-b", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--bandwidth", default=None, help="'auto' or a positive number")
    p.add_argument("--grid-size", type=int, default=None)
    p.add_argument("--svg-dir", default=None, help="emit one curve-pair SVG per row")
    _common_flags(p)

    bench_p = groups.add_parser("bench", help="domain-generalization benchmark")
    bench_sub = bench_p.add_subparsers(dest="verb", required=True)
    p = bench_sub.add_parser("domain", help="source-to-target transfer matrix")
    p.add_argument("--domain", action="append", required=True, metavar="NAME=IMAGES,LABELS",
                   help="domain spec; files may be IDX or NTF (repeatable)")
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--arch", choices=("softmax", "mlp"), default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--seeds", default=None, help="comma-separated seeds (default: --seed)")
    _common_flags(p)

    synth_p = groups.add_parser("synth", help="seeded synthetic data")
    synth_sub = synth_p.add_subparsers(dest="verb", required=True)
    p = synth_sub.add_parser("gen", help="generate synthetic inputs")
    p.add_argument("--what", required=True, choices=("neurons", "stimuli", "kernels", "domain"))
    p.add_argument("--out", "--out-dir", dest="out_dir", required=True,
                   help="output directory")
    p.add_argument("--count", type=int, default=None,
                   help="stimulus count / domain sample count")
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--exc", type=int, default=500, help="excitatory neuron count")
    p.add_argument("--inh", type=int, default=500, help="inhibitory neuron count")
    p.add_argument("--trace-len", type=int, default=30)
    p.add_argument("--filters", type=int, default=5, help="kernel bank size")
    p.add_argument("--bank", default=None, help="kernel bank NTF for stimulus embedding")
    p.add_argument("--name", default="domain")
    p.add_argument("--style", choices=synth.DIGIT_STYLES, default="clean")
    p.add_argument("--contrast-pairs", action="store_true")
    p.add_argument("--format", choices=("ntf", "idx"), default="ntf")
    _common_flags(p)

    return parser


def _effective_config(args) -> dict:
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.merge_config(None)
    if args.seed is not None:
        cfg["seed"] = int(args.seed)
    threads = args.threads
    if threads is None:
        env = os.environ.get("NEURN_THREADS")
        if env is not None:
            try:
                threads = int(env)
            except ValueError as e:
                raise UsageError(f"NEURN_THREADS must be an integer, got {env!r}") from e
    if threads is not None:
        cfg["threads"] = int(threads)
    return cfg


def _override(cfg: dict, section: str, key: str, value) -> None:
    if value is not None:
        cfg[section][key] = value


def _as_usage(e: UsageError, context: str) -> DataFormatError:
    return DataFormatError(f"{context}: {e}")


def _load_stimuli(path) -> StimulusSet:
    tensor = load_ntf(path)
    data = tensor.data
    if data.ndim == 3:
        if data.shape[1] != data.shape[2]:
            raise DataFormatError(f"{path}: stimulus grids must be square, got {data.shape}")
        side = data.shape[1]
    elif data.ndim == 2:
        side = int(round(data.shape[1] ** 0.5))
        if side * side != data.shape[1]:
            raise DataFormatError(
                f"{path}: flattened stimuli must have a square pixel count, got {data.shape[1]}"
            )
    else:
        raise DataFormatError(f"{path}: stimuli must be rank 2 or 3, got rank {data.ndim}")
    try:
        return StimulusSet(side=side, flattened=data.reshape(data.shape[0], -1))
    except UsageError as e:
        raise _as_usage(e, str(path)) from e


def _neurn_config(cfg: dict) -> NeurnConfig:
    section = cfg["neurn"]
    return NeurnConfig(k=section["k"], padding=section["padding"], epsilon=section["epsilon"])


def _cmd_neurn_apply(args, cfg):
    _override(cfg, "neurn", "k", args.k)
    _override(cfg, "neurn", "padding", args.padding)
    _override(cfg, "neurn", "epsilon", args.epsilon)
    ncfg = _neurn_config(cfg)
    tensor = load_ntf(args.input)
    data = tensor.data
    if data.ndim == 2:
        out = neurn_apply(Image(data), ncfg).data[0]
    elif data.ndim == 3:
        out = neurn_apply(Image(data), ncfg).data
    elif data.ndim == 4:
        out = np.stack([neurn_apply(Image(img), ncfg).data for img in data])
    else:
        raise DataFormatError(
            f"{args.input}: expected rank 2-4 image tensor, got rank {data.ndim}"
        )
    if not np.all(np.isfinite(out)):
        raise NumericError("normalization produced non-finite values")
    meta = dict(tensor.meta)
    meta.update({"neurn_k": str(ncfg.k), "neurn_padding": ncfg.padding})
    save_ntf(Tensor(out, meta), args.out)
    return args.out, [args.input], [args.out], None


def _cmd_reps_neural(args, cfg):
    stimuli = _load_stimuli(args.stimuli)
    neurons = ingest_neuron_dir(args.neurons)
    if not neurons:
        raise DataFormatError(f"{args.neurons}: no per-neuron NTF files found")
    threads = effective_threads(cfg["threads"])
    reps = build_neural_reps(neurons, stimuli, mode=args.mode, threads=threads)
    reps.info["mode"] = args.mode
    reps.info["stimulus_count"] = stimuli.count
    save_rep_set(reps, args.out)
    inputs = [args.stimuli]
    return args.out, inputs, [args.out, f"{args.out}.meta.json"], None


def _cmd_reps_features(args, cfg):
    kernels = load_ntf(args.kernels)
    try:
        reps = extract_feature_reps(
            kernels,
            {"model": args.model, "layer": args.layer, "neurn_flag": bool(args.neurn_flag)},
        )
    except UsageError as e:
        raise _as_usage(e, str(args.kernels)) from e
    save_rep_set(reps, args.out)
    return args.out, [args.kernels], [args.out, f"{args.out}.meta.json"], None


def _cmd_select_sample(args, cfg):
    _override(cfg, "kmeans", "k", args.k)
    _override(cfg, "kmeans", "per_cluster", args.per_cluster)
    _override(cfg, "embed", "method", args.method)
    reps = load_rep_set(args.reps)
    embed_cfg = EmbedConfig(
        method=cfg["embed"]["method"],
        out_dims=cfg["embed"]["out_dims"],
        n_neighbors=cfg["embed"]["n_neighbors"],
        min_dist=cfg["embed"]["min_dist"],
        metric=cfg["embed"]["metric"],
    )
    flat = reps.maps.reshape(len(reps), -1)
    embedded = embed(flat, embed_cfg)
    clustering = kmeans(embedded, cfg["kmeans"]["k"], seed=cfg["seed"])
    sampled = sample_central(reps, clustering, embedded, cfg["kmeans"]["per_cluster"])
    sampled.info["kmeans_k"] = cfg["kmeans"]["k"]
    sampled.info["seed"] = cfg["seed"]
    sampled.info["embed_method"] = embed_cfg.method
    save_rep_set(sampled, args.out)
    return args.out, [args.reps], [args.out, f"{args.out}.meta.json"], None


def _cmd_rsa_compare(args, cfg):
    _override(cfg, "rsa", "common_side", args.common_side)
    if args.raw:
        cfg["rsa"]["normalize"] = False
    features = load_rep_set(args.features)
    neurals = load_rep_set(args.neurals)
    threads = effective_threads(cfg["threads"])
    matrix = rsa.compare_sets(
        features,
        neurals,
        common_side=cfg["rsa"]["common_side"],
        normalize=cfg["rsa"]["normalize"],
        threads=threads,
    )
    rsa.write_matrix_csv(matrix, args.out)
    outputs = [args.out]
    if args.summarize_by:
        summary_out = args.summary_out or f"{args.out}.summary.csv"
        rsa.write_summaries_csv(rsa.aggregate(matrix, args.summarize_by), summary_out)
        outputs.append(summary_out)
    inputs = [args.features, f"{args.features}.meta.json",
              args.neurals, f"{args.neurals}.meta.json"]
    return args.out, inputs, outputs, None


def _cmd_rsa_scatter(args, cfg):
    m_neurn = rsa.read_matrix_csv(args.neurn)
    m_plain = rsa.read_matrix_csv(args.plain)
    pairs = rsa.neurn_scatter(m_neurn, m_plain, args.group_by)
    rsa.write_scatter_csv(pairs, args.out)
    return args.out, [args.neurn, args.plain], [args.out], None


def _slug(value) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", str(value)) or "group"


def _cmd_kde_iou(args, cfg):
    _override(cfg, "kde", "grid_size", args.grid_size)
    if args.bandwidth is not None:
        cfg["kde"]["bandwidth"] = (
            "auto" if args.bandwidth == "auto" else float(args.bandwidth)
        )
    bandwidth = cfg["kde"]["bandwidth"]
    grid_size = cfg["kde"]["grid_size"]
    limit = cfg["kde"]["subsample_limit"]

    reps_a = load_rep_set(args.reps_a)
    pools_a = kdeiou.pool_activations(reps_a, args.group_a)
    if args.reps_b:
        group_b = args.group_b or args.group_a
        pools_b = kdeiou.pool_activations(load_rep_set(args.reps_b), group_b)
        pair_iter = [((a, pools_a[a]), (b, pools_b[b])) for a in pools_a for b in pools_b]
    else:
        items = list(pools_a.items())
        pair_iter = list(itertools.combinations(items, 2))
    if not pair_iter:
        raise UsageError("need at least two activation groups to compare")

    curves = {}
    notes = {}

    def fit(tag, name, samples):
        key = (tag, name)
        if key not in curves:
            data, subsampled = kdeiou.subsample_pool(samples, limit, seed=cfg["seed"])
            if subsampled:
                notes[f"subsampled_{tag}_{name}"] = int(limit)
            curves[key] = kdeiou.kde_fit(data, bandwidth=bandwidth, grid_size=grid_size)
        return curves[key]

    import csv as _csv

    outputs = [args.out]
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        writer = _csv.writer(f, lineterminator="\n")
        writer.writerow(["group_a", "group_b", "iou", "bandwidth_a", "bandwidth_b", "n_a", "n_b"])
        for (name_a, samples_a), (name_b, samples_b) in pair_iter:
            curve_a = fit("a", name_a, samples_a)
            curve_b = fit("b" if args.reps_b else "a", name_b, samples_b)
            overlap = kdeiou.iou(curve_a, curve_b)
            writer.writerow(
                [
                    name_a,
                    name_b,
                    repr(float(overlap)),
                    repr(float(curve_a.bandwidth)),
                    repr(float(curve_b.bandwidth)),
                    curve_a.sample_count,
                    curve_b.sample_count,
                ]
            )
            if args.svg_dir:
                os.makedirs(args.svg_dir, exist_ok=True)
                svg_path = os.path.join(
                    args.svg_dir, f"kde_{_slug(name_a)}_vs_{_slug(name_b)}.svg"
                )
                kdeiou.write_curve_pair_svg(
                    curve_a, curve_b, svg_path, label_a=str(name_a), label_b=str(name_b)
                )
                outputs.append(svg_path)
    inputs = [args.reps_a, f"{args.reps_a}.meta.json"]
    if args.reps_b:
        inputs += [args.reps_b, f"{args.reps_b}.meta.json"]
    return args.out, inputs, outputs, (notes or None)


def _parse_domain_spec(spec: str):
    if "=" not in spec or "," not in spec.split("=", 1)[1]:
        raise UsageError(f"--domain must look like NAME=IMAGES,LABELS, got {spec!r}")
    name, paths = spec.split("=", 1)
    images_path, labels_path = paths.split(",", 1)
    return name.strip(), images_path.strip(), labels_path.strip()


def _cmd_bench_domain(args, cfg):
    _override(cfg, "bench", "side", args.side)
    _override(cfg, "bench", "arch", args.arch)
    _override(cfg, "bench", "hidden", args.hidden)
    _override(cfg, "bench", "max_epochs", args.max_epochs)
    section = cfg["bench"]

    specs = [_parse_domain_spec(s) for s in args.domain]
    if len(specs) < 2:
        raise UsageError("need at least two --domain entries")
    domains, inputs = [], []
    for name, images_path, labels_path in specs:
        ds = bench.load_domain(images_path, labels_path, name=name)
        domains.append(bench.resize_dataset(ds, section["side"]))
        inputs += [images_path, labels_path]

    if args.seeds is not None:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
        except ValueError as e:
            raise UsageError(f"--seeds must be comma-separated integers: {e}") from e
        if not seeds:
            raise UsageError("--seeds is empty")
    else:
        seeds = [cfg["seed"]]

    base = bench.ClassifierConfig(
        arch=section["arch"],
        hidden=section["hidden"],
        learning_rate=section["learning_rate"],
        batch_size=section["batch_size"],
        max_epochs=section["max_epochs"],
        patience=section["patience"],
        seed=cfg["seed"],
        optimizer=section["optimizer"],
    )
    ncfg = _neurn_config(cfg)
    rows = []
    for seed in seeds:
        report = bench.run_transfer_matrix(
            domains, replace(base, seed=seed), ncfg, val_fraction=section["val_fraction"]
        )
        rows.extend(report.rows)
    bench.write_transfer_csv(rows, args.out)
    notes = {"seeds": ",".join(str(s) for s in seeds)}
    return args.out, inputs, [args.out], notes


def _cmd_synth_gen(args, cfg):
    os.makedirs(args.out_dir, exist_ok=True)
    seed = cfg["seed"]
    outputs = []

    def out(name):
        path = os.path.join(args.out_dir, name)
        outputs.append(path)
        return path

    if args.what == "kernels":
        save_ntf(synth.gen_kernel_bank(seed, n_filters=args.filters), out("kernel_bank.ntf"))
    elif args.what == "stimuli":
        count = args.count or 100
        side = args.side or 28
        bank = load_ntf(args.bank) if args.bank else None
        stimuli = synth.gen_stimuli(count, side, seed, bank=bank)
        grids = stimuli.flattened.reshape(count, side, side)
        save_ntf(Tensor(grids, {"kind": "stimuli"}), out("stimuli.ntf"))
    elif args.what == "neurons":
        count = args.count or 100
        side = args.side or 28
        bank = synth.gen_kernel_bank(seed, n_filters=args.filters)
        save_ntf(bank, out("kernel_bank.ntf"))
        stimuli = synth.gen_stimuli(count, side, seed, bank=bank)
        save_ntf(
            Tensor(stimuli.flattened.reshape(count, side, side), {"kind": "stimuli"}),
            out("stimuli.ntf"),
        )
        neurons = synth.gen_neurons(
            stimuli, bank, seed,
            n_excitatory=args.exc, n_inhibitory=args.inh, trace_len=args.trace_len,
        )
        neuron_dir = os.path.join(args.out_dir, "neurons")
        os.makedirs(neuron_dir, exist_ok=True)
        for neuron in neurons:
            meta = {k: str(v) for k, v in neuron.meta().items()}
            save_ntf(Tensor(neuron.traces, meta),
                     os.path.join(neuron_dir, f"{neuron.neuron_id}.ntf"))
        outputs.append(neuron_dir)
    else:  # domain
        count = args.count or 2000
        side = args.side or 16
        ds = synth.gen_digit_domain(
            args.name, count, side, seed,
            style=args.style, contrast_pairs=args.contrast_pairs,
        )
        if args.format == "idx":
            save_idx_images(ds.images, out(f"{args.name}_images.idx"))
            save_idx_labels(ds.labels, out(f"{args.name}_labels.idx"))
        else:
            bench.save_domain(
                ds, out(f"{args.name}_images.ntf"), out(f"{args.name}_labels.ntf")
            )

    primary = os.path.join(args.out_dir, "manifest.json")
    return primary, ([args.bank] if getattr(args, "bank", None) else []), outputs, None


_HANDLERS = {
    ("neurn", "apply"): _cmd_neurn_apply,
    ("reps", "neural"): _cmd_reps_neural,
    ("reps", "features"): _cmd_reps_features,
    ("select", "sample"): _cmd_select_sample,
    ("rsa", "compare"): _cmd_rsa_compare,
    ("rsa", "scatter"): _cmd_rsa_scatter,
    ("kde", "iou"): _cmd_kde_iou,
    ("bench", "domain"): _cmd_bench_domain,
    ("synth", "gen"): _cmd_synth_gen,
}


def dispatch(argv) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
        cfg = _effective_config(args)
        handler = _HANDLERS[(args.group, args.verb)]
        primary, inputs, outputs, notes = handler(args, cfg)
        manifest_path = (
            primary if str(primary).endswith("manifest.json") else f"{primary}.manifest.json"
        )
        existing_inputs = [p for p in inputs if os.path.exists(p)]
        cfgmod.write_manifest(manifest_path, [args.group, args.verb], cfg,
                              existing_inputs, outputs, notes)
        for path in outputs:
            print(f"wrote {path}")
        print(f"wrote {manifest_path}")
        return 0
    except UsageError as e:
        print(f"{PROG}: usage error: {e}", file=sys.stderr)
        return 1
    except DataFormatError as e:
        print(f"{PROG}: data error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"{PROG}: numeric error: {e}", file=sys.stderr)
        return 3
    except ToolkitError as e:  # pragma: no cover - safety net
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
