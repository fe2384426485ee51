"""Command-line front end.

Subcommands compose into a pipeline:

    dmclust simulate --preset desk --scenario 5 --out data/
    dmclust fit --model MFMDM --counts data/counts.tsv --scale auto --out run/
    dmclust summarize --draws run/draws.txt --out run/
    dmclust eval --partition run/partition.csv --truth-labels data/labels.csv

Draws files are line-oriented: a single '#'-prefixed JSON header, then one
tab-separated line per kept draw (iteration, comma-joined partition labels,
selection bitstring, log posterior), so summaries can stream.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .data import (
    CountMatrix,
    parse_count_table,
    parse_newick,
    propagate_tree_counts,
    rescale_counts,
)
from .errors import ConfigError, DmclustError
from .kernels import DmHyper, DtmHyper, selection_from_bits, selection_to_bits
from .partition_prior import PriorSpec
from .posterior import (
    adjusted_rand,
    coclustering,
    frequencies_to_csv,
    partition_to_csv,
    roc_auc,
    selection_frequencies,
    summarize_partition,
    zeta_to_csv,
)
from .sampler import DmModel, DtmModel, McmcConfig, resolve_model_name, run_mcmc
from .simulate import desk_preset, full_preset, generate_scenario, random_binary_tree

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


_FIT_DEFAULTS = {
    "model": None,
    "counts": None,
    "tree": None,
    "scale": "50",
    "iterations": 20000,
    "burn_in": 10000,
    "thin": 10,
    "seed": 0,
    "chains": 1,
    "out": None,
    "alpha": 1.0,
    "beta1": 1.0,
    "beta2": 1.0,
    "w": 0.5,
    "eta": 1.0,
    "dp_concentration": 1.0,
    "gamma_moves": 20,
    "launch_scans": 20,
}


def _build_parser():
    p = _Parser(prog="dmclust", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic two-group dataset")
    sim.add_argument("--preset", choices=["desk", "full"], default="desk")
    sim.add_argument("--scenario", type=int, required=True, help="separation level z (0..5)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--n-per-group", type=int, default=None)
    sim.add_argument("--depth", type=int, default=None)
    sim.add_argument("--out", required=True)

    fit = sub.add_parser("fit", help="run MCMC on a count table")
    fit.add_argument("--model", choices=["MFMDM", "MFMDTM", "DPDM", "DPDTM"])
    fit.add_argument("--counts")
    fit.add_argument("--tree")
    fit.add_argument("--scale", help="rescaling divisor, or 'auto' for max-total/300")
    fit.add_argument("--iterations", type=int)
    fit.add_argument("--burn-in", dest="burn_in", type=int)
    fit.add_argument("--thin", type=int)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--chains", type=int)
    fit.add_argument("--out")
    fit.add_argument("--config", help="flat JSON config; explicit flags override it")
    fit.add_argument("--alpha", type=float)
    fit.add_argument("--beta1", type=float)
    fit.add_argument("--beta2", type=float)
    fit.add_argument("--w", type=float)
    fit.add_argument("--eta", type=float)
    fit.add_argument("--dp-concentration", dest="dp_concentration", type=float)
    fit.add_argument("--gamma-moves", dest="gamma_moves", type=int)
    fit.add_argument("--launch-scans", dest="launch_scans", type=int)

    summ = sub.add_parser("summarize", help="summaries from one or more draws files")
    summ.add_argument("--draws", nargs="+", required=True)
    summ.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="score estimates against known truth")
    ev.add_argument("--partition", help="partition-estimate CSV")
    ev.add_argument("--truth-labels", help="true group CSV (sample,group)")
    ev.add_argument("--frequencies", help="selection-frequency CSV")
    ev.add_argument("--truth-features", help="true informative-feature CSV")
    return p


# ---------------------------------------------------------------------------
# helpers


class _OutputTracker:
    """Records files written by a command so failures can clean them up."""

    def __init__(self):
        self.paths = []

    def write(self, path, text):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
        self.paths.append(path)

    def cleanup(self):
        for path in self.paths:
            try:
                os.remove(path)
            except OSError:
                pass


def _read_csv_map(path, value_cast):
    """Read a two-column CSV with a header into an ordered {key: value} map."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    out = {}
    for ln in lines[1:]:
        key, value = ln.split(",", 1)
        out[key] = value_cast(value)
    return out


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args, track):
    preset = desk_preset if args.preset == "desk" else full_preset
    spec = preset(args.scenario, seed=args.seed)
    if args.n_per_group is not None:
        spec.n_per_group = args.n_per_group
    if args.depth is not None:
        spec.depth = args.depth
    spec.__post_init__()
    data = generate_scenario(spec)
    out = args.out
    track.write(os.path.join(out, "counts.tsv"), data.counts.to_tsv())
    labels = ["sample,group"] + [
        "%s,%d" % (s, g) for s, g in zip(data.counts.sample_names, data.group_labels)
    ]
    track.write(os.path.join(out, "labels.csv"), "\n".join(labels) + "\n")
    truth = ["feature,informative"] + [
        "%s,%d" % (f, int(t))
        for f, t in zip(data.counts.feature_names, data.informative_truth)
    ]
    track.write(os.path.join(out, "truth.csv"), "\n".join(truth) + "\n")
    tree = random_binary_tree(data.counts.feature_names, seed=spec.seed)
    track.write(os.path.join(out, "tree.nwk"), tree.to_newick() + "\n")
    manifest = {
        "command": "simulate",
        "preset": args.preset,
        "scenario": spec.z,
        "seed": spec.seed,
        "n_per_group": spec.n_per_group,
        "depth": spec.depth,
        "n_features": int(spec.n_features),
        "outputs": ["counts.tsv", "labels.csv", "truth.csv", "tree.nwk"],
    }
    track.write(os.path.join(out, "manifest.json"),
                json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def _merge_fit_config(args):
    settings = dict(_FIT_DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError("config file is not valid JSON: %s" % e) from None
        unknown = set(file_cfg) - set(_FIT_DEFAULTS)
        if unknown:
            raise ConfigError("unknown config keys: %s" % ", ".join(sorted(unknown)))
        settings.update(file_cfg)
    for key in _FIT_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    for key in ("model", "counts", "out"):
        if not settings[key]:
            raise ConfigError("missing required setting: %s" % key)
    return settings


def _fit_one_chain(model, prior, mcmc, chain_seed):
    cfg = McmcConfig(
        iterations=mcmc["iterations"],
        burn_in=mcmc["burn_in"],
        thinning=mcmc["thin"],
        gamma_moves=mcmc["gamma_moves"],
        launch_scans=mcmc["launch_scans"],
        seed=chain_seed,
    )
    return run_mcmc(model, prior, cfg)


def _draws_text(draws, header):
    lines = ["#" + json.dumps(header, sort_keys=True)]
    for it, part, gam, lp in zip(
        draws.iterations, draws.partitions, draws.selections, draws.log_posts
    ):
        lines.append(
            "%d\t%s\t%s\t%.17g"
            % (it, ",".join(str(int(x)) for x in part), selection_to_bits(gam), lp)
        )
    return "\n".join(lines) + "\n"


def _cmd_fit(args, track):
    settings = _merge_fit_config(args)
    kind, variant = resolve_model_name(settings["model"])
    raw = parse_count_table(open(settings["counts"]).read())
    scale = settings["scale"]
    scaled = rescale_counts(raw, "auto" if str(scale).lower() == "auto" else float(scale))

    if kind == "dm":
        model = DmModel(
            scaled.counts,
            DmHyper(settings["alpha"], settings["beta1"], settings["beta2"], settings["w"]),
        )
        units = scaled.feature_names
    else:
        if not settings["tree"]:
            raise ConfigError("model %s requires --tree" % settings["model"])
        tree = parse_newick(open(settings["tree"]).read())
        tc = propagate_tree_counts(scaled, tree)
        model = DtmModel(tc, DtmHyper(settings["alpha"], settings["w"]))
        units = tc.node_labels
    prior = PriorSpec(
        variant=variant, eta=settings["eta"], dp_concentration=settings["dp_concentration"]
    )

    chains = int(settings["chains"])
    if chains < 1:
        raise ConfigError("chains must be >= 1")
    chain_seeds = [
        int(ss.generate_state(1)[0])
        for ss in np.random.SeedSequence(settings["seed"]).spawn(chains)
    ]
    t0 = time.time()
    with ThreadPoolExecutor(max_workers=min(chains, os.cpu_count() or 1)) as pool:
        results = list(
            pool.map(lambda s: _fit_one_chain(model, prior, settings, s), chain_seeds)
        )
    wall = time.time() - t0

    out = settings["out"]
    files = []
    for c, draws in enumerate(results):
        name = "draws.txt" if chains == 1 else "draws_chain%d.txt" % c
        header = {
            "model": draws.model,
            "samples": scaled.sample_names,
            "units": units,
            "chain": c,
            "chain_seed": chain_seeds[c],
            "settings": {k: settings[k] for k in sorted(settings) if k != "out"},
        }
        track.write(os.path.join(out, name), _draws_text(draws, header))
        files.append(name)
    manifest = {
        "command": "fit",
        "settings": settings,
        "chain_seeds": chain_seeds,
        "acceptance": {c: results[c].accept_counts for c in range(chains)},
        "n_draws_per_chain": results[0].n_draws,
        "outputs": files,
        "wall_time_s": round(wall, 3),
    }
    track.write(os.path.join(out, "manifest.json"),
                json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def _read_draws_file(path):
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ConfigError("draws file %s lacks its JSON header line" % path)
        header = json.loads(first[1:])
        parts, sels = [], []
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            _, labels, bits, _ = ln.split("\t")
            parts.append([int(x) for x in labels.split(",")])
            sels.append(selection_from_bits(bits))
    if not parts:
        raise ConfigError("draws file %s holds no draws" % path)
    return header, np.asarray(parts, dtype=np.int64), np.asarray(sels, dtype=np.uint8)


def _cmd_summarize(args, track):
    headers, all_parts, all_sels = [], [], []
    for path in args.draws:
        header, parts, sels = _read_draws_file(path)
        headers.append(header)
        all_parts.append(parts)
        all_sels.append(sels)
    samples = headers[0]["samples"]
    units = headers[0]["units"]
    for h in headers[1:]:
        if h["samples"] != samples or h["units"] != units:
            raise ConfigError("draws files to pool disagree on samples or units")
    parts = np.concatenate(all_parts)
    sels = np.concatenate(all_sels)

    zeta = coclustering(parts)
    est = summarize_partition(parts, zeta)
    freqs = selection_frequencies(sels)
    out = args.out
    track.write(os.path.join(out, "zeta.csv"), zeta_to_csv(zeta, samples))
    track.write(os.path.join(out, "partition.csv"), partition_to_csv(est.labels, samples))
    track.write(
        os.path.join(out, "selection_frequencies.csv"), frequencies_to_csv(freqs, units)
    )
    manifest = {
        "command": "summarize",
        "inputs": list(args.draws),
        "n_draws": int(parts.shape[0]),
        "partition_score": est.score,
        "outputs": ["zeta.csv", "partition.csv", "selection_frequencies.csv"],
    }
    track.write(os.path.join(out, "manifest.json"),
                json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_eval(args, track):
    report = {}
    if args.partition or args.truth_labels:
        if not (args.partition and args.truth_labels):
            raise ConfigError("eval needs both --partition and --truth-labels")
        est = _read_csv_map(args.partition, int)
        truth = _read_csv_map(args.truth_labels, lambda v: v)
        missing = set(est) ^ set(truth)
        if missing:
            raise ConfigError("partition/truth sample mismatch: %s" % ", ".join(sorted(missing)[:5]))
        keys = sorted(est)
        report["adjusted_rand"] = adjusted_rand(
            [est[k] for k in keys], [truth[k] for k in keys]
        )
    if args.frequencies or args.truth_features:
        if not (args.frequencies and args.truth_features):
            raise ConfigError("eval needs both --frequencies and --truth-features")
        freqs = _read_csv_map(args.frequencies, float)
        truth = _read_csv_map(args.truth_features, lambda v: bool(int(v)))
        missing = set(freqs) ^ set(truth)
        if missing:
            raise ConfigError("frequency/truth feature mismatch: %s" % ", ".join(sorted(missing)[:5]))
        keys = sorted(freqs)
        report["auc"] = roc_auc([freqs[k] for k in keys], [truth[k] for k in keys])
    if not report:
        raise ConfigError("eval needs a partition pair and/or a frequency pair")
    print(json.dumps(report, sort_keys=True))
    return 0


def main(argv=None):
    parser = _build_parser()
    track = _OutputTracker()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return _cmd_simulate(args, track)
        if args.command == "fit":
            return _cmd_fit(args, track)
        if args.command == "summarize":
            return _cmd_summarize(args, track)
        return _cmd_eval(args, track)
    except (DmclustError, OSError, ValueError) as e:
        track.cleanup()
        print("error: %s" % e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
