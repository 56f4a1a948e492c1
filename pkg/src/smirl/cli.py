"""Command-line pipeline: synth-gen, sample, redistribute, train, eval,
compare.

Stages communicate through files (corpus directories, sample-set
directories, reward artifacts, report JSON); every command writes a
manifest with its config and the SHA-256 of each input so reruns are
auditable. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import numpy as np

from . import __version__
from . import baselines, data_io, evaluation, features, irl, pipeline, \
    redistribution
from .dynamics import VehicleParams
from .errors import SmirlError
from .types import SamplerConfig, TrainConfig

log = logging.getLogger("smirl")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_inputs(paths) -> dict:
    """Content hashes keyed by basename (keys must not embed run paths)."""
    out = {}

    def record(full):
        key = os.path.basename(full)
        if key in out and out[key] != _sha256(full):
            key = os.path.join(os.path.basename(os.path.dirname(full)), key)
        out[key] = _sha256(full)

    for p in paths:
        if os.path.isdir(p):
            for name in sorted(os.listdir(p)):
                full = os.path.join(p, name)
                if os.path.isfile(full):
                    record(full)
        elif os.path.isfile(p):
            record(p)
    return out


def _write_manifest(out_dir, command: str, config: dict, inputs) -> None:
    manifest = {"command": command, "config": config,
                "inputs": _hash_inputs(inputs), "version": __version__}
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, separators=(",", ":"))


def _parse_theta(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad theta list {text!r}") from exc


def cmd_synth_gen(args) -> int:
    spec = data_io.SyntheticSpec(template=args.scenario,
                                 theta_star=args.theta,
                                 n_demos=args.n_demos,
                                 temperature=1.0 / args.beta,
                                 seed=args.seed,
                                 pos_noise_sigma=args.noise_sigma)
    cfg = SamplerConfig(k_samples=args.k, seed=args.seed)
    result = data_io.generate_synthetic(spec, cfg, VehicleParams())
    gt = {"theta_star": [float(t) for t in result.reward_params.theta],
          "beta": result.reward_params.beta,
          "normalizers": [float(n) for n in result.reward_params.normalizers],
          "feature_names": list(result.reward_params.names),
          "template": args.scenario, "seed": args.seed,
          "noise_sigma": args.noise_sigma, "n_skipped": result.n_skipped}
    data_io.write_corpus(args.out, result.demos, ground_truth=gt)
    _write_manifest(args.out, "synth-gen", _config_of(args), [])
    log.info("wrote %d demonstrations to %s (%d cases skipped)",
             len(result.demos), args.out, result.n_skipped)
    return 0


def cmd_sample(args) -> int:
    geometry = args.geometry or os.path.join(args.demos, "geometry.json")
    demos = data_io.load_tracks(_tracks_path(args.demos), geometry)
    cfg = SamplerConfig(k_samples=args.k, seed=args.seed)
    sets, failures = pipeline.sample_corpus(demos, cfg, VehicleParams(),
                                            jobs=args.jobs)
    for demo_id, err in failures:
        log.error("sampling failed for %s: %s", demo_id, err)
    if not sets:
        log.error("sampling failed for every demonstration")
        return 1
    data_io.write_sample_sets(args.out, sets)
    _write_manifest(args.out, "sample", _config_of(args),
                    [_tracks_path(args.demos), geometry])
    log.info("wrote %d sample sets to %s (%d failures)", len(sets), args.out,
             len(failures))
    return 0


def cmd_redistribute(args) -> int:
    demos, _ = data_io.read_corpus(args.demos)
    sets = data_io.read_sample_sets(args.samples, demos)
    sets = [pipeline.attach_features(ss) for ss in sets]
    norm = irl.fit_union_normalizer(sets)
    out = [redistribution.redistribute(ss, norm, bins_per_dim=args.bins,
                                       seed=args.seed + i)
           for i, ss in enumerate(sets)]
    data_io.write_sample_sets(args.out, out)
    _write_manifest(args.out, "redistribute", _config_of(args),
                    [args.samples])
    return 0


def cmd_train(args) -> int:
    demos, _ = data_io.read_corpus(args.demos)
    cfg = TrainConfig(alpha=args.alpha, epsilon=args.epsilon,
                      l1_lambda=args.l1, max_iters=args.max_iters,
                      seed=args.seed)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)) or ".",
                exist_ok=True)
    inputs = [_tracks_path(args.demos)]
    if args.method == "smirl":
        if not args.samples:
            log.error("--samples is required for --method smirl")
            return 2
        by_id = {d.id: d for d in demos}
        sets = data_io.read_sample_sets(args.samples, demos)
        demos = [by_id[ss.demo_id] for ss in sets]
        theta, state, rp = pipeline.train_smirl(
            demos, sets, cfg, bins=args.bins,
            redistribute=args.bins > 0)
        inputs.append(args.samples)
    else:
        theta, state = baselines.train_baseline(
            args.method, demos, cfg, VehicleParams(),
            forward_opt_cfg=baselines.ForwardOptConfig(
                iterations=args.forward_iters))
        names = features.NONINTERACTIVE_FEATURES \
            if demos[0].scenario.other_agent is None else features.FEATURE_NAMES
        norm = baselines._demo_normalizer(demos, features.DEFAULT_TAU_PREDICT)
        from .types import RewardParams
        rp = RewardParams(theta=theta, beta=1.0,
                          normalizers=norm.max_per_feature, names=norm.names)
    cfg_hash = irl.config_hash(_config_of(args))
    irl.write_reward_artifact(args.out, rp, converged=state.converged,
                              cfg_hash=cfg_hash, method=args.method)
    _write_log(args.out + ".log.json", state)
    _write_manifest(os.path.dirname(os.path.abspath(args.out)) or ".",
                    "train", _config_of(args), inputs)
    if not state.converged:
        print(f"warning: training did not converge "
              f"(gap {state.gap:.3g} after {state.iteration} iterations)",
              file=sys.stderr)
    return 0


def _write_log(path, state) -> None:
    payload = {"converged": state.converged, "iterations": state.iteration,
               "history": [{"k": r.k, "gap": r.gap,
                            "log_likelihood": r.log_likelihood}
                           for r in state.history]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def cmd_eval(args) -> int:
    demos, _ = data_io.read_corpus(args.test_demos)
    sets = data_io.read_sample_sets(args.samples, demos)
    by_id = {d.id: d for d in demos}
    demos = [by_id[ss.demo_id] for ss in sets]
    sets = [pipeline.attach_features(ss) for ss in sets]
    if args.bins > 0:
        # method-neutral re-distribution of the shared evaluation sets
        norm = irl.fit_union_normalizer(sets)
        sets = [redistribution.redistribute(ss, norm, bins_per_dim=args.bins,
                                            seed=args.seed + i)
                for i, ss in enumerate(sets)]
    rp, meta = irl.read_reward_artifact(args.theta)
    method = args.method_name or meta.get("method", "method")
    report = evaluation.evaluate_method(method, demos, sets, rp)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, separators=(",", ":"))
    _write_manifest(os.path.dirname(os.path.abspath(args.out)) or ".",
                    "eval", _config_of(args),
                    [args.theta, args.samples, _tracks_path(args.test_demos)])
    log.info("run %s: sum log-likelihood %.3f, mean MED %.3f m", method,
             report.sum_log_likelihood, report.mean_med)
    return 0


def cmd_compare(args) -> int:
    reports = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            reports.append(evaluation.EvalReport.from_dict(json.load(fh)))
    try:
        cmp = evaluation.compare(reports)
    except SmirlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = evaluation.render_comparison(cmp)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(cmp.to_dict(), fh, sort_keys=True,
                      separators=(",", ":"))
        _write_manifest(os.path.dirname(os.path.abspath(args.out)) or ".",
                        "compare", _config_of(args), list(args.reports))
    return 0


def _tracks_path(demos_dir: str) -> str:
    if os.path.isdir(demos_dir):
        return os.path.join(demos_dir, "tracks.csv")
    return demos_dir


_PATH_FLAGS = {"out", "demos", "samples", "geometry", "theta", "test_demos",
               "reports"}


def _config_of(args) -> dict:
    # path flags are recorded by basename; content identity lives in the
    # manifest's input hashes, and absolute paths would break rerun
    # comparisons across working directories
    out = {}
    for k, v in vars(args).items():
        if k == "func":
            continue
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif k in _PATH_FLAGS and isinstance(v, str):
            v = os.path.basename(os.path.normpath(v))
        elif k in _PATH_FLAGS and isinstance(v, (list, tuple)):
            v = [os.path.basename(os.path.normpath(p)) for p in v]
        out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smirl",
                                description="Sampling-based maximum-entropy "
                                            "IRL for driving rewards")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("synth-gen", help="generate a synthetic corpus")
    g.add_argument("--scenario", required=True,
                   choices=["straight", "curve", "roundabout-merge"])
    g.add_argument("--n-demos", type=int, default=20)
    g.add_argument("--theta", type=_parse_theta, required=True,
                   help="comma-separated ground-truth weights")
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise-sigma", type=float, default=0.0)
    g.add_argument("--k", type=int, default=200)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_synth_gen)

    s = sub.add_parser("sample", help="generate sample sets per demo")
    s.add_argument("--demos", required=True)
    s.add_argument("--geometry", default=None)
    s.add_argument("--k", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    r = sub.add_parser("redistribute", help="re-balance sample sets in "
                                            "feature space")
    r.add_argument("--demos", required=True)
    r.add_argument("--samples", required=True)
    r.add_argument("--bins", type=int, default=redistribution.DEFAULT_BINS)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_redistribute)

    t = sub.add_parser("train", help="train reward weights")
    t.add_argument("--method", required=True,
                   choices=["smirl", "cioc", "optirl"])
    t.add_argument("--demos", required=True)
    t.add_argument("--samples", default=None)
    t.add_argument("--alpha", type=float, default=1.0)
    t.add_argument("--epsilon", type=float, default=1e-3)
    t.add_argument("--l1", type=float, default=1e-3)
    t.add_argument("--bins", type=int, default=redistribution.DEFAULT_BINS,
                   help="redistribution bins per dimension; 0 disables")
    t.add_argument("--max-iters", type=int, default=1000)
    t.add_argument("--forward-iters", type=int, default=500)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a reward artifact")
    e.add_argument("--theta", required=True)
    e.add_argument("--test-demos", required=True)
    e.add_argument("--samples", required=True)
    e.add_argument("--method-name", default=None)
    e.add_argument("--bins", type=int, default=redistribution.DEFAULT_BINS,
                   help="re-distribute evaluation sets; 0 disables")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="compare evaluation reports")
    c.add_argument("--reports", nargs="+", required=True)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SmirlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
