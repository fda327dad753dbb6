"""Command-line surface: corpus generation, training, segmentation,
explanation, and evaluation as batch subcommands.

Exit codes: 0 success, 1 runtime/numeric failure, 2 usage error (missing
files, bad flags).  Every subcommand writes a resolved-config snapshot
into its output directory.
"""

import os

# single-threaded BLAS by default: on cgroup-limited machines OpenBLAS
# spawns one spinning thread per host core, which is far slower than
# serial; export the variables yourself to override
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import explain as explain_mod
from .config import RunConfig, resolve_config, write_config_snapshot
from .distill import LossWeights, distill_proxy, train_teacher
from .dsp import log_spectrogram, read_wav
from .errors import ConfigError, NxsegError, SamplingError
from .evalseg import (binarize, format_report, frame_f1, frames_to_segments,
                      read_segments, report_to_csv, segments_to_frames,
                      write_segments)
from .nmf import (DEFAULT_CLASS_MIX, load_dictionary, pretrain_dictionary,
                  save_dictionary, dictionary_to_csv)
from .segnet import (CLASSES, desk_proxy_config, desk_teacher_config,
                     default_proxy_config, default_teacher_config,
                     load_proxy, load_teacher, save_proxy, save_teacher)
from .svgplot import bar_plot, line_plot
from .distill import LabeledSegments


class UsageError(Exception):
    pass


def _require(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _model_configs(preset: str):
    if preset == "desk":
        return desk_teacher_config(), desk_proxy_config()
    return default_teacher_config(), default_proxy_config()


def _overrides(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


# ------------------------------------------------------------ subcommands --

def cmd_gen_corpus(args) -> int:
    cfg = resolve_config(args.config, _overrides(args, (
        "seed", "train_scenes", "val_scenes", "test_scenes",
        "scene_duration_s")))
    out = Path(args.out)
    corpus_mod.generate_corpus(out, cfg.train_scenes, cfg.val_scenes,
                               cfg.test_scenes, seed=cfg.seed,
                               duration_s=cfg.scene_duration_s)
    write_config_snapshot(out, cfg)
    total = cfg.train_scenes + cfg.val_scenes + cfg.test_scenes
    print(f"wrote {total} scenes under {out}")
    return 0


def cmd_train_nmf(args) -> int:
    cfg = resolve_config(args.config, _overrides(args, (
        "seed", "rank", "sparsity", "nmf_iters", "pool_size")))
    out = Path(args.out)
    # per-class pool sized to cover the class mix with a small margin
    need = max(int(round(frac * cfg.pool_size)) + 2
               for frac in DEFAULT_CLASS_MIX.values())
    pool = corpus_mod.dictionary_pool(seed=cfg.seed, per_class=need)
    w = pretrain_dictionary(pool, rank=cfg.rank, pool_size=cfg.pool_size,
                            sparsity=cfg.sparsity, iters=cfg.nmf_iters,
                            seed=cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    save_dictionary(out / "dictionary.nxsg", w)
    dictionary_to_csv(out / "dictionary.csv", w)
    write_config_snapshot(out, cfg)
    print(f"wrote rank-{w.rank} dictionary to {out / 'dictionary.nxsg'}")
    return 0


def cmd_train_teacher(args) -> int:
    cfg = resolve_config(args.config, _overrides(args, (
        "seed", "lr", "batch", "epochs", "patience", "preset",
        "crop_frames")))
    corpus_dir = _require(args.corpus, "corpus directory")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = corpus_mod.load_split(corpus_dir, "train")
    val = corpus_mod.load_split(corpus_dir, "val")
    teacher_cfg, _ = _model_configs(cfg.preset)
    model, history = train_teacher(
        train, epochs=cfg.epochs, lr=cfg.lr, batch=cfg.batch, seed=cfg.seed,
        val=val, patience=cfg.patience, crop_len=cfg.crop_frames,
        cfg=teacher_cfg, log_path=out / "teacher_metrics.csv")
    save_teacher(out / "teacher.nxsg", model)
    write_config_snapshot(out, cfg)
    print(f"teacher: {len(history['train_loss'])} epochs, final train loss "
          f"{history['train_loss'][-1]:.4f}; saved to {out / 'teacher.nxsg'}")
    return 0


def cmd_distill(args) -> int:
    cfg = resolve_config(args.config, _overrides(args, (
        "seed", "lr", "batch", "epochs", "patience", "preset", "alpha",
        "beta", "gamma", "w_trainable", "crop_frames")))
    corpus_dir = _require(args.corpus, "corpus directory")
    teacher_path = _require(args.teacher, "teacher checkpoint")
    dict_path = _require(args.dictionary, "dictionary checkpoint")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    teacher = load_teacher(teacher_path).freeze()
    w = load_dictionary(dict_path)
    train = corpus_mod.load_split(corpus_dir, "train")
    val = corpus_mod.load_split(corpus_dir, "val")
    _, proxy_cfg = _model_configs(cfg.preset)
    proxy, history = distill_proxy(
        teacher, train, w,
        weights=LossWeights(cfg.alpha, cfg.beta, cfg.gamma),
        epochs=cfg.epochs, lr=cfg.lr, batch=cfg.batch,
        w_trainable=cfg.w_trainable, seed=cfg.seed, val=val,
        patience=cfg.patience, crop_len=cfg.crop_frames, cfg=proxy_cfg,
        log_path=out / "distill_metrics.csv")
    save_proxy(out / "proxy.nxsg", proxy)
    write_config_snapshot(out, cfg)
    print(f"student: {len(history['train_loss'])} epochs, final train loss "
          f"{history['train_loss'][-1]:.4f}; saved to {out / 'proxy.nxsg'}")
    return 0


def _load_any_model(path: Path):
    meta_path = Path(str(path) + ".json")
    _require(meta_path, "checkpoint metadata")
    kind = json.loads(meta_path.read_text()).get("type")
    if kind == "teacher":
        return load_teacher(path), "teacher"
    if kind == "proxy":
        return load_proxy(path), "proxy"
    raise UsageError(f"unrecognized model type {kind!r} in {meta_path}")


def _write_probs_csv(path, probs: np.ndarray) -> None:
    np.savetxt(path, probs, delimiter=",", fmt="%.8g")


def cmd_segment(args) -> int:
    cfg = resolve_config(args.config, _overrides(args, (
        "seed", "threshold", "min_dur_s")))
    model_path = _require(args.model, "model checkpoint")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model, kind = _load_any_model(model_path)
    for wav in args.wavs:
        wav = _require(wav, "input wav")
        spec = log_spectrogram(read_wav(wav))
        if kind == "teacher":
            _, probs = model.predict(spec.bins)
        else:
            _, _, probs, _ = model.predict(spec.bins)
        segs = frames_to_segments(binarize(probs, cfg.threshold),
                                  spec.frame_step_s, cfg.min_dur_s)
        write_segments(out / f"{wav.stem}.seg", segs, wav.stem)
        _write_probs_csv(out / f"{wav.stem}_probs.csv", probs)
        print(f"{wav.stem}: wrote hypothesis and per-frame scores")
    write_config_snapshot(out, cfg)
    return 0


def model_dictionary(model):
    from .nmf import Dictionary
    return Dictionary(model.dictionary_matrix())


def cmd_explain(args) -> int:
    cfg = resolve_config(args.config, _overrides(args, (
        "seed", "tau_points", "threshold")))
    model_path = _require(args.model, "model checkpoint")
    wav = _require(args.wav, "input wav")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model, kind = _load_any_model(model_path)
    if kind != "proxy":
        raise UsageError("explanations need a distilled student checkpoint")
    if args.target not in CLASSES:
        raise UsageError(f"--class must be one of {', '.join(CLASSES)}")
    spec = log_spectrogram(read_wav(wav))
    h, _, _, _ = model.predict(spec.bins)
    theta = model.theta_matrix()
    z = explain_mod.pool_embedding(h)
    c = explain_mod.class_index(args.target)
    r = z * theta[:, c]

    # component relevance (local prototype view)
    with open(out / "relevance.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["component", "relevance"])
        writer.writerows((k, f"{v:.8g}") for k, v in enumerate(r))
    bar_plot(out / "relevance.svg", [(args.target, list(r))],
             title=f"component relevance for {args.target} ({wav.stem})",
             xlabel="component", ylabel="relevance")

    # score-vs-tau curves for every class
    taus = explain_mod.tau_grid(r, cfg.tau_points)
    curve = explain_mod.score_curve(h, theta, r, taus)
    with open(out / "scores.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["tau", *CLASSES])
        for tau, row in zip(taus, curve):
            writer.writerow([f"{tau:.8g}", *(f"{v:.8g}" for v in row)])
    line_plot(out / "scores.svg",
              [(name, list(taus), list(curve[:, i]))
               for i, name in enumerate(CLASSES)],
              title=f"score vs relevance threshold ({args.target} ranking)",
              xlabel="tau", ylabel="time-pooled score")

    # frequency projection and rescoring at the chosen threshold
    if args.tau is not None:
        tau_star = args.tau
    elif np.any(r > 0):
        tau_star = float(np.quantile(r[r > 0], 0.9))
    else:
        tau_star = 0.0
    filtered = explain_mod.filter_relevance(r, tau_star)
    freq = explain_mod.project_to_frequency(
        filtered, model_dictionary(model), bin_hz=spec.bin_hz)
    hz = np.arange(freq.x_c.shape[0]) * spec.bin_hz
    with open(out / "frequency.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frequency_hz", "magnitude"])
        writer.writerows((f"{a:.8g}", f"{b:.8g}") for a, b in zip(hz, freq.x_c))
    line_plot(out / "frequency.svg",
              [(f"tau={tau_star:.3g}", list(hz), list(freq.x_c))],
              title=f"frequency projection for {args.target} ({wav.stem})",
              xlabel="frequency (Hz)", ylabel="relevance mass")
    rescored, pooled = explain_mod.rescore_filtered(h, filtered, theta)
    _write_probs_csv(out / "rescored_probs.csv", rescored)
    write_config_snapshot(out, cfg)
    pooled_txt = ", ".join(f"{n}={v:.3f}" for n, v in zip(CLASSES, pooled))
    print(f"tau={tau_star:.4g} keeps {int(np.sum(filtered.values != 0))} "
          f"components; pooled scores: {pooled_txt}")
    return 0


def _collect_seg_files(path: Path) -> dict:
    if path.is_dir():
        merged = {}
        for f in sorted(path.glob("*.seg")):
            merged.update(read_segments(f))
        return merged
    return read_segments(path)


def cmd_eval(args) -> int:
    cfg = resolve_config(args.config, _overrides(args, ("seed",)))
    hyp = _collect_seg_files(_require(args.hyp, "hypothesis"))
    ref = _collect_seg_files(_require(args.ref, "reference"))
    missing = sorted(set(ref) - set(hyp))
    if missing:
        raise UsageError(f"hypothesis missing for file ids: {', '.join(missing)}")
    step = cfg.frame_step_s
    hyp_rows, ref_rows = [], []
    for file_id in sorted(ref):
        spans = [off for seglist in (hyp[file_id], ref[file_id])
                 for segs in seglist.by_class.values() for _, off in segs]
        frames = max(1, int(round(max(spans, default=step) / step)))
        hyp_rows.append(segments_to_frames(hyp[file_id], frames, step))
        ref_rows.append(segments_to_frames(ref[file_id], frames, step))
    pred = np.concatenate(hyp_rows, axis=1)
    gold = np.concatenate(ref_rows, axis=1)
    report = frame_f1(pred, LabeledSegments(gold))
    print(format_report(report, title=f"frame-wise F1 over {len(ref)} file(s)"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_to_csv(report, out / "report.csv")
    write_config_snapshot(out, cfg)
    return 0


# ----------------------------------------------------------------- parser --

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nxseg",
        description="explainable multilabel audio segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("gen-corpus", help="synthesize the labeled corpus")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--train-scenes", dest="train_scenes", type=int)
    p.add_argument("--val-scenes", dest="val_scenes", type=int)
    p.add_argument("--test-scenes", dest="test_scenes", type=int)
    p.add_argument("--duration", dest="scene_duration_s", type=float)
    p.set_defaults(handler=cmd_gen_corpus)

    p = sub.add_parser("train-nmf", help="pretrain the frequency dictionary")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--rank", type=int)
    p.add_argument("--sparsity", type=float)
    p.add_argument("--iters", dest="nmf_iters", type=int)
    p.add_argument("--pool-size", dest="pool_size", type=int)
    p.set_defaults(handler=cmd_train_nmf)

    p = sub.add_parser("train-teacher", help="train the supervised teacher")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--preset", choices=("paper", "desk"))
    p.set_defaults(handler=cmd_train_teacher)

    p = sub.add_parser("distill", help="distill the explainable student")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--teacher", required=True)
    p.add_argument("--dictionary", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--preset", choices=("paper", "desk"))
    p.add_argument("--w-trainable", dest="w_trainable", action="store_const",
                   const=True)
    p.set_defaults(handler=cmd_distill)

    p = sub.add_parser("segment", help="emit hypothesis segments for wavs")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--min-dur", dest="min_dur_s", type=float)
    p.add_argument("wavs", nargs="+", type=Path)
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("explain", help="extract frequency-domain explanations")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--class", dest="target", required=True)
    p.add_argument("--tau", type=float, default=None,
                   help="relevance threshold (default: 90th percentile; "
                   "use --tau=-inf to keep everything)")
    p.add_argument("--tau-points", dest="tau_points", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_explain)

    p = sub.add_parser("eval", help="score hypothesis against reference")
    common(p)
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", default="eval_out")
    p.set_defaults(handler=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (UsageError, FileNotFoundError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (ConfigError, SamplingError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except NxsegError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
