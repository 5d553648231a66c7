"""Command-line interface: ``stormwind {synthesize,verify-sde,train,enhance,evaluate}``.

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 numerical failure. ``STORMWIND_DATA`` sets the default corpus directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .errors import (
    AudioFormatError,
    CheckpointError,
    ConfigError,
    DegenerateInputError,
    LengthError,
    NormalizationError,
    NumericalDivergenceError,
    ParameterError,
    ShapeError,
    SpectrogramStateError,
)

log = logging.getLogger("stormwind")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
DATA_ENV = "STORMWIND_DATA"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _data_root(arg):
    root = arg or os.environ.get(DATA_ENV)
    if not root:
        raise UsageError(f"no data directory given (use --data or set {DATA_ENV})")
    return Path(root)


def _set_threads(jobs: int):
    import torch

    torch.set_num_threads(max(1, jobs))


# -- synthesize ---------------------------------------------------------------


def cmd_synthesize(args) -> int:
    from .config import load_config
    from .data import synthesize_corpus

    cfg = load_config(args.config)
    synth = cfg.synthesis
    overrides = {}
    if args.n is not None:
        overrides["n_utterances"] = args.n
    if args.speech_dir is not None:
        overrides["speech_dir"] = args.speech_dir
    if args.noise_dir is not None:
        overrides["noise_dir"] = args.noise_dir
    if overrides:
        synth = replace(synth, **overrides)
    out = _data_root(args.out)
    records = synthesize_corpus(out, synth, args.seed, jobs=args.jobs)
    print(f"wrote {len(records)} utterances to {out}")
    return EXIT_OK


# -- verify-sde -----------------------------------------------------------------


def cmd_verify_sde(args) -> int:
    from .config import load_config
    from .verification import format_report, run_checks

    cfg = load_config(args.config)
    p = cfg.baseline_sde if args.baseline else cfg.sde
    checks = run_checks(p, args.seed, tolerance_scale=args.tolerance_scale, n_paths=args.paths)
    report = format_report(checks, p, args.seed)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(report)
    sys.stdout.write(report)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERICAL


# -- train --------------------------------------------------------------------------


def _load_dataset(root: Path, cfg, jobs: int):
    from .data import load_pairs, prepare_pair

    pairs = load_pairs(root)
    if not pairs:
        raise AudioFormatError(f"{root}: manifest lists no utterances")
    fe = cfg.frontend
    specs = [prepare_pair(c, n, cfg.stft, fe.exponent, fe.scale) for _, c, n in pairs]
    n_val = int(round(cfg.split.validation_fraction * len(specs)))
    if n_val >= len(specs):
        raise ConfigError("validation_fraction leaves no training data")
    return specs[: len(specs) - n_val], specs[len(specs) - n_val :]


def _build_models(cfg, mode: str, rng):
    from .nets import TinyPredictor, TinyScoreNet, init_parameters

    m = cfg.model
    models = {}
    if mode in ("storm", "predictive"):
        models["predictor"] = TinyPredictor(m.predictor_channels, m.predictor_dilations)
    if mode in ("storm", "generative"):
        models["score"] = TinyScoreNet(2 if mode == "storm" else 1, m.channels, m.dilations, m.emb_dim)
    for name in sorted(models):
        init_parameters(models[name], rng)
    return models


def _run_meta(cfg, mode: str, seed: int) -> dict:
    from .config import config_to_dict

    d = config_to_dict(cfg)
    sde = d["baseline_sde"] if mode == "generative" else d["sde"]
    sampler = d["baseline_sampler"] if mode == "generative" else d["sampler"]
    return {
        "mode": mode,
        "seed": seed,
        "sde": sde,
        "sampler": sampler,
        "frontend": d["frontend"],
        "train": d["train"],
        "model": d["model"],
        "split": d["split"],
    }


def cmd_train(args) -> int:
    from .checkpoint import load_checkpoint, save_checkpoint
    from .config import DataSplitConfig, FrontEndConfig, RunConfig, load_config
    from .nets import build_model, load_flat_parameters
    from .sde import OuveParams
    from .training import TrainConfig, Trainer

    _set_threads(args.jobs)
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        if ckpt.state is None:
            raise CheckpointError(f"{args.resume} holds no training state")
        meta = ckpt.meta
        cfg = RunConfig(frontend=FrontEndConfig(**meta["frontend"]), split=DataSplitConfig(**meta["split"]))
        tc = TrainConfig(**meta["train"])
        models = {}
        for name, arch in ckpt.archs.items():
            models[name] = build_model(arch)
            load_flat_parameters(models[name], ckpt.params[name])
        rng = np.random.default_rng()
        state = ckpt.state
    else:
        cfg = load_config(args.config)
        tc = cfg.train
        if args.mode:
            tc = replace(tc, mode=args.mode)
        rng = np.random.default_rng(args.seed)
        models = _build_models(cfg, tc.mode, rng)
        meta = _run_meta(cfg, tc.mode, args.seed)
        meta["train"] = asdict(tc)
        state = None
    p = OuveParams(**meta["sde"])
    train_set, val_set = _load_dataset(_data_root(args.data), cfg, args.jobs)
    trainer = Trainer(tc, p, score=models.get("score"), predictor=models.get("predictor"), rng=rng, state=state)
    out = Path(args.checkpoint_out)
    archs = {k: m.arch for k, m in models.items()}

    def save(tr):
        st = tr.snapshot()
        save_checkpoint(out, archs, tr.current_params(), dict(st.ema), st, meta)

    epochs_run = [0]

    class _Stop(Exception):
        pass

    def on_epoch(tr):
        save(tr)
        epochs_run[0] += 1
        if args.stop_after is not None and epochs_run[0] >= args.stop_after:
            raise _Stop

    try:
        trainer.run(train_set, val_set or None, on_epoch=on_epoch)
    except _Stop:
        print(f"stopped after {epochs_run[0]} epochs; resume with --resume {out}")
        return EXIT_OK
    save(trainer)
    h = trainer.state.history
    print(f"training finished after {len(h)} epochs; checkpoint {out}")
    return EXIT_OK


# -- enhance ------------------------------------------------------------------------

_WORKER_CACHE = {}


def _enhancer(checkpoint: str, mode: str, steps):
    key = (checkpoint, mode, steps)
    if key in _WORKER_CACHE:
        return _WORKER_CACHE[key]
    from .checkpoint import load_checkpoint
    from .nets import NetworkPredictor, NetworkScore
    from .pipeline import FrontEnd
    from .sde import OuveParams, SamplerConfig
    from .spectral import StftConfig

    ckpt = load_checkpoint(checkpoint)
    meta = ckpt.meta
    fe = meta.get("frontend", {})
    front = FrontEnd(StftConfig(fe.get("window_len", 510), fe.get("hop", 128)), fe.get("exponent", 0.5), fe.get("scale", 1.0))
    p = OuveParams(**meta["sde"])
    sampler = SamplerConfig(**meta["sampler"])
    if mode == "generative" and meta.get("mode") != "generative":
        raise CheckpointError("generative enhancement needs a checkpoint trained with --mode generative")
    if steps is not None:
        sampler = replace(sampler, n_steps=steps)
    predictor = NetworkPredictor(ckpt.model("predictor")) if mode in ("storm", "predictive") else None
    score = NetworkScore(ckpt.model("score")) if mode in ("storm", "generative") else None
    if mode == "storm" and ckpt.archs["score"]["n_cond"] != 2:
        raise CheckpointError("storm enhancement needs a score model conditioned on [y, D(y)]")
    _WORKER_CACHE[key] = (front, p, sampler, predictor, score)
    return _WORKER_CACHE[key]


def _enhance_one(task):
    from .audio_io import read_wav, write_wav
    from .pipeline import enhance_generative, enhance_predictive, enhance_storm

    src, dst, checkpoint, mode, steps, seed_seq = task
    _set_threads(1)
    front, p, sampler, predictor, score = _enhancer(checkpoint, mode, steps)
    y = read_wav(src)
    rng = np.random.default_rng(seed_seq)
    if mode == "storm":
        out = enhance_storm(y, predictor, score, p, sampler, rng, front)
    elif mode == "generative":
        out = enhance_generative(y, score, p, sampler, rng, front)
    else:
        out = enhance_predictive(y, predictor, front)
    write_wav(dst, out)
    return str(dst)


def _input_files(path: Path) -> list[Path]:
    if path.is_file():
        return [path]
    files = sorted(path.glob("*.wav"))
    if not files and (path / "noisy").is_dir():
        files = sorted((path / "noisy").glob("*.wav"))
    if not files:
        raise AudioFormatError(f"no WAV files found in {path}")
    return files


def cmd_enhance(args) -> int:
    _WORKER_CACHE.clear()
    files = _input_files(Path(args.inp))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(args.seed).spawn(len(files))
    tasks = [(f, out / f.name, args.checkpoint, args.mode, args.steps, seeds[i]) for i, f in enumerate(files)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            list(ex.map(_enhance_one, tasks))
    else:
        for t in tasks:
            _enhance_one(t)
    print(f"enhanced {len(files)} files into {out}")
    return EXIT_OK


# -- evaluate -------------------------------------------------------------------------

METRICS = ("si_sdr", "snr", "lsd")


def _score_file(task):
    from .audio_io import read_wav
    from .metrics import log_spectral_distance, si_sdr, snr

    uid, ref_path, est_path = task
    ref = read_wav(ref_path)
    est = read_wav(est_path)
    return {"id": uid, "si_sdr": si_sdr(ref, est), "snr": snr(ref, est), "lsd": log_spectral_distance(ref, est)}


def cmd_evaluate(args) -> int:
    from .data import MANIFEST_NAME, read_manifest
    from .metrics import summarize

    root = _data_root(args.data)
    records = read_manifest(root / MANIFEST_NAME)
    est_dir = Path(args.est) if args.est else None
    tasks = []
    for r in records:
        est = est_dir / Path(r["noisy"]).name if est_dir else root / r["noisy"]
        if not est.exists():
            raise AudioFormatError(f"missing estimate {est}")
        tasks.append((r["id"], root / r["clean"], est))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_score_file, tasks))
    else:
        rows = [_score_file(t) for t in tasks]
    summary = {"id": "__summary__", "n": len(rows)}
    for m in METRICS:
        mean, std = summarize(r[m] for r in rows)
        summary[m] = {"mean": mean, "std": std}
    lines = [json.dumps(r, sort_keys=True) for r in rows] + [json.dumps(summary, sort_keys=True)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    label = str(est_dir) if est_dir else "noisy input"
    print(f"{label}: {len(rows)} files")
    print(f"{'metric':<8} {'mean':>9} {'std':>9}")
    for m in METRICS:
        print(f"{m:<8} {summary[m]['mean']:9.3f} {summary[m]['std']:9.3f}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="stormwind", description="Wind-noise corpus synthesis, diffusion self-checks, training and enhancement.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes/threads; 1 guarantees determinism")
        p.add_argument("--config", help="INI file overriding built-in defaults")

    p = sub.add_parser("synthesize", help="generate a paired clean/noisy corpus and manifest")
    common(p)
    p.add_argument("--out", help=f"output directory (default ${DATA_ENV})")
    p.add_argument("--n", type=int, help="number of utterances (overrides the config)")
    p.add_argument("--speech-dir", help="directory of clean speech WAVs to use instead of toy speech")
    p.add_argument("--noise-dir", help="directory of recorded wind-noise WAVs to mix with synthetic noise")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify-sde", help="Monte-Carlo and closed-form checks of the diffusion process")
    common(p)
    p.add_argument("--out", help="also write the report to this file")
    p.add_argument("--baseline", action="store_true", help="check the generative-baseline SDE parameters")
    p.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every tolerance (0 forces failure)")
    p.add_argument("--paths", type=int, default=10_000, help="Monte-Carlo trajectories per check")
    p.set_defaults(func=cmd_verify_sde)

    p = sub.add_parser("train", help="train predictor and/or score network")
    common(p)
    p.add_argument("--data", help=f"corpus directory (default ${DATA_ENV})")
    p.add_argument("--checkpoint-out", required=True, help="checkpoint path, rewritten after every epoch")
    p.add_argument("--mode", choices=["storm", "generative", "predictive"], help="training mode (overrides the config)")
    p.add_argument("--resume", help="continue from this checkpoint (config is taken from it)")
    p.add_argument("--stop-after", type=int, help="stop after this many epochs in this invocation")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance noisy WAV files")
    common(p)
    p.add_argument("--mode", choices=["storm", "generative", "predictive"], default="storm")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="inp", required=True, help="WAV file or directory (a corpus directory uses noisy/)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--steps", type=int, help="reverse-diffusion steps N (overrides the checkpoint setting)")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="SI-SDR, SNR and log-spectral distance against the clean references")
    common(p)
    p.add_argument("--data", help=f"corpus directory with manifest (default ${DATA_ENV})")
    p.add_argument("--est", help="directory of enhanced WAVs named like the noisy files (default: score the noisy input)")
    p.add_argument("--out", help="write per-file and summary records (JSON lines) here")
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ConfigError, ParameterError) as exc:
        print(f"stormwind: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        AudioFormatError,
        CheckpointError,
        LengthError,
        ShapeError,
        DegenerateInputError,
        SpectrogramStateError,
        OSError,
        KeyError,
    ) as exc:
        print(f"stormwind: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalDivergenceError, NormalizationError) as exc:
        print(f"stormwind: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
