"""Corpus synthesis (clean/noisy WAV pairs + JSONL manifest) and loading."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import read_wav, write_wav
from .corruption import CorruptionDistributions, CorruptionParams, corrupt, sample_corruption_params
from .errors import AudioFormatError, ParameterError
from .spectral import DEFAULT_SAMPLE_RATE, StftConfig, Waveform, normalize_by_noisy_max, stft, warp
from .speech import synthesize_toy_speech
from .wind import sample_airflow_profile, synthesize_wind_noise

MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class SynthesisConfig:
    n_utterances: int = 200
    duration: float = 2.0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    min_gusts: int = 1
    max_gusts: int = 10
    speech_dir: str | None = None
    noise_dir: str | None = None
    recorded_fraction: float = 0.5
    corruption: CorruptionDistributions = field(default_factory=CorruptionDistributions)

    def __post_init__(self):
        if self.n_utterances < 1:
            raise ParameterError("n_utterances must be >= 1")
        if self.duration <= 0:
            raise ParameterError("duration must be positive")
        if not 1 <= self.min_gusts <= self.max_gusts:
            raise ParameterError("need 1 <= min_gusts <= max_gusts")
        if not 0.0 <= self.recorded_fraction <= 1.0:
            raise ParameterError("recorded_fraction must lie in [0, 1]")


def _fit_length(x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    if x.shape[0] >= n:
        off = int(rng.integers(0, x.shape[0] - n + 1))
        return x[off : off + n]
    reps = -(-n // x.shape[0])
    return np.tile(x, reps)[:n]


def synthesize_utterance(
    index: int,
    seed_seq: np.random.SeedSequence,
    cfg: SynthesisConfig,
    speech_pool: list | None = None,
    noise_pool: list | None = None,
) -> tuple[Waveform, Waveform, dict]:
    """Build one (clean, noisy, manifest record) triple from its own seed."""
    rng = np.random.default_rng(seed_seq)
    n = int(round(cfg.duration * cfg.sample_rate))
    if speech_pool:
        src = speech_pool[int(rng.integers(len(speech_pool)))]
        speech = Waveform(_fit_length(src.samples, n, rng), cfg.sample_rate)
    else:
        speech = synthesize_toy_speech(cfg.duration, cfg.sample_rate, rng)
    record = {"id": f"utt{index:05d}"}
    if noise_pool and rng.random() < cfg.recorded_fraction:
        k = int(rng.integers(len(noise_pool)))
        noise = Waveform(_fit_length(noise_pool[k][1].samples, n, rng), cfg.sample_rate)
        record["noise_source"] = noise_pool[k][0]
        record["gusts"] = None
    else:
        profile = sample_airflow_profile(cfg.duration, rng, cfg.min_gusts, cfg.max_gusts)
        noise = synthesize_wind_noise(profile, cfg.sample_rate, rng)
        record["noise_source"] = "synthetic"
        record["gusts"] = len(profile.gusts)
    params = sample_corruption_params(rng, cfg.corruption)
    noisy, clean = corrupt(speech, noise, params)
    record.update(params.to_record())
    record["clean"] = f"clean/{record['id']}.wav"
    record["noisy"] = f"noisy/{record['id']}.wav"
    return clean, noisy, record


def _synth_job(args):
    return synthesize_utterance(*args)


def synthesize_corpus(out_dir, cfg: SynthesisConfig, seed: int, jobs: int = 1) -> list[dict]:
    """Write ``clean/``, ``noisy/`` and ``manifest.jsonl`` under ``out_dir``.

    Every utterance draws from its own child seed, so the corpus does not
    depend on ``jobs``.
    """
    out = Path(out_dir)
    speech_pool = [read_wav(p, cfg.sample_rate) for p in sorted(Path(cfg.speech_dir).glob("*.wav"))] if cfg.speech_dir else None
    noise_pool = (
        [(p.name, read_wav(p, cfg.sample_rate)) for p in sorted(Path(cfg.noise_dir).glob("*.wav"))]
        if cfg.noise_dir
        else None
    )
    if cfg.speech_dir and not speech_pool:
        raise AudioFormatError(f"no WAV files in speech_dir {cfg.speech_dir}")
    children = np.random.SeedSequence(seed).spawn(cfg.n_utterances)
    tasks = [(i, children[i], cfg, speech_pool, noise_pool) for i in range(cfg.n_utterances)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_synth_job, tasks))
    else:
        results = [_synth_job(t) for t in tasks]
    records = []
    for clean, noisy, record in results:
        write_wav(out / record["clean"], clean)
        write_wav(out / record["noisy"], noisy)
        records.append(record)
    write_manifest(out / MANIFEST_NAME, records)
    return records


def write_manifest(path, records) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def read_manifest(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def load_pairs(data_dir) -> list[tuple[str, Waveform, Waveform]]:
    """(id, clean, noisy) for every manifest entry, in manifest order."""
    root = Path(data_dir)
    records = read_manifest(root / MANIFEST_NAME)
    return [(r["id"], read_wav(root / r["clean"]), read_wav(root / r["noisy"])) for r in records]


def corruption_of(record: dict) -> CorruptionParams:
    return CorruptionParams.from_record(record)


def prepare_pair(
    clean: Waveform,
    noisy: Waveform,
    stft_cfg: StftConfig | None = None,
    exponent: float = 0.5,
    scale: float = 1.0,
    dtype=np.complex64,
) -> np.ndarray:
    """Normalize by the noisy peak, analyse, warp; returns ``[2, F, T]`` (clean, noisy)."""
    x, y, _ = normalize_by_noisy_max(clean, noisy)
    xs = warp(stft(x, stft_cfg), exponent, scale).bins
    ys = warp(stft(y, stft_cfg), exponent, scale).bins
    return np.stack([xs, ys]).astype(dtype)
