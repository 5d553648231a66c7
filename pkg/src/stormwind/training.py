"""Training: predictor pre-training, joint stochastic-regeneration training,
EMA tracking and early stopping.

A dataset is a sequence of ``[2, F, T]`` complex arrays holding the warped
(clean, noisy) spectrogram pair of one utterance.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .errors import NumericalDivergenceError, ParameterError, TrainingDivergedError
from .losses import WEIGHTINGS, dsm_loss, predictor_mse, storm_loss
from .nets import flat_parameters, load_flat_parameters
from .sde import OuveParams

log = logging.getLogger(__name__)

MODES = ("storm", "generative", "predictive")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    batch: int = 4
    ema_decay: float = 0.999
    ema_warmup: bool = True
    patience: int = 10
    alpha: float = 1.0
    max_epochs: int = 500
    pretrain_epochs: int = 500
    frames: int = 256
    mode: str = "storm"
    dsm_weighting: str = "sigma2"
    validation_seed: int = 12345

    def __post_init__(self):
        if not 0.0 <= self.ema_decay < 1.0:
            raise ParameterError("ema_decay must lie in [0, 1)")
        if self.alpha < 0:
            raise ParameterError("alpha must be non-negative")
        if self.batch < 1 or self.frames < 1:
            raise ParameterError("batch and frames must be >= 1")
        if self.patience < 1:
            raise ParameterError("patience must be >= 1")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")
        if self.dsm_weighting not in WEIGHTINGS:
            raise ParameterError(f"dsm_weighting must be one of {WEIGHTINGS}")


def ema_update(ema, current, decay: float):
    """``decay * ema + (1 - decay) * current``."""
    ema = np.asarray(ema)
    current = np.asarray(current)
    if ema.shape != current.shape:
        raise ParameterError(f"EMA length mismatch: {ema.shape} vs {current.shape}")
    return decay * ema + (1.0 - decay) * current


def effective_decay(decay: float, n_updates: int, warmup: bool) -> float:
    if not warmup:
        return decay
    return min(decay, (1.0 + n_updates) / (10.0 + n_updates))


@dataclass
class TrainState:
    """Everything needed to continue training bit-for-bit."""

    phase: str
    epoch: int = 0
    best: float = float("inf")
    bad_epochs: int = 0
    done: bool = False
    ema: dict = field(default_factory=dict)
    ema_updates: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    optimizer: dict | None = None
    rng_state: dict | None = None


@dataclass
class TrainResult:
    params: dict
    ema: dict
    history: list
    state: TrainState


def _phases(mode: str) -> list[str]:
    return {"storm": ["pretrain", "joint"], "generative": ["score"], "predictive": ["pretrain"]}[mode]


def _crop_batch(items, frames: int, rng: np.random.Generator | None) -> np.ndarray:
    out = []
    for it in items:
        n = it.shape[-1]
        if n >= frames:
            off = int(rng.integers(0, n - frames + 1)) if rng is not None else (n - frames) // 2
            out.append(it[..., off : off + frames])
        else:
            out.append(np.pad(it, [(0, 0)] * (it.ndim - 1) + [(0, frames - n)]))
    return np.stack(out)


class Trainer:
    def __init__(
        self,
        cfg: TrainConfig,
        params: OuveParams,
        score=None,
        predictor=None,
        rng: np.random.Generator | None = None,
        state: TrainState | None = None,
    ):
        self.cfg = cfg
        self.p = params
        self.models = {}
        if cfg.mode in ("storm", "predictive"):
            if predictor is None:
                raise ParameterError(f"mode {cfg.mode!r} needs a predictor")
            self.models["predictor"] = predictor
        if cfg.mode in ("storm", "generative"):
            if score is None:
                raise ParameterError(f"mode {cfg.mode!r} needs a score model")
            self.models["score"] = score
        self.rng = rng if rng is not None else np.random.default_rng()
        self.phases = _phases(cfg.mode)
        if state is None:
            state = TrainState(phase=self.phases[0])
            for name, m in self.models.items():
                state.ema[name] = flat_parameters(m)
                state.ema_updates[name] = 0
        else:
            if state.rng_state is not None:
                self.rng.bit_generator.state = copy.deepcopy(state.rng_state)
        self.state = state
        self.optimizer = self._make_optimizer()
        if state.optimizer is not None:
            self.optimizer.load_state_dict(state.optimizer)

    # -- plumbing ---------------------------------------------------------
    def _trainable(self) -> list[str]:
        if self.state.phase == "pretrain":
            return ["predictor"]
        if self.state.phase == "score":
            return ["score"]
        return ["predictor", "score"]

    def _make_optimizer(self):
        params = [q for name in self._trainable() for q in self.models[name].parameters()]
        return torch.optim.Adam(params, lr=self.cfg.learning_rate, betas=(0.9, 0.999), eps=1e-8)

    def _dtype(self):
        m = next(iter(self.models.values()))
        p = next(m.parameters())
        return torch.complex128 if p.dtype == torch.float64 else torch.complex64

    def _loss(self, batch: np.ndarray, rng: np.random.Generator):
        t = torch.as_tensor(batch).to(self._dtype())
        x0, y = t[:, 0], t[:, 1]
        phase = self.state.phase
        if phase == "pretrain":
            return predictor_mse(self.models["predictor"], x0, y)
        if phase == "score":
            return dsm_loss(self.models["score"], x0, y, self.p, rng, weighting=self.cfg.dsm_weighting).loss
        return storm_loss(
            self.models["score"],
            self.models["predictor"],
            x0,
            y,
            self.p,
            self.cfg.alpha,
            rng,
            weighting=self.cfg.dsm_weighting,
        ).loss

    def _update_ema(self):
        for name in self._trainable():
            n = self.state.ema_updates[name]
            decay = effective_decay(self.cfg.ema_decay, n, self.cfg.ema_warmup)
            self.state.ema[name] = ema_update(self.state.ema[name], flat_parameters(self.models[name]), decay).astype(
                self.state.ema[name].dtype
            )
            self.state.ema_updates[name] = n + 1

    def snapshot(self) -> TrainState:
        st = copy.deepcopy(self.state)
        st.optimizer = copy.deepcopy(self.optimizer.state_dict())
        st.rng_state = copy.deepcopy(self.rng.bit_generator.state)
        return st

    def current_params(self) -> dict:
        return {name: flat_parameters(m) for name, m in self.models.items()}

    # -- loops ------------------------------------------------------------
    def train_epoch(self, dataset) -> float:
        order = self.rng.permutation(len(dataset))
        losses = []
        for start in range(0, len(order), self.cfg.batch):
            items = [dataset[i] for i in order[start : start + self.cfg.batch]]
            batch = _crop_batch(items, self.cfg.frames, self.rng)
            self.optimizer.zero_grad()
            loss = self._loss(batch, self.rng)
            loss.backward()
            self.optimizer.step()
            self._update_ema()
            losses.append(float(loss.detach()))
        return float(np.mean(losses))

    def validate(self, dataset) -> float:
        """Mean loss over ``dataset`` with EMA weights and a fixed random stream."""
        rng = np.random.default_rng(self.cfg.validation_seed)
        saved = self.current_params()
        for name, m in self.models.items():
            load_flat_parameters(m, self.state.ema[name])
        try:
            losses = []
            with torch.no_grad():
                for start in range(0, len(dataset), self.cfg.batch):
                    batch = _crop_batch(dataset[start : start + self.cfg.batch], self.cfg.frames, None)
                    losses.append(float(self._loss(batch, rng)))
        finally:
            for name, m in self.models.items():
                load_flat_parameters(m, saved[name])
        return float(np.mean(losses))

    def _max_epochs(self) -> int:
        return self.cfg.pretrain_epochs if self.state.phase == "pretrain" and self.cfg.mode == "storm" else self.cfg.max_epochs

    def _advance_phase(self):
        idx = self.phases.index(self.state.phase)
        if idx + 1 == len(self.phases):
            self.state.done = True
            return
        self.state.phase = self.phases[idx + 1]
        self.state.epoch = 0
        self.state.best = float("inf")
        self.state.bad_epochs = 0
        self.optimizer = self._make_optimizer()

    def run(self, dataset, val_dataset=None, on_epoch=None) -> TrainResult:
        if len(dataset) == 0:
            raise ParameterError("training dataset is empty")
        last_good = self.snapshot()
        while not self.state.done:
            if self.state.epoch >= self._max_epochs():
                self._advance_phase()
                continue
            try:
                train_loss = self.train_epoch(dataset)
                if not np.isfinite(train_loss):
                    raise NumericalDivergenceError("non-finite training loss")
                val_loss = self.validate(val_dataset) if val_dataset else train_loss
            except NumericalDivergenceError as exc:
                raise TrainingDivergedError(
                    f"training diverged in phase {self.state.phase!r} epoch {self.state.epoch}: {exc}",
                    last_good=last_good,
                    tau=exc.tau,
                    sigma=exc.sigma,
                ) from exc
            st = self.state
            st.epoch += 1
            st.history.append(
                {"phase": st.phase, "epoch": st.epoch, "train_loss": train_loss, "val_loss": val_loss}
            )
            log.info("phase=%s epoch=%d train=%.5f val=%.5f", st.phase, st.epoch, train_loss, val_loss)
            if val_loss < st.best:
                st.best = val_loss
                st.bad_epochs = 0
            else:
                st.bad_epochs += 1
            if st.bad_epochs >= self.cfg.patience:
                log.info("early stopping phase %s after %d epochs", st.phase, st.epoch)
                self._advance_phase()
            last_good = self.snapshot()
            if on_epoch is not None:
                on_epoch(self)
        final = self.snapshot()
        return TrainResult(self.current_params(), dict(final.ema), list(final.history), final)


def train(
    score,
    predictor,
    dataset,
    cfg: TrainConfig,
    p: OuveParams,
    rng: np.random.Generator,
    val_dataset=None,
    state: TrainState | None = None,
    on_epoch=None,
) -> TrainResult:
    """Train according to ``cfg.mode``; see :class:`Trainer`."""
    return Trainer(cfg, p, score=score, predictor=predictor, rng=rng, state=state).run(
        dataset, val_dataset, on_epoch=on_epoch
    )


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
