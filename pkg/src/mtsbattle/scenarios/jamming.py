"""Packet reception under jamming, with surfaces on both sides of the jammer link.

Bob receives Y = X H_AB + J H_EB + N. Eve's surface B shapes the jamming
channel H_EB toward Bob, Alice's surface A shapes it back. A packet is
received iff its SJNR clears a fixed threshold; per-packet Rician jitter
on both channels keeps the transition from being a hard step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..battle.engine import PartySetup, channel_measure, optimize_single
from ..battle.optimizers import ObjectiveSense
from ..errors import DomainError
from ..physics.channel import ChannelModel, effective_channel
from ..physics.mathcore import FloatArray, RandomStream, db, sample_complex_gaussian, undb
from ..physics.metasurface import SurfaceConfig, random_config

logger = logging.getLogger(__name__)

DEFAULT_MARGIN_DB = 16.0
DEFAULT_JITTER_K = 10.0


@dataclass(frozen=True, eq=False)
class JammingLink:
    h_ab: complex
    jam_model: ChannelModel
    signal_power: float
    noise_power: float
    sjnr_threshold_db: float
    jam_power: float = 1.0
    jitter_k: float = DEFAULT_JITTER_K

    def __post_init__(self) -> None:
        if not (self.signal_power > 0 and self.noise_power > 0 and self.jam_power > 0):
            raise DomainError("signal, noise and jamming powers must be positive")
        if self.jitter_k < 0:
            raise DomainError("jitter_k must be non-negative")

    @classmethod
    def calibrated(
        cls,
        h_ab: complex,
        jam_model: ChannelModel,
        signal_power: float,
        noise_power: float,
        margin_db: float = DEFAULT_MARGIN_DB,
        **kwargs: float,
    ) -> JammingLink:
        """Threshold placed ``margin_db`` below the clean link SNR."""
        if abs(h_ab) == 0:
            raise DomainError("legitimate channel must be nonzero")
        clean = db(signal_power * abs(h_ab) ** 2 / noise_power)
        return cls(h_ab, jam_model, signal_power, noise_power, clean - margin_db, **kwargs)

    @property
    def clean_snr_db(self) -> float:
        return db(self.signal_power * abs(self.h_ab) ** 2 / self.noise_power)


@dataclass
class ReceptionCurve:
    gains_db: FloatArray
    raw: FloatArray
    rates: FloatArray

    def required_gain_db(self) -> float:
        """Smallest swept jamming gain at which no packet gets through; NaN if never reached."""
        hits = np.flatnonzero(self.rates == 0.0)
        return float(self.gains_db[hits[0]]) if hits.size else math.nan


@dataclass
class JammingPhase:
    name: str
    cfg_a: SurfaceConfig
    cfg_b: SurfaceConfig
    h_eb: complex
    curve: ReceptionCurve

    @property
    def required_gain_db(self) -> float:
        return self.curve.required_gain_db()


@dataclass
class JammingReport:
    baseline: JammingPhase
    attack: JammingPhase
    defense: JammingPhase

    @property
    def phases(self) -> tuple[JammingPhase, JammingPhase, JammingPhase]:
        return self.baseline, self.attack, self.defense

    @property
    def defense_margin_db(self) -> float:
        return self.defense.required_gain_db - self.attack.required_gain_db


def _jitter(stream: RandomStream, k: float, size: int) -> np.ndarray:
    los = math.sqrt(k / (k + 1.0))
    return los + sample_complex_gaussian(stream, 1.0 / (k + 1.0), size=size)


def jamming_sweep(
    link: JammingLink,
    gains_db: Sequence[float],
    packets_per_point: int,
    stream: RandomStream,
    h_eb: complex | None = None,
) -> ReceptionCurve:
    """Reception rate per jamming gain; ``h_eb`` defaults to the jammer's direct path."""
    if packets_per_point < 1:
        raise DomainError("packets_per_point must be >= 1")
    gains = np.asarray(gains_db, dtype=float)
    h_eb = link.jam_model.h_d if h_eb is None else h_eb
    threshold = undb(link.sjnr_threshold_db)
    raw = np.empty(gains.size)
    for i, gain_db in enumerate(gains):
        point = stream.child("gain", i)
        signal = link.signal_power * np.abs(link.h_ab * _jitter(point.child("ab"), link.jitter_k, packets_per_point)) ** 2
        jam = link.jam_power * undb(gain_db) * np.abs(h_eb * _jitter(point.child("eb"), link.jitter_k, packets_per_point)) ** 2
        sjnr = signal / (jam + link.noise_power)
        raw[i] = float(np.mean(sjnr >= threshold))
    rates = raw.copy()
    order = np.argsort(gains, kind="stable")
    rates[order] = np.minimum.accumulate(raw[order])
    return ReceptionCurve(gains_db=gains, raw=raw, rates=rates)


def _phase(
    name: str,
    link: JammingLink,
    cfg_a: SurfaceConfig,
    cfg_b: SurfaceConfig,
    gains_db: Sequence[float],
    packets: int,
    stream: RandomStream,
) -> JammingPhase:
    h_eb = effective_channel(link.jam_model, cfg_a, cfg_b)
    curve = jamming_sweep(link, gains_db, packets, stream.child("sweep"), h_eb)
    phase = JammingPhase(name=name, cfg_a=cfg_a, cfg_b=cfg_b, h_eb=h_eb, curve=curve)
    logger.info(
        "Jamming %s: |H_EB|^2 = %.3e, zero reception from %.1f dB", name, abs(h_eb) ** 2, phase.required_gain_db
    )
    return phase


def jamming_battle(
    link: JammingLink,
    gains_db: Sequence[float],
    packets_per_point: int,
    stream: RandomStream,
    attacker: PartySetup | None = None,
    defender: PartySetup | None = None,
    steps: int = 2000,
) -> JammingReport:
    """Baseline with random surfaces, Eve's surface boosting H_EB, then Alice's cutting it back."""
    attacker = attacker or PartySetup(sense=ObjectiveSense.MAXIMIZE)
    defender = defender or PartySetup(sense=ObjectiveSense.MINIMIZE)
    model = link.jam_model
    cfg_a = random_config(model.spec_a, stream.child("start", "A"))
    cfg_b = random_config(model.spec_b, stream.child("start", "B"))
    baseline = _phase("baseline", link, cfg_a, cfg_b, gains_db, packets_per_point, stream)

    opt_b = attacker.build(model, "B", stream.child("attack"), initial=cfg_b)
    measure_b = channel_measure(model, "B", cfg_a, attacker.evaluation, 0.0, stream.child("attack", "noise"))
    cfg_b = optimize_single(opt_b, measure_b, steps, stream.child("attack", "steps")).final_config
    attack = _phase("attack", link, cfg_a, cfg_b, gains_db, packets_per_point, stream)

    opt_a = defender.build(model, "A", stream.child("defense"), initial=cfg_a)
    measure_a = channel_measure(model, "A", cfg_b, defender.evaluation, 0.0, stream.child("defense", "noise"))
    cfg_a = optimize_single(opt_a, measure_a, steps, stream.child("defense", "steps")).final_config
    defense = _phase("defense", link, cfg_a, cfg_b, gains_db, packets_per_point, stream)
    return JammingReport(baseline=baseline, attack=attack, defense=defense)
