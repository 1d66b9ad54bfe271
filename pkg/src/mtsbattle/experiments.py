"""Experiment catalogue: how each configured kind splits into cells and how cell results become files.

A kind is a triple of plain functions. ``cells`` lists picklable cell keys,
``run`` computes one cell in isolation (it may run in a worker process) and
``assemble`` turns the ordered cell results into result items. Cell ``i``
draws from ``RandomStream(seed, i + 1)``; stream id 0 belongs to the shared
environment (channel realizations, beam candidates, masks).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy.stats import spearmanr

from .battle.analysis import estimate_mutual_snr
from .battle.engine import (
    TRACE_COLUMNS,
    BattleMode,
    BattleSchedule,
    EvaluationFn,
    PartySetup,
    battle_once,
    channel_variation,
    element_cell,
    speed_cell,
)
from .battle.optimizers import ObjectiveSense, OptimizerKind, beamform_candidates
from .config import ExperimentConfig
from .errors import ContractError, UndefinedSnrError
from .physics.channel import ChannelModel, effective_channel, realize, superposition_estimate
from .physics.environment import Environment, Geometry, MotionParams, PropagationParams, SurfacePlacement
from .physics.mathcore import RandomStream, undb
from .physics.metasurface import MetasurfaceSpec, SurfaceConfig, random_config, with_active_count
from .results import Document, Matrix, ResultItem, Table
from .scenarios.irshield import IrShieldSettings, irshield_experiment
from .scenarios.jamming import JammingLink, jamming_battle
from .scenarios.protego import ProtegoLinks, protego_build_set, protego_counterattack
from .scenarios.risiren import (
    GaParams,
    activity_spectrogram,
    induced_series,
    risiren_defend,
    risiren_synthesize,
    risiren_toggle_configs,
)
from .scenarios.spectrogram import SpectrogramTarget, StftParams, doppler_ramp_series, square_toggle_series

logger = logging.getLogger(__name__)

CellKey = tuple[Any, ...]


# ── shared construction ──


def environment_stream(config: ExperimentConfig) -> RandomStream:
    return RandomStream(config.seed, 0)


def cell_stream(config: ExperimentConfig, index: int) -> RandomStream:
    return RandomStream(config.seed, index + 1)


def build_environment(config: ExperimentConfig) -> Environment:
    endpoints = {name: np.asarray(p, dtype=float) for name, p in config.geometry.endpoints.items()}
    placements: dict[str, SurfacePlacement] = {}
    specs: dict[str, MetasurfaceSpec] = {}
    for sid, surface in config.surfaces.items():
        anchor = endpoints[surface.anchor]
        center = anchor + np.asarray(surface.offset, dtype=float)
        target = endpoints[surface.facing] if surface.facing else anchor
        placement = SurfacePlacement(center=center, normal=target - center, rows=surface.rows, cols=surface.cols)
        placements[sid] = placement.rotated(surface.rotation)
        spec = MetasurfaceSpec.grid(surface.rows, surface.cols, surface.phase_bits)
        if surface.active_elements is not None:
            spec = with_active_count(spec, surface.active_elements, environment_stream(config).child("active", sid))
        specs[sid] = spec
    prop = config.propagation
    params = PropagationParams(
        path_loss_exponent=prop.path_loss_exponent,
        rician_k=prop.rician_k,
        measurement_noise_variance=prop.noise_variance,
        coupling_enabled=prop.coupling,
        coupling_gain=undb(prop.coupling_gain),
        element_gain=undb(prop.element_gain),
        scatter_scale=undb(prop.scatter_scale),
        motion=MotionParams(**prop.motion.model_dump()),
    )
    geometry = Geometry(endpoints=endpoints, surfaces=placements, frequency=config.geometry.frequency)
    return Environment(geometry=geometry, params=params, specs=specs)


def link_model(config: ExperimentConfig, environment: Environment, tx: str, rx: str) -> ChannelModel:
    """The realization of one link; identical in every cell of a run."""
    stream = environment_stream(config).child("channel", tx, rx)
    return realize(environment, tx, rx, stream, config.propagation.direct_attenuation)


def rotated(environment: Environment, surface_id: str, angle: float) -> Environment:
    placement = environment.geometry.surfaces.get(surface_id)
    if placement is None:
        raise ContractError(f"surface {surface_id} is not placed")
    return environment.with_placement(surface_id, placement.rotated(angle))


def schedule_of(config: ExperimentConfig) -> BattleSchedule:
    return BattleSchedule(
        mode=BattleMode(config.schedule.mode),
        pause_a=config.party("A").pause,
        pause_b=config.party("B").pause,
        total_steps=config.schedule.total_steps,
        baseline_trials=config.schedule.baseline_trials,
        noise_variance=config.propagation.noise_variance,
    )


def party_setup(
    config: ExperimentConfig,
    party: str,
    sense: ObjectiveSense | None = None,
    kind: OptimizerKind | str | None = None,
) -> PartySetup:
    p = config.party(party)
    return PartySetup(
        kind=OptimizerKind(kind or p.optimizer),
        sense=sense or ObjectiveSense(p.sense),
        pause=p.pause,
        evaluation=EvaluationFn(p.evaluation, p.window),
        params=dict(p.params),
    )


def beam_candidates(config: ExperimentConfig, environment: Environment, party: str) -> list[SurfaceConfig]:
    """Codebook of the beamforming optimizer; the surface knows its anchor antenna only."""
    surface = config.surfaces.get(party)
    if surface is None:
        return []
    return beamform_candidates(
        environment.geometry,
        environment.spec(party),
        party,
        surface.anchor,
        config.party(party).beam_directions,
        environment_stream(config).child("beams", party),
    )


def _candidates(config: ExperimentConfig, environment: Environment, *setups: tuple[str, PartySetup]) -> dict[str, list[SurfaceConfig]]:
    return {party: beam_candidates(config, environment, party) for party, s in setups if s.kind is OptimizerKind.BF}


def _trials(config: ExperimentConfig) -> int:
    return config.sweep.trials if config.sweep else 1


def _median(values: list[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return float(np.median(finite)) if finite else math.nan


def _grid(config: ExperimentConfig, size: int) -> list[CellKey]:
    return [(i, j, k) for i in range(size) for j in range(size) for k in range(_trials(config))]


def _median_grid(keys: list[CellKey], gains: list[float], size: int) -> np.ndarray:
    grid = np.full((size, size), math.nan)
    for i in range(size):
        for j in range(size):
            grid[i, j] = _median([g for (a, b, _), g in zip(keys, gains) if (a, b) == (i, j)])
    return grid


def _cells_table(name: str, keys: list[CellKey], gains: list[float], rows: list[Any], cols: list[Any]) -> Table:
    return Table(name, ["row", "col", "trial", "row_value", "col_value", "gain_db"], [
        [i, j, k, rows[i], cols[j], g] for (i, j, k), g in zip(keys, gains)
    ])


# ── battle ──


def _battle_cells(config: ExperimentConfig) -> list[CellKey]:
    return [(k,) for k in range(_trials(config))]


def _battle_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> dict[str, Any]:
    environment = build_environment(config)
    model = link_model(config, environment, *config.geometry.link)
    setup_a, setup_b = party_setup(config, "A"), party_setup(config, "B")
    candidates = _candidates(config, environment, ("A", setup_a), ("B", setup_b))
    trace, outcome = battle_once(model, setup_a, setup_b, schedule_of(config), stream, candidates)
    return {"trace": trace if key[0] == 0 else None, "outcome": outcome, "baseline": trace.baseline_mean}


def _battle_assemble(config: ExperimentConfig, keys: list[CellKey], results: list[dict[str, Any]]) -> list[ResultItem]:
    trace = results[0]["trace"]
    outcomes = Table("outcomes", ["trial", "gain_db", "winner", "believed_gain_a_db", "believed_gain_b_db", "final_power", "baseline_power"])
    for (k,), r in zip(keys, results):
        o = r["outcome"]
        outcomes.rows.append([k, o.gain_db, o.winner, o.believed_gain_db["A"], o.believed_gain_db["B"], o.final_power, r["baseline"]])
    gains = [r["outcome"].gain_db for r in results]
    winners = [r["outcome"].winner for r in results]
    summary = {
        "kind": config.kind,
        "seed": config.seed,
        "trials": len(results),
        "median_gain_db": _median(gains),
        "wins": {w: winners.count(w) for w in ("A", "B", "draw")},
        "evaluations": trace.evaluations,
    }
    return [Table.from_records("trace", TRACE_COLUMNS, trace.rows()), outcomes, Document("summary", summary)]


# ── matrices ──


def _algorithm_cells(config: ExperimentConfig) -> list[CellKey]:
    return _grid(config, len(config.sweep.kinds))


def _algorithm_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> float:
    i, j, _ = key
    kinds = config.sweep.kinds
    environment = build_environment(config)
    model = link_model(config, environment, *config.geometry.link)
    setup_a = party_setup(config, "A", ObjectiveSense.MAXIMIZE, kinds[i])
    setup_b = party_setup(config, "B", ObjectiveSense.MINIMIZE, kinds[j])
    candidates = _candidates(config, environment, ("A", setup_a), ("B", setup_b))
    return battle_once(model, setup_a, setup_b, schedule_of(config), stream, candidates)[1].gain_db


def _speed_cells(config: ExperimentConfig) -> list[CellKey]:
    return _grid(config, len(config.sweep.pauses))


def _speed_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> float:
    i, j, _ = key
    pauses = config.sweep.pauses
    environment = build_environment(config)
    model = link_model(config, environment, *config.geometry.link)
    setup_a = party_setup(config, "A", ObjectiveSense.MAXIMIZE)
    setup_b = party_setup(config, "B", ObjectiveSense.MINIMIZE)
    return speed_cell(model, setup_a, setup_b, schedule_of(config), pauses[i], pauses[j], stream)


def _element_cells(config: ExperimentConfig) -> list[CellKey]:
    return _grid(config, len(config.sweep.counts))


def _element_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> float:
    i, j, _ = key
    counts = config.sweep.counts
    environment = build_environment(config)
    model = link_model(config, environment, *config.geometry.link)
    setup_a = party_setup(config, "A", ObjectiveSense.MAXIMIZE)
    setup_b = party_setup(config, "B", ObjectiveSense.MINIMIZE)
    return element_cell(model, counts[i], counts[j], setup_a, setup_b, schedule_of(config), stream)


def _matrix_assembler(name: str, axis: str, values: Callable[[ExperimentConfig], list[Any]]):
    def assemble(config: ExperimentConfig, keys: list[CellKey], gains: list[float]) -> list[ResultItem]:
        ticks = list(values(config))
        grid = _median_grid(keys, gains, len(ticks))
        header = {"seed": config.seed, "trials": _trials(config), "statistic": "median gain_db", "kind": config.kind}
        return [
            Matrix(name, grid, (f"{axis} (A, maximizer)", ticks), (f"{axis} (B, minimizer)", ticks), header),
            _cells_table(f"{name}_cells", keys, gains, ticks, ticks),
        ]

    return assemble


# ── sweeps ──


def _frequency_cells(config: ExperimentConfig) -> list[CellKey]:
    return [(k,) for k in range(len(config.sweep.frequencies))]


def _frequency_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> dict[str, float]:
    frequency = config.sweep.frequencies[key[0]]
    point = channel_variation(
        build_environment(config), [frequency], *config.geometry.link, config.sweep.variation_trials, stream
    )[0]
    return {
        "frequency_hz": point.frequency,
        "direct_magnitude": point.direct_magnitude,
        "variance_a": point.variance_a,
        "variance_b": point.variance_b,
    }


def _frequency_assemble(config: ExperimentConfig, keys: list[CellKey], rows: list[dict[str, float]]) -> list[ResultItem]:
    columns = ["frequency_hz", "direct_magnitude", "variance_a", "variance_b"]
    return [Table.from_records("channel_variation", columns, rows)]


def _distance_cells(config: ExperimentConfig) -> list[CellKey]:
    return [(p,) for p in range(len(config.sweep.distance_pairs))]


def _distance_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> dict[str, float]:
    d_a, d_b = config.sweep.distance_pairs[key[0]]
    environment = build_environment(config)
    for sid, distance in (("A", d_a), ("B", d_b)):
        surface = config.surfaces.get(sid)
        if surface is None:
            raise ContractError(f"distance sweep needs surface {sid}")
        anchor = environment.geometry.endpoint(surface.anchor)
        environment = environment.with_placement(sid, environment.geometry.surfaces[sid].moved_to(anchor, distance))
    model = link_model(config, environment, *config.geometry.link)
    try:
        snr = estimate_mutual_snr(model, config.sweep.snr_length, stream.child("snr"))
        rho_a, rho_b, snr_db = snr.rho_a, snr.rho_b, snr.snr_b_db
    except UndefinedSnrError as exc:
        logger.warning("Mutual SNR undefined at d_A=%.2f m, d_B=%.2f m: %s", d_a, d_b, exc)
        rho_a = rho_b = snr_db = math.nan
    setup_a = party_setup(config, "A", ObjectiveSense.MAXIMIZE)
    setup_b = party_setup(config, "B", ObjectiveSense.MINIMIZE)
    gains = [
        battle_once(model, setup_a, setup_b, schedule_of(config), stream.child("battle", k))[1].gain_db
        for k in range(config.sweep.trials)
    ]
    return {"distance_a_m": d_a, "distance_b_m": d_b, "rho_a": rho_a, "rho_b": rho_b, "snr_b_db": snr_db, "gain_db": _median(gains)}


def _distance_assemble(config: ExperimentConfig, keys: list[CellKey], rows: list[dict[str, float]]) -> list[ResultItem]:
    columns = ["distance_a_m", "distance_b_m", "rho_a", "rho_b", "snr_b_db", "gain_db"]
    pairs = [(r["snr_b_db"], r["gain_db"]) for r in rows if math.isfinite(r["snr_b_db"]) and math.isfinite(r["gain_db"])]
    rho = math.nan
    if len(pairs) >= 3:
        rho = float(spearmanr([p[0] for p in pairs], [p[1] for p in pairs]).statistic)
    summary = {"seed": config.seed, "points": len(rows), "usable_points": len(pairs), "spearman_snr_vs_gain": rho}
    return [Table.from_records("mutual_snr", columns, rows), Document("summary", summary)]


def _angle_cells(config: ExperimentConfig) -> list[CellKey]:
    return [(a,) for a in range(len(config.sweep.angles))]


def _orientation_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> dict[str, float]:
    angle = config.sweep.angles[key[0]]
    environment = rotated(build_environment(config), config.sweep.surface, angle)
    model = link_model(config, environment, *config.geometry.link)
    setup_a, setup_b = party_setup(config, "A"), party_setup(config, "B")
    gains = [
        battle_once(model, setup_a, setup_b, schedule_of(config), stream.child("battle", k))[1].gain_db
        for k in range(config.sweep.trials)
    ]
    return {"angle_deg": math.degrees(angle), "gain_db": _median(gains)}


def _orientation_assemble(config: ExperimentConfig, keys: list[CellKey], rows: list[dict[str, float]]) -> list[ResultItem]:
    return [Table.from_records("orientation", ["angle_deg", "gain_db"], rows)]


def _coupling_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> dict[str, float]:
    angle = config.sweep.angles[key[0]]
    base = rotated(build_environment(config), config.sweep.surface, angle)
    row: dict[str, float] = {"angle_deg": math.degrees(angle)}
    for label, coupled in (("uncoupled", False), ("coupled", True)):
        model = link_model(config, base.with_params(coupling_enabled=coupled), *config.geometry.link)
        cfg_a = random_config(model.spec_a, stream.child("config", "A"))
        cfg_b = random_config(model.spec_b, stream.child("config", "B"))
        estimate = superposition_estimate(model, cfg_a, cfg_b, config.sweep.ensemble, stream.child("ensemble"))
        row[f"error_db_{label}"] = estimate.error_db
    return row


def _coupling_assemble(config: ExperimentConfig, keys: list[CellKey], rows: list[dict[str, float]]) -> list[ResultItem]:
    return [Table.from_records("superposition", ["angle_deg", "error_db_uncoupled", "error_db_coupled"], rows)]


# ── case studies ──


def _single_cell(config: ExperimentConfig) -> list[CellKey]:
    return [(0,)]


def _jamming_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> dict[str, Any]:
    jam = config.jamming
    environment = build_environment(config)
    legit = link_model(config, environment, *jam.legit_link)
    jam_model = link_model(config, environment, *jam.jam_link)
    link = JammingLink.calibrated(
        legit.h_d,
        jam_model,
        undb(jam.signal_power),
        undb(jam.noise_power),
        jam.margin,
        jitter_k=jam.jitter_k,
    )
    report = jamming_battle(
        link,
        jam.gains.grid(),
        jam.packets,
        stream,
        attacker=party_setup(config, "B", ObjectiveSense.MAXIMIZE),
        defender=party_setup(config, "A", ObjectiveSense.MINIMIZE),
        steps=jam.steps,
    )
    return {"report": report, "clean_snr_db": link.clean_snr_db, "threshold_db": link.sjnr_threshold_db}


def _jamming_assemble(config: ExperimentConfig, keys: list[CellKey], results: list[dict[str, Any]]) -> list[ResultItem]:
    out = results[0]
    report = out["report"]
    columns = ["gain_db"]
    for phase in report.phases:
        columns += [f"{phase.name}_rate", f"{phase.name}_raw"]
    curve = Table("reception_curve", columns)
    for n, gain in enumerate(report.baseline.curve.gains_db):
        row: list[Any] = [float(gain)]
        for phase in report.phases:
            row += [float(phase.curve.rates[n]), float(phase.curve.raw[n])]
        curve.rows.append(row)
    summary = {
        "seed": config.seed,
        "clean_snr_db": out["clean_snr_db"],
        "sjnr_threshold_db": out["threshold_db"],
        "phases": {
            p.name: {"jam_channel_power": abs(p.h_eb) ** 2, "required_gain_db": p.required_gain_db}
            for p in report.phases
        },
        "defense_margin_db": report.defense_margin_db,
    }
    return [curve, Document("summary", summary)]


def _protego_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> dict[str, Any]:
    p = config.protego
    environment = build_environment(config)
    links = ProtegoLinks(
        bob=link_model(config, environment, p.transmitter, p.bob),
        eve=link_model(config, environment, p.transmitter, p.eve),
    )
    cfg_b = random_config(links.eve.spec_b, stream.child("eve", "idle"))
    protego_set = protego_build_set(links, cfg_b, stream.child("set"), p.set_size, p.bob_steps, p.search_steps)
    eve = party_setup(config, "B", ObjectiveSense.MINIMIZE).build(links.eve, "B", stream.child("eve"), initial=cfg_b)
    result = protego_counterattack(links, protego_set, eve, stream.child("counter"), p.attack_steps, p.symbols)
    eve_after = [effective_channel(links.eve, c, result.config_b) for c in protego_set.configs]
    return {"set": protego_set, "result": result, "eve_after": eve_after}


def _protego_assemble(config: ExperimentConfig, keys: list[CellKey], results: list[dict[str, Any]]) -> list[ResultItem]:
    out = results[0]
    protego_set, result = out["set"], out["result"]
    members = Table("protego_set", [
        "member", "bob_power_db", "bob_phase_rad", "eve_phase_rad", "eve_quadrant", "eve_phase_after_rad",
    ])
    for q, (bob, eve, after) in enumerate(zip(protego_set.bob, protego_set.eve, out["eve_after"])):
        members.rows.append([
            q, 10.0 * math.log10(abs(bob) ** 2), float(np.angle(bob)), float(np.angle(eve)),
            int(protego_set.eve_quadrants[q]), float(np.angle(after)),
        ])
    ser = Table("ser", ["stage", "ser_bob", "ser_eve"], [
        ["obfuscated", result.before.ser_bob, result.before.ser_eve],
        ["counterattack", result.after.ser_bob, result.after.ser_eve],
    ])
    summary = {
        "seed": config.seed,
        "symbols": config.protego.symbols,
        "bob_power_spread_db": protego_set.bob_power_spread_db,
        "bob_phase_spread_rad": protego_set.bob_phase_spread,
        "eve_phase_std_after": result.eve_phase_std,
    }
    return [members, ser, Document("summary", summary)]


def _irshield_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> Any:
    s = config.irshield
    environment = build_environment(config)
    if s.defender_rotation:
        environment = rotated(environment, "A", s.defender_rotation)
    model = link_model(config, environment, s.transmitter, s.receiver)
    attacker = party_setup(config, "B", ObjectiveSense.MINIMIZE).build(model, "B", stream.child("attacker", "start"))
    settings = IrShieldSettings(
        steps=s.steps,
        segment=s.segment,
        window=s.window,
        redraw_period=s.redraw_period,
        invert_period=s.invert_period,
        training_configs=s.training_configs,
        attacker_steps=s.attacker_steps,
        noise_variance=config.propagation.noise_variance,
        motion=environment.params.motion,
    )
    return irshield_experiment(model, attacker, stream, settings)


def _irshield_assemble(config: ExperimentConfig, keys: list[CellKey], results: list[Any]) -> list[ResultItem]:
    report = results[0]
    detection = Table("detection", ["stage", "detection_rate", "false_alarm_rate", "threshold", "auc"])
    roc = Table("roc", ["stage", "false_positive_rate", "true_positive_rate"])
    for stage, r in report.stages.items():
        detection.rows.append([stage, r.detection_rate, r.false_alarm_rate, r.threshold, r.auc])
        roc.rows.extend([stage, fpr, tpr] for fpr, tpr in r.roc_points)
    summary = {"seed": config.seed, "attacker_config": report.cfg_b.hex()}
    return [detection, roc, Document("summary", summary)]


def load_target(config: ExperimentConfig) -> SpectrogramTarget:
    r = config.risiren
    params = StftParams(window=r.stft.window, hop=r.stft.hop, nfft=r.stft.nfft, sample_rate=r.stft.sample_rate)
    t = r.target
    if t.kind == "doppler_ramp":
        series = doppler_ramp_series(t.length, t.f_start, t.f_end, params.sample_rate)
    elif t.kind == "square_toggle":
        series = square_toggle_series(t.length, t.frequency, params.sample_rate)
    else:
        return SpectrogramTarget(np.loadtxt(t.path, delimiter=",", ndmin=2), params)
    return activity_spectrogram(series, params)


def _risiren_run(config: ExperimentConfig, key: CellKey, stream: RandomStream) -> dict[str, Any]:
    r = config.risiren
    environment = build_environment(config)
    model = link_model(config, environment, r.transmitter, r.receiver)
    target = load_target(config)
    pair = risiren_toggle_configs(model, stream.child("toggle"), r.toggle_steps)
    ga = GaParams(**r.ga.model_dump())
    synthesis = risiren_synthesize(target, pair, stream.child("ga"), ga)
    defender = party_setup(config, "A", ObjectiveSense.MINIMIZE).build(model, "A", stream.child("defender"), initial=pair.victim)
    defense = risiren_defend(
        model,
        synthesis.sequence,
        pair,
        defender,
        stream.child("defense"),
        steps=r.defense_steps,
        window=r.defense_window,
        noise_variance=config.propagation.noise_variance,
        stft=target.params,
    )
    induced = activity_spectrogram(induced_series(synthesis.sequence, pair), target.params)
    return {"target": target, "pair": pair, "synthesis": synthesis, "defense": defense, "induced": induced}


def _spectrogram_matrix(name: str, target: SpectrogramTarget, config: ExperimentConfig) -> Matrix:
    p = target.params
    header = {
        "seed": config.seed,
        "stft": {"window": p.window, "hop": p.hop, "nfft": p.fft_size, "sample_rate_hz": p.sample_rate, "detrend": p.detrend},
        "scale": "linear magnitude",
    }
    return Matrix(name, target.magnitude, ("time_s", target.times.tolist()), ("frequency_hz", target.frequencies.tolist()), header)


def _risiren_assemble(config: ExperimentConfig, keys: list[CellKey], results: list[dict[str, Any]]) -> list[ResultItem]:
    out = results[0]
    synthesis, defense, pair = out["synthesis"], out["defense"], out["pair"]
    sequence = Table("switching_sequence", ["step", "state"], [[t, int(b)] for t, b in enumerate(synthesis.sequence)])
    history = Table("ga_fitness", ["generation", "best_fitness"], [[g, f] for g, f in enumerate(synthesis.history)])
    summary = {
        "seed": config.seed,
        "toggle_gap_db": pair.gap_db,
        "fitness": synthesis.fitness,
        "generations": len(synthesis.history) - 1,
        "residual_std": defense.residual_std,
        "undefended_std": defense.undefended_std,
        "std_reduction_db": defense.reduction_db,
        "doppler_energy_ratio": defense.energy_ratio,
    }
    return [
        sequence,
        history,
        _spectrogram_matrix("target_spectrogram", out["target"], config),
        _spectrogram_matrix("induced_spectrogram", out["induced"], config),
        Document("summary", summary),
    ]


# ── catalogue ──


@dataclass(frozen=True)
class ExperimentKind:
    name: str
    description: str
    anchor: str
    cells: Callable[[ExperimentConfig], list[CellKey]]
    run: Callable[[ExperimentConfig, CellKey, RandomStream], Any]
    assemble: Callable[[ExperimentConfig, list[CellKey], list[Any]], list[ResultItem]]

    def info(self) -> dict[str, str]:
        return {"kind": self.name, "description": self.description, "anchor": self.anchor}


EXPERIMENTS: dict[str, ExperimentKind] = {
    k.name: k
    for k in (
        ExperimentKind("battle", "one two-party battle, full trace and outcome", "#battle-timing-modes",
                       _battle_cells, _battle_run, _battle_assemble),
        ExperimentKind("algorithm_matrix", "median gain for every maximizer/minimizer algorithm pair", "#algorithm-matrix",
                       _algorithm_cells, _algorithm_run, _matrix_assembler("algorithm_matrix", "algorithm", lambda c: c.sweep.kinds)),
        ExperimentKind("speed_matrix", "median gain for every pair of optimization pauses", "#optimization-speed",
                       _speed_cells, _speed_run, _matrix_assembler("speed_matrix", "pause", lambda c: c.sweep.pauses)),
        ExperimentKind("element_matrix", "median gain for every pair of active element counts", "#element-count",
                       _element_cells, _element_run, _matrix_assembler("element_matrix", "active elements", lambda c: c.sweep.counts)),
        ExperimentKind("frequency_sweep", "per-surface channel variation across carrier frequencies", "#frequency-dependence",
                       _frequency_cells, _frequency_run, _frequency_assemble),
        ExperimentKind("distance_sweep", "mutual SNR against post-battle gain over surface distances", "#mutual-snr",
                       _distance_cells, _distance_run, _distance_assemble),
        ExperimentKind("orientation_sweep", "post-battle gain as one surface rotates", "#surface-orientation",
                       _angle_cells, _orientation_run, _orientation_assemble),
        ExperimentKind("coupling_test", "superposition error with and without inter-surface coupling", "#superposition-coupling",
                       _angle_cells, _coupling_run, _coupling_assemble),
        ExperimentKind("jamming", "packet reception under a surface-assisted jammer and its defense", "#case-jamming",
                       _single_cell, _jamming_run, _jamming_assemble),
        ExperimentKind("protego", "configuration-hopping secure link and the eavesdropper's counterattack", "#case-secure-link",
                       _single_cell, _protego_run, _protego_assemble),
        ExperimentKind("irshield", "motion detection under sensing obfuscation and a stabilizing attacker", "#case-sensing-obfuscation",
                       _single_cell, _irshield_run, _irshield_assemble),
        ExperimentKind("risiren", "spectrogram spoofing by a toggling surface and its defense", "#case-sensing-spoofing",
                       _single_cell, _risiren_run, _risiren_assemble),
    )
}


def list_experiments() -> list[dict[str, str]]:
    return [k.info() for k in EXPERIMENTS.values()]


def experiment(kind: str) -> ExperimentKind:
    try:
        return EXPERIMENTS[kind]
    except KeyError:
        raise ContractError(f"unknown experiment kind {kind!r}") from None


def run_cell(config: ExperimentConfig, index: int, key: CellKey) -> Any:
    """Compute one cell; module-level so worker processes can unpickle it."""
    logger.debug("Cell %d %s of %s", index, key, config.kind)
    return experiment(config.kind).run(config, key, cell_stream(config, index))
