"""Batch driver: run campaigns, emit the correlation table, sweep attacks.

Subcommands:

* ``run``          execute configured campaigns and write reports
* ``table1``       enumerate the exact announcement/collapse correlation table
* ``attack-sweep`` tabulate detection statistics across a parameter grid

All emitted files are deterministic functions of the configuration and
seed. Exit codes: 0 success, 1 configuration error, 2 every campaign
aborted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import adversary, postproc, qsim
from .adversary import (
    AttackStrategy,
    DetectionStats,
    EntangleAncilla,
    InterceptResendC,
    MeasureDEInX,
    NoAttack,
)
from .protocol import ProtocolConfig, Transcript, run_campaign
from .qsim import ALL_PREPS, AncillaState, NoiseSpec, SingleQubitPrep

DOMAIN_CAMPAIGN_SEED = 10
DOMAIN_SECRET = 11

EMIT_CHOICES = ("transcript", "stats", "table1", "keys")

THREADS_ENV = "MDIQSS_THREADS"


class ConfigError(Exception):
    pass


@dataclass
class CampaignSpec:
    protocol: ProtocolConfig
    attack: dict = field(default_factory=lambda: {"kind": "none"})
    repetitions: int = 1
    output_dir: str = "out"
    emit: tuple[str, ...] = ("transcript", "stats")
    secret_bits: int = 128
    block_size: Optional[int] = None
    safety_margin: int = 64

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        bad = set(self.emit) - set(EMIT_CHOICES)
        if bad:
            raise ConfigError(f"unknown emit targets: {sorted(bad)}")


def build_attack(descriptor: dict) -> Optional[AttackStrategy]:
    kind = descriptor.get("kind", "none")
    if kind == "none":
        return NoAttack()
    if kind == "intercept_resend":
        return InterceptResendC(policy=descriptor.get("policy", adversary.POLICY_RANDOM))
    if kind == "measure_de_x":
        return MeasureDEInX()
    if kind == "entangle_ancilla":
        epsilon = float(descriptor.get("epsilon", 0.0))
        target = descriptor.get("target", "ethan")
        return EntangleAncilla(
            unitary=adversary.partial_flip_unitary(epsilon),
            ancilla=AncillaState(1.0, 0.0),
            target=target,
        )
    raise ConfigError(f"unknown attack kind {kind!r}")


def _noise_from(table: dict, key: str) -> NoiseSpec:
    sub = table.get(key, {})
    return NoiseSpec(
        p_x=float(sub.get("p_x", 0.0)),
        p_y=float(sub.get("p_y", 0.0)),
        p_z=float(sub.get("p_z", 0.0)),
    )


def load_spec(
    path: str,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    emit: Optional[Sequence[str]] = None,
) -> CampaignSpec:
    """Parse a TOML campaign file, applying command-line overrides."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc

    proto = doc.get("protocol", {})
    try:
        config = ProtocolConfig(
            ghz_prob=float(proto.get("ghz_prob", 0.8)),
            rounds=int(proto.get("rounds", 1000)),
            qber_threshold=float(proto.get("qber_threshold", 0.05)),
            noise_alice_david=_noise_from(proto, "noise_alice_david"),
            noise_alice_ethan=_noise_from(proto, "noise_alice_ethan"),
            noise_bob_david=_noise_from(proto, "noise_bob_david"),
            noise_charlie_ethan=_noise_from(proto, "noise_charlie_ethan"),
            seed=int(proto.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    campaign = doc.get("campaign", {})
    spec = CampaignSpec(
        protocol=config,
        attack=doc.get("attack", {"kind": "none"}),
        repetitions=int(campaign.get("repetitions", 1)),
        output_dir=str(campaign.get("output_dir", "out")),
        emit=tuple(campaign.get("emit", ["transcript", "stats"])),
        secret_bits=int(campaign.get("secret_bits", 128)),
        block_size=(
            int(campaign["block_size"]) if "block_size" in campaign else None
        ),
        safety_margin=int(campaign.get("safety_margin", 64)),
    )
    build_attack(spec.attack)  # validate early
    if seed is not None:
        spec.protocol = replace(spec.protocol, seed=seed)
    if out is not None:
        spec.output_dir = out
    if emit is not None:
        spec.emit = tuple(emit)
        spec.__post_init__()
    return spec


def campaign_seed(base_seed: int, repetition: int) -> int:
    ss = np.random.SeedSequence(
        entropy=[int(base_seed) & (2**64 - 1), DOMAIN_CAMPAIGN_SEED, repetition]
    )
    return int(ss.generate_state(1, np.uint64)[0])


def _classify_single(state: qsim.StateVector) -> SingleQubitPrep:
    """Identify a one-qubit state as an element of the preparation set."""
    for prep in ALL_PREPS:
        ref = qsim.prepare_single(prep).amplitudes
        overlap = abs(np.vdot(ref, state.amplitudes)) ** 2
        if overlap > 1.0 - 1e-9:
            return prep
    raise ValueError("collapsed state is not a preparation-set element")


def correlation_table() -> list[dict]:
    """Exact enumeration of (preps, announcements) -> dealer collapse.

    For every sharer preparation pair and every Bell announcement pair
    with nonzero probability, the dealer's kept qubit collapses to exactly
    one preparation-set state; each row carries its joint probability.
    """
    rows = []
    for bob in ALL_PREPS:
        for charlie in ALL_PREPS:
            state = qsim.tensor(
                qsim.tensor(qsim.prepare_ghz(), qsim.prepare_single(bob)),
                qsim.prepare_single(charlie),
            )
            # Qubits: alice=0, david=1, ethan=2, bob=3, charlie=4.
            for out_d, p_d, post_d in qsim.bell_branches(state, 1, 3):
                if post_d is None:
                    continue
                # Remaining: alice=0, ethan=1, charlie=2.
                for out_e, p_e, post_e in qsim.bell_branches(post_d, 1, 2):
                    if post_e is None:
                        continue
                    rows.append(
                        {
                            "bob": bob.value,
                            "charlie": charlie.value,
                            "bsm_david": out_d.value,
                            "bsm_ethan": out_e.value,
                            "alice": _classify_single(post_e).value,
                            "probability": p_d * p_e,
                        }
                    )
    return rows


_TABLE_FIELDS = ("bob", "charlie", "bsm_david", "bsm_ethan", "alice", "probability")


def _table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_TABLE_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def cmd_table1(out_dir: Optional[str] = None) -> int:
    rows = correlation_table()
    text = _table_csv(rows)
    if out_dir is not None:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / "table1.csv").write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


@dataclass
class _CampaignResult:
    transcript: Transcript
    session: Optional[postproc.SecretSharingSession]
    detection: DetectionStats


def _run_one_campaign(spec: CampaignSpec, repetition: int) -> _CampaignResult:
    seed = campaign_seed(spec.protocol.seed, repetition)
    config = replace(spec.protocol, seed=seed)
    attack = build_attack(spec.attack)
    transcript = run_campaign(config, attack)

    detection = DetectionStats(campaigns_total=1)
    any_error = False
    for record, trace in zip(transcript.records, transcript.traces):
        for check in (record.check_david, record.check_ethan):
            if check.value in ("OK", "ERROR"):
                detection.checked_rounds += 1
                any_error = any_error or check.value == "ERROR"
        if trace.charlie_tampered and record.check_ethan.value == "OK":
            detection.escaped_rounds += 1
    detection.campaigns_aborted = int(any_error)

    session = None
    if not transcript.aborted and transcript.sifted is not None:
        sifted = transcript.sifted
        if sifted.raw_alice_bits:
            secret = postproc.random_bits(
                spec.secret_bits, qsim.substream(seed, DOMAIN_SECRET, 0)
            )
            session = postproc.share_secret(
                sifted.raw_alice_bits,
                sifted.sharer_raw_key(),
                sifted.z_error_rate(),
                secret,
                qsim.substream(seed, postproc.DOMAIN_POSTPROC, 0),
                z_estimation_bits=sifted.z_alice_bits,
                block_size=spec.block_size,
                safety_margin=spec.safety_margin,
            )
    return _CampaignResult(transcript, session, detection)


def _mean(values: list[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def _stats_payload(spec: CampaignSpec, results: list[_CampaignResult]) -> dict:
    reports = [r.transcript.report for r in results]
    decisions = [r.transcript.decision for r in results]
    aborted = sum(1 for d in decisions if d == "ABORT")

    key_rows = []
    for r in results:
        if r.session is None:
            key_rows.append(
                {"status": "aborted" if r.transcript.aborted else "no_raw_key",
                 "raw_bits": 0, "capacity": 0, "final_bits": 0, "recovered": False}
            )
            continue
        s = r.session
        key_rows.append(
            {
                "status": s.status,
                "raw_bits": int(s.alice.raw_key.size),
                "capacity": s.capacity,
                "final_bits": int(s.alice.final_key.size) if s.alice.final_key is not None else 0,
                "recovered": bool(s.recovered_ok),
            }
        )

    detection = DetectionStats()
    for r in results:
        detection.checked_rounds += r.detection.checked_rounds
        detection.escaped_rounds += r.detection.escaped_rounds
        detection.campaigns_aborted += r.detection.campaigns_aborted
        detection.campaigns_total += r.detection.campaigns_total

    z_rates = [
        r.transcript.sifted.z_error_rate()
        for r in results
        if r.transcript.sifted is not None and r.transcript.sifted.z_error_rate() is not None
    ]
    combined_rates = [
        rep.combined_rate for rep in reports if rep.combined_rate is not None
    ]
    return {
        "config": {
            "protocol": spec.protocol.to_json_dict(),
            "attack": spec.attack,
            "repetitions": spec.repetitions,
            "emit": sorted(spec.emit),
            "secret_bits": spec.secret_bits,
            "block_size": spec.block_size,
            "safety_margin": spec.safety_margin,
        },
        "qber": {
            "per_campaign": [rep.to_json_dict() for rep in reports],
            "combined_rate_mean": _mean(combined_rates),
            "z_estimate_mean": _mean(z_rates),
        },
        "decision": {
            "per_campaign": decisions,
            "aborted": aborted,
            "total": len(decisions),
            "abort_rate": aborted / len(decisions),
        },
        "key": {
            "per_campaign": key_rows,
            "recovered_count": sum(1 for row in key_rows if row["recovered"]),
        },
        "attack": {
            "strategy": spec.attack.get("kind", "none"),
            "params": {k: v for k, v in spec.attack.items() if k != "kind"},
            "detection": detection.to_json_dict(),
        },
    }


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def cmd_run(spec: CampaignSpec) -> int:
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    workers = _worker_count()
    reps = range(spec.repetitions)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: _run_one_campaign(spec, i), reps))
    else:
        results = [_run_one_campaign(spec, i) for i in reps]

    if "transcript" in spec.emit:
        with open(out / "transcript.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for r in results:
                fh.write(r.transcript.records_jsonl())
    if "stats" in spec.emit:
        payload = _stats_payload(spec, results)
        (out / "stats.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    if "keys" in spec.emit:
        keys_payload = [
            r.session.to_json_dict() if r.session is not None else None for r in results
        ]
        (out / "keys.json").write_text(
            json.dumps(keys_payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    if "table1" in spec.emit:
        (out / "table1.csv").write_text(_table_csv(correlation_table()), encoding="utf-8")

    if all(r.transcript.aborted for r in results):
        return 2
    return 0


_SWEEP_FIELDS = (
    "strategy",
    "parameter",
    "checked_rounds",
    "escape_rate",
    "abort_rate",
    "theoretical_escape",
    "residual_error",
)


def attack_sweep_rows(
    family: str,
    grid: Sequence[float],
    campaigns: int = 5000,
    rounds: int = 200,
    seed: int = 0,
) -> list[dict]:
    """Detection statistics across a strategy parameter grid."""
    rows: list[dict] = []
    if family == "intercept":
        for k in grid:
            k = int(k)
            trial = adversary.run_escape_trials(k, campaigns, seed=seed)
            rows.append(
                {
                    "strategy": "intercept_resend",
                    "parameter": k,
                    "checked_rounds": trial.stats.checked_rounds,
                    "escape_rate": trial.full_escape_rate,
                    "abort_rate": trial.stats.abort_rate,
                    "theoretical_escape": adversary.theoretical_escape(k),
                    "residual_error": "",
                }
            )
    elif family == "ancilla":
        ancilla = AncillaState(1.0, 0.0)
        for eps in grid:
            residual = adversary.ancilla_residual_error(
                adversary.partial_flip_unitary(float(eps)), ancilla
            )
            rows.append(
                {
                    "strategy": "entangle_ancilla",
                    "parameter": float(eps),
                    "checked_rounds": "",
                    "escape_rate": "",
                    "abort_rate": "",
                    "theoretical_escape": "",
                    "residual_error": residual,
                }
            )
    elif family == "none":
        config = ProtocolConfig(rounds=rounds, seed=seed)
        detection = DetectionStats()
        for rep in range(max(1, campaigns // 100)):
            transcript = run_campaign(replace(config, seed=campaign_seed(seed, rep)), NoAttack())
            detection.campaigns_total += 1
            errors = transcript.report.combined_errors
            detection.checked_rounds += transcript.report.combined_checked
            detection.campaigns_aborted += int(errors > 0)
        rows.append(
            {
                "strategy": "none",
                "parameter": "",
                "checked_rounds": detection.checked_rounds,
                "escape_rate": 0.0
                if detection.escaped_rounds == 0
                else detection.empirical_escape_rate,
                "abort_rate": detection.abort_rate,
                "theoretical_escape": "",
                "residual_error": 0.0,
            }
        )
    else:
        raise ConfigError(f"unknown sweep family {family!r}")
    return rows


def cmd_attack_sweep(
    family: str,
    grid: Sequence[float],
    campaigns: int,
    rounds: int,
    seed: int,
    out_dir: str,
) -> int:
    rows = attack_sweep_rows(family, grid, campaigns=campaigns, rounds=rounds, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "attack_sweep.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SWEEP_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return 0


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"invalid grid {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdiqss", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run configured campaigns")
    run_p.add_argument("--config", required=True, help="TOML campaign file")
    run_p.add_argument("--seed", type=int, default=None, help="override protocol seed")
    run_p.add_argument("--out", default=None, help="override output directory")
    run_p.add_argument("--emit", default=None, help="comma list from: " + ",".join(EMIT_CHOICES))

    t1_p = sub.add_parser("table1", help="print or write the correlation table")
    t1_p.add_argument("--out", default=None, help="write table1.csv here instead of stdout")

    sw_p = sub.add_parser("attack-sweep", help="sweep a strategy family over a grid")
    sw_p.add_argument("--family", required=True, choices=("intercept", "ancilla", "none"))
    sw_p.add_argument("--grid", default="", help="comma list (checked counts or epsilons)")
    sw_p.add_argument("--campaigns", type=int, default=5000)
    sw_p.add_argument("--rounds", type=int, default=200)
    sw_p.add_argument("--seed", type=int, default=0)
    sw_p.add_argument("--out", default="out")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            emit = args.emit.split(",") if args.emit else None
            spec = load_spec(args.config, seed=args.seed, out=args.out, emit=emit)
            return cmd_run(spec)
        if args.command == "table1":
            return cmd_table1(args.out)
        if args.command == "attack-sweep":
            grid = _parse_grid(args.grid)
            if args.family in ("intercept", "ancilla") and not grid:
                raise ConfigError("--grid must be non-empty for this family")
            return cmd_attack_sweep(
                args.family, grid, args.campaigns, args.rounds, args.seed, args.out
            )
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
