"""Command-line front end.

Every command is deterministic given its flags and ``--seed``.  Output goes
to ``--out`` (written atomically) or stdout.  Usage errors exit with status
2 and numerical failures with status 3; both print a JSON object to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, FORMAT_VERSION
from .errors import PrecessionError
from .measurement import classical_mc, estimate_score, sample_protocol, shots_to_csv
from .optimizer import optimize_angles
from .protocol import (
    AngleSet,
    _check_K,
    best_offset_score,
    check_angle_condition,
    classical_bound,
    pos_sweep,
    quantum_score,
)
from .pulses import (
    DeviceParams,
    apply_sequence,
    givens_segment,
    ground_state,
    ladder_compile,
    load_device_params,
    sequence_to_json,
    subspace_range,
    time_evolve,
)
from .spin import (
    QuditState,
    SpinSystem,
    cat_state,
    embed,
    fidelity,
    load_state,
    spin_coherent_state,
    spin_operators,
    system_for_dimension,
)
from .table1 import LABELS, ROWS, HOST_DIMENSION, compute_row, row
from .wigner import truncate_density, wigner_grid

COMMANDS = ("table1", "sweep", "score", "optimize", "pulse", "shots", "wigner", "mc-classical")


class UsageError(PrecessionError, ValueError):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    command: str
    d: int | None = None
    K: int | None = None
    uneven: bool = False
    phi0: float = 0.0
    state: str | None = None
    subspace: tuple | None = None
    shots: int | None = None
    seed: int = 0
    points: int = 720
    starts: int = 64
    samples: int = 100_000
    n_theta: int = 100
    n_phi: int = 200
    device: str | None = None
    out: str | None = None
    fmt: str = "json"

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        cfg = cls(
            command=ns.command, d=ns.d, K=ns.k, uneven=ns.uneven, phi0=ns.phi0, state=ns.state,
            subspace=_parse_subspace(ns.subspace), shots=ns.shots, seed=ns.seed, points=ns.points,
            starts=ns.starts, samples=ns.samples, n_theta=ns.n_theta, n_phi=ns.n_phi,
            device=ns.device, out=ns.out, fmt=ns.format or _default_format(ns.command),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.K is not None:
            _check_K(self.K)
        if self.d is not None and self.d < 2:
            raise UsageError(f"--d must be at least 2, got {self.d}")
        if self.shots is not None and self.shots < 1:
            raise UsageError("--shots must be positive")
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        if self.points < 2 or self.starts < 1 or self.samples < 1:
            raise UsageError("--points, --starts and --samples must be positive")
        if self.n_theta < 2 or self.n_phi < 2:
            raise UsageError("grid sizes must be at least 2")
        needs_k = {"score", "optimize", "shots", "mc-classical"}
        if self.command in needs_k and self.K is None:
            raise UsageError(f"{self.command} needs --k")
        needs_state = {"sweep", "score", "pulse", "shots", "wigner"}
        if self.command in needs_state and self.state is None:
            raise UsageError(f"{self.command} needs --state")
        if self.command == "shots" and self.shots is None:
            raise UsageError("shots needs --shots")


def _default_format(command: str) -> str:
    return {"sweep": "csv", "wigner": "csv", "table1": "csv"}.get(command, "json")


def _parse_subspace(text):
    if text is None:
        return None
    try:
        lo, hi = (int(x) for x in text.split(".."))
    except ValueError:
        raise UsageError(f"--subspace expects LO..HI, got {text!r}") from None
    return lo, hi


# --------------------------------------------------------------------------
# state resolution


def resolve_state(cfg: RunConfig) -> tuple[QuditState, tuple | None]:
    """Build the requested state and the subspace the protocol acts on.

    Named states: ``cat`` (|-j> + e^{i chi}|j>)/sqrt(2) of the subspace
    spin j, with chi chosen so the uniform K = 2j set at phi0 = 0 is
    optimal; ``coherent`` (the equatorial coherent state along +x); and
    ``table1:<row>``.  Anything else is read as a state file.
    """
    spec = cfg.state
    if spec.startswith("table1:"):
        r = row(spec.split(":", 1)[1])
        d = cfg.d or r.d
        if d == r.d:
            return r.state(), cfg.subspace
        host = system_for_dimension(d)
        sub = cfg.subspace or _centred(host, r.d)
        if sub[1] - sub[0] + 1 != r.d:
            raise UsageError(f"row {r.label} needs a subspace of {r.d} levels")
        return embed(r.state(), host, sub[0]), sub
    if spec in ("cat", "coherent"):
        system = system_for_dimension(cfg.d or HOST_DIMENSION)
        lo, hi = subspace_range(system, cfg.subspace)
        sub_system = spin_operators((hi - lo) / 2)
        if spec == "cat":
            local = cat_state(sub_system, relative_phase=np.pi * ((sub_system.d - 2) // 2))
        else:
            local = spin_coherent_state(sub_system, np.pi / 2, 0.0)
        return embed(local, system, lo), cfg.subspace
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"state {spec!r} is neither a named state nor a file")
    state = load_state(path)
    if cfg.d is not None and cfg.d != state.d:
        raise UsageError(f"state file has d={state.d}, --d says {cfg.d}")
    return state, cfg.subspace


def _centred(system: SpinSystem, d_sub: int) -> tuple[int, int]:
    lo = (system.d - d_sub) // 2
    return lo, lo + d_sub - 1


def subspace_view(state: QuditState, subspace) -> tuple[QuditState, float]:
    """Restrict to the protocol subspace: (block state, population inside it).

    The protocol never counts population outside the driven block as
    positive, so scores on the full state are weight * scores on the block.
    """
    if subspace is None:
        return state, 1.0
    lo, hi = subspace_range(state.system, subspace)
    weight = float(np.real(np.trace(state.density()[lo:hi + 1, lo:hi + 1])))
    return truncate_density(state, subspace), weight


def angle_set(cfg: RunConfig, system: SpinSystem) -> AngleSet:
    if not cfg.uneven:
        return AngleSet.uniform_set(cfg.K, cfg.phi0)
    run = optimize_angles(system, cfg.K, n_starts=cfg.starts, seed=cfg.seed)
    return AngleSet(run.gauge_fixed_angles + cfg.phi0)


# --------------------------------------------------------------------------
# output


def write_output(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(x: float) -> str:
    return f"{x:.12g}"


# --------------------------------------------------------------------------
# commands


def cmd_table1(cfg: RunConfig) -> str:
    records = []
    for r in ROWS:
        res = compute_row(r, n_starts=cfg.starts, seed=cfg.seed)
        rec = {"label": r.label, "d": r.d, "K": r.K, "uneven": r.uneven,
               "classical_bound": float(classical_bound(r.K)),
               "max_score": res.final_score if r.uneven else res.value}
        if r.uneven:
            rec["angles_rad"] = [float(x) for x in res.gauge_fixed_angles]
        records.append(rec)
    if cfg.fmt == "json":
        return _json(records)
    return _csv(["label", "d", "K", "uneven", "classical_bound", "max_score"],
                [[x["label"], x["d"], x["K"], x["uneven"], f"{x['classical_bound']:.6f}",
                  f"{x['max_score']:.6f}"] for x in records])


def cmd_sweep(cfg: RunConfig) -> str:
    state, sub = resolve_state(cfg)
    local, weight = subspace_view(state, sub)
    phis, vals = pos_sweep(local, cfg.points)
    vals = weight * vals
    if cfg.fmt == "csv":
        return _csv(["phi", "pos_expectation"], [[_g(p), _g(v)] for p, v in zip(phis, vals)])
    out = {"phi": phis.tolist(), "pos_expectation": vals.tolist()}
    if cfg.K is not None:
        offset, best = best_offset_score(local, AngleSet.uniform_set(cfg.K))
        out.update(K=cfg.K, best_phi0=offset, best_score=weight * best)
    return _json(out)


def cmd_score(cfg: RunConfig) -> str:
    state, sub = resolve_state(cfg)
    local, weight = subspace_view(state, sub)
    angles = angle_set(cfg, local.system)
    if cfg.shots is not None:
        est = estimate_score(sample_protocol(state, angles, cfg.shots, cfg.seed, sub))
        return _json(est.to_dict())
    rep = quantum_score(local, angles)
    return _json({
        "score": weight * rep.score,
        "K": rep.K,
        "classical_bound": rep.classical_bound,
        "quantum_max": rep.quantum_max,
        "violation": weight * rep.score > rep.classical_bound,
        "angles_rad": angles.angles.tolist(),
        "angle_condition": check_angle_condition(angles),
    })


def cmd_optimize(cfg: RunConfig) -> str:
    system = system_for_dimension(cfg.d or HOST_DIMENSION)
    run = optimize_angles(system, cfg.K, n_starts=cfg.starts, seed=cfg.seed)
    return _json(run.to_dict())


def cmd_pulse(cfg: RunConfig) -> str:
    state, _ = resolve_state(cfg)
    seq = ladder_compile(state)
    ideal = apply_sequence(ground_state(state.system), seq)
    summary = {"d": state.d, "steps": len(seq), "areas_over_pi": [a / np.pi for a in seq.areas()],
               "fidelity": fidelity(ideal, state)}
    params = load_device_params(cfg.device) if cfg.device else DeviceParams()
    if len(params.f_nmr_mhz) == state.d - 1:
        segs = [givens_segment(state.system, s, params) for s in seq]
        summary["fidelity_time_domain"] = fidelity(time_evolve(ground_state(state.system), segs, params), state)
        summary["duration_ms"] = 1e3 * sum(s.duration for s in segs)
    if cfg.out is None:
        return sequence_to_json(seq) + "\n"
    write_output(sequence_to_json(seq) + "\n", cfg.out)
    sys.stdout.write(_json(summary))
    return ""


def cmd_shots(cfg: RunConfig) -> str:
    state, sub = resolve_state(cfg)
    local, _ = subspace_view(state, sub)
    angles = angle_set(cfg, local.system)
    record = sample_protocol(state, angles, cfg.shots, cfg.seed, sub)
    if cfg.fmt == "csv":
        return shots_to_csv(record)
    return _json(estimate_score(record).to_dict())


def cmd_wigner(cfg: RunConfig) -> str:
    state, sub = resolve_state(cfg)
    if sub is not None:
        state = truncate_density(state, sub)
    th, ph, W = wigner_grid(state, cfg.n_theta, cfg.n_phi)
    if cfg.fmt == "json":
        return _json({"theta": th.tolist(), "phi": ph.tolist(), "w": W.tolist()})
    rows = [[_g(t), _g(p), _g(W[i, j])] for i, t in enumerate(th) for j, p in enumerate(ph)]
    return _csv(["theta", "phi", "w"], rows)


def cmd_mc_classical(cfg: RunConfig) -> str:
    res = classical_mc(cfg.K, cfg.samples, cfg.seed)
    bound = classical_bound(cfg.K)
    return _json({
        "K": cfg.K,
        "n_samples": res.n_samples,
        "seed": cfg.seed,
        "max_score": str(res.max_score),
        "max_score_value": float(res.max_score),
        "classical_bound": str(bound),
        "histogram": {f"{j}/{cfg.K}": int(c) for j, c in enumerate(res.histogram)},
    })


DISPATCH = {
    "table1": cmd_table1,
    "sweep": cmd_sweep,
    "score": cmd_score,
    "optimize": cmd_optimize,
    "pulse": cmd_pulse,
    "shots": cmd_shots,
    "wigner": cmd_wigner,
    "mc-classical": cmd_mc_classical,
}


# --------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(json.dumps({"error": "usage", "message": message}) + "\n")
        self.exit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="precession", description="Precession-protocol quantumness certification toolkit.")
    p.add_argument("--version", action="version",
                   version=f"precession {__version__} (file formats v{FORMAT_VERSION})")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--d", type=int, help="dimension (default: from the state, else 8)")
    p.add_argument("--k", type=int, help="number of probing angles (odd, >= 3)")
    p.add_argument("--uneven", action="store_true", help="use optimized uneven angles")
    p.add_argument("--phi0", type=float, default=0.0, help="common angle offset in radians")
    p.add_argument("--state", help=f"state file, 'cat', 'coherent' or table1:<{'|'.join(LABELS)}>")
    p.add_argument("--subspace", help="inclusive 0-based level range LO..HI")
    p.add_argument("--shots", type=int, help="shots per angle (sampled mode)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=720, help="sweep resolution")
    p.add_argument("--starts", type=int, default=64, help="optimizer multi-starts")
    p.add_argument("--samples", type=int, default=100_000, help="classical Monte Carlo samples")
    p.add_argument("--n-theta", type=int, default=100)
    p.add_argument("--n-phi", type=int, default=200)
    p.add_argument("--device", help="device parameter file (TOML or JSON)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_args(ns)
        text = DISPATCH[cfg.command](cfg)
        if text:
            write_output(text, cfg.out)
    except (ValueError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    except ArithmeticError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
