"""Seeded Monte-Carlo experiments behind the command-line tools.

Every frame draws its channel, payload and noise from independent streams
keyed by ``(point, frame, stream, sub)`` under the master seed, so results
do not depend on worker count or scheduling, and every precoder in a run
sees the same channel, bits and noise.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from parmimo import comms, metrics
from parmimo.precoders import PrecoderConfig, pmp_lipschitz, precode
from parmimo.system import (
    ChannelRealization,
    TonePlan,
    draw_channel,
    make_toneplan_80211n_40mhz,
)

CHANNEL, PAYLOAD, NOISE = 0, 1, 2

DEFAULT_PRECODERS = (
    {"kind": "LS"},
    {"kind": "MF"},
    {"kind": "LS_CLIP", "target_par_db": 4.0},
    {"kind": "PMP", "lam": 0.25, "K": 2000},
)

# frames per point when the config leaves it unset
DEFAULT_FRAMES = {"par-ccdf": 1000, "ser-sweep": 200, "tradeoff": 200, "antenna-sweep": 1000}


class ConfigError(ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


def stream_rng(seed, point, frame, stream, sub=0):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(point), int(frame), int(stream), int(sub)))
    return np.random.Generator(np.random.PCG64(ss))


# --------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    N: int = 100
    M: int = 10
    W: int = 128
    T: int = 4
    tone_plan: object = "80211n-40mhz"
    precoders: list = field(default_factory=lambda: [dict(p) for p in DEFAULT_PRECODERS])
    snr_db: list = field(default_factory=lambda: [float(s) for s in range(0, 31, 2)])
    frames: int = None
    seed: int = 0
    out: str = "results"
    early_abort_errors: int = 100
    ccdf_grid_db: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(141)])
    lambda_exponents: list = field(default_factory=lambda: list(range(-12, 5)))
    K_list: list = field(default_factory=lambda: [2000, 500, 100])
    target_pars_db: list = field(default_factory=lambda: [float(p) for p in range(1, 11)])
    N_list: list = field(default_factory=lambda: [20, 40, 60, 80, 100])
    T_list: list = field(default_factory=lambda: [2, 4, 8])
    instance: str = None

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(doc) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {extra}", field=extra[0])
        cfg = cls(**doc)
        if cfg.instance is not None and not os.path.isabs(cfg.instance):
            cfg.instance = os.path.join(base_dir, cfg.instance)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))

    def validate(self):
        for name in ("N", "M", "W", "T", "seed", "early_abort_errors"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer", field=name)
        for name in ("N", "M", "W", "T"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1", field=name)
        if self.seed < 0:
            raise ConfigError("seed must be non-negative", field="seed")
        if self.frames is not None and (not isinstance(self.frames, int) or self.frames < 1):
            raise ConfigError("frames must be an integer >= 1", field="frames")
        if self.T > self.W:
            raise ConfigError("T must not exceed W", field="T")
        try:
            self.plan()
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad tone plan: {exc}", field="tone_plan") from None
        try:
            pcs = self.precoder_configs()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad precoder entry: {exc}", field="precoders") from None
        names = [p.name for p in pcs]
        if len(set(names)) != len(names):
            raise ConfigError("precoder labels must be unique", field="precoders")
        if any(p.kind in ("LS", "PMP") for p in pcs) and not self.M < self.N:
            raise ConfigError("LS and PMP need M < N", field="M")
        for name in ("snr_db", "ccdf_grid_db"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim != 1 or v.size == 0 or np.any(np.diff(v) <= 0):
                raise ConfigError(f"{name} must be a non-empty, strictly increasing list", field=name)
        if any(np.isnan(self.snr_db)):
            raise ConfigError("snr_db must not contain NaN", field="snr_db")
        for name in ("lambda_exponents", "K_list", "N_list", "T_list"):
            v = getattr(self, name)
            if not v or not all(isinstance(x, (int, float)) for x in v):
                raise ConfigError(f"{name} must be a non-empty list of numbers", field=name)
        if any(int(k) < 1 for k in self.K_list):
            raise ConfigError("K_list entries must be >= 1", field="K_list")
        if any(int(n) <= self.M for n in self.N_list):
            raise ConfigError("N_list entries must exceed M", field="N_list")
        if any(not 1 <= int(t) <= self.W for t in self.T_list):
            raise ConfigError("T_list entries must lie in [1, W]", field="T_list")

    def plan(self):
        tp = self.tone_plan
        if isinstance(tp, dict):
            return TonePlan.from_json(tp)
        if tp == "80211n-40mhz":
            plan = make_toneplan_80211n_40mhz()
            if plan.W != self.W:
                raise ValueError("the 802.11n 40 MHz plan needs W = 128")
            return plan
        if tp == "all-active":
            return TonePlan.all_active(self.W)
        raise ValueError(f"unknown tone plan {tp!r}")

    def precoder_configs(self):
        out = []
        for p in self.precoders:
            if not isinstance(p, dict):
                raise TypeError("each precoder must be an object")
            out.append(PrecoderConfig(**p))
        return out

    def n_frames(self, command):
        return self.frames if self.frames is not None else DEFAULT_FRAMES[command]

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# frame simulation


@dataclass
class FrameJob:
    point: int
    N: int
    M: int
    T: int
    plan: TonePlan
    precoders: tuple
    snr_db: tuple
    seed: int
    trace: bool = False


@dataclass
class FrameOutcome:
    """Per-precoder measurements for one OFDM symbol."""

    par: np.ndarray       # (N,) linear
    obr: float
    power: float
    errors: np.ndarray    # (n_snr, M) block-error flags
    trace: object = None  # SolverResult when recorded


def simulate_frame(job, frame):
    chan = draw_channel(stream_rng(job.seed, job.point, frame, CHANNEL), job.N, job.M, job.T, job.plan.W)
    payloads = comms.make_payloads(stream_rng(job.seed, job.point, frame, PAYLOAD), job.M, job.plan.n_active)
    record = job.trace and frame == 0
    # every PMP setting in the frame shares one operator, hence one L
    L = pmp_lipschitz(job.plan, chan) if any(pc.kind == "PMP" for pc in job.precoders) else None
    out = []
    for pc in job.precoders:
        fr = precode(pc, payloads.symbols, job.plan, chan, record=record and pc.kind == "PMP", L=L)
        errors = np.zeros((len(job.snr_db), job.M), dtype=bool)
        for j, snr in enumerate(job.snr_db):
            rng = stream_rng(job.seed, job.point, frame, NOISE, j)
            errors[j] = comms.run_link(fr, chan, job.plan, payloads, snr, rng)
        out.append(FrameOutcome(par=metrics.par(fr.time), obr=metrics.obr(fr.freq, job.plan),
                                power=fr.power, errors=errors, trace=fr.info.get("result")))
    return out


def _frame_task(args):
    job, frame = args
    return simulate_frame(job, frame)


def run_frames(job, frames, threads=1):
    """Outcomes for frames 0..frames-1, as a list (frame) of lists (precoder)."""
    tasks = [(job, f) for f in range(frames)]
    if threads <= 1 or frames == 1:
        return [_frame_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_frame_task, tasks, chunksize=max(1, frames // (4 * threads))))


@dataclass
class Summary:
    """Pooled statistics for one precoder over a run."""

    name: str
    par: np.ndarray           # all per-antenna PAR samples (linear)
    obr: np.ndarray           # per-frame OBR (linear)
    ser: np.ndarray           # per-SNR block error rate
    frames_used: np.ndarray   # per-SNR frames counted before the early abort
    snr_db: tuple

    @property
    def par_star_db(self):
        return metrics.par_star(self.par)

    @property
    def obr_median_db(self):
        return float(metrics.to_db(np.median(self.obr)))

    def operating_point(self, target=0.01):
        """SNR (dB) reaching ``target`` SER, or None if the grid does not bracket it."""
        try:
            return metrics.snr_operating_point(self.snr_db, self.ser, target)
        except metrics.NotBracketedError:
            return None


def summarize(job, outcomes, early_abort_errors=0):
    """Pool frame outcomes per precoder.

    With ``early_abort_errors`` > 0 an SNR point stops counting frames once
    that many block errors have accumulated; the cut is taken in frame
    order, so it is independent of how the frames were scheduled.
    """
    res = []
    for i, pc in enumerate(job.precoders):
        errs = np.stack([o[i].errors for o in outcomes])  # (F, n_snr, M)
        per_frame = errs.sum(axis=2)
        F = errs.shape[0]
        used = np.full(len(job.snr_db), F)
        if early_abort_errors > 0:
            cum = np.cumsum(per_frame, axis=0)
            for j in range(len(job.snr_db)):
                hit = np.flatnonzero(cum[:, j] >= early_abort_errors)
                if hit.size:
                    used[j] = hit[0] + 1
        ser = np.array([per_frame[: used[j], j].sum() / (used[j] * job.M) for j in range(len(job.snr_db))])
        res.append(Summary(name=pc.name, par=np.concatenate([o[i].par for o in outcomes]),
                           obr=np.array([o[i].obr for o in outcomes]), ser=ser,
                           frames_used=used, snr_db=tuple(job.snr_db)))
    return res


# --------------------------------------------------------------------------
# commands


def _job(cfg, precoders, point=0, N=None, T=None, snr_db=(), trace=False):
    return FrameJob(point=point, N=cfg.N if N is None else int(N), M=cfg.M,
                    T=cfg.T if T is None else int(T), plan=cfg.plan(), precoders=tuple(precoders),
                    snr_db=tuple(float(s) for s in snr_db), seed=cfg.seed, trace=trace)


def _write_traces(out_dir, job, outcomes):
    paths = []
    for pc, o in zip(job.precoders, outcomes[0]):
        if o.trace is not None:
            path = os.path.join(out_dir, f"trace_{_slug(pc.name)}.csv")
            o.trace.write_trace(path)
            paths.append(path)
    return paths


def _slug(name):
    return "".join(c if c.isalnum() else "_" for c in name).strip("_")


def clean_json(obj):
    """Plain-JSON copy of ``obj``: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(clean_json(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def cmd_par_ccdf(cfg, out_dir, threads=1, trace=False):
    job = _job(cfg, cfg.precoder_configs(), trace=trace)
    outcomes = run_frames(job, cfg.n_frames("par-ccdf"), threads)
    stats = summarize(job, outcomes)
    grid = np.asarray(cfg.ccdf_grid_db, dtype=float)
    rows = []
    for s in stats:
        for g, p in zip(grid, metrics.ccdf(metrics.to_db(s.par), grid)):
            rows.append((g, p, s.name))
    metrics.write_curves(os.path.join(out_dir, "par_ccdf.csv"), rows)
    metrics.write_curves(os.path.join(out_dir, "par_star.csv"),
                         [(0.01, s.par_star_db, s.name) for s in stats])
    summary = {s.name: {"par_star_db": s.par_star_db, "obr_median": float(np.median(s.obr)),
                        "obr_median_db": s.obr_median_db, "samples": int(s.par.size)} for s in stats}
    _write_json(os.path.join(out_dir, "par_ccdf.json"), summary)
    if trace:
        _write_traces(out_dir, job, outcomes)
    return summary


def cmd_ser_sweep(cfg, out_dir, threads=1, trace=False):
    job = _job(cfg, cfg.precoder_configs(), snr_db=cfg.snr_db, trace=trace)
    outcomes = run_frames(job, cfg.n_frames("ser-sweep"), threads)
    stats = summarize(job, outcomes, cfg.early_abort_errors)
    rows = [(snr, v, s.name) for s in stats for snr, v in zip(job.snr_db, s.ser)]
    metrics.write_curves(os.path.join(out_dir, "ser.csv"), rows)
    metrics.write_curves(os.path.join(out_dir, "operating_points.csv"),
                         [(0.01, s.operating_point(), s.name) for s in stats])
    summary = {s.name: {"operating_point_db": s.operating_point(), "ser": s.ser.tolist(),
                        "frames_used": s.frames_used.tolist()} for s in stats}
    _write_json(os.path.join(out_dir, "ser_sweep.json"), summary)
    if trace:
        _write_traces(out_dir, job, outcomes)
    return summary


def tradeoff_precoders(cfg):
    """LS reference, LS+clip per target PAR, PMP per (lambda, K)."""
    pcs = [PrecoderConfig(kind="LS")]
    pcs += [PrecoderConfig(kind="LS_CLIP", target_par_db=float(p)) for p in cfg.target_pars_db]
    for v in cfg.lambda_exponents:
        for K in cfg.K_list:
            pcs.append(PrecoderConfig(kind="PMP", lam=2.0 ** v, K=int(K), label=f"PMP(v={v:g},K={int(K)})"))
    return pcs


def cmd_tradeoff(cfg, out_dir, threads=1, trace=False):
    pcs = tradeoff_precoders(cfg)
    job = _job(cfg, pcs, snr_db=cfg.snr_db, trace=trace)
    outcomes = run_frames(job, cfg.n_frames("tradeoff"), threads)
    stats = dict(zip((p.name for p in pcs), summarize(job, outcomes, cfg.early_abort_errors)))

    def measures(s):
        return {"par_star_db": s.par_star_db, "snr_op_db": s.operating_point(),
                "obr_median_db": s.obr_median_db}

    pmp_rows, clip_rows, doc = [], [], {"LS": measures(stats["LS"]), "PMP": [], "LS_CLIP": []}
    for pc in pcs:
        m = measures(stats[pc.name])
        if pc.kind == "PMP":
            x = float(np.log2(pc.lam))
            pmp_rows += [(x, m[k], f"{k}|K={pc.K}") for k in m]
            doc["PMP"].append({"lambda_exponent": x, "lam": pc.lam, "K": pc.K, **m})
        elif pc.kind == "LS_CLIP":
            clip_rows += [(pc.target_par_db, m[k], k) for k in m]
            doc["LS_CLIP"].append({"target_par_db": pc.target_par_db, **m})
    metrics.write_curves(os.path.join(out_dir, "tradeoff_pmp.csv"), pmp_rows)
    metrics.write_curves(os.path.join(out_dir, "tradeoff_clip.csv"), clip_rows)
    metrics.write_curves(os.path.join(out_dir, "tradeoff_ls.csv"),
                         [(0.0, v, k) for k, v in doc["LS"].items()])
    _write_json(os.path.join(out_dir, "tradeoff.json"), doc)
    if trace:
        _write_traces(out_dir, job, outcomes)
    return doc


def cmd_antenna_sweep(cfg, out_dir, threads=1, trace=False):
    pcs = [p for p in cfg.precoder_configs() if p.kind in ("LS", "PMP")]
    if not pcs:
        raise ConfigError("antenna-sweep needs at least one LS or PMP precoder", field="precoders")
    rows, doc = [], {}
    point = 0
    for T in cfg.T_list:
        for N in cfg.N_list:
            job = _job(cfg, pcs, point=point, N=N, T=T, trace=trace and point == 0)
            outcomes = run_frames(job, cfg.n_frames("antenna-sweep"), threads)
            if job.trace:
                _write_traces(out_dir, job, outcomes)
            for s in summarize(job, outcomes):
                rows.append((int(N), s.par_star_db, f"{s.name}|T={int(T)}"))
                doc.setdefault(s.name, {}).setdefault(str(int(T)), {})[str(int(N))] = s.par_star_db
            point += 1
    metrics.write_curves(os.path.join(out_dir, "antenna_sweep.csv"), rows)
    _write_json(os.path.join(out_dir, "antenna_sweep.json"), doc)
    return doc


# --------------------------------------------------------------------------
# single instances


def save_instance(path, symbols, plan, chan):
    """Store a PMP instance (symbols, channel taps, tone plan) as .npz."""
    np.savez(path, symbols=np.asarray(symbols, dtype=np.complex128), taps=chan.taps,
             W=np.int64(plan.W), active=np.asarray(plan.active, dtype=np.int64))


def load_instance(path):
    with np.load(path) as data:
        missing = {"symbols", "taps", "W", "active"} - set(data.files)
        if missing:
            raise ConfigError(f"instance is missing arrays: {sorted(missing)}", field="instance")
        plan = TonePlan(W=int(data["W"]), active=tuple(int(w) for w in data["active"]))
        chan = ChannelRealization(taps=data["taps"], W=plan.W)
        return data["symbols"], plan, chan


def cmd_solve(cfg, out_dir, threads=1, trace=False):
    if cfg.instance is None:
        raise ConfigError("solve needs an 'instance' path", field="instance")
    pmp = [p for p in cfg.precoder_configs() if p.kind == "PMP"]
    if not pmp:
        raise ConfigError("solve needs a PMP precoder entry", field="precoders")
    pc = pmp[0]
    try:
        symbols, plan, chan = load_instance(cfg.instance)
    except OSError as exc:
        raise ConfigError(f"cannot read instance: {exc}", field="instance") from None
    fr = precode(pc, symbols, plan, chan, record=trace)
    np.savez(os.path.join(out_dir, "solution.npz"), time=fr.time, freq=fr.freq)
    par = metrics.par(fr.time)
    metrics.write_curves(os.path.join(out_dir, "solve_par.csv"),
                         [(n, v, pc.name) for n, v in enumerate(metrics.to_db(np.atleast_1d(par)))])
    summary = {
        "precoder": pc.name,
        "iterations": fr.info.get("iterations"),
        "L": fr.info.get("L"),
        "residual": fr.info.get("residual"),
        "par_max_db": float(np.max(metrics.to_db(par))),
        "obr_db": float(metrics.to_db(metrics.obr(fr.freq, plan))),
    }
    _write_json(os.path.join(out_dir, "solve.json"), summary)
    if trace and "result" in fr.info:
        fr.info["result"].write_trace(os.path.join(out_dir, "trace.csv"))
    return summary


COMMANDS = {
    "par-ccdf": cmd_par_ccdf,
    "ser-sweep": cmd_ser_sweep,
    "tradeoff": cmd_tradeoff,
    "antenna-sweep": cmd_antenna_sweep,
    "solve": cmd_solve,
}
