"""Monte-Carlo block-error-rate simulation with deterministic, resumable sweeps."""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from polarquant.channel import NoiseConfig, transmit
from polarquant.codec import CodeConfig, CrcConfig, build_message, crc_attach, polar_encode
from polarquant.fa_design import VARIANTS, DecoderSpec, lower_operation_count, memory_footprint

CSV_COLUMNS = ("ebn0_db", "frames", "block_errors", "bler", "decoder", "seed")
DECODER_KINDS = ("llr-sc", "llr-scl", "fa-sc", "fa-scl")


@dataclass(frozen=True)
class CodeSection:
    N: int = 1024
    K: int = 512
    construction: str = "nr5g"


@dataclass(frozen=True)
class DecoderSection:
    kind: str = "llr-sc"
    spec: str | None = None
    conversion: str = "accurate"
    alt_sign_invert: bool = False
    label: str | None = None
    # "sample": fixed thresholds on y (LLRs rescaled to the design noise level)
    # "llr": thresholds applied to the runtime LLRs as they are
    channel_domain: str = "sample"


@dataclass(frozen=True)
class CrcSection:
    enabled: bool = False
    polynomial: int = 0x1021
    length: int = 16
    init: int = 0


@dataclass(frozen=True)
class StoppingSection:
    min_block_errors: int = 100
    max_frames: int = 200_000


@dataclass(frozen=True)
class ExperimentConfig:
    code: CodeSection = field(default_factory=CodeSection)
    decoder: DecoderSection = field(default_factory=DecoderSection)
    N_L: int = 32
    crc: CrcSection = field(default_factory=CrcSection)
    ebn0: tuple = (2.5,)
    stopping: StoppingSection = field(default_factory=StoppingSection)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.ebn0:
            raise ValueError("Eb/N0 sweep must be non-empty")
        if self.stopping.min_block_errors < 1 or self.stopping.max_frames < 1:
            raise ValueError("stopping limits must be positive")
        if self.decoder.kind not in DECODER_KINDS:
            raise ValueError(f"decoder kind must be one of {DECODER_KINDS}")
        if self.decoder.channel_domain not in ("sample", "llr"):
            raise ValueError("channel_domain must be 'sample' or 'llr'")
        if self.decoder.kind.startswith("fa-") and not self.decoder.spec:
            raise ValueError("finite-alphabet decoders need a spec path")
        if self.N_L < 1:
            raise ValueError("list size must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        object.__setattr__(self, "ebn0", tuple(float(e) for e in self.ebn0))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        sections = {"code": CodeSection, "decoder": DecoderSection, "crc": CrcSection,
                    "stopping": StoppingSection}
        for key, typ in sections.items():
            if key in d:
                d[key] = typ(**d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            cfg = cls.from_dict(json.load(fh))
        spec = cfg.decoder.spec
        if spec and not os.path.isabs(spec):
            # spec paths are relative to the config file
            spec = str(Path(path).resolve().parent / spec)
            cfg = cls.from_dict({**cfg.to_dict(), "decoder": {**asdict(cfg.decoder), "spec": spec}})
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ebn0"] = list(self.ebn0)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @property
    def decoder_id(self) -> str:
        if self.decoder.label:
            return self.decoder.label
        name = self.decoder.kind
        if self.decoder.kind.endswith("scl"):
            name += f"-{self.N_L}"
        if self.crc.enabled:
            name += f"-crc{self.crc.length}"
        if self.decoder.spec:
            name += "-" + Path(self.decoder.spec).stem
        return name


@dataclass(frozen=True)
class BlerRecord:
    ebn0_db: float
    frames: int
    block_errors: int
    bler: float
    decoder: str
    seed: int
    wallclock: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not 0 <= self.block_errors <= self.frames:
            raise ValueError("block errors must lie in [0, frames]")


# ---------------------------------------------------------------------------
# per-process decoding context


@dataclass
class _Context:
    cfg: CodeConfig
    crc: CrcConfig | None
    K: int
    decoder: object
    rescale: bool = False


@lru_cache(maxsize=8)
def _context_from_json(config_json: str) -> _Context:
    from polarquant.fa_runtime import FaScDecoder, FaSclDecoder
    from polarquant.llr_decoder import LlrScDecoder, LlrSclDecoder

    c = ExperimentConfig.from_dict(json.loads(config_json))
    crc = CrcConfig(c.crc.polynomial, c.crc.length, c.crc.init) if c.crc.enabled else None
    n_info = c.code.K + (crc.length if crc else 0)
    cfg = CodeConfig.construct(c.code.N, n_info, c.code.construction)
    kind = c.decoder.kind
    if kind == "llr-sc":
        dec = LlrScDecoder(cfg, crc)
    elif kind == "llr-scl":
        dec = LlrSclDecoder(cfg, c.N_L, crc)
    else:
        spec = DecoderSpec.load(c.decoder.spec)
        opts = dict(conversion=c.decoder.conversion, alt_sign_invert=c.decoder.alt_sign_invert)
        if kind == "fa-sc":
            dec = FaScDecoder(spec, cfg, crc=crc, **opts)
        else:
            dec = FaSclDecoder(spec, cfg, c.N_L, crc, **opts)
    rescale = kind.startswith("fa-") and c.decoder.channel_domain == "sample"
    return _Context(cfg, crc, c.code.K, dec, rescale)


def _context(config: ExperimentConfig) -> _Context:
    return _context_from_json(config.to_json())


def frame_rng(seed: int, ebn0_index: int, frame_index: int) -> np.random.Generator:
    """Independent stream per (seed, sweep point, frame)."""
    return np.random.default_rng([int(seed), int(ebn0_index), int(frame_index)])


def simulate_frame(frame_index: int, ebn0_index: int, config: ExperimentConfig) -> bool:
    """True when the decoded payload differs from the transmitted one."""
    ctx = _context(config)
    return _simulate(ctx, config, frame_index, ebn0_index)


def _simulate(ctx: _Context, config: ExperimentConfig, frame_index: int, ebn0_index: int) -> bool:
    rng = frame_rng(config.seed, ebn0_index, frame_index)
    payload = rng.integers(0, 2, ctx.K, dtype=np.uint8)
    block = crc_attach(payload, ctx.crc) if ctx.crc else payload
    x = polar_encode(build_message(block, ctx.cfg), ctx.cfg)
    noise = NoiseConfig(config.ebn0[ebn0_index], ctx.K / ctx.cfg.N)
    llr = transmit(x, noise, rng)
    decoded = ctx.decoder.decode(llr, noise) if ctx.rescale else ctx.decoder.decode(llr)
    return not np.array_equal(decoded, payload)


def _run_chunk(args) -> np.ndarray:
    config_json, ebn0_index, start, stop = args
    config = ExperimentConfig.from_dict(json.loads(config_json))
    ctx = _context_from_json(config_json)
    return np.fromiter((_simulate(ctx, config, f, ebn0_index) for f in range(start, stop)),
                       dtype=bool, count=stop - start)


def effective_workers(config: ExperimentConfig) -> int:
    env = os.environ.get("POLARQUANT_WORKERS")
    return max(1, int(env) if env else int(config.workers))


def _simulate_point(config: ExperimentConfig, ebn0_index: int, pool, workers: int):
    """Run frames in order-preserving chunks and stop at the exact target frame."""
    stop_errors = config.stopping.min_block_errors
    max_frames = config.stopping.max_frames
    config_json = config.to_json()
    chunk = 64
    frames = errors = 0
    while frames < max_frames and errors < stop_errors:
        span = min(chunk * workers, max_frames - frames)
        bounds = np.linspace(frames, frames + span, workers + 1).astype(int) if workers > 1 else \
            np.array([frames, frames + span])
        jobs = [(config_json, ebn0_index, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        parts = list(pool.map(_run_chunk, jobs)) if pool else [_run_chunk(j) for j in jobs]
        outcome = np.concatenate(parts)
        cum = np.cumsum(outcome)
        hit = np.flatnonzero(cum >= stop_errors - errors)
        if hit.size:
            frames += int(hit[0]) + 1
            errors = stop_errors
        else:
            frames += outcome.size
            errors += int(cum[-1]) if cum.size else 0
        chunk = min(chunk * 2, 1024)
    return frames, errors


def run_bler(config: ExperimentConfig, out_path=None, resume: bool = True, progress=None) -> list:
    """Simulate every sweep point; rows are appended to ``out_path`` as they finish.

    With ``resume`` the points already present in ``out_path`` (same decoder id
    and seed) are read back instead of re-simulated.
    """
    done = {}
    if out_path is not None:
        if resume and Path(out_path).exists():
            done = {r.ebn0_db: r for r in read_csv(out_path)
                    if r.decoder == config.decoder_id and r.seed == config.seed}
        else:
            Path(out_path).parent.mkdir(parents=True, exist_ok=True)
            _write_header(out_path)
    workers = effective_workers(config)
    _context(config)  # fail early on bad specs
    records = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for k, eb in enumerate(config.ebn0):
            if eb in done:
                records.append(done[eb])
                continue
            t0 = time.perf_counter()
            frames, errors = _simulate_point(config, k, pool, workers)
            rec = BlerRecord(eb, frames, errors, errors / frames, config.decoder_id, config.seed,
                             time.perf_counter() - t0)
            records.append(rec)
            if out_path is not None:
                _append_rows(out_path, [rec])
            if progress:
                progress(rec)
    finally:
        if pool:
            pool.shutdown()
    return records


# ---------------------------------------------------------------------------
# persistence


def _row(r: BlerRecord) -> list:
    return [repr(float(r.ebn0_db)), str(r.frames), str(r.block_errors), repr(float(r.bler)), r.decoder, str(r.seed)]


def _write_header(path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerow(CSV_COLUMNS)


def _append_rows(path, records):
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in records:
            w.writerow(_row(r))
        fh.flush()


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [BlerRecord(float(r["ebn0_db"]), int(r["frames"]), int(r["block_errors"]), float(r["bler"]),
                       r["decoder"], int(r["seed"])) for r in rows]


def emit_results(records, path, format: str = "csv"):
    """Write records as CSV or as whitespace-separated plot blocks per decoder."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    if format == "csv":
        _write_header(path)
        _append_rows(path, records)
    elif format == "plotdata":
        by_decoder = {}
        for r in records:
            by_decoder.setdefault(r.decoder, []).append(r)
        blocks = []
        for name, recs in by_decoder.items():
            lines = [f"# {name}", "# ebn0_db bler"]
            lines += [f"{r.ebn0_db!r} {r.bler!r}" for r in sorted(recs, key=lambda r: r.ebn0_db)]
            blocks.append("\n".join(lines))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n\n\n".join(blocks) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")
    return path


# ---------------------------------------------------------------------------
# complexity


def complexity_rows(w: int, w_internal: int = 6, n_nodes: int = 1):
    rows = []
    for kind in ("lut", "cd_nonuniform", "cd_uniform"):
        bits = memory_footprint(kind, w, w_internal)
        rows.append({"variant": kind, "ops": lower_operation_count(kind, w), "bits_per_node": bits,
                     "total_bits": bits * n_nodes})
    return rows


def report_complexity(spec: DecoderSpec | None = None, w: int | None = None, w_internal: int = 6,
                      N: int | None = None) -> str:
    """Lower-branch memory and operation counts, per node and over the whole tree."""
    if spec is not None:
        w, w_internal, N = spec.w, spec.w_internal, spec.N
    if w is None:
        raise ValueError("need a spec or a message width")
    n_nodes = (N - 1) if N else 1
    active = VARIANTS[spec.variant][1] if spec is not None else None
    lines = [f"lower-branch complexity  w={w}  w'={w_internal}  nodes={n_nodes}",
             f"{'variant':<16}{'add/cmp':>8}{'bits/node':>11}{'total bits':>12}"]
    for r in complexity_rows(w, w_internal, n_nodes):
        mark = "  *" if r["variant"] == active else ""
        lines.append(f"{r['variant']:<16}{r['ops']:>8}{r['bits_per_node']:>11}{r['total_bits']:>12}{mark}")
    return "\n".join(lines)
