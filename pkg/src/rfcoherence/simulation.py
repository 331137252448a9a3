"""Monte Carlo click streams from the AMZI-filtered emitter and coincidence histograms.

Time is cut into slots much longer than T1. With k = tau / slot, slot i only
interferes with slots i - k and i + k, so the stream splits into k independent
chains by residue. Along one chain, output bin j mixes the long arm of input
j - 1 with the short arm of input j. After the photon numbers at (c_j, d_j) are
sampled, the long arm of input j is left in a pure conditional state, which is
all the sampler needs to carry forward. A vacuum outcome always leaves the same
conditional state and the next outcome is then vacuum with a fixed probability,
so runs of empty slots are skipped with a single geometric draw.

The interferometer is the physical one: each input reaches both ports in two
consecutive output bins with amplitude 1/2.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .emitter import EmitterParams
from .errors import ConfigError, ModelValidityWarning, OutputError
from .fock import splitter_matrix, two_mode_fock_unitary
from .interferometry import AmziConfig
from .traces import SCHEMA_VERSION, CorrelationTrace, read_csv_rows

PORT_CODES = {"c": 0, "d": 1}
PORT_NAMES = ("c", "d")
MAX_MULTIPLICITY = 2
RECORD_DTYPE = np.dtype([("port", "<u1"), ("slot", "<u8"), ("multiplicity", "<u1")])
DEFAULT_CHAIN_LENGTH = 1 << 12  # bins per chain in one independent segment
BATCH_CHAINS = 1 << 14


@dataclass(frozen=True)
class SimConfig:
    params: EmitterParams
    cfg: AmziConfig
    slot_width: float
    duration: float
    seed: int = 0
    detector_efficiency: float = 1.0
    dark_rate: float = 0.0
    phase_drift_rate: float = 0.0  # rad/s added to phi along the stream
    segment_slots: int | None = None  # length of independent segments; None picks one
    record_ports: tuple[str, ...] = ("c", "d")

    def __post_init__(self):
        p = self.params
        if p.M != 1.0 or p.Mprime != 1.0:
            raise ConfigError("the Monte Carlo covers indistinguishable photons only (M = M' = 1)")
        if not self.slot_width > 0 or not self.duration > 0:
            raise ConfigError("slot_width and duration must be positive")
        ratio = self.cfg.tau / self.slot_width
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-6 * ratio:
            raise ConfigError(f"slot width {self.slot_width:g} s does not divide tau={self.cfg.tau:g} s")
        if self.slot_width < 10 * p.T1:
            warnings.warn(f"slot width {self.slot_width:g} s is not >> T1={p.T1:g} s",
                          ModelValidityWarning, stacklevel=3)
        if not 0.0 <= self.detector_efficiency <= 1.0:
            raise ConfigError("detector efficiency outside [0, 1]")
        if self.dark_rate < 0:
            raise ConfigError("dark rate must be non-negative")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        bad = set(self.record_ports) - set(PORT_CODES)
        if bad or not self.record_ports:
            raise ConfigError(f"record_ports must be drawn from {tuple(PORT_CODES)}")
        if self.segment_slots is not None and (self.segment_slots < self.k
                                               or self.segment_slots % self.k):
            raise ConfigError("segment_slots must be a positive multiple of tau/slot_width")
        if self.segment_length > self.n_slots_requested:
            raise ConfigError("duration is shorter than one segment")

    @property
    def k(self) -> int:
        return int(round(self.cfg.tau / self.slot_width))

    @property
    def n_slots_requested(self) -> int:
        return int(math.floor(self.duration / self.slot_width + 1e-9))

    @property
    def segment_length(self) -> int:
        if self.segment_slots is not None:
            return int(self.segment_slots)
        full = self.k * DEFAULT_CHAIN_LENGTH
        n = self.n_slots_requested
        return full if n >= full else max(self.k, n - n % self.k)

    @property
    def n_segments(self) -> int:
        return self.n_slots_requested // self.segment_length

    @property
    def n_slots(self) -> int:
        return self.n_segments * self.segment_length

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(), "cfg": self.cfg.to_dict(),
            "slot_width": self.slot_width, "duration": self.duration, "seed": int(self.seed),
            "detector_efficiency": self.detector_efficiency, "dark_rate": self.dark_rate,
            "phase_drift_rate": self.phase_drift_rate, "segment_slots": self.segment_slots,
            "record_ports": list(self.record_ports),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        doc = dict(doc)
        known = {"params", "cfg", "slot_width", "duration", "seed", "detector_efficiency",
                 "dark_rate", "phase_drift_rate", "segment_slots", "record_ports"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown simulation fields: {sorted(unknown)}")
        doc["params"] = EmitterParams.from_dict(doc["params"])
        doc["cfg"] = AmziConfig.from_dict(doc["cfg"])
        if "record_ports" in doc:
            doc["record_ports"] = tuple(doc["record_ports"])
        return cls(**doc)


@dataclass(frozen=True)
class ClickRecord:
    port: str
    slot_index: int
    multiplicity: int


@dataclass
class ClickStream:
    """Click records sorted by (slot, port) plus the layout needed to count pair opportunities."""

    port: np.ndarray  # uint8, 0 = c, 1 = d
    slot: np.ndarray  # uint64
    multiplicity: np.ndarray  # uint8
    slot_width: float
    n_slots: int
    segment_slots: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.port = np.asarray(self.port, dtype=np.uint8)
        self.slot = np.asarray(self.slot, dtype=np.uint64)
        self.multiplicity = np.asarray(self.multiplicity, dtype=np.uint8)
        if not (self.port.shape == self.slot.shape == self.multiplicity.shape):
            raise ConfigError("click arrays differ in length")
        if self.segment_slots <= 0 or self.n_slots % self.segment_slots:
            raise ConfigError("n_slots must be a whole number of segments")
        if self.slot.size:
            if int(self.slot.max()) >= self.n_slots:
                raise ConfigError("slot index beyond the stream duration")
            if np.any(self.multiplicity < 1) or np.any(self.multiplicity > MAX_MULTIPLICITY):
                raise ConfigError("multiplicity outside [1, 2]")
            if np.any(self.port > 1):
                raise ConfigError("port code outside {0, 1}")

    def __len__(self) -> int:
        return int(self.slot.size)

    def __iter__(self) -> Iterator[ClickRecord]:
        for p, s, m in zip(self.port, self.slot, self.multiplicity):
            yield ClickRecord(PORT_NAMES[p], int(s), int(m))

    @property
    def n_segments(self) -> int:
        return self.n_slots // self.segment_slots

    def select(self, port: str) -> "ClickStream":
        keep = self.port == PORT_CODES[port]
        return ClickStream(self.port[keep], self.slot[keep], self.multiplicity[keep],
                           self.slot_width, self.n_slots, self.segment_slots, dict(self.meta))

    def photons(self, port: str) -> int:
        return int(self.multiplicity[self.port == PORT_CODES[port]].sum(dtype=np.int64))

    def layout(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "slot_width": self.slot_width,
                "n_slots": self.n_slots, "segment_slots": self.segment_slots,
                "records": len(self), "meta": self.meta}

    def binned_counts(self, bin_slots: int) -> tuple[np.ndarray, np.ndarray]:
        """Photon counts per port in consecutive blocks of ``bin_slots`` slots."""
        if bin_slots <= 0:
            raise ConfigError("bin size must be positive")
        n_bins = self.n_slots // bin_slots
        if n_bins == 0:
            raise ConfigError("bin larger than the stream")
        b = (self.slot // np.uint64(bin_slots)).astype(np.int64)
        ok = b < n_bins
        w = self.multiplicity.astype(np.int64)
        c = np.bincount(b[ok & (self.port == 0)], w[ok & (self.port == 0)], n_bins)
        d = np.bincount(b[ok & (self.port == 1)], w[ok & (self.port == 1)], n_bins)
        return c, d


# ---------------------------------------------------------------------------
# sampler


@dataclass(frozen=True)
class _Transfer:
    n_in: int  # photon numbers 0..n_in-1 per input bin
    n_out: int  # photon numbers 0..n_out-1 per output port
    by_short_photons: np.ndarray  # [n_s, m, c*d*l]: phase e^{i n_s phi} factored out
    star: np.ndarray  # conditional long-arm state after a vacuum outcome
    q_vac: float  # probability of another vacuum outcome from ``star``
    initial_probs: np.ndarray  # distribution of short-arm photons before the first output
    initial_states: np.ndarray  # [n_s, l] matching normalized long-arm states

    def at_phase(self, phi: float) -> np.ndarray:
        ph = np.exp(1j * phi * np.arange(self.n_in))
        return np.tensordot(ph, self.by_short_photons, axes=1)


def _transfer(params: EmitterParams) -> _Transfer:
    n_in = 3 if params.p2 > 0 else 2
    n_out = 2 * n_in - 1
    u = two_mode_fock_unitary(splitter_matrix(0.5), n_out - 1)
    amp = np.zeros(n_out, dtype=complex)
    amp[:3] = [math.sqrt(params.p0), math.sqrt(params.p1), math.sqrt(params.p2)][:n_out]
    vin = np.zeros(n_out * n_out, dtype=complex)
    vin[np.arange(n_out) * n_out] = amp  # (input, vacuum companion)
    psi = (u @ vin).reshape(n_out, n_out)[:n_in, :n_in]  # [long, short]
    # exit splitter on (previous long arm m, short arm s): first output is d, second c
    ut = u.reshape(n_out, n_out, n_out, n_out)[:, :, :n_in, :n_in]  # [d, c, m, s]
    t = np.ascontiguousarray(np.einsum("dcms,ls->smcdl", ut, psi)).reshape(n_in, n_in, -1)
    star = psi[:, 0] / np.linalg.norm(psi[:, 0])
    probs0 = np.sum(np.abs(psi) ** 2, axis=0)
    init = np.zeros((n_in, n_in), dtype=complex)
    for s in range(n_in):
        if probs0[s] > 0:
            init[s] = psi[:, s] / math.sqrt(probs0[s])
    vac = (star @ t[0]).reshape(n_out, n_out, n_in)[0, 0]  # vacuum outcome needs s = 0 only
    q_vac = float(np.sum(np.abs(vac) ** 2))
    return _Transfer(n_in, n_out, t, star, q_vac, probs0 / probs0.sum(), init)


def _amplitudes(tr: _Transfer, beta: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """[chains, c*d, l] output amplitudes for long-arm states ``beta``; ``phase`` is e^{i phi} per chain."""
    flat = tr.by_short_photons
    out = beta @ flat[0]
    ph = np.ones_like(phase)
    for n in range(1, tr.n_in):
        ph = ph * phase
        out += ph[:, None] * (beta @ flat[n])
    return out.reshape(beta.shape[0], tr.n_out * tr.n_out, tr.n_in)


def _run_chains(sim: SimConfig, tr: _Transfer, rng: np.random.Generator, chain_ids: np.ndarray):
    """Sample every output bin of the given chains; returns (slot, n_c, n_d) of non-vacuum bins."""
    k, seg = sim.k, sim.segment_length
    length = seg // k
    drift = sim.phase_drift_rate * sim.slot_width
    n = chain_ids.size
    start = rng.choice(tr.n_in, size=n, p=tr.initial_probs)
    beta = tr.initial_states[start]
    star = start == 0
    pos = np.zeros(n, dtype=np.int64)
    p_event = 1.0 - tr.q_vac
    base_slot = (chain_ids // k) * seg + chain_ids % k
    fixed = None if drift else tr.at_phase(sim.cfg.phi)
    n_outcomes = tr.n_out * tr.n_out
    out = []

    active = np.arange(n)
    while active.size:
        idx = active[star[active]]
        if idx.size:
            if p_event > 1e-15:
                pos[idx] += rng.geometric(p_event, size=idx.size) - 1
            else:
                pos[idx] = length
            active = active[pos[active] < length]
            if not active.size:
                break
        slots = base_slot[active] + pos[active] * k
        if drift:
            phase = np.exp(1j * (sim.cfg.phi + drift * slots.astype(float)))
            amps = _amplitudes(tr, beta[active], phase)
        else:
            amps = (beta[active] @ fixed).reshape(active.size, n_outcomes, tr.n_in)
        probs = np.sum(amps.real ** 2 + amps.imag ** 2, axis=-1)
        probs[star[active], 0] = 0.0
        cum = np.cumsum(probs, axis=1)
        u = rng.random(active.size) * cum[:, -1]
        outcome = np.minimum((cum < u[:, None]).sum(axis=1), n_outcomes - 1)
        post = amps[np.arange(active.size), outcome]
        post /= np.linalg.norm(post, axis=1, keepdims=True)
        beta[active] = post
        vac = outcome == 0
        star[active] = vac
        hit = ~vac
        if hit.any():
            nc, nd = np.divmod(outcome[hit], tr.n_out)
            out.append((slots[hit], nc, nd))
        pos[active] += 1
        active = active[pos[active] < length]

    if not out:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64)
    return tuple(np.concatenate([o[i] for o in out]) for i in range(3))


def simulate_clicks(sim: SimConfig, batch_chains: int = BATCH_CHAINS) -> ClickStream:
    """Sample detector clicks for every slot of ``sim``; deterministic for a fixed seed."""
    rng = np.random.Generator(np.random.PCG64(int(sim.seed)))
    tr = _transfer(sim.params)
    n_chains = sim.n_segments * sim.k
    emitted = np.zeros(2, dtype=np.int64)
    clamped = 0
    parts = {name: ([], []) for name in PORT_NAMES}
    for lo in range(0, n_chains, batch_chains):
        ids = np.arange(lo, min(lo + batch_chains, n_chains), dtype=np.int64)
        slots, nc, nd = _run_chains(sim, tr, rng, ids)
        for code, (name, n) in enumerate(zip(PORT_NAMES, (nc, nd))):
            emitted[code] += int(n.sum())
            if sim.detector_efficiency < 1.0:
                n = rng.binomial(n, sim.detector_efficiency)
            if name not in sim.record_ports:
                continue
            keep = n > 0
            clamped += int(np.count_nonzero(n > MAX_MULTIPLICITY))
            parts[name][0].append(slots[keep])
            parts[name][1].append(n[keep])

    port_arrays, slot_arrays, mult_arrays = [], [], []
    for code, name in enumerate(PORT_NAMES):
        s_port = np.concatenate(parts[name][0]) if parts[name][0] else np.zeros(0, np.int64)
        n_port = np.concatenate(parts[name][1]) if parts[name][1] else np.zeros(0, np.int64)
        if sim.dark_rate > 0:
            n_dark = rng.poisson(sim.dark_rate * sim.slot_width * sim.n_slots)
            dark = rng.integers(0, sim.n_slots, size=n_dark)
            if name in sim.record_ports:
                s_all = np.concatenate([s_port, dark])
                n_all = np.concatenate([n_port, np.ones(n_dark, dtype=np.int64)])
                s_port, inv = np.unique(s_all, return_inverse=True)
                n_port = np.bincount(inv, weights=n_all).astype(np.int64)
        if name not in sim.record_ports:
            continue
        slot_arrays.append(s_port)
        mult_arrays.append(np.minimum(n_port, MAX_MULTIPLICITY))
        port_arrays.append(np.full(s_port.size, code, dtype=np.uint8))

    slot = np.concatenate(slot_arrays).astype(np.uint64)
    port = np.concatenate(port_arrays)
    mult = np.concatenate(mult_arrays).astype(np.uint8)
    order = np.lexsort((port, slot))
    meta = {"seed": int(sim.seed), "k": sim.k, "phi": sim.cfg.phi,
            "emitted_photons": {"c": int(emitted[0]), "d": int(emitted[1])},
            "clamped_records": clamped, "record_ports": list(sim.record_ports)}
    return ClickStream(port[order], slot[order], mult[order], sim.slot_width, sim.n_slots,
                       sim.segment_length, meta)


# ---------------------------------------------------------------------------
# histograms


PAIRINGS = ("auto-port-d", "cross-c-d")


def histogram(stream: ClickStream, pairing: str, max_lag_slots: int,
              baseline_min_lag: int | None = None) -> CorrelationTrace:
    """Coincidence probability per slot pair versus lag, with a baseline from large lags.

    ``auto-port-d`` pairs port-d clicks with each other (lags 0..max); the zero
    lag counts n(n-1) within one slot. ``cross-c-d`` pairs a c click at slot i
    with a d click at slot i + lag (lags -max..max). Pairs never straddle an
    independent segment.
    """
    if pairing not in PAIRINGS:
        raise ConfigError(f"unknown pairing {pairing!r}; expected one of {PAIRINGS}")
    if len(stream) == 0:
        raise ConfigError("empty click stream")
    if max_lag_slots < 1 or max_lag_slots >= stream.segment_slots:
        raise ConfigError("max_lag_slots must lie in [1, segment length)")
    k = int(stream.meta.get("k", 1))
    min_lag = 2 * k + 1 if baseline_min_lag is None else int(baseline_min_lag)
    if min_lag > max_lag_slots:
        raise ConfigError(f"no baseline lags: max_lag_slots={max_lag_slots} < {min_lag}")

    if pairing == "auto-port-d":
        d = stream.select("d")
        lags = np.arange(0, max_lag_slots + 1)
        s_w, s_w2 = _pair_sums(d.slot, d.multiplicity, d.slot, d.multiplicity,
                               stream.segment_slots, max_lag_slots, same=True)
        m = d.multiplicity.astype(float)
        s_w[max_lag_slots] = float(np.sum(m * (m - 1)))
        s_w2[max_lag_slots] = float(np.sum((m * (m - 1)) ** 2))
        s_w, s_w2 = s_w[max_lag_slots:], s_w2[max_lag_slots:]
    else:
        c, d = stream.select("c"), stream.select("d")
        lags = np.arange(-max_lag_slots, max_lag_slots + 1)
        s_w, s_w2 = _pair_sums(c.slot, c.multiplicity, d.slot, d.multiplicity,
                               stream.segment_slots, max_lag_slots, same=False)

    opp = (stream.n_segments * (stream.segment_slots - np.abs(lags))).astype(float)
    values = s_w / opp
    # one-count floor so empty bins still carry a finite error
    errors = np.sqrt(np.maximum(s_w2, 1.0)) / opp
    base = np.abs(lags) >= min_lag
    b_opp = opp[base].sum()
    baseline = float(s_w[base].sum() / b_opp)
    baseline_err = float(math.sqrt(s_w2[base].sum()) / b_opp)
    meta = dict(stream.meta, pairing=pairing, slot_width=stream.slot_width,
                baseline_min_lag=min_lag, lag_unit="slots")
    trace = CorrelationTrace("coincidence", lags, values, "raw-probability", errors,
                             counts=s_w, opportunities=opp, baseline=baseline,
                             baseline_error=baseline_err, meta=meta)
    if baseline > 0:
        trace.meta["normalized"] = g2_from_trace(trace).to_json_dict()
    return trace


def _pair_sums(s1, m1, s2, m2, segment: int, max_lag: int, same: bool):
    """Sum of m1*m2 (and its square) over pairs with lag = s2 - s1 in [-max, max]."""
    size = 2 * max_lag + 1
    s_w = np.zeros(size)
    s_w2 = np.zeros(size)
    if s1.size == 0 or s2.size == 0:
        return s_w, s_w2
    a = s1.astype(np.int64)
    b = s2.astype(np.int64)
    wa = m1.astype(float)
    wb = m2.astype(float)
    # for each left click, scan right clicks in the window [a - max, a + max]
    lo = np.searchsorted(b, a - max_lag, side="left")
    hi = np.searchsorted(b, a + max_lag, side="right")
    width = hi - lo
    seg_a = a // segment
    for off in range(int(width.max(initial=0))):
        sel = np.flatnonzero(width > off)
        j = lo[sel] + off
        lag = b[j] - a[sel]
        ok = (b[j] // segment) == seg_a[sel]
        if same:
            ok &= lag > 0
        sel, j, lag = sel[ok], j[ok], lag[ok]
        w = wa[sel] * wb[j]
        np.add.at(s_w, lag + max_lag, w)
        np.add.at(s_w2, lag + max_lag, w * w)
    return s_w, s_w2


def g2_from_trace(trace: CorrelationTrace) -> CorrelationTrace:
    """Divide a raw coincidence trace by its baseline and propagate the errors."""
    if trace.baseline is None:
        raise ConfigError("trace carries no baseline estimate")
    b = float(trace.baseline)
    if b <= 0:
        raise ConfigError("zero baseline; cannot normalize")
    vals = np.asarray(trace.values, dtype=float)
    g = vals / b
    errs = None
    if trace.errors is not None:
        rel_b = (trace.baseline_error or 0.0) / b
        errs = np.sqrt((np.asarray(trace.errors, dtype=float) / b) ** 2 + (g * rel_b) ** 2)
    meta = {k: v for k, v in trace.meta.items() if k != "normalized"}
    return CorrelationTrace("g2", trace.abscissa, g, "baseline-normalized", errs, trace.counts,
                            trace.opportunities, 1.0, (trace.baseline_error or 0.0) / b, meta)


def class_values(trace: CorrelationTrace, k: int) -> dict[str, tuple[float, float]]:
    """Pick the zero and +-tau lags (k slots) out of a trace."""
    out = {"zero": trace.value_at(0)}
    lags = set(int(x) for x in trace.abscissa)
    if k in lags:
        out["side(+tau)"] = trace.value_at(k)
    if -k in lags:
        out["side(-tau)"] = trace.value_at(-k)
    return {key: (float(v), float(e) if e is not None else float("nan")) for key, (v, e) in out.items()}


# ---------------------------------------------------------------------------
# persistence


def write_binary(stream: ClickStream, path: str | Path) -> Path:
    """Records as packed little-endian (u8 port, u64 slot, u8 multiplicity); layout in a JSON sidecar."""
    path = Path(path)
    rec = np.empty(len(stream), dtype=RECORD_DTYPE)
    rec["port"], rec["slot"], rec["multiplicity"] = stream.port, stream.slot, stream.multiplicity
    try:
        rec.tofile(path)
        path.with_suffix(".layout.json").write_text(json.dumps(stream.layout(), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_binary(path: str | Path) -> ClickStream:
    path = Path(path)
    try:
        rec = np.fromfile(path, dtype=RECORD_DTYPE)
        layout = json.loads(path.with_suffix(".layout.json").read_text())
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    return ClickStream(rec["port"], rec["slot"], rec["multiplicity"], layout["slot_width"],
                       layout["n_slots"], layout["segment_slots"], layout.get("meta", {}))


def write_csv(stream: ClickStream, path: str | Path) -> Path:
    path = Path(path)
    header = (f"# schema: click-stream; schema_version={SCHEMA_VERSION}; slot_width={stream.slot_width!r}; "
              f"n_slots={stream.n_slots}; segment_slots={stream.segment_slots}; k={stream.meta.get('k', 1)}\n"
              "port,slot,multiplicity")
    rows = np.column_stack([stream.port, stream.slot, stream.multiplicity]).astype(object)
    rows[:, 0] = [PORT_NAMES[p] for p in stream.port]
    try:
        np.savetxt(path, rows, fmt="%s", delimiter=",", header=header, comments="")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> ClickStream:
    """Read a click-stream CSV (header comment carries slot_width, n_slots, segment_slots)."""
    path = Path(path)
    try:
        first = path.open().readline()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    layout = {}
    for part in first.lstrip("# ").split(";"):
        if "=" in part:
            key, val = part.split("=", 1)
            layout[key.strip()] = val.strip()
    for key in ("slot_width", "n_slots", "segment_slots"):
        if key not in layout:
            raise ConfigError(f"{path}: header lacks {key}")
    header, rows = read_csv_rows(path)
    if header != ["port", "slot", "multiplicity"]:
        raise ConfigError(f"{path}: expected columns port,slot,multiplicity, got {header}")
    port, slot, mult = [], [], []
    for lineno, fields in rows:
        try:
            if len(fields) != 3 or fields[0] not in PORT_CODES:
                raise ValueError
            port.append(PORT_CODES[fields[0]])
            slot.append(int(fields[1]))
            mult.append(int(fields[2]))
        except ValueError:
            raise ConfigError(f"{path}: malformed row at line {lineno}: {','.join(fields)}") from None
    return ClickStream(np.array(port), np.array(slot, dtype=np.uint64), np.array(mult),
                       float(layout["slot_width"]), int(layout["n_slots"]), int(layout["segment_slots"]),
                       {"k": int(layout.get("k", 1))})
