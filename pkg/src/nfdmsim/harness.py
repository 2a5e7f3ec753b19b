"""Sweep harness: config files, burst pipeline, metrics, and CSV output.

A run is a grid of (scheme, launch power) points.  Each point transmits
bursts of 32 symbols (1 pilot + 31 payload), pushes them through the
amplified link, and decodes per symbol.  Launch power is tuned through
the subcarrier amplitude alone; the eigenvalue alphabet fixes the
discrete-spectrum power, so points below that floor are recorded as
infeasible and skipped.  The normalized design maps to transmit power
through the path-averaged nonlinearity, which boosts the launch power by
1/f relative to the plain lossless map.
"""

import configparser
import hashlib
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import (
    LinkDescription,
    adc_quantize,
    laser_phase_walk,
    obpf,
    path_average_factor,
    propagate_link,
)
from .core import ComplexEnvelope, NormalizationMap, denormalize, normalize
from .forward import continuous_spectrum
from .inverse import synthesize
from .modem import (
    SCHEMES,
    ModulationConfig,
    band_decimate,
    band_upsample,
    ber_to_q,
    decode_continuous,
    decode_discrete,
    dispersion_compensate,
    encode_frame,
    eq1_profile,
    ofdm_decode,
    ofdm_encode,
    ofdm_train_equalizer,
    train_equalizer,
)

SYMBOLS_PER_BURST = 32
PAYLOAD_PER_BURST = SYMBOLS_PER_BURST - 1
MIN_COUNTED_ERRORS = 100
OBPF_BANDWIDTH_HZ = 50e9

DEFAULT_CONFIG = """\
[run]
seed = 1234
schemes = c, c+d1, c+d2, ofdm
symbols_per_point = 217
out_dir = runs

[sweep]
powers_dbm = -12, -11, -10, -9, -8, -7, -6, -5, -4, -3

[modem]
t_c = 2.0
t_s = 10.0
guard = 4.0
d2_index_mode = subset8
samples_per_symbol = 1024
oversampling = 4

[link]
span_length_km = 81.3
spans_per_loop = 3
loop_count = 6
alpha_db_per_km = 0.2
noise_figure_db = 5.0
; 0.5 km keeps a full sweep fast; the first span of every burst re-checks
; convergence against a doubled step and warns if the output drifts
step_km = 0.5
adc_bits =
linewidth_hz = 0.0
"""

_SCHEME_SLUGS = {"c": "c", "c+d1": "c_d1", "c+d2": "c_d2", "ofdm": "ofdm"}


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1234
    schemes: tuple = ("c", "c+d1", "c+d2", "ofdm")
    symbols_per_point: int = 217
    out_dir: str = "runs"
    powers_dbm: tuple = tuple(float(p) for p in range(-12, -2))
    t_c: float = 2.0
    t_s: float = 10.0
    guard: float = 4.0
    d2_index_mode: str = "subset8"
    samples_per_symbol: int = 1024
    oversampling: int = 4
    link: LinkDescription = field(default_factory=LinkDescription)

    def __post_init__(self):
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ValueError("duplicate scheme in the sweep list")
        if self.symbols_per_point < 1:
            raise ValueError("symbols_per_point must be positive")
        if len(self.powers_dbm) < 1:
            raise ValueError("the sweep needs at least one power point")
        if self.oversampling < 1:
            raise ValueError("oversampling must be a positive integer")

    def modem_config(self, scheme, amplitude_a=1.0):
        return ModulationConfig(
            scheme=scheme,
            amplitude_a=amplitude_a,
            t_c=self.t_c,
            t_s=self.t_s,
            guard=self.guard,
            d2_index_mode=self.d2_index_mode,
            samples_per_symbol=self.samples_per_symbol,
            oversampling=self.oversampling,
        )

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp["run"] = {
            "seed": str(self.seed),
            "schemes": ", ".join(self.schemes),
            "symbols_per_point": str(self.symbols_per_point),
            "out_dir": self.out_dir,
        }
        cp["sweep"] = {"powers_dbm": ", ".join(_fmt(p) for p in self.powers_dbm)}
        cp["modem"] = {
            "t_c": _fmt(self.t_c),
            "t_s": _fmt(self.t_s),
            "guard": _fmt(self.guard),
            "d2_index_mode": self.d2_index_mode,
            "samples_per_symbol": str(self.samples_per_symbol),
            "oversampling": str(self.oversampling),
        }
        lk = self.link
        cp["link"] = {
            "span_length_km": _fmt(lk.span_length_km),
            "spans_per_loop": str(lk.spans_per_loop),
            "loop_count": str(lk.loop_count),
            "alpha_db_per_km": _fmt(lk.alpha_db_per_km),
            "noise_figure_db": "" if lk.noise_figure_db is None else _fmt(lk.noise_figure_db),
            "step_km": _fmt(lk.step_km),
            "adc_bits": "" if lk.adc_bits is None else str(lk.adc_bits),
            "linewidth_hz": _fmt(lk.linewidth_hz),
        }
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def config_hash(self):
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:12]


_SECTION_KEYS = {
    "run": {"seed", "schemes", "symbols_per_point", "out_dir"},
    "sweep": {"powers_dbm"},
    "modem": {
        "t_c", "t_s", "guard", "d2_index_mode",
        "samples_per_symbol", "oversampling",
    },
    "link": {
        "span_length_km", "spans_per_loop", "loop_count", "alpha_db_per_km",
        "noise_figure_db", "amplifier_gain_db", "step_km", "adc_bits",
        "linewidth_hz", "beta2_ps2_km", "gamma_w_km",
    },
}


def parse_config(text):
    """Build a RunConfig from INI text; unknown keys are rejected."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read_string(text)
    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ValueError(f"unknown config section [{section}]")
        extra = set(cp[section]) - _SECTION_KEYS[section]
        if extra:
            raise ValueError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}"
            )

    def get(section, key, fallback):
        if section in cp and key in cp[section] and cp[section][key].strip() != "":
            return cp[section][key].strip()
        return fallback

    def getf(section, key, fallback):
        v = get(section, key, None)
        return fallback if v is None else float(v)

    def geti(section, key, fallback):
        v = get(section, key, None)
        return fallback if v is None else int(v)

    def opt(section, key, cast):
        v = get(section, key, None)
        return None if v is None else cast(v)

    schemes = tuple(
        s.strip() for s in get("run", "schemes", "c, c+d1, c+d2, ofdm").split(",")
        if s.strip()
    )
    powers = tuple(
        float(p) for p in get("sweep", "powers_dbm", "-12, -3").split(",")
        if p.strip()
    )
    link = LinkDescription(
        span_length_km=getf("link", "span_length_km", 81.3),
        spans_per_loop=geti("link", "spans_per_loop", 3),
        loop_count=geti("link", "loop_count", 6),
        alpha_db_per_km=getf("link", "alpha_db_per_km", 0.2),
        noise_figure_db=opt("link", "noise_figure_db", float),
        amplifier_gain_db=opt("link", "amplifier_gain_db", float),
        step_km=getf("link", "step_km", 0.1),
        adc_bits=opt("link", "adc_bits", int),
        beta2_ps2_km=opt("link", "beta2_ps2_km", float),
        gamma_w_km=opt("link", "gamma_w_km", float),
        linewidth_hz=getf("link", "linewidth_hz", 0.0),
    )
    return RunConfig(
        seed=geti("run", "seed", 1234),
        schemes=schemes,
        symbols_per_point=geti("run", "symbols_per_point", 217),
        out_dir=get("run", "out_dir", "runs"),
        powers_dbm=powers,
        t_c=getf("modem", "t_c", 2.0),
        t_s=getf("modem", "t_s", 10.0),
        guard=getf("modem", "guard", 4.0),
        d2_index_mode=get("modem", "d2_index_mode", "subset8"),
        samples_per_symbol=geti("modem", "samples_per_symbol", 1024),
        oversampling=geti("modem", "oversampling", 4),
        link=link,
    )


def load_config(path):
    return parse_config(Path(path).read_text())


# launch-power calibration through the spectral energy identity:
# E = (1/pi) int ln(1+|q_c|^2) dlam + 4 sum Im(lambda_k).  The subcarrier
# amplitude enters only the first term, so a bisection on A hits any
# feasible mean burst energy.  A fixed internal seed keeps the calibration
# (and with it every published number) reproducible.

_CALIBRATION_SEED = 20210607
_CAL_DRAWS = 16


def _profile_power_table(mcfg):
    rng = np.random.default_rng(_CALIBRATION_SEED)
    lam = np.arange(-150.0, 150.0, 0.05)
    rows = []
    from .modem import qam16_map

    for _ in range(_CAL_DRAWS):
        bits = rng.integers(0, 2, mcfg.continuous_bits)
        c = qam16_map(bits)
        prof = eq1_profile(lam, c, 1.0, mcfg.t_c)
        rows.append(np.abs(prof) ** 2)
    return np.array(rows), lam[1] - lam[0]


def discrete_energy(mcfg):
    """Mean normalized energy of the eigenvalue payload (4 sum Im)."""
    if mcfg.scheme == "c+d1":
        pairs = mcfg.d1_pairs
    elif mcfg.scheme == "c+d2":
        pairs = mcfg.active_d2_pairs
    else:
        return 0.0
    sums = [4.0 * (p[0].imag + p[1].imag) for p in pairs]
    return float(np.mean(sums))


def continuous_energy(mcfg, amplitude, table=None):
    """Mean normalized energy of the subcarrier payload at amplitude A."""
    if table is None:
        table = _profile_power_table(mcfg)
    s, dl = table
    e = np.log1p(amplitude**2 * s).sum(axis=1) * dl / np.pi
    return float(np.mean(e))


def amplitude_for_power(mcfg, target_w, p_norm_w, table=None):
    """Solve the subcarrier amplitude that lands the launch-power target.

    Returns None when the target sits at or below the fixed discrete
    floor, i.e. no amplitude can reach it.
    """
    if table is None:
        table = _profile_power_table(mcfg)
    e_target = target_w / p_norm_w * mcfg.t_s
    e_d = discrete_energy(mcfg)
    if e_target <= e_d * 1.02 + 1e-9:
        return None
    want = e_target - e_d
    lo, hi = 1e-4, 64.0
    if continuous_energy(mcfg, hi, table) < want:
        return None
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if continuous_energy(mcfg, mid, table) < want:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


@dataclass
class SweepResult:
    scheme: str
    target_power_dbm: float
    launch_power_dbm: float = math.nan
    q_continuous_db: float = math.nan
    ber_continuous: float = math.nan
    evm_continuous: float = math.nan
    q_discrete_db: float = math.nan
    ber_discrete: float = math.nan
    corr_e1e2: complex = complex(math.nan, math.nan)
    amplitude_a: float = math.nan
    n_symbols: int = 0
    n_bits: int = 0
    n_errors: int = 0
    n_erasures: int = 0
    provisional: bool = True
    feasible: bool = True
    runtime_s: float = 0.0


# runtime stays off the CSV so reruns of a seeded config are byte-identical
RESULT_COLUMNS = (
    "scheme", "target_power_dbm", "launch_power_dbm", "q_continuous_db",
    "ber_continuous", "evm_continuous", "q_discrete_db", "ber_discrete",
    "corr_re", "corr_im", "amplitude_a", "n_symbols", "n_bits", "n_errors",
    "n_erasures", "provisional", "feasible",
)


def _result_row(r):
    return [
        r.scheme, _fmt(r.target_power_dbm), _fmt(r.launch_power_dbm),
        _fmt(r.q_continuous_db), _fmt(r.ber_continuous),
        _fmt(r.evm_continuous), _fmt(r.q_discrete_db), _fmt(r.ber_discrete),
        _fmt(r.corr_e1e2.real), _fmt(r.corr_e1e2.imag), _fmt(r.amplitude_a),
        _fmt(r.n_symbols), _fmt(r.n_bits), _fmt(r.n_errors),
        _fmt(r.n_erasures), _fmt(r.provisional), _fmt(r.feasible),
    ]


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _burst_bits(rc, mcfg, si, pi, bi):
    rng = _rng(rc.seed, si, pi, bi, 0)
    n = mcfg.continuous_bits if mcfg.scheme == "ofdm" else mcfg.bits_per_symbol
    return [rng.integers(0, 2, n) for _ in range(SYMBOLS_PER_BURST)]


def _tx_burst_nft(bits_list, mcfg, rc):
    dt_fine = mcfg.t_s / (mcfg.samples_per_symbol * mcfg.oversampling)
    chunks = []
    for bits in bits_list:
        frame = encode_frame(bits, mcfg)
        env = synthesize(frame.tx_spectrum, time_window=mcfg.time_window, dt=dt_fine)
        chunks.append(env.samples)
    fine = ComplexEnvelope(
        np.concatenate(chunks), dt_fine, t0=-0.5 * mcfg.t_s, units="normalized"
    )
    return band_decimate(fine, mcfg.oversampling)


def _tx_burst_ofdm(bits_list, mcfg, p_norm):
    chunks = [ofdm_encode(bits, mcfg, p_norm).samples for bits in bits_list]
    dt = mcfg.t_s / mcfg.samples_per_symbol
    return ComplexEnvelope(
        np.concatenate(chunks), dt, t0=-0.5 * mcfg.t_s + 0.5 * dt,
        units="normalized",
    )


def _through_link(tx_norm, rc, nmap_eff, si, pi, bi):
    link = rc.link
    tx_phys = denormalize(tx_norm, nmap_eff)
    launch_w = float(np.mean(np.abs(tx_phys.samples) ** 2))
    rx = propagate_link(
        tx_phys, link,
        seed=np.random.SeedSequence(rc.seed, spawn_key=(si, pi, bi, 1)),
    )
    if link.linewidth_hz > 0.0:
        rx = laser_phase_walk(rx, link.linewidth_hz, rng=_rng(rc.seed, si, pi, bi, 2))
    rx = obpf(rx, OBPF_BANDWIDTH_HZ)
    if link.adc_bits is not None:
        rx = adc_quantize(rx, link.adc_bits)
    return normalize(rx, nmap_eff), launch_w


def _slice_symbols(burst_env, mcfg, n_per_symbol):
    out = []
    for k in range(SYMBOLS_PER_BURST):
        chunk = burst_env.samples[k * n_per_symbol : (k + 1) * n_per_symbol]
        out.append(
            ComplexEnvelope(chunk, burst_env.dt, t0=-0.5 * mcfg.t_s,
                            units="normalized")
        )
    return out


def run_point(rc, scheme, power_dbm, si, pi):
    """Transmit and decode every burst of one sweep point.

    Returns (SweepResult, artifacts) where artifacts maps a kind to CSV
    rows: const (subcarrier soft symbols), disc (eigenvalue samples),
    phase (per-symbol common phase).
    """
    t_start = time.perf_counter()
    link = rc.link
    nmap_eff = link.nmap.path_averaged(path_average_factor(link))
    zeta = link.normalized_length
    target_w = 10.0 ** (power_dbm / 10.0) * 1e-3
    n_bursts = math.ceil(rc.symbols_per_point / PAYLOAD_PER_BURST)
    artifacts = {"const": [], "disc": [], "phase": []}

    mcfg0 = rc.modem_config(scheme)
    if scheme == "ofdm":
        amp = math.nan
        p_norm = target_w / nmap_eff.p_norm_w
    else:
        table = _profile_power_table(mcfg0)
        amp = amplitude_for_power(mcfg0, target_w, nmap_eff.p_norm_w, table)
        if amp is None:
            return (
                SweepResult(scheme=scheme, target_power_dbm=power_dbm,
                            feasible=False,
                            runtime_s=time.perf_counter() - t_start),
                artifacts,
            )
    mcfg = rc.modem_config(scheme, amplitude_a=1.0 if scheme == "ofdm" else amp)
    pts = np.sort(mcfg.subcarrier_points)

    pilots = []
    records = []  # (global symbol index, tx bits, rx spectrum or env, rx env)
    launch_acc = []
    for bi in range(n_bursts):
        bits_list = _burst_bits(rc, mcfg, si, pi, bi)
        if scheme == "ofdm":
            tx_norm = _tx_burst_ofdm(bits_list, mcfg, p_norm)
        else:
            tx_norm = _tx_burst_nft(bits_list, mcfg, rc)
        rx_norm, launch_w = _through_link(tx_norm, rc, nmap_eff, si, pi, bi)
        launch_acc.append(launch_w)
        if scheme == "ofdm":
            rx_comp = dispersion_compensate(rx_norm, zeta)
            slices = _slice_symbols(rx_comp, mcfg, mcfg.samples_per_symbol)
            for k, env in enumerate(slices):
                if k == 0:
                    pilots.append((env, bits_list[k]))
                else:
                    records.append((bits_list[k], env, None))
        else:
            fine = band_upsample(rx_norm, mcfg.oversampling)
            nfine = mcfg.samples_per_symbol * mcfg.oversampling
            slices = _slice_symbols(fine, mcfg, nfine)
            for k, env in enumerate(slices):
                spec = continuous_spectrum(env, pts)
                if k == 0:
                    pilots.append((spec, bits_list[k]))
                else:
                    records.append((bits_list[k], spec, env))

    if scheme == "ofdm":
        eq = ofdm_train_equalizer(pilots, mcfg)
    else:
        eq = train_equalizer(pilots, mcfg, link=zeta)

    n_err = 0
    n_bits = 0
    err_d = 0
    bits_d = 0
    n_erasures = 0
    evm_sq = []
    e1s, e2s = [], []
    n_payload = 0
    for sym, (tx_bits, carrier, env) in enumerate(records):
        if n_payload >= rc.symbols_per_point:
            break
        n_payload += 1
        if scheme == "ofdm":
            bits_c, mc = ofdm_decode(carrier, mcfg, equalizer=eq)
        else:
            bits_c, mc = decode_continuous(carrier, mcfg, link=zeta, equalizer=eq)
        tx_c = tx_bits[: mcfg.continuous_bits]
        n_err += int(np.sum(bits_c != tx_c))
        n_bits += tx_c.size
        evm_sq.append(mc.evm**2)
        artifacts["phase"].append([_fmt(sym), _fmt(mc.common_phase), _fmt(mc.evm)])
        for k, s in enumerate(mc.soft_symbols):
            artifacts["const"].append(
                [_fmt(sym), _fmt(k), _fmt(s.real), _fmt(s.imag)]
            )
        if mcfg.discrete_bits:
            bits_dd, md = decode_discrete(
                env, mcfg, link=zeta, common_phase=mc.common_phase
            )
            tx_d = tx_bits[mcfg.continuous_bits :]
            err_d += int(np.sum(bits_dd != tx_d))
            bits_d += tx_d.size
            if md.erasure:
                n_erasures += 1
                artifacts["disc"].append(
                    [_fmt(sym), "1"] + ["nan"] * 10 + [_fmt(-1)]
                )
            else:
                (e1, e2), = md.eigen_errors
                e1s.append(e1)
                e2s.append(e2)
                s1, s2 = md.soft_symbols
                artifacts["disc"].append([
                    _fmt(sym), "0",
                    _fmt(e1.real), _fmt(e1.imag), _fmt(e2.real), _fmt(e2.imag),
                    _fmt(s1.real), _fmt(s1.imag), _fmt(s2.real), _fmt(s2.imag),
                    _fmt(np.angle(s1)), _fmt(md.decided_index),
                ])

    ber_c = n_err / n_bits if n_bits else math.nan
    res = SweepResult(
        scheme=scheme,
        target_power_dbm=power_dbm,
        launch_power_dbm=10.0 * math.log10(float(np.mean(launch_acc)) / 1e-3),
        q_continuous_db=ber_to_q(ber_c) if n_bits else math.nan,
        ber_continuous=ber_c,
        evm_continuous=float(np.sqrt(np.mean(evm_sq))) if evm_sq else math.nan,
        amplitude_a=amp,
        n_symbols=n_payload,
        n_bits=n_bits,
        n_errors=n_err,
        n_erasures=n_erasures,
        provisional=n_err < MIN_COUNTED_ERRORS,
        runtime_s=time.perf_counter() - t_start,
    )
    if bits_d:
        res.ber_discrete = err_d / bits_d
        res.q_discrete_db = ber_to_q(min(res.ber_discrete, 0.5))
    if len(e1s) >= 2:
        res.corr_e1e2 = _complex_corr(np.array(e1s), np.array(e2s))
    return res, artifacts


def _complex_corr(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2)))
    if den == 0.0:
        return complex(math.nan, math.nan)
    return complex(np.mean(a * np.conj(b)) / den)


def _point_job(args):
    rc, scheme, power_dbm, si, pi = args
    return run_point(rc, scheme, power_dbm, si, pi)


@dataclass
class ThresholdReport:
    scheme: str
    p_opt_dbm: float
    q_peak_db: float
    flag: str = ""


def fit_threshold(powers_dbm, q_db):
    """Locate the Q-versus-power peak with a 3-point quadratic fit.

    Wants >= 5 finite points; a peak sitting on the sweep edge or a
    non-concave fit is returned with a flag and the raw argmax instead of
    a vertex.
    """
    x = np.asarray(powers_dbm, dtype=float)
    y = np.asarray(q_db, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    order = np.argsort(x)
    x, y = x[order], y[order]
    if x.size < 5:
        raise ValueError("threshold fit needs at least five finite power points")
    i = int(np.argmax(y))
    if i == 0 or i == x.size - 1:
        return float(x[i]), float(y[i]), "edge"
    a, b, c = np.polyfit(x[i - 1 : i + 2], y[i - 1 : i + 2], 2)
    if a >= 0:
        return float(x[i]), float(y[i]), "nonconcave"
    p = -b / (2.0 * a)
    p = float(np.clip(p, x[i - 1], x[i + 1]))
    return p, float(np.polyval([a, b, c], p)), ""


def report_threshold(rows):
    """Per-scheme peak fits from sweep rows (infeasible points ignored)."""
    reports = []
    for scheme in dict.fromkeys(r.scheme for r in rows):
        pts = [r for r in rows if r.scheme == scheme and r.feasible]
        p, q, flag = fit_threshold(
            [r.launch_power_dbm for r in pts],
            [r.q_continuous_db for r in pts],
        )
        reports.append(ThresholdReport(scheme, p, q, flag))
    return reports


def threshold_shifts(reports):
    """Launch-power threshold of each composite scheme relative to plain
    subcarrier modulation; inherits the fit flags of both ends."""
    by = {r.scheme: r for r in reports}
    out = []
    if "c" not in by:
        return out
    base = by["c"]
    for scheme in ("c+d1", "c+d2"):
        if scheme in by:
            r = by[scheme]
            flag = ",".join(f for f in (base.flag, r.flag) if f)
            out.append((scheme, r.p_opt_dbm - base.p_opt_dbm, flag))
    return out


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


DISC_COLUMNS = (
    "symbol", "erasure", "e1_re", "e1_im", "e2_re", "e2_im",
    "soft1_re", "soft1_im", "soft2_re", "soft2_im", "phase1", "decided_index",
)


def dump_artifacts(rc, rows, artifacts_by_point, out_dir=None):
    """Write results.csv, threshold.csv, shifts.csv, per-point sample CSVs
    and the resolved config under out_dir/run-<confighash>/."""
    root = Path(out_dir if out_dir is not None else rc.out_dir)
    run_dir = root / f"run-{rc.config_hash()}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.ini").write_text(rc.to_ini())
    _write_csv(run_dir / "results.csv", RESULT_COLUMNS,
               [_result_row(r) for r in rows])
    try:
        reports = report_threshold(rows)
    except ValueError:
        reports = []
    _write_csv(
        run_dir / "threshold.csv",
        ("scheme", "p_opt_dbm", "q_peak_db", "flag"),
        [[r.scheme, _fmt(r.p_opt_dbm), _fmt(r.q_peak_db), r.flag] for r in reports],
    )
    _write_csv(
        run_dir / "shifts.csv",
        ("scheme", "shift_db", "flag"),
        [[s, _fmt(d), f] for s, d, f in threshold_shifts(reports)],
    )
    for (scheme, pi), arts in artifacts_by_point.items():
        slug = _SCHEME_SLUGS[scheme]
        if arts["const"]:
            _write_csv(run_dir / f"{slug}_p{pi:02d}_const.csv",
                       ("symbol", "carrier", "rx_re", "rx_im"), arts["const"])
        if arts["phase"]:
            _write_csv(run_dir / f"{slug}_p{pi:02d}_phase.csv",
                       ("symbol", "common_phase", "evm"), arts["phase"])
        if arts["disc"]:
            _write_csv(run_dir / f"{slug}_p{pi:02d}_disc.csv",
                       DISC_COLUMNS, arts["disc"])
    return run_dir


@dataclass
class RunOutput:
    rows: list
    reports: list
    shifts: list
    run_dir: Path = None


def run_sweep(config, seed=None, out_dir=None, threads=1, write=True):
    """Execute the whole (scheme x power) grid described by a config.

    config may be a RunConfig, a path to an INI file, or INI text.
    seed/out_dir override the config before anything is derived from it,
    so the run directory hash reflects what actually ran.  threads > 1
    distributes points over processes; results are identical to a serial
    run because every random draw is keyed by (scheme, power, burst).
    """
    if isinstance(config, RunConfig):
        rc = config
    else:
        text = str(config)
        rc = parse_config(text) if "\n" in text else load_config(text)
    if seed is not None:
        rc = replace(rc, seed=int(seed))
    if out_dir is not None:
        rc = replace(rc, out_dir=str(out_dir))

    jobs = [
        (rc, scheme, p, si, pi)
        for si, scheme in enumerate(rc.schemes)
        for pi, p in enumerate(rc.powers_dbm)
    ]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=int(threads)) as pool:
            outputs = list(pool.map(_point_job, jobs))
    else:
        outputs = [_point_job(j) for j in jobs]

    rows = [res for res, _ in outputs]
    artifacts = {
        (job[1], job[4]): arts for job, (_, arts) in zip(jobs, outputs)
    }
    try:
        reports = report_threshold(rows)
    except ValueError:
        reports = []
    shifts = threshold_shifts(reports)
    out = RunOutput(rows=rows, reports=reports, shifts=shifts)
    if write:
        out.run_dir = dump_artifacts(rc, rows, artifacts)
    return out
