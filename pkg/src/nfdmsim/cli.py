"""Command-line front end: sweep runs, transceiver self-checks, and the
config template."""

import argparse
import math
import sys
import warnings

import numpy as np

from .channel import LinkDescription, path_average_factor, propagate_link
from .core import ComplexEnvelope, NormalizationMap, spectrum_energy
from .forward import full_nft
from .harness import (
    DEFAULT_CONFIG,
    load_config,
    parse_config,
    run_sweep,
)
from .inverse import synthesize
from .modem import ModulationConfig, encode_frame, evm


def _add_common(p):
    p.add_argument("--config", help="INI file; defaults are used when omitted")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", help="override the output directory")
    p.add_argument(
        "--threads", type=int, default=1,
        help="worker processes for sweep points (default 1, serial)",
    )


def _load(args):
    if args.config:
        return load_config(args.config)
    return parse_config(DEFAULT_CONFIG)


def cmd_print_config(args):
    sys.stdout.write(DEFAULT_CONFIG)
    return 0


def cmd_run(args):
    rc = _load(args)
    out = run_sweep(
        rc, seed=args.seed, out_dir=args.out_dir, threads=args.threads
    )
    print(f"wrote {out.run_dir}")
    print(
        "scheme          P_launch   Q_cont    BER_cont   Q_disc   flags"
    )
    for r in out.rows:
        flags = []
        if not r.feasible:
            flags.append("infeasible")
        if r.feasible and r.provisional:
            flags.append("provisional")
        print(
            f"{r.scheme:<12} {r.launch_power_dbm:9.2f} {r.q_continuous_db:8.2f} "
            f"{r.ber_continuous:10.3g} {r.q_discrete_db:8.2f}   {','.join(flags)}"
        )
    for rep in out.reports:
        tail = f"  [{rep.flag}]" if rep.flag else ""
        print(
            f"threshold {rep.scheme:<6} P_opt = {rep.p_opt_dbm:6.2f} dBm, "
            f"Q_peak = {rep.q_peak_db:5.2f} dB{tail}"
        )
    for scheme, shift, flag in out.shifts:
        tail = f"  [{flag}]" if flag else ""
        print(f"shift {scheme} vs c: {shift:+5.2f} dB{tail}")
    return 0


def cmd_roundtrip(args):
    """Modulate, synthesize, and re-detect random symbols back to back."""
    rc = _load(args)
    seed = rc.seed if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    n = args.symbols
    window = (-7.5, 7.5)
    dt = 15.0 / 6144
    failed = False
    for scheme in ("c", "c+d1", "c+d2"):
        mcfg = rc.modem_config(scheme, amplitude_a=args.amplitude)
        ev_err = qd_err = evm_max = 0.0
        for _ in range(n):
            bits = rng.integers(0, 2, mcfg.bits_per_symbol)
            frame = encode_frame(bits, mcfg)
            env = synthesize(frame.tx_spectrum, time_window=window, dt=dt)
            want = frame.tx_spectrum
            seeds = None
            if want.discrete is not None:
                # receiver-aided search, offset to prove reconvergence
                seeds = np.array(want.discrete.eigenvalues) * 1.02
            got = full_nft(env, grid=want.continuous.lam, seeds=seeds)
            evm_max = max(
                evm_max,
                evm(got.continuous.values, want.continuous.values),
            )
            if want.discrete is not None:
                if got.discrete is None:
                    ev_err = qd_err = math.inf
                    continue
                tx_ev = np.array(want.discrete.eigenvalues)
                tx_qd = np.array(want.discrete.amplitudes)
                got_ev = np.array(got.discrete.eigenvalues)
                got_qd = np.array(got.discrete.amplitudes)
                for lam, qd in zip(tx_ev, tx_qd):
                    k = int(np.argmin(np.abs(got_ev - lam)))
                    ev_err = max(ev_err, abs(got_ev[k] - lam))
                    qd_err = max(qd_err, abs(got_qd[k] - qd) / abs(qd))
        ok = evm_max < 0.01 and ev_err < 1e-4 and qd_err < 0.01
        failed |= not ok
        print(
            f"{scheme:<6} {n} symbols: max EVM {evm_max:.2e}, "
            f"max eigenvalue error {ev_err:.2e}, max amplitude error "
            f"{qd_err:.2e}  {'PASS' if ok else 'FAIL'}"
        )
    return 1 if failed else 0


def cmd_oracle(args):
    """Closed-form checks: eigenvalue ladders, soliton invariance, energy
    bookkeeping, and the path-average factor."""
    failed = False

    def report(name, err, tol):
        nonlocal failed
        ok = err < tol
        failed |= not ok
        print(f"{name}: {err:.3g} (tol {tol:g})  {'PASS' if ok else 'FAIL'}")

    # sech-profile ladders: q = A sech(t) has eigenvalues i(A - k + 1/2)
    for amp in (1.0, 3.0):
        t = np.arange(-12.0, 12.0, 24.0 / 8192)
        env = ComplexEnvelope(amp / np.cosh(t), 24.0 / 8192, t0=-12.0,
                              units="normalized")
        want = np.array(
            [1j * (amp - k + 0.5) for k in range(1, int(amp + 0.5) + 1)]
        )
        spec = full_nft(env, seeds=want * 1.02)
        got = np.sort_complex(np.array(spec.discrete.eigenvalues))
        err = float(np.max(np.abs(got - np.sort_complex(want))))
        report(f"sech ladder A={amp}", err, 1e-4)

    # energy identity: waveform energy equals its spectral total
    rng = np.random.default_rng(5)
    mcfg = ModulationConfig(scheme="c+d2", amplitude_a=0.8)
    frame = encode_frame(rng.integers(0, 2, mcfg.bits_per_symbol), mcfg)
    env = synthesize(frame.tx_spectrum, time_window=(-7.5, 7.5), dt=15.0 / 6144)
    e_time = float(np.sum(np.abs(env.samples) ** 2) * env.dt)
    spec = full_nft(
        env,
        grid=np.arange(-60.0, 60.0, 0.01),
        seeds=np.array(frame.tx_spectrum.discrete.eigenvalues) * 1.02,
    )
    with warnings.catch_warnings():
        # subcarrier tails roll off slowly; the tolerance owns the cutoff
        warnings.simplefilter("ignore")
        e_spec = spectrum_energy(spec)
    report("spectral energy identity", abs(e_time - e_spec) / e_time, 1e-3)

    # lossless soliton: peak height survives one normalized length
    nmap = NormalizationMap()
    half = 0.5
    t = np.arange(-20.0, 20.0, 40.0 / 4096)
    q = 2.0 * half / np.cosh(2.0 * half * t)
    env = ComplexEnvelope(q, 40.0 / 4096, t0=-20.0, units="normalized")
    from .core import denormalize, normalize

    phys = denormalize(env, nmap)
    span_km = 2.0 * nmap.l_norm_m / 1e3
    link = LinkDescription(
        span_length_km=span_km, spans_per_loop=1, loop_count=1,
        alpha_db_per_km=0.0, noise_figure_db=None, step_km=span_km / 4096,
    )
    out = normalize(propagate_link(phys, link), nmap)
    drift = abs(np.max(np.abs(out.samples)) - 2.0 * half) / (2.0 * half)
    report("soliton peak invariance", drift, 5e-3)

    # path-average factor for the default span
    f = path_average_factor(LinkDescription())
    report("path-average factor", abs(f - 0.26077455302), 1e-6)
    return 1 if failed else 0


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="nfdmsim",
        description="nonlinear-spectrum transmission simulator",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the configured sweep")
    _add_common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_rt = sub.add_parser(
        "roundtrip", help="back-to-back modulation self-check"
    )
    _add_common(p_rt)
    p_rt.add_argument("--symbols", type=int, default=20)
    p_rt.add_argument("--amplitude", type=float, default=0.7)
    p_rt.set_defaults(fn=cmd_roundtrip)

    p_or = sub.add_parser("oracle", help="closed-form physics checks")
    _add_common(p_or)
    p_or.set_defaults(fn=cmd_oracle)

    p_pc = sub.add_parser(
        "print-config", help="write the default INI template to stdout"
    )
    _add_common(p_pc)
    p_pc.set_defaults(fn=cmd_print_config)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
