"""
Command-line front end.

Exit codes: 0 success, 2 configuration or validation error, 3 an exhaustive
computation refused its size bound, 4 internal error.
"""

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import serialize as io
from .bitchan import (
    InfeasibleError, bec_entropy_profile, construct_code, exact_entropy_profile,
    mc_entropy_profile,
)
from .probability import ValidationError, conditional_entropy, is_less_noisy
from .ska import ska_alice, ska_bob

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4

PRESETS = {
    # toy geometry: N = 8 split as L = 4, M = 2, giving K = 2 and J = 2
    "toy": {"channel": {"kind": "bsc_cascade", "p1": 0.05, "p2": 0.4, "p_one": 0.3},
            "construct": {"L": 4, "M": 2, "eps1": 0.2, "eps2": 0.2, "mode": "exact"}},
    "cascade": {"channel": {"kind": "bsc_cascade", "p1": 0.05, "p2": 0.15},
                "construct": {"L": 1024, "M": 16, "eps1": 0.01, "eps2": 0.01,
                              "mode": "mc", "trials": 10000}},
}

CONSTRUCT_DEFAULTS = {"eps1": 0.01, "eps2": 0.01, "mode": "mc", "trials": 10000}


class ConfigError(ValidationError):
    pass


def _now():
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need_seed(args):
    if args.seed is None:
        raise ConfigError(f"'{args.command}' is randomized and needs --seed")


def _power_of_two(name, v):
    if v is None or v < 1 or v & (v - 1):
        raise ConfigError(f"--{name} must be a power of two, got {v}")


def _channel_doc(path):
    doc = io.read_json(path)
    return doc, io.channel_from_dict(doc.get("channel", doc))


def _stamp(doc, code_hash=None, seed=None):
    doc = {"schema": io.SCHEMA_VERSION, **doc}
    if code_hash is not None:
        doc["code_hash"] = code_hash
    if seed is not None:
        doc["seed"] = int(seed)
    doc["created"] = _now()
    return doc


# --- channel ---------------------------------------------------------------

def cmd_channel_make(args):
    if args.preset:
        spec = dict(PRESETS[args.preset]["channel"])
    elif args.kind == "bsc_cascade":
        spec = {"kind": "bsc_cascade", "p1": args.p1, "p2": args.p2, "p_one": args.p_one}
    elif args.kind == "bec_pair":
        spec = {"kind": "bec_pair", "e1": args.e1, "e2": args.e2, "p_one": args.p_one}
    elif args.table:
        spec = io.read_json(args.table)
    else:
        raise ConfigError("channel make needs --preset, --kind or --table")
    if any(v is None for v in spec.values()):
        raise ConfigError(f"incomplete channel parameters: {spec}")
    ch = io.channel_from_dict(spec)
    src = ch.source()
    h_y, h_z = conditional_entropy(src.p_xy), conditional_entropy(src.p_xz)
    summary = {"h_x_given_y": h_y, "h_x_given_z": h_z, "key_rate_benchmark": max(0.0, h_z - h_y)}
    if ch.transition.shape[0] == 2:
        summary["less_noisy"] = is_less_noisy(ch)[0]
    doc = {"type": "channel", "channel": spec, "table": io.channel_to_dict(ch),
           "source_hash": io.source_hash(src), "summary": summary}
    if args.preset:
        doc["preset"] = {"name": args.preset, **PRESETS[args.preset]["construct"]}
    out = _out_dir(args)
    io.write_json(out / "channel.json", _stamp(doc))
    print(f"wrote {out / 'channel.json'}  H(X|Y)={h_y:.6f}  H(X|Z)={h_z:.6f}")
    return EXIT_OK


# --- construct -------------------------------------------------------------

def _construct_params(args, doc):
    preset = doc.get("preset", {})
    p = {}
    for key, flag in (("L", "l"), ("M", "m"), ("eps1", "eps1"), ("eps2", "eps2"),
                      ("mode", "mode"), ("trials", "trials")):
        v = getattr(args, flag, None)
        p[key] = v if v is not None else preset.get(key, CONSTRUCT_DEFAULTS.get(key))
    _power_of_two("l", p["L"])
    _power_of_two("m", p["M"])
    for e in ("eps1", "eps2"):
        if not 0 < p[e] < 0.5:
            raise ConfigError(f"--{e} must lie in (0, 0.5), got {p[e]}")
    return p


def summary_text(code):
    lines = [
        f"L={code.L} M={code.M} N={code.N} mode={code.mode} trials={code.trials} seed={code.seed}",
        f"eps1={code.eps1} eps2={code.eps2}",
        f"inner sets: |R|={len(code.inner.R)} |D|=K={code.K} |I|={len(code.inner.I)} "
        f"|E_K^c|={len(code.Ec)}",
        f"outer set sizes: {[len(f) for f in code.outer_sets]}",
        f"J={code.J} rate={code.rate:.6f}",
        f"benchmark max(0, H(X|Z) - H(X|Y)) = "
        f"{max(0.0, code.meta['h_x_given_z'] - code.meta['h_x_given_y']):.6f}",
    ]
    return "\n".join(lines) + "\n"


def cmd_construct(args):
    _need_seed(args)
    doc, ch = _channel_doc(args.channel)
    p = _construct_params(args, doc)
    code = construct_code(ch.source(), p["L"], p["M"], p["eps1"], p["eps2"], mode=p["mode"],
                          trials=p["trials"], seed=args.seed)
    out = _out_dir(args)
    h = io.save_code(out / "code.json", code, created=_now())
    text = summary_text(code) + f"code_hash={h}\n"
    (out / "summary.txt").write_text(text)
    rows = [{"index": i, "h_bob": float(code.inner_profile.h[i]),
             "h_eve": float(code.eve_profile.h[i]) if code.eve_profile is not None else None,
             "set": "D" if i in set(code.E.tolist()) else ("R" if i in set(code.G.tolist()) else "I")}
            for i in range(code.L)]
    io.write_csv(out / "profile.csv", rows)
    sys.stdout.write(text)
    return EXIT_OK


# --- protocol runs ---------------------------------------------------------

def _load_pair(args):
    _, ch = _channel_doc(args.channel)
    code = io.load_code(args.code)
    if io.source_hash(ch.source()) != io.code_to_dict(code)["source_hash"]:
        raise ConfigError("code spec was built for a different channel")
    return ch, code


def _symbols(a):
    return np.asarray(a).astype(int).tolist()


def _ska_transcript(ch, code, seed, dump):
    x, y, z = ev.ska_trial(ch.source(), code, seed, 0)
    key_a, public, _ = ska_alice(x[None], code)
    key_b, failed = ska_bob(y[None], public, code)
    t = {"trial": 0, "rng": {"entropy": int(seed), "spawn_key": [0, 0]},
         "public": [io.bits_to_hex(c) for c in public[0]],
         "key_alice": io.bits_to_hex(key_a[0]), "key_bob": io.bits_to_hex(key_b[0]),
         "failed": bool(failed[0])}
    if dump:
        t.update(x=io.bits_to_hex(x), y=_symbols(y), z=_symbols(z))
    return t


def _pcc_transcript(ch, code, seed, dump, reduce, message):
    from .pcc import pcc_decode

    d = ev.pcc_trial(ch, code, seed, 0, reduce, message)
    m_hat, failed = pcc_decode(d["y"][None], d["public"][None], code, reduced=reduce)
    t = {"trial": 0, "rng": {"entropy": int(seed), "spawn_key": [0, 0]},
         "public": [io.bits_to_hex(c) for c in d["public"]],
         "message": io.bits_to_hex(d["m"]), "message_hat": io.bits_to_hex(m_hat[0]),
         "failed": bool(failed[0]), "flagged": d["flagged"]}
    if dump:
        t.update(x=io.bits_to_hex(d["x"]), y=_symbols(d["y"]), z=_symbols(d["z"]))
    return t


def cmd_run(args):
    _need_seed(args)
    if args.trials is None or args.trials < 1:
        raise ConfigError("--trials must be a positive integer")
    ch, code = _load_pair(args)
    chash = io.code_to_dict(code)["code_hash"]
    message = None
    if args.command == "pcc" and args.message:
        message = io.bits_from_hex(Path(args.message).read_text())
        if message.size != code.J:
            raise ConfigError(f"message has {message.size} bits, code carries J = {code.J}")
    if args.command == "ska":
        rep = ev.run_trials("ska", ch.source(), code, args.trials, args.seed, args.threads,
                            reduce=args.reduce_public)
        transcript = _ska_transcript(ch, code, args.seed, args.dump_secrets)
    else:
        rep = ev.run_trials("pcc", ch, code, args.trials, args.seed, args.threads,
                            reduce=args.reduce_public, message=message)
        transcript = _pcc_transcript(ch, code, args.seed, args.dump_secrets,
                                     args.reduce_public, message)
    out = _out_dir(args)
    name = args.command
    io.write_csv(out / f"{name}_trials.csv", rep.rows,
                 ["trial", "mismatch", "failed", "flagged", "length", "public_bits"])
    secrecy = ev.secrecy_bound_chain(code) if code.outer_profiles and \
        all(p is not None for p in code.outer_profiles) else None
    report = {"type": f"{name}_report", **rep.summary(),
              "message_source": "file" if message is not None else "seed",
              "secrecy_bound": None if secrecy is None else secrecy.to_json()}
    io.write_json(out / f"{name}_report.json", _stamp(report, chash, args.seed))
    io.write_json(out / f"{name}_transcript.json",
                  _stamp({"type": f"{name}_transcript", "raw_secrets": bool(args.dump_secrets),
                          **transcript}, chash, args.seed))
    lo, hi = rep.interval
    print(f"{name}: trials={rep.trials} mismatches={rep.mismatches} "
          f"rate={rep.rate:.6f} wilson95=[{lo:.4f}, {hi:.4f}]")
    return EXIT_OK


# --- analyze ---------------------------------------------------------------

def _parse_ns(text):
    if ".." in text:
        a, b = (int(v) for v in text.split(".."))
        ns = []
        n = a
        while n <= b:
            ns.append(n)
            n *= 2
    else:
        ns = [int(v) for v in text.split(",")]
    for n in ns:
        _power_of_two("ns", n)
    return ns


def cmd_polarization(args):
    ns = _parse_ns(args.ns)
    mode = args.mode or ("closed" if args.bec is not None else "mc")
    profiles = {}
    if args.bec is not None:
        if mode != "closed":
            raise ConfigError("--bec uses the closed-form recursion; --mode must be 'closed'")
        h_cond = args.bec
        label = f"BEC({args.bec})"
        for n in ns:
            profiles[n] = bec_entropy_profile(args.bec, n)
    elif args.channel:
        _, ch = _channel_doc(args.channel)
        joint = ch.source().project(args.side)
        h_cond = conditional_entropy(joint)
        label = f"{args.channel}:{args.side}"
        if mode == "exact":
            for n in ns:
                profiles[n] = exact_entropy_profile(joint, n)
        elif mode == "mc":
            _need_seed(args)
            for n in ns:
                seq = np.random.SeedSequence(entropy=args.seed, spawn_key=(n,))
                profiles[n] = mc_entropy_profile(joint, n, args.trials or 1000,
                                                 np.random.default_rng(seq))
        else:
            raise ConfigError(f"unknown mode {mode!r}")
    else:
        raise ConfigError("analyze polarization needs --bec or --channel")
    rows = ev.polarization_report(profiles, args.eps, h_cond)
    out = _out_dir(args)
    io.write_csv(out / "polarization.csv", rows)
    io.write_json(out / "polarization.json",
                  _stamp({"type": "polarization", "source": label, "mode": mode, "eps": args.eps,
                          "rows": rows}, seed=args.seed))
    from .plotting import plot_polarization

    plot_polarization(rows, out / "polarization.png")
    for r in rows:
        print(f"N={r['N']:>6}  R={r['R_frac']:.4f}  D={r['D_frac']:.4f}  I={r['I_frac']:.4f}")
    return EXIT_OK


def cmd_secrecy(args):
    doc, ch = _channel_doc(args.channel)
    src = ch.source()
    if args.code:
        _, code = _load_pair(args)
    else:
        p = _construct_params(args, doc)
        code = construct_code(src, p["L"], p["M"], p["eps1"], p["eps2"], mode="exact",
                              seed=args.seed or 0)
    protocols = ["ska", "pcc"] if args.protocol == "both" else [args.protocol]
    result = {"type": "secrecy", "L": code.L, "M": code.M, "K": code.K, "J": code.J}
    for proto in protocols:
        l1 = ev.exact_secrecy_l1(src, code, proto)
        result[f"exact_l1_{proto}"] = l1
        result[f"delta_{proto}"] = l1 / 2
    chain = ev.secrecy_bound_chain(code)
    result["bound"] = chain.to_json()
    result["exact_deficit"] = ev.exact_key_deficit(src, code)
    result["bound_dominates"] = all(chain.pinsker_bound >= result[f"delta_{p}"] - 1e-12
                                    for p in protocols)
    out = _out_dir(args)
    io.write_json(out / "secrecy.json", _stamp(result, io.code_to_dict(code)["code_hash"]))
    for proto in protocols:
        print(f"{proto}: exact L1 = {result[f'exact_l1_{proto}']:.12g}  "
              f"pinsker bound = {chain.pinsker_bound:.12g}")
    return EXIT_OK


def cmd_supersource(args):
    _, ch = _channel_doc(args.channel)
    if args.l is None:
        raise ConfigError("analyze supersource needs --l")
    _power_of_two("l", args.l)
    eps1 = args.eps1 if args.eps1 is not None else 0.1
    rep = ev.super_source_check(ch.source(), args.l, eps1)
    out = _out_dir(args)
    io.write_json(out / "supersource.json", _stamp({"type": "supersource", **rep}))
    verdict = "PASS" if rep["holds"] else "FAIL"
    print(f"{verdict} H(T|C,Y^L) = {rep['h_T_given_C_Y']:.12g} <= K*eps1 = {rep['bound']:.12g} "
          f"(K={rep['K']}, slack {rep['slack']:.6g}); identity gap {rep['identity_gap']:.3g}")
    return EXIT_OK if rep["holds"] else EXIT_INTERNAL


# --- report ----------------------------------------------------------------

def cmd_report(args):
    from . import plotting

    src = Path(args.input)
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    made, rows = [], []
    if (src / "code.json").exists():
        code = io.load_code(src / "code.json")
        made.append(plotting.plot_profiles(code, out / "profiles.png"))
        made.append(plotting.plot_outer_sets(code, out / "outer_sets.png"))
        rows.append({"item": "code", "K": code.K, "J": code.J, "rate": code.rate,
                     "mismatch_rate": None, "wilson_lo": None, "wilson_hi": None})
    summaries = []
    for name in ("ska", "pcc"):
        f = src / f"{name}_report.json"
        if f.exists():
            s = io.read_json(f)
            s["label"] = name
            summaries.append(s)
            rows.append({"item": name, "K": s["K"], "J": s["J"], "rate": s["rate"],
                         "mismatch_rate": s["mismatch_rate"], "wilson_lo": s["wilson95"][0],
                         "wilson_hi": s["wilson95"][1]})
    if summaries:
        made.append(plotting.plot_trial_summary(summaries, out / "mismatch.png"))
    if (src / "polarization.json").exists():
        made.append(plotting.plot_polarization(io.read_json(src / "polarization.json")["rows"],
                                               out / "polarization.png"))
    if not made:
        raise ConfigError(f"no code spec or reports found in {src}")
    io.write_csv(out / "report.csv", rows,
                 ["item", "K", "J", "rate", "mismatch_rate", "wilson_lo", "wilson_hi"])
    for p in made:
        print(f"wrote {p}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def _common(p, seed=True, trials=False, threads=False):
    p.add_argument("--out", required=True, help="output directory")
    if seed:
        p.add_argument("--seed", type=int, help="master seed")
    if trials:
        p.add_argument("--trials", type=int)
    if threads:
        p.add_argument("--threads", type=int, default=1, help="cap on parallel trial workers")


def _code_flags(p):
    p.add_argument("--l", type=int, help="inner block length")
    p.add_argument("--m", type=int, help="outer block length")
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="polarsecrecy",
                                     description="Polar-code secret keys and private channel coding")
    sub = parser.add_subparsers(dest="command", required=True)

    ch = sub.add_parser("channel", help="channel specs").add_subparsers(dest="action", required=True)
    mk = ch.add_parser("make", help="write a channel spec file")
    mk.add_argument("--preset", choices=sorted(PRESETS))
    mk.add_argument("--kind", choices=["bsc_cascade", "bec_pair"])
    mk.add_argument("--table", help="JSON file with an explicit table")
    for f in ("p1", "p2", "e1", "e2"):
        mk.add_argument(f"--{f}", type=float)
    mk.add_argument("--p-one", type=float, default=0.5)
    _common(mk, seed=False)
    mk.set_defaults(func=cmd_channel_make, command="channel make")

    con = sub.add_parser("construct", help="build a code spec")
    con.add_argument("--channel", required=True)
    _code_flags(con)
    con.add_argument("--mode", choices=["exact", "mc"])
    _common(con, trials=True)
    con.set_defaults(func=cmd_construct)

    for name in ("ska", "pcc"):
        p = sub.add_parser(name, help=f"run {name} trials")
        p.add_argument("--channel", required=True)
        p.add_argument("--code", required=True)
        p.add_argument("--reduce-public", action="store_true")
        p.add_argument("--dump-secrets", action="store_true")
        if name == "pcc":
            p.add_argument("--message", help="hex message file (default: uniform from seed)")
        _common(p, trials=True, threads=True)
        p.set_defaults(func=cmd_run, trials=100)

    an = sub.add_parser("analyze", help="diagnostics").add_subparsers(dest="what", required=True)
    pol = an.add_parser("polarization")
    pol.add_argument("--bec", type=float, help="erasure probability (closed form)")
    pol.add_argument("--channel")
    pol.add_argument("--side", choices=["y", "z"], default="y")
    pol.add_argument("--ns", default="64..16384")
    pol.add_argument("--eps", type=float, default=0.1)
    pol.add_argument("--mode", choices=["closed", "exact", "mc"])
    _common(pol, trials=True)
    pol.set_defaults(func=cmd_polarization, command="analyze polarization")

    sec = an.add_parser("secrecy")
    sec.add_argument("--channel", required=True)
    sec.add_argument("--code")
    sec.add_argument("--protocol", choices=["ska", "pcc", "both"], default="both")
    _code_flags(sec)
    _common(sec)
    sec.set_defaults(func=cmd_secrecy, command="analyze secrecy", mode="exact", trials=None)

    sup = an.add_parser("supersource")
    sup.add_argument("--channel", required=True)
    sup.add_argument("--l", type=int)
    sup.add_argument("--eps1", type=float)
    _common(sup, seed=False)
    sup.set_defaults(func=cmd_supersource, command="analyze supersource")

    rep = sub.add_parser("report", help="render figures and a CSV summary from a run directory")
    rep.add_argument("--in", dest="input", required=True)
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
