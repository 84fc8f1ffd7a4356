"""Command-line front end: threshold maps, rate sweeps, simulation, ingestion.

Subcommands: ``threshold``, ``sweep``, ``simulate``, ``ingest``. Tables are
emitted as CSV (default) or JSON; simulation reports are always JSON. An
optional ``--plot`` flag renders a matplotlib figure next to the delimited
output. Exit codes: 0 success, 2 usage, 3 data/parse, 4 numerical
degeneracy.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, replace

from . import channels, encodings, ingest, montecarlo
from .encodings import IndexEncoding, Topology
from .entropy_rates import rate_per_sifted_symbol, rate_per_signal, solve_q_threshold

__all__ = [
    "main",
    "SweepRow",
    "sweep_rates",
    "argmax_k",
    "find_crossover",
]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

PROB_FMT = "{:.6f}"
TH_FMT = "{:.4f}"


@dataclass(frozen=True)
class SweepRow:
    d: int
    k: int
    params: dict
    alpha: float
    q: float
    rate_per_signal: float
    is_argmax: bool


# ---------------------------------------------------------------------------
# Library-level sweep and crossover helpers


def default_encoding(channel: str, d: int, k: int,
                     s: int | None = None) -> IndexEncoding:
    """Optimal-constructive signal set per channel kind."""
    if channel == "depol":
        return encodings.truncation_encoding(d, k)
    if channel == "modulo":
        return encodings.evenly_spaced_encoding(d, k)
    if channel == "block":
        if s is None:
            raise ValueError("block channel requires a block size s")
        return encodings.balanced_block_encoding(d, s, k)
    raise ValueError(f"unknown channel {channel!r}")


def _stats_for(channel: str, d: int, k: int, *, eps=None, eps1=None, eps2=None,
               s=None, topology=Topology.CYCLE) -> channels.KeptStats:
    encoding = default_encoding(channel, d, k, s)
    if channel == "depol":
        return channels.depol_stats(d, k, eps)
    if channel == "modulo":
        return channels.modulo_stats(d, k, eps, encoding, topology)
    e_b = float(encodings.block_overlap_of(encoding, s))
    return channels.block_stats(d, s, k, eps1, eps2, e_b)


def sweep_rates(channel: str, d: int, k_values, *, eps=None, eps1=None,
                eps2=None, s=None, topology=Topology.CYCLE) -> list[SweepRow]:
    """Per-k rates with the channel's optimal constructive encoding."""
    params = {key: val for key, val in
              (("eps", eps), ("eps1", eps1), ("eps2", eps2), ("s", s))
              if val is not None}
    rows = []
    for k in sorted(k_values):
        st = _stats_for(channel, d, k, eps=eps, eps1=eps1, eps2=eps2, s=s,
                        topology=topology)
        if st.no_kept_events or st.q > (k - 1) / k:
            # kept-error rate beyond the symmetric-channel domain: the
            # bound is certainly nonpositive, so the clamped rate is 0
            rate = 0.0
        else:
            rate = rate_per_signal(st.alpha, k, st.q)
        rows.append(SweepRow(d=d, k=k, params=params, alpha=st.alpha,
                             q=st.q, rate_per_signal=rate, is_argmax=False))
    best = max(range(len(rows)), key=lambda i: rows[i].rate_per_signal)
    rows[best] = replace(rows[best], is_argmax=True)
    return rows


def argmax_k(channel: str, d: int, *, eps=None, eps1=None, eps2=None,
             s=None, topology=Topology.CYCLE,
             rate: str = "per_signal") -> int:
    """Signal-set size maximizing the rate; ``rate`` picks the functional.

    "per_signal" weights by the sifted throughput (1/2)*alpha; "per_sifted"
    maximizes log2 k - 2 h_k(Q) alone.
    """
    if rate not in ("per_signal", "per_sifted"):
        raise ValueError(f"unknown rate functional {rate!r}")
    best_k, best_val = None, None
    for k in range(2, d + 1):
        st = _stats_for(channel, d, k, eps=eps, eps1=eps1, eps2=eps2, s=s,
                        topology=topology)
        if st.no_kept_events or st.q > (k - 1) / k:
            continue
        val = rate_per_sifted_symbol(k, st.q, st.q)
        if rate == "per_signal":
            val *= 0.5 * st.alpha
        if best_val is None or val > best_val:
            best_k, best_val = k, val
    if best_k is None:
        raise ValueError("no admissible signal-set size")
    return best_k


def find_crossover(channel: str, d: int, lo: float = 1e-6, hi: float = 0.4999,
                   tol: float = 1e-4, rate: str = "per_signal",
                   **kwargs) -> float:
    """Noise level where the optimal signal-set size departs from k = d.

    Bisects on the predicate argmax_k == d, assuming full-alphabet optimality
    below the crossover and a reduced optimum above it.
    """
    if argmax_k(channel, d, eps=lo, rate=rate, **kwargs) != d:
        raise ValueError(f"argmax already below d at eps={lo}")
    if argmax_k(channel, d, eps=hi, rate=rate, **kwargs) == d:
        raise ValueError(f"argmax still d at eps={hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if argmax_k(channel, d, eps=mid, rate=rate, **kwargs) == d:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Argument parsing


def _parse_range(text: str) -> range:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; expected a..b")
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return range(lo, hi + 1)


def _parse_eps_list(text: str) -> list[float]:
    try:
        return [float(f) for f in text.split(",") if f.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad noise list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rse-qkd",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--plot", help="render a matplotlib figure to this path")

    p = sub.add_parser("threshold", help="physical-noise threshold maps")
    p.add_argument("--channel", choices=["depol", "modulo", "block"], required=True)
    p.add_argument("--d-range", type=_parse_range, required=True)
    p.add_argument("--k-range", type=_parse_range, required=True)
    p.add_argument("--eps1", type=float, help="fixed intra-block noise (block)")
    p.add_argument("--s", type=int, help="block size (block; default sqrt(d))")
    p.add_argument("--topology", choices=["cycle", "path"], default="cycle")
    common(p)

    p = sub.add_parser("sweep", help="key rate vs signal-set size")
    p.add_argument("--channel", choices=["depol", "modulo", "block"], required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k-range", type=_parse_range, required=True)
    p.add_argument("--eps", type=_parse_eps_list, default=[],
                   help="comma-separated noise values (depol/modulo)")
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--s", type=int)
    p.add_argument("--topology", choices=["cycle", "path"], default="cycle")
    common(p)

    p = sub.add_parser("simulate", help="Monte Carlo protocol run")
    p.add_argument("--channel", choices=["depol", "modulo", "block"], required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--s", type=int)
    p.add_argument("--topology", choices=["cycle", "path"], default="cycle")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--basis-bias", type=float, default=0.5)
    p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("ingest", help="confusion-count ingestion and fitting")
    p.add_argument("paths", nargs="+", help="count CSV file(s): one with both "
                   "bases, or one per basis")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--k-range", type=_parse_range, required=True)
    p.add_argument("--rule", choices=["balanced", "brute"], default="balanced")
    common(p)

    return parser


# ---------------------------------------------------------------------------
# Subcommands


def _build_channel_spec(args) -> channels.ChannelSpec:
    topology = Topology(getattr(args, "topology", "cycle"))
    if args.channel == "depol":
        if args.eps is None:
            raise ValueError("depol channel requires --eps")
        return channels.Depolarizing(args.eps)
    if args.channel == "modulo":
        if args.eps is None:
            raise ValueError("modulo channel requires --eps")
        return channels.Modulo(args.eps, topology)
    if args.eps1 is None or args.eps2 is None or args.s is None:
        raise ValueError("block channel requires --eps1, --eps2 and --s")
    return channels.BlockBias(args.eps1, args.eps2, args.s)


def cmd_threshold(args) -> int:
    topology = Topology(args.topology)
    rows = []
    for d in args.d_range:
        for k in args.k_range:
            cell = {"channel": args.channel, "d": d, "k": k}
            if k > d or k < 2:
                cell.update(eps_th=None)
                rows.append(cell)
                continue
            if args.channel == "depol":
                cell["eps_th"] = channels.depol_threshold_eps(d, k)
                cell["alpha_th"] = channels.depol_alpha_threshold(d, k)
            elif args.channel == "modulo":
                enc = encodings.evenly_spaced_encoding(d, k)
                cell["w"] = encodings.modulo_counts(enc, topology).w
                cell["eps_th"] = channels.modulo_threshold_eps(enc, k, topology)
            else:
                if args.eps1 is None:
                    raise ValueError("block threshold requires --eps1")
                s = args.s if args.s is not None else math.isqrt(d)
                if s < 2 or d % s != 0 or (args.s is None and s * s != d):
                    cell.update(eps_th=None)
                    rows.append(cell)
                    continue
                e_min = float(encodings.e_min(d, s, k))
                th = channels.block_threshold_eps2(d, s, k, args.eps1, e_min)
                cell.update(s=s, eps1=args.eps1, eps_th=th.eps2, status=th.status)
            rows.append(cell)

    header = _threshold_header(args.channel)
    text = _render_table(rows, header, args.format,
                         threshold_cols={"eps_th", "alpha_th"})
    _write_output(text, args.out)
    if args.plot:
        _plot_threshold(rows, args)
    return EXIT_OK


def _threshold_header(channel: str) -> list[str]:
    if channel == "depol":
        return ["channel", "d", "k", "eps_th", "alpha_th"]
    if channel == "modulo":
        return ["channel", "d", "k", "w", "eps_th"]
    return ["channel", "d", "k", "s", "eps1", "eps_th", "status"]


def cmd_sweep(args) -> int:
    topology = Topology(args.topology)
    rows = []
    if args.channel in ("depol", "modulo"):
        if not args.eps:
            raise ValueError("sweep requires a nonempty --eps list")
        for eps in args.eps:
            rows.extend(sweep_rates(args.channel, args.d, args.k_range,
                                    eps=eps, topology=topology))
    else:
        if args.eps1 is None or args.eps2 is None or args.s is None:
            raise ValueError("block sweep requires --eps1, --eps2 and --s")
        rows.extend(sweep_rates("block", args.d, args.k_range, eps1=args.eps1,
                                eps2=args.eps2, s=args.s))

    flat = []
    for r in rows:
        cell = {"channel": args.channel, "d": r.d, "k": r.k, **r.params,
                "alpha": r.alpha, "q": r.q, "rate_per_signal": r.rate_per_signal,
                "is_argmax": int(r.is_argmax)}
        flat.append(cell)
    header = ["channel", "d", "k"] + sorted(rows[0].params) + \
        ["alpha", "q", "rate_per_signal", "is_argmax"]
    text = _render_table(flat, header, args.format)
    _write_output(text, args.out)
    if args.plot:
        _plot_sweep(flat, args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _build_channel_spec(args)
    s = args.s if args.channel == "block" else None
    encoding = default_encoding(args.channel, args.d, args.k, s)
    config = montecarlo.SimConfig(spec=spec, d=args.d, k=args.k,
                                  encoding=encoding, n_rounds=args.n,
                                  seed=args.seed, basis_bias=args.basis_bias)
    tally = montecarlo.simulate(config)
    stats, (se_alpha, se_q) = montecarlo.estimate_stats(tally)
    analytic = channels.analytic_stats(spec, args.d, encoding)
    z_alpha = (stats.alpha - analytic.alpha) / se_alpha if se_alpha > 0 else 0.0
    z_q = (stats.q - analytic.q) / se_q if se_q > 0 else 0.0

    report = {
        "config": {
            "channel": args.channel,
            "d": args.d,
            "k": args.k,
            "params": _spec_params(spec),
            "encoding": list(encoding.indices),
            "n_rounds": args.n,
            "seed": args.seed,
            "basis_bias": args.basis_bias,
            "rng": montecarlo.RNG_ALGORITHM,
        },
        "tally": {
            "matched": tally.matched,
            "kept": tally.kept,
            "correct": tally.correct,
            "counts_z": tally.counts_z.tolist(),
            "counts_x": tally.counts_x.tolist(),
        },
        "estimates": {
            "alpha": stats.alpha, "alpha_se": se_alpha,
            "q": stats.q, "q_se": se_q,
            "no_kept_events": stats.no_kept_events,
        },
        "analytic": {"alpha": analytic.alpha, "q": analytic.q},
        "z_scores": {"alpha": z_alpha, "q": z_q},
        "rate": {
            "empirical_per_signal": montecarlo.empirical_rate(tally, args.k),
            "analytic_per_signal": rate_per_signal(analytic.alpha, args.k,
                                                   analytic.q),
        },
    }
    _write_output(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def _spec_params(spec) -> dict:
    if isinstance(spec, channels.Depolarizing):
        return {"eps": spec.eps}
    if isinstance(spec, channels.Modulo):
        return {"eps": spec.eps, "topology": spec.topology.value}
    return {"eps1": spec.eps1, "eps2": spec.eps2, "s": spec.s}


def cmd_ingest(args) -> int:
    matrices = []
    for path in args.paths:
        with open(path, encoding="utf-8") as fh:
            matrices.extend(ingest.load_count_matrices(fh))
    by_basis = {}
    for mat in matrices:
        if mat.basis_tag in by_basis:
            raise ingest.IngestError(f"duplicate basis {mat.basis_tag} section")
        by_basis[mat.basis_tag] = mat
    missing = {"Z", "X"} - set(by_basis)
    if missing:
        raise ingest.IngestError(f"missing basis section(s): {sorted(missing)}")
    for mat in by_basis.values():
        if mat.d != args.d:
            raise ingest.DimensionMismatchError(
                f"--d {args.d} does not match file dimension d={mat.d}")

    counts_z, counts_x = by_basis["Z"], by_basis["X"]
    fit = ingest.fit_block_params(counts_z, counts_x, args.d, args.s)
    rows, argmax = ingest.sweep_k(counts_z, counts_x, args.d, args.s,
                                  args.k_range, rule=args.rule)

    flat = [{"k": r.k, "alpha": r.alpha, "q": r.q, "rate_per_signal": r.rate,
             "is_argmax": int(i == argmax)} for i, r in enumerate(rows)]
    if args.format == "json":
        payload = {
            "fit": {"eps1": round(fit.eps1, 6), "eps2": round(fit.eps2, 6),
                    "residual": fit.residual, "poor_fit": fit.poor_fit},
            "sweep": _json_rows(flat),
        }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        lines = ["fit_eps1,fit_eps2,residual,poor_fit",
                 ",".join([PROB_FMT.format(fit.eps1), PROB_FMT.format(fit.eps2),
                           f"{fit.residual:.6e}", str(int(fit.poor_fit))]),
                 ""]
        lines.append(_csv_table(flat, ["k", "alpha", "q", "rate_per_signal",
                                       "is_argmax"], set()))
        text = "\n".join(lines)
    _write_output(text, args.out)
    if args.plot:
        _plot_ksweep(flat, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Rendering


def _fmt_value(key: str, value, threshold_cols) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        fmt = TH_FMT if key in threshold_cols else PROB_FMT
        return fmt.format(value)
    return str(value)


def _csv_table(rows: list[dict], header: list[str], threshold_cols) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt_value(h, row.get(h), threshold_cols)
                              for h in header))
    return "\n".join(lines) + "\n"


def _json_rows(rows: list[dict], threshold_cols=frozenset()) -> list[dict]:
    out = []
    for row in rows:
        item = {}
        for key, value in row.items():
            if isinstance(value, float):
                digits = 4 if key in threshold_cols else 6
                value = round(value, digits)
            item[key] = value
        out.append(item)
    return out


def _render_table(rows, header, fmt, threshold_cols=frozenset()) -> str:
    if fmt == "json":
        return json.dumps(_json_rows(rows, threshold_cols), indent=2,
                          sort_keys=True) + "\n"
    return _csv_table(rows, header, threshold_cols)


def _write_output(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Figures


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _plot_threshold(rows, args):
    import numpy as np
    plt = _figure()
    ds = sorted({r["d"] for r in rows})
    ks = sorted({r["k"] for r in rows})
    grid = np.full((len(ks), len(ds)), np.nan)
    for r in rows:
        if r.get("eps_th") is not None:
            grid[ks.index(r["k"]), ds.index(r["d"])] = r["eps_th"]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(ds, ks, grid, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="noise threshold")
    ax.set_xlabel("dimension d")
    ax.set_ylabel("signal-set size k")
    ax.set_title(f"{args.channel} channel threshold")
    fig.tight_layout()
    fig.savefig(args.plot, dpi=150)
    plt.close(fig)


def _plot_sweep(rows, args):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    groups = {}
    for r in rows:
        label = ",".join(f"{key}={r[key]}" for key in sorted(r)
                         if key in ("eps", "eps1", "eps2"))
        groups.setdefault(label, []).append(r)
    for label, group in groups.items():
        ks = [r["k"] for r in group]
        rates = [r["rate_per_signal"] for r in group]
        ax.plot(ks, rates, marker=".", label=label)
        for r in group:
            if r["is_argmax"]:
                ax.plot([r["k"]], [r["rate_per_signal"]], "ko")
    ax.set_xlabel("signal-set size k")
    ax.set_ylabel("secret bits per signal")
    ax.set_title(f"{args.channel} channel, d={args.d}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.plot, dpi=150)
    plt.close(fig)


def _plot_ksweep(rows, args):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ks = [r["k"] for r in rows]
    rates = [r["rate_per_signal"] for r in rows]
    ax.plot(ks, rates, marker=".")
    for r in rows:
        if r["is_argmax"]:
            ax.plot([r["k"]], [r["rate_per_signal"]], "ko")
    ax.set_xlabel("signal-set size k")
    ax.set_ylabel("secret bits per signal")
    ax.set_title(f"measured counts, d={args.d}")
    fig.tight_layout()
    fig.savefig(args.plot, dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Entry point


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    handlers = {
        "threshold": cmd_threshold,
        "sweep": cmd_sweep,
        "simulate": cmd_simulate,
        "ingest": cmd_ingest,
    }
    try:
        return handlers[args.command](args)
    except channels.DegenerateThresholdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ingest.IngestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
