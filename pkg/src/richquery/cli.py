"""Command-line entry points.

Subcommands:

* ``run``      run one experiment from a flat JSON config; print a summary
* ``bounds``   print the closed-form stopping-time bracket for a query shape
* ``fit-cost`` fit per-kind affine response-time models from a CSV
* ``ratios``   estimate the information-rate table for a config and print it
* ``serve``    start the live annotation HTTP service
"""

from __future__ import annotations

import argparse
import csv
import sys

from .harness import ExperimentConfig, run_experiment
from .policy import (
    build_rate_table,
    estimate_info_ratios,
    fit_cost_model,
    reference_cost_model,
    select_query_config,
    serialize_cost_model,
    ProbeSettings,
)
from .responses import QueryKind, ResponseParams
from .theory import BoundInput, stopping_bounds


def _load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return ExperimentConfig.from_json(fh.read())


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    if args.output:
        config = ExperimentConfig(**{**config.__dict__, "output_path": args.output})
    records = run_experiment(config)
    if records:
        last = records[-1]
        print(
            f"interactions={last.t} mse={last.mse_to_gt:.4f} "
            f"accuracy={last.accuracy:.3f} log_det_sigma={last.log_det_sigma:.3f} "
            f"predicted_seconds={last.cum_predicted_seconds:.1f}"
        )
    else:
        print("interactions=0 (stopping rule already satisfied)")
    if config.output_path:
        print(f"trace written to {config.output_path}")
    return 0


def _cmd_bounds(args) -> int:
    inp = BoundInput(
        d=args.d,
        M=args.M,
        epsilon=args.epsilon,
        kind=QueryKind(args.kind),
        set_size=args.size,
        L=args.L,
    )
    b = stopping_bounds(inp)
    print(f"N={inp.N}")
    print(f"lower_raw={b.lower_raw:.6f}")
    print(f"lower={b.lower:.6f}")
    print(f"upper={b.upper:.6f}")
    return 0


def _cmd_fit_cost(args) -> int:
    observations = []
    with open(args.input, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0].strip().lower() == "kind":
                continue
            observations.append((QueryKind(row[0].strip()), int(row[1]), float(row[2])))
    model = fit_cost_model(observations)
    text = serialize_cost_model(model)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"model written to {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_ratios(args) -> int:
    config = _load_config(args.config)
    from .harness import initial_belief, resolve_pool

    pool, _ = resolve_pool(config)
    belief = initial_belief(config, pool.dim)
    params = ResponseParams(w=config.w, a=config.a, sigma=config.sigma)
    grid = [(QueryKind.LABEL, 1)]
    for kname in config.rate_kinds:
        for s in config.rate_sizes:
            grid.append((QueryKind(kname), s))
    ratios = estimate_info_ratios(
        pool,
        belief,
        grid,
        params,
        probe=ProbeSettings(
            committee_size=config.rate_committee,
            mc_draws=config.rate_mc_draws,
            probe_pool_size=config.rate_probe_pool,
        ),
        n_probes=config.rate_probes,
        seed=config.seed,
    )
    table = build_rate_table(ratios, reference_cost_model())
    print("kind,set_size,ratio,cost_s,rate")
    for row in table.rows:
        print(f"{row.kind.value},{row.set_size},{row.ratio:.4f},{row.cost:.2f},{row.rate:.5f}")
    kind, size = select_query_config(table)
    print(f"best: {kind.value} |S|={size}")
    return 0


def _cmd_serve(args) -> int:
    from .service import make_server
    from .session import SessionManager

    server = make_server(
        SessionManager(),
        host=args.host,
        port=args.port,
        static_dir=args.frontend,
        config_root=args.config_root,
    )
    host, port = server.server_address[:2]
    print(f"annotation service listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="richquery")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="trace output path (overrides config)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bounds", help="closed-form stopping-time bracket")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--kind", required=True, choices=[k.value for k in QueryKind])
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--L", type=float, required=True)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("fit-cost", help="fit response-time models from kind,size,seconds CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.set_defaults(func=_cmd_fit_cost)

    p = sub.add_parser("ratios", help="estimate the information-rate table for a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_ratios)

    p = sub.add_parser("serve", help="start the live annotation HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--frontend", help="static directory for the browser UI")
    p.add_argument("--config-root", default=".", help="base dir for config_ref paths")
    p.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
