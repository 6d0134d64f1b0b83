"""Command-line client of the simulation service.

Commands run in-process by default; ``--server URL`` sends the same requests
to a running service instead.  ``adsmc serve`` starts that service.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from .errors import ConfigError, ContractViolation, DsmcError
from .harness.metrics import REPORT_CHANNELS, REPORT_UNITS
from .service import handlers
from .service.schemas import (
    CompareRequest,
    CompareResponse,
    RunRequest,
    RunResponse,
    SelftestResponse,
    SweepRequest,
    SweepResponse,
)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _sweep_value(text: str):
    if text.lower() in ("none", "ideal"):
        return None
    v = float(text)
    return int(v) if v.is_integer() and "." not in text else v


def read_config(path: str) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


class LocalClient:
    def run(self, req):
        return handlers.handle_run(req)

    def compare(self, req):
        return handlers.handle_compare(req)

    def sweep(self, req):
        return handlers.handle_sweep(req)

    def selftest(self, seed):
        return handlers.handle_selftest(seed)


class HttpClient:
    def __init__(self, base_url: str, timeout: float = 600.0):
        import httpx

        self._httpx = httpx
        self._http = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout)

    def _post(self, path, model, body=None, params=None):
        try:
            r = self._http.post(path, json=body, params=params)
        except self._httpx.HTTPError as exc:
            raise DsmcError(f"request to {self._http.base_url}{path} failed: {exc}") from None
        if r.status_code in (409, 422):
            detail = r.json()
            msg = detail.get("message") or json.dumps(detail.get("detail", detail))
            if r.status_code == 409:
                raise ContractViolation(msg)
            raise ConfigError(msg, detail.get("violations"))
        r.raise_for_status()
        return model.model_validate(r.json())

    def run(self, req):
        return self._post("/run", RunResponse, req.model_dump())

    def compare(self, req):
        return self._post("/compare", CompareResponse, req.model_dump())

    def sweep(self, req):
        return self._post("/sweep", SweepResponse, req.model_dump())

    def selftest(self, seed):
        return self._post("/selftest", SelftestResponse, params={"seed": seed})


def _report_table(resp: RunResponse) -> str:
    rep = resp.report
    rows = [("channel", "e_mean", "e_max")]
    for k in REPORT_CHANNELS:
        rows.append((f"{k} [{REPORT_UNITS[k]}]", f"{rep['mean_error'][k]:.4g}",
                     f"{rep['max_error'][k]:.4g}"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                       for i, (c, w) in enumerate(zip(r, widths))) for r in rows]
    conv = rep["convergence_time"]
    lines.insert(1, "-" * len(lines[0]))
    lines += [
        "",
        f"scenario: {resp.name} ({resp.config['mode']}, T={resp.config['T']}, "
        f"bits={resp.config['bits']})",
        f"samples: {rep['samples']}   convergence: {'-' if conv is None else f'{conv:.2f} s'}"
        f"   diverged: {'at %.3f s' % rep['diverged_at'] if rep['diverged'] else 'no'}",
        f"alpha_hat final: {', '.join(f'{a:.4f}' for a in rep['alpha_hat_final'])}",
        f"clamps: {rep['clamp_count']}   adc saturations: {sum(rep['adc_saturations'])}",
    ]
    return "\n".join(lines) + "\n"


def _report_csv(resp: RunResponse) -> str:
    rep = resp.report
    out = ["channel,unit,mean_error,max_error"]
    for k in REPORT_CHANNELS:
        out.append(f"{k},{REPORT_UNITS[k]},{rep['mean_error'][k]:.9g},{rep['max_error'][k]:.9g}")
    return "\n".join(out) + "\n"


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_run(args, client) -> int:
    out = _out_dir(args)
    resp = client.run(RunRequest(config=read_config(args.config), seed=args.seed,
                                 include_series=out is not None))
    sys.stdout.write(_report_table(resp) if args.format == "table" else _report_csv(resp))
    if out is not None:
        series = out / f"{resp.name}.csv"
        series.write_text(resp.series_csv)
        (out / f"{resp.name}_report.json").write_text(json.dumps(resp.report, indent=2))
        print(f"wrote {series}", file=sys.stderr)
    return 0


def cmd_compare(args, client) -> int:
    resp = client.compare(CompareRequest(a=read_config(args.a), b=read_config(args.b),
                                         seed=args.seed))
    sys.stdout.write(resp.table if args.format == "table" else resp.csv)
    out = _out_dir(args)
    if out is not None:
        path = out / f"compare_{resp.name_a}_vs_{resp.name_b}.csv"
        path.write_text(resp.csv)
        print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_sweep(args, client) -> int:
    resp = client.sweep(SweepRequest(axis=args.axis, config=read_config(args.config),
                                     values=args.values, seed=args.seed, workers=args.workers))
    sys.stdout.write(resp.table if args.format == "table" else resp.csv)
    out = _out_dir(args)
    if out is not None:
        path = out / f"sweep_{args.axis}.csv"
        path.write_text(resp.csv)
        print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_selftest(args, client) -> int:
    resp = client.selftest(args.seed or 0)
    if args.format == "csv":
        print("oracle,passed,seconds,detail")
        for r in resp.results:
            print(f"{r.name},{int(r.passed)},{r.seconds:.3f},\"{r.detail}\"")
    else:
        for r in resp.results:
            print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail} ({r.seconds:.2f} s)")
        print(f"{sum(r.passed for r in resp.results)}/{len(resp.results)} oracles passed "
              f"in {resp.seconds:.1f} s")
    out = _out_dir(args)
    if out is not None:
        (out / "selftest.json").write_text(resp.model_dump_json(indent=2))
    return 0 if resp.passed else 1


def cmd_serve(args, client) -> int:
    import uvicorn

    uvicorn.run("adsmc.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="directory for CSV/JSON outputs")
    common.add_argument("--seed", type=_u64, metavar="U64", help="override the scenario seed")
    common.add_argument("--format", choices=("csv", "table"), default="table")
    common.add_argument("--server", metavar="URL", help="send requests to a running service")

    p = argparse.ArgumentParser(prog="adsmc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="simulate one scenario")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("compare", parents=[common],
                       help="improvement of scenario A over reference B")
    c.add_argument("a")
    c.add_argument("b")
    c.set_defaults(func=cmd_compare)
    s = sub.add_parser("sweep", parents=[common], help="run a scenario along one axis")
    s.add_argument("axis", choices=("T", "bits", "uncertainty"))
    s.add_argument("config")
    s.add_argument("--values", nargs="+", type=_sweep_value,
                   help="axis values (default: T 0.02 0.08, bits 16 10, uncertainty 0.5 1 1.5)")
    s.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    s.set_defaults(func=cmd_sweep)
    t = sub.add_parser("selftest", parents=[common], help="run the oracle suite")
    t.set_defaults(func=cmd_selftest)
    v = sub.add_parser("serve", help="start the HTTP service")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8000)
    v.set_defaults(func=cmd_serve, server=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    client = HttpClient(args.server) if args.server else LocalClient()
    try:
        return args.func(args, client)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    except (ContractViolation, DsmcError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
