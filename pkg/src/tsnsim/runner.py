"""Single runs and (credit mode × FP mode × seed) matrices with CSV output."""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .metrics import KPI_COLUMNS, kpi_row, write_kpi_csv, write_summary, write_trace_csv
from .network import Network

MATRIX_COLUMNS = ("credit_mode", "fp", "guardband", "seed") + KPI_COLUMNS


class RunFailure(RuntimeError):
    """A simulation run failed; ``config`` identifies the failing tuple."""

    def __init__(self, config, cause):
        super().__init__(f"run {config.label} failed: {type(cause).__name__}: {cause}")
        self.config = config
        self.cause = cause


@dataclass
class RunResult:
    config: object
    summary: dict
    rows: list  # kpi_row tuples, in flow order

    def matrix_rows(self):
        cfg = self.config
        key = (cfg.credit_mode.value, cfg.fp_mode.value, "on" if cfg.guardband else "off",
               cfg.seed)
        return [key + row for row in self.rows]


def simulate(scenario, config, **network_kwargs) -> Network:
    """Run one simulation; errors are wrapped in :class:`RunFailure`."""
    try:
        return Network(scenario, config, **network_kwargs).run()
    except Exception as exc:  # noqa: BLE001 - identify the failing configuration
        raise RunFailure(config, exc) from exc


def run_single(scenario, config, out_dir=None, *, trace_ports=None, sample_interval=10_000,
               event_log=None) -> RunResult:
    """Run once; with ``out_dir`` write ``kpi.csv``, ``summary.json`` and,
    when ``trace_ports`` is given, ``trace.csv``."""
    trace = trace_ports is not None
    net = simulate(scenario, config, trace=trace, trace_ports=trace_ports or None,
                   sample_interval=sample_interval, event_log=event_log)
    result = RunResult(config, net.summary(), [kpi_row(fs) for fs in net.stats.values()])
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_kpi_csv(out / "kpi.csv", net.stats.values())
        write_summary(out / "summary.json", result.summary)
        if trace:
            write_trace_csv(out / "trace.csv", net.trace)
    return result


def _run_one(args):
    scenario, config = args
    return run_single(scenario, config)


def matrix_configs(base, credit_modes, fp_modes, seeds, guardband=True):
    return [base.replace(credit_mode=m, fp_mode=f, seed=s, guardband=guardband)
            for m, f, s in itertools.product(credit_modes, fp_modes, seeds)]


def run_matrix(scenario, credit_modes, fp_modes, seeds, *, base=None, guardband=True,
               jobs=1, out_dir=None) -> list:
    """One run per (credit mode, fp mode, seed).  Each run is a pure function
    of its inputs, so the result set does not depend on execution order;
    results come back in tuple order.  The first failing run aborts the
    matrix with a :class:`RunFailure` naming its configuration."""
    base = base or scenario.defaults
    configs = matrix_configs(base, credit_modes, fp_modes, seeds, guardband)
    tasks = [(scenario, c) for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_matrix_csv(out / "comparison.csv", results)
        write_summary(out / "summary.json", {"runs": [r.summary for r in results]})
    return results


def write_matrix_csv(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MATRIX_COLUMNS)
        for r in results:
            w.writerows(r.matrix_rows())
