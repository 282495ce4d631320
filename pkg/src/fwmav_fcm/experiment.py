"""Reproduction pipeline: generate, identify, run, report.

Output layout under ``out_dir``::

    dataset.csv                 excitation data
    model.json                  identified TS model
    fit_report.csv / .txt       per-channel identification RMSE
    traces/<ctrl>_<ref>.csv     closed-loop traces (+ .json metadata)
    report.csv / report.txt     RMSE table, PID vs adaptive fuzzy
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import CONTROLLER_IDS, REFERENCE_IDS, serialize_config
from .control import closed_loop_run, tune_pid
from .exceptions import ConfigError
from .io import atomic_write, load_model, read_dataset, read_trace, save_model, write_dataset, write_trace
from .plant import generate_training_data
from .ts import OUTPUT_COLUMNS, evaluate_fit, identify_ts_model

log = logging.getLogger(__name__)

REFERENCE_LABELS = {
    "constant": "Constant height",
    "sine": "Sinusoidal",
    "square": "Square wave",
    "step1": "Step 1",
    "step2": "Step 2",
    "step3": "Step 3",
}


def _out(config, out_dir):
    return Path(config.out_dir if out_dir is None else out_dir)


def dataset_path(out_dir):
    return Path(out_dir) / "dataset.csv"


def model_path(out_dir):
    return Path(out_dir) / "model.json"


def trace_path(out_dir, controller_id, reference_id):
    return Path(out_dir) / "traces" / f"{controller_id}_{reference_id}.csv"


def cmd_generate(config, out_dir=None):
    """Simulate the excitation run and write the dataset CSV."""
    out = _out(config, out_dir)
    ex = config.excitation
    data = generate_training_data(config.plant, ex.duration, ex.dt, ex.seed)
    path = write_dataset(dataset_path(out), data)
    log.info("wrote %s (%d rows)", path, len(data))
    return path


def fit_report_rows(model, data):
    rmse = evaluate_fit(model, data)
    std = data.outputs.std(axis=0)
    ratio = np.divide(rmse, std, out=np.zeros_like(rmse), where=std > 0)
    return [(name, r, s, q) for name, r, s, q in zip(OUTPUT_COLUMNS, rmse, std, ratio)]


def cmd_identify(config, dataset=None, out_dir=None):
    """Identify the TS model; writes ``model.json`` and the fit report.

    Returns ``(model_path, rows)`` with one ``(channel, rmse, std, ratio)``
    row per output channel.
    """
    out = _out(config, out_dir)
    dataset = dataset_path(out) if dataset is None else Path(dataset)
    if not dataset.exists():
        raise ConfigError(f"dataset {dataset} not found; run 'generate' first")
    data = read_dataset(dataset)
    ident = config.identification
    model = identify_ts_model(
        data,
        c=ident.c,
        fcm_config=ident.fcm_config(),
        ridge=ident.ridge,
        add_rule_threshold=ident.add_rule_threshold,
        c_max=ident.max_rules,
    )
    path = save_model(model_path(out), model)
    rows = fit_report_rows(model, data)
    csv = ["channel,rmse,std,rmse_over_std"]
    csv += [f"{n},{r:.17g},{s:.17g},{q:.17g}" for n, r, s, q in rows]
    atomic_write(out / "fit_report.csv", "\n".join(csv) + "\n")
    txt = [f"rules: {model.n_rules}", f"threshold (rmse/std): {ident.rmse_threshold:g}", ""]
    txt.append(f"{'channel':<8}{'rmse':>12}{'std':>12}{'rmse/std':>10}")
    txt += [f"{n:<8}{r:>12.6f}{s:>12.6f}{q:>10.4f}" for n, r, s, q in rows]
    atomic_write(out / "fit_report.txt", "\n".join(txt) + "\n")
    log.info("wrote %s (%d rules)", path, model.n_rules)
    return path, rows


def run_trace(config, model, controller_id, reference_id):
    """Closed-loop simulation with the identified model as plant."""
    ref = config.reference(reference_id)
    controller = config.make_controller(controller_id)
    loop = config.loop
    return closed_loop_run(
        model,
        controller,
        ref,
        loop.duration,
        loop.dt,
        loop.seed,
        z0=loop.z0,
        hover_trim=config.plant.hover_trim,
        rate_filter=config.fuzzy.rate_filter if controller_id == "fuzzy" else 0.0,
        metadata={"reference": reference_id},
    )


def cmd_run(config, controller_id, reference_id, model=None, out_dir=None):
    """Run one controller on one reference; returns ``(trace_path, rmse)``."""
    if controller_id not in CONTROLLER_IDS:
        raise ConfigError(
            f"unknown controller id {controller_id!r}; expected one of {CONTROLLER_IDS}"
        )
    config.reference(reference_id)
    out = _out(config, out_dir)
    mpath = model_path(out) if model is None else Path(model)
    if not mpath.exists():
        raise ConfigError(f"model {mpath} not found; run 'identify' first")
    trace = run_trace(config, load_model(mpath), controller_id, reference_id)
    path = write_trace(trace_path(out, controller_id, reference_id), trace)
    return path, trace.rmse


def _run_cell(args):
    config, mpath, out, controller_id, reference_id = args
    trace = run_trace(config, load_model(mpath), controller_id, reference_id)
    write_trace(trace_path(out, controller_id, reference_id), trace)
    return controller_id, reference_id


def report_order(config):
    known = [r for r in REFERENCE_IDS if r in config.references]
    return known + [r for r in config.references if r not in REFERENCE_IDS]


def format_report(table, order):
    csv = ["reference,pid_rmse,fuzzy_rmse"]
    csv += [f"{r},{table[r]['pid']:.17g},{table[r]['fuzzy']:.17g}" for r in order]
    width = max(len(REFERENCE_LABELS.get(r, r)) for r in order) + 2
    txt = [f"{'Reference Signal':<{width}}{'PID':>10}{'Adaptive Fuzzy':>16}"]
    txt.append("-" * len(txt[0]))
    txt += [
        f"{REFERENCE_LABELS.get(r, r):<{width}}{table[r]['pid']:>10.4f}{table[r]['fuzzy']:>16.4f}"
        for r in order
    ]
    return "\n".join(csv) + "\n", "\n".join(txt) + "\n"


def cmd_report(config, model=None, out_dir=None, parallel=1):
    """Build the RMSE table from cached traces, running missing ones.

    Returns ``{reference_id: {"pid": rmse, "fuzzy": rmse}}``.
    """
    out = _out(config, out_dir)
    mpath = model_path(out) if model is None else Path(model)
    order = report_order(config)
    missing = [
        (c, r) for r in order for c in CONTROLLER_IDS if not trace_path(out, c, r).exists()
    ]
    if missing:
        if not mpath.exists():
            raise ConfigError(f"model {mpath} not found; run 'identify' first")
        jobs = [(config, mpath, out, c, r) for c, r in missing]
        if parallel > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                list(pool.map(_run_cell, jobs))
        else:
            for job in jobs:
                _run_cell(job)
        log.info("ran %d missing trace(s)", len(missing))

    table = {
        r: {c: read_trace(trace_path(out, c, r)).rmse for c in CONTROLLER_IDS} for r in order
    }
    csv, txt = format_report(table, order)
    atomic_write(out / "report.csv", csv)
    atomic_write(out / "report.txt", txt)
    return table


def cmd_all(config, out_dir=None, parallel=1):
    """Full pipeline with fresh traces; also stores the resolved config."""
    out = _out(config, out_dir)
    atomic_write(out / "config.ini", serialize_config(config))
    cmd_generate(config, out)
    cmd_identify(config, None, out)
    for r in report_order(config):
        for c in CONTROLLER_IDS:
            trace_path(out, c, r).unlink(missing_ok=True)
    return cmd_report(config, None, out, parallel)


def retune_pid(config, plant=None):
    """Repeat the PID grid search stored in ``config.pid``.

    Uses the constant reference and the surrogate plant unless ``plant`` is
    given.
    """
    grid = {"kp": config.pid.grid_kp, "ki": config.pid.grid_ki, "kd": config.pid.grid_kd}
    loop = config.loop
    return tune_pid(
        config.plant if plant is None else plant,
        config.reference("constant"),
        grid,
        config.plant.command_limits,
        loop.duration,
        loop.dt,
        loop.seed,
    )
