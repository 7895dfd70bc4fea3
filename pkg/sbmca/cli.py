"""Command-line interface for sbmca."""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import numpy as np
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from . import config as sbmca_config
from .blocking import blockify
from .dictionaries import Dictionary, load_dictionary, save_dictionary
from .errors import InvalidArgumentError, InvalidStateError, NumericFailureError, StorageError
from .metrics import (
    GOOD_BLOCK_THRESHOLD,
    HIST_BINS,
    HIST_RANGE,
    GRID_INNER_ITERS,
    GRID_OUTER_ITERS,
    TARGETS,
    EvalReport,
    default_grid,
    evaluate,
    grid_search,
    grid_sbmca_params,
    histogram,
    run_method,
    write_histogram_csv,
)
from .separators import INIT_MCA_DCT_OMP, METHODS, SbmcaParams, load_result, save_result
from .solvers import LassoOptions
from .storage import load_json, save_json, write_rows_csv
from .synth import (
    MixtureDataset,
    PulseSpec,
    SynthConfig,
    load_dataset,
    make_dataset,
    pulse_dictionary_for,
    save_dataset,
)

EXIT_INVALID = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

app = typer.Typer(
    name="sbmca",
    help="sbmca - Semi-blind separation of a known pulse train from an unknown background",
)
console = Console()
err_console = Console(stderr=True)


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(None, help="Logging level (default: $SBMCA_LOG_LEVEL)"),
    workers: Optional[int] = typer.Option(None, help="Worker threads (default: $SBMCA_WORKERS)"),
    results_dir: Optional[Path] = typer.Option(None, help="Default output root (default: $SBMCA_RESULTS_DIR)"),
):
    """Configure logging, threading and output locations for every command."""
    with _exit_codes():
        sbmca_config.configure(
            log_level=log_level, workers=workers, results_dir=str(results_dir) if results_dir else None
        )
    logging.basicConfig(
        level=sbmca_config.SBMCA_LOG_LEVEL,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Map package errors onto the documented exit codes."""
    try:
        yield
    except (InvalidArgumentError, InvalidStateError) as e:
        err_console.print(f"❌ {e}", style="red")
        raise typer.Exit(EXIT_INVALID)
    except NumericFailureError as e:
        err_console.print(f"❌ Numeric failure in stage '{e.stage}': {e}", style="red")
        raise typer.Exit(EXIT_NUMERIC)
    except StorageError as e:
        err_console.print(f"❌ {e}", style="red")
        raise typer.Exit(EXIT_IO)


def _parse_floats(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"could not parse number list '{text}'") from e


def _known_dictionary(dataset_dir: Path, dataset: MixtureDataset) -> Dictionary:
    path = dataset_dir / "D1.sbd"
    if path.exists():
        return load_dictionary(path)
    return pulse_dictionary_for(SynthConfig.from_dict(dataset.config))


def _block_len(dataset: MixtureDataset) -> int:
    return int(dataset.config.get("block_len", SynthConfig().block_len))


def _fmt_db(value: float) -> str:
    if np.isnan(value):
        return "n/a"
    return "exact" if np.isinf(value) else f"{value:.2f}"


@app.command()
def synth(
    seed: int = typer.Option(..., help="RNG seed (required)"),
    out: Optional[Path] = typer.Option(None, help="Output directory (default: $SBMCA_RESULTS_DIR/dataset)"),
    fs: int = typer.Option(SynthConfig.fs, help="Sample rate in Hz"),
    duration: float = typer.Option(SynthConfig.duration, help="Length in seconds"),
    rate: float = typer.Option(SynthConfig.rate, help="Discharges per second"),
    block_len: int = typer.Option(SynthConfig.block_len, help="Block length m in samples"),
    jitter_max: int = typer.Option(SynthConfig.jitter_max, help="Max timing jitter in samples"),
    sigma: float = typer.Option(SynthConfig.sigma, help="Noise standard deviation"),
    rms_ratio: float = typer.Option(SynthConfig.rms_ratio, help="RMS(x_u) / RMS(x_p)"),
    background: Optional[Path] = typer.Option(None, help="Mono WAV/CSV background (default: synthetic)"),
    max_shift: int = typer.Option(SynthConfig.max_shift, help="Circular shift range of the known dictionary"),
    low_freq: float = typer.Option(1200.0, help="Low-load carrier in Hz"),
    low_decay: float = typer.Option(60.0, help="Low-load decay rate in 1/s"),
    low_duration: float = typer.Option(0.025, help="Low-load pulse duration in s"),
    high_freq: float = typer.Option(2200.0, help="High-load carrier in Hz"),
    high_decay: float = typer.Option(140.0, help="High-load decay rate in 1/s"),
    high_duration: float = typer.Option(0.012, help="High-load pulse duration in s"),
    wav_format: str = typer.Option("float32", help="WAV sample format: float32 or pcm16"),
):
    """Generate a synthetic mixture dataset."""
    with _exit_codes():
        cfg = SynthConfig(
            fs=fs,
            duration=duration,
            rate=rate,
            block_len=block_len,
            jitter_max=jitter_max,
            low=PulseSpec(low_freq, low_decay, low_duration),
            high=PulseSpec(high_freq, high_decay, high_duration),
            rms_ratio=rms_ratio,
            sigma=sigma,
            seed=seed,
            background=str(background) if background else None,
            max_shift=max_shift,
        )
        out = out or sbmca_config.results_path("dataset")
        console.print(f"🎛️  Synthesizing {cfg.n} samples at {cfg.fs} Hz (seed {seed})...")
        dataset = make_dataset(cfg)
        save_dataset(out, dataset, wav_format)
        save_dictionary(out / "D1.sbd", pulse_dictionary_for(cfg))

    summary = f"""
📁 Directory: {out}
🆔 Dataset id: {dataset.id}
🔢 Samples: {dataset.n:,} ({dataset.n / cfg.fs:.2f} s)
⚡ Discharges: {len(dataset.labels)} ({dataset.labels.count('low')} low, {dataset.labels.count('high')} high)
🔊 Noise sigma: {dataset.sigma}
    """
    console.print(Panel(summary.strip(), title="Dataset", border_style="green"))


def _sbmca_params(
    params_file: Optional[Path],
    overrides: Dict[str, object],
    dict_overrides: Dict[str, object],
    lasso_overrides: Dict[str, object],
) -> SbmcaParams:
    """
    Merge a --params JSON file with command-line flags; flags win. LASSO
    flags apply to both the SBMCA stages and the dictionary-learning coder.
    """
    data: Dict[str, object] = dict(load_json(params_file)) if params_file else {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    dict_data = dict(data.get("dict_opts") or {})  # type: ignore[arg-type]
    dict_data.update({k: v for k, v in dict_overrides.items() if v is not None})
    dict_data["lasso"] = {**dict(dict_data.get("lasso") or {}), **lasso_overrides}
    data["dict_opts"] = dict_data
    data["lasso"] = {**dict(data.get("lasso") or {}), **lasso_overrides}  # type: ignore[arg-type]
    missing = [k for k in ("lambda1", "lambda2", "lambda3") if k not in data]
    if missing:
        raise InvalidArgumentError(f"sbmca requires {', '.join('--' + k for k in missing)}")
    try:
        return SbmcaParams.from_dict(data)
    except TypeError as e:
        raise InvalidArgumentError(f"bad parameter set ({e})") from e


@app.command()
def separate(
    dataset_dir: Path = typer.Argument(..., help="Dataset directory written by 'synth'"),
    method: str = typer.Option("sbmca", help=f"One of {', '.join(METHODS)}"),
    out: Optional[Path] = typer.Option(None, help="Output directory (default: $SBMCA_RESULTS_DIR/result)"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Penalty for mca-dct / mca-identity"),
    lambda1: Optional[float] = typer.Option(None, help="SBMCA initialization penalty"),
    lambda2: Optional[float] = typer.Option(None, help="SBMCA dictionary-learning penalty"),
    lambda3: Optional[float] = typer.Option(None, help="SBMCA coefficient-update penalty"),
    num_atoms: Optional[int] = typer.Option(None, help="Learned atoms (default 64)"),
    inner_iters: Optional[int] = typer.Option(None, help="Dictionary-learning rounds (default 20)"),
    dict_seed: Optional[int] = typer.Option(None, help="Seed for atom initialization"),
    max_outer_iters: Optional[int] = typer.Option(None, help="Outer iterations (default 10)"),
    outer_tol: Optional[float] = typer.Option(None, help="Relative objective tolerance (default 1e-4)"),
    init: Optional[str] = typer.Option(None, help=f"lasso-d1 or {INIT_MCA_DCT_OMP} (default)"),
    rank: Optional[int] = typer.Option(None, help="Rank for tsvd"),
    max_iters: Optional[int] = typer.Option(None, help="LASSO sweep limit (default 500)"),
    tol: Optional[float] = typer.Option(None, help="LASSO relative objective tolerance (default 1e-7)"),
    params_file: Optional[Path] = typer.Option(None, "--params", help="JSON file of SbmcaParams"),
    wav_format: str = typer.Option("float32", help="WAV sample format: float32 or pcm16"),
):
    """Separate a dataset's mixture with one method and save the result."""
    with _exit_codes():
        if method not in METHODS:
            raise InvalidArgumentError(f"Invalid method: {method}. Use one of {METHODS}")
        dataset = load_dataset(dataset_dir)
        X = blockify(dataset.x, _block_len(dataset))
        D1 = _known_dictionary(dataset_dir, dataset)
        lasso_overrides = {k: v for k, v in {"max_iters": max_iters, "tol": tol}.items() if v is not None}
        lasso_opts = LassoOptions(**lasso_overrides)
        out = out or sbmca_config.results_path("result")

        console.print(f"🔀 Running {method} on {X.shape[0]}x{X.shape[1]} blocks...")
        if method == "sbmca":
            params = _sbmca_params(
                params_file,
                {
                    "lambda1": lambda1,
                    "lambda2": lambda2,
                    "lambda3": lambda3,
                    "max_outer_iters": max_outer_iters,
                    "outer_tol": outer_tol,
                    "init": init,
                },
                {"num_atoms": num_atoms, "inner_iters": inner_iters, "seed": dict_seed},
                lasso_overrides,
            )
            point = {"lambda1": params.lambda1, "lambda2": params.lambda2, "lambda3": params.lambda3}
            result = run_method(method, X, D1, point, base_params=params)
        elif method == "tsvd":
            if rank is None:
                raise InvalidArgumentError("tsvd requires --rank")
            result = run_method(method, X, D1, {"rank": rank})
        else:
            if lam is None:
                raise InvalidArgumentError(f"{method} requires --lambda")
            result = run_method(method, X, D1, {"lambda": lam}, lasso_opts=lasso_opts)

        save_result(
            out,
            result,
            dataset.fs,
            dataset={"id": dataset.id, "path": str(dataset_dir)},
            wav_format=wav_format,
        )

    status = "[green]converged[/green]" if result.converged else "[yellow]not converged[/yellow]"
    summary = f"""
📁 Directory: {out}
🔁 Outer iterations: {result.outer_iters} ({status})
⏱️  Wall time: {result.wall_time:.2f} s
    """
    console.print(Panel(summary.strip(), title=f"Separation: {method}", border_style="green"))


def _report_table(reports: Dict[str, EvalReport], title: str) -> Table:
    table = Table(title=title)
    table.add_column("Method / target", style="cyan")
    table.add_column("SNR x_p (dB)", justify="right", style="green")
    table.add_column("SNR x_u (dB)", justify="right", style="green")
    table.add_column(f"x_p blocks < {GOOD_BLOCK_THRESHOLD}", justify="right", style="magenta")
    table.add_column("Params", style="dim")
    for name, r in reports.items():
        shown = {k: (f"{v:.4g}" if isinstance(v, float) else v) for k, v in r.params.items() if not isinstance(v, dict)}
        table.add_row(
            name,
            _fmt_db(r.snr_xp_db),
            _fmt_db(r.snr_xu_db),
            f"{r.fraction_below():.1%}",
            ", ".join(f"{k}={v}" for k, v in shown.items()),
        )
    return table


@app.command(name="eval")
def evaluate_cmd(
    result_dir: Path = typer.Argument(..., help="Result directory written by 'separate'"),
    dataset_dir: Path = typer.Argument(..., help="Dataset directory with ground truth"),
    out: Optional[Path] = typer.Option(None, help="Report JSON path (default: <result_dir>/report.json)"),
):
    """Score a separation against noise-free ground truth."""
    with _exit_codes():
        result = load_result(result_dir)
        dataset = load_dataset(dataset_dir)
        report = evaluate(result, dataset)
        out = out or result_dir / "report.json"
        save_json(out, report.to_dict())
        write_rows_csv(
            out.with_suffix(".csv"),
            ["method", "snr_xp_db", "snr_xu_db", "fraction_xp_below_0.2", "zero_blocks_xp", "zero_blocks_xu"],
            [[report.method, report.snr_xp_db, report.snr_xu_db, report.fraction_below(),
              report.zero_blocks_xp, report.zero_blocks_xu]],
        )

    console.print(_report_table({report.method: report}, "Reconstruction SNR"))
    console.print(f"💾 Report written to {out}")


@app.command()
def grid(
    dataset_dir: Path = typer.Argument(..., help="Dataset directory written by 'synth'"),
    methods: List[str] = typer.Option(["sbmca", "mca-dct", "mca-identity"], "--method", help="Methods to sweep"),
    out: Optional[Path] = typer.Option(None, help="Output directory (default: $SBMCA_RESULTS_DIR/grid)"),
    lambdas: Optional[str] = typer.Option(None, help="Comma list for the MCA baselines (default: log grid)"),
    lambda1s: Optional[str] = typer.Option(None, help="Comma list of SBMCA lambda1 values"),
    lambda2s: Optional[str] = typer.Option(None, help="Comma list of SBMCA lambda2 values"),
    lambda3s: Optional[str] = typer.Option(None, help="Comma list of SBMCA lambda3 values (default: tied to lambda2)"),
    ranks: Optional[str] = typer.Option(None, help="Comma list of tsvd ranks (default: 1,2,4,8)"),
    per_decade: int = typer.Option(7, help="Points per decade of the default MCA log grid"),
    num_atoms: int = typer.Option(64, help="Learned atoms"),
    inner_iters: int = typer.Option(GRID_INNER_ITERS, help="Dictionary-learning rounds"),
    max_outer_iters: int = typer.Option(GRID_OUTER_ITERS, help="SBMCA outer iterations"),
    max_iters: int = typer.Option(500, help="LASSO sweep limit"),
):
    """Clairvoyant sweep: best SNR per method and target over a parameter grid."""
    with _exit_codes():
        dataset = load_dataset(dataset_dir)
        X = blockify(dataset.x, _block_len(dataset))
        D1 = _known_dictionary(dataset_dir, dataset)
        lasso_opts = LassoOptions(max_iters=max_iters)
        out = out or sbmca_config.results_path("grid")
        out.mkdir(parents=True, exist_ok=True)

        best: Dict[str, EvalReport] = {}
        best_rows = []
        for method in methods:
            if method not in METHODS:
                raise InvalidArgumentError(f"Invalid method: {method}. Use one of {METHODS}")
            default = default_grid(method, D1, X, per_decade=per_decade)
            if method == "sbmca":
                spec = {
                    "lambda1": _parse_floats(lambda1s) or default["lambda1"],
                    "lambda2": _parse_floats(lambda2s) or default["lambda2"],
                }
                if lambda3s:
                    spec["lambda3"] = _parse_floats(lambda3s) or []
                base = grid_sbmca_params(lasso_opts, num_atoms, inner_iters, max_outer_iters)
                console.print(f"🔍 Sweeping {method} over {len(spec['lambda1']) * len(spec['lambda2']) * len(spec.get('lambda3', [0]))} points...")
                result = grid_search(X, D1, dataset, method, spec, base_params=base, tie_lambda23=not lambda3s)
            elif method == "tsvd":
                rank_list = [int(r) for r in _parse_floats(ranks) or []] if ranks else default["rank"]
                result = grid_search(X, D1, dataset, method, {"rank": rank_list})
            else:
                spec = {"lambda": _parse_floats(lambdas) or default["lambda"]}
                console.print(f"🔍 Sweeping {method} over {len(spec['lambda'])} points...")
                result = grid_search(X, D1, dataset, method, spec, lasso_opts=lasso_opts)

            result.write_csv(out / f"grid_{method}.csv")
            for target in TARGETS:
                report = result.best[target]
                best[f"{method} / {target}"] = report
                best_rows.append([method, target, report.snr(target), report.fraction_below(), str(
                    {k: v for k, v in report.params.items() if not isinstance(v, dict)})])
        write_rows_csv(out / "best.csv", ["method", "target", "snr_db", "fraction_xp_below_0.2", "params"], best_rows)

    console.print(_report_table(best, "Best achievable SNR (clairvoyant tuning)"))
    console.print(f"💾 Grid written to {out}")


@app.command()
def hist(
    report_path: Path = typer.Argument(..., help="Report JSON written by 'eval'"),
    target: str = typer.Option("x_p", help="x_p or x_u"),
    bins: int = typer.Option(HIST_BINS, help="Number of bins"),
    lo: float = typer.Option(HIST_RANGE[0], help="Lower edge"),
    hi: float = typer.Option(HIST_RANGE[1], help="Upper edge"),
    out: Optional[Path] = typer.Option(None, help="CSV path (default: <report>_<target>_hist.csv)"),
):
    """Histogram of normalized per-block errors."""
    with _exit_codes():
        if target not in TARGETS:
            raise InvalidArgumentError(f"Invalid target: {target}. Use one of {TARGETS}")
        report = load_json(report_path)
        key = "block_errors_xp" if target == "x_p" else "block_errors_xu"
        if key not in report:
            raise StorageError(report_path, f"report has no '{key}'")
        values = [np.nan if v is None else float(v) for v in report[key]]
        rows = histogram(values, bins, (lo, hi))
        out = out or report_path.with_name(f"{report_path.stem}_{target}_hist.csv")
        write_histogram_csv(out, rows)

    skipped = sum(1 for v in values if np.isnan(v))
    console.print(f"📊 {sum(r.count for r in rows)} blocks binned ({skipped} zero-reference blocks skipped)")
    console.print(f"💾 Histogram written to {out}")


@app.command()
def config():
    """Show the effective sbmca configuration."""
    cfg = sbmca_config.current_config()
    config_info = f"""
📝 Log level: [cyan]{cfg['log_level']}[/cyan] ($SBMCA_LOG_LEVEL)
🧵 Workers: [cyan]{cfg['workers']}[/cyan] ($SBMCA_WORKERS)
📁 Results dir: [cyan]{cfg['results_dir']}[/cyan] ($SBMCA_RESULTS_DIR)
    """
    console.print(Panel(config_info.strip(), title="sbmca Configuration", border_style="blue"))


@app.command()
def info(directory: Path = typer.Argument(..., help="Dataset or result directory")):
    """Summarize a dataset or result manifest."""
    with _exit_codes():
        manifest = load_json(directory / "manifest.json")

    table = Table(title=f"{manifest.get('kind', 'unknown').capitalize()}: {directory}")
    table.add_column("Field", style="cyan")
    table.add_column("Value", style="green")
    for key in sorted(manifest):
        value = manifest[key]
        if isinstance(value, (list, dict)):
            value = f"{type(value).__name__} ({len(value)} entries)"
        table.add_row(key, str(value))
    console.print(table)


if __name__ == "__main__":
    app()
