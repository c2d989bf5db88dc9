#!/usr/bin/env python3
"""
无线供能协作计算求解器 - CLI 入口

使用方法:
    python scripts/main.py solve configs/solve.ini
    python scripts/main.py sweep configs/sweep_T.ini --output ./output/sweep_T
    python scripts/main.py verify configs/verify.ini -v

退出码: 0 成功, 2 配置错误, 3 数值/求解失败
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Iterable

# Fix Windows console encoding for CJK characters
if sys.platform == 'win32':
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8', errors='replace')
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8', errors='replace')
    os.environ.setdefault('PYTHONIOENCODING', 'utf-8')

if __package__:
    from .config_file import LoadedConfig, load_config
    from .config_solver import ENV_LAMBDA_MIN, ENV_MAX_ITER_PER_DIM, ENV_THREADS
    from .errors import EXIT_OK, EXIT_SOLVER, ConfigError, WptccError, exit_code_for
    from .solver import CooperativeSolver, VerifyOutcome
    from .core.scenarios import SweepConfig, SweepTable, run_sweep, sample_channels
else:
    PROJECT_ROOT = Path(__file__).resolve().parent.parent
    if str(PROJECT_ROOT) not in sys.path:
        sys.path.insert(0, str(PROJECT_ROOT))
    from scripts.config_file import LoadedConfig, load_config
    from scripts.config_solver import ENV_LAMBDA_MIN, ENV_MAX_ITER_PER_DIM, ENV_THREADS
    from scripts.errors import EXIT_OK, EXIT_SOLVER, ConfigError, WptccError, exit_code_for
    from scripts.solver import CooperativeSolver, VerifyOutcome
    from scripts.core.scenarios import SweepConfig, SweepTable, run_sweep, sample_channels

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("sweep_var", "sweep_value", "scheme", "trials", "mean_bits", "stderr_bits", "mean_gap", "failures")


def setup_logging(verbose: bool = False) -> None:
    """配置日志"""
    level = logging.INFO if verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S'
    )


def fmt(value: Any) -> str:
    """数值格式化

    Round-trip decimal text for floats, plain text otherwise.
    """
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def flatten(data: dict, prefix: str = "") -> Iterable[tuple[str, Any]]:
    """展开嵌套配置"""
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from flatten(value, name + ".")
        elif isinstance(value, (list, tuple)):
            yield name, ", ".join(fmt(v) for v in value)
        else:
            yield name, fmt(value)


def header_lines(loaded: LoadedConfig) -> list[str]:
    """参数摘要"""
    lines = [f"# config = {loaded.path.name}"]
    lines += [f"# {key} = {value}" for key, value in flatten(loaded.echo())]
    return lines


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def print_solve_summary(results: dict[str, dict], report_path: Path) -> None:
    """打印求解摘要"""
    try:
        from rich.console import Console
        from rich.table import Table
        from rich.panel import Panel

        console = Console()
        table = Table(title="Computation rate per scheme")
        table.add_column("scheme", style="cyan")
        table.add_column("bits", style="magenta", justify="right")
        table.add_column("tr(Q) [W]", justify="right")
        table.add_column("gap", style="green", justify="right")
        table.add_column("KKT", style="yellow", justify="right")
        table.add_column("time [s]", justify="right")
        for name, entry in results.items():
            sol, rep = entry["solution"], entry["report"]
            table.add_row(
                name,
                f"{sol.objective:.6g}",
                f"{sol.Q.trace:.4g}",
                f"{rep.gap:.2e}" if rep else "-",
                f"{rep.kkt.max_residual:.2e}" if rep and rep.kkt else "-",
                f"{entry['wall_time_s']:.3f}",
            )
        console.print(table)
        console.print(Panel(f"report: {report_path}", border_style="blue"))

    except ImportError:
        print("\nComputation rate per scheme")
        for name, entry in results.items():
            print(f"  {name:12s} {entry['solution'].objective:.6g} bits")
        print(f"\nreport: {report_path}")


def cmd_solve(args: argparse.Namespace) -> int:
    """solve 子命令"""
    loaded = load_config(args.config)
    config = loaded.solver_config()
    inst = loaded.instance()
    solver = CooperativeSolver(config, keep_history=False)
    results = solver.solve_all(inst, tuple(loaded.run.instance.schemes))
    output_dir = args.output or default_output("solve", loaded)
    path = solver.save_report(inst, results, output_dir, header=loaded.echo())
    print_solve_summary(results, path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def write_sweep_csv(table: SweepTable, loaded: LoadedConfig, path: Path) -> Path:
    """保存扫描结果 (CSV, '#' 开头的行为参数回显)"""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for line in header_lines(loaded):
            f.write(line + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in table.rows:
            writer.writerow([fmt(getattr(row, col)) for col in CSV_COLUMNS])
    return path


def print_sweep_summary(table: SweepTable, path: Path) -> None:
    """打印扫描摘要"""
    try:
        from rich.console import Console
        from rich.table import Table

        console = Console()
        out = Table(title=f"Mean computation rate vs {table.config.variable}")
        out.add_column(table.config.variable, style="cyan", justify="right")
        for scheme in table.config.schemes:
            out.add_column(scheme, justify="right")
        for value in table.config.values:
            out.add_row(fmt(value), *(f"{table.row(value, s).mean_bits:.6g}" for s in table.config.schemes))
        console.print(out)
        if table.failures:
            console.print(f"[yellow]{len(table.failures)} failed trials[/yellow]")
        console.print(f"[bold]csv:[/bold] {path}")

    except ImportError:
        print(f"\nsweep over {table.config.variable}: {len(table.rows)} rows, {len(table.failures)} failures")
        print(f"csv: {path}")


def cmd_sweep(args: argparse.Namespace) -> int:
    """sweep 子命令"""
    loaded = load_config(args.config)
    section = loaded.run.sweep
    if section is None:
        raise ConfigError("missing required section [sweep]", key="sweep")
    config = loaded.solver_config()
    cfg = SweepConfig(
        variable=section.variable,
        values=tuple(section.values),
        trials=section.trials,
        seed=section.seed,
        schemes=tuple(section.schemes),
    )
    solver = CooperativeSolver(config, keep_history=False)
    table = run_sweep(cfg, loaded.template(), loaded.geometry(), runner=solver.run_scheme, threads=config.threads)

    output_dir = args.output or default_output("sweep", loaded)
    path = write_sweep_csv(table, loaded, output_dir / f"{loaded.path.stem}.csv")
    print_sweep_summary(table, path)
    if table.failures and all(r.failures == r.trials for r in table.rows):
        logger.error("every trial failed")
        return EXIT_SOLVER
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def print_verify_summary(outcomes: list[VerifyOutcome], tols: tuple[float, float, float]) -> None:
    """打印校验摘要"""
    worst_dev = max((o.deviation for o in outcomes), default=0.0)
    worst_gap = max((o.gap for o in outcomes), default=0.0)
    worst_kkt = max((o.kkt for o in outcomes), default=0.0)
    failed = [o for o in outcomes if not o.passed(*tols)]
    try:
        from rich.console import Console
        from rich.table import Table

        console = Console()
        table = Table(title="Solver vs exhaustive search")
        table.add_column("seed", style="cyan", justify="right")
        table.add_column("solver bits", justify="right")
        table.add_column("oracle bits", justify="right")
        table.add_column("deviation", justify="right")
        table.add_column("gap", justify="right")
        table.add_column("KKT", justify="right")
        table.add_column("status")
        for o in outcomes:
            status = "[green]ok[/green]" if o.passed(*tols) else f"[red]FAIL[/red] {o.error or ''}"
            table.add_row(str(o.seed), f"{o.solver_bits:.9g}", f"{o.oracle_bits:.9g}",
                          f"{o.deviation:.2e}", f"{o.gap:.2e}", f"{o.kkt:.2e}", status)
        console.print(table)
        console.print(f"max deviation {worst_dev:.3e} (tol {tols[0]:g}), "
                      f"max gap {worst_gap:.3e} (tol {tols[1]:g}), "
                      f"max KKT residual {worst_kkt:.3e} (tol {tols[2]:g})")
        console.print(f"[bold]{len(outcomes) - len(failed)}/{len(outcomes)} passed[/bold]")

    except ImportError:
        for o in failed:
            print(f"seed {o.seed}: FAIL deviation={o.deviation:.3e} gap={o.gap:.3e} kkt={o.kkt:.3e} {o.error or ''}")
        print(f"max deviation {worst_dev:.3e}, max gap {worst_gap:.3e}, max KKT residual {worst_kkt:.3e}")
        print(f"{len(outcomes) - len(failed)}/{len(outcomes)} passed")


def cmd_verify(args: argparse.Namespace) -> int:
    """verify 子命令"""
    loaded = load_config(args.config)
    section = loaded.run.verify
    if section is None:
        raise ConfigError("missing required section [verify]", key="verify")
    if loaded.run.instance.K != 1:
        raise ConfigError("verify compares against exhaustive search and needs K = 1", key="instance.K")
    config = loaded.solver_config()
    solver = CooperativeSolver(config, keep_history=False)
    template, geom = loaded.template(), loaded.geometry()
    seeds = range(section.seed_start, section.seed_start + section.seeds)

    def run(seed: int) -> VerifyOutcome:
        return solver.verify(sample_channels(geom, template, seed), seed, section.resolution)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(run, seeds))
    else:
        outcomes = [run(seed) for seed in seeds]

    tols = (section.oracle_tol, section.gap_tol, section.kkt_tol)
    print_verify_summary(outcomes, tols)
    return EXIT_OK if all(o.passed(*tols) for o in outcomes) else EXIT_SOLVER


def default_output(command: str, loaded: LoadedConfig) -> Path:
    """默认输出目录"""
    return Path(__file__).resolve().parent.parent / "output" / command / loaded.path.stem


def main(argv: list[str] | None = None) -> int:
    """主函数"""
    parser = argparse.ArgumentParser(
        description='Wireless-powered cooperative computation: solver and experiments',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
示例:
  python scripts/main.py solve configs/solve.ini
  python scripts/main.py sweep configs/sweep_T.ini --output ./output/sweep_T
  python scripts/main.py verify configs/verify.ini -v

环境变量:
  {ENV_THREADS}            sweep / verify 线程数
  {ENV_LAMBDA_MIN}         能量乘子下界
  {ENV_MAX_ITER_PER_DIM}   椭球法每维迭代上限
"""
    )
    sub = parser.add_subparsers(dest='command', required=True)
    commands = {
        'solve': (cmd_solve, '求解单个实例并写出 report.json'),
        'sweep': (cmd_sweep, '蒙特卡洛扫描并写出 CSV'),
        'verify': (cmd_verify, '与穷举搜索对比 (K = 1)'),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument('config', type=Path, help='配置文件路径')
        p.add_argument('--output', '-o', type=Path, default=None, help='输出目录 (默认: ./output/<command>/<config>)')
        p.add_argument('--verbose', '-v', action='store_true', help='输出详细日志')
        p.set_defaults(func=func)

    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        return args.func(args)

    except KeyboardInterrupt:
        print("\n\n⚠️ 用户取消操作")
        return 130

    except WptccError as e:
        code = exit_code_for(e)
        key = getattr(e, "key", None)
        where = f" [{key}]" if key else ""
        print(f"❌ {type(e).__name__}{where}: {e}", file=sys.stderr)
        if args.verbose:
            logging.exception("命令失败")
        return code


if __name__ == '__main__':
    sys.exit(main())
