# src/cli.py
"""
Командная строка лаборатории: python -m src <команда> [флаги].

Глобальные флаги (--seed, --reps, --alpha, --workers, --out, --config, --log-level)
ставятся перед командой. Результаты каждой команды пишутся в --out
(по умолчанию results/<команда>/).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .config import DEFAULTS, STATISTICS, ExperimentConfig
from .consistency_lab import (
    classify_family,
    compactness_demo,
    interaction_experiment,
    maxiset_scan,
    measure_approximation,
    purity_check,
)
from .cvm_tests import calibrate_cvm
from .errors import LabError
from .families import PRESETS, STATISTIC_BASIS, STATISTIC_SCALE, make_family
from .harness import IDENTITY_CHECKS, acceptance_checks, default_output_dir, run_suite
from .io import CVM_CACHE_PATH, load_manifest, safe_print, write_json, write_result_table
from .logs import configure_logging
from .quadratic_tests import make_kappa_family, validate_assumptions

logger = logging.getLogger(__name__)


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> List[int]:
    return [int(float(x)) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m src", description="Лаборатория непараметрических тестов")
    parser.add_argument("--seed", type=int, default=None, help="мастер-сид (u64)")
    parser.add_argument("--reps", type=int, default=None, help="число репликаций Монте-Карло")
    parser.add_argument("--alpha", type=float, default=None, help="уровень теста")
    parser.add_argument("--workers", type=int, default=DEFAULTS["workers"])
    parser.add_argument("--out", type=Path, default=None, help="каталог результатов")
    parser.add_argument("--config", type=Path, default=None, help="JSON-манифест экспериментов")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-assumptions", help="проверка A1–A6 для семейства весов")
    p.add_argument("--kind", choices=("example", "truncated", "flat"), default="example")
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--n-grid", type=_ints, default=[2**k for k in range(10, 15)])

    p = sub.add_parser("identity-check", help="точные тождества")
    p.add_argument("which", choices=sorted(IDENTITY_CHECKS))

    p = sub.add_parser("power", help="α̂ и β̂ на сетке n")
    p.add_argument("--statistic", choices=STATISTICS, default="quadratic")
    p.add_argument("--n-grid", type=_ints, default=[2**12])
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--preset", action="append", default=[], choices=sorted(PRESETS))
    p.add_argument("--noncentrality", type=_floats, default=[])
    p.add_argument("--amplitude", type=float, default=1.0)

    for name, text in (("classify", "классификация семейства"), ("purity", "чистая состоятельность"), ("maxiset", "разложение f = f1 + f2")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--preset", choices=sorted(PRESETS), default="all-low")
        p.add_argument("--statistic", choices=STATISTICS, default="quadratic")
        p.add_argument("--r", type=float, default=0.25)
        p.add_argument("--amplitude", type=float, default=1.0)
        p.add_argument("--n-grid", type=_ints, default=[2**k for k in range(8, 15, 2)])
        if name == "classify":
            p.add_argument("--c2-grid", type=_floats, default=[0.5, 1.0, 2.0, 4.0])
        if name == "purity":
            p.add_argument("--c1-grid", type=_floats, default=[1.0, 2.0, 4.0, 8.0, 16.0])
            p.add_argument("--epsilon", type=_floats, default=None)
        if name == "maxiset":
            p.add_argument("--c", type=float, default=1.0)
            p.add_argument("--cutoff-grid", type=_floats, default=None, help="дополнительно: β(f) против β(f1)")

    p = sub.add_parser("interaction", help="β(f) против β(f + g) на общих случайных числах")
    p.add_argument("--statistic", choices=STATISTICS, default="quadratic")
    p.add_argument("--consistent", choices=sorted(PRESETS), default="all-low")
    p.add_argument("--inconsistent", choices=sorted(PRESETS), default="escaping")
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--amplitude", type=float, default=1.5)
    p.add_argument("--n", type=int, default=2**12)

    p = sub.add_parser("demo-compactness", help="компактность множества альтернатив")
    p.add_argument("--set", dest="set_kind", choices=("l2_ball", "ellipsoid"), default="l2_ball")
    p.add_argument("--rho", type=float, default=0.15)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--directions", type=_ints, default=[1, 2, 3, 10, 100])
    p.add_argument("--mixture-dims", type=_ints, default=[1, 10, 100, 1000, 10_000])

    p = sub.add_parser("calibrate-cvm", help="критическое значение КфМ")
    p.add_argument("--J", type=int, default=DEFAULTS["cvm_J"])
    p.add_argument("--draws", type=int, default=DEFAULTS["cvm_draws"])
    p.add_argument("--cache", type=Path, default=CVM_CACHE_PATH)

    sub.add_parser("accept", help="полный приёмочный прогон")
    return parser


def _family(args: argparse.Namespace, preset: Optional[str] = None):
    return make_family(
        preset or args.preset,
        args.r,
        basis=STATISTIC_BASIS[args.statistic],
        amplitude=args.amplitude,
        scale_rule=STATISTIC_SCALE[args.statistic],
    )


def _power_manifest(args: argparse.Namespace) -> List[ExperimentConfig]:
    if args.config is not None:
        configs = load_manifest(args.config)
    else:
        alternatives: List[Dict[str, Any]] = [{"preset": p, "amplitude": args.amplitude} for p in args.preset]
        alternatives += [{"noncentrality": t} for t in args.noncentrality]
        configs = [
            ExperimentConfig(
                name=f"power-{args.statistic}",
                statistic=args.statistic,
                n_grid=args.n_grid,
                statistic_params={"r": args.r},
                alternatives=alternatives,
            )
        ]
    overrides = {k: getattr(args, k) for k in ("seed", "reps", "alpha") if getattr(args, k) is not None}
    out = []
    for config in configs:
        data = {**config.to_dict(), **overrides}
        out.append(ExperimentConfig.from_dict(data))
    return out


def _save_frame(frame: pd.DataFrame, out: Path, name: str) -> None:
    write_result_table(frame, out / f"{name}.csv")


def run_command(args: argparse.Namespace) -> int:
    out = Path(args.out) if args.out is not None else default_output_dir(args.command)
    seed = int(DEFAULTS["seed"] if args.seed is None else args.seed)
    reps = int(DEFAULTS["reps"] if args.reps is None else args.reps)
    alpha = float(DEFAULTS["alpha"] if args.alpha is None else args.alpha)
    cmd = args.command

    if cmd == "validate-assumptions":
        params = {"gamma": args.gamma} if args.kind == "example" else {}
        report = validate_assumptions(make_kappa_family(args.kind, args.r, **params), args.n_grid)
        _save_frame(report.to_frame(), out, "assumptions")
        _save_frame(report.per_n, out, "assumptions_per_n")
        safe_print(report.to_frame()[["assumption", "passed", "worst_ratio"]].to_string(index=False))
        return 0

    if cmd == "identity-check":
        check = IDENTITY_CHECKS[args.which](seed)
        write_json(check.to_dict(), out / f"identity_{args.which}.json")
        safe_print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.details}")
        return 0 if check.passed else 1

    if cmd == "power":
        suite = run_suite(_power_manifest(args), out=out, workers=args.workers)
        return suite.exit_code

    if cmd == "classify":
        report = classify_family(_family(args), args.statistic, args.n_grid, args.c2_grid)
        _save_frame(report.to_frame(), out, f"classify_{args.preset}")
        safe_print(f"{report.family} / {args.statistic}: {report.verdict} {report.witnesses}")
        return 0

    if cmd == "purity":
        report = purity_check(_family(args), args.statistic, args.n_grid, args.c1_grid, epsilon=args.epsilon)
        _save_frame(report.frame, out, f"purity_{args.preset}")
        if report.illegal_cutoffs:
            logger.warning("illegal tail cutoffs skipped: %s", report.illegal_cutoffs)
        safe_print(f"{report.family}: {report.verdict}, smallest C1 per ε: {report.smallest_c1}")
        return 0

    if cmd == "maxiset":
        family = _family(args)
        frame = maxiset_scan(family, args.statistic, args.n_grid, c=args.c)
        _save_frame(frame, out, f"maxiset_{args.preset}")
        if args.cutoff_grid:
            approx = measure_approximation(
                family, args.statistic, args.n_grid, args.cutoff_grid, alpha=alpha, params={"cvm_draws": 100_000}
            )
            _save_frame(approx, out, f"approximation_{args.preset}")
        safe_print(frame.to_string(index=False))
        return 0

    if cmd == "interaction":
        result = interaction_experiment(
            _family(args, args.consistent),
            _family(args, args.inconsistent),
            args.statistic,
            args.n,
            reps,
            seed,
            alpha=alpha,
            params={"r": args.r},
            workers=args.workers,
        )
        write_json(result.to_dict(), out / "interaction.json")
        safe_print(f"β(f)={result.beta_f.estimate:.4f} β(f+g)={result.beta_f_plus_g.estimate:.4f} diff={result.difference}")
        return 0

    if cmd == "demo-compactness":
        report = compactness_demo(
            args.set_kind, args.rho, args.directions, args.n, reps, seed,
            alpha=alpha, mixture_dims=args.mixture_dims, workers=args.workers,
        )
        _save_frame(report.directions, out, f"{args.set_kind}_directions")
        if report.mixture is not None:
            _save_frame(report.mixture, out, f"{args.set_kind}_mixture")
        write_json({"set_kind": report.set_kind, "minimax_power": report.minimax_power, **report.metadata}, out / f"{args.set_kind}.json")
        return 0

    if cmd == "calibrate-cvm":
        x_alpha = calibrate_cvm(alpha, J=args.J, draws=args.draws, seed=seed, cache=args.cache, workers=args.workers)
        safe_print(f"x_alpha={x_alpha:.6f} (alpha={alpha}, J={args.J}, draws={args.draws}, seed={seed})")
        return 0

    if cmd == "accept":
        suite = acceptance_checks(seed=seed, reps=int(args.reps or 100_000), workers=args.workers, out=out)
        return suite.exit_code

    raise LabError(f"Неизвестная команда: {cmd}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return run_command(args)
    except LabError as exc:
        logger.error("%s", exc)
        return 2
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
