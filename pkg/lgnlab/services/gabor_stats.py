from __future__ import annotations

import argparse

from ..clients.kmat_io import load_bank, load_kmat
from ..core.config import LabConfig
from ..core.gabor import (
    FilterBank,
    effective_bank,
    fit_bank,
    fit_ringach_lines,
    ringach_point,
    save_scatter_csv,
)
from .common import print_resolved


class GaborFitService:
    name = "gabor-fit"

    def __init__(self, config: LabConfig, threads: int = 0):
        self.config = config
        self.threads = threads

    def register(self, subparsers) -> None:
        parser = subparsers.add_parser(self.name, help="滤波器组 Gabor 拟合 + Ringach 分段直线")
        parser.add_argument("--bank", required=True, help="KBANK 文件或 KMAT 目录")
        parser.add_argument("--psi0", default=None, help="先与 Ψ⁰ 卷积得到等效滤波器")
        parser.add_argument("--scatter", default=None, help="输出 (n_x, n_y) 散点 CSV")

    def handle(self, args: argparse.Namespace) -> int:
        print_resolved(
            self.name,
            {"bank": args.bank, "psi0": args.psi0, "scatter": args.scatter, "threads": self.threads},
        )
        bank = FilterBank(load_bank(args.bank))
        if args.psi0:
            bank = effective_bank(load_kmat(args.psi0, kernel=True), bank)
        fits = fit_bank(bank, threads=self.threads)
        if args.scatter:
            save_scatter_csv(args.scatter, fits)
        print(format_fit_summary(fits))
        if len(fits) >= 4:
            piecewise = fit_ringach_lines([ringach_point(params) for params, _ in fits])
            x_b, y_b = piecewise.breakpoint
            print(
                f"alpha,{piecewise.alpha!r}\n"
                f"breakpoint,{x_b!r},{y_b!r}\n"
                f"slope2,{piecewise.slope2!r}\n"
                f"sse,{piecewise.sse!r}"
            )
        return 0


def format_fit_summary(fits) -> str:
    corrs = [corr for _, corr in fits]
    mean_corr = sum(corrs) / len(corrs)
    return f"filters,{len(fits)}\nmean_corr,{mean_corr!r}"
