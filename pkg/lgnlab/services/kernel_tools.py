from __future__ import annotations

import argparse
import csv
import sys

from ..clients.checkpoints import load_checkpoint
from ..clients.kmat_io import load_kmat
from ..core.config import LabConfig
from ..core.errors import ArgumentError
from ..core.kernels import fit_log, symmetrize, symmetry_sweep
from ..core.log import logger
from ..core.toy_train import analyze_psi0
from .common import (
    KERNEL_NAMES,
    build_kernel,
    maybe_preview,
    print_resolved,
    write_kernel,
)


class KernelService:
    """kernel：生成内置核"""

    name = "kernel"

    def __init__(self, config: LabConfig, threads: int = 0):
        self.config = config
        self.threads = threads

    def register(self, subparsers) -> None:
        parser = subparsers.add_parser(self.name, help="生成 Gaussian / LoG / Laplacian / delta 核")
        parser.add_argument("--type", dest="kernel_type", choices=KERNEL_NAMES, default="minus-log")
        parser.add_argument("--side", type=int, default=None)
        parser.add_argument("--sigma", type=float, default=None)
        parser.add_argument("--alpha", type=float, default=1.0)
        parser.add_argument("--out", default=None, help="输出 KMAT，缺省打印到 stdout")
        parser.add_argument("--preview", default=None)

    def handle(self, args: argparse.Namespace) -> int:
        side = args.side if args.side is not None else int(self.config.get("log_side", 7))
        sigma = args.sigma if args.sigma is not None else float(self.config.get("log_sigma", 1.5))
        print_resolved(
            self.name,
            {"type": args.kernel_type, "side": side, "sigma": sigma, "alpha": args.alpha, "out": args.out},
        )
        kernel = build_kernel(args.kernel_type, side, sigma, args.alpha)
        write_kernel(args.out, kernel, [f"{args.kernel_type} side={side} sigma={sigma!r}"])
        maybe_preview(args.preview, kernel)
        return 0


class SymmetrizeService:
    name = "symmetrize"

    def __init__(self, config: LabConfig, threads: int = 0):
        self.config = config
        self.threads = threads

    def register(self, subparsers) -> None:
        parser = subparsers.add_parser(self.name, help="旋转对称化 KMAT 核，输出 Ψ_S 与相关系数")
        parser.add_argument("--in", dest="input", required=True)
        parser.add_argument("--out", default=None)
        parser.add_argument("--preview", default=None)

    def handle(self, args: argparse.Namespace) -> int:
        print_resolved(self.name, {"in": args.input, "out": args.out, "threads": self.threads})
        kernel = load_kmat(args.input, kernel=True)
        report = symmetrize(kernel, threads=self.threads)
        write_kernel(args.out, report.symmetrized, [f"symmetrized corr={report.correlation!r}"])
        print(f"correlation,{report.correlation!r}")
        maybe_preview(args.preview, report.symmetrized)
        return 0


class SweepService:
    name = "sweep"

    def __init__(self, config: LabConfig, threads: int = 0):
        self.config = config
        self.threads = threads

    def register(self, subparsers) -> None:
        parser = subparsers.add_parser(self.name, help="多个 Ψ⁰ 的对称性 / LoG 相关表")
        parser.add_argument("kernels", nargs="+", help="KMAT 文件")
        parser.add_argument("--out", default=None, help="输出 CSV，缺省打印到 stdout")

    def handle(self, args: argparse.Namespace) -> int:
        print_resolved(self.name, {"kernels": args.kernels, "out": args.out})
        labeled = [(path, load_kmat(path, kernel=True)) for path in args.kernels]
        rows = symmetry_sweep(labeled, threads=self.threads)
        handle = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
        try:
            writer = csv.writer(handle)
            writer.writerow(["label", "psi_s_corr", "log_corr", "log_sigma"])
            for row in rows:
                writer.writerow([row.label, repr(row.psi_s_corr), repr(row.log_corr), repr(row.log_sigma)])
        finally:
            if args.out:
                handle.close()
        return 0


class AnalyzePsi0Service:
    name = "analyze-psi0"

    def __init__(self, config: LabConfig, threads: int = 0):
        self.config = config
        self.threads = threads

    def register(self, subparsers) -> None:
        parser = subparsers.add_parser(self.name, help="检查点或 KMAT 中 Ψ⁰ 的对称性与高斯拟合")
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--checkpoint", default=None)
        source.add_argument("--kmat", default=None)
        parser.add_argument("--out", default=None, help="输出 Ψ_S 的 KMAT")
        parser.add_argument("--preview", default=None)

    def handle(self, args: argparse.Namespace) -> int:
        print_resolved(self.name, {"checkpoint": args.checkpoint, "kmat": args.kmat, "out": args.out})
        if args.checkpoint:
            psi0 = load_checkpoint(args.checkpoint).psi0
        elif args.kmat:
            psi0 = load_kmat(args.kmat, kernel=True)
        else:
            raise ArgumentError("需要 --checkpoint 或 --kmat")
        symmetry, gaussian_corr = analyze_psi0(psi0)
        log_sigma, log_corr = fit_log(psi0)
        logger.info(f"Ψ⁰ 分析: 对称相关 {symmetry.correlation:.4f}，高斯拟合相关 {gaussian_corr:.4f}")
        print(format_psi0_report(symmetry.correlation, gaussian_corr, log_corr, log_sigma))
        if args.out:
            write_kernel(args.out, symmetry.symmetrized, ["psi0 symmetrized"])
        maybe_preview(args.preview, psi0)
        return 0


def format_psi0_report(psi_s_corr: float, gaussian_corr: float, log_corr: float, log_sigma: float) -> str:
    lines = [
        f"psi_s_corr,{psi_s_corr!r}",
        f"gaussian_fit_corr,{gaussian_corr!r}",
        f"log_corr,{log_corr!r}",
        f"log_sigma,{log_sigma!r}",
    ]
    return "\n".join(lines)
