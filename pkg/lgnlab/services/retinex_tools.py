from __future__ import annotations

import argparse

from ..clients.image_files import load_image, load_image_dir
from ..clients.kmat_io import load_kmat
from ..clients.pgm_io import save_pgm
from ..core.config import LabConfig
from ..core.errors import ArgumentError
from ..core.inverse import invert_kernel, save_residual_csv, save_slice_csv
from ..core.retinex import (
    MeanPolicy,
    default_circle_centers,
    entropy_pipeline,
    format_probe_report,
    gradient_circles_image,
    reconstruct_with_probes,
    shadowed_checker_image,
)
from .common import (
    add_inverse_arguments,
    add_kernel_arguments,
    inverse_summary,
    maybe_preview,
    parse_point,
    print_resolved,
    resolve_inverse_config,
    resolve_kernel,
    write_kernel,
)

SYNTHETIC_STIMULI = ("circles", "checker")
CHECKER_PATCH = 16


class InvertService:
    name = "invert"

    def __init__(self, config: LabConfig, threads: int = 0):
        self.config = config
        self.threads = threads

    def register(self, subparsers) -> None:
        parser = subparsers.add_parser(self.name, help="迭代求逆卷积核 M̃")
        add_kernel_arguments(parser, default="laplacian")
        add_inverse_arguments(parser)
        parser.add_argument("--out", default=None, help="输出 M̃ 的 KMAT")
        parser.add_argument("--residual-csv", default=None)
        parser.add_argument("--slice-csv", default=None)
        parser.add_argument("--preview", default=None)

    def handle(self, args: argparse.Namespace) -> int:
        kernel = resolve_kernel(args, self.config)
        cfg = resolve_inverse_config(args, self.config)
        print_resolved(self.name, {"kernel": args.kernel, "kernel_side": kernel.shape[0], **inverse_summary(cfg)})
        result = invert_kernel(kernel, cfg)
        write_kernel(
            args.out,
            result.m_tilde,
            [f"inverse mode={cfg.mode.value} dt={cfg.dt!r} iterations={result.iterations}"],
        )
        if args.residual_csv:
            save_residual_csv(args.residual_csv, result)
        if args.slice_csv:
            save_slice_csv(args.slice_csv, result.m_tilde)
        maybe_preview(args.preview, result.m_tilde)
        print(
            f"converged,{str(result.converged).lower()}\n"
            f"iterations,{result.iterations}\n"
            f"residual_l1,{result.residual_l1!r}\n"
            f"leak_l1,{result.leak_l1!r}"
        )
        return 0


class RetinexService:
    name = "retinex"

    def __init__(self, config: LabConfig, threads: int = 0):
        self.config = config
        self.threads = threads

    def register(self, subparsers) -> None:
        parser = subparsers.add_parser(self.name, help="Retinex 重建与探测")
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--image", default=None, help="PGM / PNG / JPEG 等灰度图")
        source.add_argument("--synthetic", choices=SYNTHETIC_STIMULI, default=None)
        add_kernel_arguments(parser)
        add_inverse_arguments(parser)
        parser.add_argument("--mean-policy", default=None, help="match-input / zero-mean")
        parser.add_argument("--probe", action="append", default=[], metavar="ROW,COL")
        parser.add_argument("--probe-dots", action="store_true", help="探测合成刺激的两个目标点")
        parser.add_argument("--half-window", type=int, default=None)
        parser.add_argument("--out", default=None, help="输出重建图 PGM")
        parser.add_argument("--report", default=None, help="输出 label,before,after 报告")
        parser.add_argument("--preview", default=None)

    def _stimulus(self, args: argparse.Namespace):
        if args.image:
            return load_image(args.image), []
        if args.synthetic == "circles":
            rows = int(self.config.get("circles_rows", 128))
            cols = int(self.config.get("circles_cols", 256))
            left, right = default_circle_centers(rows, cols)
            image = gradient_circles_image(
                rows, cols, int(self.config.get("circles_dot_radius", 10)), left, right
            )
            return image, [("left", left), ("right", right)]
        image, a_center, b_center = shadowed_checker_image(
            int(self.config.get("circles_rows", 128)),
            int(self.config.get("circles_cols", 256)),
            CHECKER_PATCH,
        )
        return image, [("A", a_center), ("B", b_center)]

    def handle(self, args: argparse.Namespace) -> int:
        kernel = resolve_kernel(args, self.config)
        cfg = resolve_inverse_config(args, self.config)
        policy = MeanPolicy.parse(args.mean_policy or self.config.get("mean_policy", "match-input"))
        half_window = (
            args.half_window if args.half_window is not None else int(self.config.get("probe_half_window", 1))
        )
        image, dots = self._stimulus(args)
        if args.probe_dots and not dots:
            raise ArgumentError("--probe-dots 只能用于 --synthetic 刺激")
        points = list(dots) if args.probe_dots else []
        points.extend((f"P{i + 1}", parse_point(text)) for i, text in enumerate(args.probe))
        print_resolved(
            self.name,
            {
                "image": args.image,
                "synthetic": args.synthetic,
                "kernel": args.kernel,
                "mean_policy": policy,
                "half_window": half_window,
                "probes": [f"{label}@{r},{c}" for label, (r, c) in points],
                **inverse_summary(cfg),
            },
        )
        report = reconstruct_with_probes(
            image, kernel, cfg, points, half_window=half_window, mean_policy=policy
        )
        if args.out:
            save_pgm(args.out, report.reconstruction)
        text = format_probe_report(report)
        if args.report:
            with open(args.report, "w", encoding="utf-8") as f:
                f.write(text)
        print(text, end="")
        maybe_preview(args.preview, report.reconstruction)
        return 0


class EntropyService:
    name = "entropy"

    def __init__(self, config: LabConfig, threads: int = 0):
        self.config = config
        self.threads = threads

    def register(self, subparsers) -> None:
        parser = subparsers.add_parser(self.name, help="原图 / 卷积后 / 重建 的平均熵")
        parser.add_argument("--images", required=True, help="图像目录")
        parser.add_argument("--m-tilde", default=None, help="已求好的逆核 KMAT，缺省现场迭代")
        add_kernel_arguments(parser)
        add_inverse_arguments(parser)

    def handle(self, args: argparse.Namespace) -> int:
        kernel = resolve_kernel(args, self.config)
        cfg = resolve_inverse_config(args, self.config)
        print_resolved(
            self.name,
            {"images": args.images, "kernel": args.kernel, "threads": self.threads, **inverse_summary(cfg)},
        )
        images = [image for _, image in load_image_dir(args.images)]
        if not images:
            raise ArgumentError(f"目录中没有可读取的图像: {args.images}")
        if args.m_tilde:
            m_tilde = load_kmat(args.m_tilde, kernel=True)
        else:
            m_tilde = invert_kernel(kernel, cfg).m_tilde
        report = entropy_pipeline(images, kernel, cfg, threads=self.threads, m_tilde=m_tilde)
        print(
            f"h_orig,{report.h_orig!r}\n"
            f"h_conv,{report.h_conv!r}\n"
            f"h_recon,{report.h_recon!r}\n"
            f"recovered_fraction,{report.recovered_fraction!r}"
        )
        return 0
