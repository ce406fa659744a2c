from __future__ import annotations

import argparse
from pathlib import Path

from ..clients.checkpoints import save_checkpoint
from ..clients.idx_io import load_idx_pair
from ..core.config import LabConfig
from ..core.errors import ArgumentError
from ..core.toy_data import STANDARD_TEST_SIZE, STANDARD_TRAIN_SIZE, build_binary_dataset
from ..core.toy_net import ToyModel
from ..core.toy_train import save_loss_curve, train
from .common import maybe_preview, print_resolved

SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def load_split(directory: str | Path, split: str):
    """按标准文件名读取一个目录下的 IDX 图像与标签"""
    directory = Path(directory)
    images_name, labels_name = SPLIT_FILES[split]
    images_path = directory / images_name
    labels_path = directory / labels_name
    for path in (images_path, labels_path):
        if not path.exists():
            raise ArgumentError(f"找不到 IDX 文件: {path}（需预先解压）")
    images, _ = load_idx_pair(images_path, labels_path)
    return images


class TrainToyService:
    name = "train-toy"

    def __init__(self, config: LabConfig, threads: int = 0):
        self.config = config
        self.threads = threads

    def register(self, subparsers) -> None:
        parser = subparsers.add_parser(self.name, help="训练单滤波器玩具网络（MNIST vs Fashion-MNIST）")
        parser.add_argument("--mnist-dir", required=True)
        parser.add_argument("--fashion-dir", required=True)
        parser.add_argument("--epochs", type=int, default=None)
        parser.add_argument("--lr", type=float, default=None)
        parser.add_argument("--momentum", type=float, default=None)
        parser.add_argument("--l2", type=float, default=None)
        parser.add_argument("--batch-size", type=int, default=None)
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--augmentation", default=None, help="none / mild / hard")
        parser.add_argument("--train-size", type=int, default=STANDARD_TRAIN_SIZE)
        parser.add_argument("--test-size", type=int, default=STANDARD_TEST_SIZE)
        parser.add_argument("--checkpoint", default=None, help="输出 TOYMODEL 检查点")
        parser.add_argument("--loss-csv", default=None)
        parser.add_argument("--preview", default=None, help="Ψ⁰ 预览 PNG")

    def handle(self, args: argparse.Namespace) -> int:
        cfg = self.config.train_config(
            epochs=args.epochs,
            lr=args.lr,
            momentum=args.momentum,
            l2=args.l2,
            batch_size=args.batch_size,
            seed=args.seed,
            augmentation=args.augmentation,
        )
        print_resolved(
            self.name,
            {
                "mnist_dir": args.mnist_dir,
                "fashion_dir": args.fashion_dir,
                "train_size": args.train_size,
                "test_size": args.test_size,
                "epochs": cfg.epochs,
                "lr": cfg.lr,
                "momentum": cfg.momentum,
                "l2": cfg.l2,
                "batch_size": cfg.batch_size,
                "lr_drop_factor": cfg.lr_drop_factor,
                "lr_drop_period": cfg.lr_drop_period,
                "seed": cfg.seed,
                "augmentation": cfg.augmentation,
            },
        )
        train_set, test_set = build_binary_dataset(
            load_split(args.mnist_dir, "train"),
            load_split(args.fashion_dir, "train"),
            load_split(args.mnist_dir, "test"),
            load_split(args.fashion_dir, "test"),
            seed=cfg.seed,
            train_size=args.train_size,
            test_size=args.test_size,
        )
        model = ToyModel.init(cfg.seed)
        report = train(model, train_set, cfg, test=test_set)
        if args.checkpoint:
            save_checkpoint(args.checkpoint, model)
        if args.loss_csv:
            save_loss_curve(args.loss_csv, report)
        maybe_preview(args.preview, model.psi0)
        symmetry = report.psi0_symmetry.correlation if report.psi0_symmetry else float("nan")
        print(
            f"final_test_accuracy,{report.final_test_accuracy!r}\n"
            f"final_loss,{report.loss_curve[-1]!r}\n"
            f"psi_s_corr,{symmetry!r}\n"
            f"gaussian_fit_corr,{report.gaussian_fit_corr!r}"
        )
        return 0
