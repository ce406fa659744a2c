from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .core.config import LabConfig
from .core.errors import ArgumentError, LabError
from .core.log import logger, setup_logging
from .services.gabor_stats import GaborFitService
from .services.kernel_tools import (
    AnalyzePsi0Service,
    KernelService,
    SweepService,
    SymmetrizeService,
)
from .services.retinex_tools import EntropyService, InvertService, RetinexService
from .services.toy_training import TrainToyService

SERVICES = (
    KernelService,
    SymmetrizeService,
    InvertService,
    RetinexService,
    GaborFitService,
    TrainToyService,
    EntropyService,
    AnalyzePsi0Service,
    SweepService,
)


class _Parser(argparse.ArgumentParser):
    """用法错误改为抛出 ArgumentError，由 dispatch 统一转成退出码 1"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ArgumentError(message)


def _report_error(error: BaseException, code: str) -> None:
    print(f"ERROR {code}: {error}", file=sys.stderr)


class LGNLabApp:
    """LGN 数值实验命令行"""

    def __init__(self):
        self.services = {}

    def build_parser(self, config: LabConfig | None = None) -> _Parser:
        parser = _Parser(prog="lgnlab", description="LGN 卷积核、逆核 Retinex、Gabor 统计与玩具网络实验")
        parser.add_argument("--config", default=None, help="JSON 配置，覆盖 _conf_schema.json 的默认值")
        parser.add_argument("-v", "--verbose", action="count", default=0)
        subparsers = parser.add_subparsers(dest="command", metavar="<subcommand>")
        subparsers.required = True
        config = config or LabConfig.load()
        threads = LabConfig.threads()
        self.services = {}
        for service_cls in SERVICES:
            service = service_cls(config, threads)
            service.register(subparsers)
            self.services[service.name] = service
        return parser

    def dispatch(self, argv: Sequence[str] | None = None) -> int:
        argv = list(sys.argv[1:] if argv is None else argv)
        try:
            args = self.build_parser().parse_args(argv)
            setup_logging(args.verbose)
            if args.config:
                # 带配置重新构建，服务拿到的是覆盖后的配置
                args = self.build_parser(LabConfig.load(args.config)).parse_args(argv)
        except ArgumentError as e:
            _report_error(e, e.code)
            return e.exit_code
        except SystemExit as e:
            # --help
            return int(e.code or 0)

        service = self.services[args.command]
        try:
            return service.handle(args)
        except LabError as e:
            _report_error(e, e.code)
            return e.exit_code
        except OSError as e:
            _report_error(e, "io")
            return 2
        except Exception as e:
            logger.exception(f"{args.command} 执行异常")
            _report_error(e, "internal")
            return 2


def main(argv: Sequence[str] | None = None) -> int:
    return LGNLabApp().dispatch(argv)
