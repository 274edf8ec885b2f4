import argparse
import sys

from scinc.services.report_service import ReportService

report_service = ReportService()


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="Tabla resumen de trazas o curva de parámetros")
    parser.add_argument("traces", nargs="*", help="Archivos CSV de traza")
    parser.add_argument("--out", default=None, help="CSV de salida (además de stdout)")
    parser.add_argument("--xlsx", default=None, help="Exporta la tabla a Excel")
    parser.add_argument("--schedule-curve", action="store_true",
                        help="Emite (beta, delta_t_bar, sigma_bar) en lugar del resumen")
    parser.add_argument("--c", type=float, default=0.95)
    parser.add_argument("--nu", type=float, default=1000.0)
    parser.add_argument("--points", type=int, default=199)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    if args.schedule_curve:
        frame = report_service.schedule_curve_table(args.c, args.nu, args.points)
    else:
        frame = report_service.build_report(args.traces)
    sys.stdout.write(report_service.export(frame, out_path=args.out, xlsx_path=args.xlsx))
    return 0
