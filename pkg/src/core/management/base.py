"""
Shared base for the robustness management commands.
"""
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from core.pipeline import EXIT_SOLVER, PipelineExecutor, RunConfig, exit_code_for, write_report

logger = logging.getLogger('robustness')


class RobustnessCommand(BaseCommand):
    """Parses the run configuration, runs the pipeline and writes the report"""
    command_name = None

    def add_arguments(self, parser):
        parser.add_argument('input', nargs='?', type=str, help='Object file (JSON or YAML)')
        parser.add_argument(
            '--free-set',
            type=str,
            help='Free set: jm, coexistence, lhs, incoherent or generated:<path>'
        )
        parser.add_argument(
            '--generators',
            type=str,
            help='Generator file of a finitely generated free set'
        )
        parser.add_argument(
            '--instrument',
            type=str,
            help='Instrument file that prepares an ensemble'
        )
        parser.add_argument(
            '--phases',
            type=int,
            help='Prepare the ensemble with the phase instrument of this many phases'
        )
        parser.add_argument('--tol-feas', type=float, help='Feasibility tolerance')
        parser.add_argument('--tol-gap', type=float, help='Duality gap tolerance')
        parser.add_argument('--tol-membership', type=float, help='Robustness below which an object counts as free')
        parser.add_argument('--output', type=str, help='Report path (default: REPORT_DIR/<command>-<input>.<format>)')
        parser.add_argument('--seed', type=int, help='Seed for sampled free objects (default: 0)')
        parser.add_argument('--samples', type=int, help='Number of sampled free objects (default: 200)')
        parser.add_argument('--format', type=str, choices=['json', 'yaml'], help='Report format (default: json)')
        parser.add_argument('--config', type=str, help='YAML run configuration; flags override its values')
        parser.add_argument(
            '--debug-solver',
            action='store_true',
            default=None,
            help='Print solver iterations and log at DEBUG level'
        )

    def handle(self, *args, **options):
        try:
            config = RunConfig.from_options(self.command_name, options)
            report = PipelineExecutor().run(config)
            write_report(report, config.output_path, config.format)
        except Exception as e:
            code = exit_code_for(e)
            if code is None:
                raise
            logger.error(f'{self.command_name} failed: {str(e)}')
            raise CommandError(f'{self.command_name} failed: {str(e)}', returncode=code)

        self.stdout.write(self.style.SUCCESS(self.summary(report, config)))
        if not report.get('passed', True):
            raise CommandError(
                f"ratio {report['ratio']:.12g} differs from 1 + R = {report['one_plus_r']:.12g} "
                f"by {report['discrepancy']:.3e}",
                returncode=EXIT_SOLVER
            )

    def summary(self, report, config):
        lines = [f'{self.command_name} finished for {Path(config.input).name}']
        for key in ('object_class', 'free_set', 't', 'gap', 'ratio', 'discrepancy', 'max_free_success_probability'):
            if key in report:
                lines.append(f'{key}: {report[key]}')
        lines.append(f'Report: {config.output_path}')
        return '\n'.join(lines)
