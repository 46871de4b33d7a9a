from core.management.base import RobustnessCommand


class Command(RobustnessCommand):
    help = 'Check that the witness game reproduces 1 + robustness'
    command_name = 'verify'
