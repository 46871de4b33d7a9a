from core.management.base import RobustnessCommand


class Command(RobustnessCommand):
    help = 'Compute the generalized robustness of an object'
    command_name = 'robustness'
