from core.management.base import RobustnessCommand


class Command(RobustnessCommand):
    help = 'Check an object file against the invariants of its class'
    command_name = 'validate'
