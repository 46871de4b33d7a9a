from core.management.base import RobustnessCommand


class Command(RobustnessCommand):
    help = 'Compute the robustness and write the witness blocks'
    command_name = 'witness'
