from core.management.base import RobustnessCommand


class Command(RobustnessCommand):
    help = 'Build the discrimination game defined by the robustness witness'
    command_name = 'game'
