from core.management.base import RobustnessCommand


class Command(RobustnessCommand):
    help = 'Best success probability of free objects in a witness or replayed game'
    command_name = 'maxfree'
