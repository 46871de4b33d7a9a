import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'pyrobust.settings')
django.setup()
