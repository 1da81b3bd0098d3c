import sys

from rrdps.cli.main import parse_and_dispatch

sys.exit(parse_and_dispatch(sys.argv[1:]))
