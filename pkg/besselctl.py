#!/usr/bin/env python

import sys

from BesselHitting.apps import runner

COMMANDS = ('constants', 'tail', 'simulate', 'verify', 'rates')

def usage():
    print("usage: " + sys.argv[0] + " [--config <inifile>] <command> [<args>]")
    print()
    print("Commands:")
    print("  constants --nu NU --a A [--b B]      - constants of the tail expansion")
    print("  tail --nu NU --a A --b B --t-grid G  - tail table (closed form or oracle)")
    print("  simulate --nu NU --a A --t-grid G    - Monte Carlo estimates")
    print("  verify <suite>                       - identities, asymptotics, simulation or oracle")
    print("  rates --nu NU --a A --b B --t-grid G - remainder decay fit")
    print()
    print("Run '" + sys.argv[0] + " <command> --help' for the flags of a command.")

def main():
    argv = sys.argv[1:]
    words = [arg for arg in argv if not arg.startswith('-')]
    if not argv or argv[0] in ('-h', '--help') or not any(w in COMMANDS for w in words):
        usage()
        sys.exit(1)

    sys.exit(runner.main(argv))

if __name__ == "__main__":
    main()
